//! Badness sets as interval unions, and the breakdown-point searches over
//! the contamination fraction (asymptotic) and the outlier count (finite
//! sample).
//!
//! A badness set is the image of an estimator over a compact family of
//! processes under a fixed contamination. Breakdown is declared at the
//! smallest contamination for which the badness set's intersection with the
//! uncontaminated image loses essentially all Lebesgue measure, for every
//! tested compact family.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::estimators::{self, EstimatorKind, FunctionalConfig, FunctionalInput};
use crate::exec;
use crate::model::{self, Contamination, PairSample, Sample};
use crate::{Error, Result};

/// Intersection measure below which a badness set counts as collapsed.
pub const DEFAULT_COLLAPSE_EPS: f64 = 1e-3;
/// Width of the final bisection bracket over the contamination fraction.
pub const DEFAULT_P_TOLERANCE: f64 = 5e-4;
/// Distance kept between the stationary closure and the unit roots.
pub const STATIONARY_CLOSURE_EPS: f64 = 1e-4;
/// Default number of coefficient grid points per family.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Smallest coefficient cell the image refinement will bisect.
const REFINE_MIN_CELL: f64 = 1e-9;
/// Refinement evaluation budget, as a multiple of the base grid size.
const REFINE_BUDGET_FACTOR: usize = 4;

/// Ascending magnitude schedule ending in the infinite marker.
pub fn default_zeta_schedule() -> Vec<f64> {
    vec![10.0, 1e2, 1e3, 1e4, 1e6, f64::INFINITY]
}

/// Nested coefficient ranges checked alongside the base family before a
/// contamination level counts as broken.
pub fn default_witness_ranges() -> Vec<(f64, f64)> {
    vec![(-0.9, 0.9), (-0.5, 0.5), (0.1, 0.8)]
}

/// Formats a magnitude for CSV output; the infinite marker becomes "inf".
pub fn format_zeta(zeta: f64) -> String {
    if zeta.is_infinite() {
        "inf".to_string()
    } else {
        format!("{zeta}")
    }
}

/// A finite union of closed intervals, kept sorted and pairwise disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
        }
    }

    /// Builds a set from arbitrary closed intervals: rejects invalid
    /// endpoints, sorts, and merges any that overlap or touch.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self { intervals: merged })
    }

    /// Clusters image points into intervals: a gap wider than `merge_gap`
    /// starts a new interval, anything closer extends the current one.
    /// Isolated points become zero-length intervals.
    pub fn from_points(mut points: Vec<f64>, merge_gap: f64) -> Result<Self> {
        if !(merge_gap >= 0.0) {
            return Err(Error::invalid(format!(
                "merge gap must be >= 0, got {merge_gap}"
            )));
        }
        for &p in &points {
            if !p.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite image value {p} cannot enter an interval set"
                )));
            }
        }
        points.sort_by(f64::total_cmp);
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for p in points {
            match intervals.last_mut() {
                Some(last) if p - last.1 <= merge_gap => last.1 = p,
                _ => intervals.push((p, p)),
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length; isolated points contribute zero.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Smallest and largest covered value, if any.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let a = &self.intervals;
        let b = &other.intervals;
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }
}

/// A compact range of autoregressive coefficients with a uniform evaluation
/// grid, standing in for one compact process family.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessFamily {
    theta_lo: f64,
    theta_hi: f64,
    grid_points: usize,
}

impl ProcessFamily {
    pub fn new(theta_lo: f64, theta_hi: f64) -> Result<Self> {
        Self::with_grid(theta_lo, theta_hi, DEFAULT_GRID_POINTS)
    }

    pub fn with_grid(theta_lo: f64, theta_hi: f64, grid_points: usize) -> Result<Self> {
        if !theta_lo.is_finite()
            || !theta_hi.is_finite()
            || !(-1.0..1.0).contains(&theta_lo)
            || !(theta_lo < theta_hi && theta_hi <= 1.0)
        {
            return Err(Error::invalid(format!(
                "coefficient range must satisfy -1 <= lo < hi <= 1, got [{theta_lo}, {theta_hi}]"
            )));
        }
        if grid_points < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 grid points, got {grid_points}"
            )));
        }
        Ok(Self {
            theta_lo,
            theta_hi,
            grid_points,
        })
    }

    /// Compact closure of the stationary range, pulled inside the open
    /// interval by [`STATIONARY_CLOSURE_EPS`].
    pub fn stationary_closure() -> Self {
        Self {
            theta_lo: -1.0 + STATIONARY_CLOSURE_EPS,
            theta_hi: 1.0 - STATIONARY_CLOSURE_EPS,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn theta_lo(&self) -> f64 {
        self.theta_lo
    }

    pub fn theta_hi(&self) -> f64 {
        self.theta_hi
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// Uniform inclusive grid; the final point is exactly `theta_hi`.
    pub fn grid(&self) -> Vec<f64> {
        let g = self.grid_points;
        (0..g)
            .map(|i| {
                if i == g - 1 {
                    self.theta_hi
                } else {
                    self.theta_lo
                        + (self.theta_hi - self.theta_lo) * i as f64 / (g - 1) as f64
                }
            })
            .collect()
    }

    /// Restriction to `[lo, hi]`, keeping the grid size; `None` when the
    /// ranges do not overlap in more than a point.
    pub fn clipped(&self, lo: f64, hi: f64) -> Option<ProcessFamily> {
        let lo2 = lo.max(self.theta_lo);
        let hi2 = hi.min(self.theta_hi);
        if lo2 < hi2 {
            Some(ProcessFamily {
                theta_lo: lo2,
                theta_hi: hi2,
                grid_points: self.grid_points,
            })
        } else {
            None
        }
    }

    fn range(&self) -> (f64, f64) {
        (self.theta_lo, self.theta_hi)
    }
}

/// Merge gap used to cluster image points: four times the widest spacing
/// of the zero-contamination image, which is the grid itself.
pub fn default_merge_gap(family: &ProcessFamily) -> f64 {
    let grid = family.grid();
    let widest = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    4.0 * widest
}

/// Evaluates one asymptotic functional, admitting the closed coefficient
/// endpoints for OLS: the contamination term carries the factor
/// 1 - theta^2, which vanishes at a unit root, leaving the identity.
fn functional_at(
    kind: EstimatorKind,
    theta: f64,
    p: f64,
    zeta: f64,
    fcfg: &FunctionalConfig,
) -> Result<f64> {
    if theta.abs() == 1.0 {
        return match kind {
            EstimatorKind::Ols => Ok(theta),
            _ => Err(Error::invalid(format!(
                "{kind} functional is undefined at theta = {theta}"
            ))),
        };
    }
    let input = FunctionalInput::new(theta, p, zeta)?;
    estimators::asymptotic_functional(kind, &input, fcfg)
}

fn collect_results<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Functional image over the family grid, with adaptive refinement: any
/// adjacent pair of grid images further apart than `merge_gap` has its
/// coefficient cell bisected until the image gap closes, the cell shrinks
/// below [`REFINE_MIN_CELL`] (a genuine jump), or the evaluation budget
/// runs out.  Without refinement, a narrow surviving coefficient window
/// can fall between grid points and its image continuum goes unseen.
fn image_points(
    kind: EstimatorKind,
    family: &ProcessFamily,
    p: f64,
    zeta: f64,
    fcfg: &FunctionalConfig,
    merge_gap: f64,
) -> Result<Vec<f64>> {
    let thetas = family.grid();
    let vals = collect_results(exec::map_slice(&thetas, |&t| {
        functional_at(kind, t, p, zeta, fcfg)
    }))?;

    let cell = |a: f64, b: f64, va: f64, vb: f64| -> Option<(f64, f64, f64, f64)> {
        ((vb - va).abs() > merge_gap && b - a > REFINE_MIN_CELL).then_some((a, b, va, vb))
    };

    let mut points = vals.clone();
    let mut frontier: Vec<(f64, f64, f64, f64)> = (0..thetas.len() - 1)
        .filter_map(|i| cell(thetas[i], thetas[i + 1], vals[i], vals[i + 1]))
        .collect();
    let mut budget = REFINE_BUDGET_FACTOR * thetas.len();
    while !frontier.is_empty() && budget > 0 {
        if frontier.len() > budget {
            frontier.truncate(budget);
        }
        let mids: Vec<f64> = frontier.iter().map(|c| 0.5 * (c.0 + c.1)).collect();
        let mvals = collect_results(exec::map_slice(&mids, |&t| {
            functional_at(kind, t, p, zeta, fcfg)
        }))?;
        budget -= mids.len();
        let mut next = Vec::with_capacity(frontier.len());
        for (&(a, b, va, vb), (&m, &vm)) in frontier.iter().zip(mids.iter().zip(&mvals)) {
            points.push(vm);
            if let Some(c) = cell(a, m, va, vm) {
                next.push(c);
            }
            if let Some(c) = cell(m, b, vm, vb) {
                next.push(c);
            }
        }
        frontier = next;
    }
    Ok(points)
}

/// Badness set of one estimator over one family at contamination
/// (fraction p, magnitude zeta), using the family's default merge gap.
pub fn badness_set(
    kind: EstimatorKind,
    family: &ProcessFamily,
    p: f64,
    zeta: f64,
    fcfg: &FunctionalConfig,
) -> Result<IntervalSet> {
    badness_set_with(kind, family, p, zeta, fcfg, default_merge_gap(family))
}

/// [`badness_set`] with an explicit merge gap.  Zero contamination in
/// either coordinate short-circuits to the uncontaminated image, which is
/// the identity on the grid.
pub fn badness_set_with(
    kind: EstimatorKind,
    family: &ProcessFamily,
    p: f64,
    zeta: f64,
    fcfg: &FunctionalConfig,
    merge_gap: f64,
) -> Result<IntervalSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "outlier fraction must lie in [0, 1], got {p}"
        )));
    }
    if !(zeta >= 0.0) {
        return Err(Error::invalid(format!(
            "outlier magnitude must be >= 0 (or infinite), got {zeta}"
        )));
    }
    if p == 0.0 || zeta == 0.0 {
        return IntervalSet::from_points(family.grid(), merge_gap);
    }
    let points = image_points(kind, family, p, zeta, fcfg, merge_gap)?;
    IntervalSet::from_points(points, merge_gap)
}

fn clean_set(family: &ProcessFamily, merge_gap: f64) -> Result<IntervalSet> {
    IntervalSet::from_points(family.grid(), merge_gap)
}

/// Breakdown search mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdpMode {
    Asymptotic,
    FiniteSample,
}

impl fmt::Display for BdpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BdpMode::Asymptotic => "asymptotic",
            BdpMode::FiniteSample => "finite-sample",
        })
    }
}

/// One evaluated point of a breakdown search: the search variable is the
/// contamination fraction (asymptotic) or the outlier count (finite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub search_var: f64,
    pub zeta: f64,
    pub measure: f64,
}

/// Result of a breakdown search, with the evaluated trace and the
/// thresholds that produced the classification.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownReport {
    pub estimator: String,
    pub mode: BdpMode,
    pub bdp: f64,
    pub trace: Vec<TraceRow>,
    pub collapse_eps: f64,
    pub search_tolerance: f64,
    pub diagnostics: Vec<String>,
}

impl BreakdownReport {
    /// Summary line `estimator,bdp` with three decimals.
    pub fn summary_line(&self) -> String {
        format!("{},{:.3}", self.estimator, self.bdp)
    }

    /// Full trace as CSV with header
    /// `estimator,mode,search_var,zeta,measure`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("estimator,mode,search_var,zeta,measure\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.estimator,
                self.mode,
                row.search_var,
                format_zeta(row.zeta),
                row.measure
            ));
        }
        out
    }

    fn sort_trace(&mut self) {
        self.trace.sort_by(|a, b| {
            a.search_var
                .total_cmp(&b.search_var)
                .then(a.zeta.total_cmp(&b.zeta))
        });
    }
}

/// Settings for the asymptotic breakdown search.
#[derive(Debug, Clone)]
pub struct AsymptoticBdpConfig {
    pub collapse_eps: f64,
    pub p_tolerance: f64,
    /// Ascending magnitudes; the last entry must be the infinite marker.
    pub zeta_schedule: Vec<f64>,
    /// Extra compact ranges that must also collapse before a contamination
    /// level counts as broken; each is clipped to the base family.
    pub witnesses: Vec<(f64, f64)>,
    pub functional: FunctionalConfig,
}

impl Default for AsymptoticBdpConfig {
    fn default() -> Self {
        Self {
            collapse_eps: DEFAULT_COLLAPSE_EPS,
            p_tolerance: DEFAULT_P_TOLERANCE,
            zeta_schedule: default_zeta_schedule(),
            witnesses: default_witness_ranges(),
            functional: FunctionalConfig::default(),
        }
    }
}

impl AsymptoticBdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.collapse_eps > 0.0) {
            return Err(Error::invalid(format!(
                "collapse threshold must be > 0, got {}",
                self.collapse_eps
            )));
        }
        if !(self.p_tolerance > 0.0 && self.p_tolerance < 1.0) {
            return Err(Error::invalid(format!(
                "fraction tolerance must lie in (0, 1), got {}",
                self.p_tolerance
            )));
        }
        let s = &self.zeta_schedule;
        if s.is_empty() {
            return Err(Error::invalid("magnitude schedule is empty".to_string()));
        }
        if !s.windows(2).all(|w| w[0] < w[1]) || !(s[0] > 0.0) {
            return Err(Error::invalid(format!(
                "magnitude schedule must be positive and ascending, got {s:?}"
            )));
        }
        if !s.last().unwrap().is_infinite() {
            return Err(Error::invalid(
                "magnitude schedule must end with the infinite marker".to_string(),
            ));
        }
        self.functional.validate()
    }
}

struct WitnessCtx {
    family: ProcessFamily,
    clean: IntervalSet,
    gap: f64,
}

struct AsymptoticSearch<'a> {
    kind: EstimatorKind,
    family: &'a ProcessFamily,
    cfg: &'a AsymptoticBdpConfig,
    gap: f64,
    clean: IntervalSet,
    witnesses: Vec<WitnessCtx>,
    trace: Vec<TraceRow>,
    probes: Vec<(f64, bool)>,
    diagnostics: Vec<String>,
}

impl AsymptoticSearch<'_> {
    /// Schedule in probing order.  OLS walks it as given so its trace
    /// always carries every magnitude; the other estimators test the
    /// infinite marker first because the limit forms are cheapest and
    /// collapse, when present, is usually visible there.
    fn probe_schedule(&self) -> Vec<f64> {
        let mut s = self.cfg.zeta_schedule.clone();
        if self.kind != EstimatorKind::Ols {
            s.rotate_right(1);
        }
        s
    }

    fn base_broken(&mut self, p: f64) -> Result<bool> {
        let mut broken = false;
        for zeta in self.probe_schedule() {
            let set = badness_set_with(self.kind, self.family, p, zeta, &self.cfg.functional, self.gap)?;
            let measure = set.intersect(&self.clean).measure();
            self.trace.push(TraceRow {
                search_var: p,
                zeta,
                measure,
            });
            if measure < self.cfg.collapse_eps {
                broken = true;
                if self.kind != EstimatorKind::Ols {
                    break;
                }
            }
        }
        Ok(broken)
    }

    fn witness_broken(&self, w: &WitnessCtx, p: f64) -> Result<bool> {
        let mut schedule = self.cfg.zeta_schedule.clone();
        schedule.rotate_right(1);
        for zeta in schedule {
            let set = badness_set_with(self.kind, &w.family, p, zeta, &self.cfg.functional, w.gap)?;
            if set.intersect(&w.clean).measure() < self.cfg.collapse_eps {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn broken(&mut self, p: f64) -> Result<bool> {
        let mut verdict = self.base_broken(p)?;
        if verdict {
            for i in 0..self.witnesses.len() {
                let witness_holds = {
                    let w = &self.witnesses[i];
                    self.witness_broken(w, p)?
                };
                if !witness_holds {
                    let (lo, hi) = self.witnesses[i].family.range();
                    self.diagnostics.push(format!(
                        "witness range [{lo}, {hi}] kept measure above the collapse \
                         threshold at p = {p} while the base family collapsed"
                    ));
                    verdict = false;
                    break;
                }
            }
        }
        self.probes.push((p, verdict));
        Ok(verdict)
    }
}

fn build_witnesses(
    family: &ProcessFamily,
    cfg: &AsymptoticBdpConfig,
) -> Result<Vec<WitnessCtx>> {
    let mut out: Vec<WitnessCtx> = Vec::new();
    for &(lo, hi) in &cfg.witnesses {
        let Some(w) = family.clipped(lo, hi) else {
            continue;
        };
        if w.range() == family.range() || out.iter().any(|c| c.family.range() == w.range()) {
            continue;
        }
        let gap = default_merge_gap(&w);
        let clean = clean_set(&w, gap)?;
        // a range too small to discriminate would count as collapsed at
        // every contamination level, which adds nothing to the conjunction
        if clean.measure() <= cfg.collapse_eps {
            continue;
        }
        out.push(WitnessCtx {
            family: w,
            clean,
            gap,
        });
    }
    Ok(out)
}

fn require_interior(kind: EstimatorKind, family: &ProcessFamily) -> Result<()> {
    if kind != EstimatorKind::Ols && (family.theta_lo <= -1.0 || family.theta_hi >= 1.0) {
        return Err(Error::invalid(format!(
            "{kind} breakdown search needs the coefficient range inside (-1, 1), got [{}, {}]",
            family.theta_lo, family.theta_hi
        )));
    }
    Ok(())
}

/// Asymptotic breakdown point: bisection over the contamination fraction,
/// classifying a level as broken when, on the base family and on every
/// witness range, some schedule magnitude drives the intersection with the
/// uncontaminated image below the collapse threshold.  Returns the final
/// bracket midpoint along with the base-family trace.
pub fn asymptotic_bdp(
    kind: EstimatorKind,
    family: &ProcessFamily,
    cfg: &AsymptoticBdpConfig,
) -> Result<BreakdownReport> {
    cfg.validate()?;
    require_interior(kind, family)?;
    let gap = default_merge_gap(family);
    let clean = clean_set(family, gap)?;
    if clean.measure() <= cfg.collapse_eps {
        return Err(Error::invalid(format!(
            "uncontaminated badness measure {} does not exceed the collapse threshold {}",
            clean.measure(),
            cfg.collapse_eps
        )));
    }
    let witnesses = build_witnesses(family, cfg)?;
    let mut search = AsymptoticSearch {
        kind,
        family,
        cfg,
        gap,
        clean,
        witnesses,
        trace: Vec::new(),
        probes: Vec::new(),
        diagnostics: Vec::new(),
    };

    let broken_at_zero = search.broken(0.0)?;
    let broken_at_one = search.broken(1.0)?;
    let mut bdp = if broken_at_zero {
        search
            .diagnostics
            .push("collapse already at p = 0; reporting bdp = 0".to_string());
        0.0
    } else if !broken_at_one {
        search
            .diagnostics
            .push("no collapse found up to p = 1 within the magnitude schedule".to_string());
        1.0
    } else {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > cfg.p_tolerance {
            let mid = 0.5 * (lo + hi);
            if search.broken(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };

    search.probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(first_broken) = search.probes.iter().find(|pr| pr.1).map(|pr| pr.0) {
        if search
            .probes
            .iter()
            .any(|pr| !pr.1 && pr.0 > first_broken)
        {
            search.diagnostics.push(format!(
                "broken classification is not monotone in the contamination fraction; \
                 reporting the smallest broken probe {first_broken}"
            ));
            bdp = first_broken;
        }
    }

    let mut report = BreakdownReport {
        estimator: kind.label().to_string(),
        mode: BdpMode::Asymptotic,
        bdp,
        trace: search.trace,
        collapse_eps: cfg.collapse_eps,
        search_tolerance: cfg.p_tolerance,
        diagnostics: search.diagnostics,
    };
    report.sort_trace();
    Ok(report)
}

/// Estimator evaluated by the finite-sample breakdown search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiniteEstimator {
    Kind(EstimatorKind),
    ClampedOls,
    FracCounterexample,
}

impl FiniteEstimator {
    pub fn label(&self) -> &'static str {
        match self {
            FiniteEstimator::Kind(k) => k.label(),
            FiniteEstimator::ClampedOls => "clamped-ols",
            FiniteEstimator::FracCounterexample => "frac-counterexample",
        }
    }
}

/// Mesh of concrete samples standing in for one compact family.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleFamily {
    /// Autoregressive series over a coefficient range.
    Ar1 {
        theta_lo: f64,
        theta_hi: f64,
        mesh: usize,
    },
    /// Simple-regression samples over a slope range.
    Regression {
        slope_lo: f64,
        slope_hi: f64,
        mesh: usize,
    },
}

impl SampleFamily {
    pub fn default_ar1() -> Self {
        SampleFamily::Ar1 {
            theta_lo: -0.9,
            theta_hi: 0.9,
            mesh: 21,
        }
    }

    /// Slope range wide enough to saturate the clamp of the demo
    /// estimators at sample size n.
    pub fn default_regression(n: usize) -> Self {
        SampleFamily::Regression {
            slope_lo: -(n as f64 + 2.0),
            slope_hi: n as f64 + 2.0,
            mesh: 37,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SampleFamily::Ar1 {
                theta_lo,
                theta_hi,
                mesh,
            } => {
                if !(theta_lo.abs() < 1.0 && theta_hi.abs() < 1.0 && theta_lo < theta_hi) {
                    return Err(Error::invalid(format!(
                        "autoregressive family needs -1 < lo < hi < 1, got [{theta_lo}, {theta_hi}]"
                    )));
                }
                if mesh < 2 {
                    return Err(Error::invalid(format!("mesh must be >= 2, got {mesh}")));
                }
            }
            SampleFamily::Regression {
                slope_lo,
                slope_hi,
                mesh,
            } => {
                if !(slope_lo.is_finite() && slope_hi.is_finite() && slope_lo < slope_hi) {
                    return Err(Error::invalid(format!(
                        "slope family needs lo < hi, got [{slope_lo}, {slope_hi}]"
                    )));
                }
                if mesh < 2 {
                    return Err(Error::invalid(format!("mesh must be >= 2, got {mesh}")));
                }
            }
        }
        Ok(())
    }
}

/// Settings for the finite-sample breakdown search.
#[derive(Debug, Clone)]
pub struct FiniteBdpConfig {
    /// Observations per sample.
    pub n: usize,
    /// Independent samples drawn per mesh value.
    pub trials: usize,
    pub collapse_eps: f64,
    /// Ascending finite magnitudes tried for each outlier count.
    pub zeta_schedule: Vec<f64>,
    /// Largest outlier count tried; defaults to n.
    pub max_k: Option<usize>,
    /// Randomized position subsets tried per count, beyond the fixed
    /// first/last/spread patterns.
    pub random_position_sets: usize,
    pub seed: u64,
}

impl Default for FiniteBdpConfig {
    fn default() -> Self {
        Self {
            n: 25,
            trials: 5,
            collapse_eps: DEFAULT_COLLAPSE_EPS,
            zeta_schedule: vec![1e3, 1e6, 1e9],
            max_k: None,
            random_position_sets: 16,
            seed: 1729,
        }
    }
}

impl FiniteBdpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid(format!("need n >= 3, got {}", self.n)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("need at least 1 trial".to_string()));
        }
        if !(self.collapse_eps > 0.0) {
            return Err(Error::invalid(format!(
                "collapse threshold must be > 0, got {}",
                self.collapse_eps
            )));
        }
        let s = &self.zeta_schedule;
        if s.is_empty() || !s.windows(2).all(|w| w[0] < w[1]) || !(s[0] > 0.0) || !s.iter().all(|z| z.is_finite()) {
            return Err(Error::invalid(format!(
                "finite magnitude schedule must be positive, ascending, and finite, got {s:?}"
            )));
        }
        if let Some(k) = self.max_k {
            if k == 0 || k > self.n {
                return Err(Error::invalid(format!(
                    "count budget must lie in 1..=n, got {k}"
                )));
            }
        }
        Ok(())
    }
}

enum MeshSample {
    Ar(Sample),
    Pairs(PairSample),
}

fn build_mesh(
    est: FiniteEstimator,
    family: &SampleFamily,
    cfg: &FiniteBdpConfig,
) -> Result<Vec<MeshSample>> {
    family.validate()?;
    match (est, family) {
        (
            FiniteEstimator::Kind(_),
            &SampleFamily::Ar1 {
                theta_lo,
                theta_hi,
                mesh,
            },
        ) => {
            let mut out = Vec::with_capacity(mesh * cfg.trials);
            for i in 0..mesh {
                let theta = theta_lo + (theta_hi - theta_lo) * i as f64 / (mesh - 1) as f64;
                let params = model::ArParams::new(theta)?;
                for t in 0..cfg.trials {
                    let seed = cfg.seed.wrapping_add((i * cfg.trials + t) as u64);
                    out.push(MeshSample::Ar(model::simulate_ar1(&params, cfg.n, seed)?));
                }
            }
            Ok(out)
        }
        (
            FiniteEstimator::ClampedOls | FiniteEstimator::FracCounterexample,
            &SampleFamily::Regression {
                slope_lo,
                slope_hi,
                mesh,
            },
        ) => {
            let mut out = Vec::with_capacity(mesh * cfg.trials);
            for i in 0..mesh {
                let slope = slope_lo + (slope_hi - slope_lo) * i as f64 / (mesh - 1) as f64;
                for t in 0..cfg.trials {
                    let seed = cfg.seed.wrapping_add((i * cfg.trials + t) as u64);
                    out.push(MeshSample::Pairs(model::simulate_regression(
                        slope, cfg.n, seed,
                    )?));
                }
            }
            Ok(out)
        }
        _ => Err(Error::invalid(format!(
            "estimator {} does not match the given sample family",
            est.label()
        ))),
    }
}

fn finite_eval(est: FiniteEstimator, sample: &MeshSample) -> Result<f64> {
    match (est, sample) {
        (FiniteEstimator::Kind(k), MeshSample::Ar(s)) => estimators::finite_sample_estimate(k, s),
        (FiniteEstimator::ClampedOls, MeshSample::Pairs(p)) => model::clamped_ols_estimator(p),
        (FiniteEstimator::FracCounterexample, MeshSample::Pairs(p)) => {
            model::frac_counterexample_estimator(p)
        }
        _ => Err(Error::invalid(
            "estimator does not match the sample kind".to_string(),
        )),
    }
}

fn contaminated_estimates(
    est: FiniteEstimator,
    mesh: &[MeshSample],
    positions: &[usize],
    sign: i8,
    zeta: f64,
) -> Result<Vec<f64>> {
    collect_results(exec::map_slice(mesh, |sample| -> Result<f64> {
        let c = Contamination::count(positions.len(), zeta)?
            .with_positions(positions.to_vec())?
            .with_signs(vec![sign; positions.len()])?;
        match sample {
            MeshSample::Ar(s) => {
                finite_eval(est, &MeshSample::Ar(model::contaminate(s, &c, 0)?))
            }
            MeshSample::Pairs(p) => {
                finite_eval(est, &MeshSample::Pairs(model::contaminate_pairs(p, &c, 0)?))
            }
        }
    }))
}

/// Position subsets tried for one outlier count: the first k, the last k,
/// an evenly spread pattern, and seeded random k-subsets.
fn position_sets(n: usize, k: usize, random_sets: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let push_unique = |sets: &mut Vec<Vec<usize>>, s: Vec<usize>| {
        if !sets.contains(&s) {
            sets.push(s);
        }
    };
    push_unique(&mut sets, (0..k).collect());
    push_unique(&mut sets, (n - k..n).collect());
    let spread: Vec<usize> = if k == 1 {
        vec![n / 2]
    } else {
        (0..k).map(|i| i * (n - 1) / (k - 1)).collect()
    };
    push_unique(&mut sets, spread);
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..random_sets {
        let mut v = rand::seq::index::sample(&mut rng, n, k).into_vec();
        v.sort_unstable();
        push_unique(&mut sets, v);
    }
    sets
}

/// Merge gap for finite-sample images: four times the widest spacing of
/// the sorted uncontaminated estimates.
fn finite_merge_gap(clean: &[f64]) -> f64 {
    let mut v = clean.to_vec();
    v.sort_by(f64::total_cmp);
    4.0 * v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Finite-sample breakdown point over a budgeted adversarial grid: for
/// each outlier count k the search minimizes the intersection measure over
/// position subsets, a uniform outlier sign, and the magnitude schedule,
/// and reports (k - 1) / n for the smallest k that collapses.  Counts are
/// tried in increasing order; zero outliers reproduce the uncontaminated
/// image and never collapse.
pub fn finite_sample_bdp(
    est: FiniteEstimator,
    family: &SampleFamily,
    cfg: &FiniteBdpConfig,
) -> Result<BreakdownReport> {
    cfg.validate()?;
    let mesh = build_mesh(est, family, cfg)?;
    let clean_points = collect_results(exec::map_slice(&mesh, |s| finite_eval(est, s)))?;
    let gap = finite_merge_gap(&clean_points);
    let clean = IntervalSet::from_points(clean_points, gap)?;
    if clean.measure() <= cfg.collapse_eps {
        return Err(Error::invalid(format!(
            "uncontaminated badness measure {} does not exceed the collapse threshold {}; \
             enlarge the sample family",
            clean.measure(),
            cfg.collapse_eps
        )));
    }

    let mut trace = vec![TraceRow {
        search_var: 0.0,
        zeta: 0.0,
        measure: clean.measure(),
    }];
    let mut diagnostics = Vec::new();
    let max_k = cfg.max_k.unwrap_or(cfg.n).min(cfg.n);
    let mut bdp = None;

    for k in 1..=max_k {
        let sets = position_sets(cfg.n, k, cfg.random_position_sets, cfg.seed);
        let mut min_measure = f64::INFINITY;
        let mut min_zeta = *cfg.zeta_schedule.last().expect("validated nonempty");
        // largest magnitudes first: collapse, when reachable, shows up there
        'search: for &zeta in cfg.zeta_schedule.iter().rev() {
            for sign in [1i8, -1i8] {
                for positions in &sets {
                    let values = contaminated_estimates(est, &mesh, positions, sign, zeta)?;
                    let set = IntervalSet::from_points(values, gap)?;
                    let measure = set.intersect(&clean).measure();
                    if measure < min_measure {
                        min_measure = measure;
                        min_zeta = zeta;
                    }
                    if min_measure < cfg.collapse_eps {
                        break 'search;
                    }
                }
            }
        }
        trace.push(TraceRow {
            search_var: k as f64,
            zeta: min_zeta,
            measure: min_measure,
        });
        if min_measure < cfg.collapse_eps {
            bdp = Some((k - 1) as f64 / cfg.n as f64);
            break;
        }
    }

    let bdp = match bdp {
        Some(v) => v,
        None => {
            diagnostics.push(format!(
                "no collapse found up to k = {max_k} within the adversarial budget"
            ));
            1.0
        }
    };

    let mut report = BreakdownReport {
        estimator: est.label().to_string(),
        mode: BdpMode::FiniteSample,
        bdp,
        trace,
        collapse_eps: cfg.collapse_eps,
        search_tolerance: 1.0 / cfg.n as f64,
        diagnostics,
    };
    report.sort_trace();
    Ok(report)
}
