//! Asymptotic estimator functionals for the AR(1) coefficient under
//! additive-outlier contamination, their large-magnitude limit forms, and
//! finite-sample counterparts.
//!
//! Three estimators are covered:
//!
//! - OLS, with a closed-form contaminated value,
//! - LMS, the argmin over trial coefficients of the scale solving a
//!   chi-square mixture constraint,
//! - DR, the median-type root of a mixture of ratio-of-normals CDFs.
//!
//! An infinite outlier magnitude is accepted everywhere and dispatches to
//! analytic limit forms in which each mixture term with a diverging shift
//! degenerates to an indicator or a half.

use crate::model::Sample;
use crate::specfun;
use crate::{Error, Result};
use std::cmp::Ordering;

/// Ceiling for root brackets in `c`; exceeding it means no finite root.
const BRACKET_CAP: f64 = 1e12;

/// Which estimator a caller wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Ols,
    Lms,
    Dr,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Ols, EstimatorKind::Lms, EstimatorKind::Dr];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::Lms => "lms",
            EstimatorKind::Dr => "dr",
        }
    }

    /// Uppercase label used in reports and CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Ols => "OLS",
            EstimatorKind::Lms => "LMS",
            EstimatorKind::Dr => "DR",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(EstimatorKind::Ols),
            "lms" => Ok(EstimatorKind::Lms),
            "dr" => Ok(EstimatorKind::Dr),
            other => Err(Error::invalid(format!(
                "unknown estimator {other:?} (expected ols, lms, or dr)"
            ))),
        }
    }
}

/// Point in parameter space at which a functional is evaluated.
///
/// `zeta` may be `f64::INFINITY`, selecting the analytic limit forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalInput {
    pub theta: f64,
    pub p: f64,
    pub zeta: f64,
}

impl FunctionalInput {
    pub fn new(theta: f64, p: f64, zeta: f64) -> Result<Self> {
        if !(theta.abs() < 1.0) {
            return Err(Error::invalid(format!(
                "functional input requires |theta| < 1, got {theta}"
            )));
        }
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
        Ok(Self { theta, p, zeta })
    }

    /// Stationary marginal variance 1 / (1 - theta^2).
    pub fn variance(&self) -> f64 {
        1.0 / (1.0 - self.theta * self.theta)
    }
}

/// Tuning knobs for the LMS argmin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmsConfig {
    /// Number of trial-coefficient grid points over [-1, 1]; an odd count
    /// places 0 and both endpoints exactly on the grid.
    pub theta_tilde_grid: usize,
    /// Width tolerance for the golden-section refinement of the argmin.
    pub refine_tol: f64,
    /// Relative tolerance for the scale root in `c`.
    pub root_tol: f64,
}

impl Default for LmsConfig {
    fn default() -> Self {
        Self {
            theta_tilde_grid: 2001,
            refine_tol: 1e-6,
            root_tol: 1e-10,
        }
    }
}

impl LmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta_tilde_grid < 3 {
            return Err(Error::invalid(format!(
                "trial grid needs at least 3 points, got {}",
                self.theta_tilde_grid
            )));
        }
        if !(self.refine_tol > 0.0) || !(self.root_tol > 0.0) {
            return Err(Error::invalid(
                "tolerances must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Shared configuration for the asymptotic functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalConfig {
    pub lms: LmsConfig,
    /// Relative tolerance for the DR root in `c`.
    pub root_tol: f64,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self {
            lms: LmsConfig::default(),
            root_tol: 1e-10,
        }
    }
}

impl FunctionalConfig {
    pub fn validate(&self) -> Result<()> {
        self.lms.validate()?;
        if !(self.root_tol > 0.0) {
            return Err(Error::invalid("root tolerance must be positive".to_string()));
        }
        Ok(())
    }
}

/// Closed-form contaminated OLS value theta / (1 + p (1 - theta^2) zeta^2).
pub fn ols_functional(input: &FunctionalInput) -> f64 {
    let FunctionalInput { theta, p, zeta } = *input;
    if p == 0.0 || zeta == 0.0 || theta == 0.0 {
        return theta;
    }
    if zeta.is_infinite() {
        return 0.0;
    }
    theta / (1.0 + p * (1.0 - theta * theta) * zeta * zeta)
}

/// Residual variance inflation 1 + (theta - theta_tilde)^2 / (1 - theta^2).
pub fn tau_squared(theta: f64, theta_tilde: f64) -> Result<f64> {
    if !(theta.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "tau_squared requires |theta| < 1, got {theta}"
        )));
    }
    let d = theta - theta_tilde;
    Ok(1.0 + d * d / (1.0 - theta * theta))
}

/// Right-hand side of the LMS scale constraint at a finite outlier
/// magnitude: a five-term noncentral chi-square mixture in c, strictly
/// increasing from 0 to 1.
pub fn lms_constraint_rhs(c: f64, theta_tilde: f64, input: &FunctionalInput) -> Result<f64> {
    let FunctionalInput { theta, p, zeta } = *input;
    if !zeta.is_finite() {
        return Err(Error::invalid(
            "lms_constraint_rhs needs a finite magnitude; use lms_limit_scale".to_string(),
        ));
    }
    if c <= 0.0 {
        return Ok(0.0);
    }
    let tau2 = tau_squared(theta, theta_tilde)?;
    let x = c / tau2;
    let q = 1.0 - p;
    let z2 = zeta * zeta;
    let term = |noncentrality: f64| -> Result<f64> {
        let args = specfun::NoncentralChiSqArgs::new(noncentrality / tau2, 1.0)?;
        specfun::noncentral_chisq_cdf(x, &args)
    };
    let central = term(0.0)?;
    let mut rhs = q * q * central;
    if p > 0.0 {
        rhs += p
            * q
            * (term(z2)? + term(theta_tilde * theta_tilde * z2)?);
        let lo = (1.0 - theta_tilde) * (1.0 - theta_tilde) * z2;
        let hi = (1.0 + theta_tilde) * (1.0 + theta_tilde) * z2;
        rhs += 0.5 * p * p * (term(lo)? + term(hi)?);
    }
    Ok(rhs.clamp(0.0, 1.0))
}

/// Result of solving the scale constraint for one trial coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleOutcome {
    Bounded(f64),
    /// The limit constraint cannot reach 1/2: the surviving mixture mass is
    /// at most 1/2, so no finite scale exists.
    Unbounded,
}

/// Surviving mixture mass of the LMS constraint when the outlier magnitude
/// diverges: only terms whose noncentrality stays bounded keep their weight.
fn lms_limit_mass(theta_tilde: f64, p: f64) -> f64 {
    let q = 1.0 - p;
    if theta_tilde == 0.0 {
        q
    } else if theta_tilde.abs() == 1.0 {
        q * q + 0.5 * p * p
    } else {
        q * q
    }
}

/// Limit form of [`lms_scale`] at infinite outlier magnitude.
///
/// With surviving mass m the constraint degenerates to
/// m * chisq(c / tau^2) = 1/2, solvable iff m > 1/2.
pub fn lms_limit_scale(theta_tilde: f64, input: &FunctionalInput) -> Result<ScaleOutcome> {
    let m = lms_limit_mass(theta_tilde, input.p);
    if m <= 0.5 {
        return Ok(ScaleOutcome::Unbounded);
    }
    let tau2 = tau_squared(input.theta, theta_tilde)?;
    Ok(ScaleOutcome::Bounded(
        tau2 * specfun::chisq1_quantile(0.5 / m)?,
    ))
}

/// Smallest scale c >= 0 satisfying the LMS constraint for one trial
/// coefficient, by bracket expansion and bisection on the monotone
/// right-hand side.  Infinite magnitude dispatches to the limit form.
///
/// The no-root error fires when the bracket reaches c = 1e12 with the
/// constraint still below 1/2.
pub fn lms_scale(theta_tilde: f64, input: &FunctionalInput, root_tol: f64) -> Result<ScaleOutcome> {
    if input.zeta.is_infinite() {
        return lms_limit_scale(theta_tilde, input);
    }
    let tau2 = tau_squared(input.theta, theta_tilde)?;
    let pred = |c: f64| -> Result<bool> {
        Ok(lms_constraint_rhs(c, theta_tilde, input)? >= 0.5)
    };
    let mut hi = 2.0 * tau2;
    while !pred(hi)? {
        hi *= 4.0;
        if hi > BRACKET_CAP {
            return Err(Error::NoRoot(format!(
                "LMS constraint stays below 1/2 up to c = {BRACKET_CAP:e} \
                 (theta_tilde {theta_tilde}, p {}, zeta {})",
                input.p, input.zeta
            )));
        }
    }
    Ok(ScaleOutcome::Bounded(bisect_inf(pred, 0.0, hi, root_tol)?))
}

/// Bisection for inf{x : pred(x)} given !pred(lo) and pred(hi), to a
/// relative width tolerance.
fn bisect_inf<F>(mut pred: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    for _ in 0..200 {
        if hi - lo <= tol * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Orders argmin candidates (trial coefficient, scale): smaller scale wins,
/// ties go to the candidate nearest theta, then nearest 0, then nonnegative.
fn candidate_order(a: &(f64, f64), b: &(f64, f64), theta: f64) -> Ordering {
    a.1.total_cmp(&b.1)
        .then((a.0 - theta).abs().total_cmp(&(b.0 - theta).abs()))
        .then(a.0.abs().total_cmp(&b.0.abs()))
        .then((a.0 < 0.0).cmp(&(b.0 < 0.0)))
}

/// Golden-section minimization of f over [a, b] to an interval width `tol`.
/// Returns the best (x, f(x)) seen; f may return infinity.
fn golden_min<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// LMS functional: the trial coefficient in [-1, 1] whose scale is
/// smallest, located on a uniform grid and refined by golden section.
///
/// The grid scan keeps one incumbent (coefficient, scale) pair.  The
/// constraint right-hand side is nondecreasing in the scale, so a single
/// evaluation at the incumbent scale settles most candidates: a value
/// below 1/2 proves the candidate root lies above the incumbent scale (or
/// does not exist) and the candidate is skipped without a root search.
/// The scan starts at the grid point nearest theta and works outward,
/// which keeps improvements, and hence root searches, rare.
///
/// Trial coefficients with an unbounded limit scale are excluded from the
/// argmin; a finite-magnitude no-root outcome likewise removes just that
/// candidate.  If every candidate drops out in the limit regime, the
/// coefficient with the largest surviving mixture mass is returned (the
/// pointwise limit of the finite-magnitude argmin); if every candidate
/// drops out at finite magnitude, the no-root error propagates.
pub fn lms_functional(input: &FunctionalInput, cfg: &LmsConfig) -> Result<f64> {
    cfg.validate()?;
    let g = cfg.theta_tilde_grid;
    let grid: Vec<f64> = (0..g)
        .map(|i| -1.0 + 2.0 * i as f64 / (g - 1) as f64)
        .collect();

    if input.zeta.is_infinite() {
        return lms_functional_limit(input, cfg, &grid);
    }

    let try_root = |t: f64| -> Result<Option<f64>> {
        match lms_scale(t, input, cfg.root_tol) {
            Ok(ScaleOutcome::Bounded(c)) => Ok(Some(c)),
            Ok(ScaleOutcome::Unbounded) => Ok(None),
            Err(Error::NoRoot(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let center = (((input.theta + 1.0) * 0.5 * (g - 1) as f64).round() as usize).min(g - 1);
    let mut best: Option<(f64, f64)> = None;
    let visit = |idx: usize, best: &mut Option<(f64, f64)>| -> Result<()> {
        let t = grid[idx];
        match *best {
            None => {
                if let Some(c) = try_root(t)? {
                    *best = Some((t, c));
                }
            }
            Some(cur) => {
                if lms_constraint_rhs(cur.1, t, input)? < 0.5 {
                    return Ok(());
                }
                if let Some(c) = try_root(t)? {
                    let cand = (t, c);
                    if candidate_order(&cand, &cur, input.theta) == Ordering::Less {
                        *best = Some(cand);
                    }
                }
            }
        }
        Ok(())
    };
    visit(center, &mut best)?;
    for d in 1..g {
        if center + d < g {
            visit(center + d, &mut best)?;
        }
        if center >= d {
            visit(center - d, &mut best)?;
        }
    }

    let Some(mut winner) = best else {
        return Err(Error::NoRoot(format!(
            "LMS scale has no finite root for any trial coefficient \
             (theta {}, p {}, zeta {})",
            input.theta, input.p, input.zeta
        )));
    };

    // Refine inside the cell around the grid winner; the refined point only
    // replaces the winner if it genuinely improves on every grid candidate.
    let i = grid
        .iter()
        .position(|&t| t == winner.0)
        .expect("winner came from the grid");
    let lo = if i > 0 { grid[i - 1] } else { grid[0] };
    let hi = if i + 1 < g { grid[i + 1] } else { grid[g - 1] };
    let refined = golden_min(
        |t| Ok(try_root(t)?.unwrap_or(f64::INFINITY)),
        lo,
        hi,
        cfg.refine_tol,
    )?;
    if refined.1.is_finite() && candidate_order(&refined, &winner, input.theta) == Ordering::Less {
        winner = refined;
    }
    Ok(winner.0)
}

/// Infinite-magnitude arm of [`lms_functional`]: every candidate scale has
/// the closed limit form, so the full grid is evaluated directly.
fn lms_functional_limit(input: &FunctionalInput, cfg: &LmsConfig, grid: &[f64]) -> Result<f64> {
    let eval = |t: f64| -> Result<f64> {
        Ok(match lms_limit_scale(t, input)? {
            ScaleOutcome::Bounded(c) => c,
            ScaleOutcome::Unbounded => f64::INFINITY,
        })
    };

    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let c = eval(t)?;
        if c.is_finite() {
            let cand = (t, c);
            best = Some(match best {
                None => cand,
                Some(cur) => {
                    if candidate_order(&cand, &cur, input.theta) == Ordering::Less {
                        cand
                    } else {
                        cur
                    }
                }
            });
        }
    }

    let Some(mut winner) = best else {
        // Fall back to the largest surviving mass; this matches the
        // pointwise limit of the finite-magnitude argmin.
        let pick = grid
            .iter()
            .map(|&t| (t, -lms_limit_mass(t, input.p)))
            .min_by(|a, b| candidate_order(a, b, input.theta))
            .expect("grid is nonempty");
        return Ok(pick.0);
    };

    let g = grid.len();
    let i = grid
        .iter()
        .position(|&t| t == winner.0)
        .expect("winner came from the grid");
    let lo = if i > 0 { grid[i - 1] } else { grid[0] };
    let hi = if i + 1 < g { grid[i + 1] } else { grid[g - 1] };
    let refined = golden_min(eval, lo, hi, cfg.refine_tol)?;
    if refined.1.is_finite() && candidate_order(&refined, &winner, input.theta) == Ordering::Less {
        winner = refined;
    }
    Ok(winner.0)
}

/// Right-hand side of the DR root equation at a finite outlier magnitude: a
/// nine-term mixture of ratio-of-normals CDFs, nondecreasing in c.  Each
/// term shifts the numerator / denominator means by 0 or +-zeta; all share
/// the stationary variance and correlation theta.
pub fn dr_equation_rhs(c: f64, input: &FunctionalInput) -> Result<f64> {
    let FunctionalInput { theta, p, zeta } = *input;
    if !zeta.is_finite() {
        return Err(Error::invalid(
            "dr_equation_rhs needs a finite magnitude; use dr_limit_rhs".to_string(),
        ));
    }
    let var = input.variance();
    let g = |num: f64, den: f64| -> Result<f64> {
        let args = specfun::RatioNormalArgs::new(num, den, var, theta)?;
        specfun::ratio_normal_cdf(c, &args)
    };
    let q = 1.0 - p;
    let mut rhs = q * q * g(0.0, 0.0)?;
    if p > 0.0 {
        rhs += 0.5
            * p
            * q
            * (g(zeta, 0.0)? + g(0.0, zeta)? + g(-zeta, 0.0)? + g(0.0, -zeta)?);
        rhs += 0.25
            * p
            * p
            * (g(zeta, zeta)? + g(zeta, -zeta)? + g(-zeta, zeta)? + g(-zeta, -zeta)?);
    }
    Ok(rhs.clamp(0.0, 1.0))
}

/// Step indicator with a half at the jump: 0 below `at`, 1/2 at it, 1 above.
fn half_step(c: f64, at: f64) -> f64 {
    match c.partial_cmp(&at) {
        Some(Ordering::Greater) => 1.0,
        Some(Ordering::Equal) => 0.5,
        _ => 0.0,
    }
}

/// Limit form of [`dr_equation_rhs`] at infinite outlier magnitude.
///
/// Terms with a diverging numerator mean send mass half-and-half to the two
/// infinities (contributing 1/2 at every finite c); a diverging denominator
/// alone pins the ratio at 0, and matched shifts pin it at +1 or -1, so
/// those terms become step functions.
pub fn dr_limit_rhs(c: f64, input: &FunctionalInput) -> Result<f64> {
    let FunctionalInput { theta, p, .. } = *input;
    let var = input.variance();
    let args = specfun::RatioNormalArgs::new(0.0, 0.0, var, theta)?;
    let clean = specfun::ratio_normal_cdf(c, &args)?;
    let q = 1.0 - p;
    let rhs = q * q * clean
        + p * q * (0.5 + half_step(c, 0.0))
        + 0.5 * p * p * (half_step(c, 1.0) + half_step(c, -1.0));
    Ok(rhs.clamp(0.0, 1.0))
}

/// DR functional: inf{c : RHS(c) >= 1/2}, the lower median of the mixture.
/// The infimum convention makes the value well defined also when the
/// right-hand side jumps across 1/2, which is the normal situation at large
/// outlier magnitudes.
pub fn dr_functional(input: &FunctionalInput, root_tol: f64) -> Result<f64> {
    if !(root_tol > 0.0) {
        return Err(Error::invalid("root tolerance must be positive".to_string()));
    }
    let limit = input.zeta.is_infinite();
    let pred = |c: f64| -> Result<bool> {
        let r = if limit {
            dr_limit_rhs(c, input)?
        } else {
            dr_equation_rhs(c, input)?
        };
        Ok(r >= 0.5)
    };
    let mut lo = -2.0;
    let mut hi = 2.0;
    while pred(lo)? {
        lo *= 4.0;
        if lo < -BRACKET_CAP {
            return Err(Error::Numerical(
                "DR equation exceeds 1/2 at arbitrarily negative c".to_string(),
            ));
        }
    }
    while !pred(hi)? {
        hi *= 4.0;
        if hi > BRACKET_CAP {
            return Err(Error::NoRoot(format!(
                "DR equation stays below 1/2 up to c = {BRACKET_CAP:e} \
                 (theta {}, p {}, zeta {})",
                input.theta, input.p, input.zeta
            )));
        }
    }
    bisect_inf(pred, lo, hi, root_tol)
}

/// Unified dispatch over the three asymptotic functionals.
pub fn asymptotic_functional(
    kind: EstimatorKind,
    input: &FunctionalInput,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    match kind {
        EstimatorKind::Ols => Ok(ols_functional(input)),
        EstimatorKind::Lms => lms_functional(input, &cfg.lms),
        EstimatorKind::Dr => dr_functional(input, cfg.root_tol),
    }
}

/// Finite-sample estimate on an observed series.
///
/// OLS is the lag-1 regression through the origin; DR is the lower median
/// of the pairwise ratios Y_t / Y_{t-1} (pairs with a zero denominator are
/// dropped); LMS minimizes the low median (the (floor(m/2)+1)-th order
/// statistic over the m residuals) of squared lag-1 residuals over trial
/// coefficients in [-1, 1] by grid search plus golden-section refinement.
pub fn finite_sample_estimate(kind: EstimatorKind, sample: &Sample) -> Result<f64> {
    let n = sample.n();
    if n < 3 {
        return Err(Error::invalid(format!("need n >= 3 observations, got {n}")));
    }
    let y = &sample.values;
    let denom: f64 = y[..n - 1].iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateSample(
            "all lagged values are zero".to_string(),
        ));
    }
    match kind {
        EstimatorKind::Ols => {
            let num: f64 = (1..n).map(|t| y[t] * y[t - 1]).sum();
            Ok(num / denom)
        }
        EstimatorKind::Dr => {
            let mut ratios: Vec<f64> = (1..n)
                .filter(|&t| y[t - 1] != 0.0)
                .map(|t| y[t] / y[t - 1])
                .collect();
            if ratios.is_empty() {
                return Err(Error::DegenerateSample(
                    "no valid lag-1 ratios".to_string(),
                ));
            }
            let m = ratios.len();
            let idx = m.div_ceil(2) - 1;
            let (_, med, _) = ratios.select_nth_unstable_by(idx, f64::total_cmp);
            Ok(*med)
        }
        EstimatorKind::Lms => {
            let m = n - 1;
            let idx = m / 2;
            let mut buf = vec![0.0; m];
            let mut objective = |t: f64| -> Result<f64> {
                for (i, s) in buf.iter_mut().enumerate() {
                    let r = y[i + 1] - t * y[i];
                    *s = r * r;
                }
                let (_, v, _) = buf.select_nth_unstable_by(idx, f64::total_cmp);
                Ok(*v)
            };
            let grid_n = 2001;
            let mut best = (0.0, f64::INFINITY);
            for i in 0..grid_n {
                let t = -1.0 + 2.0 * i as f64 / (grid_n - 1) as f64;
                let v = objective(t)?;
                if v < best.1 {
                    best = (t, v);
                }
            }
            let lo = (best.0 - 2.0 / (grid_n - 1) as f64).max(-1.0);
            let hi = (best.0 + 2.0 / (grid_n - 1) as f64).min(1.0);
            let refined = golden_min(objective, lo, hi, 1e-6)?;
            Ok(if refined.1 < best.1 { refined.0 } else { best.0 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_ar1, ArParams, Contamination};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn input(theta: f64, p: f64, zeta: f64) -> FunctionalInput {
        FunctionalInput::new(theta, p, zeta).unwrap()
    }

    #[test]
    fn input_validation() {
        assert!(FunctionalInput::new(1.0, 0.1, 1.0).is_err());
        assert!(FunctionalInput::new(0.5, -0.1, 1.0).is_err());
        assert!(FunctionalInput::new(0.5, 1.1, 1.0).is_err());
        assert!(FunctionalInput::new(0.5, 0.1, -1.0).is_err());
        assert!(FunctionalInput::new(0.5, 0.1, f64::INFINITY).is_ok());
        assert!(FunctionalInput::new(0.5, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn ols_examples() {
        assert_eq!(ols_functional(&input(0.5, 0.0, 1e3)), 0.5);
        assert_eq!(ols_functional(&input(0.0, 0.3, 50.0)), 0.0);
        assert_abs_diff_eq!(
            ols_functional(&input(0.5, 0.05, 10.0)),
            0.5 / 4.75,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ols_functional(&input(0.5, 0.25, 10.0)),
            0.5 / 19.75,
            epsilon = 1e-15
        );
        assert_eq!(ols_functional(&input(0.5, 0.05, f64::INFINITY)), 0.0);
        assert_eq!(ols_functional(&input(0.5, 0.0, f64::INFINITY)), 0.5);
    }

    #[test]
    fn tau_squared_examples() {
        assert_eq!(tau_squared(0.3, 0.3).unwrap(), 1.0);
        assert_eq!(tau_squared(0.0, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(
            tau_squared(0.5, -0.5).unwrap(),
            1.0 + 1.0 / 0.75,
            epsilon = 1e-15
        );
        assert!(tau_squared(1.0, 0.0).is_err());
    }

    #[test]
    fn lms_rhs_endpoints_and_central_case() {
        let inp = input(0.5, 0.1, 10.0);
        assert_eq!(lms_constraint_rhs(0.0, 0.3, &inp).unwrap(), 0.0);
        assert_eq!(lms_constraint_rhs(-1.0, 0.3, &inp).unwrap(), 0.0);
        let big = lms_constraint_rhs(1e6, 0.3, &inp).unwrap();
        assert_abs_diff_eq!(big, 1.0, epsilon = 1e-8);
        // p = 0, zeta = 0 reduces to the central chi-square CDF.
        let clean = input(0.5, 0.0, 0.0);
        assert_abs_diff_eq!(
            lms_constraint_rhs(1.0, 0.5, &clean).unwrap(),
            2.0 * specfun::normal_cdf(1.0) - 1.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn lms_rhs_monotone_in_c() {
        for &(theta, tt, p, zeta) in &[
            (0.5, 0.2, 0.05, 100.0),
            (0.0, 0.9, 0.3, 5.0),
            (-0.7, -0.4, 0.5, 20.0),
        ] {
            let inp = input(theta, p, zeta);
            let mut prev = -1.0;
            for i in 0..1000 {
                let c = 0.05 * (i as f64 + 1.0);
                let v = lms_constraint_rhs(c, tt, &inp).unwrap();
                assert!(v + 1e-12 >= prev, "not monotone at c = {c}");
                prev = v;
            }
        }
    }

    #[test]
    fn lms_scale_clean_median() {
        // With no contamination (or at zero magnitude) the scale is the
        // median of chi-square(1), for any p.
        for &p in &[0.0, 0.25] {
            let inp = input(0.3, p, 0.0);
            match lms_scale(0.3, &inp, 1e-10).unwrap() {
                ScaleOutcome::Bounded(c) => {
                    assert_abs_diff_eq!(c, 0.45493642311957283, epsilon = 1e-9);
                }
                ScaleOutcome::Unbounded => panic!("expected bounded scale"),
            }
        }
    }

    #[test]
    fn lms_scale_against_grid_scan_oracle() {
        // Brute-force oracle: locate the 1/2 crossing on a fine uniform
        // c-grid and require the root to fall in the bracketing cell.
        let inp = input(0.5, 0.05, 100.0);
        let tt = 0.2;
        let root = match lms_scale(tt, &inp, 1e-10).unwrap() {
            ScaleOutcome::Bounded(c) => c,
            ScaleOutcome::Unbounded => panic!("expected bounded scale"),
        };
        let mut hi = 1.0;
        while lms_constraint_rhs(hi, tt, &inp).unwrap() < 0.5 {
            hi *= 2.0;
        }
        let n = 100_000;
        let step = hi / n as f64;
        let mut crossing = None;
        let mut prev = 0.0;
        for i in 1..=n {
            let c = step * i as f64;
            let v = lms_constraint_rhs(c, tt, &inp).unwrap();
            if prev < 0.5 && v >= 0.5 {
                crossing = Some((c - step, c));
                break;
            }
            prev = v;
        }
        let (lo, hi) = crossing.expect("scan must find the crossing");
        assert!(
            root >= lo - 1e-9 && root <= hi + 1e-9,
            "root {root} outside scan bracket [{lo}, {hi}]"
        );
    }

    #[test]
    fn lms_limit_scale_masses() {
        // Generic trial coefficient survives with mass (1-p)^2.
        let inp = input(0.5, 0.3, f64::INFINITY);
        assert_eq!(
            lms_limit_scale(0.4, &inp).unwrap(),
            ScaleOutcome::Unbounded
        );
        // At 0 the surviving mass is 1 - p = 0.7 > 1/2.
        match lms_limit_scale(0.0, &inp).unwrap() {
            ScaleOutcome::Bounded(c) => {
                let tau2 = tau_squared(0.5, 0.0).unwrap();
                let expect = tau2 * specfun::chisq1_quantile(0.5 / 0.7).unwrap();
                assert_abs_diff_eq!(c, expect, epsilon = 1e-12);
            }
            ScaleOutcome::Unbounded => panic!("expected bounded scale at 0"),
        }
        // At p = 0.05 every special coefficient survives.
        let inp = input(0.5, 0.05, f64::INFINITY);
        for &tt in &[-1.0, 0.0, 0.3, 1.0] {
            assert!(matches!(
                lms_limit_scale(tt, &inp).unwrap(),
                ScaleOutcome::Bounded(_)
            ));
        }
    }

    #[test]
    fn lms_scale_limit_agreement_at_large_zeta() {
        // Finite magnitude 1e6 must agree with the limit form wherever the
        // limit scale is bounded (surviving mass safely above 1/2).
        for &(p, tt) in &[(0.05, 0.37), (0.25, 0.37), (0.05, 0.0), (0.25, 1.0)] {
            let fin = input(0.5, p, 1e6);
            let lim = input(0.5, p, f64::INFINITY);
            let a = match lms_scale(tt, &fin, 1e-10).unwrap() {
                ScaleOutcome::Bounded(c) => c,
                ScaleOutcome::Unbounded => unreachable!(),
            };
            let b = match lms_scale(tt, &lim, 1e-10).unwrap() {
                ScaleOutcome::Bounded(c) => c,
                ScaleOutcome::Unbounded => panic!("limit unbounded at p={p}, tt={tt}"),
            };
            assert_abs_diff_eq!(a, b, epsilon = 1e-4);
        }
    }

    #[test]
    fn lms_functional_fisher_consistency() {
        let cfg = LmsConfig::default();
        for &theta in &[-0.9, -0.5, 0.0, 0.5, 0.9] {
            let clean = input(theta, 0.0, 17.0);
            let got = lms_functional(&clean, &cfg).unwrap();
            assert_abs_diff_eq!(got, theta, epsilon = 1e-4);
            let zero_zeta = input(theta, 0.35, 0.0);
            let got = lms_functional(&zero_zeta, &cfg).unwrap();
            assert_abs_diff_eq!(got, theta, epsilon = 1e-4);
        }
    }

    #[test]
    fn lms_functional_limit_image_points() {
        let cfg = LmsConfig::default();
        // p = 25%, infinite magnitude: values land on {-1, 0, +1}, with the
        // switch between 0 and +-1 in between.
        for &(theta, expect) in &[(0.3, 0.0), (0.6, 0.0), (0.9, 1.0), (-0.9, -1.0)] {
            let inp = input(theta, 0.25, f64::INFINITY);
            let got = lms_functional(&inp, &cfg).unwrap();
            assert_abs_diff_eq!(got, expect, epsilon = 1e-2);
        }
        // p = 50%: everything collapses to 0.
        for &theta in &[-0.8, 0.2, 0.6] {
            let inp = input(theta, 0.5, f64::INFINITY);
            let got = lms_functional(&inp, &cfg).unwrap();
            assert_abs_diff_eq!(got, 0.0, epsilon = 1e-3);
            let fin = input(theta, 0.5, 1e6);
            let got = lms_functional(&fin, &cfg).unwrap();
            assert_abs_diff_eq!(got, 0.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn dr_rhs_endpoints_median_and_monotonicity() {
        let inp = input(0.5, 0.25, 5.0);
        assert!(dr_equation_rhs(-1e9, &inp).unwrap() < 1e-6);
        assert!(dr_equation_rhs(1e9, &inp).unwrap() > 1.0 - 1e-6);
        // Clean case: median exactly at the correlation.
        let clean = input(0.7, 0.0, 5.0);
        assert_abs_diff_eq!(dr_equation_rhs(0.7, &clean).unwrap(), 0.5, epsilon = 1e-12);
        let mut prev = -1.0;
        for i in 0..1000 {
            let c = -5.0 + 0.01 * i as f64;
            let v = dr_equation_rhs(c, &inp).unwrap();
            assert!(v + 1e-12 >= prev, "not monotone at c = {c}");
            prev = v;
        }
    }

    #[test]
    fn dr_rhs_monte_carlo_oracle() {
        // Empirical CDF of the contaminated lag-1 ratio.
        let theta: f64 = 0.5;
        let p = 0.25;
        let zeta = 5.0;
        let c = 0.3;
        let inp = input(theta, p, zeta);
        let var = inp.variance();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0003);
        let n = 1_000_000;
        let mut hits = 0u64;
        let sd = var.sqrt();
        let draw_shift = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            let u: f64 = rand::Rng::random(rng);
            if u < p / 2.0 {
                zeta
            } else if u < p {
                -zeta
            } else {
                0.0
            }
        };
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            // Stationary lag-1 pair: unit-variance innovation on top of the
            // stationary marginal.
            let prev = sd * z1;
            let next = theta * prev + z2;
            let shift_num = draw_shift(&mut rng);
            let shift_den = draw_shift(&mut rng);
            if (next + shift_num) / (prev + shift_den) <= c {
                hits += 1;
            }
        }
        let emp = hits as f64 / n as f64;
        let got = dr_equation_rhs(c, &inp).unwrap();
        let se = (emp * (1.0 - emp) / n as f64).sqrt();
        assert!(
            (got - emp).abs() < 4.0 * se,
            "rhs {got} vs empirical {emp} (se {se})"
        );
    }

    #[test]
    fn dr_functional_fisher_consistency() {
        for &theta in &[-0.9, -0.3, 0.0, 0.45, 0.7] {
            let clean = input(theta, 0.0, 9.0);
            let got = dr_functional(&clean, 1e-10).unwrap();
            assert_abs_diff_eq!(got, theta, epsilon = 1e-6);
        }
    }

    #[test]
    fn dr_limit_matches_finite_at_p_zero() {
        let lim = input(0.6, 0.0, f64::INFINITY);
        let fin = input(0.6, 0.0, 3.0);
        for &c in &[-2.0, -0.3, 0.0, 0.6, 1.4] {
            assert_abs_diff_eq!(
                dr_limit_rhs(c, &lim).unwrap(),
                dr_equation_rhs(c, &fin).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn dr_collapses_to_zero_at_half() {
        for &theta in &[-0.8, 0.2, 0.6] {
            let lim = input(theta, 0.5, f64::INFINITY);
            let got = dr_functional(&lim, 1e-10).unwrap();
            assert_abs_diff_eq!(got, 0.0, epsilon = 1e-9);
            let fin = input(theta, 0.5, 1e6);
            let got = dr_functional(&fin, 1e-10).unwrap();
            assert_abs_diff_eq!(got, 0.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn dr_keeps_continuum_at_quarter() {
        // p = 25%, huge magnitude: theta above 1/2 maps to a value strictly
        // inside (0, 1) that moves with theta.  In the limit the unpinned
        // root has the closed form theta - sqrt((1 - theta^2) / 3), from
        // solving clean-CDF = 1/3 in the Cauchy form.
        for &theta in &[0.7f64, 0.8] {
            let expect = theta - ((1.0 - theta * theta) / 3.0).sqrt();
            let fin = dr_functional(&input(theta, 0.25, 1e6), 1e-10).unwrap();
            let lim = dr_functional(&input(theta, 0.25, f64::INFINITY), 1e-10).unwrap();
            assert_abs_diff_eq!(lim, expect, epsilon = 1e-9);
            assert_abs_diff_eq!(fin, expect, epsilon = 1e-4);
            assert!(fin > 1e-3 && fin < 1.0, "value {fin}");
        }
        // Below the pinning boundary theta = 1/2 the root sits at 0.
        let pinned = dr_functional(&input(0.3, 0.25, f64::INFINITY), 1e-10).unwrap();
        assert_abs_diff_eq!(pinned, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn odd_symmetry_of_functionals() {
        let cfg = FunctionalConfig::default();
        for kind in EstimatorKind::ALL {
            for &theta in &[0.3, 0.6] {
                for &p in &[0.1, 0.3] {
                    for &zeta in &[5.0, 1e3, f64::INFINITY] {
                        let pos =
                            asymptotic_functional(kind, &input(theta, p, zeta), &cfg).unwrap();
                        let neg =
                            asymptotic_functional(kind, &input(-theta, p, zeta), &cfg).unwrap();
                        assert_abs_diff_eq!(pos, -neg, epsilon = 2e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn ols_strictly_decreasing_in_zeta() {
        let mut prev = f64::INFINITY;
        for &zeta in &[0.0, 1.0, 5.0, 50.0, 1e4] {
            let v = ols_functional(&input(0.6, 0.2, zeta));
            assert!(v < prev || zeta == 0.0 && v == 0.6);
            prev = v;
        }
    }

    #[test]
    fn finite_sample_noiseless_recursion() {
        let mut values = vec![1.0f64];
        for _ in 1..50 {
            values.push(0.5 * values.last().unwrap());
        }
        let sample = Sample { values, seed: 0 };
        for kind in EstimatorKind::ALL {
            let est = finite_sample_estimate(kind, &sample).unwrap();
            assert_abs_diff_eq!(est, 0.5, epsilon = 1e-5);
        }
    }

    #[test]
    fn finite_sample_ols_tracks_functional() {
        let params = ArParams::new(0.5).unwrap();
        let clean = simulate_ar1(&params, 20_000, 123).unwrap();
        let cont = Contamination::fraction(0.05, 10.0).unwrap();
        let observed = crate::model::contaminate(&clean, &cont, 456).unwrap();
        let est = finite_sample_estimate(EstimatorKind::Ols, &observed).unwrap();
        let expect = ols_functional(&input(0.5, 0.05, 10.0));
        assert!(
            (est - expect).abs() < 0.05,
            "estimate {est} vs functional {expect}"
        );
    }

    #[test]
    fn finite_sample_ols_killed_by_one_huge_outlier() {
        let params = ArParams::new(0.5).unwrap();
        let clean = simulate_ar1(&params, 10_000, 7).unwrap();
        let cont = Contamination::count(1, 1e9)
            .unwrap()
            .with_positions(vec![5000])
            .unwrap()
            .with_signs(vec![1])
            .unwrap();
        let observed = crate::model::contaminate(&clean, &cont, 0).unwrap();
        let est = finite_sample_estimate(EstimatorKind::Ols, &observed).unwrap();
        assert!(est.abs() < 1e-3, "estimate {est}");
    }

    #[test]
    fn finite_sample_degenerate_and_short() {
        let zeros = Sample {
            values: vec![0.0; 10],
            seed: 0,
        };
        for kind in EstimatorKind::ALL {
            assert!(finite_sample_estimate(kind, &zeros).is_err());
        }
        let short = Sample {
            values: vec![1.0, 2.0],
            seed: 0,
        };
        assert!(finite_sample_estimate(EstimatorKind::Ols, &short).is_err());
    }

    #[test]
    fn lms_config_validation() {
        let cfg = LmsConfig {
            theta_tilde_grid: 2,
            ..LmsConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = LmsConfig {
            refine_tol: 0.0,
            ..LmsConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn estimator_kind_round_trip() {
        for kind in EstimatorKind::ALL {
            let parsed: EstimatorKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("lts".parse::<EstimatorKind>().is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ols_magnitude_never_exceeds_theta(
            theta in -0.99f64..0.99,
            p in 0.0f64..1.0,
            zeta in 0.0f64..1e4,
        ) {
            let inp = FunctionalInput::new(theta, p, zeta).unwrap();
            prop_assert!(ols_functional(&inp).abs() <= theta.abs() + 1e-15);
        }

        #[test]
        fn tau_squared_at_least_one(
            theta in -0.99f64..0.99,
            tt in -1.0f64..1.0,
        ) {
            prop_assert!(tau_squared(theta, tt).unwrap() >= 1.0);
        }

        #[test]
        fn lms_rhs_within_unit_interval(
            c in 0.0f64..1e4,
            theta in -0.9f64..0.9,
            tt in -1.0f64..1.0,
            p in 0.0f64..1.0,
            zeta in 0.0f64..1e3,
        ) {
            let inp = FunctionalInput::new(theta, p, zeta).unwrap();
            let v = lms_constraint_rhs(c, tt, &inp).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn dr_rhs_within_unit_interval(
            c in -100.0f64..100.0,
            theta in -0.9f64..0.9,
            p in 0.0f64..1.0,
            zeta in 0.0f64..1e3,
        ) {
            let inp = FunctionalInput::new(theta, p, zeta).unwrap();
            let v = dr_equation_rhs(c, &inp).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
