//! Command-line front end: badness-set sweeps, breakdown-point searches,
//! and finite-sample Monte Carlo, with CSV and self-contained SVG output.
//!
//! Subcommands share a flat `key=value` config file; command-line flags win
//! over file entries.  Identical config and seed produce byte-identical
//! CSV files.  Exit codes: 0 on success, 1 for validation and config
//! errors, 2 for numerical or I/O failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::breakdown::{
    self, asymptotic_bdp, badness_set_with, default_merge_gap, finite_sample_bdp,
    AsymptoticBdpConfig, BreakdownReport, FiniteBdpConfig, FiniteEstimator, IntervalSet,
    ProcessFamily, SampleFamily,
};
use crate::estimators::{self, EstimatorKind, FunctionalConfig};
use crate::exec;
use crate::model::{self, ArParams, Contamination};
use crate::{Error, Result};

const DEFAULT_SEED: u64 = 1729;
const DEFAULT_P_LIST: [f64; 3] = [0.05, 0.25, 0.5];
const BADNESS_GRID_POINTS: usize = 401;

/// Badness sweeps default to a log-spaced magnitude ladder over [1, 1e6]
/// (the 1-3-10 series) plus the infinite marker.
fn default_badness_sweep() -> Vec<f64> {
    let mut zetas = Vec::new();
    for decade in 0..6 {
        let base = 10f64.powi(decade);
        zetas.push(base);
        zetas.push(3.0 * base);
    }
    zetas.push(1e6);
    zetas.push(f64::INFINITY);
    zetas
}

#[derive(Parser, Debug)]
#[command(
    name = "ar1-breakdown",
    version,
    about = "Breakdown analysis for AR(1) estimators under additive outliers",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep badness-set intervals over the magnitude schedule and write
    /// one CSV per (estimator, contamination fraction) panel
    Badness(BadnessArgs),
    /// Search for breakdown points and write summary plus bisection trace
    Bdp(BdpArgs),
    /// Monte Carlo finite-sample estimates with per-trial CSV and summary
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Flat key=value config file; command-line flags win
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory [default: .]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Random seed [default: 1729]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output format: csv, svg, or both [default: csv]
    #[arg(long, value_name = "FMT")]
    format: Option<String>,

    /// Estimator selection: ols, lms, dr, or all [default: all]
    #[arg(long, value_name = "NAME")]
    estimator: Option<String>,

    /// Comma-separated contamination fractions [default: 0.05,0.25,0.5]
    #[arg(long, value_name = "LIST")]
    p: Option<String>,

    /// Comma-separated outlier magnitudes, ascending; "inf" marks the
    /// infinite magnitude [default: per subcommand]
    #[arg(long, value_name = "LIST")]
    zeta_schedule: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct BadnessArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Coefficient range LO:HI [default: -0.9999:0.9999]
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    theta_range: Option<String>,

    /// Coefficient grid points [default: 401]
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct BdpArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Coefficient range LO:HI [default: -0.9999:0.9999]
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    theta_range: Option<String>,

    /// Coefficient grid points [default: 2001]
    #[arg(long, value_name = "N")]
    grid: Option<usize>,

    /// Intersection measure below which a badness set counts as collapsed
    /// [default: 0.001]
    #[arg(long, value_name = "EPS")]
    collapse_eps: Option<f64>,

    /// Witness coefficient ranges LO:HI,LO:HI,... that must also collapse
    /// [default: -0.9:0.9,-0.5:0.5,0.1:0.8]
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    witnesses: Option<String>,

    /// Also run the finite-sample demo estimators (clamped OLS and the
    /// fractional-part counterexample)
    #[arg(long)]
    demo: bool,
}

#[derive(Args, Debug, Clone, Default)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Observations per sample [default: 1000]
    #[arg(long, value_name = "N")]
    n: Option<usize>,

    /// Monte Carlo trials per configuration [default: 20]
    #[arg(long, value_name = "N")]
    trials: Option<usize>,

    /// AR(1) coefficient (regression slope in demo mode) [default: 0.5]
    #[arg(long, value_name = "THETA", allow_negative_numbers = true)]
    theta: Option<f64>,

    /// Contaminate exactly K observations per trial instead of a fraction
    #[arg(long, value_name = "K")]
    k: Option<usize>,

    /// Run the finite-sample demo estimators on regression samples instead
    /// of the AR(1) estimators
    #[arg(long)]
    demo: bool,
}

/// Runs the CLI on the given argument list and returns the process exit
/// code.  Parse failures print to standard error and return 1; help and
/// version output return 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Badness(args) => cmd_badness(&args),
        Command::Bdp(args) => cmd_bdp(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Svg,
    Both,
}

impl OutputFormat {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::Config(format!(
                "unknown format {other:?} (expected csv, svg, or both)"
            ))),
        }
    }

    fn wants_csv(self) -> bool {
        self != OutputFormat::Svg
    }

    fn wants_svg(self) -> bool {
        self != OutputFormat::Csv
    }
}

/// Config file entries, keyed with the line number of each entry.
#[derive(Debug)]
struct ConfigMap {
    entries: BTreeMap<String, (String, usize)>,
    path: String,
}

/// Every key any subcommand understands; a key outside this list is an
/// error, a listed key is simply unused by subcommands it does not apply to.
const CONFIG_KEYS: [&str; 16] = [
    "out",
    "seed",
    "format",
    "estimator",
    "p",
    "zeta_schedule",
    "theta_range",
    "grid",
    "collapse_eps",
    "witnesses",
    "demo",
    "n",
    "trials",
    "theta",
    "k",
    "config",
];

impl ConfigMap {
    fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
            path: String::new(),
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let shown = path.display().to_string();
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{shown} line {line_no}: expected key=value, got {line:?}"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "{shown} line {line_no}: unknown key {key:?}"
                )));
            }
            if key == "config" {
                return Err(Error::Config(format!(
                    "{shown} line {line_no}: config files cannot nest"
                )));
            }
            if let Some((_, first)) = entries.get(&key) {
                return Err(Error::Config(format!(
                    "{shown} line {line_no}: key {key:?} already set on line {first}"
                )));
            }
            entries.insert(key, (value, line_no));
        }
        Ok(Self {
            entries,
            path: shown,
        })
    }

    /// Parses the value stored under `key`, labeling failures with the
    /// file and line.
    fn parse<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line_no)) => parse(value).map(Some).map_err(|err| {
                Error::Config(format!(
                    "{} line {line_no}: field {key:?}: {err}",
                    self.path
                ))
            }),
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ConfigMap> {
    match &common.config {
        Some(path) => ConfigMap::load(path),
        None => Ok(ConfigMap::empty()),
    }
}

fn parse_estimators(s: &str) -> Result<Vec<EstimatorKind>> {
    if s.trim() == "all" {
        return Ok(EstimatorKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for part in s.split(',') {
        let kind = part.trim().parse::<EstimatorKind>()?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(kinds)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("invalid number {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("invalid count {s:?}")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("invalid seed {s:?}")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("invalid boolean {other:?}"))),
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    let items: Vec<f64> = s
        .split(',')
        .filter(|part| !part.trim().is_empty())
        .map(parse_f64)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty list {s:?}")));
    }
    Ok(items)
}

fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    let ps = parse_f64_list(s)?;
    for &p in &ps {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "contamination fraction must lie in [0, 1], got {p}"
            )));
        }
    }
    Ok(ps)
}

fn parse_zeta_schedule(s: &str) -> Result<Vec<f64>> {
    let zetas = parse_f64_list(s)?;
    if !(zetas[0] > 0.0) || !zetas.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config(format!(
            "magnitude schedule must be positive and ascending, got {s:?}"
        )));
    }
    Ok(zetas)
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let Some((lo, hi)) = s.split_once(':') else {
        return Err(Error::Config(format!("expected LO:HI, got {s:?}")));
    };
    Ok((parse_f64(lo)?, parse_f64(hi)?))
}

fn parse_witnesses(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(parse_range)
        .collect()
}

/// Flag value if given, else config-file value, else the default.
fn resolve<T>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    parse: impl Fn(&str) -> Result<T>,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(cfg.parse(key, parse)?.unwrap_or(default))
}

struct CommonConfig {
    out: PathBuf,
    seed: u64,
    format: OutputFormat,
    estimators: Vec<EstimatorKind>,
    ps: Vec<f64>,
}

fn resolve_common(
    common: &CommonArgs,
    cfg: &ConfigMap,
) -> Result<CommonConfig> {
    let out = resolve(
        common.out.clone(),
        cfg,
        "out",
        |s| Ok(PathBuf::from(s)),
        PathBuf::from("."),
    )?;
    let seed = resolve(common.seed, cfg, "seed", parse_u64, DEFAULT_SEED)?;
    let format = resolve(
        common.format.as_deref().map(OutputFormat::parse).transpose()?,
        cfg,
        "format",
        OutputFormat::parse,
        OutputFormat::Csv,
    )?;
    let estimators = resolve(
        common
            .estimator
            .as_deref()
            .map(parse_estimators)
            .transpose()?,
        cfg,
        "estimator",
        parse_estimators,
        EstimatorKind::ALL.to_vec(),
    )?;
    let ps = resolve(
        common.p.as_deref().map(parse_fractions).transpose()?,
        cfg,
        "p",
        parse_fractions,
        DEFAULT_P_LIST.to_vec(),
    )?;
    Ok(CommonConfig {
        out,
        seed,
        format,
        estimators,
        ps,
    })
}

fn resolve_family(
    theta_range: Option<&str>,
    grid: Option<usize>,
    cfg: &ConfigMap,
    default_grid: usize,
) -> Result<ProcessFamily> {
    let closure = ProcessFamily::stationary_closure();
    let (lo, hi) = resolve(
        theta_range.map(parse_range).transpose()?,
        cfg,
        "theta_range",
        parse_range,
        (closure.theta_lo(), closure.theta_hi()),
    )?;
    let grid = resolve(grid, cfg, "grid", parse_usize, default_grid)?;
    ProcessFamily::with_grid(lo, hi, grid)
}

fn resolve_zetas(
    common: &CommonArgs,
    cfg: &ConfigMap,
    default: Vec<f64>,
) -> Result<Vec<f64>> {
    resolve(
        common
            .zeta_schedule
            .as_deref()
            .map(parse_zeta_schedule)
            .transpose()?,
        cfg,
        "zeta_schedule",
        parse_zeta_schedule,
        default,
    )
}

/// Writes `content` to `dir/name` atomically: the bytes land in a
/// temporary file first and are renamed into place.
fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let io_err = |source: std::io::Error, path: &Path| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(e, dir))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, content).map_err(|e| io_err(e, &tmp))?;
    fs::rename(&tmp, &target).map_err(|e| io_err(e, &target))?;
    Ok(target)
}

// ---------------------------------------------------------------------------
// badness

struct Panel {
    kind: EstimatorKind,
    p: f64,
    /// One badness set per schedule magnitude, in schedule order.
    sets: Vec<(f64, IntervalSet)>,
}

fn compute_panel(
    kind: EstimatorKind,
    family: &ProcessFamily,
    p: f64,
    zetas: &[f64],
    fcfg: &FunctionalConfig,
) -> Result<Panel> {
    let gap = default_merge_gap(family);
    let mut sets = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        let set = badness_set_with(kind, family, p, zeta, fcfg, gap)?;
        sets.push((zeta, set));
    }
    Ok(Panel { kind, p, sets })
}

fn panel_csv(panel: &Panel) -> String {
    let mut out = String::from("estimator,p,zeta,interval_lo,interval_hi\n");
    for (zeta, set) in &panel.sets {
        for &(lo, hi) in set.intervals() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                panel.kind.label(),
                panel.p,
                breakdown::format_zeta(*zeta),
                lo,
                hi
            );
        }
    }
    out
}

fn panel_file_name(kind: EstimatorKind, p: f64) -> String {
    format!("badness_{}_p{}.csv", kind.name(), p)
}

fn cmd_badness(args: &BadnessArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let common = resolve_common(&args.common, &cfg)?;
    let family = resolve_family(
        args.theta_range.as_deref(),
        args.grid,
        &cfg,
        BADNESS_GRID_POINTS,
    )?;
    let zetas = resolve_zetas(&args.common, &cfg, default_badness_sweep())?;
    let fcfg = FunctionalConfig::default();

    let mut panels = Vec::new();
    for &kind in &common.estimators {
        if kind != EstimatorKind::Ols && (family.theta_lo() <= -1.0 || family.theta_hi() >= 1.0) {
            return Err(Error::invalid(format!(
                "{kind} badness needs the coefficient range inside (-1, 1), got [{}, {}]",
                family.theta_lo(),
                family.theta_hi()
            )));
        }
        for &p in &common.ps {
            panels.push(compute_panel(kind, &family, p, &zetas, &fcfg)?);
        }
    }

    if common.format.wants_csv() {
        for panel in &panels {
            write_atomic(
                &common.out,
                &panel_file_name(panel.kind, panel.p),
                &panel_csv(panel),
            )?;
        }
    }
    if common.format.wants_svg() {
        write_atomic(&common.out, "badness.svg", &badness_svg(&panels))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG rendering

/// Maps a magnitude to a horizontal axis coordinate: log scale over the
/// finite span, with a separate lane on the right for the infinite marker.
struct ZetaAxis {
    log_lo: f64,
    log_hi: f64,
    x0: f64,
    x1: f64,
    inf_x: f64,
    has_inf: bool,
}

impl ZetaAxis {
    fn new(zetas: &[f64], x0: f64, x1: f64) -> Self {
        let finite: Vec<f64> = zetas.iter().copied().filter(|z| z.is_finite()).collect();
        let has_inf = zetas.iter().any(|z| z.is_infinite());
        let log_lo = finite.first().map_or(0.0, |z| z.log10());
        let log_hi = finite.last().map_or(6.0, |z| z.log10()).max(log_lo + 1e-9);
        let finite_x1 = if has_inf { x1 - 36.0 } else { x1 };
        Self {
            log_lo,
            log_hi,
            x0,
            x1: finite_x1,
            inf_x: x1 - 12.0,
            has_inf,
        }
    }

    fn x(&self, zeta: f64) -> f64 {
        if zeta.is_infinite() {
            return self.inf_x;
        }
        let t = (zeta.log10() - self.log_lo) / (self.log_hi - self.log_lo);
        self.x0 + t * (self.x1 - self.x0)
    }
}

fn svg_num(v: f64) -> String {
    format!("{:.2}", v)
}

fn badness_svg(panels: &[Panel]) -> String {
    const PANEL_W: f64 = 300.0;
    const PANEL_H: f64 = 200.0;
    const MARGIN_L: f64 = 58.0;
    const MARGIN_R: f64 = 16.0;
    const MARGIN_T: f64 = 42.0;
    const MARGIN_B: f64 = 46.0;
    const GAP: f64 = 14.0;

    let kinds: Vec<EstimatorKind> = {
        let mut ks = Vec::new();
        for panel in panels {
            if !ks.contains(&panel.kind) {
                ks.push(panel.kind);
            }
        }
        ks
    };
    let ps: Vec<f64> = {
        let mut ps = Vec::new();
        for panel in panels {
            if !ps.contains(&panel.p) {
                ps.push(panel.p);
            }
        }
        ps
    };
    let cols = ps.len().max(1);
    let rows = kinds.len().max(1);
    let width = MARGIN_L + cols as f64 * PANEL_W + (cols as f64 - 1.0) * GAP + MARGIN_R;
    let height = MARGIN_T + rows as f64 * PANEL_H + (rows as f64 - 1.0) * GAP + MARGIN_B;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">Badness sets over outlier magnitude</text>"#,
        width / 2.0
    );

    for panel in panels {
        let Some(row) = kinds.iter().position(|k| *k == panel.kind) else {
            continue;
        };
        let Some(col) = ps.iter().position(|p| *p == panel.p) else {
            continue;
        };
        let px = MARGIN_L + col as f64 * (PANEL_W + GAP);
        let py = MARGIN_T + row as f64 * (PANEL_H + GAP);
        let plot_x0 = px + 34.0;
        let plot_x1 = px + PANEL_W - 6.0;
        let plot_y0 = py + 20.0;
        let plot_y1 = py + PANEL_H - 24.0;

        let zetas: Vec<f64> = panel.sets.iter().map(|(z, _)| *z).collect();
        let axis = ZetaAxis::new(&zetas, plot_x0, plot_x1);

        let mut y_lo = -1.0f64;
        let mut y_hi = 1.0f64;
        for (_, set) in &panel.sets {
            if let Some((lo, hi)) = set.bounds() {
                y_lo = y_lo.min(lo);
                y_hi = y_hi.max(hi);
            }
        }
        let pad = 0.06 * (y_hi - y_lo);
        let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
        let y = |v: f64| plot_y1 - (v - y_lo) / (y_hi - y_lo) * (plot_y1 - plot_y0);

        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444" stroke-width="1"/>"##,
            svg_num(plot_x0),
            svg_num(plot_y0),
            svg_num(plot_x1 - plot_x0),
            svg_num(plot_y1 - plot_y0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}, p = {}</text>"#,
            svg_num((plot_x0 + plot_x1) / 2.0),
            svg_num(py + 12.0),
            panel.kind.label(),
            panel.p
        );

        for exp in 0..=6 {
            let zeta = 10f64.powi(exp);
            if zeta < 10f64.powf(axis.log_lo) - 1e-9 || zeta > 10f64.powf(axis.log_hi) + 1e-9 {
                continue;
            }
            let tx = axis.x(zeta);
            let _ = writeln!(
                svg,
                r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#bbb" stroke-width="0.5"/>"##,
                svg_num(tx),
                svg_num(plot_y0),
                svg_num(plot_y1)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">1e{}</text>"#,
                svg_num(tx),
                svg_num(plot_y1 + 12.0),
                exp
            );
        }
        if axis.has_inf {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">inf</text>"#,
                svg_num(axis.inf_x),
                svg_num(plot_y1 + 12.0)
            );
        }
        for v in [-1.0, 0.0, 1.0] {
            if v < y_lo || v > y_hi {
                continue;
            }
            let ty = y(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#ddd" stroke-width="0.5"/>"##,
                svg_num(plot_x0),
                svg_num(plot_x1),
                svg_num(ty)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end" font-size="9">{}</text>"#,
                svg_num(plot_x0 - 3.0),
                svg_num(ty + 3.0),
                v
            );
        }

        for (zeta, set) in &panel.sets {
            let sx = axis.x(*zeta);
            for &(lo, hi) in set.intervals() {
                // zero-length intervals still get a visible tick
                let (mut top, mut bot) = (y(hi), y(lo));
                if bot - top < 1.5 {
                    let mid = (top + bot) / 2.0;
                    top = mid - 0.75;
                    bot = mid + 0.75;
                }
                let _ = writeln!(
                    svg,
                    r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#1a6fb4" stroke-width="3" stroke-linecap="round"/>"##,
                    svg_num(sx),
                    svg_num(top),
                    svg_num(bot)
                );
            }
        }
    }

    let _ = writeln!(svg, "</svg>");
    svg
}

// ---------------------------------------------------------------------------
// bdp

fn summary_csv(reports: &[BreakdownReport]) -> String {
    let mut out = String::from("estimator,bdp\n");
    for report in reports {
        out.push_str(&report.summary_line());
        out.push('\n');
    }
    out
}

fn concatenated_trace_csv(reports: &[BreakdownReport]) -> String {
    let mut out = String::from("estimator,mode,search_var,zeta,measure\n");
    for report in reports {
        let body = report.trace_csv();
        out.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
    }
    out
}

fn report_diagnostics(report: &BreakdownReport) {
    for note in &report.diagnostics {
        eprintln!("note [{}]: {note}", report.estimator);
    }
}

fn cmd_bdp(args: &BdpArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let common = resolve_common(&args.common, &cfg)?;
    let family = resolve_family(
        args.theta_range.as_deref(),
        args.grid,
        &cfg,
        breakdown::DEFAULT_GRID_POINTS,
    )?;
    let collapse_eps = resolve(
        args.collapse_eps,
        &cfg,
        "collapse_eps",
        parse_f64,
        breakdown::DEFAULT_COLLAPSE_EPS,
    )?;
    let witnesses = resolve(
        args.witnesses.as_deref().map(parse_witnesses).transpose()?,
        &cfg,
        "witnesses",
        parse_witnesses,
        breakdown::default_witness_ranges(),
    )?;
    let mut zetas = resolve_zetas(&args.common, &cfg, breakdown::default_zeta_schedule())?;
    if zetas.last().is_some_and(|z| z.is_finite()) {
        zetas.push(f64::INFINITY);
    }
    let demo = args.demo || cfg.parse("demo", parse_bool)?.unwrap_or(false);

    let search_cfg = AsymptoticBdpConfig {
        collapse_eps,
        zeta_schedule: zetas,
        witnesses,
        ..AsymptoticBdpConfig::default()
    };

    let mut reports = Vec::new();
    for &kind in &common.estimators {
        let report = asymptotic_bdp(kind, &family, &search_cfg)?;
        report_diagnostics(&report);
        reports.push(report);
    }

    if common.format.wants_csv() {
        write_atomic(&common.out, "bdp_summary.csv", &summary_csv(&reports))?;
        write_atomic(
            &common.out,
            "bdp_trace.csv",
            &concatenated_trace_csv(&reports),
        )?;
    }

    if demo {
        let demo_cfg = FiniteBdpConfig {
            collapse_eps,
            seed: common.seed,
            ..FiniteBdpConfig::default()
        };
        let family = SampleFamily::default_regression(demo_cfg.n);
        let mut demo_reports = Vec::new();
        for est in [FiniteEstimator::ClampedOls, FiniteEstimator::FracCounterexample] {
            let report = finite_sample_bdp(est, &family, &demo_cfg)?;
            report_diagnostics(&report);
            demo_reports.push(report);
        }
        if common.format.wants_csv() {
            write_atomic(
                &common.out,
                "demo_bdp_summary.csv",
                &summary_csv(&demo_reports),
            )?;
            write_atomic(
                &common.out,
                "demo_bdp_trace.csv",
                &concatenated_trace_csv(&demo_reports),
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Copy, PartialEq)]
enum ContaminationLevel {
    Clean,
    Fraction(f64, f64),
    Count(usize, f64),
}

impl ContaminationLevel {
    fn mode(&self) -> &'static str {
        match self {
            ContaminationLevel::Clean => "clean",
            ContaminationLevel::Fraction(..) => "fraction",
            ContaminationLevel::Count(..) => "count",
        }
    }

    fn level(&self) -> f64 {
        match *self {
            ContaminationLevel::Clean => 0.0,
            ContaminationLevel::Fraction(p, _) => p,
            ContaminationLevel::Count(k, _) => k as f64,
        }
    }

    fn zeta(&self) -> f64 {
        match *self {
            ContaminationLevel::Clean => 0.0,
            ContaminationLevel::Fraction(_, z) | ContaminationLevel::Count(_, z) => z,
        }
    }

    fn contamination(&self) -> Result<Option<Contamination>> {
        match *self {
            ContaminationLevel::Clean => Ok(None),
            ContaminationLevel::Fraction(p, z) => Contamination::fraction(p, z).map(Some),
            ContaminationLevel::Count(k, z) => Contamination::count(k, z).map(Some),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimEstimator {
    Asymptotic(EstimatorKind),
    Demo(FiniteEstimator),
}

impl SimEstimator {
    fn label(&self) -> &'static str {
        match self {
            SimEstimator::Asymptotic(k) => k.label(),
            SimEstimator::Demo(d) => d.label(),
        }
    }
}

struct SimRun {
    estimator: SimEstimator,
    level: ContaminationLevel,
    estimates: Vec<f64>,
}

fn simulate_one(
    estimator: SimEstimator,
    level: &ContaminationLevel,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let contamination = level.contamination()?;
    let contamination_seed = seed ^ 0x9E37_79B9_7F4A_7C15;
    match estimator {
        SimEstimator::Asymptotic(kind) => {
            let params = ArParams::new(theta)?;
            let sample = model::simulate_ar1(&params, n, seed)?;
            let sample = match &contamination {
                Some(c) => model::contaminate(&sample, c, contamination_seed)?,
                None => sample,
            };
            estimators::finite_sample_estimate(kind, &sample)
        }
        SimEstimator::Demo(est) => {
            let pairs = model::simulate_regression(theta, n, seed)?;
            let pairs = match &contamination {
                Some(c) => model::contaminate_pairs(&pairs, c, contamination_seed)?,
                None => pairs,
            };
            match est {
                FiniteEstimator::ClampedOls => model::clamped_ols_estimator(&pairs),
                FiniteEstimator::FracCounterexample => {
                    model::frac_counterexample_estimator(&pairs)
                }
                FiniteEstimator::Kind(kind) => Err(Error::invalid(format!(
                    "{kind} is not a demo estimator"
                ))),
            }
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = q * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn trials_csv(runs: &[SimRun]) -> String {
    let mut out = String::from("estimator,mode,level,zeta,trial,estimate\n");
    for run in runs {
        for (trial, est) in run.estimates.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                run.estimator.label(),
                run.level.mode(),
                run.level.level(),
                breakdown::format_zeta(run.level.zeta()),
                trial,
                est
            );
        }
    }
    out
}

fn summary_stats_csv(runs: &[SimRun]) -> String {
    let mut out =
        String::from("estimator,mode,level,zeta,trials,mean,sd,q05,q25,q50,q75,q95\n");
    for run in runs {
        let m = run.estimates.len();
        let mean = run.estimates.iter().sum::<f64>() / m as f64;
        let sd = if m > 1 {
            let ss = run
                .estimates
                .iter()
                .map(|e| (e - mean) * (e - mean))
                .sum::<f64>();
            (ss / (m - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = run.estimates.clone();
        sorted.sort_by(f64::total_cmp);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            run.estimator.label(),
            run.level.mode(),
            run.level.level(),
            breakdown::format_zeta(run.level.zeta()),
            m,
            mean,
            sd,
            quantile(&sorted, 0.05),
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.50),
            quantile(&sorted, 0.75),
            quantile(&sorted, 0.95),
        );
    }
    out
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let common = resolve_common(&args.common, &cfg)?;
    let n = resolve(args.n, &cfg, "n", parse_usize, 1000)?;
    let trials = resolve(args.trials, &cfg, "trials", parse_usize, 20)?;
    let theta = resolve(args.theta, &cfg, "theta", parse_f64, 0.5)?;
    let k = match args.k {
        Some(k) => Some(k),
        None => cfg.parse("k", parse_usize)?,
    };
    let demo = args.demo || cfg.parse("demo", parse_bool)?.unwrap_or(false);
    let zetas = resolve_zetas(&args.common, &cfg, vec![1e3])?;
    if zetas.iter().any(|z| z.is_infinite()) {
        return Err(Error::invalid(
            "finite-sample simulation needs finite magnitudes".to_string(),
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least 1 trial".to_string()));
    }

    let p_given = args.common.p.is_some() || cfg.parse("p", parse_fractions)?.is_some();
    if k.is_some() && p_given {
        return Err(Error::invalid(
            "give either a contamination fraction list or an outlier count, not both"
                .to_string(),
        ));
    }
    let levels: Vec<ContaminationLevel> = if let Some(k) = k {
        zetas
            .iter()
            .map(|&z| ContaminationLevel::Count(k, z))
            .collect()
    } else if p_given {
        let mut levels = Vec::new();
        for &p in &common.ps {
            for &z in &zetas {
                levels.push(ContaminationLevel::Fraction(p, z));
            }
        }
        levels
    } else {
        vec![ContaminationLevel::Clean]
    };

    let sim_estimators: Vec<SimEstimator> = if demo {
        vec![
            SimEstimator::Demo(FiniteEstimator::ClampedOls),
            SimEstimator::Demo(FiniteEstimator::FracCounterexample),
        ]
    } else {
        common
            .estimators
            .iter()
            .map(|&kind| SimEstimator::Asymptotic(kind))
            .collect()
    };

    let mut runs = Vec::new();
    for (run_idx, (&estimator, level)) in sim_estimators
        .iter()
        .flat_map(|e| levels.iter().map(move |l| (e, l)))
        .enumerate()
    {
        let run_seed = common
            .seed
            .wrapping_add((run_idx as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let estimates = exec::map_indices(trials, |trial| {
            simulate_one(
                estimator,
                level,
                theta,
                n,
                run_seed.wrapping_add(trial as u64),
            )
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        runs.push(SimRun {
            estimator,
            level: *level,
            estimates,
        });
    }

    if common.format.wants_csv() {
        write_atomic(&common.out, "simulate_trials.csv", &trials_csv(&runs))?;
        write_atomic(
            &common.out,
            "simulate_summary.csv",
            &summary_stats_csv(&runs),
        )?;
    }
    Ok(())
}
