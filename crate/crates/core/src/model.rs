//! AR(1) sample paths, additive-outlier contamination, and two small
//! regression estimators used by the worked finite-sample examples.
//!
//! All generation is driven by ChaCha8 seeded from a caller-supplied `u64`,
//! so every sample is reproducible bit-for-bit across platforms and runs.
//! The order in which variates are drawn is part of that contract.

use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write as _;
use std::path::Path;

/// AR(1) coefficient.
///
/// The plain constructor enforces the stationary range |theta| < 1; the
/// extended constructor widens it to the closed interval [-1, 1], which is
/// the natural closure when discussing estimator images rather than
/// generated paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArParams {
    pub theta: f64,
    pub extended: bool,
}

impl ArParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.abs() < 1.0) {
            return Err(Error::invalid(format!(
                "AR(1) coefficient must satisfy |theta| < 1, got {theta}"
            )));
        }
        Ok(Self {
            theta,
            extended: false,
        })
    }

    pub fn new_extended(theta: f64) -> Result<Self> {
        if !(theta.abs() <= 1.0) {
            return Err(Error::invalid(format!(
                "extended AR(1) coefficient must satisfy |theta| <= 1, got {theta}"
            )));
        }
        Ok(Self {
            theta,
            extended: true,
        })
    }

    /// Stationary marginal variance 1 / (1 - theta^2).
    pub fn stationary_variance(&self) -> f64 {
        1.0 / (1.0 - self.theta * self.theta)
    }
}

/// An observed series together with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl Sample {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Writes the series as single-column CSV with header `value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(16 * self.values.len() + 8);
        out.push_str("value\n");
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        file.write_all(out.as_bytes()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }

    /// Reads a series written by [`Sample::write_csv`]; the seed is not part
    /// of the file format and is restored as 0.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = text.lines();
        match lines.next() {
            Some("value") => {}
            other => {
                return Err(Error::invalid(format!(
                    "expected CSV header 'value', got {other:?}"
                )))
            }
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::invalid(format!("bad numeric value on data line {}: {line:?}", i + 1))
            })?;
            values.push(v);
        }
        Ok(Self { values, seed: 0 })
    }
}

/// Generates a stationary AR(1) path: the first value is drawn from the
/// stationary law N(0, 1/(1 - theta^2)) and the rest follow the recursion
/// Y_t = theta Y_{t-1} + e_t with standard normal innovations.
pub fn simulate_ar1(params: &ArParams, n: usize, seed: u64) -> Result<Sample> {
    if !(params.theta.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "simulation requires |theta| < 1, got {}",
            params.theta
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n);
    let z0: f64 = StandardNormal.sample(&mut rng);
    values.push(params.stationary_variance().sqrt() * z0);
    for t in 1..n {
        let e: f64 = StandardNormal.sample(&mut rng);
        values.push(params.theta * values[t - 1] + e);
    }
    Ok(Sample { values, seed })
}

/// Additive outlier scheme: selected entries are shifted by plus or minus
/// `zeta`, each sign an independent fair coin unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct Contamination {
    pub zeta: f64,
    pub mode: ContaminationMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContaminationMode {
    /// Each entry is shifted independently with probability `p`.
    Fraction { p: f64 },
    /// Exactly `k` entries are shifted.  Positions default to a uniform
    /// draw of `k` distinct indices; signs default to fair coins.  Both can
    /// be pinned for deterministic constructions (0-based indices, signs
    /// +1 or -1, one per position).
    Count {
        k: usize,
        positions: Option<Vec<usize>>,
        signs: Option<Vec<i8>>,
    },
}

impl Contamination {
    pub fn fraction(p: f64, zeta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "outlier fraction must lie in [0, 1], got {p}"
            )));
        }
        Self::check_zeta(zeta)?;
        Ok(Self {
            zeta,
            mode: ContaminationMode::Fraction { p },
        })
    }

    pub fn count(k: usize, zeta: f64) -> Result<Self> {
        Self::check_zeta(zeta)?;
        Ok(Self {
            zeta,
            mode: ContaminationMode::Count {
                k,
                positions: None,
                signs: None,
            },
        })
    }

    fn check_zeta(zeta: f64) -> Result<()> {
        if !(zeta >= 0.0) || zeta.is_nan() {
            return Err(Error::invalid(format!(
                "outlier magnitude must be >= 0, got {zeta}"
            )));
        }
        Ok(())
    }

    pub fn with_positions(mut self, positions: Vec<usize>) -> Result<Self> {
        match &mut self.mode {
            ContaminationMode::Count { positions: slot, .. } => {
                *slot = Some(positions);
                Ok(self)
            }
            ContaminationMode::Fraction { .. } => Err(Error::invalid(
                "positions can only be pinned in count mode".to_string(),
            )),
        }
    }

    pub fn with_signs(mut self, signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::invalid("signs must be +1 or -1".to_string()));
        }
        match &mut self.mode {
            ContaminationMode::Count { signs: slot, .. } => {
                *slot = Some(signs);
                Ok(self)
            }
            ContaminationMode::Fraction { .. } => Err(Error::invalid(
                "signs can only be pinned in count mode".to_string(),
            )),
        }
    }
}

/// Applies the additive outlier scheme to a sample.  Entries not selected
/// are carried over bit-identically; zero magnitude returns the input
/// sample exactly.
pub fn contaminate(sample: &Sample, c: &Contamination, seed: u64) -> Result<Sample> {
    let mut values = sample.values.clone();
    apply_contamination(&mut values, c, seed)?;
    Ok(Sample {
        values,
        seed: sample.seed,
    })
}

/// Applies the additive outlier scheme to the responses of a regression
/// sample; the regressors are untouched.
pub fn contaminate_pairs(pairs: &PairSample, c: &Contamination, seed: u64) -> Result<PairSample> {
    let mut ys = pairs.ys.clone();
    apply_contamination(&mut ys, c, seed)?;
    Ok(PairSample {
        xs: pairs.xs.clone(),
        ys,
    })
}

fn apply_contamination(values: &mut [f64], c: &Contamination, seed: u64) -> Result<()> {
    let n = values.len();
    if c.zeta == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match &c.mode {
        ContaminationMode::Fraction { p } => {
            for v in values.iter_mut() {
                if rng.random_bool(*p) {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    *v += sign * c.zeta;
                }
            }
        }
        ContaminationMode::Count {
            k,
            positions,
            signs,
        } => {
            if *k > n {
                return Err(Error::invalid(format!(
                    "outlier count {k} exceeds sample size {n}"
                )));
            }
            let idx: Vec<usize> = match positions {
                Some(pos) => {
                    if pos.len() != *k {
                        return Err(Error::invalid(format!(
                            "expected {k} positions, got {}",
                            pos.len()
                        )));
                    }
                    let mut seen = vec![false; n];
                    for &i in pos {
                        if i >= n {
                            return Err(Error::invalid(format!(
                                "position {i} out of range for sample of size {n}"
                            )));
                        }
                        if seen[i] {
                            return Err(Error::invalid(format!("duplicate position {i}")));
                        }
                        seen[i] = true;
                    }
                    pos.clone()
                }
                None => rand::seq::index::sample(&mut rng, n, *k).into_vec(),
            };
            if let Some(s) = signs {
                if s.len() != *k {
                    return Err(Error::invalid(format!(
                        "expected {k} signs, got {}",
                        s.len()
                    )));
                }
            }
            for (j, &i) in idx.iter().enumerate() {
                let sign = match signs {
                    Some(s) => f64::from(s[j]),
                    None => {
                        if rng.random_bool(0.5) {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                values[i] += sign * c.zeta;
            }
        }
    }
    Ok(())
}

/// A simple-regression sample of (x, y) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PairSample {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid(format!(
                "mismatched pair lengths: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 pairs, got {}",
                xs.len()
            )));
        }
        Ok(Self { xs, ys })
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }
}

/// Generates a simple-regression sample with standard-normal regressors and
/// unit-variance normal errors around the line y = slope * x.
pub fn simulate_regression(slope: f64, n: usize, seed: u64) -> Result<PairSample> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    if !slope.is_finite() {
        return Err(Error::invalid(format!("slope must be finite, got {slope}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        xs.push(x);
        ys.push(slope * x + e);
    }
    Ok(PairSample { xs, ys })
}

fn ols_slope(pairs: &PairSample) -> Result<f64> {
    let n = pairs.n() as f64;
    let mean_x = pairs.xs.iter().sum::<f64>() / n;
    let mean_y = pairs.ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in pairs.xs.iter().zip(&pairs.ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign(
            "all regressor values are equal".to_string(),
        ));
    }
    Ok(sxy / sxx)
}

/// Ordinary-least-squares slope clamped to [-n, n], n the sample size.
pub fn clamped_ols_estimator(pairs: &PairSample) -> Result<f64> {
    let n = pairs.n() as f64;
    Ok(ols_slope(pairs)?.clamp(-n, n))
}

/// Clamped OLS slope plus the perturbation 2 (frac(y_1) - 1) / n, where
/// frac is the fractional part.  The perturbation lies in [-2/n, 0), which
/// keeps the estimate moving with arbitrarily small changes of y_1.
pub fn frac_counterexample_estimator(pairs: &PairSample) -> Result<f64> {
    let n = pairs.n() as f64;
    let base = clamped_ols_estimator(pairs)?;
    let frac = pairs.ys[0] - pairs.ys[0].floor();
    Ok(base + 2.0 * (frac - 1.0) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ar_params_validation() {
        assert!(ArParams::new(0.999).is_ok());
        assert!(ArParams::new(1.0).is_err());
        assert!(ArParams::new(-1.2).is_err());
        assert!(ArParams::new(f64::NAN).is_err());
        assert!(ArParams::new_extended(1.0).is_ok());
        assert!(ArParams::new_extended(1.0001).is_err());
    }

    #[test]
    fn white_noise_moments() {
        let params = ArParams::new(0.0).unwrap();
        let n = 100_000;
        let s = simulate_ar1(&params, n, 7).unwrap();
        let mean = s.values.iter().sum::<f64>() / n as f64;
        let var = s.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn ar_half_autocorrelation_and_variance() {
        let params = ArParams::new(0.5).unwrap();
        let n = 100_000;
        let s = simulate_ar1(&params, n, 11).unwrap();
        let mean = s.values.iter().sum::<f64>() / n as f64;
        let var = s.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let mut cov = 0.0;
        for t in 1..n {
            cov += (s.values[t] - mean) * (s.values[t - 1] - mean);
        }
        cov /= (n - 1) as f64;
        let rho = cov / var;
        assert!((rho - 0.5).abs() < 0.01, "lag-1 autocorrelation {rho}");
        assert!(
            (var - 4.0 / 3.0).abs() < 0.02 * 4.0 / 3.0,
            "stationary variance {var}"
        );
    }

    #[test]
    fn simulate_is_reproducible() {
        let params = ArParams::new(0.3).unwrap();
        let a = simulate_ar1(&params, 500, 42).unwrap();
        let b = simulate_ar1(&params, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_ar1(&params, 500, 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn simulate_rejects_bad_args() {
        let params = ArParams::new(0.3).unwrap();
        assert!(simulate_ar1(&params, 1, 0).is_err());
        let ext = ArParams::new_extended(1.0).unwrap();
        assert!(simulate_ar1(&ext, 100, 0).is_err());
    }

    #[test]
    fn contaminate_zero_count_is_identity() {
        let params = ArParams::new(0.5).unwrap();
        let s = simulate_ar1(&params, 100, 1).unwrap();
        let c = Contamination::count(0, 5.0).unwrap();
        assert_eq!(contaminate(&s, &c, 9).unwrap(), s);
    }

    #[test]
    fn contaminate_zero_zeta_is_identity() {
        let params = ArParams::new(0.5).unwrap();
        let s = simulate_ar1(&params, 100, 2).unwrap();
        let c = Contamination::fraction(0.5, 0.0).unwrap();
        assert_eq!(contaminate(&s, &c, 9).unwrap(), s);
    }

    #[test]
    fn contaminate_pinned_position_and_sign() {
        let s = Sample {
            values: vec![0.0; 4],
            seed: 0,
        };
        let c = Contamination::count(1, 7.0)
            .unwrap()
            .with_positions(vec![1])
            .unwrap()
            .with_signs(vec![1])
            .unwrap();
        let out = contaminate(&s, &c, 0).unwrap();
        assert_eq!(out.values, vec![0.0, 7.0, 0.0, 0.0]);
    }

    #[test]
    fn contaminate_fraction_concentration() {
        let params = ArParams::new(0.5).unwrap();
        let n = 1_000_000;
        let s = simulate_ar1(&params, n, 3).unwrap();
        let c = Contamination::fraction(0.25, 100.0).unwrap();
        let out = contaminate(&s, &c, 4).unwrap();
        let shifted = s
            .values
            .iter()
            .zip(&out.values)
            .filter(|(a, b)| a != b)
            .count();
        let frac = shifted as f64 / n as f64;
        assert!((frac - 0.25).abs() < 0.002, "shifted fraction {frac}");
    }

    #[test]
    fn contaminate_untouched_entries_bit_identical() {
        let params = ArParams::new(0.5).unwrap();
        let s = simulate_ar1(&params, 1000, 5).unwrap();
        let c = Contamination::count(10, 3.0).unwrap();
        let out = contaminate(&s, &c, 6).unwrap();
        let changed = s
            .values
            .iter()
            .zip(&out.values)
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();
        assert_eq!(changed, 10);
    }

    #[test]
    fn contaminate_validation_errors() {
        let s = Sample {
            values: vec![0.0; 4],
            seed: 0,
        };
        let too_many = Contamination::count(5, 1.0).unwrap();
        assert!(contaminate(&s, &too_many, 0).is_err());
        let out_of_range = Contamination::count(1, 1.0)
            .unwrap()
            .with_positions(vec![4])
            .unwrap();
        assert!(contaminate(&s, &out_of_range, 0).is_err());
        let dup = Contamination::count(2, 1.0)
            .unwrap()
            .with_positions(vec![1, 1])
            .unwrap();
        assert!(contaminate(&s, &dup, 0).is_err());
        assert!(Contamination::fraction(1.5, 1.0).is_err());
        assert!(Contamination::fraction(0.5, -1.0).is_err());
        assert!(Contamination::count(1, 1.0).unwrap().with_signs(vec![2]).is_err());
    }

    #[test]
    fn clamped_ols_exact_fit() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let pairs = PairSample::new(xs, ys).unwrap();
        assert_abs_diff_eq!(clamped_ols_estimator(&pairs).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn clamped_ols_saturates() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1e9 * x).collect();
        let pairs = PairSample::new(xs.clone(), ys).unwrap();
        assert_eq!(clamped_ols_estimator(&pairs).unwrap(), 10.0);
        let ys_neg: Vec<f64> = xs.iter().map(|x| -1e9 * x).collect();
        let pairs = PairSample::new(xs, ys_neg).unwrap();
        assert_eq!(clamped_ols_estimator(&pairs).unwrap(), -10.0);
    }

    #[test]
    fn clamped_ols_single_leverage_point() {
        let base = simulate_regression(0.0, 19, 8).unwrap();
        let mut prev = 0.0;
        for &zeta in &[1e2, 1e3, 1e4, 1e6] {
            let mut xs = base.xs.clone();
            let mut ys = base.ys.clone();
            xs.push(zeta);
            ys.push(zeta * zeta);
            let pairs = PairSample::new(xs, ys).unwrap();
            let est = clamped_ols_estimator(&pairs).unwrap();
            assert!(est >= prev);
            prev = est;
        }
        assert_eq!(prev, 20.0);
    }

    #[test]
    fn clamped_ols_degenerate_design() {
        let pairs = PairSample::new(vec![1.0; 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(
            clamped_ols_estimator(&pairs),
            Err(Error::DegenerateDesign(_))
        ));
    }

    #[test]
    fn frac_estimator_substitutions() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        // y_1 = 0 is an integer: frac = 0 and the shift is -2/n.
        let pairs = PairSample::new(xs.clone(), ys.clone()).unwrap();
        let base = clamped_ols_estimator(&pairs).unwrap();
        assert_abs_diff_eq!(
            frac_counterexample_estimator(&pairs).unwrap(),
            base - 0.2,
            epsilon = 1e-12
        );
        // y_1 = m + 0.5 gives a shift of -1/n.
        let mut ys_half = ys;
        ys_half[0] = 3.5;
        let pairs = PairSample::new(xs, ys_half).unwrap();
        let base = clamped_ols_estimator(&pairs).unwrap();
        assert_abs_diff_eq!(
            frac_counterexample_estimator(&pairs).unwrap(),
            base - 0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sample_csv_round_trip() {
        let params = ArParams::new(0.5).unwrap();
        let s = simulate_ar1(&params, 50, 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.csv");
        s.write_csv(&path).unwrap();
        let back = Sample::read_csv(&path).unwrap();
        assert_eq!(back.values, s.values);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("value\n"));
    }

    #[test]
    fn sample_csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "wrong\n1.0\n").unwrap();
        assert!(Sample::read_csv(&path).is_err());
    }
}
