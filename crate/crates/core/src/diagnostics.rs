//! Running moments, autocorrelation-based effective sample sizes, z-score
//! comparisons and convergence-order fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// Streaming means and variances of a fixed set of scalar functionals, plus
/// co-moments for selected pairs of them.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    labels: Vec<String>,
    pairs: Vec<(usize, usize)>,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    comoment: Vec<f64>,
    ess: Option<Vec<f64>>,
}

impl MomentAccumulator {
    pub fn new(labels: Vec<String>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let n = labels.len();
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= n || *b >= n) {
            return Err(Error::Diagnostics(format!(
                "pair ({a}, {b}) out of range for {n} functionals"
            )));
        }
        Ok(Self {
            labels,
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            comoment: vec![0.0; pairs.len()],
            pairs,
            ess: None,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        let old: Vec<f64> = self.mean.clone();
        for (i, &x) in values.iter().enumerate() {
            let delta = x - old[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
        for (p, &(a, b)) in self.pairs.iter().enumerate() {
            self.comoment[p] += (values[a] - old[a]) * (values[b] - self.mean[b]);
        }
    }

    /// Combines two accumulators over the same functionals (Chan et al. update).
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        self.check_matches(other)?;
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            let ess = self.ess.take();
            *self = other.clone();
            self.ess = ess;
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..self.mean.len() {
            self.mean[i] += delta[i] * nb / n;
            self.m2[i] += other.m2[i] + delta[i] * delta[i] * na * nb / n;
        }
        for (p, &(a, b)) in self.pairs.iter().enumerate() {
            self.comoment[p] += other.comoment[p] + delta[a] * delta[b] * na * nb / n;
        }
        self.count += other.count;
        self.ess = match (&self.ess, &other.ess) {
            (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(a, b)| a + b).collect()),
            _ => None,
        };
        Ok(())
    }

    fn check_matches(&self, other: &MomentAccumulator) -> Result<()> {
        if self.labels != other.labels || self.pairs != other.pairs {
            return Err(Error::MismatchedFunctionals(format!(
                "{} functionals / {} pairs vs {} / {}",
                self.labels.len(),
                self.pairs.len(),
                other.labels.len(),
                other.pairs.len()
            )));
        }
        Ok(())
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance (zero with fewer than two samples).
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2[i] / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Unbiased sample covariance of pair `p`.
    pub fn covariance(&self, p: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.comoment[p] / (self.count - 1) as f64
        }
    }

    /// Effective sample sizes per functional for correlated input; defaults to the count.
    pub fn set_ess(&mut self, ess: Vec<f64>) -> Result<()> {
        if ess.len() != self.mean.len() {
            return Err(Error::Diagnostics(format!(
                "{} ESS values for {} functionals",
                ess.len(),
                self.mean.len()
            )));
        }
        self.ess = Some(ess);
        Ok(())
    }

    pub fn ess(&self, i: usize) -> f64 {
        self.ess.as_ref().map_or(self.count as f64, |e| e[i])
    }

    pub fn mean_se(&self, i: usize) -> f64 {
        (self.variance(i) / self.ess(i)).sqrt()
    }

    /// Standard error of a covariance estimate under a Gaussian approximation,
    /// `sqrt((σ_a² σ_b² + c²) / n_eff)` with the smaller ESS of the pair.
    pub fn covariance_se(&self, p: usize) -> f64 {
        let (a, b) = self.pairs[p];
        let c = self.covariance(p);
        let n_eff = self.ess(a).min(self.ess(b));
        ((self.variance(a) * self.variance(b) + c * c) / n_eff).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssEstimate {
    pub ess: f64,
    /// Integrated autocorrelation time `1 + 2 Σ ρ_l`.
    pub tau: f64,
    pub window: usize,
    /// Set for series with zero variance.
    pub degenerate: bool,
}

/// Autocorrelation at lags `0..=max_lag` (biased estimator, normalized by `N`).
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centred.iter().map(|x| x * x).sum::<f64>();
    (0..=max_lag.min(n - 1))
        .map(|l| {
            let cl: f64 = centred[..n - l].iter().zip(&centred[l..]).map(|(a, b)| a * b).sum();
            cl / c0
        })
        .collect()
}

/// Lag at which the autocorrelation sum is truncated.
pub const ACF_CUTOFF: f64 = 0.05;
pub const MIN_SERIES: usize = 100;

/// `N / (1 + 2 Σ_{l<W} ρ_l)`, with `W` the first lag where `ρ_l < 0.05`.
pub fn ess(series: &[f64]) -> Result<EssEstimate> {
    let n = series.len();
    if n < MIN_SERIES {
        return Err(Error::Diagnostics(format!(
            "ESS needs at least {MIN_SERIES} samples, got {n}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "ESS input series".into(),
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = centred.iter().map(|x| x * x).sum();
    if c0 <= f64::EPSILON * f64::EPSILON * n as f64 * (1.0 + mean * mean) {
        return Ok(EssEstimate {
            ess: n as f64,
            tau: 1.0,
            window: 0,
            degenerate: true,
        });
    }
    let mut sum = 0.0;
    let mut window = n / 2;
    for l in 1..n / 2 {
        let rho = centred[..n - l]
            .iter()
            .zip(&centred[l..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / c0;
        if rho < ACF_CUTOFF {
            window = l;
            break;
        }
        sum += rho;
    }
    let tau = (1.0 + 2.0 * sum).max(1.0 / n as f64);
    Ok(EssEstimate {
        ess: (n as f64 / tau).min(n as f64),
        tau,
        window,
        degenerate: false,
    })
}

/// z-score of `s²` against `σ²` for a Gaussian sample of effective size `n_eff`.
pub fn variance_z(sample_variance: f64, expected: f64, n_eff: f64) -> f64 {
    (sample_variance - expected) / (expected * (2.0 / n_eff).sqrt())
}

/// Wilson–Hilferty approximation to the chi-square quantile at standard-normal level `z`.
pub fn chi_square_quantile(df: usize, z: f64) -> f64 {
    let k = df as f64;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + z * c.sqrt()).powi(3)
}

/// Sum of squared variance z-scores of tracked modes against `1/λ_k`.
#[derive(Debug, Clone, Serialize)]
pub struct ModeVarianceTest {
    pub statistic: f64,
    pub df: usize,
    pub threshold: f64,
    pub max_abs_z: f64,
    pub pass: bool,
}

/// `modes` holds one functional per mode, in order, matching `lambdas`.
pub fn mode_variance_test(modes: &MomentAccumulator, lambdas: &[f64], z: f64) -> Result<ModeVarianceTest> {
    let df = modes.labels.len();
    if df == 0 || lambdas.len() < df {
        return Err(Error::MismatchedFunctionals(format!(
            "{df} tracked modes, {} eigenvalues",
            lambdas.len()
        )));
    }
    let zs: Vec<f64> = (0..df)
        .map(|k| variance_z(modes.variance(k), 1.0 / lambdas[k], modes.ess(k)))
        .collect();
    let statistic = zs.iter().map(|v| v * v).sum();
    let threshold = chi_square_quantile(df, z);
    Ok(ModeVarianceTest {
        statistic,
        df,
        threshold,
        max_abs_z: zs.iter().map(|v| v.abs()).fold(0.0, f64::max),
        pass: statistic <= threshold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonEntry {
    pub name: String,
    pub estimate_a: f64,
    pub estimate_b: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
    pub max_abs_z: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn from_entries(entries: Vec<ComparisonEntry>, threshold: f64) -> Self {
        let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
        let pass = entries.iter().all(|e| e.z.is_finite()) && max_abs_z <= threshold;
        Self {
            entries,
            max_abs_z,
            threshold,
            pass,
        }
    }
}

/// z-score with a zero-error guard: identical estimates give `z = 0`.
pub fn z_score(a: f64, b: f64, se: f64) -> f64 {
    let diff = a - b;
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

/// What [`compare_moments`] compares against.
#[derive(Debug, Clone)]
pub enum Reference<'a> {
    /// Exact means of every functional and exact covariances of every pair.
    Exact { means: &'a [f64], covariances: &'a [f64] },
    Sampled(&'a MomentAccumulator),
}

pub fn compare_moments(a: &MomentAccumulator, reference: &Reference<'_>, z_threshold: f64) -> Result<ComparisonReport> {
    let nf = a.labels.len();
    let np = a.pairs.len();
    let (means_b, covs_b): (Vec<f64>, Vec<f64>) = match reference {
        Reference::Exact { means, covariances } => {
            if means.len() != nf || covariances.len() != np {
                return Err(Error::MismatchedFunctionals(format!(
                    "accumulator has {nf} functionals / {np} pairs, reference {} / {}",
                    means.len(),
                    covariances.len()
                )));
            }
            (means.to_vec(), covariances.to_vec())
        }
        Reference::Sampled(b) => {
            a.check_matches(b)?;
            (b.mean.clone(), (0..np).map(|p| b.covariance(p)).collect())
        }
    };
    let se_b = |mean: bool, i: usize| match reference {
        Reference::Exact { .. } => 0.0,
        Reference::Sampled(b) if mean => b.mean_se(i),
        Reference::Sampled(b) => b.covariance_se(i),
    };
    let mut entries = Vec::with_capacity(nf + np);
    for i in 0..nf {
        let se = (a.mean_se(i).powi(2) + se_b(true, i).powi(2)).sqrt();
        entries.push(ComparisonEntry {
            name: format!("mean[{}]", a.labels[i]),
            estimate_a: a.mean[i],
            estimate_b: means_b[i],
            standard_error: se,
            z: z_score(a.mean[i], means_b[i], se),
        });
    }
    for (p, &(x, y)) in a.pairs.iter().enumerate() {
        let se = (a.covariance_se(p).powi(2) + se_b(false, p).powi(2)).sqrt();
        entries.push(ComparisonEntry {
            name: format!("cov[{},{}]", a.labels[x], a.labels[y]),
            estimate_a: a.covariance(p),
            estimate_b: covs_b[p],
            standard_error: se,
            z: z_score(a.covariance(p), covs_b[p], se),
        });
    }
    Ok(ComparisonReport::from_entries(entries, z_threshold))
}

/// Least-squares slope of `log err` against `log h`.
pub fn convergence_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Diagnostics(format!(
            "need at least 3 refinement levels, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0) || !e.is_finite()) {
        return Err(Error::Diagnostics("step sizes and errors must be positive".into()));
    }
    if points.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::Diagnostics("step sizes must be decreasing".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    #[test]
    fn chi_square_quantile_values() {
        // tabulated 0.99865 quantiles
        assert!((super::chi_square_quantile(20, 3.0) - 44.4).abs() < 0.3);
        assert!((super::chi_square_quantile(1000, 0.0) - 999.33).abs() < 0.05);
    }

    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn acc(n: usize) -> MomentAccumulator {
        let labels = (0..n).map(|i| format!("x{i}")).collect();
        let pairs = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        MomentAccumulator::new(labels, pairs).unwrap()
    }

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let xi = normals(seed, n);
        let mut x = 0.0;
        xi.iter()
            .map(|e| {
                x = phi * x + e;
                x
            })
            .collect()
    }

    #[test]
    fn iid_series_ess_near_n() {
        let e = ess(&normals(3, 10_000)).unwrap();
        assert!(e.ess > 8_000.0 && e.ess <= 10_000.0 * 1.2, "{e:?}");
    }

    #[test]
    fn ar1_ess() {
        let n = 100_000;
        let e = ess(&ar1(5, n, 0.9)).unwrap();
        let want = n as f64 * 0.1 / 1.9;
        assert!(e.ess > want / 1.5 && e.ess < want * 1.5, "{e:?} vs {want}");
    }

    #[test]
    fn thinned_ar1_is_nearly_independent() {
        let n = 200_000;
        let x = ar1(6, n, 0.9);
        let tau = ess(&x).unwrap().tau.ceil() as usize;
        let thinned: Vec<f64> = x.iter().step_by(tau).copied().collect();
        let e = ess(&thinned).unwrap();
        let ratio = e.ess / thinned.len() as f64;
        assert!(ratio > 0.5 && ratio <= 2.0, "{ratio}");
    }

    #[test]
    fn constant_series_is_degenerate() {
        let e = ess(&vec![2.5; 500]).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.ess, 500.0);
        assert!(ess(&[1.0; 20]).is_err());
    }

    #[test]
    fn comparison_with_itself_passes() {
        let mut a = acc(3);
        let x = normals(1, 3000);
        for c in x.chunks(3) {
            a.push(c);
        }
        let r = compare_moments(&a, &Reference::Sampled(&a), 3.0).unwrap();
        assert!(r.pass);
        assert!(r.entries.iter().all(|e| e.z == 0.0));
    }

    #[test]
    fn shifted_mean_fails() {
        let mut a = acc(1);
        for x in normals(2, 10_000) {
            a.push(&[x]);
        }
        let se = a.mean_se(0);
        let means = [a.mean(0) + 10.0 * se];
        let covs = [a.covariance(0)];
        let r = compare_moments(&a, &Reference::Exact { means: &means, covariances: &covs }, 3.0).unwrap();
        assert!(!r.pass);
        assert!((r.max_abs_z - 10.0).abs() < 1e-9);
        let wrong = [0.0, 0.0];
        assert!(matches!(
            compare_moments(&a, &Reference::Exact { means: &wrong, covariances: &covs }, 3.0),
            Err(Error::MismatchedFunctionals(_))
        ));
        let other = acc(2);
        assert!(compare_moments(&a, &Reference::Sampled(&other), 3.0).is_err());
    }

    #[test]
    fn convergence_order_fits() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let sq: Vec<(f64, f64)> = hs.iter().map(|&h| (h, h * h)).collect();
        assert!((convergence_order(&sq).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 * h)).collect();
        assert!((convergence_order(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert!(convergence_order(&sq[..2]).is_err());
        assert!(convergence_order(&[(0.1, 1.0), (0.05, 0.0), (0.01, 1.0)]).is_err());
        assert!(convergence_order(&[(0.01, 1.0), (0.05, 1.0), (0.1, 1.0)]).is_err());
    }

    #[test]
    fn variance_z_scale() {
        assert_eq!(variance_z(1.0, 1.0, 100.0), 0.0);
        assert!((variance_z(1.2, 1.0, 200.0) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn merge_matches_concatenation(
            data in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 2..60),
            split in 0usize..60,
        ) {
            let split = split.min(data.len());
            let mut whole = acc(3);
            for row in &data { whole.push(row); }
            let mut left = acc(3);
            let mut right = acc(3);
            for row in &data[..split] { left.push(row); }
            for row in &data[split..] { right.push(row); }
            left.merge(&right).unwrap();
            prop_assert_eq!(left.count(), whole.count());
            for i in 0..3 {
                prop_assert!((left.mean(i) - whole.mean(i)).abs() <= 1e-12 * (1.0 + whole.mean(i).abs()) * 100.0);
                prop_assert!((left.variance(i) - whole.variance(i)).abs() <= 1e-12 * (1.0 + whole.variance(i)) * 100.0);
                prop_assert!(left.variance(i) >= 0.0);
            }
            for p in 0..whole.pairs().len() {
                prop_assert!((left.covariance(p) - whole.covariance(p)).abs() <= 1e-12 * (1.0 + whole.covariance(p).abs()) * 100.0);
            }
        }

        #[test]
        fn merge_is_order_independent(
            a in proptest::collection::vec(-10.0f64..10.0, 1..40),
            b in proptest::collection::vec(-10.0f64..10.0, 1..40),
            c in proptest::collection::vec(-10.0f64..10.0, 1..40),
        ) {
            let build = |xs: &[f64]| { let mut m = acc(1); for &x in xs { m.push(&[x]); } m };
            let (ma, mb, mc) = (build(&a), build(&b), build(&c));
            let mut left = ma.clone();
            left.merge(&mb).unwrap();
            left.merge(&mc).unwrap();
            let mut right = mc.clone();
            let mut ab = mb.clone();
            ab.merge(&ma).unwrap();
            right.merge(&ab).unwrap();
            prop_assert!((left.mean(0) - right.mean(0)).abs() <= 1e-12 * 10.0);
            prop_assert!((left.variance(0) - right.variance(0)).abs() <= 1e-12 * (1.0 + left.variance(0)) * 10.0);
        }

        #[test]
        fn ess_is_bounded(seed in 0u64..1000, phi in 0.0f64..0.95) {
            let x = ar1(seed, 400, phi);
            let e = ess(&x).unwrap();
            prop_assert!(e.ess > 0.0 && e.ess <= 400.0);
            prop_assert!(e.tau >= 1.0 / 400.0);
        }
    }
}
