//! Simulation scenarios, the bootstrap null and the Kolmogorov–Smirnov and
//! Anderson–Darling baselines.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use rand::RngExt;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal, StudentT};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{Beta as BetaCdf, ContinuousCDF, Gamma as GammaCdf, LogNormal as LogNormalCdf, Normal as NormalCdf};

use crate::dataset::Dataset;
use crate::error::{Result, SstError};
use crate::rng::{self, Purpose, Stream};

/// Anything that can draw i.i.d. samples from the null distribution.
pub trait NullSampler: Sync {
    fn dim(&self) -> usize;

    fn sample(&self, n: usize, rng: &mut Stream) -> Result<Dataset>;
}

/// Scenario families. `θ` enters as described on each variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// N(θ, 1) against N(0, 1).
    NormalMean,
    /// N(0, σ = θ) against N(0, 1).
    NormalVar,
    /// LogNormal(θ, 1) against LogNormal(0, 1).
    LognormalMean,
    /// LogNormal(0, σ = θ) against LogNormal(0, 1).
    LognormalVar,
    /// Beta(θ, θ) against Beta(1, 1).
    BetaSymmetry,
    /// Gamma(shape θ, rate 2) against Gamma(3, 2).
    GammaShape,
    /// ½N(−θ, 1) + ½N(θ, 1) against N(0, 1).
    NormalMixture,
    /// Student t with ν = 1/θ against N(0, 1); θ = 0 is the normal itself.
    FatTails,
    /// N_d((θ, 0, …, 0), I) against N_d(0, I).
    MvnMean,
    /// N_d(0, diag(θ, 1, …, 1)) against N_d(0, I).
    MvnVar,
    /// Resampling with replacement from a reference dataset.
    Bootstrap,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::NormalMean,
        Family::NormalVar,
        Family::LognormalMean,
        Family::LognormalVar,
        Family::BetaSymmetry,
        Family::GammaShape,
        Family::NormalMixture,
        Family::FatTails,
        Family::MvnMean,
        Family::MvnVar,
        Family::Bootstrap,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::NormalMean => "normal_mean",
            Family::NormalVar => "normal_var",
            Family::LognormalMean => "lognormal_mean",
            Family::LognormalVar => "lognormal_var",
            Family::BetaSymmetry => "beta_symmetry",
            Family::GammaShape => "gamma_shape",
            Family::NormalMixture => "normal_mixture",
            Family::FatTails => "fat_tails",
            Family::MvnMean => "mvn_mean",
            Family::MvnVar => "mvn_var",
            Family::Bootstrap => "bootstrap",
        }
    }

    /// θ at which the alternative coincides with the null.
    pub fn null_theta(self) -> f64 {
        match self {
            Family::NormalVar | Family::LognormalVar | Family::BetaSymmetry | Family::MvnVar => 1.0,
            Family::GammaShape => 3.0,
            _ => 0.0,
        }
    }

    /// Documented θ range of the scenario.
    pub fn theta_range(self) -> (f64, f64) {
        match self {
            Family::NormalMean => (0.0, 0.7),
            Family::NormalVar | Family::LognormalVar => (1.0, 2.5),
            Family::LognormalMean => (0.0, 1.0),
            Family::BetaSymmetry => (1.0, 5.0),
            Family::GammaShape => (3.0, 4.5),
            Family::NormalMixture => (0.0, 2.0),
            Family::FatTails => (0.0, 1.0),
            Family::MvnMean => (0.0, 1.5),
            Family::MvnVar => (1.0, 20.0),
            Family::Bootstrap => (0.0, 0.0),
        }
    }

    pub fn is_multivariate(self) -> bool {
        matches!(self, Family::MvnMean | Family::MvnVar)
    }

    pub fn default_dim(self) -> usize {
        if self.is_multivariate() {
            100
        } else {
            1
        }
    }

    /// CDF of the null distribution for univariate families.
    pub fn null_cdf(self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match self {
            Family::NormalMean | Family::NormalVar | Family::NormalMixture | Family::FatTails => {
                let d = NormalCdf::standard();
                Some(Box::new(move |x| d.cdf(x)))
            }
            Family::LognormalMean | Family::LognormalVar => {
                let d = LogNormalCdf::new(0.0, 1.0).expect("valid");
                Some(Box::new(move |x| d.cdf(x)))
            }
            Family::BetaSymmetry => {
                let d = BetaCdf::new(1.0, 1.0).expect("valid");
                Some(Box::new(move |x| d.cdf(x)))
            }
            Family::GammaShape => {
                let d = GammaCdf::new(3.0, 2.0).expect("valid");
                Some(Box::new(move |x| d.cdf(x)))
            }
            Family::MvnMean | Family::MvnVar | Family::Bootstrap => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Comma-separated list of every valid family tag.
pub fn valid_tags() -> String {
    Family::ALL.iter().map(|f| f.tag()).collect::<Vec<_>>().join(", ")
}

impl FromStr for Family {
    type Err = SstError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| SstError::Config(format!("unknown scenario {s:?}; valid tags: {}", valid_tags())))
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A scenario family at a particular θ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    pub theta: f64,
    pub dim: usize,
    #[serde(skip)]
    pub reference: Option<Arc<Dataset>>,
}

impl PartialEq for ScenarioSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.theta.to_bits() == other.theta.to_bits()
            && self.dim == other.dim
            && self.reference == other.reference
    }
}

impl ScenarioSpec {
    pub fn new(family: Family, theta: f64) -> Self {
        Self { family, theta, dim: family.default_dim(), reference: None }
    }

    /// The family at its null parameter.
    pub fn null(family: Family) -> Self {
        Self::new(family, family.null_theta())
    }

    pub fn bootstrap(reference: Arc<Dataset>) -> Self {
        Self { family: Family::Bootstrap, theta: 0.0, dim: reference.dim(), reference: Some(reference) }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..self.clone() }
    }

    pub fn is_null(&self) -> bool {
        self.family == Family::Bootstrap || self.theta == self.family.null_theta()
    }
}

impl NullSampler for ScenarioSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        sample(self, n, rng)
    }
}

fn bad(family: Family, theta: f64) -> SstError {
    SstError::Config(format!("θ = {theta} is not a valid parameter for {family}"))
}

/// Draws `n` i.i.d. points from the scenario at its θ.
pub fn sample(spec: &ScenarioSpec, n: usize, rng: &mut Stream) -> Result<Dataset> {
    let (family, theta) = (spec.family, spec.theta);
    let (lo, hi) = family.theta_range();
    if family != Family::Bootstrap && (theta < lo || theta > hi) {
        warn!("θ = {theta} lies outside the documented range [{lo}, {hi}] of {family}");
    }
    if family.is_multivariate() {
        if spec.dim == 0 {
            return Err(SstError::Config("dimension must be positive".into()));
        }
        let std = Normal::new(0.0, 1.0).expect("valid");
        let first: Normal<f64> = match family {
            Family::MvnMean => Normal::new(theta, 1.0),
            _ if theta > 0.0 => Normal::new(0.0, theta.sqrt()),
            _ => return Err(bad(family, theta)),
        }
        .map_err(|_| bad(family, theta))?;
        let mut values = Vec::with_capacity(n * spec.dim);
        for _ in 0..n {
            values.push(first.sample(rng));
            values.extend((1..spec.dim).map(|_| std.sample(rng)));
        }
        return Dataset::from_flat(spec.dim, values);
    }
    if spec.dim != 1 && family != Family::Bootstrap {
        return Err(SstError::Config(format!("{family} is univariate, got dimension {}", spec.dim)));
    }
    let values: Vec<f64> = match family {
        Family::NormalMean => draw(&Normal::new(theta, 1.0).map_err(|_| bad(family, theta))?, n, rng),
        Family::NormalVar => draw(&Normal::new(0.0, theta).map_err(|_| bad(family, theta))?, n, rng),
        Family::LognormalMean => draw(&LogNormal::new(theta, 1.0).map_err(|_| bad(family, theta))?, n, rng),
        Family::LognormalVar => draw(&LogNormal::new(0.0, theta).map_err(|_| bad(family, theta))?, n, rng),
        Family::BetaSymmetry => draw(&Beta::new(theta, theta).map_err(|_| bad(family, theta))?, n, rng),
        Family::GammaShape => draw(&Gamma::new(theta, 0.5).map_err(|_| bad(family, theta))?, n, rng),
        Family::NormalMixture => {
            let left = Normal::new(-theta, 1.0).map_err(|_| bad(family, theta))?;
            let right = Normal::new(theta, 1.0).map_err(|_| bad(family, theta))?;
            (0..n)
                .map(|_| if rng.random::<bool>() { right.sample(rng) } else { left.sample(rng) })
                .collect()
        }
        Family::FatTails if theta == 0.0 => draw(&Normal::new(0.0, 1.0).expect("valid"), n, rng),
        Family::FatTails => draw(&StudentT::new(1.0 / theta).map_err(|_| bad(family, theta))?, n, rng),
        Family::Bootstrap => {
            let reference = spec
                .reference
                .as_ref()
                .ok_or_else(|| SstError::Config("bootstrap scenario has no reference dataset".into()))?;
            return bootstrap_sample(reference, n, rng);
        }
        Family::MvnMean | Family::MvnVar => unreachable!(),
    };
    Dataset::from_flat(1, values)
}

fn draw<D: Distribution<f64>>(d: &D, n: usize, rng: &mut Stream) -> Vec<f64> {
    (0..n).map(|_| d.sample(rng)).collect()
}

/// `n` rows chosen by `pick(len)`, which must return an index below `len`.
pub fn bootstrap_with(reference: &Dataset, n: usize, mut pick: impl FnMut(usize) -> usize) -> Result<Dataset> {
    if reference.is_empty() {
        return Err(SstError::Usage("cannot resample an empty reference dataset".into()));
    }
    let idx: Vec<usize> = (0..n).map(|_| pick(reference.len())).collect();
    if let Some(&bad) = idx.iter().find(|&&i| i >= reference.len()) {
        return Err(SstError::Usage(format!("bootstrap index {bad} out of range")));
    }
    Ok(reference.select(&idx))
}

/// `n` uniform draws with replacement from the rows of `reference`.
pub fn bootstrap_sample(reference: &Dataset, n: usize, rng: &mut Stream) -> Result<Dataset> {
    bootstrap_with(reference, n, |len| rng.random_range(0..len))
}

/// Null sampler that resamples a reference dataset.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    reference: Arc<Dataset>,
}

impl Bootstrap {
    pub fn new(reference: Arc<Dataset>) -> Result<Self> {
        if reference.is_empty() {
            return Err(SstError::Usage("bootstrap reference is empty".into()));
        }
        Ok(Self { reference })
    }

    pub fn reference(&self) -> &Arc<Dataset> {
        &self.reference
    }
}

impl NullSampler for Bootstrap {
    fn dim(&self) -> usize {
        self.reference.dim()
    }

    fn sample(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        bootstrap_sample(&self.reference, n, rng)
    }
}

/// Statistic and p-value of a baseline test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// How baseline p-values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Below this sample size p-values come from Monte Carlo.
    pub mc_threshold: usize,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { mc_threshold: 30, mc_reps: 2000, seed: 0 }
    }
}

/// Probability-integral transforms `F₀(x₍ᵢ₎)` in ascending order.
fn sorted_pit(data: &Dataset, cdf: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    let xs = data.scalars()?;
    if xs.is_empty() {
        return Err(SstError::Usage("baseline test needs at least one observation".into()));
    }
    let mut u: Vec<f64> = xs.iter().map(|&x| cdf(x)).collect();
    u.sort_unstable_by(f64::total_cmp);
    Ok(u)
}

fn ks_from_pit(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &f)| {
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

fn ad_from_pit(u: &[f64]) -> f64 {
    let n = u.len();
    let clamp = |f: f64| f.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
    let s: f64 = (0..n)
        .map(|i| {
            let lo = clamp(u[i]);
            let hi = clamp(u[n - 1 - i]);
            (2 * i + 1) as f64 * (lo.ln() + (-hi).ln_1p())
        })
        .sum();
    -(n as f64) - s / n as f64
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.27 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic CDF of the case-0 Anderson–Darling statistic.
pub fn anderson_darling_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z).exp()).exp()
    }
    .clamp(0.0, 1.0)
}

/// Monte Carlo p-value of a distribution-free statistic computed on uniforms.
fn mc_uniform_p(observed: f64, n: usize, cfg: &BaselineConfig, salt: u64, stat: fn(&[f64]) -> f64) -> f64 {
    let mut s = rng::stream(cfg.seed, Purpose::Baseline, salt, n as u64);
    let mut u = vec![0.0; n];
    let mut at_least = 0usize;
    for _ in 0..cfg.mc_reps {
        u.iter_mut().for_each(|v| *v = s.random::<f64>());
        u.sort_unstable_by(f64::total_cmp);
        if stat(&u) >= observed {
            at_least += 1;
        }
    }
    (1 + at_least) as f64 / (cfg.mc_reps + 1) as f64
}

/// One-sample Kolmogorov–Smirnov test of univariate `data` against `cdf`.
pub fn ks_statistic(data: &Dataset, cdf: &dyn Fn(f64) -> f64, cfg: &BaselineConfig) -> Result<TestOutcome> {
    let u = sorted_pit(data, cdf)?;
    let d = ks_from_pit(&u);
    let n = u.len();
    let p_value = if n < cfg.mc_threshold {
        mc_uniform_p(d, n, cfg, 0, ks_from_pit)
    } else {
        let rn = (n as f64).sqrt();
        kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
    };
    Ok(TestOutcome { statistic: d, p_value })
}

/// One-sample Anderson–Darling test (fully specified null).
pub fn ad_statistic(data: &Dataset, cdf: &dyn Fn(f64) -> f64, cfg: &BaselineConfig) -> Result<TestOutcome> {
    let u = sorted_pit(data, cdf)?;
    let a2 = ad_from_pit(&u);
    let n = u.len();
    let p_value = if n < cfg.mc_threshold {
        mc_uniform_p(a2, n, cfg, 1, ad_from_pit)
    } else {
        1.0 - anderson_darling_cdf(a2)
    };
    Ok(TestOutcome { statistic: a2, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::Normal as StdNormal;

    fn std_normal_cdf(x: f64) -> f64 {
        StdNormal::standard().cdf(x)
    }

    #[test]
    fn tags_round_trip_and_errors_list_valid_tags() {
        for f in Family::ALL {
            assert_eq!(f.tag().parse::<Family>().unwrap(), f);
        }
        let err = "normal".parse::<Family>().unwrap_err().to_string();
        assert!(err.contains("normal_mean") && err.contains("mvn_var"));
    }

    #[test]
    fn samplers_are_deterministic() {
        for f in Family::ALL.into_iter().filter(|f| *f != Family::Bootstrap) {
            let spec = ScenarioSpec::new(f, f.theta_range().1).with_dim(if f.is_multivariate() { 3 } else { 1 });
            let a = sample(&spec, 20, &mut rng::stream(3, Purpose::Replicate, 0, 0)).unwrap();
            let b = sample(&spec, 20, &mut rng::stream(3, Purpose::Replicate, 0, 0)).unwrap();
            assert_eq!(a, b, "{f}");
        }
    }

    #[test]
    fn beta_at_one_is_uniform() {
        let spec = ScenarioSpec::new(Family::BetaSymmetry, 1.0);
        let d = sample(&spec, 20000, &mut rng::stream(1, Purpose::Replicate, 0, 0)).unwrap();
        let xs = d.scalars().unwrap();
        assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 0.01);
        assert_abs_diff_eq!(var, 1.0 / 12.0, epsilon = 0.003);
    }

    #[test]
    fn moment_checks() {
        let n = 40000;
        let mut s = rng::stream(11, Purpose::Replicate, 0, 0);
        let mean_var = |d: &Dataset| {
            let xs = d.scalars().unwrap();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64)
        };
        let (m, v) = mean_var(&sample(&ScenarioSpec::new(Family::NormalVar, 2.0), n, &mut s).unwrap());
        assert_abs_diff_eq!(m, 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(v, 4.0, epsilon = 0.15);
        let (m, _) = mean_var(&sample(&ScenarioSpec::new(Family::GammaShape, 3.0), n, &mut s).unwrap());
        assert_abs_diff_eq!(m, 1.5, epsilon = 0.03);
        let (m, v) = mean_var(&sample(&ScenarioSpec::new(Family::NormalMixture, 2.0), n, &mut s).unwrap());
        assert_abs_diff_eq!(m, 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(v, 5.0, epsilon = 0.15);
        let (m, _) = mean_var(&sample(&ScenarioSpec::new(Family::LognormalMean, 0.0), n, &mut s).unwrap());
        assert_abs_diff_eq!(m, 0.5f64.exp(), epsilon = 0.05);
        let (_, v) = mean_var(&sample(&ScenarioSpec::new(Family::FatTails, 0.2), n, &mut s).unwrap());
        assert_abs_diff_eq!(v, 5.0 / 3.0, epsilon = 0.15);
    }

    #[test]
    fn mvn_mean_shifts_first_coordinate_only() {
        let n = 4000;
        let spec = ScenarioSpec::new(Family::MvnMean, 1.5);
        let d = sample(&spec, n, &mut rng::stream(5, Purpose::Replicate, 0, 0)).unwrap();
        assert_eq!(d.dim(), 100);
        let tol = 3.0 / (n as f64).sqrt();
        for c in 0..100 {
            let mean = d.rows().map(|r| r[c]).sum::<f64>() / n as f64;
            let target = if c == 0 { 1.5 } else { 0.0 };
            assert!((mean - target).abs() < tol, "coordinate {c}: {mean}");
        }
        let spec = ScenarioSpec::new(Family::MvnVar, 9.0).with_dim(4);
        let d = sample(&spec, n, &mut rng::stream(5, Purpose::Replicate, 1, 0)).unwrap();
        let var0 = d.rows().map(|r| r[0] * r[0]).sum::<f64>() / n as f64;
        let var1 = d.rows().map(|r| r[1] * r[1]).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(var0, 9.0, epsilon = 0.6);
        assert_abs_diff_eq!(var1, 1.0, epsilon = 0.1);
    }

    #[test]
    fn null_and_alternative_at_null_theta_agree() {
        // Two-sample KS between independent draws at θ = 0.
        let n = 10_000;
        let a = sample(&ScenarioSpec::null(Family::NormalMean), n, &mut rng::stream(2, Purpose::Replicate, 0, 0)).unwrap();
        let b = sample(&ScenarioSpec::new(Family::NormalMean, 0.0), n, &mut rng::stream(2, Purpose::Replicate, 1, 0)).unwrap();
        let mut xa = a.scalars().unwrap().to_vec();
        let mut xb = b.scalars().unwrap().to_vec();
        xa.sort_unstable_by(f64::total_cmp);
        xb.sort_unstable_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < n && j < n {
            if xa[i] <= xb[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        // 1% critical value of the two-sample statistic: 1.628·√(2/n).
        assert!(d < 1.628 * (2.0 / n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn bootstrap_examples() {
        let one = Dataset::from_rows(&[[3.0, 4.0]]).unwrap();
        let d = bootstrap_sample(&one, 5, &mut rng::stream(0, Purpose::Bootstrap, 0, 0)).unwrap();
        assert!(d.rows().all(|r| r == [3.0, 4.0]));

        let reference = Dataset::from_scalars(&[5.0, 6.0, 7.0, 8.0]).unwrap();
        let mut next = 0;
        let same = bootstrap_with(&reference, 4, |_| {
            next += 1;
            next - 1
        })
        .unwrap();
        assert_eq!(same, reference);

        let big = bootstrap_sample(&reference, 100_000, &mut rng::stream(9, Purpose::Bootstrap, 0, 0)).unwrap();
        for v in [5.0, 6.0, 7.0, 8.0] {
            let f = big.scalars().unwrap().iter().filter(|&&x| x == v).count() as f64 / 100_000.0;
            assert_abs_diff_eq!(f, 0.25, epsilon = 0.01);
        }
        assert!(bootstrap_sample(&Dataset::empty(1), 3, &mut rng::stream(0, Purpose::Bootstrap, 0, 0)).is_err());
    }

    #[test]
    fn ks_examples() {
        let n = 40;
        let grid: Vec<f64> = (1..=n)
            .map(|i| StdNormal::standard().inverse_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let out = ks_statistic(&Dataset::from_scalars(&grid).unwrap(), &std_normal_cdf, &BaselineConfig::default()).unwrap();
        assert_abs_diff_eq!(out.statistic, 0.5 / n as f64, epsilon = 1e-9);

        let out = ks_statistic(&Dataset::from_scalars(&[0.0]).unwrap(), &std_normal_cdf, &BaselineConfig::default()).unwrap();
        assert_abs_diff_eq!(out.statistic, 0.5, epsilon = 1e-15);
        assert!(out.p_value > 0.5);

        let mv = Dataset::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(matches!(ks_statistic(&mv, &std_normal_cdf, &BaselineConfig::default()), Err(SstError::Usage(_))));
    }

    #[test]
    fn ad_examples() {
        let out = ad_statistic(&Dataset::from_scalars(&[0.0]).unwrap(), &std_normal_cdf, &BaselineConfig::default()).unwrap();
        assert_abs_diff_eq!(out.statistic, 2.0 * 2f64.ln() - 1.0, epsilon = 1e-12);

        // Monotone reparameterization x ↦ eˣ with the lognormal CDF.
        let xs = [-1.3, -0.2, 0.1, 0.8, 2.2];
        let ex: Vec<f64> = xs.iter().map(|x: &f64| x.exp()).collect();
        let ln = LogNormalCdf::new(0.0, 1.0).unwrap();
        let a = ad_statistic(&Dataset::from_scalars(&xs).unwrap(), &std_normal_cdf, &BaselineConfig::default()).unwrap();
        let b = ad_statistic(&Dataset::from_scalars(&ex).unwrap(), &|x| ln.cdf(x), &BaselineConfig::default()).unwrap();
        assert_abs_diff_eq!(a.statistic, b.statistic, epsilon = 1e-12);
    }

    #[test]
    fn asymptotic_tails_match_critical_values() {
        // Classical asymptotic critical values.
        assert_abs_diff_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 2e-4);
        assert_abs_diff_eq!(1.0 - anderson_darling_cdf(2.492), 0.05, epsilon = 5e-4);
        assert_abs_diff_eq!(1.0 - anderson_darling_cdf(3.878), 0.01, epsilon = 2e-5);
        assert_abs_diff_eq!(1.0 - anderson_darling_cdf(1.933), 0.10, epsilon = 5e-4);
    }

    #[test]
    fn statistics_ignore_data_order() {
        let xs = [0.3, -1.2, 2.0, 0.0, -0.4, 1.1];
        let mut rev = xs;
        rev.reverse();
        let cfg = BaselineConfig::default();
        for f in [ks_statistic, ad_statistic] {
            let a = f(&Dataset::from_scalars(&xs).unwrap(), &std_normal_cdf, &cfg).unwrap();
            let b = f(&Dataset::from_scalars(&rev).unwrap(), &std_normal_cdf, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }
}
