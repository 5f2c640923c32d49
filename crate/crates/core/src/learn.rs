//! Learners: influential-variable discovery, the low-degree PAC learner,
//! degree-restricted Kushilevitz–Mansour search, ℓ₂ agnostic learning of
//! low spectral norm functions, and threshold decomposition.

use rand::Rng;
use rayon::prelude::*;

use crate::cube::{full_mask, SubsetMask};
use crate::dtree::{DecisionTree, Leaf};
use crate::fourier::{low_degree_estimate, parity_bits, transform, CoefficientSource, LabeledSample, Spectrum};
use crate::funcs::ValueOracle;
use crate::{rng, Error, Result};

/// Default confidence parameter of [`km_search`].
pub const KM_DELTA: f64 = 1.0 / 6.0;

/// Output of a learner with its resource accounting.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub spectrum: Spectrum,
    pub variables_used: SubsetMask,
    pub degree: usize,
    pub gamma: f64,
    pub samples: u64,
    pub queries: u64,
}

fn check_open_unit(name: &str, v: f64, upper: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < upper {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, {upper}), got {v}")))
    }
}

/// `J = {i : ∃j |f̃({i,j})| ≥ 3γ²/2} ∪ {i : |f̃({i})| ≥ γ/2}` from degree-≤2
/// estimates (exact coefficients for [`CoefficientSource::Exact`]).
pub fn find_influential_variables(source: &CoefficientSource<'_>, gamma: f64) -> Result<SubsetMask> {
    check_open_unit("γ", gamma, 0.5)?;
    let n = source.dim();
    let est = low_degree_estimate(source, SubsetMask::full(n), 2)?;
    Ok(influential_from_estimates(&est, gamma))
}

fn influential_from_estimates(est: &Spectrum, gamma: f64) -> SubsetMask {
    let (pair_cut, single_cut) = (1.5 * gamma * gamma, gamma / 2.0);
    let mut j = SubsetMask::EMPTY;
    for (s, c) in est.iter() {
        let hit = match s.len() {
            1 => c.abs() >= single_cut,
            2 => c.abs() >= pair_cut,
            _ => false,
        };
        if hit {
            j = j.union(s);
        }
    }
    j
}

/// Every variable of a set `S` with `|S| ≤ d` and `|f̂(S)| ≥ threshold`.
pub fn significant_variables(sp: &Spectrum, d: usize, threshold: f64) -> SubsetMask {
    sp.iter().filter(|(s, c)| s.len() <= d && c.abs() >= threshold).fold(SubsetMask::EMPTY, |acc, (s, _)| acc.union(s))
}

/// `γ = max(2^{−4/ε²}, 2^{−20})`.
pub fn default_gamma(eps: f64) -> f64 {
    2f64.powf(-4.0 / (eps * eps)).max(2f64.powi(-20))
}

/// `d = ⌈1/ε²⌉`.
pub fn default_degree(eps: f64) -> usize {
    (1.0 / (eps * eps)).ceil() as usize
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PacOptions {
    pub gamma: Option<f64>,
    pub degree: Option<usize>,
}

/// Influential variables, then the low-degree algorithm over them.
pub fn pac_learn(source: &CoefficientSource<'_>, eps: f64, opts: PacOptions) -> Result<Hypothesis> {
    check_open_unit("ε", eps, f64::INFINITY)?;
    let gamma = opts.gamma.unwrap_or_else(|| default_gamma(eps));
    let degree = opts.degree.unwrap_or_else(|| default_degree(eps));
    let oracle = match source {
        CoefficientSource::Exact(f) | CoefficientSource::Oracle { f, .. } => Some(*f),
        CoefficientSource::Sample(_) => None,
    };
    let before = oracle.map_or(0, |f| f.query_count());
    let drawn;
    let source = match source {
        CoefficientSource::Oracle { f, m, seed } => {
            drawn = LabeledSample::draw(f, *m, *seed);
            CoefficientSource::Sample(&drawn)
        }
        CoefficientSource::Exact(f) => CoefficientSource::Exact(f),
        CoefficientSource::Sample(s) => CoefficientSource::Sample(s),
    };
    let samples = match &source {
        CoefficientSource::Sample(s) => s.len() as u64,
        _ => 0,
    };
    let j = find_influential_variables(&source, gamma)?;
    let spectrum = low_degree_estimate(&source, j, degree)?;
    let queries = oracle.map_or(0, |f| f.query_count() - before);
    Ok(Hypothesis { spectrum, variables_used: j, degree, gamma, samples, queries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KmMode {
    /// Bucket weights and coefficients from the exact spectrum.
    Exact,
    /// Paired-sample estimates from value queries.
    Sampled,
}

#[derive(Clone, Copy, Debug)]
pub struct KmOptions {
    pub mode: KmMode,
    pub delta: f64,
    pub samples_per_bucket: Option<usize>,
    pub samples_per_coefficient: Option<usize>,
}

impl Default for KmOptions {
    fn default() -> Self {
        KmOptions { mode: KmMode::Sampled, delta: KM_DELTA, samples_per_bucket: None, samples_per_coefficient: None }
    }
}

#[derive(Clone, Debug)]
pub struct KmResult {
    pub spectrum: Spectrum,
    pub theta: f64,
    pub degree: Option<usize>,
    pub buckets_examined: u64,
    pub samples_per_bucket: usize,
    pub samples_per_coefficient: usize,
    pub queries: u64,
}

/// `(⌈32 ln(2B/δ)/θ⁴⌉, ⌈32 ln(2B/δ)/θ²⌉)` with `B = 8n/θ² + 1`.
pub fn km_sample_sizes(n: usize, theta: f64, delta: f64) -> (usize, usize) {
    let b = 2.0 * n as f64 * 4.0 / (theta * theta) + 1.0;
    let log = (2.0 * b / delta).ln();
    ((32.0 * log / theta.powi(4)).ceil() as usize, (32.0 * log / (theta * theta)).ceil() as usize)
}

/// Significant coefficients of `f : {0,1}^n → [−1,1]` by prefix-bucket search.
///
/// A bucket is a membership pattern `α` on the first `k` coordinates, with
/// weight `Σ_β f̂(αβ)²`. Buckets of weight below `θ²/2` or with more than `d`
/// members are dropped; surviving singletons are kept when their estimate is
/// at least `3θ/4`.
pub fn km_search(f: &ValueOracle, theta: f64, degree: Option<usize>, seed: u64, opts: KmOptions) -> Result<KmResult> {
    check_open_unit("θ", theta, f64::INFINITY)?;
    check_open_unit("δ", opts.delta, 1.0 + f64::EPSILON)?;
    let n = f.dim();
    let (bucket_m, coef_m) = km_sample_sizes(n, theta, opts.delta);
    let bucket_m = opts.samples_per_bucket.unwrap_or(bucket_m);
    let coef_m = opts.samples_per_coefficient.unwrap_or(coef_m);
    let before = f.query_count();
    let exact = match opts.mode {
        KmMode::Exact => Some(transform(f)?),
        KmMode::Sampled => None,
    };
    let within_degree = |alpha: u64| degree.is_none_or(|d| alpha.count_ones() as usize <= d);

    let mut alive: Vec<u64> = vec![0];
    let mut examined = 0u64;
    for k in 0..n {
        let children: Vec<u64> = alive.iter().flat_map(|&a| [a, a | 1 << k]).filter(|&a| within_degree(a)).collect();
        examined += children.len() as u64;
        let weights: Vec<f64> = children
            .par_iter()
            .map(|&a| match &exact {
                Some(sp) => exact_bucket_weight(sp, a, k + 1),
                None => sampled_bucket_weight(f, a, k + 1, bucket_m, seed),
            })
            .collect();
        alive = children.into_iter().zip(weights).filter(|(_, w)| *w >= theta * theta / 2.0).map(|(a, _)| a).collect();
    }

    let estimates: Vec<f64> = alive
        .par_iter()
        .map(|&s| match &exact {
            Some(sp) => sp.get(SubsetMask(s)),
            None => sampled_coefficient(f, s, coef_m, seed),
        })
        .collect();
    let mut spectrum = Spectrum::new(n);
    for (s, c) in alive.into_iter().zip(estimates) {
        if c.abs() >= 0.75 * theta {
            spectrum.insert(SubsetMask(s), c);
        }
    }
    Ok(KmResult {
        spectrum,
        theta,
        degree,
        buckets_examined: examined,
        samples_per_bucket: bucket_m,
        samples_per_coefficient: coef_m,
        queries: f.query_count() - before,
    })
}

fn exact_bucket_weight(sp: &Spectrum, alpha: u64, k: usize) -> f64 {
    let prefix = full_mask(k);
    sp.iter().filter(|(s, _)| s.0 & prefix == alpha).map(|(_, c)| c * c).sum()
}

/// `E[f(y x) f(z x) χ_α(y) χ_α(z)]` over uniform `y, z` on the first `k`
/// coordinates and `x` on the rest.
fn sampled_bucket_weight(f: &ValueOracle, alpha: u64, k: usize, m: usize, seed: u64) -> f64 {
    let mut rng = rng::derived(seed, &[rng::tag("km-bucket"), k as u64, alpha]);
    let prefix = full_mask(k);
    let suffix = full_mask(f.dim()) & !prefix;
    let total: f64 = (0..m)
        .map(|_| {
            let x = rng.gen::<u64>() & suffix;
            let y = rng.gen::<u64>() & prefix;
            let z = rng.gen::<u64>() & prefix;
            f.value(y | x) * f.value(z | x) * parity_bits(alpha, y) * parity_bits(alpha, z)
        })
        .sum();
    total / m as f64
}

fn sampled_coefficient(f: &ValueOracle, s: u64, m: usize, seed: u64) -> f64 {
    let mut rng = rng::derived(seed, &[rng::tag("km-coefficient"), s]);
    let mask = full_mask(f.dim());
    let total: f64 = (0..m)
        .map(|_| {
            let x = rng.gen::<u64>() & mask;
            f.value(x) * parity_bits(s, x)
        })
        .sum();
    total / m as f64
}

/// `θ = ε²/(2L)`.
pub fn agnostic_theta(eps: f64, l_bound: f64) -> f64 {
    eps * eps / (2.0 * l_bound)
}

/// ℓ₂ agnostic learner for `f : {0,1}^n → [−1,1]`: [`km_search`] at
/// `θ = ε²/(2L)`, returning the retained estimates.
pub fn agnostic_l2_learn(
    f: &ValueOracle,
    eps: f64,
    l_bound: f64,
    degree: Option<usize>,
    seed: u64,
    opts: KmOptions,
) -> Result<KmResult> {
    check_open_unit("ε", eps, f64::INFINITY)?;
    check_open_unit("L", l_bound, f64::INFINITY)?;
    km_search(f, agnostic_theta(eps, l_bound), degree, seed, opts)
}

/// The same learner for `f` with range `[0,1]`: runs on `2f − 1` with
/// `ε' = 2ε`, `L' = 2L + 1` and maps the hypothesis back.
pub fn agnostic_l2_learn_unit(
    f: &ValueOracle,
    eps: f64,
    l_bound: f64,
    degree: Option<usize>,
    seed: u64,
    opts: KmOptions,
) -> Result<KmResult> {
    let parent = f.clone();
    let signed = ValueOracle::new(f.dim(), move |x| 2.0 * parent.value(x) - 1.0);
    let mut res = agnostic_l2_learn(&signed, 2.0 * eps, 2.0 * l_bound + 1.0, degree, seed, opts)?;
    let mut back = Spectrum::new(f.dim());
    for (s, c) in res.spectrum.iter() {
        back.insert(s, c / 2.0);
    }
    back.insert(SubsetMask::EMPTY, back.get(SubsetMask::EMPTY) + 0.5);
    res.spectrum = back;
    Ok(res)
}

/// The closest function to `f` (in ℓ₂) among those with `‖ĝ‖₁ ≤ L` and
/// degree at most `d`: the Euclidean projection of the truncated spectrum
/// onto the ℓ₁ ball, by soft thresholding.
pub fn best_l1_bounded(sp: &Spectrum, l_bound: f64, degree: Option<usize>) -> Spectrum {
    let kept: Vec<(SubsetMask, f64)> = sp.iter().filter(|(s, _)| degree.is_none_or(|d| s.len() <= d)).collect();
    let l1: f64 = kept.iter().map(|(_, c)| c.abs()).sum();
    if l1 <= l_bound {
        return Spectrum::from_coeffs(sp.dim(), kept);
    }
    let mut mags: Vec<f64> = kept.iter().map(|(_, c)| c.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut tau = 0.0;
    let mut prefix = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        prefix += m;
        let candidate = (prefix - l_bound) / (i + 1) as f64;
        if candidate < m {
            tau = candidate;
        }
    }
    let shrunk = kept.into_iter().filter(|(_, c)| c.abs() > tau).map(|(s, c)| (s, c.signum() * (c.abs() - tau)));
    Spectrum::from_coeffs(sp.dim(), shrunk)
}

/// Boolean thresholds of a `[0,1]`-valued function and their recombination.
pub struct ThresholdDecomposition {
    pub thresholds: Vec<f64>,
    /// `g_θ(x) = [g(x) ≥ θ]` for each threshold.
    pub indicators: Vec<ValueOracle>,
    /// `ε · Σ_i g_{iε}`.
    pub recombined: ValueOracle,
}

/// Thresholds `θ_i = iε` for `i = 1..⌊1/ε⌋`.
pub fn threshold_decompose(g: &ValueOracle, eps: f64) -> Result<ThresholdDecomposition> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("ε must lie in (0,1], got {eps}")));
    }
    let count = (1.0 / eps + 1e-9).floor() as usize;
    let thresholds: Vec<f64> = (1..=count).map(|i| i as f64 * eps).collect();
    let indicators = thresholds
        .iter()
        .map(|&t| {
            let parent = g.clone();
            ValueOracle::new(g.dim(), move |x| if parent.value(x) >= t - 1e-12 { 1.0 } else { 0.0 })
        })
        .collect();
    let parent = g.clone();
    let ts = thresholds.clone();
    let recombined = ValueOracle::new(g.dim(), move |x| {
        let v = parent.value(x);
        eps * ts.iter().filter(|&&t| v >= t - 1e-12).count() as f64
    });
    Ok(ThresholdDecomposition { thresholds, indicators, recombined })
}

/// `[T(x) ≥ θ]` as a tree with the same shape as `T`.
pub fn threshold_tree(t: &DecisionTree, theta: f64) -> Result<DecisionTree> {
    match t {
        DecisionTree::Leaf(Leaf::Constant(c)) => {
            Ok(DecisionTree::constant(if *c >= theta - 1e-12 { 1.0 } else { 0.0 }))
        }
        DecisionTree::Leaf(Leaf::Oracle(_)) => Err(Error::NonConstantLeaf),
        DecisionTree::Node { var, lo, hi } => {
            Ok(DecisionTree::node(*var, threshold_tree(lo, theta)?, threshold_tree(hi, theta)?))
        }
    }
}
