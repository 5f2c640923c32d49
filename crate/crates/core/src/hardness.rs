//! Lower-bound constructions: symmetric gadgets correlated with parities,
//! the middle-layer embedding of Boolean functions, and a noisy-parity
//! reduction harness.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{binomial, ensure_enumerable, full_mask, fw_rank, fw_unrank, Point, SubsetMask};
use crate::fourier::{low_degree_estimate, parity_bits, transform, CoefficientSource, LabeledSample, Spectrum};
use crate::funcs::ValueOracle;
use crate::{rng, Error, Result};

/// Exact rationals.
pub type Rational = Ratio<i128>;

/// Largest `s` accepted by the rational correlation formulas.
pub const MAX_GADGET_SIZE: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetKind {
    /// `R_S`: rises to 1 then falls back symmetrically.
    Plateau,
    /// `H_S`: rises to 1 and stays there.
    Monotone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GadgetSpec {
    pub set: SubsetMask,
    pub kind: GadgetKind,
}

impl GadgetSpec {
    pub fn new(set: SubsetMask, kind: GadgetKind) -> Result<Self> {
        if set.len() < 2 {
            return Err(Error::InvalidParameter(format!("gadget needs |S| ≥ 2, got {}", set.len())));
        }
        Ok(GadgetSpec { set, kind })
    }

    pub fn s(&self) -> usize {
        self.set.len()
    }

    /// `k = ⌈s/2⌉`.
    pub fn k(&self) -> usize {
        self.s().div_ceil(2)
    }

    pub fn profile(&self) -> Vec<Rational> {
        (0..=self.s()).map(|w| profile_value(self.kind, self.s(), w)).collect()
    }
}

/// Weight at which the profile of an `s`-gadget reaches 1: `k` for even
/// `s = 2k`, `k − 1` for odd `s = 2k − 1`.
fn peak(s: usize) -> usize {
    if s.is_multiple_of(2) {
        s / 2
    } else {
        s.div_ceil(2) - 1
    }
}

/// Profile value at weight `w` of the size-`s` gadget.
pub fn profile_value(kind: GadgetKind, s: usize, w: usize) -> Rational {
    let p = peak(s) as i128;
    let w = w as i128;
    if w <= p {
        return Rational::new(w, p);
    }
    match kind {
        GadgetKind::Monotone => Rational::from_integer(1),
        GadgetKind::Plateau => Rational::from_integer(1) - Rational::new(w - p, p),
    }
}

/// The gadget on `{0,1}^n`, reading only the coordinates in `S`.
pub fn make_gadget(spec: &GadgetSpec, n: usize) -> Result<ValueOracle> {
    if spec.s() < 2 {
        return Err(Error::InvalidParameter(format!("gadget needs |S| ≥ 2, got {}", spec.s())));
    }
    if spec.set.0 & !full_mask(n) != 0 {
        return Err(Error::InvalidParameter(format!("gadget set {} not inside [{n}]", spec.set)));
    }
    let profile: Vec<f64> = spec.profile().iter().map(ratio_to_f64).collect();
    let mask = spec.set.0;
    Ok(ValueOracle::new(n, move |x| profile[(x & mask).count_ones() as usize]))
}

pub fn ratio_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `p/q` with the sign on the numerator.
pub fn format_ratio(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn check_gadget_size(s: usize) -> Result<()> {
    if s < 2 {
        return Err(Error::InvalidParameter(format!("correlation is undefined for s = {s}")));
    }
    if s > MAX_GADGET_SIZE {
        return Err(Error::InvalidParameter(format!("s = {s} exceeds {MAX_GADGET_SIZE}")));
    }
    Ok(())
}

fn sign(e: usize) -> i128 {
    if e.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `⟨R_S, χ_S⟩` from the closed forms:
/// `(−1)^k · 2/2^{2k} · C(2k−1,k)/(2k−1)` for `s = 2k` and
/// `(−1)^{k+1} · 1/2^{2k−1} · C(2k−2,k−1)/(k−1)` for `s = 2k − 1`.
pub fn correlation_closed_form(s: usize) -> Result<Rational> {
    check_gadget_size(s)?;
    let k = s.div_ceil(2);
    if s.is_multiple_of(2) {
        let c = binomial(2 * k - 1, k) as i128;
        Ok(Rational::new(sign(k) * 2 * c, (1i128 << (2 * k)) * (2 * k as i128 - 1)))
    } else {
        let c = binomial(2 * k - 2, k - 1) as i128;
        Ok(Rational::new(sign(k + 1) * c, (1i128 << (2 * k - 1)) * (k as i128 - 1)))
    }
}

/// `⟨g, χ_S⟩` by summing over all `2^s` points of `{0,1}^S`.
pub fn correlation_brute_force(kind: GadgetKind, s: usize) -> Result<Rational> {
    check_gadget_size(s)?;
    ensure_enumerable(s)?;
    let profile: Vec<Rational> = (0..=s).map(|w| profile_value(kind, s, w)).collect();
    let total = (0..1u64 << s).fold(Rational::from_integer(0), |acc, x| {
        let w = x.count_ones() as usize;
        acc + profile[w] * sign(w)
    });
    Ok(total / (1i128 << s))
}

/// `Σ_{j≤r} (−1)^j C(n, j)` term by term.
pub fn alternating_partial_sum(n: usize, r: usize) -> Result<i128> {
    check_partial_sum_args(n, r)?;
    Ok((0..=r).map(|j| sign(j) * binomial(n, j) as i128).sum())
}

/// `(−1)^r C(n−1, r)`, with `C(−1, r) = (−1)^r` at `n = 0`.
pub fn alternating_partial_sum_closed(n: usize, r: usize) -> Result<i128> {
    check_partial_sum_args(n, r)?;
    if n == 0 {
        return Ok(1);
    }
    Ok(sign(r) * binomial(n - 1, r) as i128)
}

fn check_partial_sum_args(n: usize, r: usize) -> Result<()> {
    if r > n || n > 62 {
        return Err(Error::InvalidParameter(format!("need 0 ≤ r ≤ n ≤ 62, got n = {n}, r = {r}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub s: usize,
    pub closed_form: String,
    pub brute_force: String,
    pub monotone: String,
    pub exact_match: bool,
    pub half_identity: bool,
    pub scaled_magnitude: f64,
}

/// Closed form against brute force for `2 ≤ s ≤ smax`, together with
/// `⟨H_S, χ_S⟩` and `|⟨H_S, χ_S⟩|·s^{3/2}`.
pub fn correlation_table(smax: usize) -> Result<Vec<CorrelationRow>> {
    (2..=smax)
        .into_par_iter()
        .map(|s| {
            let closed = correlation_closed_form(s)?;
            let brute = correlation_brute_force(GadgetKind::Plateau, s)?;
            let mono = correlation_brute_force(GadgetKind::Monotone, s)?;
            Ok(CorrelationRow {
                s,
                closed_form: format_ratio(&closed),
                brute_force: format_ratio(&brute),
                monotone: format_ratio(&mono),
                exact_match: closed == brute,
                half_identity: mono * 2 == brute,
                scaled_magnitude: ratio_to_f64(&mono).abs() * (s as f64).powf(1.5),
            })
        })
        .collect()
}

/// Middle-layer embedding parameters for `k`-variable Boolean functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmbeddingSpec {
    pub k: usize,
    pub t: usize,
    pub alpha_emb: f64,
}

impl EmbeddingSpec {
    /// Smallest `t` with `C(2t, t) ≥ 2^k`.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > 24 {
            return Err(Error::InvalidParameter(format!("embedding needs 1 ≤ k ≤ 24, got {k}")));
        }
        let t = (1..).find(|&t| binomial(2 * t, t) >= 1u64 << k).expect("central binomials grow");
        let alpha_emb = (1u64 << k) as f64 * (t as f64).sqrt() / 2f64.powi(2 * t as i32);
        Ok(EmbeddingSpec { k, t, alpha_emb })
    }

    pub fn outer_dim(&self) -> usize {
        2 * self.t
    }

    /// `β(y)`: the weight-`t` string whose lexicographic position equals
    /// the position of `y` among `{0,1}^k` (`y_1` most significant).
    pub fn beta(&self, y: u64) -> Point {
        fw_unrank(2 * self.t, self.t, position(y, self.k)).expect("2^k ≤ C(2t, t)")
    }

    /// `β⁻¹(x)` when `x` is in the image.
    pub fn beta_inverse(&self, x: &Point) -> Option<u64> {
        if x.dim() != 2 * self.t || x.hamming_weight() != self.t {
            return None;
        }
        let r = fw_rank(x);
        (r < 1u64 << self.k).then(|| position(r, self.k))
    }

    /// Approximation level of `h` that forces `E|f̃ − f| ≤ ε`:
    /// `α_emb · ε / (8 t^{3/2})`.
    pub fn transfer_bound(&self, eps: f64) -> f64 {
        self.alpha_emb * eps / (8.0 * (self.t as f64).powf(1.5))
    }

    /// Decoding threshold `1 − 1/(4t)`.
    pub fn threshold(&self) -> f64 {
        1.0 - 1.0 / (4.0 * self.t as f64)
    }

    /// Lowered middle-layer value `1 − 1/(2t)`.
    pub fn lowered(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.t as f64)
    }
}

/// Reverses the low `k` bits, turning bit-per-coordinate storage into the
/// lexicographic position and back.
fn position(bits: u64, k: usize) -> u64 {
    bits.reverse_bits() >> (64 - k)
}

/// The monotone submodular `h` on `{0,1}^{2t}` hiding `f` in its middle
/// layer. Values of `f` below ½ count as 0. Each `h` query costs at most
/// one `f` query.
pub fn embed_build(f: &ValueOracle) -> Result<(ValueOracle, EmbeddingSpec)> {
    let spec = EmbeddingSpec::new(f.dim())?;
    let (t, n2) = (spec.t, spec.outer_dim());
    let f = f.clone();
    let h = ValueOracle::new(n2, move |x| {
        let w = x.count_ones() as usize;
        if w < t {
            return w as f64 / t as f64;
        }
        if w > t {
            return 1.0;
        }
        match spec.beta_inverse(&Point::new(n2, x)) {
            Some(y) if f.value(y) < 0.5 => spec.lowered(),
            _ => 1.0,
        }
    });
    Ok((h, spec))
}

/// `f̃(y) = 1` iff `g(β(y)) ≥ 1 − 1/(4t)`.
pub fn embed_decode(g: &ValueOracle, spec: &EmbeddingSpec) -> Result<ValueOracle> {
    if g.dim() != spec.outer_dim() {
        return Err(Error::DimensionMismatch { expected: spec.outer_dim(), actual: g.dim() });
    }
    let (g, spec) = (g.clone(), *spec);
    Ok(ValueOracle::new(spec.k, move |y| if g.value(spec.beta(y).bits()) >= spec.threshold() { 1.0 } else { 0.0 }))
}

/// A tabulated `g` with `E|g − h| ≤ budget`. Middle-layer points in the
/// image of `β` are pushed across the decoding threshold in seeded random
/// order while the budget allows; what remains is spread as random-sign
/// noise over the points outside the middle layer.
pub fn perturb_embedding(h: &ValueOracle, spec: &EmbeddingSpec, budget: f64, seed: u64) -> Result<ValueOracle> {
    if h.dim() != spec.outer_dim() {
        return Err(Error::DimensionMismatch { expected: spec.outer_dim(), actual: h.dim() });
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::InvalidParameter(format!("budget must be nonnegative, got {budget}")));
    }
    let mut table = h.table()?;
    let size = table.len() as f64;
    let mut rng = rng::derived(seed, &[rng::tag("perturb-embedding"), spec.k as u64]);
    let mut ys: Vec<u64> = (0..1u64 << spec.k).collect();
    ys.shuffle(&mut rng);
    let mut spent = 0.0;
    for y in ys {
        let x = spec.beta(y).bits() as usize;
        let target = if table[x] >= spec.threshold() { spec.threshold() - 1e-9 } else { spec.threshold() };
        let cost = (target - table[x]).abs() / size;
        if spent + cost > budget {
            continue;
        }
        table[x] = target;
        spent += cost;
    }
    let t = spec.t;
    let off_layer: Vec<usize> = (0..table.len()).filter(|&x| (x as u64).count_ones() as usize != t).collect();
    let per_point = 0.999 * (budget - spent).max(0.0) * size / off_layer.len() as f64;
    for x in off_layer {
        table[x] += if rng.gen::<bool>() { per_point } else { -per_point };
    }
    ValueOracle::from_table(spec.outer_dim(), table)
}

/// Uniform `E|a − b|` over the cube.
pub fn mean_abs_difference(a: &ValueOracle, b: &ValueOracle) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    ensure_enumerable(a.dim())?;
    let total: f64 = (0..1u64 << a.dim()).map(|x| (a.value(x) - b.value(x)).abs()).sum();
    Ok(total / (1u64 << a.dim()) as f64)
}

/// Random examples of `χ_S` with labels flipped independently at rate `η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisySource {
    pub parity: SubsetMask,
    pub n: usize,
    pub eta: f64,
    pub seed: u64,
}

impl NoisySource {
    pub fn new(parity: SubsetMask, n: usize, eta: f64, seed: u64) -> Result<Self> {
        if n == 0 || n > 63 || parity.0 & !full_mask(n) != 0 {
            return Err(Error::InvalidParameter(format!("parity {parity} does not fit n = {n}")));
        }
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::InvalidParameter(format!("η must lie in [0, 1/2), got {eta}")));
        }
        Ok(NoisySource { parity, n, eta, seed })
    }

    /// `m` examples from the independent stream `stream`.
    pub fn examples(&self, m: usize, stream: u64) -> LabeledSample {
        let mut rng = rng::derived(self.seed, &[rng::tag("noisy-examples"), stream]);
        let mask = full_mask(self.n);
        let mut points = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let x = rng.gen::<u64>() & mask;
            let flipped = rng.gen::<f64>() < self.eta;
            let y = parity_bits(self.parity.0, x);
            points.push(x);
            labels.push(if flipped { -y } else { y });
        }
        LabeledSample::new(self.n, points, labels)
    }
}

/// The first `m` examples of `src`.
pub fn noisy_examples(src: &NoisySource, m: usize) -> LabeledSample {
    src.examples(m, 0)
}

/// Empirical `E|f(x) − y|`.
pub fn empirical_abs_error(sample: &LabeledSample, f: impl Fn(u64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let total: f64 = sample.points.iter().zip(&sample.labels).map(|(&x, &y)| (f(x) - y).abs()).sum();
    Ok(total / sample.len() as f64)
}

/// `E|f − y|` under noisy examples of `χ_S`, summed exactly over points and
/// the flip bit. Requires `f` to take values in `[−1, 1]`.
pub fn noisy_error_exact(f: &ValueOracle, parity: SubsetMask, eta: f64) -> Result<f64> {
    ensure_enumerable(f.dim())?;
    let mut total = 0.0;
    for x in 0..1u64 << f.dim() {
        let v = f.value(x);
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::InvalidParameter(format!("value {v} outside [−1, 1]")));
        }
        let chi = parity_bits(parity.0, x);
        total += (1.0 - eta) * (v - chi).abs() + eta * (v + chi).abs();
    }
    Ok(total / (1u64 << f.dim()) as f64)
}

/// `1 − (1 − 2η) f̂(S)`.
pub fn noisy_error_formula(coefficient: f64, eta: f64) -> f64 {
    1.0 - (1.0 - 2.0 * eta) * coefficient
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpnConfig {
    /// Sparsity bound on the target.
    pub k: usize,
    /// Correlation guaranteed by the class.
    pub gamma: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

/// `⌈8 ln(32/γ²) / (1 − 2η)²⌉`, at least 64.
pub fn lpn_test_samples(eta: f64, gamma: f64) -> usize {
    let m = 8.0 * (32.0 / (gamma * gamma)).ln() / (1.0 - 2.0 * eta).powi(2);
    (m.ceil() as usize).max(64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpnOutcome {
    pub recovered: SubsetMask,
    /// Every candidate with its empirical `E|χ_S − y|` on fresh examples.
    pub candidates: Vec<(SubsetMask, f64)>,
    /// Accuracy handed to the learner, `(1 − 2η)γ/2`.
    pub eps: f64,
}

/// Runs `learner` at accuracy `(1 − 2η)γ/2` on noisy examples and on their
/// negation, collects every set with `|S| ≤ k` whose hypothesis coefficient
/// is at least `γ/4` in magnitude, and returns the candidate with the
/// smallest empirical `E|χ_S − y|` on fresh examples (smallest mask on ties).
pub fn lpn_reduce<L>(src: &NoisySource, cfg: &LpnConfig, learner: L) -> Result<LpnOutcome>
where
    L: Fn(&LabeledSample, f64) -> Result<Spectrum>,
{
    if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("γ must lie in (0, 1], got {}", cfg.gamma)));
    }
    let eps = (1.0 - 2.0 * src.eta) * cfg.gamma / 2.0;
    let train = src.examples(cfg.train_samples, 0);
    let negated = train.map_labels(|y| -y);
    let mut candidates: Vec<SubsetMask> = Vec::new();
    for sample in [&train, &negated] {
        let h = learner(sample, eps)?;
        candidates.extend(h.iter().filter(|(s, c)| s.len() <= cfg.k && c.abs() >= cfg.gamma / 4.0).map(|(s, _)| s));
    }
    candidates.sort();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(Error::NoCandidate);
    }
    let test = src.examples(cfg.test_samples, 1);
    let scored = candidates
        .into_iter()
        .map(|s| Ok((s, empirical_abs_error(&test, |x| parity_bits(s.0, x))?)))
        .collect::<Result<Vec<_>>>()?;
    let recovered = scored
        .iter()
        .fold(None::<(SubsetMask, f64)>, |best, &(s, e)| match best {
            Some((_, be)) if be <= e => best,
            _ => Some((s, e)),
        })
        .map(|(s, _)| s)
        .expect("nonempty candidate list");
    Ok(LpnOutcome { recovered, candidates: scored, eps })
}

/// Degree-`d` regression over all variables: every empirical `E[y χ_S]`
/// with `|S| ≤ d`.
pub fn low_degree_learner(d: usize) -> impl Fn(&LabeledSample, f64) -> Result<Spectrum> {
    move |sample, _eps| low_degree_estimate(&CoefficientSource::Sample(sample), SubsetMask::full(sample.n), d)
}

/// Seeded `k`-subset of `[n]`.
pub fn random_parity(n: usize, k: usize, seed: u64) -> Result<SubsetMask> {
    if k > n {
        return Err(Error::InvalidParameter(format!("cannot choose {k} of {n} coordinates")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::derived(seed, &[rng::tag("planted-parity"), n as u64, k as u64]));
    Ok(SubsetMask::from_indices(idx[..k].iter().copied()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpnExperiment {
    pub n: usize,
    pub k: usize,
    pub eta: f64,
    pub gamma: f64,
    pub trials: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub successes: usize,
    pub success_rate: f64,
}

/// `trials` independent runs of [`lpn_reduce`] with a planted `k`-sparse
/// parity and the degree-`k` regression learner. Trial `i` uses base seed
/// `seed + i`.
pub fn lpn_success_rate(
    n: usize,
    k: usize,
    eta: f64,
    trials: usize,
    train_samples: usize,
    seed: u64,
) -> Result<LpnExperiment> {
    let gamma = 1.0;
    let test_samples = lpn_test_samples(eta, gamma);
    let cfg = LpnConfig { k, gamma, train_samples, test_samples };
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let trial_seed = seed.wrapping_add(i);
            let src = NoisySource::new(random_parity(n, k, trial_seed)?, n, eta, trial_seed)?;
            match lpn_reduce(&src, &cfg, low_degree_learner(k)) {
                Ok(out) => Ok(out.recovered == src.parity),
                Err(Error::NoCandidate) => Ok(false),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<bool>>>()?;
    let successes = hits.iter().filter(|&&h| h).count();
    Ok(LpnExperiment {
        n,
        k,
        eta,
        gamma,
        trials,
        train_samples,
        test_samples,
        successes,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
    })
}

/// `H_S` coefficient at `S` as seen by exact degree-`s` regression.
pub fn gadget_coefficient(s: usize) -> Result<f64> {
    let spec = GadgetSpec::new(SubsetMask::full(s), GadgetKind::Monotone)?;
    Ok(transform(&make_gadget(&spec, s)?)?.get(spec.set))
}
