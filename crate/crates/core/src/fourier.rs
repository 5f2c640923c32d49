//! Fourier analysis on `{0,1}^n` with `f̂(S) = E[f χ_S]` and
//! `f = Σ_S f̂(S) χ_S`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::cube::{binomial, ensure_enumerable, full_mask, Point, SubsetMask};
use crate::funcs::{gather, ValueOracle};
use crate::rng;
use crate::{Error, Result};

/// Coefficients smaller than this are dropped from exact spectra.
pub const DROP_BELOW: f64 = 1e-12;

/// Upper limit on candidate sets for [`low_degree_estimate`].
pub const DEFAULT_CANDIDATE_BUDGET: u64 = 1 << 20;

/// Histogram-plus-transform is used when `|J|` is at most this.
const HISTOGRAM_MAX_VARS: usize = 20;

/// `χ_S(x)` on bit masks.
pub fn parity_bits(s: u64, x: u64) -> f64 {
    if (s & x).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `χ_S(x) = (−1)^{Σ_{i∈S} x_i}`.
pub fn parity(s: SubsetMask, x: &Point) -> f64 {
    parity_bits(s.0, x.bits())
}

/// Unnormalized in-place Walsh–Hadamard butterfly.
pub fn walsh_hadamard(values: &mut [f64]) {
    let len = values.len();
    assert!(len.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < len {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Turns a truth table into its coefficient vector (indexed by mask).
pub fn transform_table(values: &mut [f64]) {
    walsh_hadamard(values);
    let scale = 1.0 / values.len() as f64;
    values.iter_mut().for_each(|v| *v *= scale);
}

/// Turns a coefficient vector back into a truth table.
pub fn inverse_transform_table(coeffs: &mut [f64]) {
    walsh_hadamard(coeffs);
}

/// Sparse map from subsets to coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Spectrum {
    n: usize,
    coeffs: BTreeMap<u64, f64>,
}

impl Spectrum {
    pub fn new(n: usize) -> Self {
        Spectrum { n, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs(n: usize, coeffs: impl IntoIterator<Item = (SubsetMask, f64)>) -> Self {
        let mut sp = Spectrum::new(n);
        for (s, c) in coeffs {
            sp.insert(s, c);
        }
        sp
    }

    /// Dense coefficient vector, dropping entries below [`DROP_BELOW`].
    pub fn from_dense(n: usize, coeffs: &[f64]) -> Self {
        let coeffs =
            coeffs.iter().enumerate().filter(|(_, c)| c.abs() >= DROP_BELOW).map(|(s, &c)| (s as u64, c)).collect();
        Spectrum { n, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, s: SubsetMask, c: f64) {
        assert!(s.0 & !full_mask(self.n) == 0, "subset outside the ambient dimension");
        self.coeffs.insert(s.0, c);
    }

    pub fn get(&self, s: SubsetMask) -> f64 {
        self.coeffs.get(&s.0).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, s: SubsetMask) -> bool {
        self.coeffs.contains_key(&s.0)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Entries in increasing mask order.
    pub fn iter(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        self.coeffs.iter().map(|(&s, &c)| (SubsetMask(s), c))
    }

    /// Union of all sets with a nonzero coefficient.
    pub fn variables(&self) -> SubsetMask {
        self.iter().filter(|(_, c)| *c != 0.0).fold(SubsetMask::EMPTY, |acc, (s, _)| acc.union(s))
    }

    /// Largest `|S|` with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.iter().filter(|(_, c)| *c != 0.0).map(|(s, _)| s.len()).max().unwrap_or(0)
    }

    pub fn l1(&self) -> f64 {
        self.coeffs.values().map(|c| c.abs()).sum()
    }

    pub fn l2_squared(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    /// Keeps the sets inside `j` of size at most `d`.
    pub fn truncated(&self, j: SubsetMask, d: usize) -> Spectrum {
        Spectrum {
            n: self.n,
            coeffs: self.iter().filter(|(s, _)| s.is_subset_of(j) && s.len() <= d).map(|(s, c)| (s.0, c)).collect(),
        }
    }

    /// `Σ_S ĉ(S) χ_S` at the point with bit mask `x`.
    pub fn value(&self, x: u64) -> f64 {
        self.coeffs.iter().map(|(&s, &c)| c * parity_bits(s, x)).sum()
    }

    pub fn evaluate(&self, x: &Point) -> f64 {
        assert_eq!(x.dim(), self.n, "point dimension does not match spectrum");
        self.value(x.bits())
    }

    /// The synthesized truth table.
    pub fn to_table(&self) -> Result<Vec<f64>> {
        ensure_enumerable(self.n)?;
        let mut dense = vec![0.0; 1 << self.n];
        for (&s, &c) in &self.coeffs {
            dense[s as usize] = c;
        }
        inverse_transform_table(&mut dense);
        Ok(dense)
    }

    pub fn to_oracle(&self) -> ValueOracle {
        let sp = self.clone();
        ValueOracle::new(self.n, move |x| sp.value(x))
    }

    /// CSV with header `mask,coefficient`, one row per stored entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,coefficient\n");
        for (&s, &c) in &self.coeffs {
            let _ = writeln!(out, "{s},{}", format_float(c));
        }
        out
    }

    pub fn from_csv(n: usize, text: &str) -> Result<Spectrum> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("mask,coefficient") => {}
            other => return Err(Error::Parse(format!("bad spectrum header {other:?}"))),
        }
        let mut sp = Spectrum::new(n);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (m, c) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad spectrum row {line:?}")))?;
            let m: u64 = m.trim().parse().map_err(|_| Error::Parse(format!("bad mask {m:?}")))?;
            let c: f64 = c.trim().parse().map_err(|_| Error::Parse(format!("bad coefficient {c:?}")))?;
            if m & !full_mask(n) != 0 {
                return Err(Error::Parse(format!("mask {m} outside n = {n}")));
            }
            sp.coeffs.insert(m, c);
        }
        Ok(sp)
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Full spectrum of `f` by the fast transform.
pub fn transform(f: &ValueOracle) -> Result<Spectrum> {
    let mut table = f.table()?;
    transform_table(&mut table);
    Ok(Spectrum::from_dense(f.dim(), &table))
}

pub fn spectrum_of_table(n: usize, table: &[f64]) -> Spectrum {
    let mut t = table.to_vec();
    transform_table(&mut t);
    Spectrum::from_dense(n, &t)
}

pub fn inverse_transform(sp: &Spectrum) -> Result<Vec<f64>> {
    sp.to_table()
}

/// `‖f̂‖₁`.
pub fn spectral_l1(sp: &Spectrum) -> f64 {
    sp.l1()
}

/// `Σ_{S ∋ i,j} f̂(S)²`.
pub fn pair_mass(sp: &Spectrum, i: usize, j: usize) -> f64 {
    let pair = SubsetMask::pair(i, j).0;
    sp.iter().filter(|(s, _)| s.0 & pair == pair).map(|(_, c)| c * c).sum()
}

/// `(E[(∂_{i,j} f)²], 16 Σ_{S∋i,j} f̂(S)²)`, the first computed pointwise.
pub fn derivative_spectrum_check(f: &ValueOracle, i: usize, j: usize) -> Result<(f64, f64)> {
    if i == j {
        return Err(Error::SameCoordinate(i));
    }
    let table = f.table()?;
    let (bi, bj) = (1usize << i, 1usize << j);
    let mut total = 0.0;
    for x in 0..table.len() {
        let b = x & !bi & !bj;
        let d = table[b | bi | bj] - table[b | bi] - table[b | bj] + table[b];
        total += d * d;
    }
    let lhs = total / table.len() as f64;
    let sp = spectrum_of_table(f.dim(), &table);
    Ok((lhs, 16.0 * pair_mass(&sp, i, j)))
}

fn uniform_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> u64 {
    rng.gen::<u64>() & full_mask(n)
}

/// Empirical mean of `f(x) χ_S(x)` over `m` seeded uniform points.
pub fn estimate_coefficient(f: &ValueOracle, s: SubsetMask, m: usize, seed: u64) -> f64 {
    assert!(m >= 1, "need at least one sample");
    let mut rng = rng::derived(seed, &[rng::tag("coefficient"), s.0]);
    let total: f64 = (0..m)
        .map(|_| {
            let x = uniform_bits(f.dim(), &mut rng);
            f.value(x) * parity_bits(s.0, x)
        })
        .sum();
    total / m as f64
}

/// Uniform points with real labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub n: usize,
    pub points: Vec<u64>,
    pub labels: Vec<f64>,
}

impl LabeledSample {
    pub fn new(n: usize, points: Vec<u64>, labels: Vec<f64>) -> Self {
        assert_eq!(points.len(), labels.len(), "one label per point");
        LabeledSample { n, points, labels }
    }

    /// `m` seeded uniform examples labeled by `f`.
    pub fn draw(f: &ValueOracle, m: usize, seed: u64) -> Self {
        let mut rng = rng::derived(seed, &[rng::tag("sample"), f.dim() as u64]);
        let points: Vec<u64> = (0..m).map(|_| uniform_bits(f.dim(), &mut rng)).collect();
        let labels = points.iter().map(|&x| f.value(x)).collect();
        LabeledSample { n: f.dim(), points, labels }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points, labels mapped through `op`.
    pub fn map_labels(&self, op: impl Fn(f64) -> f64) -> Self {
        LabeledSample { n: self.n, points: self.points.clone(), labels: self.labels.iter().map(|&y| op(y)).collect() }
    }

    /// Empirical `E[y χ_S(x)]`.
    pub fn coefficient(&self, s: SubsetMask) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = self.points.iter().zip(&self.labels).map(|(&x, &y)| y * parity_bits(s.0, x)).sum();
        total / self.len() as f64
    }
}

/// Where coefficient estimates come from.
pub enum CoefficientSource<'a> {
    /// Exact transform of the oracle (requires `n` within the enumeration cap).
    Exact(&'a ValueOracle),
    Sample(&'a LabeledSample),
    /// Draws `m` seeded uniform examples from the oracle.
    Oracle {
        f: &'a ValueOracle,
        m: usize,
        seed: u64,
    },
}

impl CoefficientSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            CoefficientSource::Exact(f) | CoefficientSource::Oracle { f, .. } => f.dim(),
            CoefficientSource::Sample(s) => s.n,
        }
    }
}

/// Number of sets of size at most `d` inside a `k`-element set.
pub fn candidate_count(k: usize, d: usize) -> u64 {
    (0..=d.min(k)).fold(0u64, |acc, i| acc.saturating_add(binomial(k, i)))
}

/// Every subset of `j` with at most `d` elements, in increasing mask order.
pub fn low_degree_sets(j: SubsetMask, d: usize) -> Vec<SubsetMask> {
    let mut out = Vec::new();
    let mut sub = j.0;
    loop {
        if (sub.count_ones() as usize) <= d {
            out.push(SubsetMask(sub));
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & j.0;
    }
    out.reverse();
    out
}

/// Low-degree algorithm over the variables `j`: estimates every `f̂(S)` with
/// `S ⊆ J`, `|S| ≤ d`.
pub fn low_degree_estimate(source: &CoefficientSource<'_>, j: SubsetMask, d: usize) -> Result<Spectrum> {
    let n = source.dim();
    if j.0 & !full_mask(n) != 0 {
        return Err(Error::InvalidParameter(format!("variable set {j} outside n = {n}")));
    }
    let needed = candidate_count(j.len(), d);
    if needed > DEFAULT_CANDIDATE_BUDGET {
        return Err(Error::BudgetExceeded { needed, limit: DEFAULT_CANDIDATE_BUDGET });
    }
    match source {
        CoefficientSource::Exact(f) => Ok(transform(f)?.truncated(j, d)),
        CoefficientSource::Sample(sample) => estimate_from_sample(sample, j, d),
        CoefficientSource::Oracle { f, m, seed } => estimate_from_sample(&LabeledSample::draw(f, *m, *seed), j, d),
    }
}

fn estimate_from_sample(sample: &LabeledSample, j: SubsetMask, d: usize) -> Result<Spectrum> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let m = sample.len() as f64;
    let mut sp = Spectrum::new(sample.n);
    if j.len() <= HISTOGRAM_MAX_VARS {
        let mut sums = vec![0.0; 1 << j.len()];
        for (&x, &y) in sample.points.iter().zip(&sample.labels) {
            sums[gather(x, j.0) as usize] += y;
        }
        walsh_hadamard(&mut sums);
        for s in low_degree_sets(j, d) {
            sp.insert(s, sums[gather(s.0, j.0) as usize] / m);
        }
    } else {
        for s in low_degree_sets(j, d) {
            sp.insert(s, sample.coefficient(s));
        }
    }
    Ok(sp)
}
