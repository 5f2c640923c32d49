//! Value oracles, restrictions, discrete derivatives, exhaustive property
//! checkers and generators for the standard submodular families.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{ensure_enumerable, full_mask, Point};
use crate::rng;
use crate::{Error, Result, TOL};

type EvalFn = dyn Fn(u64) -> f64 + Send + Sync;

/// Query access to a real function on `{0,1}^n`.
///
/// Cloning shares both the function and the query counter. Oracles derived
/// from another one (restrictions, flips) query their parent, so the
/// parent's counter also sees those evaluations.
#[derive(Clone)]
pub struct ValueOracle {
    dim: usize,
    eval: Arc<EvalFn>,
    queries: Arc<AtomicU64>,
}

impl ValueOracle {
    /// `f` receives the point as its little-endian bit mask.
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        assert!(dim < 64, "oracle dimension {dim} too large");
        ValueOracle { dim, eval: Arc::new(f), queries: Arc::new(AtomicU64::new(0)) }
    }

    pub fn from_table(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim >= 64 || values.len() as u64 != 1u64 << dim {
            return Err(Error::InvalidSpec(format!(
                "truth table for n={dim} needs 2^{dim} values, got {}",
                values.len()
            )));
        }
        let values: Arc<[f64]> = values.into();
        Ok(ValueOracle::new(dim, move |x| values[x as usize]))
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ValueOracle::new(dim, move |_| c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Panics if `x` has the wrong dimension.
    pub fn eval(&self, x: &Point) -> f64 {
        assert_eq!(x.dim(), self.dim, "point dimension does not match oracle");
        self.value(x.bits())
    }

    /// Evaluates at the point whose bit mask is `bits`.
    pub fn value(&self, bits: u64) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        (self.eval)(bits & full_mask(self.dim))
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_query_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    /// All `2^n` values in truth-table order.
    pub fn table(&self) -> Result<Vec<f64>> {
        ensure_enumerable(self.dim)?;
        Ok((0..1u64 << self.dim).map(|x| self.value(x)).collect())
    }

    /// A table-backed copy with a fresh counter.
    pub fn tabulate(&self) -> Result<ValueOracle> {
        ValueOracle::from_table(self.dim, self.table()?)
    }
}

impl fmt::Debug for ValueOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueOracle").field("dim", &self.dim).field("queries", &self.query_count()).finish()
    }
}

/// A partial assignment: `fixed` coordinates carry values, the rest are free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Restriction {
    n: usize,
    fixed_mask: u64,
    fixed_values: u64,
}

impl Restriction {
    /// Nothing fixed.
    pub fn empty(n: usize) -> Self {
        Restriction { n, fixed_mask: 0, fixed_values: 0 }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, bool)]) -> Result<Self> {
        pairs.iter().try_fold(Restriction::empty(n), |r, &(i, b)| r.fix(i, b))
    }

    /// Fixes every coordinate outside `keep_free` to the matching bit of `values`.
    pub fn fix_outside(n: usize, keep_free: u64, values: u64) -> Self {
        let fixed_mask = full_mask(n) & !keep_free;
        Restriction { n, fixed_mask, fixed_values: values & fixed_mask }
    }

    pub fn fix(self, i: usize, b: bool) -> Result<Self> {
        if i >= self.n {
            return Err(Error::InvalidParameter(format!("coordinate {} outside [1, {}]", i + 1, self.n)));
        }
        let bit = 1u64 << i;
        Ok(Restriction {
            n: self.n,
            fixed_mask: self.fixed_mask | bit,
            fixed_values: if b { self.fixed_values | bit } else { self.fixed_values & !bit },
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn fixed_mask(&self) -> u64 {
        self.fixed_mask
    }

    pub fn fixed_values(&self) -> u64 {
        self.fixed_values
    }

    pub fn free_mask(&self) -> u64 {
        full_mask(self.n) & !self.fixed_mask
    }

    /// `X[v]` in increasing order.
    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.n).filter(|i| self.free_mask() >> i & 1 == 1).collect()
    }

    pub fn free_count(&self) -> usize {
        self.free_mask().count_ones() as usize
    }

    /// The ambient point whose free coordinates carry `local` (in order).
    pub fn embed(&self, local: u64) -> u64 {
        scatter(local, self.free_mask()) | self.fixed_values
    }

    /// Free coordinates of an ambient point, packed in order.
    pub fn project(&self, global: u64) -> u64 {
        gather(global, self.free_mask())
    }
}

/// Deposits the low bits of `src` into the set positions of `mask`.
pub(crate) fn scatter(src: u64, mask: u64) -> u64 {
    let mut out = 0;
    let mut m = mask;
    let mut k = 0;
    while m != 0 {
        let pos = m.trailing_zeros();
        if src >> k & 1 == 1 {
            out |= 1 << pos;
        }
        m &= m - 1;
        k += 1;
    }
    out
}

/// Packs the bits of `src` at the set positions of `mask` into the low bits.
pub(crate) fn gather(src: u64, mask: u64) -> u64 {
    let mut out = 0;
    let mut m = mask;
    let mut k = 0;
    while m != 0 {
        let pos = m.trailing_zeros();
        if src >> pos & 1 == 1 {
            out |= 1 << k;
        }
        m &= m - 1;
        k += 1;
    }
    out
}

/// `f` restricted to the subcube of `r`, as a function of the free coordinates.
pub fn restrict(f: &ValueOracle, r: &Restriction) -> Result<ValueOracle> {
    if r.ambient_dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), actual: r.ambient_dim() });
    }
    if r.fixed_mask == 0 {
        return Ok(f.clone());
    }
    let parent = f.clone();
    let r = *r;
    Ok(ValueOracle::new(r.free_count(), move |local| parent.value(r.embed(local))))
}

/// `x ↦ f(¬x)`.
pub fn flip_oracle(f: &ValueOracle) -> ValueOracle {
    let parent = f.clone();
    let mask = full_mask(f.dim());
    ValueOracle::new(f.dim(), move |x| parent.value(!x & mask))
}

/// `∂_i f(x) = f(x_{i←1}) − f(x_{i←0})`.
pub fn derivative(f: &ValueOracle, i: usize, x: &Point) -> f64 {
    assert!(i < f.dim(), "coordinate out of range");
    let b = x.bits() & !(1 << i);
    f.value(b | 1 << i) - f.value(b)
}

/// `∂_{i,j} f(x)`.
pub fn second_derivative(f: &ValueOracle, i: usize, j: usize, x: &Point) -> Result<f64> {
    if i == j {
        return Err(Error::SameCoordinate(i));
    }
    let b = x.bits() & !(1 << i) & !(1 << j);
    let (bi, bj) = (1u64 << i, 1u64 << j);
    Ok(f.value(b | bi | bj) - f.value(b | bi) - f.value(b | bj) + f.value(b))
}

/// Outcome of an exhaustive check; a failure carries a witness.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate<W> {
    Holds,
    Violated(W),
}

impl<W> Certificate<W> {
    pub fn holds(&self) -> bool {
        matches!(self, Certificate::Holds)
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Certificate::Holds => None,
            Certificate::Violated(w) => Some(w),
        }
    }
}

/// `∂_{i,j} f(x) > tol` at a point with `x_i = x_j = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairViolation {
    pub i: usize,
    pub j: usize,
    pub x: Point,
    pub value: f64,
}

/// A first derivative outside the allowed band, at a point with `x_i = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeViolation {
    pub i: usize,
    pub x: Point,
    pub value: f64,
}

pub fn check_submodular_table(n: usize, table: &[f64]) -> Certificate<PairViolation> {
    for i in 0..n {
        for j in i + 1..n {
            let (bi, bj) = (1usize << i, 1usize << j);
            for x in 0..table.len() {
                if x & (bi | bj) != 0 {
                    continue;
                }
                let d = table[x | bi | bj] - table[x | bi] - table[x | bj] + table[x];
                if d > TOL {
                    return Certificate::Violated(PairViolation { i, j, x: Point::new(n, x as u64), value: d });
                }
            }
        }
    }
    Certificate::Holds
}

/// All `∂_{i,j} f ≤ tol`.
pub fn is_submodular(f: &ValueOracle) -> Result<Certificate<PairViolation>> {
    Ok(check_submodular_table(f.dim(), &f.table()?))
}

fn first_violation(n: usize, table: &[f64], bad: impl Fn(f64) -> bool) -> Option<DerivativeViolation> {
    for i in 0..n {
        let bi = 1usize << i;
        for x in (0..table.len()).filter(|x| x & bi == 0) {
            let d = table[x | bi] - table[x];
            if bad(d) {
                return Some(DerivativeViolation { i, x: Point::new(n, x as u64), value: d });
            }
        }
    }
    None
}

pub fn check_alpha_monotone_table(n: usize, table: &[f64], alpha: f64) -> Certificate<DerivativeViolation> {
    match first_violation(n, table, |d| d > alpha + TOL) {
        None => Certificate::Holds,
        Some(v) => Certificate::Violated(v),
    }
}

/// All `∂_i f ≤ α` (ties accepted within [`TOL`]).
pub fn is_alpha_monotone_decreasing(f: &ValueOracle, alpha: f64) -> Result<Certificate<DerivativeViolation>> {
    Ok(check_alpha_monotone_table(f.dim(), &f.table()?, alpha))
}

/// Monotone nondecreasing: all `∂_i f ≥ −tol`.
pub fn check_monotone_table(n: usize, table: &[f64]) -> Certificate<DerivativeViolation> {
    match first_violation(n, table, |d| d < -TOL) {
        None => Certificate::Holds,
        Some(v) => Certificate::Violated(v),
    }
}

pub fn is_monotone(f: &ValueOracle) -> Result<Certificate<DerivativeViolation>> {
    Ok(check_monotone_table(f.dim(), &f.table()?))
}

pub fn lipschitz_constant_table(n: usize, table: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..n {
        let bi = 1usize << i;
        for x in (0..table.len()).filter(|x| x & bi == 0) {
            best = best.max((table[x | bi] - table[x]).abs());
        }
    }
    best
}

/// `max_{i,x} |∂_i f(x)|`.
pub fn lipschitz_constant(f: &ValueOracle) -> Result<f64> {
    Ok(lipschitz_constant_table(f.dim(), &f.table()?))
}

/// Uniform mean and variance of a truth table.
pub fn mean_variance(table: &[f64]) -> (f64, f64) {
    let len = table.len() as f64;
    let mean = table.iter().sum::<f64>() / len;
    let var = table.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
    (mean, var)
}

/// The family tags understood by [`FamilySpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Coverage,
    Cut,
    BudgetAdditive,
    MatroidRankPartition,
    ConcaveProfile,
    TruthTable,
}

impl FamilyKind {
    /// The families the random generators support.
    pub const GENERATED: [FamilyKind; 5] = [
        FamilyKind::Coverage,
        FamilyKind::Cut,
        FamilyKind::BudgetAdditive,
        FamilyKind::MatroidRankPartition,
        FamilyKind::ConcaveProfile,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Coverage => "coverage",
            FamilyKind::Cut => "cut",
            FamilyKind::BudgetAdditive => "budget_additive",
            FamilyKind::MatroidRankPartition => "matroid_rank_partition",
            FamilyKind::ConcaveProfile => "concave_profile",
            FamilyKind::TruthTable => "truth_table",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [FamilyKind::TruthTable].into_iter().chain(FamilyKind::GENERATED);
        all.into_iter()
            .find(|k| k.name() == s.trim().replace('-', "_"))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown family {s:?}")))
    }
}

/// A concrete family instance. Coordinates, vertices and universe elements
/// are 1-based in this format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `|∪_{i: x_i=1} A_i| / |U|`; `sets[i]` is `A_{i+1} ⊆ {1..universe}`.
    Coverage { n: usize, universe: usize, sets: Vec<Vec<usize>> },
    /// Fraction of edges crossing the cut `{i: x_i = 1}`.
    Cut { n: usize, edges: Vec<[usize; 2]> },
    /// `min(w·x, b) / b`.
    BudgetAdditive { n: usize, weights: Vec<f64>, budget: f64 },
    /// Partition-matroid rank `Σ_B min(|x ∩ B|, cap_B)` over total cap.
    MatroidRankPartition { n: usize, blocks: Vec<Vec<usize>>, caps: Vec<usize> },
    /// `p(w(x))` for a concave profile `p(0..=n)`.
    ConcaveProfile { n: usize, profile: Vec<f64> },
    /// Explicit values, index = little-endian integer of `x`.
    TruthTable { n: usize, values: Vec<f64> },
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn check_coord(i: usize, n: usize, what: &str) -> Result<usize> {
    if i == 0 || i > n {
        Err(invalid(format!("{what} {i} outside 1..={n}")))
    } else {
        Ok(i - 1)
    }
}

impl FamilySpec {
    pub fn kind(&self) -> FamilyKind {
        match self {
            FamilySpec::Coverage { .. } => FamilyKind::Coverage,
            FamilySpec::Cut { .. } => FamilyKind::Cut,
            FamilySpec::BudgetAdditive { .. } => FamilyKind::BudgetAdditive,
            FamilySpec::MatroidRankPartition { .. } => FamilyKind::MatroidRankPartition,
            FamilySpec::ConcaveProfile { .. } => FamilyKind::ConcaveProfile,
            FamilySpec::TruthTable { .. } => FamilyKind::TruthTable,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilySpec::Coverage { n, .. }
            | FamilySpec::Cut { n, .. }
            | FamilySpec::BudgetAdditive { n, .. }
            | FamilySpec::MatroidRankPartition { n, .. }
            | FamilySpec::ConcaveProfile { n, .. }
            | FamilySpec::TruthTable { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n >= 64 {
            return Err(invalid(format!("n = {n} is too large")));
        }
        match self {
            FamilySpec::Coverage { universe, sets, .. } => {
                if *universe == 0 {
                    return Err(invalid("coverage universe is empty"));
                }
                if sets.len() != n {
                    return Err(invalid(format!("coverage needs {n} sets, got {}", sets.len())));
                }
                for e in sets.iter().flatten() {
                    check_coord(*e, *universe, "coverage element")?;
                }
            }
            FamilySpec::Cut { edges, .. } => {
                if edges.is_empty() {
                    return Err(invalid("cut needs at least one edge"));
                }
                for [u, v] in edges {
                    check_coord(*u, n, "cut vertex")?;
                    check_coord(*v, n, "cut vertex")?;
                    if u == v {
                        return Err(invalid(format!("self-loop at vertex {u}")));
                    }
                }
            }
            FamilySpec::BudgetAdditive { weights, budget, .. } => {
                if weights.len() != n {
                    return Err(invalid(format!("budget_additive needs {n} weights, got {}", weights.len())));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(invalid("weights must be finite and nonnegative"));
                }
                if !budget.is_finite() || *budget <= 0.0 {
                    return Err(invalid("budget must be positive"));
                }
            }
            FamilySpec::MatroidRankPartition { blocks, caps, .. } => {
                if blocks.len() != caps.len() {
                    return Err(invalid("one cap per block required"));
                }
                let mut seen = BTreeSet::new();
                for (block, &cap) in blocks.iter().zip(caps) {
                    for &i in block {
                        check_coord(i, n, "matroid element")?;
                        if !seen.insert(i) {
                            return Err(invalid(format!("element {i} appears in two blocks")));
                        }
                    }
                    if cap == 0 || cap > block.len() {
                        return Err(invalid(format!("cap {cap} outside 1..={}", block.len())));
                    }
                }
                if caps.iter().sum::<usize>() == 0 {
                    return Err(invalid("matroid has rank 0"));
                }
            }
            FamilySpec::ConcaveProfile { profile, .. } => {
                if profile.len() != n + 1 {
                    return Err(invalid(format!("profile needs {} values, got {}", n + 1, profile.len())));
                }
                if profile.iter().any(|p| !(-TOL..=1.0 + TOL).contains(p)) {
                    return Err(invalid("profile values must lie in [0,1]"));
                }
                for w in profile.windows(3) {
                    if w[1] - w[0] < w[2] - w[1] - TOL {
                        return Err(invalid(format!("profile is not concave at {:?}", w)));
                    }
                }
            }
            FamilySpec::TruthTable { values, .. } => {
                if values.len() as u64 != 1u64 << n {
                    return Err(invalid(format!("truth table needs {} values, got {}", 1u64 << n, values.len())));
                }
                if values.iter().any(|v| !(-TOL..=1.0 + TOL).contains(v)) {
                    return Err(invalid("truth table values must lie in [0,1]"));
                }
            }
        }
        Ok(())
    }

    /// Builds the normalized oracle (range `[0,1]`).
    pub fn instantiate(&self) -> Result<ValueOracle> {
        self.validate()?;
        let n = self.dim();
        let oracle = match self.clone() {
            FamilySpec::Coverage { universe, sets, .. } => {
                let words = universe.div_ceil(64);
                let masks: Vec<Vec<u64>> = sets
                    .iter()
                    .map(|set| {
                        let mut m = vec![0u64; words];
                        for &e in set {
                            m[(e - 1) / 64] |= 1 << ((e - 1) % 64);
                        }
                        m
                    })
                    .collect();
                let denom = universe as f64;
                ValueOracle::new(n, move |x| {
                    let mut cover = vec![0u64; words];
                    for (i, m) in masks.iter().enumerate() {
                        if x >> i & 1 == 1 {
                            cover.iter_mut().zip(m).for_each(|(c, w)| *c |= w);
                        }
                    }
                    cover.iter().map(|w| w.count_ones()).sum::<u32>() as f64 / denom
                })
            }
            FamilySpec::Cut { edges, .. } => {
                let edges: Vec<(usize, usize)> = edges.iter().map(|[u, v]| (u - 1, v - 1)).collect();
                let denom = edges.len() as f64;
                ValueOracle::new(n, move |x| {
                    edges.iter().filter(|(u, v)| (x >> u ^ x >> v) & 1 == 1).count() as f64 / denom
                })
            }
            FamilySpec::BudgetAdditive { weights, budget, .. } => ValueOracle::new(n, move |x| {
                let total: f64 = weights.iter().enumerate().filter(|(i, _)| x >> i & 1 == 1).map(|(_, w)| w).sum();
                total.min(budget) / budget
            }),
            FamilySpec::MatroidRankPartition { blocks, caps, .. } => {
                let masks: Vec<u64> = blocks.iter().map(|b| b.iter().fold(0, |m, i| m | 1 << (i - 1))).collect();
                let denom = caps.iter().sum::<usize>() as f64;
                ValueOracle::new(n, move |x| {
                    masks.iter().zip(&caps).map(|(m, &c)| ((x & m).count_ones() as usize).min(c)).sum::<usize>() as f64
                        / denom
                })
            }
            FamilySpec::ConcaveProfile { profile, .. } => {
                ValueOracle::new(n, move |x| profile[x.count_ones() as usize])
            }
            FamilySpec::TruthTable { values, .. } => ValueOracle::from_table(n, values)?,
        };
        Ok(oracle)
    }
}

/// Deterministic random instance of a submodular family with range `[0,1]`.
pub fn generate_random(kind: FamilyKind, n: usize, seed: u64) -> Result<FamilySpec> {
    if n == 0 || n >= 64 {
        return Err(Error::InvalidParameter(format!("cannot generate an instance with n = {n}")));
    }
    let mut rng = rng::derived(seed, &[rng::tag(kind.name()), n as u64]);
    let spec = match kind {
        FamilyKind::Coverage => {
            let universe = rng.gen_range(2..=2 * n.max(1));
            let p = rng.gen_range(0.15..0.5);
            let sets = (0..n).map(|_| (1..=universe).filter(|_| rng.gen_bool(p)).collect()).collect();
            FamilySpec::Coverage { n, universe, sets }
        }
        FamilyKind::Cut => {
            if n < 2 {
                return Err(Error::InvalidParameter("a cut needs at least two vertices".into()));
            }
            let mut edges: Vec<[usize; 2]> = Vec::new();
            for u in 1..=n {
                for v in u + 1..=n {
                    if rng.gen_bool(0.35) {
                        edges.push([u, v]);
                    }
                }
            }
            if edges.is_empty() {
                let u = rng.gen_range(1..n);
                edges.push([u, u + 1]);
            }
            FamilySpec::Cut { n, edges }
        }
        FamilyKind::BudgetAdditive => {
            let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            let budget = if total > 0.0 { total * rng.gen_range(0.25..=1.0) } else { 1.0 };
            FamilySpec::BudgetAdditive { n, weights, budget }
        }
        FamilyKind::MatroidRankPartition => {
            let nblocks = rng.gen_range(1..=n);
            let mut blocks = vec![Vec::new(); nblocks];
            for i in 1..=n {
                blocks[rng.gen_range(0..nblocks)].push(i);
            }
            blocks.retain(|b| !b.is_empty());
            let caps = blocks.iter().map(|b| rng.gen_range(1..=b.len())).collect();
            FamilySpec::MatroidRankPartition { n, blocks, caps }
        }
        FamilyKind::ConcaveProfile => {
            // cumulative sums of a nonincreasing positive sequence
            let mut inc: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..=1.0)).collect();
            inc.sort_by(|a, b| b.total_cmp(a));
            let top: f64 = inc.iter().sum();
            let scale = rng.gen_range(0.3..=1.0) / top;
            let mut profile = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            profile.push(0.0);
            for d in inc {
                acc += d;
                profile.push((acc * scale).min(1.0));
            }
            FamilySpec::ConcaveProfile { n, profile }
        }
        FamilyKind::TruthTable => {
            return Err(Error::InvalidParameter("truth_table instances are not generated".into()))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Random instance whose values all lie in `{0, 1/k, …, 1}`.
pub fn generate_discrete(kind: FamilyKind, n: usize, k: usize, seed: u64) -> Result<FamilySpec> {
    if n == 0 || n >= 64 || k == 0 {
        return Err(Error::InvalidParameter(format!("bad discrete instance shape n={n}, k={k}")));
    }
    let mut rng = rng::derived(seed, &[rng::tag(kind.name()), n as u64, k as u64, rng::tag("discrete")]);
    let spec = match kind {
        FamilyKind::Coverage => {
            let sets = (0..n).map(|_| (1..=k).filter(|_| rng.gen_bool(0.4)).collect()).collect();
            FamilySpec::Coverage { n, universe: k, sets }
        }
        FamilyKind::Cut => {
            let mut pairs: Vec<[usize; 2]> = (1..=n).flat_map(|u| (u + 1..=n).map(move |v| [u, v])).collect();
            if pairs.len() < k {
                return Err(Error::InvalidParameter(format!("n = {n} has fewer than {k} vertex pairs")));
            }
            pairs.shuffle(&mut rng);
            pairs.truncate(k);
            pairs.sort();
            FamilySpec::Cut { n, edges: pairs }
        }
        FamilyKind::BudgetAdditive => {
            let weights = (0..n).map(|_| rng.gen_range(0..=k) as f64).collect();
            FamilySpec::BudgetAdditive { n, weights, budget: k as f64 }
        }
        FamilyKind::MatroidRankPartition => {
            if n < k {
                return Err(Error::InvalidParameter(format!("a rank-{k} partition matroid needs n ≥ {k}")));
            }
            let nblocks = rng.gen_range(1..=k.min(n));
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(&mut rng);
            let mut blocks = vec![Vec::new(); nblocks];
            for (pos, &i) in order.iter().enumerate() {
                let b = if pos < nblocks { pos } else { rng.gen_range(0..nblocks) };
                blocks[b].push(i);
            }
            blocks.iter_mut().for_each(|b| b.sort());
            let mut caps = vec![1usize; nblocks];
            let mut left = k - nblocks;
            while left > 0 {
                let b = rng.gen_range(0..nblocks);
                if caps[b] < blocks[b].len() {
                    caps[b] += 1;
                    left -= 1;
                }
            }
            FamilySpec::MatroidRankPartition { n, blocks, caps }
        }
        FamilyKind::ConcaveProfile => {
            // minimum of affine pieces is concave; integer values capped at k
            let a = rng.gen_range(1..=k) as i64;
            let b = rng.gen_range(0..=k) as i64;
            let c = rng.gen_range(0..=k) as i64;
            let profile =
                (0..=n as i64).map(|i| (a * i).min(b * (n as i64 - i) + c).min(k as i64) as f64 / k as f64).collect();
            FamilySpec::ConcaveProfile { n, profile }
        }
        FamilyKind::TruthTable => {
            return Err(Error::InvalidParameter("truth_table instances are not generated".into()))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// One generated instance with a stable identifier.
#[derive(Clone, Debug)]
pub struct CorpusInstance {
    pub id: String,
    pub spec: FamilySpec,
}

/// Every generated family at every `n` for seeds `0..seeds`, in id order.
pub fn corpus(ns: impl IntoIterator<Item = usize>, seeds: u64) -> Vec<CorpusInstance> {
    let ns: Vec<usize> = ns.into_iter().collect();
    let mut out = Vec::new();
    for kind in FamilyKind::GENERATED {
        for &n in &ns {
            for seed in 0..seeds {
                if let Ok(spec) = generate_random(kind, n, seed) {
                    out.push(CorpusInstance { id: format!("{kind}-n{n:02}-s{seed:03}"), spec });
                }
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

/// Discrete-range corpus with values in `{0, 1/k, …, 1}`.
pub fn discrete_corpus(ns: impl IntoIterator<Item = usize>, k: usize, seeds: u64) -> Vec<CorpusInstance> {
    let ns: Vec<usize> = ns.into_iter().collect();
    let mut out = Vec::new();
    for kind in FamilyKind::GENERATED {
        for &n in &ns {
            for seed in 0..seeds {
                if let Ok(spec) = generate_discrete(kind, n, k, seed) {
                    out.push(CorpusInstance { id: format!("{kind}-k{k}-n{n:02}-s{seed:03}"), spec });
                }
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::all_points;

    fn p(s: &str) -> Point {
        s.parse().unwrap()
    }

    fn or2() -> ValueOracle {
        ValueOracle::from_table(2, vec![0.0, 1.0, 1.0, 1.0]).unwrap()
    }

    fn and2() -> ValueOracle {
        ValueOracle::from_table(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn edge_cut() -> ValueOracle {
        FamilySpec::Cut { n: 2, edges: vec![[1, 2]] }.instantiate().unwrap()
    }

    #[test]
    fn instantiate_examples() {
        let cov = FamilySpec::Coverage { n: 2, universe: 2, sets: vec![vec![1], vec![1, 2]] }.instantiate().unwrap();
        assert_eq!(cov.eval(&p("10")), 0.5);
        assert_eq!(cov.eval(&p("01")), 1.0);
        assert_eq!(cov.eval(&p("11")), 1.0);

        let cut = edge_cut();
        assert_eq!(cut.table().unwrap(), vec![0.0, 1.0, 1.0, 0.0]);

        let xor = FamilySpec::ConcaveProfile { n: 2, profile: vec![0.0, 1.0, 0.0] }.instantiate().unwrap();
        assert_eq!(xor.table().unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn instantiate_rejects_invalid_specs() {
        let bad = [
            FamilySpec::Coverage { n: 1, universe: 0, sets: vec![vec![]] },
            FamilySpec::Cut { n: 2, edges: vec![] },
            FamilySpec::Cut { n: 2, edges: vec![[1, 1]] },
            FamilySpec::BudgetAdditive { n: 1, weights: vec![1.0], budget: 0.0 },
            FamilySpec::MatroidRankPartition { n: 2, blocks: vec![vec![1], vec![1]], caps: vec![1, 1] },
            FamilySpec::ConcaveProfile { n: 2, profile: vec![0.0, 0.0, 1.0] },
            FamilySpec::TruthTable { n: 2, values: vec![0.0; 3] },
        ];
        for spec in bad {
            assert!(matches!(spec.instantiate(), Err(Error::InvalidSpec(_))), "{spec:?}");
        }
    }

    #[test]
    fn family_spec_json_shape() {
        let spec = FamilySpec::Cut { n: 2, edges: vec![[1, 2]] };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"cut","n":2,"edges":[[1,2]]}"#);
        let back: FamilySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let tt: FamilySpec = serde_json::from_str(r#"{"family":"truth_table","n":1,"values":[0,1]}"#).unwrap();
        assert_eq!(tt.instantiate().unwrap().table().unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn derivative_examples() {
        let or = or2();
        assert_eq!(derivative(&or, 0, &p("00")), 1.0);
        assert_eq!(derivative(&or, 0, &p("01")), 0.0);
        let c = ValueOracle::constant(3, 0.4);
        for x in all_points(3) {
            for i in 0..3 {
                assert_eq!(derivative(&c, i, &x), 0.0);
            }
        }
    }

    #[test]
    fn second_derivative_examples() {
        assert_eq!(second_derivative(&and2(), 0, 1, &p("00")).unwrap(), 1.0);
        assert_eq!(second_derivative(&edge_cut(), 0, 1, &p("00")).unwrap(), -2.0);
        let lin = ValueOracle::new(3, |x| 0.2 * (x & 1) as f64 + 0.5 * (x >> 1 & 1) as f64 + 0.3 * (x >> 2 & 1) as f64);
        for x in all_points(3) {
            assert!(second_derivative(&lin, 0, 2, &x).unwrap().abs() < 1e-15);
        }
        assert!(matches!(second_derivative(&lin, 1, 1, &p("000")), Err(Error::SameCoordinate(1))));
    }

    #[test]
    fn submodularity_checker() {
        assert!(is_submodular(&edge_cut()).unwrap().holds());
        let cert = is_submodular(&and2()).unwrap();
        let w = cert.witness().unwrap();
        assert_eq!((w.i, w.j, w.x), (0, 1, p("00")));
        assert_eq!(w.value, 1.0);
        for seed in 0..10 {
            let spec = generate_random(FamilyKind::ConcaveProfile, 7, seed).unwrap();
            assert!(is_submodular(&spec.instantiate().unwrap()).unwrap().holds());
        }
        let big = ValueOracle::constant(40, 0.0);
        assert!(matches!(is_submodular(&big), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn alpha_monotone_checker() {
        assert!(is_alpha_monotone_decreasing(&or2(), 1.0).unwrap().holds());
        let cert = is_alpha_monotone_decreasing(&or2(), 0.6).unwrap();
        let w = cert.witness().unwrap();
        assert_eq!((w.i, w.x), (0, p("00")));
        assert!(is_alpha_monotone_decreasing(&ValueOracle::constant(3, 0.2), 0.0).unwrap().holds());
    }

    #[test]
    fn lipschitz_examples() {
        for n in 1..6 {
            let f = ValueOracle::new(n, move |x| x.count_ones() as f64 / n as f64);
            assert!((lipschitz_constant(&f).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        }
        assert_eq!(lipschitz_constant(&ValueOracle::constant(4, 0.3)).unwrap(), 0.0);
        assert_eq!(lipschitz_constant(&edge_cut()).unwrap(), 1.0);
    }

    #[test]
    fn restrict_examples() {
        let or = or2();
        let r1 = restrict(&or, &Restriction::from_pairs(2, &[(0, true)]).unwrap()).unwrap();
        assert_eq!(r1.dim(), 1);
        assert_eq!(r1.table().unwrap(), vec![1.0, 1.0]);
        let r0 = restrict(&or, &Restriction::from_pairs(2, &[(0, false)]).unwrap()).unwrap();
        assert_eq!(r0.table().unwrap(), vec![0.0, 1.0]);
        let same = restrict(&or, &Restriction::empty(2)).unwrap();
        assert_eq!(same.table().unwrap(), or.table().unwrap());
        assert!(Restriction::empty(2).fix(2, true).is_err());
    }

    #[test]
    fn restriction_embed_project_roundtrip() {
        let r = Restriction::from_pairs(6, &[(1, true), (4, false)]).unwrap();
        assert_eq!(r.free_coords(), vec![0, 2, 3, 5]);
        for local in 0..16u64 {
            let g = r.embed(local);
            assert_eq!(g & 0b10010, 0b00010);
            assert_eq!(r.project(g), local);
        }
    }

    #[test]
    fn flip_examples() {
        let f = flip_oracle(&or2());
        assert_eq!(f.table().unwrap(), vec![1.0, 1.0, 1.0, 0.0]);
        let c = flip_oracle(&ValueOracle::constant(3, 0.7));
        assert!(c.table().unwrap().iter().all(|v| *v == 0.7));
        let spec = generate_random(FamilyKind::Coverage, 5, 3).unwrap();
        let g = spec.instantiate().unwrap();
        assert_eq!(flip_oracle(&flip_oracle(&g)).table().unwrap(), g.table().unwrap());
    }

    #[test]
    fn query_counter_counts_through_derived_oracles() {
        let f = or2();
        let r = restrict(&f, &Restriction::from_pairs(2, &[(1, false)]).unwrap()).unwrap();
        let _ = r.table().unwrap();
        assert_eq!(r.query_count(), 2);
        assert_eq!(f.query_count(), 2);
        f.reset_query_count();
        assert_eq!(f.query_count(), 0);
    }

    #[test]
    fn generator_examples() {
        let cov = generate_random(FamilyKind::Coverage, 4, 1).unwrap();
        assert!(is_submodular(&cov.instantiate().unwrap()).unwrap().holds());
        match generate_random(FamilyKind::ConcaveProfile, 6, 7).unwrap() {
            FamilySpec::ConcaveProfile { profile, .. } => {
                assert_eq!(profile.len(), 7);
                assert!(profile.iter().all(|p| (0.0..=1.0).contains(p)));
            }
            other => panic!("unexpected {other:?}"),
        }
        for seed in 0..5 {
            match generate_random(FamilyKind::Cut, 2, seed).unwrap() {
                FamilySpec::Cut { edges, .. } => assert_eq!(edges, vec![[1, 2]]),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(generate_random(FamilyKind::Cut, 6, 9).unwrap(), generate_random(FamilyKind::Cut, 6, 9).unwrap());
        assert!(generate_random(FamilyKind::TruthTable, 3, 0).is_err());
        assert_eq!("budget-additive".parse::<FamilyKind>().unwrap(), FamilyKind::BudgetAdditive);
    }

    #[test]
    fn generated_instances_are_submodular_with_unit_range() {
        for kind in FamilyKind::GENERATED {
            for n in [2usize, 5, 10] {
                for seed in 0..50 {
                    let f = generate_random(kind, n, seed).unwrap().instantiate().unwrap();
                    let t = f.table().unwrap();
                    assert!(check_submodular_table(n, &t).holds(), "{kind} n={n} seed={seed}");
                    assert!(t.iter().all(|v| (-TOL..=1.0 + TOL).contains(v)));
                }
            }
        }
    }

    #[test]
    fn discrete_instances_live_on_the_grid() {
        for k in 1..=3usize {
            for kind in FamilyKind::GENERATED {
                for seed in 0..10 {
                    let Ok(spec) = generate_discrete(kind, 6, k, seed) else { continue };
                    let t = spec.instantiate().unwrap().table().unwrap();
                    assert!(check_submodular_table(6, &t).holds());
                    for v in t {
                        let scaled = v * k as f64;
                        assert!((scaled - scaled.round()).abs() < 1e-9 && (0.0..=1.0 + TOL).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn restriction_and_flip_preserve_submodularity() {
        for kind in FamilyKind::GENERATED {
            for seed in 0..10 {
                let f = generate_random(kind, 8, seed).unwrap().instantiate().unwrap();
                assert!(is_submodular(&flip_oracle(&f)).unwrap().holds());
                let r =
                    Restriction::from_pairs(8, &[(seed as usize % 8, seed % 2 == 0), (7 - seed as usize % 4, true)])
                        .unwrap();
                assert!(is_submodular(&restrict(&f, &r).unwrap()).unwrap().holds());
            }
        }
    }

    #[test]
    fn submodular_derivatives_decrease_along_the_order() {
        for kind in FamilyKind::GENERATED {
            for seed in 0..4 {
                let n = 6;
                let t = generate_random(kind, n, seed).unwrap().instantiate().unwrap().table().unwrap();
                for i in 0..n {
                    let bi = 1usize << i;
                    for x in (0..t.len()).filter(|x| x & bi == 0) {
                        // supersets y ⊇ x that also avoid i
                        let free = !x & !bi & ((1 << n) - 1);
                        let mut sub = free;
                        loop {
                            let y = x | sub;
                            assert!(t[x | bi] - t[x] >= t[y | bi] - t[y] - TOL);
                            if sub == 0 {
                                break;
                            }
                            sub = (sub - 1) & free;
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn variance_is_bounded_by_lipschitz_times_mean() {
        for kind in FamilyKind::GENERATED {
            for n in [3usize, 6, 10] {
                for seed in 0..20 {
                    let t = generate_random(kind, n, seed).unwrap().instantiate().unwrap().table().unwrap();
                    let (mean, var) = mean_variance(&t);
                    let lip = lipschitz_constant_table(n, &t);
                    assert!(var <= 2.0 * lip * mean + TOL, "{kind} n={n} seed={seed}");
                }
            }
        }
    }
}
