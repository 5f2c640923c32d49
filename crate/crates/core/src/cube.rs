//! Points of `{0,1}^n`, coordinate subsets, product distributions and the
//! lexicographic ranking of fixed-weight bit strings.
//!
//! Points are stored as the little-endian integer `Σ x_i 2^i`, so coordinate
//! `i` is bit `i` and truth tables are indexed by `Point::bits`. The textual
//! form lists `x_1` first: the point with only coordinate 0 set prints as
//! `"1000"` when `n = 4`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest dimension a `Point` can carry.
pub const MAX_DIM: usize = 64;

/// Default cap on dimensions that may be enumerated exhaustively.
pub const DEFAULT_ENUM_CAP: usize = 24;

/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_ENV: &str = "SUBMODTREE_ENUM_CAP";

/// Current enumeration cap, honouring the environment override.
pub fn enumeration_cap() -> usize {
    std::env::var(ENUM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|c| c.min(MAX_DIM - 1))
        .unwrap_or(DEFAULT_ENUM_CAP)
}

/// Fails with `DimensionTooLarge` unless `n` may be enumerated.
pub fn ensure_enumerable(n: usize) -> Result<()> {
    let cap = enumeration_cap();
    if n > cap {
        Err(Error::DimensionTooLarge { n, cap })
    } else {
        Ok(())
    }
}

/// Mask with the low `n` bits set.
pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    bits: u64,
    dim: usize,
}

impl Point {
    /// Bits above `dim` are discarded.
    pub fn new(dim: usize, bits: u64) -> Self {
        assert!(dim <= MAX_DIM, "point dimension {dim} exceeds {MAX_DIM}");
        Point { bits: bits & full_mask(dim), dim }
    }

    pub fn zeros(dim: usize) -> Self {
        Point::new(dim, 0)
    }

    pub fn ones(dim: usize) -> Self {
        Point::new(dim, u64::MAX)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut p = Point::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            p = p.with(i, b);
        }
        p
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.dim);
        self.bits >> i & 1 == 1
    }

    /// `x_{i←b}`.
    pub fn with(&self, i: usize, b: bool) -> Self {
        debug_assert!(i < self.dim);
        let bits = if b { self.bits | 1 << i } else { self.bits & !(1 << i) };
        Point { bits, dim: self.dim }
    }

    /// Number of ones.
    pub fn hamming_weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Coordinatewise `self ≤ other`.
    pub fn le(&self, other: &Point) -> bool {
        self.bits & !other.bits == 0
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Point::new(dim, rng.gen::<u64>())
    }
}

/// Iterator over all `2^n` points in truth-table order.
pub fn all_points(n: usize) -> impl Iterator<Item = Point> {
    (0..=full_mask(n)).map(move |b| Point::new(n, b))
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({self})")
    }
}

impl FromStr for Point {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() > MAX_DIM {
            return Err(Error::Parse(format!("bit string longer than {MAX_DIM}")));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Point::from_bits(&bits))
    }
}

/// A subset `S ⊆ [n]` as a bit mask (coordinate `i` is bit `i`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(pub u64);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        SubsetMask(indices.into_iter().fold(0, |m, i| m | 1 << i))
    }

    pub fn full(n: usize) -> Self {
        SubsetMask(full_mask(n))
    }

    pub fn singleton(i: usize) -> Self {
        SubsetMask(1 << i)
    }

    pub fn pair(i: usize, j: usize) -> Self {
        SubsetMask(1 << i | 1 << j)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn is_subset_of(&self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(&self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    /// Members in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Largest member plus one, 0 for the empty set.
    pub fn span(&self) -> usize {
        64 - self.0.leading_zeros() as usize
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for SubsetMask {
    type Err = Error;

    /// Parses `"{2,3}"` (1-based); braces are optional.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}').trim();
        if inner.is_empty() {
            return Ok(SubsetMask::EMPTY);
        }
        let mut mask = 0u64;
        for tok in inner.split(',') {
            let i: usize = tok.trim().parse().map_err(|_| Error::Parse(format!("bad subset index {tok:?}")))?;
            if i == 0 || i > MAX_DIM {
                return Err(Error::Parse(format!("subset index {i} outside 1..={MAX_DIM}")));
            }
            mask |= 1 << (i - 1);
        }
        Ok(SubsetMask(mask))
    }
}

/// `w_S(x)`: number of ones of `x` inside `S`.
pub fn weight(x: &Point, s: SubsetMask) -> usize {
    (x.bits & s.0).count_ones() as usize
}

/// `¬x`.
pub fn flip(x: &Point) -> Point {
    Point::new(x.dim, !x.bits)
}

/// Binomial coefficient, 0 when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial coefficient overflows u64")
}

/// Position of `x` among the length-`n` strings of the same weight, ordered
/// lexicographically on `(x_0, …, x_{n−1})` with `0 < 1`.
pub fn fw_rank(x: &Point) -> u64 {
    let n = x.dim;
    let mut remaining = x.hamming_weight();
    let mut rank = 0;
    for i in 0..n {
        if remaining == 0 {
            break;
        }
        if x.get(i) {
            // every string agreeing so far but with a 0 here comes first
            rank += binomial(n - i - 1, remaining);
            remaining -= 1;
        }
    }
    rank
}

/// Inverse of [`fw_rank`]: the `r`-th weight-`w` string of length `n`.
pub fn fw_unrank(n: usize, w: usize, r: u64) -> Result<Point> {
    let count = binomial(n, w);
    if w > n || r >= count {
        return Err(Error::RankOutOfRange { n, weight: w, rank: r, count });
    }
    let mut x = Point::zeros(n);
    let mut remaining = w;
    let mut r = r;
    for i in 0..n {
        if remaining == 0 {
            break;
        }
        let with_zero = binomial(n - i - 1, remaining);
        if r >= with_zero {
            x = x.with(i, true);
            r -= with_zero;
            remaining -= 1;
        }
    }
    Ok(x)
}

/// `D_μ`: independent coordinates with `Pr[x_i = 1] = μ_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductDistribution {
    mu: Vec<f64>,
}

impl ProductDistribution {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if let Some(bad) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidParameter(format!("bias {bad} outside [0,1]")));
        }
        Ok(ProductDistribution { mu })
    }

    pub fn uniform(n: usize) -> Self {
        ProductDistribution { mu: vec![0.5; n] }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `μ ∈ [α, 1−α]^n`.
    pub fn is_alpha_bounded(&self, alpha: f64) -> bool {
        self.mu.iter().all(|&m| m >= alpha - crate::TOL && m <= 1.0 - alpha + crate::TOL)
    }

    pub fn point_probability(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.dim() });
        }
        Ok(self.probability_of_bits(x.bits()))
    }

    pub(crate) fn probability_of_bits(&self, bits: u64) -> f64 {
        self.mu.iter().enumerate().map(|(i, &m)| if bits >> i & 1 == 1 { m } else { 1.0 - m }).product()
    }

    /// Probabilities of all points in truth-table order.
    pub fn table(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        ensure_enumerable(n)?;
        let mut probs = vec![1.0f64];
        for &m in &self.mu {
            // coordinate i doubles the table: new high half has x_i = 1
            let low: Vec<f64> = probs.iter().map(|p| p * (1.0 - m)).collect();
            let high: Vec<f64> = probs.iter().map(|p| p * m).collect();
            probs = low;
            probs.extend(high);
        }
        debug_assert_eq!(probs.len(), 1 << n);
        Ok(probs)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut bits = 0u64;
        for (i, &m) in self.mu.iter().enumerate() {
            if rng.gen::<f64>() < m {
                bits |= 1 << i;
            }
        }
        Point::new(self.dim(), bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Point {
        s.parse().unwrap()
    }

    #[test]
    fn weight_examples() {
        let all = SubsetMask::full(4);
        assert_eq!(weight(&p("0000"), all), 0);
        assert_eq!(weight(&p("0110"), all), 2);
        assert_eq!(weight(&p("0110"), SubsetMask::from_indices([0, 3])), 0);
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip(&p("0000")), p("1111"));
        assert_eq!(flip(&p("1111")), p("0000"));
        assert_eq!(flip(&p("0110")), p("1001"));
    }

    #[test]
    fn fw_rank_matches_enumerated_lex_order() {
        // oracle: sort the weight-2 strings of length 4 as tuples
        let mut layer: Vec<Vec<u8>> =
            (0u32..16).filter(|b| b.count_ones() == 2).map(|b| (0..4).map(|i| (b >> i & 1) as u8).collect()).collect();
        layer.sort();
        for (pos, tuple) in layer.iter().enumerate() {
            let s: String = tuple.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
            assert_eq!(fw_rank(&p(&s)), pos as u64, "{s}");
        }
        assert_eq!(fw_rank(&p("0011")), 0);
        assert_eq!(fw_rank(&p("1100")), 5);
        assert_eq!(fw_rank(&p("0101")), 1);
    }

    #[test]
    fn fw_unrank_examples() {
        assert_eq!(fw_unrank(4, 2, 0).unwrap(), p("0011"));
        assert_eq!(fw_unrank(4, 2, 5).unwrap(), p("1100"));
        assert_eq!(fw_unrank(4, 0, 0).unwrap(), p("0000"));
        assert!(matches!(fw_unrank(4, 2, 6), Err(Error::RankOutOfRange { count: 6, .. })));
        assert!(fw_unrank(3, 4, 0).is_err());
    }

    #[test]
    fn fw_rank_is_a_bijection_per_layer() {
        for n in 0..=12 {
            for w in 0..=n {
                let mut seen = vec![false; binomial(n, w) as usize];
                for x in all_points(n).filter(|x| x.hamming_weight() == w) {
                    let r = fw_rank(&x);
                    assert!(!seen[r as usize]);
                    seen[r as usize] = true;
                    assert_eq!(fw_unrank(n, w, r).unwrap(), x);
                }
                assert!(seen.iter().all(|s| *s));
            }
        }
    }

    #[test]
    fn point_probability_examples() {
        let u = ProductDistribution::uniform(3);
        for x in all_points(3) {
            assert_eq!(u.point_probability(&x).unwrap(), 0.125);
        }
        let d = ProductDistribution::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(d.point_probability(&p("11")).unwrap(), 1.0);
        let d = ProductDistribution::new(vec![0.25, 0.5]).unwrap();
        assert_eq!(d.point_probability(&p("10")).unwrap(), 0.125);
        assert!(matches!(d.point_probability(&p("101")), Err(Error::DimensionMismatch { expected: 2, actual: 3 })));
        assert!(ProductDistribution::new(vec![1.5]).is_err());
    }

    #[test]
    fn display_and_parse() {
        let x = Point::new(4, 0b0001);
        assert_eq!(x.to_string(), "1000");
        let s: SubsetMask = "{2,3}".parse().unwrap();
        assert_eq!(s, SubsetMask::from_indices([1, 2]));
        assert_eq!(s.to_string(), "{2,3}");
        assert_eq!("{}".parse::<SubsetMask>().unwrap(), SubsetMask::EMPTY);
        assert!("{0}".parse::<SubsetMask>().is_err());
        assert!("01x".parse::<Point>().is_err());
    }

    #[test]
    fn enumeration_guard() {
        assert!(ensure_enumerable(10).is_ok());
        assert!(matches!(ensure_enumerable(40), Err(Error::DimensionTooLarge { .. })));
    }

    proptest! {
        #[test]
        fn flip_is_an_involution(n in 0usize..=64, bits in any::<u64>()) {
            let x = Point::new(n, bits);
            prop_assert_eq!(flip(&flip(&x)), x);
        }

        #[test]
        fn product_distribution_sums_to_one(mu in proptest::collection::vec(0.0f64..=1.0, 0..=12)) {
            let d = ProductDistribution::new(mu).unwrap();
            let total: f64 = all_points(d.dim()).map(|x| d.point_probability(&x).unwrap()).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let table = d.table().unwrap();
            for x in all_points(d.dim()) {
                prop_assert!((table[x.bits() as usize] - d.point_probability(&x).unwrap()).abs() < 1e-15);
            }
        }

        #[test]
        fn unrank_rank_roundtrip(n in 1usize..=30, seed in any::<u64>()) {
            let x = Point::new(n, seed);
            let r = fw_rank(&x);
            prop_assert!(r < binomial(n, x.hamming_weight()));
            prop_assert_eq!(fw_unrank(n, x.hamming_weight(), r).unwrap(), x);
        }
    }
}
