//! Decision trees whose leaves hold constants or functions of the
//! coordinates left free on the path.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::{self, Deserializer};
use serde::ser::{self, Serializer};
use serde::{Deserialize, Serialize};

use crate::cube::{ensure_enumerable, full_mask, ProductDistribution};
use crate::fourier::{spectrum_of_table, Spectrum};
use crate::funcs::{flip_oracle, gather, Restriction, ValueOracle};
use crate::{rng, Error, Result, TOL};

#[derive(Clone, Debug)]
pub enum Leaf {
    Constant(f64),
    /// A function of the free coordinates at the leaf, in increasing order.
    Oracle(ValueOracle),
}

#[derive(Clone, Debug)]
pub enum DecisionTree {
    Leaf(Leaf),
    Node { var: usize, lo: Box<DecisionTree>, hi: Box<DecisionTree> },
}

impl DecisionTree {
    pub fn constant(c: f64) -> Self {
        DecisionTree::Leaf(Leaf::Constant(c))
    }

    pub fn oracle(f: ValueOracle) -> Self {
        DecisionTree::Leaf(Leaf::Oracle(f))
    }

    pub fn node(var: usize, lo: DecisionTree, hi: DecisionTree) -> Self {
        DecisionTree::Node { var, lo: Box::new(lo), hi: Box::new(hi) }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, DecisionTree::Leaf(_))
    }

    /// Checks that the tree is a valid function on `{0,1}^n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        fn walk(t: &DecisionTree, n: usize, used: u64) -> Result<()> {
            match t {
                DecisionTree::Leaf(Leaf::Constant(_)) => Ok(()),
                DecisionTree::Leaf(Leaf::Oracle(g)) => {
                    let free = n - used.count_ones() as usize;
                    if g.dim() == free {
                        Ok(())
                    } else {
                        Err(Error::DimensionMismatch { expected: free, actual: g.dim() })
                    }
                }
                DecisionTree::Node { var, lo, hi } => {
                    if *var >= n {
                        return Err(Error::DimensionMismatch { expected: n, actual: var + 1 });
                    }
                    if used >> var & 1 == 1 {
                        return Err(Error::InvalidSpec(format!("variable {} repeats on a path", var + 1)));
                    }
                    walk(lo, n, used | 1 << var)?;
                    walk(hi, n, used | 1 << var)
                }
            }
        }
        walk(self, n, 0)
    }

    /// Value at the point with bit mask `x` in `{0,1}^n`; assumes [`check_dim`](Self::check_dim) passed.
    pub fn value(&self, n: usize, x: u64) -> f64 {
        let mut node = self;
        let mut used = 0u64;
        loop {
            match node {
                DecisionTree::Leaf(Leaf::Constant(c)) => return *c,
                DecisionTree::Leaf(Leaf::Oracle(g)) => return g.value(gather(x, full_mask(n) & !used)),
                DecisionTree::Node { var, lo, hi } => {
                    used |= 1 << var;
                    node = if x >> var & 1 == 1 { hi } else { lo };
                }
            }
        }
    }

    pub fn evaluate(&self, x: &crate::cube::Point) -> Result<f64> {
        self.check_dim(x.dim())?;
        Ok(self.value(x.dim(), x.bits()))
    }

    /// Ehrenfeucht–Haussler rank.
    pub fn rank(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Node { lo, hi, .. } => {
                let (a, b) = (lo.rank(), hi.rank());
                if a == b {
                    a + 1
                } else {
                    a.max(b)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Node { lo, hi, .. } => 1 + lo.depth().max(hi.depth()),
        }
    }

    /// Number of leaves.
    pub fn size(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 1,
            DecisionTree::Node { lo, hi, .. } => lo.size() + hi.size(),
        }
    }

    pub fn has_oracle_leaves(&self) -> bool {
        match self {
            DecisionTree::Leaf(Leaf::Constant(_)) => false,
            DecisionTree::Leaf(Leaf::Oracle(_)) => true,
            DecisionTree::Node { lo, hi, .. } => lo.has_oracle_leaves() || hi.has_oracle_leaves(),
        }
    }

    /// Internal nodes at depth `d` become the constant 0.
    pub fn truncate(&self, d: usize) -> DecisionTree {
        self.truncate_with(d, &|_| 0.0)
    }

    /// Like [`truncate`](Self::truncate), but cut subtrees become their uniform mean.
    pub fn truncate_to_mean(&self, d: usize) -> Result<DecisionTree> {
        if self.has_oracle_leaves() {
            self.leaf_means_available()?;
        }
        Ok(self.truncate_with(d, &|t| t.uniform_mean().unwrap_or(0.0)))
    }

    fn leaf_means_available(&self) -> Result<()> {
        match self {
            DecisionTree::Leaf(Leaf::Oracle(g)) => ensure_enumerable(g.dim()),
            DecisionTree::Leaf(_) => Ok(()),
            DecisionTree::Node { lo, hi, .. } => lo.leaf_means_available().and(hi.leaf_means_available()),
        }
    }

    fn truncate_with(&self, d: usize, replace: &dyn Fn(&DecisionTree) -> f64) -> DecisionTree {
        match self {
            DecisionTree::Leaf(_) => self.clone(),
            DecisionTree::Node { .. } if d == 0 => DecisionTree::constant(replace(self)),
            DecisionTree::Node { var, lo, hi } => {
                DecisionTree::node(*var, lo.truncate_with(d - 1, replace), hi.truncate_with(d - 1, replace))
            }
        }
    }

    /// Mean under the uniform distribution on the subcube the tree lives on.
    pub fn uniform_mean(&self) -> Result<f64> {
        match self {
            DecisionTree::Leaf(Leaf::Constant(c)) => Ok(*c),
            DecisionTree::Leaf(Leaf::Oracle(g)) => {
                let t = g.table()?;
                Ok(t.iter().sum::<f64>() / t.len() as f64)
            }
            DecisionTree::Node { lo, hi, .. } => Ok(0.5 * (lo.uniform_mean()? + hi.uniform_mean()?)),
        }
    }

    /// The tree of `x ↦ T(¬x)`: children swapped, oracle leaves flipped.
    pub fn negate_inputs(&self) -> DecisionTree {
        match self {
            DecisionTree::Leaf(Leaf::Constant(_)) => self.clone(),
            DecisionTree::Leaf(Leaf::Oracle(g)) => DecisionTree::oracle(flip_oracle(g)),
            DecisionTree::Node { var, lo, hi } => DecisionTree::node(*var, hi.negate_inputs(), lo.negate_inputs()),
        }
    }

    /// Relabels split variables. `map` must be increasing so that oracle
    /// leaves keep their coordinate order.
    pub fn map_vars(&self, map: &dyn Fn(usize) -> usize) -> DecisionTree {
        match self {
            DecisionTree::Leaf(_) => self.clone(),
            DecisionTree::Node { var, lo, hi } => DecisionTree::node(map(*var), lo.map_vars(map), hi.map_vars(map)),
        }
    }

    /// Each leaf with the restriction describing its path, left to right.
    pub fn leaves(&self, n: usize) -> Vec<(Restriction, &Leaf)> {
        fn walk<'a>(t: &'a DecisionTree, r: Restriction, out: &mut Vec<(Restriction, &'a Leaf)>) {
            match t {
                DecisionTree::Leaf(l) => out.push((r, l)),
                DecisionTree::Node { var, lo, hi } => {
                    walk(lo, r.fix(*var, false).expect("split variable in range"), out);
                    walk(hi, r.fix(*var, true).expect("split variable in range"), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, Restriction::empty(n), &mut out);
        out
    }

    /// Replaces every leaf by a subtree built from its path and payload.
    pub fn replace_leaves(
        &self,
        n: usize,
        op: &mut dyn FnMut(&Restriction, &Leaf) -> Result<DecisionTree>,
    ) -> Result<DecisionTree> {
        fn walk(
            t: &DecisionTree,
            r: Restriction,
            op: &mut dyn FnMut(&Restriction, &Leaf) -> Result<DecisionTree>,
        ) -> Result<DecisionTree> {
            match t {
                DecisionTree::Leaf(l) => op(&r, l),
                DecisionTree::Node { var, lo, hi } => {
                    Ok(DecisionTree::node(*var, walk(lo, r.fix(*var, false)?, op)?, walk(hi, r.fix(*var, true)?, op)?))
                }
            }
        }
        walk(self, Restriction::empty(n), op)
    }

    /// Rebuilds every leaf from its path and payload.
    pub fn map_leaves(
        &self,
        n: usize,
        op: &mut dyn FnMut(&Restriction, &Leaf) -> Result<Leaf>,
    ) -> Result<DecisionTree> {
        self.replace_leaves(n, &mut |r, l| Ok(DecisionTree::Leaf(op(r, l)?)))
    }

    /// All `2^n` values.
    pub fn to_table(&self, n: usize) -> Result<Vec<f64>> {
        ensure_enumerable(n)?;
        self.check_dim(n)?;
        Ok((0..1u64 << n).map(|x| self.value(n, x)).collect())
    }

    /// Spectrum of a constant-leaf tree.
    pub fn to_spectrum(&self, n: usize) -> Result<Spectrum> {
        if self.has_oracle_leaves() {
            return Err(Error::NonConstantLeaf);
        }
        Ok(spectrum_of_table(n, &self.to_table(n)?))
    }

    /// Fails on oracle leaves.
    pub fn to_json(&self) -> Result<String> {
        if self.has_oracle_leaves() {
            return Err(Error::NonConstantLeaf);
        }
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeJson {
    Leaf { leaf: f64 },
    Node { var: usize, lo: Box<TreeJson>, hi: Box<TreeJson> },
}

fn to_json_repr(t: &DecisionTree) -> std::result::Result<TreeJson, &'static str> {
    match t {
        DecisionTree::Leaf(Leaf::Constant(c)) => Ok(TreeJson::Leaf { leaf: *c }),
        DecisionTree::Leaf(Leaf::Oracle(_)) => Err("oracle leaves must be constantized before serialization"),
        DecisionTree::Node { var, lo, hi } => {
            Ok(TreeJson::Node { var: var + 1, lo: Box::new(to_json_repr(lo)?), hi: Box::new(to_json_repr(hi)?) })
        }
    }
}

fn from_json_repr(t: TreeJson) -> std::result::Result<DecisionTree, String> {
    match t {
        TreeJson::Leaf { leaf } => Ok(DecisionTree::constant(leaf)),
        TreeJson::Node { var: 0, .. } => Err("variables are 1-based".to_string()),
        TreeJson::Node { var, lo, hi } => Ok(DecisionTree::node(var - 1, from_json_repr(*lo)?, from_json_repr(*hi)?)),
    }
}

impl Serialize for DecisionTree {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        to_json_repr(self).map_err(ser::Error::custom)?.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DecisionTree {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        from_json_repr(TreeJson::deserialize(deserializer)?).map_err(de::Error::custom)
    }
}

/// Anything that can be evaluated pointwise on `{0,1}^n`.
pub trait Evaluate {
    fn check_dim(&self, n: usize) -> Result<()>;
    fn value_at(&self, n: usize, x: u64) -> f64;
}

impl Evaluate for ValueOracle {
    fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, actual: self.dim() })
        }
    }

    fn value_at(&self, _n: usize, x: u64) -> f64 {
        self.value(x)
    }
}

impl Evaluate for DecisionTree {
    fn check_dim(&self, n: usize) -> Result<()> {
        DecisionTree::check_dim(self, n)
    }

    fn value_at(&self, n: usize, x: u64) -> f64 {
        self.value(n, x)
    }
}

impl Evaluate for Spectrum {
    fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, actual: self.dim() })
        }
    }

    fn value_at(&self, _n: usize, x: u64) -> f64 {
        self.value(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
    /// Probability that the values differ by more than [`TOL`].
    Disagreement,
}

/// Distance between `f` and `g` by exact enumeration under `dist`.
pub fn exact_distance(f: &dyn Evaluate, g: &dyn Evaluate, dist: &ProductDistribution, metric: Metric) -> Result<f64> {
    let n = dist.dim();
    ensure_enumerable(n)?;
    f.check_dim(n)?;
    g.check_dim(n)?;
    let weights = dist.table()?;
    let mut total = 0.0;
    for (x, p) in weights.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let diff = (f.value_at(n, x as u64) - g.value_at(n, x as u64)).abs();
        total += p * match metric {
            Metric::L1 => diff,
            Metric::L2 => diff * diff,
            Metric::Disagreement => (diff > TOL) as u8 as f64,
        };
    }
    Ok(if metric == Metric::L2 { total.sqrt() } else { total })
}

/// `2^{r−1} (1 − α/2)^d`.
pub fn pruning_bound(rank: usize, alpha: f64, d: usize) -> f64 {
    2f64.powi(rank as i32 - 1) * (1.0 - alpha / 2.0).powi(d as i32)
}

/// `⌊(r + log₂(1/ε)) / log₂(2/(2−α))⌋`.
pub fn pruning_depth(rank: usize, alpha: f64, eps: f64) -> usize {
    ((rank as f64 + (1.0 / eps).log2()) / (2.0 / (2.0 - alpha)).log2()).floor() as usize
}

/// Seeded random tree on `n` variables with leaf values in `[0,1]`.
/// Split variables are drawn without replacement along each path; a node
/// becomes a leaf with probability `leaf_prob` or when `max_depth` is reached.
pub fn random_tree(n: usize, max_depth: usize, leaf_prob: f64, seed: u64) -> DecisionTree {
    fn grow<R: Rng>(free: &mut Vec<usize>, depth_left: usize, leaf_prob: f64, rng: &mut R) -> DecisionTree {
        if depth_left == 0 || free.is_empty() || rng.gen_bool(leaf_prob) {
            return DecisionTree::constant(rng.gen::<f64>());
        }
        let pick = rng.gen_range(0..free.len());
        let var = free.swap_remove(pick);
        let lo = grow(&mut free.clone(), depth_left - 1, leaf_prob, rng);
        let hi = grow(&mut free.clone(), depth_left - 1, leaf_prob, rng);
        free.push(var);
        DecisionTree::node(var, lo, hi)
    }
    let mut rng = rng::derived(seed, &[rng::tag("random-tree"), n as u64, max_depth as u64]);
    let mut free: Vec<usize> = (0..n).collect();
    free.shuffle(&mut rng);
    grow(&mut free, max_depth, leaf_prob.clamp(0.0, 1.0), &mut rng)
}
