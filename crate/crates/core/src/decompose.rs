//! Exact low-rank decision trees for submodular functions, their
//! constant-leaf approximations, and the discrete-range variants.

use rand::Rng;
use serde::Serialize;

use crate::cube::{ensure_enumerable, enumeration_cap, full_mask, Point, SubsetMask};
use crate::dtree::{DecisionTree, Leaf};
use crate::funcs::{
    check_alpha_monotone_table, check_submodular_table, flip_oracle, is_submodular, lipschitz_constant_table, restrict,
    Restriction, ValueOracle,
};
use crate::{rng, Error, Result, TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Leaves are α-monotone decreasing.
    Monotone,
    /// Leaves are α-Lipschitz.
    Lipschitz,
    /// Leaves are constants from `{0, 1/k, …, 1}`.
    Discrete,
}

/// Exhaustive checks on one leaf. `None` means the leaf was too large to enumerate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafCertificate {
    /// The path, e.g. `x1=0,x3=1`.
    pub path: String,
    pub free_vars: usize,
    pub alpha_monotone_ok: Option<bool>,
    pub lipschitz_ok: Option<bool>,
    pub submodular_ok: Option<bool>,
    pub lipschitz_constant: Option<f64>,
}

impl LeafCertificate {
    fn passes(&self, phase: Phase) -> bool {
        let ok = |flag: Option<bool>| flag.unwrap_or(true);
        match phase {
            Phase::Monotone => ok(self.alpha_monotone_ok) && ok(self.submodular_ok),
            Phase::Lipschitz | Phase::Discrete => ok(self.lipschitz_ok) && ok(self.submodular_ok),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    #[serde(skip)]
    pub tree: DecisionTree,
    pub phase: Phase,
    pub n: usize,
    pub alpha: f64,
    pub rank: usize,
    pub depth: usize,
    pub size: usize,
    /// The real-valued bound `1/α` or `2/α`.
    pub claimed_rank_bound: f64,
    /// Integer form of the bound that `rank` is checked against.
    pub rank_bound: usize,
    /// `None` when `n` exceeds the enumeration cap.
    pub input_submodular: Option<bool>,
    pub leaf_certificates: Vec<LeafCertificate>,
    /// Value queries spent building the tree.
    pub queries: u64,
}

impl DecompositionReport {
    pub fn rank_within_bound(&self) -> bool {
        self.rank <= self.rank_bound
    }

    pub fn certificates_hold(&self) -> bool {
        self.input_submodular != Some(false) && self.leaf_certificates.iter().all(|c| c.passes(self.phase))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("α must be positive, got {alpha}")))
    }
}

/// `x1=0,x3=1` for the coordinates fixed by `r`; empty at the root.
pub fn path_label(r: &Restriction) -> String {
    let parts: Vec<String> = (0..r.ambient_dim())
        .filter(|i| r.fixed_mask() >> i & 1 == 1)
        .map(|i| format!("x{}={}", i + 1, r.fixed_values() >> i & 1))
        .collect();
    parts.join(",")
}

/// Splits on the smallest free `i` with `∂_i f[v](0̄) > α`; leaves are the
/// restrictions of `f` to the remaining subcubes.
pub fn monotone_tree(f: &ValueOracle, alpha: f64) -> Result<DecisionTree> {
    check_alpha(alpha)?;
    fn grow(f: &ValueOracle, r: Restriction, alpha: f64) -> Result<DecisionTree> {
        let base = r.embed(0);
        let at_zero = f.value(base);
        if r.free_count() == 0 {
            return Ok(DecisionTree::constant(at_zero));
        }
        for i in r.free_coords() {
            if f.value(base | 1 << i) - at_zero > alpha + TOL {
                let lo = grow(f, r.fix(i, false)?, alpha)?;
                let hi = grow(f, r.fix(i, true)?, alpha)?;
                return Ok(DecisionTree::node(i, lo, hi));
            }
        }
        Ok(DecisionTree::oracle(restrict(f, &r)?))
    }
    grow(f, Restriction::empty(f.dim()), alpha)
}

/// Refines every leaf `ℓ` by the monotone tree of `x ↦ f[ℓ](¬x)`, negated
/// back and grafted in place.
pub fn lipschitz_tree(f: &ValueOracle, alpha: f64) -> Result<DecisionTree> {
    let outer = monotone_tree(f, alpha)?;
    outer.replace_leaves(f.dim(), &mut |r, leaf| match leaf {
        Leaf::Constant(_) => Ok(DecisionTree::Leaf(leaf.clone())),
        Leaf::Oracle(g) => {
            let inner = monotone_tree(&flip_oracle(g), alpha)?.negate_inputs();
            let coords = r.free_coords();
            Ok(inner.map_vars(&|local| coords[local]))
        }
    })
}

fn certify(tree: &DecisionTree, n: usize, alpha: f64) -> Vec<LeafCertificate> {
    tree.leaves(n)
        .into_iter()
        .map(|(r, leaf)| {
            let free_vars = r.free_count();
            let table = match leaf {
                Leaf::Constant(_) => Some(vec![]),
                Leaf::Oracle(g) if g.dim() <= enumeration_cap() => g.table().ok(),
                Leaf::Oracle(_) => None,
            };
            let (alpha_monotone_ok, lipschitz_ok, submodular_ok, lipschitz_constant) = match table {
                Some(t) if t.is_empty() => (Some(true), Some(true), Some(true), Some(0.0)),
                Some(t) => {
                    let m = free_vars;
                    let lip = lipschitz_constant_table(m, &t);
                    (
                        Some(check_alpha_monotone_table(m, &t, alpha).holds()),
                        Some(lip <= alpha + TOL),
                        Some(check_submodular_table(m, &t).holds()),
                        Some(lip),
                    )
                }
                None => (None, None, None, None),
            };
            LeafCertificate {
                path: path_label(&r),
                free_vars,
                alpha_monotone_ok,
                lipschitz_ok,
                submodular_ok,
                lipschitz_constant,
            }
        })
        .collect()
}

fn input_submodularity(f: &ValueOracle) -> Result<Option<bool>> {
    if f.dim() > enumeration_cap() {
        return Ok(None);
    }
    let probe = f.tabulate()?;
    Ok(Some(is_submodular(&probe)?.holds()))
}

fn report(
    f: &ValueOracle,
    alpha: f64,
    phase: Phase,
    build: &dyn Fn(&ValueOracle, f64) -> Result<DecisionTree>,
) -> Result<DecompositionReport> {
    check_alpha(alpha)?;
    let input_submodular = input_submodularity(f)?;
    let before = f.query_count();
    let tree = build(f, alpha)?;
    let queries = f.query_count() - before;
    let claimed_rank_bound = match phase {
        Phase::Monotone => 1.0 / alpha,
        _ => 2.0 / alpha,
    };
    Ok(DecompositionReport {
        phase,
        n: f.dim(),
        alpha,
        rank: tree.rank(),
        depth: tree.depth(),
        size: tree.size(),
        claimed_rank_bound,
        rank_bound: (claimed_rank_bound - TOL).ceil().max(0.0) as usize,
        input_submodular,
        leaf_certificates: certify(&tree, f.dim(), alpha),
        queries,
        tree,
    })
}

/// Tree with α-monotone decreasing submodular leaves; rank at most `⌈1/α⌉`
/// for submodular inputs with range `[0,1]`.
pub fn build_monotone_tree(f: &ValueOracle, alpha: f64) -> Result<DecompositionReport> {
    report(f, alpha, Phase::Monotone, &monotone_tree)
}

/// Tree with α-Lipschitz submodular leaves; rank at most `⌈2/α⌉`.
pub fn build_lipschitz_tree(f: &ValueOracle, alpha: f64) -> Result<DecompositionReport> {
    report(f, alpha, Phase::Lipschitz, &lipschitz_tree)
}

/// Samples per leaf when a leaf mean is estimated: `⌈16/ε² · ln 8⌉`.
pub fn mean_sample_count(eps: f64) -> u64 {
    (16.0 / (eps * eps) * 8f64.ln()).ceil() as u64
}

/// How leaf functions become constants.
pub enum LeafValue<'a> {
    /// Uniform mean over the leaf subcube; exact when the leaf is within the
    /// enumeration cap, otherwise [`mean_sample_count`]`(eps)` seeded samples.
    Mean { eps: f64, seed: u64 },
    /// Any rule computed from the leaf path and leaf function.
    Custom(&'a dyn Fn(&Restriction, &ValueOracle) -> Result<f64>),
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantTree {
    pub tree: DecisionTree,
    pub sampled_leaves: usize,
    pub samples_per_sampled_leaf: u64,
}

/// Replaces every leaf function by a constant.
pub fn constantize_leaves(report: &DecompositionReport, mode: &LeafValue<'_>) -> Result<ConstantTree> {
    let mut sampled_leaves = 0;
    let mut samples = 0;
    let tree = report.tree.map_leaves(report.n, &mut |r, leaf| match leaf {
        Leaf::Constant(_) => Ok(leaf.clone()),
        Leaf::Oracle(g) => match mode {
            LeafValue::Custom(rule) => Ok(Leaf::Constant(rule(r, g)?)),
            LeafValue::Mean { eps, seed } => {
                if g.dim() <= enumeration_cap() {
                    let t = g.table()?;
                    Ok(Leaf::Constant(t.iter().sum::<f64>() / t.len() as f64))
                } else {
                    let m = mean_sample_count(*eps);
                    let mut rng = rng::derived(*seed, &[rng::tag("leaf-mean"), r.fixed_mask(), r.fixed_values()]);
                    let total: f64 = (0..m).map(|_| g.value(rng.gen::<u64>() & full_mask(g.dim()))).sum();
                    sampled_leaves += 1;
                    samples = m;
                    Ok(Leaf::Constant(total / m as f64))
                }
            }
        },
    })?;
    Ok(ConstantTree { tree, sampled_leaves, samples_per_sampled_leaf: samples })
}

/// The full approximation: Lipschitz tree at `α = ε²/2`, leaves replaced by their means.
pub fn approximate(f: &ValueOracle, eps: f64, seed: u64) -> Result<(DecompositionReport, ConstantTree)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε must be positive, got {eps}")));
    }
    let report = build_lipschitz_tree(f, eps * eps / 2.0)?;
    let constant = constantize_leaves(&report, &LeafValue::Mean { eps, seed })?;
    Ok((report, constant))
}

/// Checks that every value is in `{0, 1/k, …, 1}` (within [`TOL`]).
pub fn check_discrete_range(f: &ValueOracle, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let table = f.table()?;
    for (x, &v) in table.iter().enumerate() {
        let scaled = v * k as f64;
        if (scaled - scaled.round()).abs() > TOL * k as f64 || !(-TOL..=1.0 + TOL).contains(&v) {
            return Err(Error::NonDiscreteRange {
                value: v,
                point: Point::new(f.dim(), x as u64).to_string(),
                k: k as u32,
            });
        }
    }
    Ok(())
}

/// Exact constant-leaf tree of rank at most `2k` for range `{0, 1/k, …, 1}`.
pub fn build_exact_discrete_tree(f: &ValueOracle, k: usize) -> Result<DecompositionReport> {
    check_discrete_range(f, k)?;
    let alpha = 1.0 / (k as f64 + 1.0 / 3.0);
    let mut rep = build_lipschitz_tree(f, alpha)?;
    let n = rep.n;
    rep.tree = rep.tree.map_leaves(n, &mut |_, leaf| match leaf {
        Leaf::Constant(_) => Ok(leaf.clone()),
        Leaf::Oracle(g) => {
            let t = g.table()?;
            let first = t[0];
            if t.iter().all(|v| (v - first).abs() <= TOL) {
                Ok(Leaf::Constant((first * k as f64).round() / k as f64))
            } else {
                Ok(leaf.clone())
            }
        }
    })?;
    rep.phase = Phase::Discrete;
    rep.claimed_rank_bound = 2.0 / alpha;
    rep.rank_bound = 2 * k;
    rep.size = rep.tree.size();
    rep.leaf_certificates = certify(&rep.tree, n, alpha);
    if rep.tree.has_oracle_leaves() {
        for (c, (_, leaf)) in rep.leaf_certificates.iter_mut().zip(rep.tree.leaves(n)) {
            if matches!(leaf, Leaf::Oracle(_)) {
                c.lipschitz_ok = Some(false);
            }
        }
    }
    Ok(rep)
}

/// Test-sample size for choosing among restriction trials: `⌈8/ε² · ln 6⌉`.
pub fn proper_test_samples(eps: f64) -> usize {
    (8.0 / (eps * eps) * 6f64.ln()).ceil() as usize
}

#[derive(Clone, Debug, Serialize)]
pub struct ProperHypothesis {
    /// Constant-leaf tree over all `n` variables that splits only on `J`.
    pub tree: DecisionTree,
    /// Whether the chosen restriction was checked submodular.
    pub submodular: bool,
    /// Empirical disagreement with the target on the test sample.
    pub disagreement: f64,
    pub trial_disagreements: Vec<f64>,
    pub chosen_trial: usize,
}

/// Fixes the variables outside `j` at random, builds the exact discrete
/// tree of the restriction, and keeps the best of `trials` by test disagreement.
pub fn proper_learn_discrete(
    f: &ValueOracle,
    j: SubsetMask,
    k: usize,
    seed: u64,
    trials: usize,
    test_samples: usize,
) -> Result<ProperHypothesis> {
    let n = f.dim();
    if j.0 & !full_mask(n) != 0 {
        return Err(Error::InvalidParameter(format!("variable set {j} outside n = {n}")));
    }
    ensure_enumerable(j.len())?;
    if trials == 0 || test_samples == 0 {
        return Err(Error::InvalidParameter("trials and test samples must be positive".into()));
    }
    let mut test_rng = rng::derived(seed, &[rng::tag("proper-test")]);
    let test: Vec<u64> = (0..test_samples).map(|_| test_rng.gen::<u64>() & full_mask(n)).collect();
    let targets: Vec<f64> = test.iter().map(|&x| f.value(x)).collect();
    let coords: Vec<usize> = j.iter().collect();

    let mut best: Option<ProperHypothesis> = None;
    let mut disagreements = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut r = rng::derived(seed, &[rng::tag("proper-restriction"), trial as u64]);
        let z = r.gen::<u64>();
        let restriction = Restriction::fix_outside(n, j.0, z);
        let g = restrict(f, &restriction)?.tabulate()?;
        let submodular = is_submodular(&g)?.holds();
        let local = build_exact_discrete_tree(&g, k)?.tree;
        let tree = local.map_vars(&|v| coords[v]);
        let wrong = test.iter().zip(&targets).filter(|(&x, &y)| (tree.value(n, x) - y).abs() > TOL).count();
        let dis = wrong as f64 / test_samples as f64;
        disagreements.push(dis);
        if best.as_ref().is_none_or(|b| dis < b.disagreement) {
            best = Some(ProperHypothesis {
                tree,
                submodular,
                disagreement: dis,
                trial_disagreements: vec![],
                chosen_trial: trial,
            });
        }
    }
    let mut best = best.expect("at least one trial");
    best.trial_disagreements = disagreements;
    Ok(best)
}
