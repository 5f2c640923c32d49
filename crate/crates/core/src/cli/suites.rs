//! The verification suites behind `submodtree verify`.

use clap::ValueEnum;
use rand::Rng;
use rayon::prelude::*;

use crate::cube::{ProductDistribution, SubsetMask};
use crate::decompose::{
    build_exact_discrete_tree, build_lipschitz_tree, build_monotone_tree, constantize_leaves, path_label, LeafValue,
};
use crate::dtree::{exact_distance, pruning_bound, pruning_depth, random_tree, DecisionTree, Leaf, Metric};
use crate::fourier::{format_float, pair_mass, transform};
use crate::funcs::{corpus, discrete_corpus, mean_variance, CorpusInstance, ValueOracle};
use crate::hardness::{
    alternating_partial_sum, alternating_partial_sum_closed, correlation_brute_force, correlation_closed_form,
    embed_build, embed_decode, format_ratio, mean_abs_difference, perturb_embedding, ratio_to_f64, GadgetKind,
    Rational,
};
use crate::{rng, Result, TOL};

/// α values of the decomposition checks.
pub const DECOMPOSITION_ALPHAS: [f64; 3] = [1.0, 0.5, 0.25];

/// Bias bounds of the product distributions in the pruning checks.
pub const PRUNING_ALPHAS: [f64; 3] = [0.1, 0.25, 0.5];

/// Target accuracies for the closed-form pruning depth.
pub const PRUNING_EPSILONS: [f64; 3] = [0.5, 0.25, 0.125];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Suite {
    Variance,
    Pruning,
    Rank,
    Pairwise,
    Correlation,
    Embedding,
    Parseval,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Variance,
        Suite::Pruning,
        Suite::Rank,
        Suite::Pairwise,
        Suite::Correlation,
        Suite::Embedding,
        Suite::Parseval,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Variance => "variance",
            Suite::Pruning => "pruning",
            Suite::Rank => "rank",
            Suite::Pairwise => "pairwise",
            Suite::Correlation => "correlation",
            Suite::Embedding => "embedding",
            Suite::Parseval => "parseval",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteParams {
    /// Largest dimension of generated instances.
    pub n: usize,
    pub seeds: u64,
    /// Largest gadget size for the correlation suite.
    pub smax: usize,
    /// Largest source dimension for the embedding suite.
    pub kmax: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { n: 8, seeds: 3, smax: 12, kmax: 5 }
    }
}

/// One checked inequality or identity.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub instance: String,
    pub lhs: String,
    pub rhs: String,
    pub margin: String,
    pub pass: bool,
}

impl CheckRow {
    /// `lhs ≤ rhs` up to [`TOL`].
    pub fn le(instance: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        CheckRow {
            instance: instance.into(),
            lhs: format_float(lhs),
            rhs: format_float(rhs),
            margin: format_float(rhs - lhs),
            pass: lhs <= rhs + TOL,
        }
    }

    /// `|lhs − rhs| ≤ tol`; the margin is `tol − |lhs − rhs|`.
    pub fn close(instance: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let gap = (lhs - rhs).abs();
        CheckRow {
            instance: instance.into(),
            lhs: format_float(lhs),
            rhs: format_float(rhs),
            margin: format_float(tol - gap),
            pass: gap <= tol,
        }
    }

    /// Exact rational equality.
    pub fn exact(instance: impl Into<String>, lhs: Rational, rhs: Rational) -> Self {
        CheckRow {
            instance: instance.into(),
            lhs: format_ratio(&lhs),
            rhs: format_ratio(&rhs),
            margin: format_ratio(&(rhs - lhs)),
            pass: lhs == rhs,
        }
    }

    fn prefixed(mut self, prefix: &str) -> Self {
        self.instance = format!("{prefix}/{}", self.instance);
        self
    }
}

pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("instance,lhs,rhs,margin,pass\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.instance, r.lhs, r.rhs, r.margin, r.pass));
    }
    out
}

/// Rows of `suite`, sorted by instance id.
pub fn run_suite(suite: Suite, params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let mut rows = match suite {
        Suite::Variance => variance(params)?,
        Suite::Pruning => pruning(params)?,
        Suite::Rank => rank(params)?,
        Suite::Pairwise => pairwise(params)?,
        Suite::Correlation => correlation(params)?,
        Suite::Embedding => embedding(params)?,
        Suite::Parseval => parseval(params)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(run_suite(s, params)?.into_iter().map(|r| r.prefixed(s.name())));
            }
            all
        }
    };
    rows.sort_by(|a, b| a.instance.cmp(&b.instance));
    Ok(rows)
}

fn instances(params: &SuiteParams) -> Vec<CorpusInstance> {
    corpus(params.n.min(4)..=params.n, params.seeds)
}

fn flat<T: Send>(parts: Vec<Result<Vec<T>>>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn leaf_label(r: &crate::funcs::Restriction) -> String {
    let p = path_label(r);
    if p.is_empty() {
        "root".into()
    } else {
        p
    }
}

/// `Var[g] ≤ 2α·E[g]` for every leaf of the Lipschitz tree.
fn variance(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let parts = instances(params)
        .par_iter()
        .map(|inst| {
            let f = inst.spec.instantiate()?;
            let n = f.dim();
            let mut rows = Vec::new();
            for alpha in DECOMPOSITION_ALPHAS {
                let rep = build_lipschitz_tree(&f, alpha)?;
                for (r, leaf) in rep.tree.leaves(n) {
                    let (mean, var) = match leaf {
                        Leaf::Constant(c) => (*c, 0.0),
                        Leaf::Oracle(g) => mean_variance(&g.table()?),
                    };
                    rows.push(CheckRow::le(
                        format!("{}/a{alpha}/{}", inst.id, leaf_label(&r)),
                        var,
                        2.0 * alpha * mean,
                    ));
                }
            }
            Ok(rows)
        })
        .collect();
    flat(parts)
}

/// Product distribution with `μ_i` alternating between `α` and `1 − α`.
pub fn alternating_distribution(n: usize, alpha: f64) -> ProductDistribution {
    let mu = (0..n).map(|i| if i % 2 == 0 { alpha } else { 1.0 - alpha }).collect();
    ProductDistribution::new(mu).expect("α ∈ (0, 1/2]")
}

/// Constant-leaf Lipschitz trees of the corpus, one per α.
pub fn corpus_trees(params: &SuiteParams) -> Result<Vec<(String, usize, DecisionTree)>> {
    let parts = instances(params)
        .par_iter()
        .map(|inst| {
            let f = inst.spec.instantiate()?;
            DECOMPOSITION_ALPHAS
                .iter()
                .map(|&alpha| {
                    let rep = build_lipschitz_tree(&f, alpha)?;
                    let ct = constantize_leaves(&rep, &LeafValue::Mean { eps: (2.0 * alpha).sqrt(), seed: 0 })?;
                    Ok((format!("{}/a{alpha}", inst.id), f.dim(), ct.tree))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect();
    flat(parts)
}

/// Seeded random trees on `n` variables for seeds `0..seeds`.
pub fn random_trees(n: usize, seeds: u64) -> Vec<(String, usize, DecisionTree)> {
    (0..seeds)
        .map(|seed| {
            let leaf_prob = 0.15 + 0.05 * (seed % 5) as f64;
            (format!("random-n{n:02}-s{seed:03}"), n, random_tree(n, n, leaf_prob, seed))
        })
        .collect()
}

/// Disagreement of `T` with `T^{≤d}` against `2^{r−1}(1−α/2)^d`, and the
/// closed-form depth against `ε`.
pub fn pruning_rows(id: &str, n: usize, tree: &DecisionTree) -> Result<Vec<CheckRow>> {
    let r = tree.rank();
    let mut rows = Vec::new();
    for alpha in PRUNING_ALPHAS {
        let dist = alternating_distribution(n, alpha);
        for d in 0..=tree.depth() {
            let dis = exact_distance(tree, &tree.truncate(d), &dist, Metric::Disagreement)?;
            rows.push(CheckRow::le(format!("{id}/mu{alpha}/d{d:02}"), dis, pruning_bound(r, alpha, d)));
        }
        for eps in PRUNING_EPSILONS {
            let d = pruning_depth(r, alpha, eps);
            let dis = exact_distance(tree, &tree.truncate(d), &dist, Metric::Disagreement)?;
            rows.push(CheckRow::le(format!("{id}/mu{alpha}/eps{eps}"), dis, eps));
        }
    }
    Ok(rows)
}

fn pruning(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let mut trees = corpus_trees(params)?;
    trees.extend(random_trees(params.n, params.seeds));
    let parts = trees.par_iter().map(|(id, n, t)| pruning_rows(id, *n, t)).collect();
    flat(parts)
}

fn max_error(tree: &DecisionTree, f: &ValueOracle) -> Result<f64> {
    let t = tree.to_table(f.dim())?;
    Ok(t.iter().zip(f.table()?).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Rank bounds, exactness and leaf certificates of all three constructions.
fn rank(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let parts = instances(params)
        .par_iter()
        .map(|inst| {
            let f = inst.spec.instantiate()?;
            let mut rows = Vec::new();
            for alpha in DECOMPOSITION_ALPHAS {
                let id = format!("{}/a{alpha}", inst.id);
                let mono = build_monotone_tree(&f, alpha)?;
                rows.push(CheckRow::le(format!("{id}/monotone-rank"), mono.rank as f64, mono.rank_bound as f64));
                rows.push(CheckRow::le(format!("{id}/monotone-exact"), max_error(&mono.tree, &f)?, 0.0));
                rows.push(CheckRow::le(format!("{id}/monotone-certificates"), failed(mono.certificates_hold()), 0.0));
                let lip = build_lipschitz_tree(&f, alpha)?;
                rows.push(CheckRow::le(format!("{id}/lipschitz-rank"), lip.rank as f64, lip.rank_bound as f64));
                rows.push(CheckRow::le(format!("{id}/lipschitz-exact"), max_error(&lip.tree, &f)?, 0.0));
                rows.push(CheckRow::le(format!("{id}/lipschitz-certificates"), failed(lip.certificates_hold()), 0.0));
            }
            Ok(rows)
        })
        .collect();
    let mut rows = flat(parts)?;
    for k in 1..=3 {
        let parts = discrete_corpus(params.n.min(4)..=params.n, k, params.seeds)
            .par_iter()
            .map(|inst| {
                let f = inst.spec.instantiate()?;
                let rep = build_exact_discrete_tree(&f, k)?;
                Ok(vec![
                    CheckRow::le(format!("{}/discrete-rank", inst.id), rep.rank as f64, (2 * k) as f64),
                    CheckRow::le(format!("{}/discrete-exact", inst.id), max_error(&rep.tree, &f)?, 0.0),
                    CheckRow::le(
                        format!("{}/discrete-constant-leaves", inst.id),
                        failed(!rep.tree.has_oracle_leaves()),
                        0.0,
                    ),
                ])
            })
            .collect();
        rows.extend(flat(parts)?);
    }
    Ok(rows)
}

fn failed(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

/// `½ Σ_{S∋i,j} f̂(S)² ≤ |f̂({i,j})|` for every pair.
fn pairwise(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let parts = instances(params)
        .par_iter()
        .map(|inst| {
            let sp = transform(&inst.spec.instantiate()?)?;
            let n = sp.dim();
            let mut rows = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let lhs = 0.5 * pair_mass(&sp, i, j);
                    let rhs = sp.get(SubsetMask::pair(i, j)).abs();
                    rows.push(CheckRow::le(format!("{}/x{}x{}", inst.id, i + 1, j + 1), lhs, rhs));
                }
            }
            Ok(rows)
        })
        .collect();
    flat(parts)
}

/// Closed forms, the half identity, the magnitude band and the alternating
/// partial sums.
fn correlation(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let parts = (2..=params.smax)
        .into_par_iter()
        .map(|s| {
            let closed = correlation_closed_form(s)?;
            let brute = correlation_brute_force(GadgetKind::Plateau, s)?;
            let mono = correlation_brute_force(GadgetKind::Monotone, s)?;
            let scaled = ratio_to_f64(&mono).abs() * (s as f64).powf(1.5);
            Ok(vec![
                CheckRow::exact(format!("s{s:02}/closed-form"), brute, closed),
                CheckRow::exact(format!("s{s:02}/monotone-half"), mono, brute / 2),
                CheckRow::le(format!("s{s:02}/magnitude-low"), 0.1, scaled),
                CheckRow::le(format!("s{s:02}/magnitude-high"), scaled, 10.0),
            ])
        })
        .collect();
    let mut rows = flat(parts)?;
    for n in 0..=20 {
        for r in 0..=n {
            let direct = Rational::from_integer(alternating_partial_sum(n, r)?);
            let closed = Rational::from_integer(alternating_partial_sum_closed(n, r)?);
            rows.push(CheckRow::exact(format!("partial-n{n:02}-r{r:02}"), direct, closed));
        }
    }
    Ok(rows)
}

/// Seeded Boolean function on `k` variables.
pub fn random_boolean(k: usize, seed: u64) -> ValueOracle {
    let mut rng = rng::derived(seed, &[rng::tag("random-boolean"), k as u64]);
    let table = (0..1u64 << k).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
    ValueOracle::from_table(k, table).expect("table of length 2^k")
}

/// `max_{x,i} −∂_i f(x)` and `max_{x,i≠j} ∂_{i,j} f(x)` from a table.
pub fn derivative_extremes(n: usize, t: &[f64]) -> (f64, f64) {
    let mut worst_drop = f64::NEG_INFINITY;
    let mut worst_pair = f64::NEG_INFINITY;
    for x in 0..t.len() {
        for i in 0..n {
            let bi = 1 << i;
            if x & bi != 0 {
                continue;
            }
            worst_drop = worst_drop.max(t[x] - t[x | bi]);
            for j in i + 1..n {
                let bj = 1 << j;
                if x & bj != 0 {
                    continue;
                }
                worst_pair = worst_pair.max(t[x | bi | bj] - t[x | bi] - t[x | bj] + t[x]);
            }
        }
    }
    (worst_drop.max(0.0), worst_pair.max(0.0))
}

/// Middle-layer embedding: certificates, exact round trip and the
/// perturbation transfer for `ε ∈ {1/4, 1/2}`.
pub fn embedding_rows(k: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let id = format!("k{k}-f{seed:03}");
    let f = random_boolean(k, seed);
    let (h, spec) = embed_build(&f)?;
    let table = h.table()?;
    let (drop, pair) = derivative_extremes(spec.outer_dim(), &table);
    let decoded = embed_decode(&h, &spec)?;
    let mut rows = vec![
        CheckRow::le(format!("{id}/monotone"), drop, 0.0),
        CheckRow::le(format!("{id}/submodular"), pair, 0.0),
        CheckRow::le(format!("{id}/round-trip"), mean_abs_difference(&decoded, &f)?, 0.0),
    ];
    for eps in [0.25, 0.5] {
        let budget = spec.transfer_bound(eps);
        let g = perturb_embedding(&h, &spec, budget, seed)?;
        let ft = embed_decode(&g, &spec)?;
        rows.push(CheckRow::le(format!("{id}/eps{eps}/distance"), mean_abs_difference(&g, &h)?, budget));
        rows.push(CheckRow::le(format!("{id}/eps{eps}/decode"), mean_abs_difference(&ft, &f)?, eps));
    }
    Ok(rows)
}

fn embedding(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let jobs: Vec<(usize, u64)> = (1..=params.kmax).flat_map(|k| (0..params.seeds).map(move |s| (k, s))).collect();
    let parts = jobs.par_iter().map(|&(k, s)| embedding_rows(k, s)).collect();
    flat(parts)
}

/// Parseval on the corpus; spectral norm against size and degree against
/// depth for the constant-leaf trees.
fn parseval(params: &SuiteParams) -> Result<Vec<CheckRow>> {
    let parts = instances(params)
        .par_iter()
        .map(|inst| {
            let f = inst.spec.instantiate()?;
            let t = f.table()?;
            let energy = t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64;
            let sp = transform(&f)?;
            Ok(vec![CheckRow::close(format!("{}/parseval", inst.id), sp.l2_squared(), energy, 1e-9)])
        })
        .collect();
    let mut rows = flat(parts)?;
    let parts = corpus_trees(params)?
        .par_iter()
        .map(|(id, n, tree)| {
            let sp = tree.to_spectrum(*n)?;
            Ok(vec![
                CheckRow::le(format!("{id}/spectral-l1"), sp.l1(), tree.size() as f64),
                CheckRow::le(format!("{id}/degree"), sp.degree() as f64, tree.depth() as f64),
            ])
        })
        .collect();
    rows.extend(flat(parts)?);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_format_as_csv() {
        let rows = vec![CheckRow::le("a", 0.5, 1.0), CheckRow::exact("b", Rational::new(1, 2), Rational::new(1, 3))];
        let csv = rows_to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "instance,lhs,rhs,margin,pass");
        assert!(lines[1].starts_with("a,5.0000000000000000e-1,1.0000000000000000e0,"));
        assert!(lines[1].ends_with(",true"));
        assert_eq!(lines[2], "b,1/2,1/3,-1/6,false");
    }

    #[test]
    fn derivative_extremes_of_or_and_and() {
        assert_eq!(derivative_extremes(2, &[0.0, 1.0, 1.0, 1.0]), (0.0, 0.0));
        assert_eq!(derivative_extremes(2, &[0.0, 0.0, 0.0, 1.0]), (0.0, 1.0));
        assert_eq!(derivative_extremes(1, &[1.0, 0.0]), (1.0, 0.0));
    }

    #[test]
    fn small_suites_pass() {
        let params = SuiteParams { n: 5, seeds: 2, smax: 8, kmax: 3 };
        for suite in Suite::EACH {
            let rows = run_suite(suite, &params).unwrap();
            assert!(!rows.is_empty(), "{suite:?}");
            let bad: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
            assert!(bad.is_empty(), "{suite:?}: {bad:?}");
            assert!(rows.windows(2).all(|w| w[0].instance < w[1].instance), "{suite:?} ids sorted and unique");
        }
    }
}
