//! The twelve acceptance criteria. Each test writes one PASS/FAIL line to
//! stderr, bypassing output capture, and then asserts.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use submodtree::cli::suites::{
    corpus_trees, pruning_rows, random_trees, rows_to_csv, run_suite, CheckRow, Suite, SuiteParams,
};
use submodtree::cube::{ProductDistribution, SubsetMask};
use submodtree::decompose::{approximate, build_lipschitz_tree};
use submodtree::dtree::{exact_distance, Metric};
use submodtree::fourier::{pair_mass, transform, CoefficientSource, Spectrum};
use submodtree::funcs::{corpus, generate_random, CorpusInstance, FamilyKind, FamilySpec, ValueOracle};
use submodtree::hardness::{
    alternating_partial_sum, alternating_partial_sum_closed, correlation_brute_force, correlation_closed_form,
    lpn_success_rate, GadgetKind, Rational,
};
use submodtree::learn::{km_search, pac_learn, KmOptions, PacOptions};

const ALPHAS: [f64; 3] = [1.0, 0.5, 0.25];
const MARGIN: f64 = 1e-9;

fn verdict(number: u32, title: &str, pass: bool, detail: &str) {
    let line = format!("criterion {number:02} {title}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {number:02} failed: {detail}");
}

fn full_corpus() -> Vec<CorpusInstance> {
    corpus(4..=10, 20)
}

fn full_params() -> SuiteParams {
    SuiteParams { n: 10, seeds: 20, smax: 16, kmax: 6 }
}

fn failures(rows: &[CheckRow]) -> Vec<&str> {
    rows.iter().filter(|r| !r.pass).map(|r| r.instance.as_str()).collect()
}

fn suite_detail(rows: &[CheckRow]) -> String {
    let bad = failures(rows);
    match bad.first() {
        None => format!("{} checks", rows.len()),
        Some(first) => format!("{}/{} checks failed, first {first}", bad.len(), rows.len()),
    }
}

fn max_pointwise_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_exact_decomposition() {
    let start = std::time::Instant::now();
    let instances = full_corpus();
    let kinds: std::collections::BTreeSet<_> = instances.iter().map(|i| i.spec.kind()).collect();
    let mut problems = Vec::new();
    for inst in &instances {
        let f = inst.spec.instantiate().unwrap();
        let table = f.table().unwrap();
        for alpha in ALPHAS {
            let rep = build_lipschitz_tree(&f, alpha).unwrap();
            let err = max_pointwise_error(&rep.tree.to_table(f.dim()).unwrap(), &table);
            let bound = (2.0 / alpha).ceil() as usize;
            if err > MARGIN || rep.rank > bound || !rep.certificates_hold() {
                problems.push(format!("{}/a{alpha}: error {err}, rank {}", inst.id, rep.rank));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = kinds.len() == 5 && problems.is_empty() && secs <= 300.0;
    verdict(
        1,
        "exact decomposition",
        pass,
        &format!(
            "{} instances, {} families, {:.1}s, failures {:?}",
            instances.len(),
            kinds.len(),
            secs,
            problems.first()
        ),
    );
}

#[test]
fn criterion_02_end_to_end_approximation() {
    let mut worst_margin = f64::INFINITY;
    let mut problems = Vec::new();
    for inst in full_corpus() {
        let f = inst.spec.instantiate().unwrap();
        for eps in [0.25, 0.5, 0.8] {
            let (rep, ct) = approximate(&f, eps, 0).unwrap();
            let err = exact_distance(&f, &ct.tree, &ProductDistribution::uniform(f.dim()), Metric::L2).unwrap();
            worst_margin = worst_margin.min(eps - err);
            let rank_bound = (4.0 / (eps * eps)).ceil() as usize;
            if err > eps + MARGIN || rep.rank > rank_bound {
                problems.push(format!("{}/eps{eps}: error {err}, rank {}", inst.id, rep.rank));
            }
        }
    }
    verdict(
        2,
        "constant-leaf approximation",
        problems.is_empty(),
        &format!("smallest margin ε − error {worst_margin:.3e}, failures {:?}", problems.first()),
    );
}

#[test]
fn criterion_03_pruning() {
    let mut rows = Vec::new();
    let mut trees = corpus_trees(&full_params()).unwrap();
    trees.extend(random_trees(14, 100));
    for (id, n, tree) in &trees {
        rows.extend(pruning_rows(id, *n, tree).unwrap());
    }
    let eps_rows = rows.iter().filter(|r| r.instance.contains("/eps")).count();
    verdict(
        3,
        "pruning",
        failures(&rows).is_empty() && eps_rows > 0,
        &format!("{} trees, {}", trees.len(), suite_detail(&rows)),
    );
}

#[test]
fn criterion_04_variance() {
    let rows = run_suite(Suite::Variance, &full_params()).unwrap();
    verdict(4, "variance of Lipschitz leaves", failures(&rows).is_empty(), &suite_detail(&rows));
}

#[test]
fn criterion_05_pairwise_fourier() {
    let mut best = f64::INFINITY;
    let mut problems = Vec::new();
    for inst in corpus(2..=10, 20) {
        let sp = transform(&inst.spec.instantiate().unwrap()).unwrap();
        let n = sp.dim();
        for i in 0..n {
            for j in i + 1..n {
                let mass = pair_mass(&sp, i, j);
                let coeff = sp.get(SubsetMask::pair(i, j)).abs();
                if 0.5 * mass > coeff + MARGIN {
                    problems.push(format!("{}/x{}x{}", inst.id, i + 1, j + 1));
                }
                if mass > MARGIN {
                    best = best.min(coeff / mass);
                }
            }
        }
    }
    let edge = transform(&FamilySpec::Cut { n: 2, edges: vec![[1, 2]] }.instantiate().unwrap()).unwrap();
    let edge_coeff = edge.get(SubsetMask::pair(0, 1));
    let edge_ratio = edge_coeff.abs() / pair_mass(&edge, 0, 1);
    let pass =
        problems.is_empty() && best >= 0.5 && (edge_coeff + 0.5).abs() <= MARGIN && (edge_ratio - 2.0).abs() <= MARGIN;
    verdict(
        5,
        "pairwise Fourier bound",
        pass,
        &format!("empirical best constant {best:.6}, single edge ratio {edge_ratio}, failures {:?}", problems.first()),
    );
}

#[test]
fn criterion_06_spectral_norm_of_trees() {
    let mut rows = Vec::new();
    for (id, n, tree) in corpus_trees(&full_params()).unwrap() {
        let sp = tree.to_spectrum(n).unwrap();
        rows.push(CheckRow::le(format!("{id}/spectral-l1"), sp.l1(), tree.size() as f64));
        rows.push(CheckRow::le(format!("{id}/degree"), sp.degree() as f64, tree.depth() as f64));
    }
    verdict(6, "spectral norm and degree of trees", failures(&rows).is_empty(), &suite_detail(&rows));
}

#[test]
fn criterion_07_correlation_closed_forms() {
    let mut problems = Vec::new();
    for s in 2..=16 {
        let brute = correlation_brute_force(GadgetKind::Plateau, s).unwrap();
        if brute != correlation_closed_form(s).unwrap() {
            problems.push(format!("s{s} closed form"));
        }
        if correlation_brute_force(GadgetKind::Monotone, s).unwrap() * 2 != brute {
            problems.push(format!("s{s} half identity"));
        }
    }
    let anchors = [(2, Rational::new(-1, 2)), (3, Rational::new(-1, 4)), (4, Rational::new(1, 8))];
    for (s, want) in anchors {
        if correlation_brute_force(GadgetKind::Plateau, s).unwrap() != want {
            problems.push(format!("s{s} anchor"));
        }
    }
    for n in 0..=20 {
        for r in 0..=n {
            if alternating_partial_sum(n, r).unwrap() != alternating_partial_sum_closed(n, r).unwrap() {
                problems.push(format!("partial n{n} r{r}"));
            }
        }
    }
    verdict(7, "correlation closed forms", problems.is_empty(), &format!("s ≤ 16, n ≤ 20, failures {problems:?}"));
}

#[test]
fn criterion_08_embedding() {
    let params = SuiteParams { seeds: 50, kmax: 6, ..full_params() };
    let rows = run_suite(Suite::Embedding, &params).unwrap();
    let functions = rows.iter().filter(|r| r.instance.ends_with("/round-trip")).count();
    verdict(
        8,
        "middle-layer embedding",
        failures(&rows).is_empty() && functions == 300,
        &format!("{functions} functions, {}", suite_detail(&rows)),
    );
}

fn planted_instance(seed: u64) -> Spectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks: Vec<u64> = (1..256u64).filter(|m| m.count_ones() <= 3).collect();
    masks.shuffle(&mut rng);
    let sign = |rng: &mut ChaCha8Rng| if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let big = sign(&mut rng) * rng.gen_range(0.35..0.5);
    let middle = sign(&mut rng) * rng.gen_range(0.2..0.28);
    let small = sign(&mut rng) * rng.gen_range(0.03..0.12);
    Spectrum::from_coeffs(
        8,
        [(SubsetMask(masks[0]), big), (SubsetMask(masks[1]), middle), (SubsetMask(masks[2]), small)],
    )
}

/// Clauses (1)–(4) of the significant-coefficient contract for one run.
fn km_contract_holds(seed: u64) -> bool {
    let theta = 0.3;
    let degree = 2;
    let target = planted_instance(seed);
    let f = ValueOracle::from_table(8, target.to_table().unwrap()).unwrap();
    let h = km_search(&f, theta, Some(degree), seed, KmOptions::default()).unwrap().spectrum;
    let low_degree = h.iter().all(|(s, _)| s.len() <= degree);
    let complete = target.iter().filter(|(s, c)| c.abs() >= theta && s.len() <= degree).all(|(s, _)| h.contains(s));
    let sound = h.iter().all(|(s, _)| target.get(s).abs() > theta / 2.0);
    let accurate = h.iter().all(|(s, c)| (c - target.get(s)).abs() <= theta / 4.0);
    low_degree && complete && sound && accurate
}

#[test]
fn criterion_09_km_contract() {
    let held = (0..100).filter(|&seed| km_contract_holds(seed)).count();
    verdict(9, "significant-coefficient contract", held >= 95, &format!("{held}/100 runs"));
}

fn junta(n: usize, seed: u64) -> (ValueOracle, Vec<usize>) {
    let kinds = FamilyKind::GENERATED;
    let inner = generate_random(kinds[seed as usize % kinds.len()], 4, seed).unwrap().instantiate().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<usize> = (0..n).collect();
    coords.shuffle(&mut rng);
    coords.truncate(4);
    let map = coords.clone();
    let f = ValueOracle::new(n, move |x| {
        let local = map.iter().enumerate().fold(0u64, |acc, (k, &c)| acc | (((x >> c) & 1) << k));
        inner.value(local)
    });
    (f, coords)
}

#[test]
fn criterion_10_pac_learner() {
    let mut worst_exact: f64 = 0.0;
    for seed in 0..20 {
        let n = 6 + (seed as usize % 7);
        let (f, _) = junta(n, seed);
        let opts = PacOptions { gamma: Some(1e-6), degree: Some(4) };
        let h = pac_learn(&CoefficientSource::Exact(&f), 0.1, opts).unwrap();
        let err = exact_distance(&f, &h.spectrum, &ProductDistribution::uniform(n), Metric::L2).unwrap();
        worst_exact = worst_exact.max(err);
    }

    let eps = 0.5;
    let targets: Vec<CorpusInstance> = corpus(10..=10, 6);
    let mut successes = 0;
    let mut worst_sampled: f64 = 0.0;
    for (seed, inst) in targets.iter().take(30).enumerate() {
        let (_, ct) = approximate(&inst.spec.instantiate().unwrap(), eps, seed as u64).unwrap();
        let tree = ct.tree;
        let f = ValueOracle::new(10, move |x| tree.value(10, x));
        let h =
            pac_learn(&CoefficientSource::Oracle { f: &f, m: 1 << 18, seed: seed as u64 }, eps, PacOptions::default())
                .unwrap();
        let err = exact_distance(&f, &h.spectrum, &ProductDistribution::uniform(10), Metric::L2).unwrap();
        worst_sampled = worst_sampled.max(err);
        if err <= eps {
            successes += 1;
        }
    }
    let pass = worst_exact <= 1e-6 && successes >= 20 && targets.len() >= 30;
    verdict(
        10,
        "PAC learner",
        pass,
        &format!(
            "exact juntas worst error {worst_exact:.3e}; sampled {successes}/30 within ε, worst {worst_sampled:.4}"
        ),
    );
}

#[test]
fn criterion_11_lpn_reduction() {
    let noisy = lpn_success_rate(16, 2, 0.1, 30, 1 << 16, 0).unwrap();
    let clean = lpn_success_rate(16, 2, 0.0, 30, 1 << 16, 0).unwrap();
    let pass = noisy.success_rate >= 2.0 / 3.0 && clean.successes == 30;
    verdict(
        11,
        "noisy parity reduction",
        pass,
        &format!("η = 0.1: {}/30, η = 0: {}/30", noisy.successes, clean.successes),
    );
}

fn run_cli(args: &[&str], out: &Path) -> i32 {
    let status =
        Command::new(env!("CARGO_BIN_EXE_submodtree")).args(args).arg("--out").arg(out).output().expect("binary runs");
    status.status.code().unwrap_or(-1)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_determinism() {
    let runs: [&[&str]; 8] = [
        &["decompose", "--family", "coverage", "--n", "8", "--epsilon", "0.5", "--seed", "4"],
        &["verify", "pruning", "--n", "6", "--seeds", "2"],
        &["verify", "embedding", "--kmax", "3", "--seeds", "2"],
        &["learn", "pac", "--family", "cut", "--n", "8", "--epsilon", "0.5", "--seed", "3", "--samples", "4096"],
        &["learn", "agnostic-l2", "--family", "coverage", "--n", "5", "--epsilon", "0.9", "--L", "1", "--seed", "2"],
        &["hardness", "embed", "--k", "3", "--seed", "5"],
        &["hardness", "lpn", "--n", "10", "--k", "2", "--trials", "4", "--samples", "4096", "--seed", "1"],
        &["spectrum", "--family", "matroid_rank_partition", "--n", "6", "--seed", "2"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("run{i}-a"));
        let b = tmp.path().join(format!("run{i}-b"));
        let (ca, cb) = (run_cli(args, &a), run_cli(args, &b));
        if ca != 0 || cb != 0 {
            problems.push(format!("{} exited {ca}/{cb}", args.join(" ")));
            continue;
        }
        let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
        files += fa.len();
        if fa.is_empty() || fa != fb {
            problems.push(format!("{} differs", args.join(" ")));
        }
    }
    let params = SuiteParams { n: 6, seeds: 3, smax: 8, kmax: 3 };
    let first = rows_to_csv(&run_suite(Suite::All, &params).unwrap());
    let second = rows_to_csv(&run_suite(Suite::All, &params).unwrap());
    if first != second {
        problems.push("suite rows differ between runs".into());
    }
    verdict(12, "determinism", problems.is_empty(), &format!("{files} report files compared, failures {problems:?}"));
}
