//! Command-line front end: decompositions, verification suites, learners,
//! lower-bound demonstrations and exact spectra.
//!
//! Exit status 0 means every check passed, 1 a usage or I/O error, and 2
//! that a certificate or inequality failed.

pub mod suites;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cube::{ensure_enumerable, enumeration_cap, ProductDistribution};
use crate::decompose::{
    build_exact_discrete_tree, build_lipschitz_tree, build_monotone_tree, constantize_leaves, LeafValue, Phase,
};
use crate::dtree::{exact_distance, Metric};
use crate::fourier::{format_float, transform, CoefficientSource, Spectrum};
use crate::funcs::{generate_random, FamilyKind, FamilySpec, ValueOracle};
use crate::hardness::{
    correlation_table, embed_build, embed_decode, lpn_success_rate, mean_abs_difference, perturb_embedding,
};
use crate::learn::{agnostic_l2_learn_unit, best_l1_bounded, pac_learn, KmMode, KmOptions, PacOptions};
use crate::{Error, Result, TOL};

use suites::{derivative_extremes, random_boolean, rows_to_csv, run_suite, Suite, SuiteParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "submodtree",
    version,
    about = "Decision-tree structure, learners and lower-bound gadgets for submodular functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the low-rank decision tree of a target and certify it.
    Decompose(DecomposeArgs),
    /// Run a verification suite; one CSV row per checked instance.
    Verify(VerifyArgs),
    /// Learn a target with the PAC or the agnostic ℓ₂ learner.
    Learn(LearnArgs),
    /// Lower-bound demonstrations.
    Hardness(HardnessArgs),
    /// Exact Fourier spectrum of a target.
    Spectrum(SpectrumArgs),
}

/// Where the target function comes from.
#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Family name: coverage, cut, budget_additive, matroid_rank_partition,
    /// concave_profile or truth_table.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// JSON family spec, or a bare array of 2^n truth-table values.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Cut edges, e.g. "1-2,2-3".
    #[arg(long)]
    pub edges: Option<String>,
    /// Coverage universe size.
    #[arg(long)]
    pub universe: Option<usize>,
    /// Coverage sets, e.g. "1,2;2,3;" (one group per variable).
    #[arg(long)]
    pub sets: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub budget: Option<f64>,
    /// Matroid blocks, e.g. "1,2;3".
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub caps: Option<String>,
    /// Concave profile p(0), ..., p(n).
    #[arg(long)]
    pub profile: Option<String>,
    /// Truth-table values in little-endian point order.
    #[arg(long)]
    pub values: Option<String>,
    /// Seed for generating a random family instance (defaults to --seed).
    #[arg(long)]
    pub instance_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Monotone,
    Lipschitz,
    Discrete,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Build at α = ε²/2 and check the ℓ₂ error of the constant-leaf tree.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "lipschitz")]
    pub phase: PhaseArg,
    /// Range {0, 1/k, ..., 1} for the discrete phase.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Largest instance dimension.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Largest gadget size (correlation suite).
    #[arg(long, default_value_t = 12)]
    pub smax: usize,
    /// Largest embedded dimension (embedding suite).
    #[arg(long, default_value_t = 5)]
    pub kmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnMode {
    Pac,
    #[value(name = "agnostic-l2")]
    AgnosticL2,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(value_enum)]
    pub mode: LearnMode,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Uniform examples drawn by the PAC learner.
    #[arg(long, default_value_t = 1 << 18)]
    pub samples: usize,
    /// Required unless --exact.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact Fourier coefficients instead of estimates.
    #[arg(long)]
    pub exact: bool,
    /// Spectral ℓ₁ bound of the comparison class.
    #[arg(long = "L", alias = "l-bound")]
    pub l_bound: Option<f64>,
    /// Competitor spectrum CSV for the agnostic contract.
    #[arg(long)]
    pub competitor: Option<PathBuf>,
    #[arg(long)]
    pub samples_per_bucket: Option<usize>,
    #[arg(long)]
    pub samples_per_coefficient: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HardnessArgs {
    #[command(subcommand)]
    pub demo: HardnessDemo,
}

#[derive(Debug, Subcommand)]
pub enum HardnessDemo {
    /// Gadget correlations: closed form against brute force.
    Correlation {
        #[arg(long, default_value_t = 12)]
        smax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Middle-layer embedding round trip.
    Embed {
        #[arg(long)]
        k: Option<usize>,
        /// Boolean function as a JSON family spec or bare value array.
        #[arg(long = "f", alias = "file")]
        f: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparse noisy parity recovery through the agnostic-learning reduction.
    Lpn {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 1 << 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command printed and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub pass: bool,
    pub summary: String,
}

/// Parses `args` (including the program name), runs the command, prints its
/// output, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            eprintln!("{}", out.summary);
            if out.pass {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Hardness(a) => cmd_hardness(a),
        Command::Spectrum(a) => cmd_spectrum(a),
    }
}

fn write_artifact(dir: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad {what} entry {t:?}"))))
        .collect()
}

fn parse_groups(text: &str, what: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';').map(|g| parse_list(g, what)).collect()
}

fn parse_edges(text: &str) -> Result<Vec<[usize; 2]>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (u, v) = t.split_once('-').ok_or_else(|| Error::Parse(format!("edge {t:?} is not of the form u-v")))?;
            let p = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad vertex in edge {t:?}")));
            Ok([p(u)?, p(v)?])
        })
        .collect()
}

fn spec_from_json(text: &str) -> Result<FamilySpec> {
    let v: Value = serde_json::from_str(text)?;
    if let Value::Array(items) = &v {
        let values = items
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Parse("truth-table entries must be numbers".into())))
            .collect::<Result<Vec<f64>>>()?;
        let n = values.len().trailing_zeros() as usize;
        if values.is_empty() || values.len() != 1 << n {
            return Err(Error::InvalidSpec(format!("truth table of length {} is not a power of two", values.len())));
        }
        return Ok(FamilySpec::TruthTable { n, values });
    }
    Ok(serde_json::from_value(v)?)
}

/// The family spec and an identifier for reports.
pub fn resolve_target(t: &TargetArgs, seed: u64) -> Result<(String, FamilySpec)> {
    let kind = t.family.as_deref().map(str::parse::<FamilyKind>).transpose()?;
    if let Some(path) = &t.file {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let spec = spec_from_json(&text)?;
        if let Some(k) = kind {
            if k != spec.kind() {
                return Err(Error::InvalidSpec(format!(
                    "--family {k} but {} holds a {} spec",
                    path.display(),
                    spec.kind()
                )));
            }
        }
        spec.validate()?;
        let id = path.file_stem().map_or("target".into(), |s| s.to_string_lossy().into_owned());
        return Ok((id, spec));
    }
    let kind = kind.ok_or_else(|| Error::InvalidParameter("give --family or --file".into()))?;
    let n = t.n.ok_or_else(|| Error::InvalidParameter("--n is required with --family".into()))?;
    let inst_seed = t.instance_seed.unwrap_or(seed);
    let explicit: Option<Result<FamilySpec>> = match kind {
        FamilyKind::Cut => t.edges.as_deref().map(|e| Ok(FamilySpec::Cut { n, edges: parse_edges(e)? })),
        FamilyKind::Coverage => t.sets.as_deref().map(|s| {
            let sets = parse_groups(s, "set")?;
            let universe = t.universe.unwrap_or_else(|| sets.iter().flatten().copied().max().unwrap_or(1));
            Ok(FamilySpec::Coverage { n, universe, sets })
        }),
        FamilyKind::BudgetAdditive => t.weights.as_deref().map(|w| {
            let weights = parse_list(w, "weight")?;
            let budget = t.budget.unwrap_or_else(|| weights.iter().sum::<f64>() / 2.0);
            Ok(FamilySpec::BudgetAdditive { n, weights, budget })
        }),
        FamilyKind::MatroidRankPartition => t.blocks.as_deref().map(|b| {
            let blocks = parse_groups(b, "block")?;
            let caps = match &t.caps {
                Some(c) => parse_list(c, "cap")?,
                None => vec![1; blocks.len()],
            };
            Ok(FamilySpec::MatroidRankPartition { n, blocks, caps })
        }),
        FamilyKind::ConcaveProfile => {
            t.profile.as_deref().map(|p| Ok(FamilySpec::ConcaveProfile { n, profile: parse_list(p, "profile")? }))
        }
        FamilyKind::TruthTable => {
            let v = t
                .values
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("truth_table needs --values or --file".into()))?;
            Some(Ok(FamilySpec::TruthTable { n, values: parse_list(v, "value")? }))
        }
    };
    let (id, spec) = match explicit {
        Some(spec) => (format!("{kind}-n{n:02}"), spec?),
        None => (format!("{kind}-n{n:02}-s{inst_seed:03}"), generate_random(kind, n, inst_seed)?),
    };
    spec.validate()?;
    Ok((id, spec))
}

fn uniform_l2(f: &ValueOracle, g: &dyn crate::dtree::Evaluate) -> Result<f64> {
    exact_distance(f, g, &ProductDistribution::uniform(f.dim()), Metric::L2)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

pub fn cmd_decompose(a: &DecomposeArgs) -> Result<Outcome> {
    let (id, spec) = resolve_target(&a.target, a.seed)?;
    let f = spec.instantiate()?;
    let n = f.dim();
    let eps = a.epsilon.map(|e| positive("ε", e)).transpose()?;
    let report = match a.phase {
        PhaseArg::Discrete => {
            let k = a.k.ok_or_else(|| Error::InvalidParameter("--k is required with --phase discrete".into()))?;
            build_exact_discrete_tree(&f, k)?
        }
        phase => {
            let alpha = match (a.alpha, eps) {
                (Some(al), None) => positive("α", al)?,
                (None, Some(e)) => e * e / 2.0,
                _ => return Err(Error::InvalidParameter("give exactly one of --alpha and --epsilon".into())),
            };
            if phase == PhaseArg::Monotone {
                build_monotone_tree(&f, alpha)?
            } else {
                build_lipschitz_tree(&f, alpha)?
            }
        }
    };
    let leaf_eps = eps.unwrap_or_else(|| (2.0 * report.alpha).sqrt());
    let constant = constantize_leaves(&report, &LeafValue::Mean { eps: leaf_eps, seed: a.seed })?;
    let l2_error = if n <= enumeration_cap() { Some(uniform_l2(&f, &constant.tree)?) } else { None };
    let error_ok = match (eps, l2_error) {
        (Some(e), Some(err)) => err <= e + TOL,
        _ => true,
    };
    let exact_ok = report.phase != Phase::Discrete || l2_error.is_none_or(|e| e <= TOL);
    let pass = report.certificates_hold() && report.rank_within_bound() && error_ok && exact_ok;

    let mut doc = serde_json::to_value(&report)?;
    let obj = doc.as_object_mut().expect("report serializes as an object");
    obj.insert("instance".into(), json!(id));
    obj.insert("tree".into(), serde_json::to_value(&constant.tree)?);
    obj.insert("sampled_leaves".into(), json!(constant.sampled_leaves));
    obj.insert("samples_per_sampled_leaf".into(), json!(constant.samples_per_sampled_leaf));
    obj.insert("epsilon".into(), json!(eps));
    obj.insert("l2_error".into(), json!(l2_error));
    obj.insert("pass".into(), json!(pass));
    let report_json = pretty(&doc)?;
    let phase = serde_json::to_value(report.phase)?;
    let rank_csv = format!(
        "instance,phase,alpha,rank,rank_bound,claimed_rank_bound,pass\n{id},{},{},{},{},{},{}\n",
        phase.as_str().unwrap_or_default(),
        format_float(report.alpha),
        report.rank,
        report.rank_bound,
        format_float(report.claimed_rank_bound),
        report.rank_within_bound(),
    );
    let dir = a.out.as_deref();
    write_artifact(dir, "report.json", &report_json)?;
    write_artifact(dir, "tree.json", &pretty(&constant.tree)?)?;
    write_artifact(dir, "rank.csv", &rank_csv)?;

    let mut problems = Vec::new();
    if report.input_submodular == Some(false) {
        problems.push("input is not submodular".to_string());
    }
    if !report.certificates_hold() {
        problems.push("leaf certificates failed".into());
    }
    if !report.rank_within_bound() {
        problems.push(format!("rank {} exceeds {}", report.rank, report.rank_bound));
    }
    if !error_ok || !exact_ok {
        problems.push(format!("ℓ₂ error {} too large", l2_error.unwrap_or(f64::NAN)));
    }
    let summary = if pass {
        format!("{id}: rank {} ≤ {}, certificates hold", report.rank, report.rank_bound)
    } else {
        format!("{id}: FAILED: {}", problems.join("; "))
    };
    Ok(Outcome { stdout: report_json, pass, summary })
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    if a.n == 0 || a.n > 14 {
        return Err(Error::InvalidParameter(format!("--n must lie in 1..=14, got {}", a.n)));
    }
    let params = SuiteParams { n: a.n, seeds: a.seeds, smax: a.smax, kmax: a.kmax };
    let rows = run_suite(a.suite, &params)?;
    let csv = rows_to_csv(&rows);
    write_artifact(a.out.as_deref(), &format!("verify-{}.csv", a.suite.name()), &csv)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.instance.as_str()).collect();
    let mut summary = format!("{}: {}/{} checks passed", a.suite.name(), rows.len() - failed.len(), rows.len());
    if let Some(first) = failed.first() {
        summary.push_str(&format!("; first failure {first}"));
    }
    Ok(Outcome { stdout: csv, pass: failed.is_empty(), summary })
}

#[derive(Serialize)]
struct PacReport {
    mode: &'static str,
    instance: String,
    n: usize,
    epsilon: f64,
    #[serde(rename = "J")]
    j: String,
    gamma: f64,
    degree: usize,
    samples: u64,
    queries: u64,
    exact: bool,
    seed: Option<u64>,
    hypothesis_terms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_l2_error: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct CompetitorReport {
    file: String,
    l1: f64,
    degree: usize,
    in_class: bool,
    l2_error: Option<f64>,
    bound: Option<f64>,
    holds: Option<bool>,
}

#[derive(Serialize)]
struct AgnosticReport {
    mode: &'static str,
    instance: String,
    n: usize,
    epsilon: f64,
    #[serde(rename = "L")]
    l_bound: f64,
    degree: Option<usize>,
    theta: f64,
    exact: bool,
    seed: Option<u64>,
    buckets_examined: u64,
    samples_per_bucket: usize,
    samples_per_coefficient: usize,
    queries: u64,
    hypothesis_terms: usize,
    hypothesis_l1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_in_class_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contract_holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    competitor: Option<CompetitorReport>,
    pass: bool,
}

pub fn cmd_learn(a: &LearnArgs) -> Result<Outcome> {
    positive("ε", a.epsilon)?;
    if !a.exact && a.seed.is_none() {
        return Err(Error::InvalidParameter("sampled runs need --seed (or pass --exact)".into()));
    }
    let seed = a.seed.unwrap_or(0);
    let (id, spec) = resolve_target(&a.target, seed)?;
    let f = spec.instantiate()?;
    let n = f.dim();
    if a.exact {
        ensure_enumerable(n)?;
    }
    let enumerable = n <= enumeration_cap();
    let (spectrum, report_json, pass, summary) = match a.mode {
        LearnMode::Pac => {
            let source = if a.exact {
                CoefficientSource::Exact(&f)
            } else {
                CoefficientSource::Oracle { f: &f, m: a.samples, seed }
            };
            let h = pac_learn(&source, a.epsilon, PacOptions { gamma: a.gamma, degree: a.degree })?;
            let err = if enumerable { Some(uniform_l2(&f, &h.spectrum)?) } else { None };
            let pass = err.is_none_or(|e| e <= a.epsilon + TOL);
            let report = PacReport {
                mode: "pac",
                instance: id.clone(),
                n,
                epsilon: a.epsilon,
                j: h.variables_used.to_string(),
                gamma: h.gamma,
                degree: h.degree,
                samples: h.samples,
                queries: h.queries,
                exact: a.exact,
                seed: a.seed,
                hypothesis_terms: h.spectrum.len(),
                exact_l2_error: err,
                pass,
            };
            let summary = match err {
                Some(e) => format!("{id}: J = {}, exact ℓ₂ error {e:.6} (ε = {})", h.variables_used, a.epsilon),
                None => {
                    format!("{id}: J = {}, n = {n} above the enumeration cap, error not computed", h.variables_used)
                }
            };
            (h.spectrum, pretty(&report)?, pass, summary)
        }
        LearnMode::AgnosticL2 => {
            let l_bound =
                positive("L", a.l_bound.ok_or_else(|| Error::InvalidParameter("agnostic-l2 needs --L".into()))?)?;
            let opts = KmOptions {
                mode: if a.exact { KmMode::Exact } else { KmMode::Sampled },
                samples_per_bucket: a.samples_per_bucket,
                samples_per_coefficient: a.samples_per_coefficient,
                ..KmOptions::default()
            };
            let res = agnostic_l2_learn_unit(&f, a.epsilon, l_bound, a.degree, seed, opts)?;
            let mut report = AgnosticReport {
                mode: "agnostic-l2",
                instance: id.clone(),
                n,
                epsilon: a.epsilon,
                l_bound,
                degree: a.degree,
                theta: res.theta,
                exact: a.exact,
                seed: a.seed,
                buckets_examined: res.buckets_examined,
                samples_per_bucket: res.samples_per_bucket,
                samples_per_coefficient: res.samples_per_coefficient,
                queries: res.queries,
                hypothesis_terms: res.spectrum.len(),
                hypothesis_l1: res.spectrum.l1(),
                exact_l2_error: None,
                best_in_class_error: None,
                contract_bound: None,
                contract_holds: None,
                competitor: None,
                pass: true,
            };
            if enumerable {
                let err = uniform_l2(&f, &res.spectrum)?;
                let best = best_l1_bounded(&transform(&f)?, l_bound, a.degree);
                let best_err = uniform_l2(&f, &best)?;
                let holds = err <= best_err + a.epsilon + TOL;
                report.exact_l2_error = Some(err);
                report.best_in_class_error = Some(best_err);
                report.contract_bound = Some(best_err + a.epsilon);
                report.contract_holds = Some(holds);
                report.pass &= holds;
                if let Some(path) = &a.competitor {
                    let g = Spectrum::from_csv(n, &fs::read_to_string(path)?)?;
                    let in_class = g.l1() <= l_bound + TOL && a.degree.is_none_or(|d| g.degree() <= d);
                    let g_err = uniform_l2(&f, &g)?;
                    let bound = g_err + a.epsilon;
                    let holds = in_class.then_some(err <= bound + TOL);
                    report.pass &= holds.unwrap_or(true);
                    report.competitor = Some(CompetitorReport {
                        file: path.display().to_string(),
                        l1: g.l1(),
                        degree: g.degree(),
                        in_class,
                        l2_error: Some(g_err),
                        bound: Some(bound),
                        holds,
                    });
                }
            }
            let summary = match (report.exact_l2_error, report.contract_bound) {
                (Some(e), Some(b)) => format!("{id}: exact ℓ₂ error {e:.6}, contract bound {b:.6}"),
                _ => format!("{id}: {} coefficients retained", res.spectrum.len()),
            };
            let pass = report.pass;
            (res.spectrum, pretty(&report)?, pass, summary)
        }
    };
    let dir = a.out.as_deref();
    write_artifact(dir, "hypothesis.csv", &spectrum.to_csv())?;
    write_artifact(dir, "run.json", &report_json)?;
    let summary = if pass { summary } else { format!("{summary}: FAILED") };
    Ok(Outcome { stdout: report_json, pass, summary })
}

#[derive(Serialize)]
struct EmbedReport {
    k: usize,
    t: usize,
    outer_dim: usize,
    alpha_emb: f64,
    epsilon: f64,
    transfer_bound: f64,
    h_monotone: bool,
    h_submodular: bool,
    max_f_queries_per_h_query: u64,
    round_trip_exact: bool,
    perturbed_distance: f64,
    perturbed_decode_error: f64,
    perturbed_within_epsilon: bool,
    pass: bool,
}

fn boolean_target(k: Option<usize>, file: Option<&Path>, seed: u64) -> Result<ValueOracle> {
    match file {
        Some(path) => {
            let spec = spec_from_json(&fs::read_to_string(path)?)?;
            spec.validate()?;
            if let Some(k) = k {
                if spec.dim() != k {
                    return Err(Error::InvalidParameter(format!(
                        "--k {k} but {} has n = {}",
                        path.display(),
                        spec.dim()
                    )));
                }
            }
            let f = spec.instantiate()?;
            if f.table()?.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidParameter(format!("{} is not Boolean-valued", path.display())));
            }
            Ok(f)
        }
        None => {
            let k = k.ok_or_else(|| Error::InvalidParameter("give --k or --f".into()))?;
            Ok(random_boolean(k, seed))
        }
    }
}

fn cmd_embed(k: Option<usize>, file: Option<&Path>, eps: f64, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    positive("ε", eps)?;
    let f = boolean_target(k, file, seed)?;
    let (h, spec) = embed_build(&f)?;
    ensure_enumerable(spec.outer_dim())?;
    let mut max_queries = 0;
    for x in 0..1u64 << spec.outer_dim() {
        let before = f.query_count();
        h.value(x);
        max_queries = max_queries.max(f.query_count() - before);
    }
    let table = h.table()?;
    let (drop, pair) = derivative_extremes(spec.outer_dim(), &table);
    let round_trip_exact = embed_decode(&h, &spec)?.table()? == f.table()?;
    let budget = spec.transfer_bound(eps);
    let g = perturb_embedding(&h, &spec, budget, seed)?;
    let distance = mean_abs_difference(&g, &h)?;
    let decode_error = mean_abs_difference(&embed_decode(&g, &spec)?, &f)?;
    let report = EmbedReport {
        k: spec.k,
        t: spec.t,
        outer_dim: spec.outer_dim(),
        alpha_emb: spec.alpha_emb,
        epsilon: eps,
        transfer_bound: budget,
        h_monotone: drop <= TOL,
        h_submodular: pair <= TOL,
        max_f_queries_per_h_query: max_queries,
        round_trip_exact,
        perturbed_distance: distance,
        perturbed_decode_error: decode_error,
        perturbed_within_epsilon: distance <= budget + TOL && decode_error <= eps + TOL,
        pass: false,
    };
    let pass = report.h_monotone
        && report.h_submodular
        && report.round_trip_exact
        && report.perturbed_within_epsilon
        && max_queries <= 1;
    let report = EmbedReport { pass, ..report };
    let text = pretty(&report)?;
    write_artifact(out, "embedding.json", &text)?;
    let h_spec = FamilySpec::TruthTable { n: spec.outer_dim(), values: table };
    write_artifact(out, "h.json", &pretty(&h_spec)?)?;
    let summary = format!(
        "embedding k = {} into 2t = {}: round trip {}, perturbed decode error {decode_error}",
        spec.k,
        spec.outer_dim(),
        if round_trip_exact { "exact" } else { "WRONG" }
    );
    Ok(Outcome { stdout: text, pass, summary })
}

pub fn cmd_hardness(a: &HardnessArgs) -> Result<Outcome> {
    match &a.demo {
        HardnessDemo::Correlation { smax, out } => {
            if *smax < 2 {
                return Err(Error::InvalidParameter(format!("--smax must be at least 2, got {smax}")));
            }
            let rows = correlation_table(*smax)?;
            let mut csv =
                String::from("s,closed_form,brute_force,monotone,exact_match,half_identity,scaled_magnitude\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.s,
                    r.closed_form,
                    r.brute_force,
                    r.monotone,
                    r.exact_match,
                    r.half_identity,
                    format_float(r.scaled_magnitude)
                ));
            }
            write_artifact(out.as_deref(), "correlation.csv", &csv)?;
            let pass = rows.iter().all(|r| r.exact_match && r.half_identity);
            let summary = format!(
                "correlation: {} sizes, closed form {} brute force",
                rows.len(),
                if pass { "matches" } else { "DIFFERS FROM" }
            );
            Ok(Outcome { stdout: csv, pass, summary })
        }
        HardnessDemo::Embed { k, f, epsilon, seed, out } => {
            cmd_embed(*k, f.as_deref(), *epsilon, *seed, out.as_deref())
        }
        HardnessDemo::Lpn { n, k, eta, trials, samples, seed, out } => {
            if *trials == 0 {
                return Err(Error::InvalidParameter("--trials must be positive".into()));
            }
            let exp = lpn_success_rate(*n, *k, *eta, *trials, *samples, *seed)?;
            let text = pretty(&exp)?;
            write_artifact(out.as_deref(), "lpn.json", &text)?;
            let pass = exp.success_rate >= 2.0 / 3.0;
            let summary = format!("lpn: recovered {}/{} planted parities", exp.successes, exp.trials);
            Ok(Outcome { stdout: text, pass, summary })
        }
    }
}

pub fn cmd_spectrum(a: &SpectrumArgs) -> Result<Outcome> {
    let (id, spec) = resolve_target(&a.target, a.seed)?;
    let sp = transform(&spec.instantiate()?)?;
    let csv = sp.to_csv();
    write_artifact(a.out.as_deref(), "spectrum.csv", &csv)?;
    let summary = format!("{id}: {} nonzero coefficients, spectral ℓ₁ {:.6}", sp.len(), sp.l1());
    Ok(Outcome { stdout: csv, pass: true, summary })
}
