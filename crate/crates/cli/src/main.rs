//! gapforge: seeded, reproducible frontend for constructing and verifying
//! Sherali-Adams integrality-gap certificates for MAX k-CSP.
//!
//! Exit codes: 0 success/pass, 2 certified failure (a checked property is
//! violated), 3 refusal (bad usage, missing precondition, exceeded budget),
//! 1 internal error.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gapforge_core::cert::{verify_basic, verify_sa, BasicOutcome};
use gapforge_core::csp::Instance;
use gapforge_core::error::Error as CoreError;
use gapforge_core::gap::{
    chain_audit_pairs, lift_instance, run_pipeline, soundness_estimate, PipelineConfig, Template,
};
use gapforge_core::hypergraph::{sparsity_audit, AuditMode, Hypergraph, SparsityReport};
use gapforge_core::io::{
    read_json, write_json, BasicCertificateFile, InstanceFile, KtwTraceFile, LiftedInstanceFile,
    MeasureFile, PredicateFile, SaCertificateFile, TemplateFile,
};
use gapforge_core::lp::{build_basic_lp, build_sa_lp, export_lp, solve_lp, LpOutcome};
use gapforge_core::metric::MuMetric;
use gapforge_core::partition::{
    scheme_consistency_audit, AuditFlavor, CarveParams, ConsistencyReport,
};
use gapforge_core::ratio::{rat_from_str, rat_to_f64, rat_to_string};
use gapforge_core::resistance::{
    fourier, ktw_basic_certificate, ktw_generate, polytope_membership, vanishing_check,
};
use gapforge_core::rng::CounterRng;
use serde_json::{json, Map, Value};

const EXIT_INTERNAL: i32 = 1;
const EXIT_VIOLATION: i32 = 2;
const EXIT_REFUSAL: i32 = 3;

#[derive(Parser)]
#[command(name = "gapforge", version, about = "Sherali-Adams integrality-gap toolkit")]
struct Cli {
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Write the JSON report here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in gap template (c5 or k3) to a file.
    MakeTemplate(MakeTemplateArgs),
    /// Sample a lifted instance from a template.
    Lift(LiftArgs),
    /// Full pipeline: lift, certify the basic LP, carve, assemble and audit
    /// the Sherali-Adams certificate, estimate soundness.
    Certify(CertifyArgs),
    /// Seeded soundness experiment on lifted instances.
    Soundness(SoundnessArgs),
    /// Degree/girth/cycle/sparsity report for an instance hypergraph.
    AnalyzeGraph(AnalyzeArgs),
    /// Consistency audits of the carving scheme on random nested pairs.
    PartitionAudit(PartitionAuditArgs),
    /// Solve the basic or level-t LP exactly; prints the optimum.
    SolveLp(SolveLpArgs),
    /// Export the basic or level-t LP in LP text format.
    ExportLp(ExportLpArgs),
    /// Approximation-resistance toolbox.
    #[command(subcommand)]
    Resist(ResistCommand),
}

#[derive(Args)]
struct MakeTemplateArgs {
    /// Template name: c5 or k3.
    #[arg(long)]
    name: String,
    /// Output path for the template JSON.
    #[arg(long)]
    to: String,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long)]
    template: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    /// Output path for the lifted instance JSON.
    #[arg(long)]
    to: String,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    template: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    /// Sherali-Adams level t.
    #[arg(long)]
    level: usize,
    /// Damping parameter; defaults to 2 ln ln N / ln N.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    mu_scale: f64,
    /// Cluster diameter bound.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Shared carving trials M.
    #[arg(long, default_value_t = 256)]
    trials: u64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Degree cap; defaults to the construction's own bound.
    #[arg(long)]
    prune_degree: Option<usize>,
    /// Girth target; omitted means no girth repair.
    #[arg(long)]
    girth: Option<usize>,
    /// Audit chains file (JSON {"chains": [[[v,...],...],...]}).
    #[arg(long)]
    audit: Option<String>,
    /// Number of random audit chains when no file is given.
    #[arg(long, default_value_t = 100)]
    audit_chains: usize,
    #[arg(long, default_value_t = 1)]
    audit_seed: u64,
    #[arg(long, default_value_t = 0)]
    soundness_trials: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Write the SA certificate here.
    #[arg(long)]
    cert_out: Option<String>,
}

#[derive(Args)]
struct SoundnessArgs {
    #[arg(long)]
    template: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Exhaustive enumeration budget on q^N.
    #[arg(long, default_value_t = 1 << 20)]
    budget: u128,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    instance: String,
    /// Apply degree pruning with this cap before reporting.
    #[arg(long)]
    prune_degree: Option<usize>,
    /// Apply girth repair with this target before reporting.
    #[arg(long)]
    girth: Option<usize>,
    /// Count cycles up to this length.
    #[arg(long, default_value_t = 4)]
    cycles: usize,
    #[arg(long)]
    sparsity_eta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sparsity_tau: f64,
    #[arg(long, value_enum, default_value_t = SparsityMode::Sampled)]
    sparsity_mode: SparsityMode,
    #[arg(long, default_value_t = 50)]
    sparsity_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50_000_000)]
    budget: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SparsityMode {
    Exhaustive,
    Sampled,
}

#[derive(Args)]
struct PartitionAuditArgs {
    #[arg(long)]
    instance: String,
    #[arg(long)]
    mu: f64,
    /// Maximal audited set size.
    #[arg(long)]
    level: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Number of random (S, T) pairs per mode.
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    #[arg(long, value_enum, default_value_t = AuditModeArg::Both)]
    mode: AuditModeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditModeArg {
    Coupled,
    Independent,
    Both,
}

#[derive(Args)]
struct SolveLpArgs {
    #[arg(long)]
    instance: String,
    /// Solve the basic LP.
    #[arg(long, conflicts_with = "sa_level")]
    basic: bool,
    /// Solve the level-t Sherali-Adams LP.
    #[arg(long)]
    sa_level: Option<usize>,
    /// Also write the model in LP text format.
    #[arg(long)]
    export_lp: Option<String>,
    /// Variable-count budget for the SA model.
    #[arg(long, default_value_t = 200_000)]
    budget: u128,
}

#[derive(Args)]
struct ExportLpArgs {
    #[arg(long)]
    instance: String,
    #[arg(long, conflicts_with = "sa_level")]
    basic: bool,
    #[arg(long)]
    sa_level: Option<usize>,
    #[arg(long)]
    to: String,
    #[arg(long, default_value_t = 200_000)]
    budget: u128,
}

#[derive(Subcommand)]
enum ResistCommand {
    /// Exact Fourier coefficients of a boolean predicate.
    Fourier(PredArgs),
    /// Bias-polytope membership with an exact witness.
    Membership(MembershipArgs),
    /// Per-level residuals of the vanishing condition for a measure.
    VanishCheck(VanishCheckArgs),
    /// Search a vanishing measure supported on a grid of atoms.
    VanishFind(VanishFindArgs),
    /// Sample an interval-model instance from a measure.
    KtwGen(KtwGenArgs),
    /// Build and verify the basic-LP certificate from a generation trace.
    KtwCert(KtwCertArgs),
}

#[derive(Args)]
struct PredArgs {
    #[arg(long)]
    pred: String,
}

#[derive(Args)]
struct MembershipArgs {
    #[arg(long)]
    pred: String,
    /// Comma-separated rational biases, e.g. "1/3,-1/3,0".
    #[arg(long)]
    zeta: String,
}

#[derive(Args)]
struct VanishCheckArgs {
    #[arg(long)]
    pred: String,
    #[arg(long)]
    measure: String,
    /// Reporting threshold; residuals are exact, the tolerance only labels
    /// the pass line.
    #[arg(long, default_value = "0")]
    tol: String,
}

#[derive(Args)]
struct VanishFindArgs {
    #[arg(long)]
    pred: String,
    /// Grid of candidate atoms (measure file; weights are ignored).
    #[arg(long)]
    grid: String,
    /// Write the found measure here.
    #[arg(long)]
    measure_out: Option<String>,
}

#[derive(Args)]
struct KtwGenArgs {
    #[arg(long)]
    pred: String,
    #[arg(long)]
    measure: String,
    #[arg(long)]
    epsilon: f64,
    /// Scaling parameter delta as an exact rational (e.g. "1/10").
    #[arg(long, default_value = "0")]
    delta: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    instance_out: String,
    #[arg(long)]
    trace_out: String,
}

#[derive(Args)]
struct KtwCertArgs {
    #[arg(long)]
    pred: String,
    #[arg(long)]
    measure: String,
    #[arg(long)]
    instance: String,
    #[arg(long)]
    trace: String,
    #[arg(long)]
    cert_out: Option<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_REFUSAL,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let deterministic = cli.deterministic;
    let output = cli.output.clone();
    match run(cli) {
        Ok((mut report, exit)) => {
            finalize_report(&mut report, deterministic);
            let text = serde_json::to_string_pretty(&Value::Object(report)).unwrap();
            match &output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text + "\n") {
                        eprintln!("error: cannot write report: {e}");
                        std::process::exit(EXIT_INTERNAL);
                    }
                }
                None => println!("{text}"),
            }
            std::process::exit(exit);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}

fn exit_code_for(e: &CoreError) -> i32 {
    match e {
        CoreError::Violation(_)
        | CoreError::NotEmbeddable { .. }
        | CoreError::NonTree(_)
        | CoreError::Infeasible
        | CoreError::Unbounded => EXIT_VIOLATION,
        CoreError::Contract(_)
        | CoreError::Budget(_)
        | CoreError::Structure(_)
        | CoreError::Parse(_)
        | CoreError::Io(_)
        | CoreError::Json(_) => EXIT_REFUSAL,
    }
}

fn finalize_report(report: &mut Map<String, Value>, deterministic: bool) {
    report.insert("tool".into(), json!("gapforge"));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if !deterministic {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.insert("timestamp".into(), json!(now));
    }
}

type CmdResult = gapforge_core::error::Result<(Map<String, Value>, i32)>;

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::MakeTemplate(a) => make_template(a),
        Command::Lift(a) => lift(a),
        Command::Certify(a) => certify(a),
        Command::Soundness(a) => soundness(a),
        Command::AnalyzeGraph(a) => analyze(a),
        Command::PartitionAudit(a) => partition_audit(a),
        Command::SolveLp(a) => solve(a),
        Command::ExportLp(a) => export(a),
        Command::Resist(r) => resist(r),
    }
}

fn report_with(command: &str, config: Value, results: Value) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("command".into(), json!(command));
    map.insert("config".into(), config);
    map.insert("results".into(), results);
    map
}

fn load_template(path: &str) -> gapforge_core::error::Result<Template> {
    read_json::<TemplateFile>(path)?.into_template()
}

fn load_instance(path: &str) -> gapforge_core::error::Result<Instance> {
    read_json::<InstanceFile>(path)?.into_instance()
}

fn make_template(a: MakeTemplateArgs) -> CmdResult {
    let tpl = match a.name.as_str() {
        "c5" => Template::c5(),
        "k3" => Template::k3(),
        other => {
            return Err(CoreError::contract(format!(
                "unknown template {other:?}; available: c5, k3"
            )))
        }
    };
    write_json(&a.to, &TemplateFile::from_template(&tpl)?)?;
    let report = report_with(
        "make-template",
        json!({"name": a.name, "to": a.to}),
        json!({
            "lp_value": rat_to_string(&tpl.lp_value),
            "soundness": rat_to_string(&tpl.soundness),
            "n0": tpl.instance.n,
            "m0": tpl.instance.m(),
        }),
    );
    Ok((report, 0))
}

fn lift(a: LiftArgs) -> CmdResult {
    let tpl = load_template(&a.template)?;
    let lifted = lift_instance(&tpl, a.n, a.m, a.seed)?;
    write_json(&a.to, &LiftedInstanceFile::from_lifted(&lifted))?;
    let report = report_with(
        "lift",
        json!({"template": a.template, "n": a.n, "m": a.m, "seed": a.seed, "to": a.to}),
        json!({
            "variables": lifted.instance.n,
            "constraints": lifted.instance.m(),
            "blocks": tpl.instance.n,
        }),
    );
    Ok((report, 0))
}

fn certify(a: CertifyArgs) -> CmdResult {
    let tpl = load_template(&a.template)?;
    let mut cfg = PipelineConfig::desk(a.n, a.m, a.seed, a.level, a.trials);
    cfg.mu = a.mu;
    cfg.mu_scale = a.mu_scale;
    cfg.delta = a.delta;
    cfg.epsilon = a.epsilon;
    cfg.prune_degree = a.prune_degree;
    cfg.girth = a.girth;
    cfg.audit_chains = a.audit_chains;
    cfg.audit_seed = a.audit_seed;
    cfg.soundness_trials = a.soundness_trials;
    cfg.restarts = a.restarts;

    let out = match &a.audit {
        Some(path) => {
            #[derive(serde::Deserialize)]
            struct ChainsFile {
                chains: Vec<Vec<Vec<usize>>>,
            }
            let chains: ChainsFile = read_json(path)?;
            run_pipeline_with_chains(&tpl, &cfg, chains.chains)?
        }
        None => run_pipeline(&tpl, &cfg)?,
    };

    if let Some(path) = &a.cert_out {
        write_json(path, &SaCertificateFile::from_cert(&out.certificate)?)?;
    }

    let completeness = out.completeness_pass(&tpl, a.epsilon);
    let soundness_ok = out.soundness_pass(&tpl, a.epsilon);
    let pass = completeness && soundness_ok;
    let split_raw: Vec<Value> = out
        .report
        .split_counts
        .iter()
        .map(|(ci, s)| json!([ci, s]))
        .collect();
    // split-frequency bound from the partitioning analysis, with a binomial
    // band on the measurement
    let k = tpl.instance.predicate.k() as f64;
    let f_split_float = rat_to_f64(&out.report.f_split());
    let samples = (out.report.m_total as u64 * out.report.trials) as f64;
    let sigma = (f_split_float * (1.0 - f_split_float) / samples).sqrt();
    let split_bound = 10.0 * k * (out.mu_used * a.level as f64).sqrt() + 3.0 * sigma;
    let results = json!({
        "value": rat_to_string(&out.audit.value),
        "value_float": rat_to_f64(&out.audit.value),
        "max_residual": rat_to_string(&out.audit.max_residual),
        "audited_pairs": out.audit.audited_pairs,
        "chains": out.report.chains_used,
        "c_lift": rat_to_string(&out.report.c_lift),
        "f_del": rat_to_string(&out.report.f_del()),
        "f_split": rat_to_string(&out.report.f_split()),
        "f_split_float": f_split_float,
        "f_split_bound": split_bound,
        "f_split_within_bound": f_split_float <= split_bound,
        "m_total": out.report.m_total,
        "m_deleted": out.report.m_deleted,
        "deleted_by_prune": out.prune_deleted,
        "deleted_by_girth": out.girth_deleted,
        "split_counts_raw": split_raw,
        "trials": out.report.trials,
        "unsplit_identities_checked": out.report.unsplit_identities_checked,
        "mu_used": out.mu_used,
        "delta_h": out.report.delta_h,
        "degree_cap": out.degree_cap,
        "t_suggested": out.t_suggested,
        "value_lower_bound": rat_to_string(&out.report.value_lower_bound),
        "soundness": out.soundness.as_ref().map(|s| json!({
            "max_observed": rat_to_string(&s.max_observed),
            "per_trial": s.per_trial.iter().map(rat_to_string).collect::<Vec<_>>(),
            "exhaustive": s.exhaustive,
        })),
        "completeness_pass": completeness,
        "soundness_pass": soundness_ok,
        "pass": pass,
    });
    let config = json!({
        "template": a.template, "n": a.n, "m": a.m, "seed": a.seed,
        "level": a.level, "mu": a.mu, "mu_scale": a.mu_scale, "delta": a.delta,
        "trials": a.trials, "epsilon": a.epsilon, "prune_degree": a.prune_degree,
        "girth": a.girth, "audit": a.audit, "audit_chains": a.audit_chains,
        "audit_seed": a.audit_seed, "soundness_trials": a.soundness_trials,
        "restarts": a.restarts, "cert_out": a.cert_out,
    });
    let exit = if pass { 0 } else { EXIT_VIOLATION };
    Ok((report_with("certify", config, results), exit))
}

/// Pipeline variant with externally supplied audit chains.
fn run_pipeline_with_chains(
    tpl: &Template,
    cfg: &PipelineConfig,
    chains: Vec<Vec<Vec<usize>>>,
) -> gapforge_core::error::Result<gapforge_core::gap::PipelineOutput> {
    use gapforge_core::gap::{build_sa_certificate, lift_basic_certificate, SaParams};
    let lifted = lift_instance(tpl, cfg.n, cfg.m, cfg.seed)?;
    let basic = lift_basic_certificate(tpl, &lifted)?;
    let h = Hypergraph::from_instance(&lifted.instance)?;
    let n0 = tpl.instance.n;
    let k = tpl.instance.predicate.k();
    let gamma = cfg.m as f64 / (cfg.n * n0).max(1) as f64;
    let degree_cap = cfg.prune_degree.unwrap_or_else(|| {
        (100.0 * (n0 as f64 / cfg.epsilon.max(1e-9)).ln() * k as f64 * gamma.max(1.0)).ceil()
            as usize
    });
    let (pruned, deleted_by_prune) = h.degree_prune(degree_cap.max(1))?;
    let (repaired, deleted_by_girth) = match cfg.girth {
        Some(g) => pruned.girth_repair(g, cfg.cycle_budget)?,
        None => (pruned, Vec::new()),
    };
    let survivors: Vec<usize> = (0..lifted.instance.m())
        .filter(|ci| !deleted_by_prune.contains(ci))
        .collect();
    let mut deleted = deleted_by_prune.clone();
    for &j in &deleted_by_girth {
        deleted.push(survivors[j]);
    }
    deleted.sort_unstable();
    let mu_used =
        cfg.mu.unwrap_or_else(|| gapforge_core::gap::default_mu(lifted.instance.n)) * cfg.mu_scale;
    let params = SaParams {
        t: cfg.t,
        mu: mu_used,
        carve: CarveParams {
            delta: cfg.delta,
            r0: 1.0,
            seed: cfg.seed,
        },
        trials: cfg.trials,
        closure_budget: cfg.closure_budget,
    };
    let (certificate, report) =
        build_sa_certificate(&lifted, &basic, &repaired, &deleted, &params, &chains)?;
    let pairs = chain_audit_pairs(&chains);
    let audit = verify_sa(&lifted.instance, &certificate, &pairs)?;
    let soundness = if cfg.soundness_trials > 0 {
        Some(soundness_estimate(
            tpl,
            cfg.n,
            cfg.m,
            cfg.soundness_trials,
            cfg.seed,
            cfg.exhaustive_budget,
            cfg.restarts,
        )?)
    } else {
        None
    };
    Ok(gapforge_core::gap::PipelineOutput {
        lifted,
        basic,
        certificate,
        report,
        audit,
        chains,
        deleted,
        prune_deleted: deleted_by_prune.len(),
        girth_deleted: deleted_by_girth.len(),
        mu_used,
        degree_cap,
        girth_target: cfg.girth,
        t_suggested: gapforge_core::gap::suggested_level(cfg.epsilon, k, mu_used),
        soundness,
    })
}

fn soundness(a: SoundnessArgs) -> CmdResult {
    let tpl = load_template(&a.template)?;
    let report = soundness_estimate(&tpl, a.n, a.m, a.trials, a.seed, a.budget, a.restarts)?;
    let results = json!({
        "max_observed": rat_to_string(&report.max_observed),
        "max_observed_float": rat_to_f64(&report.max_observed),
        "per_trial": report.per_trial.iter().map(rat_to_string).collect::<Vec<_>>(),
        "trials": a.trials,
        "exhaustive": report.exhaustive,
        "template_soundness": rat_to_string(&tpl.soundness),
    });
    let config = json!({
        "template": a.template, "n": a.n, "m": a.m, "trials": a.trials,
        "seed": a.seed, "restarts": a.restarts, "budget": a.budget.to_string(),
    });
    Ok((report_with("soundness", config, results), 0))
}

fn analyze(a: AnalyzeArgs) -> CmdResult {
    let inst = load_instance(&a.instance)?;
    let h0 = Hypergraph::from_instance(&inst)?;
    let (h1, pruned) = match a.prune_degree {
        Some(d) => h0.degree_prune(d)?,
        None => (h0.clone(), Vec::new()),
    };
    let (h, repaired) = match a.girth {
        Some(g) => h1.girth_repair(g, a.budget)?,
        None => (h1, Vec::new()),
    };
    let cycles = h.count_cycles_upto(a.cycles, a.budget)?;
    let max_degree = (0..h.num_vertices()).map(|v| h.degree(v)).max().unwrap_or(0);
    let sparsity = match a.sparsity_eta {
        None => None,
        Some(eta) => {
            let mode = match a.sparsity_mode {
                SparsityMode::Exhaustive => AuditMode::Exhaustive,
                SparsityMode::Sampled => AuditMode::Sampled {
                    samples_per_size: a.sparsity_samples,
                    seed: a.seed,
                },
            };
            Some(match sparsity_audit(&h, eta, a.sparsity_tau, mode)? {
                SparsityReport::Pass { subsets_checked } => json!({
                    "pass": true, "subsets_checked": subsets_checked,
                }),
                SparsityReport::Witness { set, edges_inside } => json!({
                    "pass": false, "witness": set, "edges_inside": edges_inside,
                }),
            })
        }
    };
    let g = h.incidence_graph();
    g.verify_distance_identity(&h, 50, a.seed)?;
    let results = json!({
        "vertices": h.num_vertices(),
        "edges": h.edges().len(),
        "max_degree": max_degree,
        "deleted_by_prune": pruned.len(),
        "deleted_by_girth": repaired.len(),
        "cycles_up_to": {"length": a.cycles, "count": cycles},
        "sparsity": sparsity,
        "incidence_nodes": g.num_nodes(),
        "incidence_edges": g.num_bipartite_edges(),
        "distance_identity_checked": 50,
    });
    let config = json!({
        "instance": a.instance, "prune_degree": a.prune_degree, "girth": a.girth,
        "cycles": a.cycles, "sparsity_eta": a.sparsity_eta, "sparsity_tau": a.sparsity_tau,
        "sparsity_samples": a.sparsity_samples, "seed": a.seed, "budget": a.budget,
    });
    Ok((report_with("analyze-graph", config, results), 0))
}

fn partition_audit(a: PartitionAuditArgs) -> CmdResult {
    let inst = load_instance(&a.instance)?;
    let h = Hypergraph::from_instance(&inst)?;
    let metric = MuMetric::new(&h, a.mu)?;
    let params = CarveParams {
        delta: a.delta,
        r0: 1.0,
        seed: a.seed,
    };
    let mut rng = CounterRng::new(a.seed, &[gapforge_core::rng::stream::AUDIT, 3]);
    let mut coupled_reports = Vec::new();
    let mut independent_reports = Vec::new();
    let mut coupled_failures = 0u64;
    let mut drawn = 0usize;
    let mut attempts = 0usize;
    while drawn < a.pairs && attempts < 100 * a.pairs + 100 {
        attempts += 1;
        let size = a.level.min(h.num_vertices()).max(2);
        let mut s: Vec<usize> = Vec::new();
        while s.len() < size {
            let v = rng.below(h.num_vertices());
            if !s.contains(&v) {
                s.push(v);
            }
        }
        s.sort_unstable();
        let t_size = 1 + rng.below(s.len() - 1);
        let mut t = s.clone();
        while t.len() > t_size {
            let drop = rng.below(t.len());
            t.remove(drop);
        }
        if metric.embed(&s).is_err() {
            continue;
        }
        drawn += 1;
        if matches!(a.mode, AuditModeArg::Coupled | AuditModeArg::Both) {
            match scheme_consistency_audit(&metric, &s, &t, &params, a.trials, AuditFlavor::Coupled)?
            {
                ConsistencyReport::Coupled { trials, matches } => {
                    coupled_failures += trials - matches;
                    coupled_reports.push(json!({
                        "s": s, "t": t, "trials": trials, "matches": matches,
                    }));
                }
                _ => unreachable!(),
            }
        }
        if matches!(a.mode, AuditModeArg::Independent | AuditModeArg::Both) {
            match scheme_consistency_audit(
                &metric,
                &s,
                &t,
                &params,
                a.trials,
                AuditFlavor::Independent,
            )? {
                ConsistencyReport::Independent {
                    trials,
                    tv_estimate,
                    sampling_band,
                    distinct_outcomes,
                } => independent_reports.push(json!({
                    "s": s, "t": t, "trials": trials, "tv_estimate": tv_estimate,
                    "sampling_band": sampling_band, "distinct_outcomes": distinct_outcomes,
                })),
                _ => unreachable!(),
            }
        }
    }
    let results = json!({
        "pairs": drawn,
        "delta_h": metric.delta_h(),
        "coupled": coupled_reports,
        "coupled_failures": coupled_failures,
        "independent": independent_reports,
    });
    let config = json!({
        "instance": a.instance, "mu": a.mu, "level": a.level, "seed": a.seed,
        "delta": a.delta, "trials": a.trials, "pairs": a.pairs,
    });
    let exit = if coupled_failures > 0 { EXIT_VIOLATION } else { 0 };
    Ok((report_with("partition-audit", config, results), exit))
}

fn build_model(
    inst: &Instance,
    basic: bool,
    sa_level: Option<usize>,
    budget: u128,
) -> gapforge_core::error::Result<gapforge_core::lp::LinearProgram> {
    match (basic, sa_level) {
        (true, None) => build_basic_lp(inst),
        (false, Some(t)) => build_sa_lp(inst, t, budget),
        (false, None) => Err(CoreError::contract("choose --basic or --sa-level t")),
        (true, Some(_)) => unreachable!("clap conflict"),
    }
}

fn solve(a: SolveLpArgs) -> CmdResult {
    let inst = load_instance(&a.instance)?;
    let lp = build_model(&inst, a.basic, a.sa_level, a.budget)?;
    if let Some(path) = &a.export_lp {
        std::fs::write(path, export_lp(&lp)?)?;
    }
    let outcome = solve_lp(&lp)?;
    let results = match &outcome {
        LpOutcome::Optimal { value, point } => {
            // independent re-check: substitute the point into every row
            let recheck = lp.check_point(point)?;
            if &recheck != value {
                return Err(CoreError::violation(
                    "solver value disagrees with substitution",
                ));
            }
            println!("{}", rat_to_string(value));
            json!({
                "status": "optimal",
                "value": rat_to_string(value),
                "value_float": rat_to_f64(value),
                "verified_by_substitution": true,
                "variables": lp.num_vars(),
                "rows": lp.rows.len(),
            })
        }
        LpOutcome::Infeasible => {
            println!("infeasible");
            json!({"status": "infeasible"})
        }
        LpOutcome::Unbounded => {
            println!("unbounded");
            json!({"status": "unbounded"})
        }
    };
    let config = json!({
        "instance": a.instance, "basic": a.basic, "sa_level": a.sa_level,
        "export_lp": a.export_lp, "budget": a.budget.to_string(),
    });
    Ok((report_with("solve-lp", config, results), 0))
}

fn export(a: ExportLpArgs) -> CmdResult {
    let inst = load_instance(&a.instance)?;
    let lp = build_model(&inst, a.basic, a.sa_level, a.budget)?;
    let text = export_lp(&lp)?;
    std::fs::write(&a.to, &text)?;
    let results = json!({
        "to": a.to,
        "variables": lp.num_vars(),
        "rows": lp.rows.len(),
        "bytes": text.len(),
    });
    let config = json!({
        "instance": a.instance, "basic": a.basic, "sa_level": a.sa_level,
        "budget": a.budget.to_string(),
    });
    Ok((report_with("export-lp", config, results), 0))
}

fn resist(r: ResistCommand) -> CmdResult {
    match r {
        ResistCommand::Fourier(a) => {
            let pred = read_json::<PredicateFile>(&a.pred)?.into_predicate()?;
            let table = fourier(&pred)?;
            let mut coeffs = Map::new();
            for mask in 0..(1usize << pred.k()) {
                let set: Vec<String> = (0..pred.k())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| i.to_string())
                    .collect();
                coeffs.insert(
                    format!("{{{}}}", set.join(",")),
                    json!(rat_to_string(table.coeff(mask))),
                );
            }
            let results = json!({
                "density": rat_to_string(table.density()),
                "coefficients": coeffs,
            });
            Ok((report_with("resist-fourier", json!({"pred": a.pred}), results), 0))
        }
        ResistCommand::Membership(a) => {
            let pred = read_json::<PredicateFile>(&a.pred)?.into_predicate()?;
            let zeta = a
                .zeta
                .split(',')
                .map(rat_from_str)
                .collect::<gapforge_core::error::Result<Vec<_>>>()?;
            let witness = polytope_membership(&pred, &zeta)?;
            let results = match witness {
                Some(w) => {
                    let probs: Map<String, Value> = w
                        .iter()
                        .map(|(k, v)| {
                            let key: String = k.iter().map(|b| (b'0' + b) as char).collect();
                            (key, json!(rat_to_string(v)))
                        })
                        .collect();
                    json!({"feasible": true, "witness": probs})
                }
                None => json!({"feasible": false}),
            };
            let config = json!({"pred": a.pred, "zeta": a.zeta});
            Ok((report_with("resist-membership", config, results), 0))
        }
        ResistCommand::VanishCheck(a) => {
            let pred = read_json::<PredicateFile>(&a.pred)?.into_predicate()?;
            let measure = read_json::<MeasureFile>(&a.measure)?.into_measure()?;
            let tol = rat_from_str(&a.tol)?;
            let residuals = vanishing_check(&pred, &measure)?;
            let vanishing = residuals.iter().all(|r| r <= &tol);
            let results = json!({
                "residuals": residuals.iter().map(rat_to_string).collect::<Vec<_>>(),
                "vanishing": vanishing,
                "tol": rat_to_string(&tol),
            });
            let config = json!({"pred": a.pred, "measure": a.measure, "tol": a.tol});
            let exit = if vanishing { 0 } else { EXIT_VIOLATION };
            Ok((report_with("resist-vanish-check", config, results), exit))
        }
        ResistCommand::VanishFind(a) => {
            let pred = read_json::<PredicateFile>(&a.pred)?.into_predicate()?;
            let grid = read_json::<MeasureFile>(&a.grid)?.into_measure()?;
            let found = gapforge_core::resistance::find_vanishing_measure(&pred, &grid.atoms)?;
            let results = match &found {
                Some(measure) => {
                    if let Some(path) = &a.measure_out {
                        write_json(path, &MeasureFile::from_measure(measure)?)?;
                    }
                    json!({
                        "status": "found",
                        "atoms": measure.atoms.len(),
                        "weights": measure
                            .atoms
                            .iter()
                            .map(|at| rat_to_string(&at.weight))
                            .collect::<Vec<_>>(),
                    })
                }
                None => json!({"status": "grid-infeasible"}),
            };
            let config = json!({"pred": a.pred, "grid": a.grid, "measure_out": a.measure_out});
            Ok((report_with("resist-vanish-find", config, results), 0))
        }
        ResistCommand::KtwGen(a) => {
            let pred = read_json::<PredicateFile>(&a.pred)?.into_predicate()?;
            let measure = read_json::<MeasureFile>(&a.measure)?.into_measure()?;
            let delta = rat_from_str(&a.delta)?;
            let (lifted, trace) =
                ktw_generate(&pred, &measure, a.epsilon, &delta, a.n, a.m, a.seed)?;
            write_json(&a.instance_out, &LiftedInstanceFile::from_lifted(&lifted))?;
            write_json(&a.trace_out, &KtwTraceFile::from_trace(&trace))?;
            let results = json!({
                "variables": lifted.instance.n,
                "constraints": lifted.instance.m(),
                "blocks": trace.n0 + 1,
            });
            let config = json!({
                "pred": a.pred, "measure": a.measure, "epsilon": a.epsilon,
                "delta": a.delta, "n": a.n, "m": a.m, "seed": a.seed,
                "instance_out": a.instance_out, "trace_out": a.trace_out,
            });
            Ok((report_with("resist-ktw-gen", config, results), 0))
        }
        ResistCommand::KtwCert(a) => {
            let pred = read_json::<PredicateFile>(&a.pred)?.into_predicate()?;
            let measure = read_json::<MeasureFile>(&a.measure)?.into_measure()?;
            let lifted = read_json::<LiftedInstanceFile>(&a.instance)?.into_lifted()?;
            let trace = read_json::<KtwTraceFile>(&a.trace)?.into_trace()?;
            let (cert, worst_l1) = ktw_basic_certificate(&pred, &measure, &lifted, &trace)?;
            let outcome = verify_basic(&lifted.instance, &cert)?;
            if let Some(path) = &a.cert_out {
                write_json(path, &BasicCertificateFile::from_cert(&cert)?)?;
            }
            let (results, exit) = match outcome {
                BasicOutcome::Valid(v) => (
                    json!({
                        "status": "valid",
                        "value": rat_to_string(&v),
                        "value_float": rat_to_f64(&v),
                        "worst_rounding_l1": rat_to_string(&worst_l1),
                    }),
                    0,
                ),
                BasicOutcome::Violated(v) => (
                    json!({"status": "violated", "violation": v.to_string()}),
                    EXIT_VIOLATION,
                ),
            };
            let config = json!({
                "pred": a.pred, "measure": a.measure, "instance": a.instance,
                "trace": a.trace, "cert_out": a.cert_out,
            });
            Ok((report_with("resist-ktw-cert", config, results), exit))
        }
    }
}
