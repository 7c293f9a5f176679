use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use veriauction::audit::{
    build_graph, check_k_monotone, check_k_set_monotone, check_money_implementable, check_truthful_no_money,
    extract_thresholds, DeclarationDomain, DomainMode, DomainSpec, EdgeMode,
};
use veriauction::gallery::{prop10_triple, thm11_pair, thm12_pair, thm13_feasibility_at, thm13_pair};
use veriauction::harness::{
    doubling_mu, generate, sweep, GeneratorSpec, SweepConfig, SweepMechanism, ValueDistribution,
};
use veriauction::mechanisms::{
    composite_any_m, default_eps, enumerate_coins, greedy, max_bidder, mpu, mpu_modified, mpu_modified_rand, mpu_rand,
    rand_exp, rand_poly, rounding_probability, CoinSpec, GreedyConfig, MechanismKind,
};
use veriauction::oracle::{optimal_welfare_with_budget, oracle_budget};
use veriauction::{format_rational, parse_rational, welfare, Instance, Rational};

type Res<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "veriauction", version, about = "Truthful auctions without money under verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate(GenerateArgs),
    /// Run one mechanism on an instance.
    Run(RunArgs),
    /// Audit a mechanism over a declaration domain.
    Audit(AuditArgs),
    /// Rebuild a lower-bound or counterexample instance.
    Gallery(GalleryArgs),
    /// Run mechanisms over generated instances and report per-run checks.
    Sweep(SweepArgs),
    /// Exact optimal welfare.
    Oracle(OracleArgs),
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    b: u32,
    /// Largest bundle size (default: m).
    #[arg(long)]
    d_cap: Option<usize>,
    #[arg(long, default_value_t = 1)]
    lo: i64,
    #[arg(long, default_value_t = 100)]
    hi: i64,
    /// Draw values log-uniformly, rounded to multiples of 1/denominator.
    #[arg(long)]
    log_uniform: Option<i64>,
    /// Distinct values within each bidder.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismName {
    Greedy,
    Mpu,
    MpuMod,
    MpuRand,
    MpuModRand,
    Composite,
    Randexp,
    Randpoly,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    mechanism: MechanismName,
    #[arg(long, value_parser = rational)]
    eps: Option<Rational>,
    /// Price cap; defaults to the smallest power of two above the largest value.
    #[arg(long, value_parser = rational)]
    mu: Option<Rational>,
    /// Coin seed for the rounding step (default: every coin lands heads).
    #[arg(long)]
    seed: Option<u64>,
    /// Report every coin vector with its probability instead of one run.
    #[arg(long)]
    enumerate_coins: bool,
    /// Skip zero-valued bids in greedy.
    #[arg(long)]
    skip_zero_bids: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    /// No negative arc in the verification graph.
    Edges,
    /// No negative cycle (implementable with money).
    Cycles,
    /// Direct monotonicity check, cross-checked with the arc test.
    Monotone,
    /// Threshold brackets for the bidder's true collection.
    Thresholds,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Verification,
    Complete,
}

#[derive(Args)]
struct AuditArgs {
    /// Context instance supplying the other bidders.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    mechanism: MechanismName,
    /// JSON domain description.
    #[arg(long)]
    domain_spec: PathBuf,
    /// Overrides the bidder named in the domain spec.
    #[arg(long)]
    bidder: Option<usize>,
    #[arg(long, value_enum, default_value = "verification")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "edges")]
    check: CheckKind,
    #[arg(long, value_parser = rational)]
    eps: Option<Rational>,
    #[arg(long, value_parser = rational)]
    mu: Option<Rational>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseName {
    Prop10,
    Thm11,
    Thm12,
    Thm13,
    Thm13Feasibility,
}

#[derive(Args)]
struct GalleryArgs {
    #[arg(long, value_enum)]
    case: CaseName,
    #[arg(long, value_parser = rational, default_value = "1/10")]
    delta: Rational,
    #[arg(long, value_parser = rational, default_value = "6/5")]
    rho: Rational,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file holding one generator spec or a list of them.
    #[arg(long)]
    spec: PathBuf,
    /// Mechanisms to run (repeatable; default: all).
    #[arg(long = "mechanism")]
    mechanisms: Vec<String>,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = rational)]
    eps: Option<Rational>,
    /// Zero the timing column so output is byte-stable.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    repro_dir: Option<PathBuf>,
    /// Report file; `.json` gives JSON, anything else CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, value: &impl Serialize) -> Res<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => print_stdout(&text)?,
    }
    Ok(())
}

/// Writes a line to stdout; a closed pipe is not an error.
fn print_stdout(text: &str) -> Res<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_instance(path: &Path) -> Res<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Instance::from_json(&text)?)
}

fn mechanism_kind(
    name: MechanismName,
    inst: &Instance,
    eps: Option<Rational>,
    mu: Option<Rational>,
    coins: CoinSpec,
) -> MechanismKind {
    let eps = eps.unwrap_or_else(default_eps);
    let mu = mu.unwrap_or_else(|| doubling_mu(inst.max_value()));
    match name {
        MechanismName::Greedy => MechanismKind::Greedy(GreedyConfig::default()),
        MechanismName::Mpu => MechanismKind::Mpu { mu },
        MechanismName::MpuMod => MechanismKind::MpuModified { eps },
        MechanismName::MpuRand => MechanismKind::MpuRand { mu, coins },
        MechanismName::MpuModRand => MechanismKind::MpuModifiedRand { eps, coins },
        MechanismName::Composite => MechanismKind::Composite { eps, coins },
        MechanismName::Randexp => MechanismKind::RandExp,
        MechanismName::Randpoly => MechanismKind::RandPoly,
    }
}

fn cmd_generate(a: GenerateArgs) -> Res<()> {
    let values = match a.log_uniform {
        Some(denominator) => ValueDistribution::LogUniform { lo: a.lo as f64, hi: a.hi as f64, denominator },
        None => ValueDistribution::UniformInt { lo: a.lo, hi: a.hi },
    };
    let spec = GeneratorSpec {
        n: a.n,
        m: a.m,
        k: a.k,
        b: a.b,
        d_cap: a.d_cap.unwrap_or(a.m),
        values,
        seed: a.seed,
        strict: a.strict,
    };
    let inst = generate(&spec)?;
    match a.out {
        Some(path) => std::fs::write(path, inst.to_json() + "\n")?,
        None => print_stdout(&inst.to_json())?,
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Res<()> {
    let inst = load_instance(&a.instance)?;
    let eps = a.eps.unwrap_or_else(default_eps);
    let mu = a.mu.unwrap_or_else(|| doubling_mu(inst.max_value()));
    let coins = || -> CoinSpec { a.seed.map_or(CoinSpec::AllHeads, CoinSpec::Seeded) };
    let out = a.out.as_deref();

    if a.enumerate_coins {
        let n = inst.n();
        let (bits, q, which) = match a.mechanism {
            MechanismName::MpuRand => (n, rounding_probability(inst.d(), inst.supply(), inst.m()), true),
            MechanismName::MpuModRand => {
                (n.saturating_sub(1), rounding_probability(inst.d(), inst.supply(), inst.m()), false)
            }
            _ => return Err("--enumerate-coins applies to mpu-rand and mpu-mod-rand".into()),
        };
        let dist = enumerate_coins(&inst, bits, q, |c| {
            Ok(if which { mpu_rand(&inst, mu, c)?.0 } else { mpu_modified_rand(&inst, eps, c)?.0 })
        })?;
        return emit(
            out,
            &json!({
                "mechanism": if which { "mpu-rand" } else { "mpu-mod-rand" },
                "q": q,
                "expected_welfare": dist.expected_welfare(),
                "outcomes": dist.outcomes,
            }),
        );
    }

    let mut source = coins().source();
    let result: Value = match a.mechanism {
        MechanismName::Greedy => {
            let cfg = GreedyConfig { include_zero_bids: !a.skip_zero_bids };
            let (alloc, trace) = greedy(&inst, cfg)?;
            json!({ "allocation": alloc, "welfare": format_rational(&welfare(&inst, &alloc)), "trace": trace })
        }
        MechanismName::Mpu | MechanismName::MpuMod | MechanismName::MpuRand | MechanismName::MpuModRand => {
            let (alloc, trace) = match a.mechanism {
                MechanismName::Mpu => mpu(&inst, mu)?,
                MechanismName::MpuMod => mpu_modified(&inst, eps)?,
                MechanismName::MpuRand => mpu_rand(&inst, mu, source.as_mut())?,
                _ => mpu_modified_rand(&inst, eps, source.as_mut())?,
            };
            json!({
                "allocation": alloc,
                "welfare": format_rational(&welfare(&inst, &alloc)),
                "max_bidder": max_bidder(&inst).map(|(i, _)| i),
                "trace": trace,
                "final_prices": trace.final_prices(),
            })
        }
        MechanismName::Composite | MechanismName::Randexp | MechanismName::Randpoly => {
            let dist = match a.mechanism {
                MechanismName::Composite => composite_any_m(&inst, eps, source.as_mut())?,
                MechanismName::Randexp => rand_exp(&inst)?,
                _ => rand_poly(&inst)?,
            };
            json!({ "expected_welfare": format_rational(&dist.expected_welfare(&inst)), "distribution": dist })
        }
    };
    emit(out, &result)
}

fn cmd_audit(a: AuditArgs) -> Res<()> {
    let inst = load_instance(&a.instance)?;
    let text = std::fs::read_to_string(&a.domain_spec).map_err(|e| format!("{}: {e}", a.domain_spec.display()))?;
    let mut spec: DomainSpec = serde_json::from_str(&text)?;
    if let Some(b) = a.bidder {
        spec.bidder = b;
    }
    let domain = DeclarationDomain::from_spec(&spec)?;
    let mech = mechanism_kind(a.mechanism, &inst, a.eps, a.mu, CoinSpec::AllHeads);
    let mode = match a.mode {
        ModeArg::Verification => EdgeMode::Verification,
        ModeArg::Complete => EdgeMode::Complete,
    };
    let out = a.out.as_deref();
    match a.check {
        CheckKind::Edges => {
            let graph = build_graph(&mech, &inst, &domain, EdgeMode::Verification)?;
            emit(
                out,
                &json!({ "vertices": graph.len(), "arcs": graph.arc_count(), "verdict": check_truthful_no_money(&graph)? }),
            )
        }
        CheckKind::Cycles => {
            let graph = build_graph(&mech, &inst, &domain, mode)?;
            emit(
                out,
                &json!({ "vertices": graph.len(), "arcs": graph.arc_count(), "verdict": check_money_implementable(&graph) }),
            )
        }
        CheckKind::Monotone => {
            let report = match domain.mode() {
                DomainMode::Known => check_k_monotone(&mech, &inst, &domain)?,
                DomainMode::Unknown => check_k_set_monotone(&mech, &inst, &domain)?,
            };
            emit(out, &json!({ "ok": report.is_ok(), "agrees_with_arc_test": report.agrees(), "report": report }))
        }
        CheckKind::Thresholds => {
            let truth = inst.declaration(spec.bidder).clone();
            let brackets = extract_thresholds(&mech, &inst, spec.bidder, &truth, &spec.values)?;
            emit(out, &json!({ "bidder": spec.bidder, "brackets": brackets }))
        }
    }
}

fn cmd_gallery(a: GalleryArgs) -> Res<()> {
    let out = a.out.as_deref();
    let case = match a.case {
        CaseName::Prop10 => prop10_triple(a.delta)?,
        CaseName::Thm11 => thm11_pair(a.delta)?,
        CaseName::Thm12 => thm12_pair(a.delta)?,
        CaseName::Thm13 => thm13_pair()?,
        CaseName::Thm13Feasibility => {
            let f = thm13_feasibility_at(a.rho);
            let witness = f.witness.map(|(p, q)| json!({ "p": p.to_string(), "q": q.to_string() }));
            return emit(out, &json!({ "rho": format_rational(&a.rho), "feasible": f.feasible, "witness": witness }));
        }
    };
    emit(out, &case)?;
    if case.all_hold() {
        Ok(())
    } else {
        Err("some recomputed facts differ from their closed forms".into())
    }
}

fn cmd_sweep(a: SweepArgs) -> Res<()> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| format!("{}: {e}", a.spec.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    let specs: Vec<GeneratorSpec> = match value {
        Value::Array(_) => serde_json::from_value(value)?,
        other => vec![serde_json::from_value(other)?],
    };
    let mechanisms: Vec<SweepMechanism> = if a.mechanisms.is_empty() {
        SweepMechanism::ALL.to_vec()
    } else {
        a.mechanisms.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let mut config = SweepConfig {
        replicates: a.replicates,
        deterministic: a.deterministic,
        repro_dir: a.repro_dir,
        ..SweepConfig::default()
    };
    if let Some(w) = a.workers {
        config.workers = w;
    }
    if let Some(eps) = a.eps {
        config.eps = eps;
    }
    let report = sweep(&mechanisms, &specs, &config)?;
    report.write_file(&a.out)?;
    let failing = report.rows.iter().filter(|r| !r.passed()).count();
    eprintln!("{} rows, {failing} failing", report.rows.len());
    for (mech, worst) in &report.worst_ratio {
        eprintln!("worst ratio {mech}: {worst:.4}");
    }
    for path in &report.repro_files {
        eprintln!("reproduction: {}", path.display());
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Res<()> {
    let inst = load_instance(&a.instance)?;
    let budget = oracle_budget();
    let (opt, alloc) = optimal_welfare_with_budget(&inst, budget)?;
    emit(a.out.as_deref(), &json!({ "opt": format_rational(&opt), "allocation": alloc, "budget": budget.to_string() }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Gallery(a) => cmd_gallery(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
