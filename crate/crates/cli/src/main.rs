use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use freqstab::eval::{l_badness_with, EvalConfig, EvalResult, Method, DEFAULT_MAX_LIVE_STATES};
use freqstab::harness::{
    gen_dn, parse_grid, parse_usize_range, rm_eta, rm_graph, rm_pi10, rm_sigma_y, run_bench, run_sweep, strategy_pi_n,
    strategy_rho_n, write_rows, BenchOptions, Family, InstanceBundle, SweepSpec,
};
use freqstab::io::{
    model_from_json, model_to_json, objective_from_json, objective_to_json, read_text, strategy_from_json,
    strategy_to_json, write_text, Model,
};
use freqstab::mdp::validate_mdp;
use freqstab::objective::{Norm, Objective};
use freqstab::strategy::{build_augmented_space, induced_chain, validate_strategy, AugmentedSpace, FrStrategy};
use freqstab::synth::{multi_restart, SynthesisConfig};
use freqstab::Error;

#[derive(Parser)]
#[command(name = "freqstab", version, about = "Evaluate and synthesize locally stable strategies for MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a benchmark instance as a model file.
    Gen(GenArgs),
    /// Write a hand-built baseline strategy.
    Baseline(BaselineArgs),
    /// Compute the local badness of a strategy.
    Eval(EvalArgs),
    /// Synthesize a strategy by gradient descent with restarts.
    Synth(SynthArgs),
    /// Sweep the penalty weights on a benchmark family.
    Sweep(SweepArgs),
    /// Time synthesis steps and evaluations over ring sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Dn,
    Rm,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Ring size (dn).
    #[arg(long)]
    n: Option<usize>,
    /// Memory states for R (rm).
    #[arg(long, default_value_t = 1)]
    memory: usize,
    /// Use the (0.9, 0.1) target with horizon 10 (rm).
    #[arg(long)]
    window_target: bool,
}

impl InstanceArgs {
    fn family(&self) -> anyhow::Result<Family> {
        Ok(match self.family {
            FamilyArg::Dn => {
                Family::Dn { n: self.n.ok_or_else(|| Error::InvalidConfig("--n is required for --family dn".into()))? }
            }
            FamilyArg::Rm => Family::Rm { memory: self.memory, window_target: self.window_target },
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write the instance's L2 distance objective.
    #[arg(long)]
    objective_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Pi,
    Rho,
    Sigma,
    Eta,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: Option<usize>,
    /// pi or rho on dn; sigma, pi or eta on rm.
    #[arg(long, value_enum)]
    which: Which,
    /// Parameter of the memoryless rm strategy.
    #[arg(long, default_value_t = 0.0)]
    y: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the model with the memory allocation the strategy uses.
    #[arg(long)]
    mdp_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long)]
    objective: PathBuf,
    #[arg(long)]
    d: usize,
    /// Use the exhaustive path enumeration instead of the window DP.
    #[arg(long)]
    naive: bool,
    /// Include the full per-vertex, per-horizon matrix in the JSON.
    #[arg(long)]
    dump_rsl: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-horizon expected badness; defaults to OUT with a .csv extension.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_LIVE_STATES)]
    max_live_states: usize,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Args)]
struct OptimizerArgs {
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = SynthesisConfig::default().steps)]
    steps: usize,
    #[arg(long, default_value_t = SynthesisConfig::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SynthesisConfig::default().learning_rate)]
    lr: f64,
    /// LogUniform initialization support as LO:HI.
    #[arg(long, default_value = "0.01:10")]
    init_range: String,
    /// Treat the penalty normalizers as constants when differentiating.
    #[arg(long)]
    freeze_normalizers: bool,
}

impl OptimizerArgs {
    fn config(&self) -> anyhow::Result<SynthesisConfig> {
        let bad = || Error::InvalidConfig(format!("--init-range {:?} must be LO:HI", self.init_range));
        let (lo, hi) = self.init_range.split_once(':').ok_or_else(bad)?;
        let cfg = SynthesisConfig {
            steps: self.steps,
            restarts: self.restarts,
            learning_rate: self.lr,
            beta: self.beta,
            gamma: self.gamma,
            seed: self.seed,
            init_range: (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?),
            freeze_normalizers: self.freeze_normalizers,
            ..SynthesisConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    objective: PathBuf,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// Synthesize against the midpoint distance when the objective is an interval one.
    #[arg(long)]
    surrogate: bool,
    /// Strategy file; the run summary and trace go next to it.
    #[arg(long)]
    out: PathBuf,
    /// Write the augmented transition table as CSV next to OUT.
    #[arg(long)]
    dump_table: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "0:0.5:0.1")]
    beta: String,
    #[arg(long, default_value = "0:0.5:0.1")]
    gamma: String,
    #[arg(long, default_value = "3:10")]
    d_range: String,
    #[arg(long, default_value_t = SynthesisConfig::default().steps)]
    steps: usize,
    #[arg(long, default_value_t = SynthesisConfig::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SynthesisConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value = "0.01:10")]
    init_range: String,
    #[arg(long)]
    freeze_normalizers: bool,
    /// Leave wall-clock columns empty so reports are byte-reproducible.
    #[arg(long)]
    no_timings: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_LIVE_STATES)]
    max_live_states: usize,
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Report CSV; existing complete cells are skipped.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "4:20")]
    n_range: String,
    #[arg(long, default_value_t = 900)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LIVE_STATES)]
    max_live_states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    skip_eval: bool,
    #[arg(long)]
    skip_naive: bool,
    #[arg(long)]
    out: PathBuf,
}

/// `out` with its extension replaced by `ext`, e.g. `run.json` -> `run.trace.csv`.
fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

fn bundle_model(bundle: &InstanceBundle) -> Model {
    Model { mdp: bundle.mdp.clone(), labeling: bundle.labeling.clone(), alloc: bundle.alloc.clone() }
}

fn load_model(path: &Path) -> anyhow::Result<(Model, AugmentedSpace)> {
    let text = read_text(path).with_context(|| format!("reading {}", path.display()))?;
    let model = model_from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    validate_mdp(&model.mdp).into_result(Error::InvalidModel)?;
    let space = build_augmented_space(&model.mdp, &model.alloc)?;
    Ok((model, space))
}

fn load_objective(path: &Path, model: &Model) -> anyhow::Result<Objective> {
    let text = read_text(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(objective_from_json(&text, &model.labeling).with_context(|| format!("parsing {}", path.display()))?)
}

fn timeout(secs: Option<u64>) -> Option<Duration> {
    secs.map(Duration::from_secs)
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let bundle = args.instance.family()?.bundle()?;
    let model = bundle_model(&bundle);
    write_text(&args.out, &model_to_json(&model)?)?;
    if let Some(path) = &args.objective_out {
        let obj = Objective::distance(bundle.target.clone(), Norm::L2)?;
        write_text(path, &objective_to_json(&obj, &bundle.labeling)?)?;
    }
    eprintln!("{}: {} vertices, horizon {}", bundle.id, bundle.mdp.num_vertices(), bundle.d);
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> anyhow::Result<()> {
    let (bundle, alloc, sigma) = match (args.family, args.which) {
        (FamilyArg::Dn, which @ (Which::Pi | Which::Rho)) => {
            let n = args.n.ok_or_else(|| Error::InvalidConfig("--n is required for --family dn".into()))?;
            let bundle = gen_dn(n)?;
            let sigma = if which == Which::Pi { strategy_pi_n(n)? } else { strategy_rho_n(n)? };
            let alloc = bundle.alloc.clone();
            (bundle, alloc, sigma)
        }
        (FamilyArg::Rm, which @ (Which::Sigma | Which::Pi | Which::Eta)) => {
            let b = match which {
                Which::Sigma => rm_sigma_y(args.y)?,
                Which::Pi => rm_pi10(),
                _ => rm_eta(),
            };
            (rm_graph(b.alloc.get(0), true)?, b.alloc, b.strategy)
        }
        _ => bail!(Error::InvalidConfig("this baseline does not exist for the chosen family".into())),
    };
    let model = Model { alloc, ..bundle_model(&bundle) };
    let space = build_augmented_space(&model.mdp, &model.alloc)?;
    validate_strategy(&space, &sigma, &model.mdp).into_result(Error::InvalidStrategy)?;
    write_text(&args.out, &strategy_to_json(&sigma, &space)?)?;
    if let Some(path) = &args.mdp_out {
        write_text(path, &model_to_json(&model)?)?;
    }
    Ok(())
}

fn write_expected_csv(path: &Path, result: &EvalResult) -> anyhow::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "bscc,n,expected")?;
    for b in &result.bsccs {
        for (i, e) in b.expected.iter().enumerate() {
            writeln!(w, "{},{},{}", b.id, i + 1, e)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let (model, space) = load_model(&args.mdp)?;
    let obj = load_objective(&args.objective, &model)?;
    let text = read_text(&args.strategy).with_context(|| format!("reading {}", args.strategy.display()))?;
    let sigma = strategy_from_json(&text, &space)?;
    validate_strategy(&space, &sigma, &model.mdp).into_result(Error::InvalidStrategy)?;
    let chain = induced_chain(&space, &sigma, &model.labeling);
    let cfg = EvalConfig { max_live_states: args.max_live_states, timeout: timeout(args.timeout_secs) };
    let method = if args.naive { Method::Naive } else { Method::Dp };
    let mut result = l_badness_with(&chain, &obj, args.d, &cfg, method)?;
    write_expected_csv(&args.csv.clone().unwrap_or_else(|| sibling(&args.out, "csv")), &result)?;
    if !args.dump_rsl {
        result = result.without_rsl();
    }
    write_text(&args.out, &serde_json::to_string_pretty(&result)?)?;
    println!("l_badness {} (bscc {}, n {})", result.l_badness, result.argmin_bscc, result.argmin_n);
    Ok(())
}

fn write_table(path: &Path, sigma: &FrStrategy, space: &AugmentedSpace) -> anyhow::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let names: Vec<&str> = (0..space.len()).map(|a| space.name(a)).collect();
    writeln!(w, "from,{}", names.join(","))?;
    for a in 0..space.len() {
        let cells: Vec<String> = (0..space.len())
            .map(|t| match sigma.get(a, t) {
                0.0 => String::new(),
                p => format!("{p:.3}"),
            })
            .collect();
        writeln!(w, "{},{}", names[a], cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let (model, space) = load_model(&args.mdp)?;
    let mut obj = load_objective(&args.objective, &model)?;
    if !obj.is_differentiable() {
        let surrogate = obj.distance_surrogate()?;
        if !args.surrogate {
            eprintln!(
                "interval objectives have zero gradient almost everywhere; rerun with --surrogate to optimize the \
                 L2 distance to the normalized midpoints:\n{}",
                objective_to_json(&surrogate, &model.labeling)?
            );
            return Err(Error::NotDifferentiable.into());
        }
        obj = surrogate;
    }
    let cfg = args.opt.config()?;
    let (run, restarts) = multi_restart(&model.mdp, &model.alloc, &model.labeling, &obj, &cfg)?;

    write_text(&args.out, &strategy_to_json(&run.strategy, &space)?)?;
    let summary = serde_json::json!({
        "config": cfg,
        "seed": run.seed,
        "best_step": run.best_step,
        "comb": run.best,
        "mean_step_secs": run.mean_step_secs(),
        "restarts": restarts,
        "strategy": serde_json::from_str::<serde_json::Value>(&strategy_to_json(&run.strategy, &space)?)?,
    });
    write_text(&sibling(&args.out, "run.json"), &serde_json::to_string_pretty(&summary)?)?;
    let mut trace = String::from("step,comb\n");
    for (i, c) in run.trace.iter().enumerate() {
        trace.push_str(&format!("{i},{c}\n"));
    }
    write_text(&sibling(&args.out, "trace.csv"), &trace)?;
    if args.dump_table {
        write_table(&sibling(&args.out, "table.csv"), &run.strategy, &space)?;
    }
    println!("comb {} (seed {}, step {})", run.best.comb, run.seed, run.best_step);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let opt = OptimizerArgs {
        beta: 0.0,
        gamma: 0.0,
        steps: args.steps,
        restarts: args.restarts,
        seed: args.seed,
        lr: args.lr,
        init_range: args.init_range.clone(),
        freeze_normalizers: args.freeze_normalizers,
    };
    let spec = SweepSpec {
        family: args.instance.family()?,
        betas: parse_grid(&args.beta)?,
        gammas: parse_grid(&args.gamma)?,
        d_range: parse_usize_range(&args.d_range)?,
        synth: opt.config()?,
        eval: EvalConfig { max_live_states: args.max_live_states, timeout: timeout(args.timeout_secs) },
        timings: !args.no_timings,
    };
    let s = run_sweep(&spec, &args.out)?;
    println!(
        "cells run {}, skipped {}, failed {}, rows written {}",
        s.cells_run, s.cells_skipped, s.cells_failed, s.rows_written
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let (lo, hi) = parse_usize_range(&args.n_range)?;
    let ns: Vec<usize> = (lo..=hi).collect();
    let opts = BenchOptions {
        steps: args.steps,
        timeout: Duration::from_secs(args.timeout_secs),
        max_live_states: args.max_live_states,
        seed: args.seed,
        skip_eval: args.skip_eval,
        skip_naive: args.skip_naive,
        ..BenchOptions::default()
    };
    let rows = run_bench(&ns, &opts)?;
    write_rows(&args.out, &rows)?;
    for r in &rows {
        println!(
            "n {} par {} d {} step {:.3e} s eval {} naive {}",
            r.n, r.par, r.d, r.step_secs, r.eval_secs, r.naive_secs
        );
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FREQSTAB_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::InvalidConfig(format!("FREQSTAB_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// 1 for bad input, 2 for resource limits, 3 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_resource() => 2,
        Some(e) if e.is_validation() => 1,
        Some(Error::Io(_)) => 1,
        Some(_) => 3,
        None if err.downcast_ref::<std::io::Error>().is_some() => 1,
        None => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
