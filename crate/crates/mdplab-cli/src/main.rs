//! Command-line front door: MDP file I/O, solver dispatch, LP export, and
//! the scripted experiments, with the exit-code contract
//! 0 = converged/ok, 1 = input error, 2 = non-convergence or failed check.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mdplab::experiment::{format_f64, run_experiment, ExperimentKind, ExperimentSpec};
use mdplab::families;
use mdplab::io;
use mdplab::lp;
use mdplab::mdp::{DeterministicPolicy, Mdp, ValueVector};
use mdplab::solve::{
    modified_policy_iteration, policy_iteration, simple_policy_iteration, value_iteration,
    SolveReport, StoppingRule,
};

#[derive(Parser)]
#[command(
    name = "mdplab",
    version,
    about = "Tabular Markov-decision-problem solver laboratory",
    after_help = "Generator specs take the form family:key=value,... e.g. mc90:n=10,gamma=0.95 \
                  | fig2:gamma=0.9 | random:n=5,m=3,gamma=0.9,seed=42 \
                  | rational:n=4,m=2,gamma=0.9,bits=8,seed=1"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an MDP with one of the six algorithms
    Solve(SolveArgs),
    /// Build a benchmark or random instance and write it as an MDP document
    Generate(GenerateArgs),
    /// Run a scripted experiment and emit its CSV table
    Experiment(ExperimentArgs),
    /// Export the primal or dual linear program as an LP text file
    ExportLp(ExportLpArgs),
    /// Cross-check all solution routes against the brute-force oracle
    Crosscheck(CrosscheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    #[value(name = "vi")]
    ValueIteration,
    #[value(name = "pi")]
    PolicyIteration,
    #[value(name = "spi")]
    SimplePolicyIteration,
    #[value(name = "mpi")]
    ModifiedPolicyIteration,
    #[value(name = "lp-primal")]
    LpPrimal,
    #[value(name = "lp-dual")]
    LpDual,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    /// Path to an MDP document (JSON)
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    /// Inline generator spec instead of a file
    #[arg(long)]
    generate: Option<String>,
    /// Override the generator's discount rate
    #[arg(long)]
    gamma: Option<f64>,
    /// Override the generator's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Solution algorithm
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    /// Target suboptimality for value iteration (default 1e-6 when no
    /// iteration budget is given)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration budget for value iteration
    #[arg(long)]
    max_iters: Option<usize>,
    /// Partial-evaluation sweeps for modified policy iteration
    #[arg(long, default_value_t = 5)]
    sweeps: usize,
    /// Write a per-iteration CSV trace here
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format on stdout
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator spec, e.g. mc90:n=10,gamma=0.95
    #[arg(long, value_name = "SPEC")]
    generate: String,
    /// Override the generator's discount rate
    #[arg(long)]
    gamma: Option<f64>,
    /// Override the generator's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the MDP document
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// mc90-scaling | vi-gamma-scaling | cross-check | stopping-rule
    #[arg(long)]
    kind: String,
    /// Ladder sizes, comma separated (mc90-scaling)
    #[arg(long, value_delimiter = ',')]
    n_values: Vec<usize>,
    /// Discount rates, comma separated
    #[arg(long, value_delimiter = ',')]
    gamma_values: Vec<f64>,
    /// Number of seeds 0..n (cross-check, stopping-rule)
    #[arg(long)]
    num_seeds: Option<u64>,
    /// Epsilons, comma separated (stopping-rule)
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<f64>,
    /// Largest state count for random instances
    #[arg(long, default_value_t = 6)]
    max_states: usize,
    /// Largest action count for random instances
    #[arg(long, default_value_t = 3)]
    max_actions: usize,
    /// Write the CSV table here (stdout table otherwise)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Stdout format
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
}

#[derive(Args)]
struct ExportLpArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Which formulation to export
    #[arg(long, value_enum)]
    which: WhichLp,
    /// Where to write the LP text file
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WhichLp {
    Primal,
    Dual,
}

#[derive(Args)]
struct CrosscheckArgs {
    /// Number of seeds 0..n
    #[arg(long, default_value_t = 10)]
    num_seeds: u64,
    #[arg(long, default_value_t = 6)]
    max_states: usize,
    #[arg(long, default_value_t = 3)]
    max_actions: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Disagreement tolerance for the exit code
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    /// Write the CSV table here as well
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::ExportLp(args) => cmd_export_lp(args),
        Command::Crosscheck(args) => cmd_crosscheck(args),
    }
}

/// Parsed `family:key=value,...` generator spec.
struct GeneratorSpec {
    family: String,
    n: Option<usize>,
    m: Option<usize>,
    gamma: Option<f64>,
    seed: Option<u64>,
    bits: Option<u32>,
}

fn parse_generator_spec(text: &str) -> Result<GeneratorSpec> {
    let (family, rest) = match text.split_once(':') {
        Some((f, r)) => (f, r),
        None => (text, ""),
    };
    let mut spec = GeneratorSpec {
        family: family.to_ascii_lowercase(),
        n: None,
        m: None,
        gamma: None,
        seed: None,
        bits: None,
    };
    for pair in rest.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("malformed generator parameter `{pair}` (expected key=value)"))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let ctx = || format!("invalid value `{value}` for generator parameter `{key}`");
        match key.as_str() {
            "n" => spec.n = Some(value.parse().with_context(ctx)?),
            "m" => spec.m = Some(value.parse().with_context(ctx)?),
            "gamma" => spec.gamma = Some(value.parse().with_context(ctx)?),
            "seed" => spec.seed = Some(value.parse().with_context(ctx)?),
            "bits" => spec.bits = Some(value.parse().with_context(ctx)?),
            other => bail!("unknown generator parameter `{other}`"),
        }
    }
    Ok(spec)
}

fn build_from_spec(spec: &GeneratorSpec) -> Result<Mdp<f64>> {
    let gamma = spec.gamma;
    match spec.family.as_str() {
        "mc90" => {
            let n = spec.n.ok_or_else(|| anyhow!("mc90 needs n=<even state count>"))?;
            let inst = families::mc90_family(n, gamma.unwrap_or(families::MC90_DEFAULT_GAMMA))?;
            Ok(inst.mdp)
        }
        "fig2" | "vi-lower-bound" => {
            let gamma = gamma.ok_or_else(|| anyhow!("fig2 needs gamma=<discount>"))?;
            ensure_discount(gamma)?;
            Ok(families::vi_lower_bound_family(gamma).mdp)
        }
        "random" => {
            let n = spec.n.ok_or_else(|| anyhow!("random needs n=<states>"))?;
            let m = spec.m.ok_or_else(|| anyhow!("random needs m=<actions>"))?;
            let gamma = gamma.unwrap_or(0.9);
            ensure_discount(gamma)?;
            Ok(families::random_mdp(n, m, gamma, spec.seed.unwrap_or(0)))
        }
        "rational" => {
            let n = spec.n.ok_or_else(|| anyhow!("rational needs n=<states>"))?;
            let m = spec.m.ok_or_else(|| anyhow!("rational needs m=<actions>"))?;
            let bits = spec.bits.ok_or_else(|| anyhow!("rational needs bits=<denominator bits>"))?;
            let gamma = gamma.unwrap_or(0.9);
            ensure_discount(gamma)?;
            Ok(families::random_rational_mdp(n, m, gamma, bits, spec.seed.unwrap_or(0)))
        }
        other => bail!("unknown generator family `{other}` (expected mc90, fig2, random or rational)"),
    }
}

fn ensure_discount(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        bail!("discount {gamma} outside the open interval (0, 1)")
    }
}

fn load_input(input: &InputArgs) -> Result<Mdp<f64>> {
    match (&input.input, &input.generate) {
        (Some(path), None) => Ok(io::load_mdp(path)?),
        (None, Some(text)) => {
            let mut spec = parse_generator_spec(text)?;
            if input.gamma.is_some() {
                spec.gamma = input.gamma;
            }
            if input.seed.is_some() {
                spec.seed = input.seed;
            }
            build_from_spec(&spec)
        }
        (None, None) => bail!("provide either --input <file> or --generate <spec>"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let mdp = load_input(&args.input)?;
    let report = match args.algorithm {
        AlgorithmArg::ValueIteration => {
            let rule = match (args.epsilon, args.max_iters) {
                (Some(eps), None) => StoppingRule::epsilon_target(eps)?,
                (Some(eps), Some(n)) => StoppingRule::epsilon_target(eps)?.with_max_iterations(n),
                (None, Some(n)) => StoppingRule::max_iterations(n),
                (None, None) => StoppingRule::epsilon_target(1e-6)?,
            };
            value_iteration(&mdp, &ValueVector::zeros(mdp.n_states()), &rule)
        }
        AlgorithmArg::PolicyIteration => {
            policy_iteration(&mdp, &DeterministicPolicy::zeros(mdp.n_states()))
        }
        AlgorithmArg::SimplePolicyIteration => {
            simple_policy_iteration(&mdp, &DeterministicPolicy::zeros(mdp.n_states()))
        }
        AlgorithmArg::ModifiedPolicyIteration => {
            if args.sweeps == 0 {
                bail!("--sweeps must be at least 1");
            }
            modified_policy_iteration(&mdp, &DeterministicPolicy::zeros(mdp.n_states()), args.sweeps)
        }
        AlgorithmArg::LpPrimal | AlgorithmArg::LpDual => {
            return solve_by_lp(&mdp, args.algorithm, &args);
        }
    };

    print_report(&report, args.format);
    if let Some(path) = &args.output {
        fs::write(path, iteration_trace_csv(&report))
            .with_context(|| format!("cannot write trace to {}", path.display()))?;
    }
    Ok(if report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn solve_by_lp(mdp: &Mdp<f64>, which: AlgorithmArg, args: &SolveArgs) -> Result<ExitCode> {
    let (label, program) = match which {
        AlgorithmArg::LpPrimal => ("lp-primal", lp::build_primal(mdp)),
        AlgorithmArg::LpDual => ("lp-dual", lp::build_dual(mdp)),
        _ => unreachable!(),
    };
    let solution = lp::solve_lp(&program)?;
    let optimal = solution.status == lp::LpStatus::Optimal;

    let (values, policy) = if optimal {
        let raw = solution.values.clone().expect("optimal solutions carry values");
        match which {
            AlgorithmArg::LpPrimal => {
                let v = ValueVector::new(raw);
                let policy = mdp.greedy_policy(&v);
                (v, policy)
            }
            _ => {
                let policy = lp::stochastic_to_deterministic(&raw, mdp.n_states(), mdp.n_actions());
                let v = mdp.evaluate_policy(&policy)?;
                (v, policy)
            }
        }
    } else {
        (ValueVector::zeros(mdp.n_states()), DeterministicPolicy::zeros(mdp.n_states()))
    };

    let mut out = String::new();
    match args.format {
        FormatArg::Table => {
            writeln!(out, "algorithm:  {label}")?;
            writeln!(out, "status:     {:?}", solution.status)?;
            writeln!(out, "pivots:     {}", solution.pivots)?;
            if let Some(obj) = solution.objective_value {
                writeln!(out, "objective:  {obj}")?;
            }
            if optimal {
                writeln!(out, "values:     [{}]", join_floats(values.as_slice()))?;
                writeln!(out, "policy:     {:?}", policy.actions())?;
            }
        }
        FormatArg::Csv => {
            writeln!(out, "field,value")?;
            writeln!(out, "algorithm,{label}")?;
            writeln!(out, "status,{:?}", solution.status)?;
            writeln!(out, "pivots,{}", solution.pivots)?;
            if let Some(obj) = solution.objective_value {
                writeln!(out, "objective,{}", format_f64(obj))?;
            }
            if optimal {
                for (i, &v) in values.as_slice().iter().enumerate() {
                    writeln!(out, "value_{i},{}", format_f64(v))?;
                }
                for (i, &a) in policy.actions().iter().enumerate() {
                    writeln!(out, "policy_{i},{a}")?;
                }
            }
        }
    }
    print!("{out}");
    if let Some(path) = &args.output {
        let mut csv = String::from("variable,value\n");
        if let Some(raw) = &solution.values {
            for (name, &v) in program.variable_names.iter().zip(raw) {
                let _ = writeln!(csv, "{name},{}", format_f64(v));
            }
        }
        fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(if optimal { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn print_report(report: &SolveReport<f64>, format: FormatArg) {
    match format {
        FormatArg::Table => {
            println!("algorithm:      {}", report.algorithm);
            println!("converged:      {}", report.converged);
            println!("iterations:     {}", report.iterations);
            if let Some(r) = report.residual_history.last() {
                println!("final residual: {r:e}");
            }
            let total: f64 = report.values.as_slice().iter().sum();
            println!("total value:    {total}");
            println!("values:         [{}]", join_floats(report.values.as_slice()));
            println!("policy:         {:?}", report.policy.actions());
        }
        FormatArg::Csv => {
            println!("field,value");
            println!("algorithm,{}", report.algorithm);
            println!("converged,{}", report.converged);
            println!("iterations,{}", report.iterations);
            if let Some(r) = report.residual_history.last() {
                println!("final_residual,{}", format_f64(*r));
            }
            for (i, &v) in report.values.as_slice().iter().enumerate() {
                println!("value_{i},{}", format_f64(v));
            }
            for (i, &a) in report.policy.actions().iter().enumerate() {
                println!("policy_{i},{a}");
            }
        }
    }
}

fn iteration_trace_csv(report: &SolveReport<f64>) -> String {
    let mut out = String::from("iteration,residual,policy_changes\n");
    let blank = String::new();
    for i in 0..report.residual_history.len().max(report.policy_change_history.len()) {
        let residual = report
            .residual_history
            .get(i)
            .map(|r| format_f64(*r))
            .unwrap_or_else(|| blank.clone());
        let changes = report
            .policy_change_history
            .get(i)
            .map(usize::to_string)
            .unwrap_or_else(|| blank.clone());
        let _ = writeln!(out, "{},{residual},{changes}", i + 1);
    }
    out
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let mut spec = parse_generator_spec(&args.generate)?;
    if args.gamma.is_some() {
        spec.gamma = args.gamma;
    }
    if args.seed.is_some() {
        spec.seed = args.seed;
    }
    let mdp = build_from_spec(&spec)?;
    io::save_mdp(&mdp, &args.output)?;
    println!(
        "wrote {} ({} states, {} actions, discount {})",
        args.output.display(),
        mdp.n_states(),
        mdp.n_actions(),
        mdp.discount()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let kind: ExperimentKind = args.kind.parse().map_err(|e: String| anyhow!(e))?;
    let seeds = |default: u64| -> Vec<u64> { (0..args.num_seeds.unwrap_or(default)).collect() };
    let spec = match kind {
        ExperimentKind::Mc90Scaling => {
            let n_values = if args.n_values.is_empty() {
                vec![6, 8, 10, 12, 14]
            } else {
                args.n_values.clone()
            };
            let gammas = if args.gamma_values.is_empty() {
                vec![0.95, 0.999]
            } else {
                args.gamma_values.clone()
            };
            ExperimentSpec::mc90_scaling(n_values, gammas)
        }
        ExperimentKind::ViGammaScaling => {
            let gammas = if args.gamma_values.is_empty() {
                vec![0.5, 0.9, 0.99, 0.999]
            } else {
                args.gamma_values.clone()
            };
            ExperimentSpec::vi_gamma_scaling(gammas)
        }
        ExperimentKind::CrossCheck => {
            let gamma = args.gamma_values.first().copied().unwrap_or(0.9);
            ExperimentSpec::cross_check(seeds(100), args.max_states, args.max_actions, gamma)
        }
        ExperimentKind::StoppingRule => {
            let gamma = args.gamma_values.first().copied().unwrap_or(0.9);
            let epsilons = if args.epsilons.is_empty() {
                vec![0.1, 0.01]
            } else {
                args.epsilons.clone()
            };
            ExperimentSpec::stopping_rule(epsilons, seeds(50), gamma)
        }
    };
    let table = run_experiment(&spec)?;
    match (&args.output, args.format) {
        (Some(path), _) => {
            fs::write(path, table.to_csv())
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("{}", table.summary);
            println!("wrote {}", path.display());
        }
        (None, FormatArg::Csv) => print!("{}", table.to_csv()),
        (None, FormatArg::Table) => {
            print!("{}", table.to_table());
            println!("{}", table.summary);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export_lp(args: ExportLpArgs) -> Result<ExitCode> {
    let mdp = load_input(&args.input)?;
    let program = match args.which {
        WhichLp::Primal => lp::build_primal(&mdp),
        WhichLp::Dual => lp::build_dual(&mdp),
    };
    fs::write(&args.output, lp::export_lp(&program))
        .with_context(|| format!("cannot write {}", args.output.display()))?;
    println!(
        "wrote {} ({} variables, {} constraints)",
        args.output.display(),
        program.n_variables(),
        program.n_constraints()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_crosscheck(args: CrosscheckArgs) -> Result<ExitCode> {
    ensure_discount(args.gamma)?;
    let spec = ExperimentSpec::cross_check(
        (0..args.num_seeds).collect(),
        args.max_states,
        args.max_actions,
        args.gamma,
    );
    let table = run_experiment(&spec)?;
    if let Some(path) = &args.output {
        fs::write(path, table.to_csv())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{}", table.to_table());
    println!("{}", table.summary);
    let worst = table
        .rows
        .iter()
        .map(|r| r[9].parse::<f64>().expect("max_disagreement column parses"))
        .fold(0.0f64, f64::max);
    if worst <= args.tolerance {
        println!("crosscheck ok: worst disagreement {worst:e} within {:e}", args.tolerance);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("crosscheck FAILED: worst disagreement {worst:e} above {:e}", args.tolerance);
        Ok(ExitCode::from(2))
    }
}
