use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mergevar::cnf::{parse_dimacs, parse_input_vars};
use mergevar::experiment::{complete_inputs, run_experiment};
use mergevar::merging::count_merging_mappings;
use mergevar::search::{ea_runtime_bound_ln, mvea_runtime_bound_exact, mvea_runtime_bound_ln, mvea_uniform_bound_exponent};
use mergevar::{BitVector, ExperimentConfig};
use toml::{Table, Value};

/// Exit status when a target was set and no run reached it, or when a
/// verified assignment leaves clauses unsatisfied.
const EXIT_UNMET: u8 = 2;

#[derive(Parser)]
#[command(name = "mergevar", version, about = "Merged-variable pseudo-Boolean search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its JSON report.
    Run(Box<RunArgs>),
    /// Count satisfied clauses of a CNF under an assignment.
    Verify(VerifyArgs),
    /// Number of merging mappings of n variables.
    CountMappings {
        #[arg(long)]
        n: usize,
    },
    /// Runtime bounds of the (1+1)-EA and (1+1)-MVEA.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with config keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["onemax", "trap", "maxsat", "upsat"])]
    objective: Option<String>,
    #[arg(long)]
    cnf: Option<PathBuf>,
    #[arg(long)]
    input_vars: Option<PathBuf>,
    #[arg(long, value_parser = ["hc", "mvhc", "ea", "mvea"])]
    algo: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_parser = ["occupancy", "uniform"])]
    map_mode: Option<String>,
    /// Consecutive non-improving mappings that confirm a strong extremum.
    #[arg(long = "K", visible_alias = "k")]
    k: Option<usize>,
    #[arg(long)]
    budget_evals: Option<u64>,
    #[arg(long)]
    max_iterations: Option<u64>,
    #[arg(long)]
    max_stagnation: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    target: Option<f64>,
    #[arg(long)]
    restart: bool,
    #[arg(long, value_parser = ["first", "best"])]
    improvement: Option<String>,
    #[arg(long)]
    block_cap: Option<usize>,
    #[arg(long)]
    mvea_redraw: bool,
    #[arg(long)]
    parallel_repeats: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines improvement log path.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    cnf: PathBuf,
    /// 0/1 string over all variables, or over the input variables only.
    #[arg(long)]
    assignment: String,
    #[arg(long)]
    input_vars: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: Option<usize>,
    /// Largest block size.
    #[arg(long)]
    l: Option<usize>,
    /// Block size of a uniform mapping.
    #[arg(long)]
    delta: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(*args),
        Command::Verify(args) => verify(args),
        Command::CountMappings { n } => count_merging_mappings(n).map(|c| {
            println!("{c}");
            ExitCode::SUCCESS
        }).map_err(Into::into),
        Command::Bounds(args) => bounds(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let config = resolve_config(&args)?;
    let report = run_experiment(&config)?;
    let json = report.to_json();
    match &args.out {
        Some(path) => fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(io::stdout().lock(), "{json}").context("writing the report")?,
    }
    if let Some(path) = &args.log {
        fs::write(path, report.improvement_log()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(match report.any_reached_target() {
        Some(false) => ExitCode::from(EXIT_UNMET),
        _ => ExitCode::SUCCESS,
    })
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut table = match &args.config {
        Some(path) => load_table(path)?,
        None => Table::new(),
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::String(p.display().to_string()));
    let int = |x: Option<u64>| x.map(|x| Value::Integer(x as i64));
    let size = |x: Option<usize>| x.map(|x| Value::Integer(x as i64));
    let text = |s: &Option<String>| s.clone().map(Value::String);
    let flag = |b: bool| b.then_some(Value::Boolean(true));
    if args.k.is_some() {
        table.remove("k");
    }
    let overrides = [
        ("objective", text(&args.objective)),
        ("cnf", path(&args.cnf)),
        ("input_vars", path(&args.input_vars)),
        ("algo", text(&args.algo)),
        ("n", size(args.n)),
        ("r", size(args.r)),
        ("map_mode", text(&args.map_mode)),
        ("K", size(args.k)),
        ("budget_evals", int(args.budget_evals)),
        ("max_iterations", int(args.max_iterations)),
        ("max_stagnation", int(args.max_stagnation)),
        ("seed", int(args.seed)),
        ("repeats", size(args.repeats)),
        ("workers", size(args.workers)),
        ("target", args.target.map(Value::Float)),
        ("restart", flag(args.restart)),
        ("improvement", text(&args.improvement)),
        ("block_cap", size(args.block_cap)),
        ("mvea_redraw", flag(args.mvea_redraw)),
        ("parallel_repeats", flag(args.parallel_repeats)),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            table.insert(key.to_string(), v);
        }
    }
    for key in ["objective", "algo"] {
        if !table.contains_key(key) {
            bail!("{key}: missing (pass --{key} or set it in the config file)");
        }
    }
    Value::Table(table).try_into().context("invalid config")
}

/// Reads a flat TOML config; relative paths inside it are taken relative
/// to the file.
fn load_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("config: reading {}", path.display()))?;
    let mut table: Table = text.parse().with_context(|| format!("config: parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for key in ["cnf", "input_vars"] {
        if let Some(Value::String(p)) = table.get(key) {
            let joined = base.join(p).display().to_string();
            table.insert(key.into(), Value::String(joined));
        }
    }
    Ok(table)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.cnf).with_context(|| format!("cnf: reading {}", args.cnf.display()))?;
    let formula = parse_dimacs(&text).with_context(|| format!("cnf: {}", args.cnf.display()))?;
    let point: BitVector = args
        .assignment
        .trim()
        .parse()
        .context("assignment: expected a string of 0 and 1")?;
    let inputs = match &args.input_vars {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("input_vars: reading {}", p.display()))?;
            Some(parse_input_vars(&text).with_context(|| format!("input_vars: {}", p.display()))?)
        }
        None => formula.input_vars().map(<[usize]>::to_vec),
    };
    let full = if point.len() == formula.num_vars() {
        point
    } else {
        match inputs {
            Some(inputs) if inputs.len() == point.len() => complete_inputs(&formula, &inputs, &point)?,
            _ => bail!(
                "assignment: length {} matches neither the {} variables nor the input variables",
                point.len(),
                formula.num_vars()
            ),
        }
    };
    let satisfied = formula.count_satisfied(&full)?;
    let total = formula.num_clauses();
    println!("{satisfied}/{total} satisfied");
    Ok(if satisfied == total {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_UNMET)
    })
}

fn bounds(args: BoundsArgs) -> Result<ExitCode> {
    let n = args.n;
    println!("ln ea bound: {}", ea_runtime_bound_ln(n)?);
    match (args.r, args.l) {
        (Some(r), Some(l)) => {
            println!("ln mvea bound: {}", mvea_runtime_bound_ln(n, r, l)?);
            if n <= 64 {
                println!("mvea bound: {}", mvea_runtime_bound_exact(n, r, l)?);
            }
        }
        (None, None) => {}
        _ => bail!("r and l must be given together"),
    }
    if let Some(delta) = args.delta {
        println!("uniform exponent: {}", mvea_uniform_bound_exponent(n, delta)?);
    }
    Ok(ExitCode::SUCCESS)
}
