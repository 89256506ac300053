//! `betasplit` command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification, 2 usage or configuration
//! error. Errors are also written to stderr as one JSON object.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use betasplit::chain_sim::{exact_law, to_f64, ExactLaw};
use betasplit::limits::{critical_constants, LimitModel};
use betasplit::sampling::{simulate, Generator, SimSpec};
use betasplit::stat_tests::SampleMatrix;
use betasplit::subord_sim::DEFAULT_EPS;
use betasplit::tree_sim::Mode;
use betasplit::verify::{run_suite, CriterionOutcome, Suite};

/// Environment variable naming the directory for relative `--output` paths.
const OUT_DIR_ENV: &str = "BETASPLIT_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "betasplit", version, about = "Critical beta-splitting trees and the matching occupancy scheme")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact law of the decrement counts and edge-height at size n.
    Exact {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        j: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Replicated simulation written as a sample matrix.
    Simulate {
        #[arg(long, value_enum)]
        generator: GeneratorArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 3)]
        j: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Continuous)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run one acceptance suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Write the full reports as JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Limit constants, centering coefficients and covariance.
    Limits {
        #[arg(long, default_value_t = 3)]
        j: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum GeneratorArg {
    Tree,
    Chain,
    Occupancy,
    Subordinator,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Discrete,
    Continuous,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SuiteArg {
    Coupling,
    Clt,
    Phi,
    Occupancy,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<betasplit::Error> for Failure {
    fn from(e: betasplit::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o: {e}"))
    }
}

fn report_error(kind: &str, message: String) {
    let rec = ErrorRecord { error: kind, message };
    eprintln!("{}", serde_json::to_string(&rec).expect("plain record"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end().to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            report_error("invalid", msg);
            ExitCode::from(2)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn resolve_output(path: PathBuf) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path,
    }
}

fn emit(text: &str, output: Option<PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => {
            let path = resolve_output(path);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Exact { n, j, format } => {
            let law = exact_law(n, j)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&exact_json(&law)).expect("serializable") + "\n",
                _ => exact_text(&law),
            };
            emit(&text, None)
        }
        Command::Simulate {
            generator,
            n,
            reps,
            beta,
            j,
            mode,
            eps,
            seed,
            threads,
            output,
            format,
        } => {
            set_threads(threads)?;
            let spec = SimSpec {
                generator: match generator {
                    GeneratorArg::Tree => Generator::Tree,
                    GeneratorArg::Chain => Generator::Chain,
                    GeneratorArg::Occupancy => Generator::Occupancy,
                    GeneratorArg::Subordinator => Generator::Subordinator,
                },
                n,
                reps,
                j,
                beta,
                mode: match mode {
                    ModeArg::Discrete => Mode::Discrete,
                    ModeArg::Continuous => Mode::Continuous,
                },
                eps,
                seed,
            };
            let samples = simulate(&spec)?;
            let text = match format {
                Format::Json => serde_json::to_string(&samples).expect("finite values") + "\n",
                _ => to_csv(&samples),
            };
            emit(&text, output)
        }
        Command::Verify {
            suite,
            seed,
            threads,
            output,
        } => {
            set_threads(threads)?;
            let suite = match suite {
                SuiteArg::Coupling => Suite::Coupling,
                SuiteArg::Clt => Suite::Clt,
                SuiteArg::Phi => Suite::Phi,
                SuiteArg::Occupancy => Suite::Occupancy,
            };
            let outcomes = run_suite(suite, seed)?;
            let mut text = String::new();
            for o in &outcomes {
                writeln!(text, "{}", o.one_line()).unwrap();
                for r in &o.reports {
                    writeln!(text, "    {}", r.one_line()).unwrap();
                }
            }
            emit(&text, None)?;
            if let Some(path) = output {
                emit(&(serde_json::to_string_pretty(&outcomes).expect("serializable") + "\n"), Some(path))?;
            }
            if outcomes.iter().all(|o: &CriterionOutcome| o.pass) {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Command::Limits { j, format } => {
            let model = LimitModel::new(j);
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&limits_json(&model)).expect("serializable") + "\n",
                _ => limits_text(&model),
            };
            emit(&text, None)
        }
    }
}

fn to_csv(s: &SampleMatrix) -> String {
    let mut out = String::from("replicate,n");
    for l in &s.labels {
        write!(out, ",stat:{l}").unwrap();
    }
    out.push('\n');
    for (i, row) in s.values.iter().enumerate() {
        write!(out, "{i},{}", s.n).unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Atom {
    value: u32,
    probability: String,
    approx: f64,
}

#[derive(Serialize)]
struct ExactJson {
    n: usize,
    j: usize,
    edge_height: Vec<Atom>,
    decrement_counts: Vec<Vec<Atom>>,
    mean_edge_height: String,
    mean_time_height: String,
    variance_time_height: String,
}

fn atoms(m: &std::collections::BTreeMap<u32, betasplit::chain_sim::BigRational>) -> Vec<Atom> {
    m.iter()
        .map(|(&value, p)| Atom {
            value,
            probability: p.to_string(),
            approx: to_f64(p),
        })
        .collect()
}

fn exact_json(law: &ExactLaw) -> ExactJson {
    ExactJson {
        n: law.n,
        j: law.j,
        edge_height: atoms(&law.steps_marginal()),
        decrement_counts: (1..=law.j).map(|r| atoms(&law.count_marginal(r).unwrap_or_default())).collect(),
        mean_edge_height: law.mean_steps().to_string(),
        mean_time_height: law.mean_hold.to_string(),
        variance_time_height: law.variance_hold().to_string(),
    }
}

fn exact_text(law: &ExactLaw) -> String {
    let n = law.n;
    let mut out = String::new();
    writeln!(out, "exact law at n = {n}, j = {}", law.j).unwrap();
    for a in atoms(&law.steps_marginal()) {
        writeln!(out, "P{{L_{n}={}}} = {} ({:.6})", a.value, a.probability, a.approx).unwrap();
    }
    for r in 1..=law.j {
        for a in atoms(&law.count_marginal(r).unwrap_or_default()) {
            writeln!(out, "P{{L_{n},{r}={}}} = {} ({:.6})", a.value, a.probability, a.approx).unwrap();
        }
    }
    let mean_steps = law.mean_steps();
    writeln!(out, "E[L_{n}] = {} ({:.6})", mean_steps, to_f64(&mean_steps)).unwrap();
    writeln!(out, "E[D_{n}] = {} ({:.6})", law.mean_hold, to_f64(&law.mean_hold)).unwrap();
    let var = law.variance_hold();
    writeln!(out, "Var[D_{n}] = {} ({:.6})", var, to_f64(&var)).unwrap();
    out
}

#[derive(Serialize)]
struct LimitsJson {
    zeta2: f64,
    two_zeta3: f64,
    a2: f64,
    correlation_l_d: f64,
    /// Coefficients `c` in the centerings `c · log n` (or `c · log² n` for L).
    centering: Vec<(String, f64)>,
    labels: Vec<String>,
    covariance: Vec<Vec<f64>>,
}

fn limits_json(model: &LimitModel) -> LimitsJson {
    let c = critical_constants();
    let mut centering: Vec<(String, f64)> = (1..=model.j).map(|r| (format!("L_{r}"), 1.0 / (c.m1 * r as f64))).collect();
    centering.push(("L".into(), 1.0 / (2.0 * c.m1)));
    centering.push(("D".into(), 1.0 / c.m1));
    LimitsJson {
        zeta2: c.m1,
        two_zeta3: c.m2,
        a2: c.a2,
        correlation_l_d: model.correlation_l_d(),
        centering,
        labels: model.labels(),
        covariance: model.covariance.rows(),
    }
}

fn limits_text(model: &LimitModel) -> String {
    let l = limits_json(model);
    let mut out = String::new();
    writeln!(out, "zeta(2) = {:.10}", l.zeta2).unwrap();
    writeln!(out, "2 zeta(3) = {:.10}", l.two_zeta3).unwrap();
    writeln!(out, "a^2 = 2 zeta(3) / zeta(2)^3 = {:.10}", l.a2).unwrap();
    writeln!(out, "correlation(L, D) = {:.4}", l.correlation_l_d).unwrap();
    writeln!(out, "centering:").unwrap();
    for (label, coef) in &l.centering {
        let power = if label == "L" { "log^2 n" } else { "log n" };
        writeln!(out, "  {label}: {coef:.10} * {power}").unwrap();
    }
    writeln!(out, "covariance ({}):", l.labels.join(", ")).unwrap();
    for row in &l.covariance {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>10.6}")).collect();
        writeln!(out, "  {}", cells.join(" ")).unwrap();
    }
    out
}
