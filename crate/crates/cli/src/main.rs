use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relsens::config::{AnalysisConfig, AnalysisMethod};
use relsens::error::Error;
use relsens::form::FormResult;
use relsens::harness::{format_sig, run_study, StudySummary};
use relsens::sampling::Method;

const THREADS_ENV: &str = "RELSENS_THREADS";

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "relsens", version, about = "Reliability analysis with variance-based reliability sensitivities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design point search and alpha-based indices
    Form(Common),
    /// Monte Carlo simulation
    Mcs(Common),
    /// Importance sampling around the configured center
    Is(Common),
    /// Repeated runs with the method from the config file
    Study(Common),
    /// Check the configuration file and exit
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Analysis file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Number of samples per run (overrides the file)
    #[arg(long)]
    samples: Option<usize>,
    /// Base seed (overrides the file)
    #[arg(long)]
    seed: Option<u64>,
    /// Variance step for the central differences (overrides the file)
    #[arg(long = "delta-var")]
    delta_var: Option<f64>,
    /// Number of runs (overrides the file)
    #[arg(long)]
    runs: Option<usize>,
    /// Write results here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    JsonLines,
}

enum Failure {
    Lib(Error),
    Usage(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("{msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be a positive integer"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn report(f: Failure) -> ExitCode {
    let (code, body) = match f {
        Failure::Lib(Error::Config { field, message }) => {
            (EXIT_CONFIG, serde_json::json!({"status": "config_error", "field": field, "message": message}))
        }
        Failure::Lib(e) => (
            EXIT_NUMERICAL,
            serde_json::json!({"status": "numerical_error", "kind": kind_name(&e), "message": e.to_string()}),
        ),
        Failure::Usage(message) => (EXIT_CONFIG, serde_json::json!({"status": "config_error", "message": message})),
        Failure::Io(e) => (EXIT_IO, serde_json::json!({"status": "io_error", "message": e.to_string()})),
    };
    eprintln!("{body}");
    ExitCode::from(code)
}

fn kind_name(e: &Error) -> String {
    let e = match e {
        Error::Run { source, .. } => source.as_ref(),
        e => e,
    };
    let debug = format!("{e:?}");
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn load(args: &Common) -> Result<AnalysisConfig, Failure> {
    let mut cfg = AnalysisConfig::from_path(&args.config)?;
    let a = &mut cfg.analysis;
    if let Some(n) = args.samples {
        if n == 0 {
            return Err(Failure::Usage("--samples must be positive".into()));
        }
        a.n_samples = vec![n];
    }
    if let Some(seed) = args.seed {
        a.seed = seed;
    }
    if let Some(d) = args.delta_var {
        if d <= 0.0 || !d.is_finite() {
            return Err(Failure::Usage("--delta-var must be positive".into()));
        }
        a.delta_vars = vec![d];
    }
    if let Some(r) = args.runs {
        if r == 0 {
            return Err(Failure::Usage("--runs must be at least 1".into()));
        }
        a.runs = r;
    }
    Ok(cfg)
}

fn sink(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(args) => {
            let cfg = load(&args)?;
            let mut out = sink(&args.output)?;
            writeln!(
                out,
                "ok: {} variables ({}), limit state inputs ({})",
                cfg.model.dim(),
                cfg.model.names().join(", "),
                cfg.model.limit_state().input_names().join(", ")
            )?;
            Ok(())
        }
        Command::Form(args) => {
            let cfg = load(&args)?;
            let r = cfg.form()?;
            write_form(&cfg, &r, args.format, sink(&args.output)?)
        }
        Command::Mcs(args) => sampling(args, Method::MonteCarlo, false),
        Command::Is(args) => sampling(args, Method::ImportanceSampling, false),
        Command::Study(args) => {
            let method = match load(&args)?.analysis.method {
                AnalysisMethod::Is => Method::ImportanceSampling,
                AnalysisMethod::Mcs | AnalysisMethod::Form => Method::MonteCarlo,
            };
            sampling(args, method, true)
        }
    }
}

fn sampling(args: Common, method: Method, study: bool) -> Result<(), Failure> {
    let mut cfg = load(&args)?;
    if !study && args.runs.is_none() {
        cfg.analysis.runs = 1;
    }
    let study_cfg = cfg.study(method)?;
    let mut summary = run_study(&study_cfg)?;
    summary.reference = cfg.form_reference().ok();
    write_summary(&summary, args.format, sink(&args.output)?)
}

fn write_summary(s: &StudySummary, format: Format, mut out: Box<dyn Write>) -> Result<(), Failure> {
    match format {
        Format::Text => {
            out.write_all(s.to_text().as_bytes())?;
            writeln!(out, "wall time: {:.3} s", s.wall_time_s)?;
        }
        Format::Csv => s.write_csv(&mut out)?,
        Format::JsonLines => s.write_json_lines(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn write_form(cfg: &AnalysisConfig, r: &FormResult, format: Format, mut out: Box<dyn Write>) -> Result<(), Failure> {
    let names = cfg.model.names();
    let indices = r.indices()?;
    let x_star = cfg.model.transform().u_to_x(&r.u_star)?;
    match format {
        Format::Text => {
            let col = 12;
            let mut header = format!("{:16}{:>col$}", "", "beta");
            let mut row = format!("{:16}{:>col$}", "FORM", format_sig(r.beta));
            for (name, s) in names.iter().zip(&indices) {
                header.push_str(&format!("{:>col$}", format!("S_{name}")));
                row.push_str(&format!("{:>col$}", format_sig(*s)));
            }
            writeln!(out, "{header}")?;
            writeln!(out, "{}", "-".repeat(header.len()))?;
            writeln!(out, "{row}")?;
            writeln!(out)?;
            writeln!(out, "pf = {}, {} iterations", format_sig(r.pf), r.iterations)?;
            writeln!(out, "{:16}{:>col$}{:>col$}{:>col$}", "design point", "u*", "x*", "alpha")?;
            for k in 0..names.len() {
                writeln!(
                    out,
                    "{:16}{:>col$}{:>col$}{:>col$}",
                    names[k],
                    format_sig(r.u_star[k]),
                    format_sig(x_star[k]),
                    format_sig(r.alpha[k])
                )?;
            }
        }
        Format::Csv => {
            let mut header = String::from("method,N,delta_var,run,beta_hat");
            let mut row = format!("form,,,,{}", format_sig(r.beta));
            for (k, s) in indices.iter().enumerate() {
                header.push_str(&format!(",S_{}", k + 1));
                row.push_str(&format!(",{}", format_sig(*s)));
            }
            writeln!(out, "{header}")?;
            writeln!(out, "{row}")?;
        }
        Format::JsonLines => {
            let line = serde_json::json!({
                "type": "form",
                "variables": names,
                "beta": r.beta,
                "pf": r.pf,
                "indices": indices,
                "u_star": r.u_star,
                "x_star": x_star,
                "alpha": r.alpha,
                "converged": r.converged,
                "iterations": r.iterations,
            });
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}
