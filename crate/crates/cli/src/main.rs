//! `fbsym`: derive, solve and verify symmetries of a problem file.
//!
//! Exit status: 0 on success, 1 on domain errors and failed verifications,
//! 2 on usage errors.

mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fbsym::determining::Side;
use fbsym::problem::ProblemSpec;

#[derive(Parser, Debug)]
#[command(
    name = "fbsym",
    version,
    about = "Lie point symmetries of FBSDEs and their semi-linear PDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Run every loop sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(ValueEnum, Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Fbsde,
    Pde,
    Both,
}

impl SideArg {
    pub fn sides(self) -> Vec<Side> {
        match self {
            SideArg::Fbsde => vec![Side::Fbsde],
            SideArg::Pde => vec![Side::Pde],
            SideArg::Both => vec![Side::Fbsde, Side::Pde],
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Girsanov,
    Quadratic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormArg {
    FirstOrder,
    Exact,
}

#[derive(Args, Debug, Clone)]
pub struct BoundsArgs {
    /// Ansatz degree in t (default 2).
    #[arg(long)]
    pub deg_t: Option<u32>,
    /// Ansatz degree in x (default max(3, deg H + 1)).
    #[arg(long)]
    pub deg_x: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Time steps x space cells.
    #[arg(long, default_value = "200x400", value_parser = parse_grid)]
    pub grid: (usize, usize),
    #[arg(long, default_value = "-6:6", value_parser = parse_domain, allow_hyphen_values = true)]
    pub domain: (f64, f64),
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the determining systems.
    Derive {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        /// PDE side: derive by second prolongation instead of the closed form.
        #[arg(long)]
        prolongation: bool,
    },
    /// Symmetry basis, commutator table and invariants.
    Solve {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// FBSDE algebra against the PDE algebra and its hat filter.
    Compare {
        problem: PathBuf,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// Remove z from g.
    Reduce {
        problem: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Interval for the map rho (quadratic only).
        #[arg(long, default_value = "-4:4", value_parser = parse_domain, allow_hyphen_values = true)]
        domain: (f64, f64),
        /// Cells for rho (quadratic only, even, >= 16).
        #[arg(long, default_value_t = 256)]
        cells: usize,
    },
    /// Solve the PDE backward and report its residual.
    VerifyPde {
        problem: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Push the PDE solution forward along a generator's flow.
    VerifyFlow {
        problem: PathBuf,
        /// Generator name from `solve --side pde`, or `tau;xi;eta`.
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
        eps: f64,
        /// RK4 steps for the flow.
        #[arg(long, default_value_t = 8)]
        flow_steps: usize,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// Monte-Carlo BSDE defect along Y = u(t, X).
    VerifyFbsde {
        problem: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Step for the Euler scheme (default T/200); must divide T.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Variance ratio of time-changed Brownian increments.
    TimeChangeCheck {
        #[arg(long, default_value = "t")]
        tau: String,
        #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormArg::FirstOrder)]
        form: FormArg,
    },
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN, got `{s}`"))?;
    let m: usize = m
        .trim()
        .parse()
        .map_err(|_| format!("bad time steps `{m}`"))?;
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| format!("bad space cells `{n}`"))?;
    if m == 0 || n < 6 {
        return Err("need at least 1 time step and 6 space cells".into());
    }
    Ok((m, n))
}

fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected a:b, got `{s}`"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound `{a}`"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound `{b}`"))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(format!("need a < b, got {a}:{b}"));
    }
    Ok((a, b))
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.to_string())
    }
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    ProblemSpec::from_file_text(&text)
        .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

/// One run's output: a plain-text summary and a structured document.
pub struct Report {
    pub command: &'static str,
    pub text: String,
    pub json: serde_json::Value,
    /// Set when a verification did not meet its threshold.
    pub failed: Option<String>,
}

fn emit(report: &Report, out: &OutputArgs) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(&report.json).expect("reports serialize") + "\n";
    let want_text = matches!(out.format, Format::Text | Format::Both);
    let want_json = matches!(out.format, Format::Json | Format::Both);
    match &out.out {
        None => {
            if want_text {
                print!("{}", report.text);
            }
            if want_json {
                print!("{json}");
            }
        }
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::Domain(format!("{}: {e}", dir.display())))?;
            let write = |ext: &str, body: &str| -> Result<(), Failure> {
                let p = dir.join(format!("{}.{ext}", report.command));
                fs::write(&p, body)
                    .map_err(|e| Failure::Domain(format!("{}: {e}", p.display())))?;
                println!("wrote {}", p.display());
                Ok(())
            };
            if want_text {
                write("txt", &report.text)?;
            }
            if want_json {
                write("json", &json)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::run(&cli).and_then(|r| emit(&r, &cli.output).map(|_| r));
    match result {
        Ok(r) => match r.failed {
            None => ExitCode::SUCCESS,
            Some(why) => {
                eprintln!("verification failed: {why}");
                ExitCode::from(1)
            }
        },
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
