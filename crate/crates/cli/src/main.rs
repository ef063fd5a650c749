use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use su2pdo::calculus::{self, SolveGrids, SymbolExpansion};
use su2pdo::expr::{default_x_grid, parse_operator, OperatorExpr};
use su2pdo::fourier::{self, QuadratureGrid};
use su2pdo::io;
use su2pdo::symbol::{self, Symbol};
use su2pdo::{checks, Error, HalfInteger};

const DEFAULT_SEED: u64 = 20240601;

#[derive(Parser, Debug)]
#[command(name = "su2pdo", version, about = "Symbol calculus for pseudo-differential operators on SU(2)")]
struct Cli {
    /// Band limit L, doubled (8 means L = 4).
    #[arg(long, global = true, default_value_t = 8)]
    band_limit_x2: u32,
    /// Expansion order N for compose, adjoint, parametrix and solve.
    #[arg(short = 'N', long = "order", global = true, default_value_t = 2)]
    order: u32,
    /// Band (doubled) of the x-grid used for x-dependent symbols.
    #[arg(long, global = true, default_value_t = 4)]
    x_band_x2: u32,
    /// Fix RNG seeds and summation order.
    #[arg(long, global = true)]
    deterministic: bool,
    /// RNG seed used by check suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON result here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grid-function file -> coefficient file.
    Analyze { input: PathBuf },
    /// Coefficient file -> grid-function file on the default grid of the band.
    Synthesize { input: PathBuf },
    /// Symbol file of an operator expression.
    Symbol { operator: String },
    /// Difference Δ₊^a Δ₋^b Δ₀^c of a symbol.
    Diff {
        /// Operator expression or symbol file (`*.json`).
        operand: String,
        /// Exponents of Δ₊, Δ₋, Δ₀ as `a,b,c`.
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 0, 0])]
        alpha: Vec<u32>,
    },
    /// Truncated composition expansion of two symbols.
    Compose { left: String, right: String },
    /// Truncated adjoint expansion.
    Adjoint { operand: String },
    /// Sum of the parametrix terms B₀ + … + B_N.
    Parametrix { operand: String },
    /// Apply an operator expression to a coefficient file.
    Apply { operator: String, input: PathBuf },
    /// Solve A f = g.
    Solve {
        operator: String,
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        /// Extra levels (doubled) kept in f beyond the band of g.
        #[arg(long, default_value_t = 8)]
        extra_x2: u32,
    },
    /// Run a self-check suite (`all` for every suite).
    Check { suite: String },
    /// Describe the default quadrature grid of the band.
    Grid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Exact,
    Parametrix,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Ellipticity { .. }
            | Error::IllConditioned(_)
            | Error::Grid(_)
            | Error::Calibration(_)
            | Error::Nonlinear(_)
            | Error::BranchPoint
            | Error::NotSu2(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Check) => ExitCode::from(4),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(cli: &Cli, text: &str) -> Outcome {
    match &cli.output {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Usage(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn emit_json<T: serde::Serialize>(cli: &Cli, v: &T) -> Outcome {
    emit(cli, &io::to_json(v)?)
}

fn band(cli: &Cli) -> HalfInteger {
    HalfInteger::from_twice(cli.band_limit_x2)
}

fn config(cli: &Cli) -> serde_json::Value {
    json!({
        "band_limit_x2": cli.band_limit_x2,
        "order": cli.order,
        "x_band_x2": cli.x_band_x2,
        "deterministic": cli.deterministic,
        "seed": cli.seed.unwrap_or(DEFAULT_SEED),
        "max_order": symbol::MAX_DUAL_ORDER,
        "ellipticity_cond": calculus::ELLIPTICITY_COND,
        "suites": checks::SUITES,
    })
}

/// A `*.json` operand is a symbol file; anything else is an operator expression.
fn load_symbol(cli: &Cli, operand: &str) -> Result<Symbol, Failure> {
    if operand.ends_with(".json") {
        let f: io::SymbolFile = io::from_json(&read(Path::new(operand))?)?;
        return Ok(io::symbol_from_file(&f)?);
    }
    let e = parse_operator(operand)?;
    expr_symbol(cli, &e)
}

fn expr_symbol(cli: &Cli, e: &OperatorExpr) -> Result<Symbol, Failure> {
    let grid = if e.is_invariant() { None } else { Some(default_x_grid(HalfInteger::from_twice(cli.x_band_x2))?) };
    Ok(e.symbol(band(cli), grid.as_ref())?)
}

fn load_coefficients(path: &Path) -> Result<su2pdo::CoefficientStack, Failure> {
    let f: io::CoefficientFile = io::from_json(&read(path)?)?;
    Ok(io::coefficients_from_file(&f)?)
}

fn run(cli: &Cli) -> Outcome {
    if cli.print_config {
        return emit_json(cli, &config(cli));
    }
    let Some(cmd) = &cli.command else {
        return Err(Failure::Usage("a subcommand is required (see --help)".into()));
    };
    match cmd {
        Command::Analyze { input } => {
            let f: io::GridFunctionFile = io::from_json(&read(input)?)?;
            let gf = io::grid_function_from_file(&f)?;
            let c = fourier::analyze(&gf, band(cli))?;
            emit_json(cli, &io::coefficients_to_file(&c))
        }
        Command::Synthesize { input } => {
            let c = load_coefficients(input)?;
            let grid = QuadratureGrid::new(c.band())?;
            emit_json(cli, &io::grid_function_to_file(&fourier::synthesize_grid(&c, &grid)?))
        }
        Command::Symbol { operator } => {
            let s = expr_symbol(cli, &parse_operator(operator)?)?;
            emit_json(cli, &io::symbol_to_file(&s))
        }
        Command::Diff { operand, alpha } => {
            if alpha.len() != 3 {
                return Err(Failure::Usage(format!("--alpha needs three exponents, got {}", alpha.len())));
            }
            let s = load_symbol(cli, operand)?;
            let d = symbol::multi_difference(&s, [alpha[0], alpha[1], alpha[2]]);
            emit_json(cli, &io::symbol_to_file(&d))
        }
        Command::Compose { left, right } => {
            let a = load_symbol(cli, left)?;
            let b = load_symbol(cli, right)?;
            emit_json(cli, &io::symbol_to_file(&calculus::compose(&a, &b, cli.order)?))
        }
        Command::Adjoint { operand } => {
            let s = load_symbol(cli, operand)?;
            emit_json(cli, &io::symbol_to_file(&calculus::adjoint(&s, cli.order)?))
        }
        Command::Parametrix { operand } => {
            let s = load_symbol(cli, operand)?;
            let m = calculus::estimate_order(&s, 1.0, s.band().value()).unwrap_or(0.0);
            let (p, cond) = calculus::parametrix(&SymbolExpansion::single(m, s), cli.order)?;
            eprintln!("parametrix: {} terms, worst block condition number {cond:e}", p.terms.len());
            emit_json(cli, &io::symbol_to_file(&p.total()?))
        }
        Command::Apply { operator, input } => {
            let e = parse_operator(operator)?;
            let c = load_coefficients(input)?;
            emit_json(cli, &io::coefficients_to_file(&e.apply(&c)))
        }
        Command::Solve { operator, input, mode, extra_x2 } => {
            let e = parse_operator(operator)?;
            let g = load_coefficients(input)?;
            let f = match mode {
                Mode::Exact => calculus::solve_exact(&e, &g)?,
                Mode::Parametrix => {
                    let grids = SolveGrids::for_problem(
                        g.band(),
                        HalfInteger::from_twice(cli.x_band_x2),
                        HalfInteger::from_twice(*extra_x2),
                    )?;
                    let (f, report) = calculus::solve_parametrix(&e, &g, cli.order, &grids)?;
                    eprintln!("{}", io::to_json(&report)?);
                    f
                }
            };
            emit_json(cli, &io::coefficients_to_file(&f))
        }
        Command::Check { suite } => {
            let seed = if cli.deterministic { DEFAULT_SEED } else { cli.seed.unwrap_or(DEFAULT_SEED) };
            let reports = checks::run(suite, band(cli), seed)?;
            let passed = reports.iter().all(|r| r.passed);
            emit_json(cli, &json!({ "passed": passed, "suites": reports }))?;
            if passed {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Command::Grid => {
            let grid = QuadratureGrid::new(band(cli))?;
            let c = io::counts_of(&grid);
            emit_json(
                cli,
                &json!({
                    "band_limit_x2": cli.band_limit_x2,
                    "grid": c,
                    "nodes": grid.len(),
                    "capacity_x2": grid.capacity().twice,
                    "gram_error": grid.gram_error(band(cli)),
                }),
            )
        }
    }
}
