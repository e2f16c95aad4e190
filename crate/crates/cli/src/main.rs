//! `qcorr`: one JSON document per invocation, on standard output or `--output`.
//!
//! Exit codes: 0 success, 1 a validity check or verdict came out negative
//! (or a construction hit a cap), 2 usage or input error, 3 numerically
//! indeterminate.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcorr::constructions::{self, approximate_weights, embed_factorial, plan_blocks, rational_combination};
use qcorr::corners::{corner, lift_max_ent, lift_nonsignalling};
use qcorr::dilation::{self, DilationOptions};
use qcorr::membership::{self, bell_value, chsh_game_functional, chsh_optimal_rep, is_local};
use qcorr::operators::MeasureReport;
use qcorr::{
    BellFunctional, Correlation, Error, MaxEntRep, OperatorMeasure, RationalWeight, StateRep, EXACT_TOL,
};

#[derive(Parser)]
#[command(name = "qcorr", version, about = "Construct, transform and test bipartite quantum correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON document to FILE instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidateKind {
    Correlation,
    Rep,
    State,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    MaxEnt,
    State,
    Povm,
}

#[derive(Clone, Copy, ValueEnum)]
enum LiftKind {
    MaxEnt,
    Nonsignalling,
}

/// Input files; `-` reads standard input.
#[derive(Subcommand)]
enum Command {
    /// Check a correlation, a maximally entangled rep or a state rep.
    Validate {
        #[arg(value_enum)]
        what: ValidateKind,
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Marginals and signalling defect of a correlation (exit 1 if signalling).
    Marginals {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Evaluate a rep to its correlation.
    Eval {
        #[arg(value_enum)]
        what: EvalKind,
        input: PathBuf,
    },
    /// Realize a rational convex combination of reps as one rep.
    Combine {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Comma-separated rationals such as 1/3,2/3.
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<RationalWeight>,
        #[arg(long, default_value_t = constructions::DEFAULT_MAX_DIM)]
        max_dim: usize,
        /// Print the block bookkeeping instead of the rep.
        #[arg(long)]
        plan: bool,
    },
    /// Rational weights within eps of real targets summing to one.
    ApproxWeights {
        #[arg(value_delimiter = ',', required = true)]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_den: u64,
    },
    /// Repeat every operator k times along the diagonal.
    Embed {
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = constructions::DEFAULT_MAX_DIM)]
        max_dim: usize,
    },
    /// The corner block of a square correlation.
    Corner {
        input: PathBuf,
        #[arg(long)]
        n_a: usize,
        #[arg(long)]
        n_b: usize,
    },
    /// Lift to a synchronous correlation or rep whose corner is the input.
    Lift {
        #[arg(value_enum)]
        what: LiftKind,
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Dilate a commuting rational-spectrum POVM rep to a PVM rep.
    Dilate {
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_den: u64,
        #[arg(long, default_value_t = constructions::DEFAULT_MAX_DIM)]
        max_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Round the spectra of a commuting POVM rep to rationals.
    RoundSpectrum {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        max_den: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Local-polytope membership (exit 1 outside, 3 indeterminate).
    Membership {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = membership::DEFAULT_MAX_VERTICES)]
        max_vertices: usize,
    },
    /// Seeded random objects.
    Random {
        #[command(subcommand)]
        what: RandomCommand,
    },
    /// The optimal CHSH rep, its correlation and game value.
    Chsh,
    /// Value of a Bell functional on a correlation.
    Bell {
        input: PathBuf,
        #[arg(long, required_unless_present = "chsh", value_name = "FILE")]
        functional: Option<PathBuf>,
        /// Use the CHSH game functional.
        #[arg(long, conflicts_with = "functional")]
        chsh: bool,
    },
    /// Sup distance between two correlations.
    Distance { a: PathBuf, b: PathBuf },
}

#[derive(Subcommand)]
enum RandomCommand {
    /// A PVM with the given ranks and Haar-random eigenbasis.
    Pvm {
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A maximally entangled PVM rep.
    Rep {
        #[arg(long)]
        n_a: usize,
        #[arg(long)]
        n_b: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A nonsignalling correlation.
    Correlation {
        #[arg(long)]
        n_a: usize,
        #[arg(long)]
        n_b: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A POVM rep of commuting families with rational spectra.
    CommutingRep {
        #[arg(long)]
        n_a: usize,
        #[arg(long)]
        n_b: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 6)]
        max_den: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// A two-outcome POVM rep with uniform random spectra.
    BinaryPovmRep {
        #[arg(long)]
        n_a: usize,
        #[arg(long)]
        n_b: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Json(_) | Error::Shape(_) | Error::InvalidInput(_) | Error::WeightSum { .. } | Error::KindMismatch { .. } => 2,
            Error::Numerical(_) => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

/// A JSON document plus the exit code it should leave with.
struct Output {
    json: String,
    code: u8,
}

fn emit(value: &impl Serialize) -> Output {
    emit_with(value, 0)
}

fn emit_with(value: &impl Serialize, code: u8) -> Output {
    Output { json: serde_json::to_string(value).expect("outputs serialize"), code }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    let result = if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map(|_| s)
    } else {
        fs::read_to_string(path)
    };
    result.map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn with_path<T>(path: &Path, r: qcorr::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn read_correlation(path: &Path, tol: f64) -> Result<Correlation, Failure> {
    with_path(path, Correlation::from_json_str(&read_input(path)?, tol))
}

/// Accepts any finite entries so `validate` can report negativity instead of
/// refusing the file.
fn read_correlation_unchecked(path: &Path) -> Result<Correlation, Failure> {
    #[derive(serde::Deserialize)]
    struct Raw {
        n_a: usize,
        n_b: usize,
        m: usize,
        values: Vec<f64>,
    }
    let raw: Raw = with_path(path, serde_json::from_str(&read_input(path)?).map_err(Error::from))?;
    with_path(path, Correlation::new(raw.n_a, raw.n_b, raw.m, raw.values))
}

fn read_rep(path: &Path) -> Result<MaxEntRep, Failure> {
    with_path(path, MaxEntRep::from_json_str(&read_input(path)?))
}

fn read_state_rep(path: &Path) -> Result<StateRep, Failure> {
    with_path(path, StateRep::from_json_str(&read_input(path)?))
}

#[derive(Serialize)]
struct RepReport {
    ok: bool,
    alice: Vec<MeasureReport>,
    bob: Vec<MeasureReport>,
}

impl RepReport {
    fn new(alice: &[OperatorMeasure], bob: &[OperatorMeasure]) -> Self {
        let alice: Vec<MeasureReport> = alice.iter().map(OperatorMeasure::validate).collect();
        let bob: Vec<MeasureReport> = bob.iter().map(OperatorMeasure::validate).collect();
        let ok = alice.iter().chain(&bob).all(|r| r.ok);
        Self { ok, alice, bob }
    }
}

#[derive(Serialize)]
struct StateReport {
    ok: bool,
    measures: RepReport,
    maximally_entangled: bool,
    schmidt_coefficients: Vec<f64>,
}

#[derive(Serialize)]
struct Value {
    value: f64,
}

fn run(command: Command) -> Result<Output, Failure> {
    Ok(match command {
        Command::Validate { what, input, tol } => match what {
            ValidateKind::Correlation => {
                let report = read_correlation_unchecked(&input)?.validate(tol);
                let code = u8::from(!report.ok);
                emit_with(&report, code)
            }
            ValidateKind::Rep => {
                let rep = read_rep(&input)?;
                let report = RepReport::new(rep.alice(), rep.bob());
                let code = u8::from(!report.ok);
                emit_with(&report, code)
            }
            ValidateKind::State => {
                let rep = read_state_rep(&input)?;
                let measures = RepReport::new(rep.alice(), rep.bob());
                let form = qcorr::operators::schmidt_decompose(rep.state(), rep.d_a(), rep.d_b())?;
                let maximally_entangled = qcorr::operators::is_maximally_entangled(rep.state(), rep.d_a(), rep.d_b(), tol);
                let report = StateReport { ok: measures.ok, measures, maximally_entangled, schmidt_coefficients: form.coefficients };
                let code = u8::from(!report.ok);
                emit_with(&report, code)
            }
        },
        Command::Marginals { input, tol } => {
            let marg = read_correlation(&input, EXACT_TOL)?.marginals(tol);
            let code = u8::from(!marg.well_defined);
            emit_with(&marg, code)
        }
        Command::Eval { what, input } => match what {
            EvalKind::MaxEnt => emit(&with_path(&input, read_rep(&input)?.eval())?),
            EvalKind::State => emit(&with_path(&input, read_state_rep(&input)?.eval())?),
            EvalKind::Povm => emit(&with_path(&input, dilation::eval_almost_max_ent(&read_rep(&input)?))?),
        },
        Command::Combine { inputs, weights, max_dim, plan } => {
            let reps = inputs.iter().map(|p| read_rep(p)).collect::<Result<Vec<_>, _>>()?;
            if plan {
                let dims: Vec<usize> = reps.iter().map(MaxEntRep::d).collect();
                emit(&plan_blocks(&dims, &weights, max_dim)?)
            } else {
                emit(&rational_combination(&reps, &weights, max_dim)?)
            }
        }
        Command::ApproxWeights { targets, eps, max_den } => {
            let weights = approximate_weights(&targets, eps, max_den)?;
            #[derive(Serialize)]
            struct Approx {
                weights: Vec<RationalWeight>,
                denominator: u64,
                max_error: f64,
            }
            let max_error = weights.iter().zip(&targets).map(|(w, t)| (w.to_f64() - t).abs()).fold(0.0, f64::max);
            let denominator = qcorr::rational::common_denominator(&weights)?;
            emit(&Approx { weights, denominator, max_error })
        }
        Command::Embed { input, k, max_dim } => emit(&embed_factorial(&read_rep(&input)?, k, max_dim)?),
        Command::Corner { input, n_a, n_b } => emit(&corner(&read_correlation(&input, EXACT_TOL)?, n_a, n_b)?),
        Command::Lift { what, input, tol } => match what {
            LiftKind::MaxEnt => emit(&lift_max_ent(&read_rep(&input)?)?),
            LiftKind::Nonsignalling => emit(&lift_nonsignalling(&read_correlation(&input, EXACT_TOL)?, tol)?),
        },
        Command::Dilate { input, max_den, max_dim, seed } => {
            let opts = DilationOptions { max_den, max_dim, seed };
            emit(&dilation::dilate_commuting_rational(&read_rep(&input)?, &opts)?)
        }
        Command::RoundSpectrum { input, eps, max_den, seed } => {
            let opts = DilationOptions { max_den, seed, ..Default::default() };
            emit(&dilation::round_to_rational_spectrum(&read_rep(&input)?, eps, &opts)?)
        }
        Command::Membership { input, tol, max_vertices } => {
            let verdict = is_local(&read_correlation(&input, EXACT_TOL)?, tol, max_vertices)?;
            let code = match verdict.inside() {
                Some(true) => 0,
                Some(false) => 1,
                None => 3,
            };
            emit_with(&verdict, code)
        }
        Command::Random { what } => match what {
            RandomCommand::Pvm { d, ranks, seed } => emit(&OperatorMeasure::random_pvm(d, &ranks, seed)?),
            RandomCommand::Rep { n_a, n_b, m, d, seed } => emit(&MaxEntRep::random(n_a, n_b, m, d, seed)?),
            RandomCommand::Correlation { n_a, n_b, m, seed } => emit(&Correlation::random_nonsignalling(n_a, n_b, m, seed)?),
            RandomCommand::CommutingRep { n_a, n_b, m, d, max_den, seed } => {
                emit(&dilation::random_commuting_rep(n_a, n_b, m, d, max_den, seed)?)
            }
            RandomCommand::BinaryPovmRep { n_a, n_b, d, seed } => emit(&dilation::random_binary_povm_rep(n_a, n_b, d, seed)?),
        },
        Command::Chsh => {
            #[derive(Serialize)]
            struct Chsh {
                value: f64,
                classical_bound: f64,
                correlation: Correlation,
                rep: MaxEntRep,
            }
            let rep = chsh_optimal_rep();
            let correlation = rep.eval()?;
            let game = chsh_game_functional();
            let value = bell_value(&correlation, &game)?;
            let classical_bound = game.classical_bound(membership::DEFAULT_MAX_VERTICES)?;
            emit(&Chsh { value, classical_bound, correlation, rep })
        }
        Command::Bell { input, functional, chsh } => {
            let p = read_correlation(&input, EXACT_TOL)?;
            let f = match (functional, chsh) {
                (_, true) => chsh_game_functional(),
                (Some(path), false) => {
                    let s = read_input(&path)?;
                    with_path(&path, serde_json::from_str::<BellFunctional>(&s).map_err(Error::from))?
                }
                (None, false) => unreachable!("clap requires one of --functional, --chsh"),
            };
            emit(&Value { value: bell_value(&p, &f)? })
        }
        Command::Distance { a, b } => {
            #[derive(Serialize)]
            struct Distance {
                sup_distance: f64,
            }
            let (p, q) = (read_correlation(&a, EXACT_TOL)?, read_correlation(&b, EXACT_TOL)?);
            emit(&Distance { sup_distance: p.sup_distance(&q)? })
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Format::Json = cli.format;
    match run(cli.command) {
        Ok(out) => {
            let text = out.json + "\n";
            let written = match &cli.output {
                Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
                None => io::stdout().lock().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => ExitCode::from(out.code),
                Err(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(2)
                }
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
