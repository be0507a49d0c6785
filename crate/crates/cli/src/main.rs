use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gw_nary::critical::Family;
use gw_nary::mc::DEFAULT_NODE_BUDGET;
use gw_nary::solve::ROOT_TOL;
use gw_nary::survival::DEFAULT_T_MAX;
use gw_nary::validate::{self, ValidationOptions};
use gw_nary::{
    estimate_gamma_nt, find_critical, fit_asymptote, iterate_survival, smallest_root, Error,
    McConfig, OffspringSpec, SubtreeGF,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_NO_SIGN_CHANGE: u8 = 4;
const EXIT_DEGENERATE: u8 = 5;
const EXIT_BUDGET: u8 = 6;

#[derive(Parser)]
#[command(
    name = "gw-nary",
    version,
    about = "Complete N-ary subtrees of Galton-Watson trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Geometric,
    Poisson,
    OneOrMany,
    Binomial,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest root gamma_N of s = g_N(s) with a_N, b_N and the criticality class.
    Gamma {
        #[arg(long)]
        spec: OffspringSpec,
        #[arg(long = "N")]
        arity: usize,
        #[arg(long, default_value_t = ROOT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical parameter and mean m_N^c of a one-parameter family.
    Critical {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long = "N")]
        arity: usize,
        /// r of the one-or-many family (default N+1).
        #[arg(long)]
        r: Option<u32>,
        /// n of the binomial family.
        #[arg(long = "n")]
        trials: Option<u32>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long, default_value_t = ROOT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional survival curve and its asymptotic fit.
    Survival {
        #[arg(long)]
        spec: OffspringSpec,
        #[arg(long = "N")]
        arity: usize,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        t_max: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the JSON fit summary in CSV mode (default: stderr).
        #[arg(long)]
        fit_out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of gamma_{N,t}.
    Simulate {
        #[arg(long)]
        spec: OffspringSpec,
        #[arg(long = "N")]
        arity: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduces the reference constants and properties; exit 0 iff all pass.
    Validate {
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::new(EXIT_SOLVER, format!("I/O error: {e}"))
    }
}

fn solver_failure(e: Error) -> Failure {
    let code = match e {
        Error::Parse { .. }
        | Error::InvalidSpec(_)
        | Error::Domain { .. }
        | Error::InvalidConfig(_) => EXIT_USAGE,
        Error::NoSignChange(_) => EXIT_NO_SIGN_CHANGE,
        Error::DegenerateRoot(_) => EXIT_DEGENERATE,
        Error::BudgetExhausted { .. } => EXIT_BUDGET,
        _ => EXIT_SOLVER,
    };
    Failure::new(code, e.to_string())
}

fn open_output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> Result<(), Failure> {
    let mut out = open_output(path)?;
    serde_json::to_writer(&mut out, value).map_err(|e| Failure::new(EXIT_SOLVER, e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn subtree_gf(spec: OffspringSpec, arity: usize) -> Result<SubtreeGF, Failure> {
    match SubtreeGF::new(spec.clone(), arity) {
        Err(Error::NoMassAboveN(_)) => {
            SubtreeGF::new_unchecked(spec, arity).map_err(solver_failure)
        }
        other => other.map_err(solver_failure),
    }
}

#[derive(Serialize)]
struct SurvivalSummary<'a> {
    root: &'a gw_nary::RootReport,
    fit: Option<&'a gw_nary::AsymptoteFit>,
}

#[derive(Serialize)]
struct SurvivalOutput<'a> {
    root: &'a gw_nary::RootReport,
    fit: Option<&'a gw_nary::AsymptoteFit>,
    curve: &'a gw_nary::SurvivalCurve,
    law_prediction: Vec<Option<f64>>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gamma {
            spec,
            arity,
            tol,
            out,
        } => {
            let gf = subtree_gf(spec, arity)?;
            let report = smallest_root(&gf, tol).map_err(solver_failure)?;
            emit_json(&report, out.as_ref())
        }
        Command::Critical {
            family,
            arity,
            r,
            trials,
            lo,
            hi,
            tol,
            out,
        } => {
            let family = match family {
                FamilyName::Geometric => Family::Geometric,
                FamilyName::Poisson => Family::Poisson,
                FamilyName::OneOrMany => Family::OneOrMany {
                    r: r.unwrap_or(arity as u32 + 1),
                },
                FamilyName::Binomial => Family::Binomial {
                    n: trials
                        .ok_or_else(|| Failure::new(EXIT_USAGE, "binomial family needs --n"))?,
                },
            };
            let [dlo, dhi] = family.default_range();
            let report = find_critical(family, arity, [lo.unwrap_or(dlo), hi.unwrap_or(dhi)], tol)
                .map_err(solver_failure)?;
            emit_json(&report, out.as_ref())
        }
        Command::Survival {
            spec,
            arity,
            t_max,
            format,
            out,
            fit_out,
        } => {
            let gf = subtree_gf(spec, arity)?;
            let root = smallest_root(&gf, ROOT_TOL).map_err(solver_failure)?;
            let curve = iterate_survival(&gf, &root, t_max).map_err(solver_failure)?;
            // boundary and too-short curves still get their table
            let fit = fit_asymptote(&curve, &root).ok();
            let law_prediction: Vec<Option<f64>> = (0..curve.gamma_seq.len())
                .map(|t| fit.as_ref().and_then(|f| f.predict(t, &root)))
                .collect();
            match format {
                Format::Json => emit_json(
                    &SurvivalOutput {
                        root: &root,
                        fit: fit.as_ref(),
                        curve: &curve,
                        law_prediction,
                    },
                    out.as_ref(),
                ),
                Format::Csv => {
                    let mut w = open_output(out.as_ref())?;
                    writeln!(w, "t,gamma_Nt,cond_survival,law_prediction")?;
                    for (t, law) in law_prediction.iter().enumerate() {
                        let law = law.map(|v| v.to_string()).unwrap_or_default();
                        writeln!(
                            w,
                            "{t},{},{},{law}",
                            curve.gamma_seq[t], curve.cond_survival[t]
                        )?;
                    }
                    w.flush()?;
                    let summary = SurvivalSummary {
                        root: &root,
                        fit: fit.as_ref(),
                    };
                    match fit_out {
                        Some(path) => emit_json(&summary, Some(&path)),
                        None => {
                            let text = serde_json::to_string(&summary)
                                .map_err(|e| Failure::new(EXIT_SOLVER, e.to_string()))?;
                            eprintln!("{text}");
                            Ok(())
                        }
                    }
                }
            }
        }
        Command::Simulate {
            spec,
            arity,
            t,
            trials,
            seed,
            budget,
            out,
        } => {
            let mut cfg = McConfig::new(spec, arity, t, trials, seed);
            cfg.node_budget = budget;
            let est = estimate_gamma_nt(&cfg).map_err(solver_failure)?;
            emit_json(&est, out.as_ref())
        }
        Command::Validate { trials, seed, out } => {
            let mut opts = ValidationOptions {
                mc_trials: trials,
                ..ValidationOptions::default()
            };
            if let Some(seed) = seed {
                opts.seed = seed;
            }
            let outcomes = validate::run(&opts);
            let mut w = open_output(out.as_ref())?;
            for o in &outcomes {
                writeln!(
                    w,
                    "{} [{}] {}: {} ({:.2}s)",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.id,
                    o.name,
                    o.detail,
                    o.seconds
                )?;
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            writeln!(w, "{} passed, {failed} failed", outcomes.len() - failed)?;
            w.flush()?;
            if failed > 0 {
                return Err(Failure::new(
                    EXIT_VALIDATION,
                    format!("{failed} check(s) failed"),
                ));
            }
            Ok(())
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("GW_NARY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        // only fails if the pool was already built
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gw-nary: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
