//! `plift`: check every variant of a model product line against
//! first-order constraints at once.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};
use thiserror::Error;

use plift_core::binding::bind;
use plift_core::bundle::{parse_configuration, serialize_model, Bundle, BundleError, BundlePaths};
use plift_core::constraint::TypedConstraint;
use plift_core::lifting::{lift, print_lifted};
use plift_core::oracle::{equivalence_test, EquivalenceError, OracleVerdict};
use plift_core::smt::{check_run, emit_smt, CheckError, EmitError, SolverConfig, Verdict, DEFAULT_SOLVER, SOLVER_ENV};
use plift_core::variability::{enumerate_configurations, Configuration, TooManyFeatures, DEFAULT_ENUMERATION_CAP};

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "plift", version, about = "Family-based checking of model product lines")]
struct Cli {
    #[command(flatten)]
    inputs: Inputs,
    #[command(subcommand)]
    command: Command,
}

/// Where the product line comes from. Single-document flags override the
/// corresponding entry of `--bundle`.
#[derive(Args)]
struct Inputs {
    /// Directory holding the bundle documents or a `bundle.json` manifest
    #[arg(long, global = true)]
    bundle: Option<PathBuf>,
    #[arg(long, global = true)]
    metamodel: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    #[arg(long, global = true)]
    presence: Option<PathBuf>,
    #[arg(long, global = true)]
    constraints: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check constraints on all variants with the SMT solver
    Check {
        /// Constraint to check; all constraints of the bundle when omitted
        #[arg(long = "constraint", value_name = "NAME")]
        names: Vec<String>,
        /// Solver command line; several may be given separated by `;`
        #[arg(long, env = SOLVER_ENV, default_value = DEFAULT_SOLVER)]
        solver: String,
        /// Per-constraint solver time limit in seconds
        #[arg(long, value_name = "SECONDS")]
        timeout: Option<f64>,
        /// Also enumerate and check every variant, failing on disagreement
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the lifted form of a constraint
    Lift {
        #[arg(long = "constraint", value_name = "NAME")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive the variant of a configuration
    Bind {
        /// Configuration document assigning every feature
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the SMT-LIB script for a constraint
    EmitSmt {
        #[arg(long = "constraint", value_name = "NAME")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the valid configurations of the feature model
    Enumerate {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Refuse feature models with more features than this
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    TooManyFeatures(#[from] TooManyFeatures),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn load(inputs: &Inputs) -> Result<Bundle, CliError> {
    let paths = match &inputs.bundle {
        Some(dir) => {
            let mut paths = BundlePaths::from_dir(dir)?;
            if let Some(p) = &inputs.metamodel {
                paths.metamodel = p.clone();
            }
            if let Some(p) = &inputs.model {
                paths.model = p.clone();
            }
            if let Some(p) = &inputs.features {
                paths.features = p.clone();
            }
            if inputs.presence.is_some() {
                paths.presence = inputs.presence.clone();
            }
            if inputs.constraints.is_some() {
                paths.constraints = inputs.constraints.clone();
            }
            paths
        }
        None => {
            let required = |p: &Option<PathBuf>, flag: &str| {
                p.clone()
                    .ok_or_else(|| CliError::Usage(format!("--{flag} is required without --bundle")))
            };
            BundlePaths {
                metamodel: required(&inputs.metamodel, "metamodel")?,
                model: required(&inputs.model, "model")?,
                features: required(&inputs.features, "features")?,
                presence: inputs.presence.clone(),
                constraints: inputs.constraints.clone(),
            }
        }
    };
    Ok(Bundle::load(&paths)?)
}

fn constraint<'a>(bundle: &'a Bundle, name: &str) -> Result<&'a TypedConstraint, CliError> {
    bundle.constraint(name).ok_or_else(|| {
        let known: Vec<&str> = bundle.constraints.iter().map(|(n, _)| n.as_str()).collect();
        CliError::Usage(format!("unknown constraint `{name}`; known: {}", known.join(", ")))
    })
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    let result = match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    result.map_err(|source| CliError::Output {
        path: out.map_or_else(|| "standard output".into(), |p| p.display().to_string()),
        source,
    })
}

fn config_json(k: &Configuration) -> Json {
    Json::Object(k.iter().map(|(f, v)| (f.to_string(), Json::Bool(v))).collect())
}

/// Outcome of checking one constraint.
enum Outcome {
    Verdict {
        verdict: Verdict,
        oracle: Option<(OracleVerdict, bool)>,
    },
    Failed(String, u8),
}

impl Outcome {
    fn exit_code(&self) -> u8 {
        match self {
            Outcome::Verdict { oracle: Some((_, false)), .. } => EXIT_SOLVER,
            Outcome::Verdict { verdict, .. } => match verdict {
                Verdict::AllVariantsSatisfy => 0,
                Verdict::Violation { .. } => EXIT_VIOLATION,
                Verdict::SolverUnknown(_) => EXIT_SOLVER,
            },
            Outcome::Failed(_, code) => *code,
        }
    }
}

fn check_error(e: CheckError) -> Outcome {
    let code = match e {
        CheckError::Emit(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    };
    Outcome::Failed(e.to_string(), code)
}

fn check_one(bundle: &Bundle, c: &TypedConstraint, solver: &SolverConfig, oracle: bool) -> Outcome {
    let pl = &bundle.product_line;
    if !oracle {
        return match check_run(pl, c, solver) {
            Ok(run) => Outcome::Verdict {
                verdict: run.verdict,
                oracle: None,
            },
            Err(e) => check_error(e),
        };
    }
    match equivalence_test(pl, c, solver) {
        Ok(report) => Outcome::Verdict {
            verdict: report.smt,
            oracle: Some((report.oracle, report.agree)),
        },
        Err(EquivalenceError::Check(e)) => check_error(e),
        Err(e @ EquivalenceError::Oracle(_)) => Outcome::Failed(e.to_string(), EXIT_SOLVER),
    }
}

fn text_report(name: &str, outcome: &Outcome) -> String {
    let mut lines = Vec::new();
    match outcome {
        Outcome::Verdict { verdict, oracle } => {
            lines.push(match verdict {
                Verdict::AllVariantsSatisfy => format!("{name}: all variants satisfy"),
                Verdict::Violation { config, confirmed } => format!(
                    "{name}: VIOLATION ({})\n  configuration: {config}\n  selected: {}",
                    if *confirmed { "confirmed on the variant" } else { "NOT confirmed on the variant" },
                    config.selected_features().collect::<Vec<_>>().join(", ")
                ),
                Verdict::SolverUnknown(reason) => format!("{name}: solver unknown ({reason})"),
            });
            if let Some((o, agree)) = oracle {
                let detail = match o {
                    OracleVerdict::AllVariantsSatisfy { count } => format!("all {count} variants satisfy"),
                    OracleVerdict::Violation(v) => format!("first violating configuration {}", v.config),
                };
                lines.push(format!("  oracle: {detail}; {}", if *agree { "agrees" } else { "DISAGREES" }));
                if let Some(w) = o.warning() {
                    lines.push(format!("  warning: {w}"));
                }
            }
        }
        Outcome::Failed(message, _) => lines.push(format!("{name}: error: {message}")),
    }
    lines.join("\n") + "\n"
}

fn json_report(name: &str, outcome: &Outcome) -> Json {
    match outcome {
        Outcome::Verdict { verdict, oracle } => {
            let mut entry = json!({ "constraint": name, "verdict": verdict.kind() });
            match verdict {
                Verdict::Violation { config, confirmed } => {
                    entry["configuration"] = config_json(config);
                    entry["confirmed"] = json!(confirmed);
                }
                Verdict::SolverUnknown(reason) => entry["reason"] = json!(reason),
                Verdict::AllVariantsSatisfy => {}
            }
            if let Some((o, agree)) = oracle {
                let mut report = json!({ "verdict": o.kind(), "agree": agree });
                match o {
                    OracleVerdict::AllVariantsSatisfy { count } => report["variants"] = json!(count),
                    OracleVerdict::Violation(v) => report["configuration"] = config_json(&v.config),
                }
                entry["oracle"] = report;
            }
            entry
        }
        Outcome::Failed(message, _) => json!({ "constraint": name, "verdict": "error", "error": message }),
    }
}

fn cmd_check(
    bundle: &Bundle,
    names: &[String],
    solver: &str,
    timeout: Option<f64>,
    oracle: bool,
    format: Format,
    out: Option<&PathBuf>,
) -> Result<u8, CliError> {
    let solver = SolverConfig::from_command(solver)
        .ok_or_else(|| CliError::Usage("--solver is empty".into()))?
        .with_timeout(
            timeout
                .map(|t| {
                    Duration::try_from_secs_f64(t).map_err(|_| CliError::Usage(format!("invalid --timeout {t}")))
                })
                .transpose()?,
        );
    let selected: Vec<(&str, &TypedConstraint)> = if names.is_empty() {
        bundle.constraints.iter().map(|(n, c)| (n.as_str(), c)).collect()
    } else {
        names
            .iter()
            .map(|n| constraint(bundle, n).map(|c| (n.as_str(), c)))
            .collect::<Result<_, _>>()?
    };
    if selected.is_empty() {
        return Err(CliError::Usage("the bundle has no constraints".into()));
    }

    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = selected
            .iter()
            .map(|(_, c)| scope.spawn(|| check_one(bundle, c, &solver, oracle)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check threads do not panic"))
            .collect()
    });

    // Solver trouble outranks bad input, which outranks violations.
    let code = outcomes.iter().map(Outcome::exit_code).max().unwrap_or(0);
    let text = match format {
        Format::Text => selected
            .iter()
            .zip(&outcomes)
            .map(|((name, _), o)| text_report(name, o))
            .collect::<String>(),
        Format::Json => {
            let results: Vec<Json> = selected
                .iter()
                .zip(&outcomes)
                .map(|((name, _), o)| json_report(name, o))
                .collect();
            serde_json::to_string_pretty(&json!({ "results": results, "exit_code": code }))
                .expect("reports serialize")
                + "\n"
        }
    };
    emit(out, &text)?;
    Ok(code)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let bundle = load(&cli.inputs)?;
    match &cli.command {
        Command::Check {
            names,
            solver,
            timeout,
            oracle,
            format,
            out,
        } => cmd_check(&bundle, names, solver, *timeout, *oracle, *format, out.as_ref()),
        Command::Lift { name, out } => {
            let lifted = lift(constraint(&bundle, name)?);
            emit(out.as_ref(), &(print_lifted(&lifted) + "\n"))?;
            Ok(0)
        }
        Command::Bind { config, out } => {
            let text = std::fs::read_to_string(config).map_err(|source| BundleError::Io {
                path: config.clone(),
                source,
            })?;
            let k = parse_configuration(bundle.product_line.feature_model(), &text)?;
            emit(out.as_ref(), &serialize_model(&bind(&bundle.product_line, &k).graph))?;
            Ok(0)
        }
        Command::EmitSmt { name, out } => {
            let script = emit_smt(&bundle.product_line, &lift(constraint(&bundle, name)?))?;
            emit(out.as_ref(), &script.text())?;
            Ok(0)
        }
        Command::Enumerate { format, cap, out } => {
            let configs = enumerate_configurations(bundle.product_line.feature_model(), *cap)?;
            let text = match format {
                Format::Text => configs.iter().map(|k| format!("{k}\n")).collect(),
                Format::Json => {
                    serde_json::to_string_pretty(&configs.iter().map(config_json).collect::<Vec<_>>())
                        .expect("configurations serialize")
                        + "\n"
                }
            };
            emit(out.as_ref(), &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
