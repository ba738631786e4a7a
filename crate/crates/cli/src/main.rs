//! Command-line front door.
//!
//! Exit codes: 0 pass, 1 invariant failure, 2 usage error, 3
//! numerical-accuracy failure. Reports are deterministic: identical
//! invocations produce byte-identical bodies (timing goes to stderr).

mod report;
mod run;
mod scenario;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use report::{write_output, ReportDocument, Summary};
use run::{run_scenario, RunError, RunOutput};
use scenario::{load_config, resolve, Cli, Command, OutputArgs, Scenario, UsageError};

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(UsageFailure(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    eprintln!("completed in {:.3}s", started.elapsed().as_secs_f64());
    std::process::exit(code);
}

struct UsageFailure(String);

impl From<UsageError> for UsageFailure {
    fn from(e: UsageError) -> Self {
        UsageFailure(e.0)
    }
}

struct Resolved {
    scenario: Scenario,
    output: OutputArgs,
    csv: Option<PathBuf>,
    axis_csv: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<i32, UsageFailure> {
    let resolved = resolve_scenario(cli)?;
    let (document, tables) = match run_scenario(&resolved.scenario) {
        Ok(out) => {
            let RunOutput {
                document,
                primary_table,
                cascade_table,
                axis_table,
            } = out;
            (document, (primary_table, cascade_table, axis_table))
        }
        Err(RunError::Usage(e)) => return Err(e.into()),
        Err(RunError::Captured { outcome, note }) => {
            // Module errors are captured into a failing report with their
            // stage label rather than aborting silently.
            let doc = ReportDocument::new(
                serde_json::to_value(&resolved.scenario).expect("scenario serializes"),
                serde_json::Value::Array(vec![]),
                Summary {
                    pass: false,
                    outcome,
                    notes: vec![note],
                },
            );
            (doc, (None, None, None))
        }
    };

    emit(&resolved, &document, tables).map_err(|e| UsageFailure(format!("output failed: {e}")))?;
    Ok(document.summary.outcome.exit_code())
}

fn emit(
    resolved: &Resolved,
    document: &ReportDocument,
    tables: (
        Option<report::Table>,
        Option<report::Table>,
        Option<report::Table>,
    ),
) -> std::io::Result<()> {
    let (primary, cascade, axis) = tables;
    let body = match resolved.output.format.as_str() {
        "json" => document.to_json(),
        "csv" => primary
            .as_ref()
            .map(report::Table::to_csv)
            .unwrap_or_else(|| "no tabular output for this command\n".to_string()),
        "plotdata" => primary
            .as_ref()
            .map(report::Table::to_plotdata)
            .unwrap_or_default(),
        other => {
            return Err(std::io::Error::other(format!(
                "unknown --format '{other}' (json|csv|plotdata)"
            )))
        }
    };
    write_output(resolved.output.out.as_deref(), &body)?;

    if let (Some(path), Some(table)) = (&resolved.csv, cascade.as_ref().or(primary.as_ref())) {
        std::fs::write(path, table.to_csv())?;
    }
    if let (Some(path), Some(table)) = (&resolved.axis_csv, axis.as_ref()) {
        std::fs::write(path, table.to_csv())?;
    }
    // Always surface the verdict line for human readers.
    if document.summary.pass {
        eprintln!("summary: pass");
    } else {
        eprintln!("summary: FAIL ({:?})", document.summary.outcome);
        for note in &document.summary.notes {
            eprintln!("  {note}");
        }
    }
    Ok(())
}

fn resolve_scenario(cli: Cli) -> Result<Resolved, UsageFailure> {
    match cli.command {
        Command::WeightCheck(args) => {
            let cfg = load_config(&args.output)?;
            let scenario = Scenario::WeightCheck {
                n: resolve(args.n, &cfg, "n", None)?,
                weight: resolve(args.weight, &cfg, "weight", None)?,
                grid_min: resolve(args.grid_min, &cfg, "grid-min", Some(1e-6))?,
                grid_max: resolve(args.grid_max, &cfg, "grid-max", Some(1.0))?,
                grid_points: resolve(args.grid_points, &cfg, "grid-points", Some(200))?,
            };
            Ok(Resolved {
                scenario,
                output: args.output,
                csv: None,
                axis_csv: None,
            })
        }
        Command::MuEval(args) => {
            let cfg = load_config(&args.output)?;
            let scenario = Scenario::MuEval {
                n: resolve(args.n, &cfg, "n", None)?,
                a: resolve(args.a, &cfg, "a", None)?,
                y: resolve(args.y, &cfg, "y", None)?,
                t: resolve(args.t, &cfg, "t", None)?,
                mode: resolve(args.mode, &cfg, "mode", Some("both".to_string()))?,
            };
            Ok(Resolved {
                scenario,
                output: args.output,
                csv: None,
                axis_csv: None,
            })
        }
        Command::SurfaceBuild(args) => {
            let cfg = load_config(&args.output)?;
            let scenario = Scenario::SurfaceBuild {
                n: resolve(args.n, &cfg, "n", None)?,
                weight: resolve(args.weight, &cfg, "weight", None)?,
                theta: resolve(args.theta, &cfg, "theta", Some(0.1))?,
                lambda: resolve(
                    args.lambda,
                    &cfg,
                    "lambda",
                    Some(cartwright_core::surface::LAMBDA_CAP.min(1e-2)),
                )?,
                samples: resolve(args.samples, &cfg, "samples", Some(1000))?,
                seed: resolve(args.seed, &cfg, "seed", Some(42))?,
            };
            Ok(Resolved {
                scenario,
                output: args.output,
                csv: args.csv,
                axis_csv: None,
            })
        }
        Command::Verify(args) => {
            let cfg = load_config(&args.output)?;
            let scenario = Scenario::Verify {
                theorem: resolve(args.theorem, &cfg, "theorem", None)?,
                n: resolve(args.n, &cfg, "n", None)?,
                weight: resolve(args.weight, &cfg, "weight", None)?,
                theta_min: resolve(args.theta_min, &cfg, "theta-min", Some(1e-3))?,
                theta_max: resolve(args.theta_max, &cfg, "theta-max", Some(0.3))?,
                theta_per_decade: resolve(args.theta_per_decade, &cfg, "theta-per-decade", Some(20))?,
                test_function: resolve(
                    args.test_function,
                    &cfg,
                    "test-function",
                    Some("poisson".to_string()),
                )?,
                pole_angle: resolve(args.pole_angle, &cfg, "pole-angle", Some(PI))?,
                pole_depth: resolve(args.pole_depth, &cfg, "pole-depth", Some(1e-4))?,
                lambda: resolve(
                    args.lambda,
                    &cfg,
                    "lambda",
                    Some(cartwright_core::surface::LAMBDA_CAP.min(1e-2)),
                )?,
            };
            Ok(Resolved {
                scenario,
                output: args.output,
                csv: args.csv,
                axis_csv: None,
            })
        }
        Command::Example(args) => {
            let cfg = load_config(&args.output)?;
            let scenario = Scenario::Example {
                n: resolve(args.n, &cfg, "n", None)?,
            };
            Ok(Resolved {
                scenario,
                output: args.output,
                csv: args.csv,
                axis_csv: args.axis_csv,
            })
        }
    }
}
