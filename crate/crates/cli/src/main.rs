use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use saddle_core::catalog::generate_catalog;
use saddle_core::scenario::{run_scenario, RunOptions, RunReport, Scenario, ScenarioError, Status};
use saddle_core::sphere::{build_sphere, write_atlas, SphereParams};

/// Environment variable that overrides the output directory.
const OUT_ENV: &str = "SADDLE_OUT_DIR";
const DEFAULT_OUT: &str = "saddle-out";

const EXIT_ASSERTION: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "saddle", version, about = "Umbilic and index analyses of saddle graphs")]
struct Cli {
    /// Output directory (default: $SADDLE_OUT_DIR, the scenario's output.dir, or ./saddle-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use exact rational arithmetic for factorization and division.
    #[arg(long, global = true)]
    exact: bool,
    /// Seed for randomized choices; recorded in the report.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of a scenario and write report.json.
    Run { scenario: PathBuf },
    /// Run only the field-grid analyses of a scenario.
    Grid { scenario: PathBuf },
    /// Build and certify the smooth saddle sphere; writes the atlas.
    Sphere { params: PathBuf },
    /// Write a seeded catalog of saddle polynomials as catalog.json.
    Catalog { seed: u64, count: usize },
}

/// Configuration problems get their own exit status.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn out_dir(flag: Option<PathBuf>, scenario: Option<&Scenario>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| scenario.and_then(|s| s.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_file(path).map_err(|e| ConfigError(e.to_string()).into())
}

fn print_summary(report: &RunReport, dir: &Path) {
    for o in &report.outcomes {
        let status = match o.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Unstable => "UNSTABLE",
            Status::Error => "ERROR",
        };
        match &o.message {
            Some(m) => println!("{:<12} {status}: {m}", o.kind),
            None => println!("{:<12} {status}", o.kind),
        }
    }
    println!("report written to {}", dir.display());
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { ref scenario } | Command::Grid { ref scenario } => {
            let grids_only = matches!(cli.command, Command::Grid { .. });
            let sc = load_scenario(scenario)?;
            let dir = out_dir(cli.out, Some(&sc));
            let opts = RunOptions { out_dir: dir.clone(), exact: cli.exact, seed: cli.seed, grids_only };
            let report = run_scenario(&sc, &opts).map_err(|e| match e {
                ScenarioError::Config(m) => anyhow::Error::new(ConfigError(m)),
                e => anyhow::Error::new(e),
            })?;
            print_summary(&report, &dir);
            Ok(report.exit_code())
        }
        Command::Sphere { params } => {
            let text = std::fs::read_to_string(&params)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", params.display())))?;
            let params: SphereParams =
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", params.display())))?;
            params.validate().map_err(|e| ConfigError(e.to_string()))?;
            let dir = out_dir(cli.out, None);
            let (atlas, report) = build_sphere(&params).context("sphere construction failed")?;
            let files = write_atlas(&atlas, &report, &dir).context("writing the atlas")?;
            println!(
                "max K = {:.3e} on {} samples, max lifted sign = {}, caps geodesic = {}, smooth = {}",
                report.curvature.max_curvature,
                report.curvature.samples,
                report.max_annulus_sign.max(report.waist_sign).max(report.joint_sign),
                report.caps_geodesic,
                report.smooth
            );
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(if report.pass { 0 } else { EXIT_ASSERTION })
        }
        Command::Catalog { seed, count } => {
            let dir = out_dir(cli.out, None);
            let entries = generate_catalog(seed, count);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("catalog.json");
            let doc = serde_json::json!({ "seed": seed, "count": count, "entries": entries });
            std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} entries to {}", entries.len(), path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are configuration errors; help and version are not.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
