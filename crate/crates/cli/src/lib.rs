//! Command-line front end: `run`, `list-scenarios` and `validate`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use oldroyd2d::experiments::{run_scenario, ScenarioConfig, ScenarioKind};
use oldroyd2d::{Error, Result};
use serde_json::Value;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "OLDROYD2D_THREADS";

#[derive(Debug, Parser)]
#[command(name = "oldroyd2d", version, about = "2D Oldroyd-B scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write series.csv and report.json.
    Run {
        #[arg(long)]
        scenario: String,
        /// JSON document laid over the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path override, e.g. `stepper.t_end=5`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the scenario names.
    ListScenarios,
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

/// Reads `path` (or an empty document) and forces its scenario to `kind`.
fn load_config(kind: ScenarioKind, path: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut doc: Value = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => Value::Object(Default::default()),
    };
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    if let Some(Value::String(s)) = obj.get("scenario") {
        if s != kind.name() {
            return Err(Error::Config(format!(
                "--scenario {kind} disagrees with the config's scenario {s:?}"
            )));
        }
    }
    obj.insert("scenario".into(), Value::String(kind.name().into()));
    ScenarioConfig::from_json(&doc.to_string(), overrides)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
    }
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(
    scenario: &str,
    config: Option<&Path>,
    out: Option<PathBuf>,
    overrides: &[String],
) -> Result<i32> {
    let kind: ScenarioKind = scenario.parse()?;
    let cfg = load_config(kind, config, overrides)?;
    cfg.validate()?;
    configure_threads()?;
    let dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let report = run_scenario(&cfg)?;
    report.write_to(&dir)?;
    print!("{}", report.summary());
    println!(
        "{kind}: {} verdicts, {:.1}s, report in {}",
        report.verdicts.len(),
        report.wall_clock_seconds,
        dir.display()
    );
    Ok(report.exit_code())
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 when every verdict passes, 2 on a blow-up verdict, 1 otherwise.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::ListScenarios => {
            for k in ScenarioKind::ALL {
                println!("{k}");
            }
            Ok(0)
        }
        Command::Validate { config, overrides } => ScenarioConfig::from_file(&config, &overrides)
            .and_then(|c| c.validate().map(|_| c))
            .map(|c| {
                println!("{}: ok", c.scenario);
                0
            }),
        Command::Run {
            scenario,
            config,
            out,
            overrides,
        } => run(&scenario, config.as_deref(), out, &overrides),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        1
    })
}
