//! Command-line front end for the `spinsampler` library.
//!
//! Every experiment can be driven by flags, by a TOML file or by both, with
//! flags taking precedence. Outputs go to `--out` together with a checksum
//! manifest, or to stdout.

pub mod args;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use args::{Cli, Command, DarkDecayArgs, Figure};
use config::{load_config, ExperimentConfig, Params};
use error::CliError;
use experiments::{execute, plan, validate};
use manifest::{manifest_path, record, RunManifest};

/// Default seed of the bundled figure recipes.
pub const REPRO_SEED: u64 = 7;

fn with_file(params: Params, common: args::Common) -> Result<ExperimentConfig, CliError> {
    let file = common.config.as_deref().map(load_config).transpose()?;
    Ok(ExperimentConfig::from_flags(
        params,
        common.seed,
        common.threads,
        common.out,
        file,
    ))
}

/// Assembles the experiment a command asks for.
pub fn resolve(command: Command) -> Result<ExperimentConfig, CliError> {
    match command {
        Command::Haar { common, params } => with_file(Params::Haar(params), common),
        Command::Decompose { common, params } => with_file(Params::Decompose(params), common),
        Command::MeshEval { common, params } => with_file(Params::MeshEval(params), common),
        Command::CompileCouplings { common, params } => with_file(Params::CompileCouplings(params), common),
        Command::Effective { common, params } => with_file(Params::Effective(params), common),
        Command::Evolve { common, params } => with_file(Params::Evolve(params), common),
        Command::DarkDecay { common, params } => with_file(Params::DarkDecay(params), common),
        Command::AdiabaticBs { common, params } => with_file(Params::AdiabaticBs(params), common),
        Command::SpinSampling { common, params } => with_file(Params::SpinSampling(params), common),
        Command::Run { config, threads } => {
            let mut cfg = ExperimentConfig::from_file(load_config(&config)?);
            cfg.threads = threads.or(cfg.threads);
            Ok(cfg)
        }
        Command::Validate { config } => Ok(ExperimentConfig::from_file(load_config(&config)?)),
        Command::Repro {
            figure:
                Figure::Fig2 {
                    mut common,
                    samples,
                    large,
                    channel_agg,
                },
        } => {
            let m_list = if large {
                vec![10, 20, 30, 40, 50]
            } else {
                vec![10, 20, 30]
            };
            let params = DarkDecayArgs {
                m_list: Some(m_list),
                n_list: Some(vec![2, 3, 4, 5]),
                samples: Some(samples.unwrap_or(200)),
                large: Some(large),
                channel_agg,
            };
            common.seed = common.seed.or(Some(REPRO_SEED));
            with_file(Params::DarkDecay(params), common)
        }
    }
}

fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Validates, runs and writes one experiment. Returns the manifest when
/// the output went to a file.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Option<RunManifest>, CliError> {
    let plan = plan(cfg).map_err(CliError::Validation)?;
    let threads = cfg.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::io("<thread pool>", e))?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    log::info!(
        "running {} with {threads} thread(s), seed {}",
        cfg.kind().name(),
        cfg.seed
    );
    let artifacts = pool.install(|| execute(&plan, cfg.seed))?;

    let Some(out) = &cfg.out else {
        let mut stdout = std::io::stdout().lock();
        for a in artifacts.iter().filter(|a| a.suffix.is_none()) {
            stdout.write_all(&a.bytes).map_err(|e| CliError::io("<stdout>", e))?;
        }
        return Ok(None);
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut outputs = Vec::new();
    for a in &artifacts {
        let path = a.suffix.map_or_else(|| out.clone(), |s| suffixed(out, s));
        fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        outputs.push(record(&path, &a.bytes));
    }
    let manifest = RunManifest {
        tool: "spinsampler".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.kind().name().into(),
        seed: cfg.seed,
        threads,
        units: plan.units().into(),
        config: serde_json::to_value(&plan).expect("serializable plan"),
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs,
    };
    manifest.write(&manifest_path(out))?;
    Ok(Some(manifest))
}

/// Entry point behind `main`; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    if let Command::Validate { .. } = cli.command {
        let cfg = resolve(cli.command)?;
        let violations = validate(&cfg);
        let report = serde_json::json!({ "violations": violations });
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("serializable report")
        );
        return Ok(if violations.is_empty() { 0 } else { 2 });
    }
    let cfg = resolve(cli.command)?;
    run_experiment(&cfg)?;
    Ok(0)
}
