mod config;
mod error;
mod manifest;
mod pipeline;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, Settings, Stage};
use error::CliError;
use manifest::RunRecord;
use pipeline::Pipeline;

#[derive(Debug, Parser)]
#[command(name = "gp-pump", version, about = "Solitary waves of the pumped/damped Gross-Pitaevskii equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lowest eigenvalues of H₀ and the distance to φ₁.
    LinearCheck(Overrides),
    /// The ground state v_M, plus the μ_M table when masses are given.
    Groundstate(Overrides),
    /// K(M) table and the balanced mass M*.
    Balance(Overrides),
    /// Lowest eigenvalues of L₋ and L₊ at the balanced state.
    Spectrum(Overrides),
    /// The corrections Q₁ᵢ, μ₂, Q₂ᵣ, Q₃ᵢ.
    Expand(Overrides),
    /// The solitary wave at one ε.
    Solitary(Overrides),
    /// Scaling of the corrections over a list of ε.
    Sweep(Overrides),
    /// Time evolution with conservation-law diagnostics.
    Evolve(Overrides),
    /// Plot-ready tables of an existing run directory.
    Report(Overrides),
    /// The stages listed in the config file.
    Run(Overrides),
}

impl Command {
    fn parts(&self) -> (&'static str, &Overrides, Option<Stage>) {
        match self {
            Command::LinearCheck(o) => ("linear-check", o, Some(Stage::LinearCheck)),
            Command::Groundstate(o) => ("groundstate", o, Some(Stage::Groundstate)),
            Command::Balance(o) => ("balance", o, Some(Stage::Balance)),
            Command::Spectrum(o) => ("spectrum", o, Some(Stage::Spectrum)),
            Command::Expand(o) => ("expand", o, Some(Stage::Expand)),
            Command::Solitary(o) => ("solitary", o, Some(Stage::Solitary)),
            Command::Sweep(o) => ("sweep", o, Some(Stage::Sweep)),
            Command::Evolve(o) => ("evolve", o, Some(Stage::Evolve)),
            Command::Report(o) => ("report", o, Some(Stage::Report)),
            Command::Run(o) => ("run", o, None),
        }
    }
}

fn thread_cap(settings: &Settings) -> Result<Option<usize>, CliError> {
    let env = match std::env::var("GP_PUMP_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::Usage(format!("GP_PUMP_THREADS must be a positive integer, got '{v}'")))?,
        ),
        Err(_) => None,
    };
    Ok(match (settings.threads, env) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    })
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    let (name, overrides, stage) = cmd.parts();
    if stage.is_none() && overrides.config.is_none() {
        return Err(CliError::Usage("run needs --config".into()));
    }
    let settings = overrides.resolve()?;
    if let Some(n) = thread_cap(&settings)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    if stage == Some(Stage::Report) {
        report::emit_report(&settings.out)?;
        return Ok(());
    }
    let stages = match stage {
        Some(s) => vec![s],
        None => settings.stages.clone(),
    };
    let started = manifest::now_unix();
    let config = serde_json::to_value(&settings)?;
    let mut pipe = Pipeline::new(settings)?;
    let mut outcome = Ok(());
    for &s in stages.iter().filter(|&&s| s != Stage::Report) {
        outcome = pipe.run_stage(s);
        if outcome.is_err() {
            break;
        }
    }
    let record = RunRecord {
        command: name.to_string(),
        config,
        versions: manifest::versions(),
        started_unix: started,
        finished_unix: manifest::now_unix(),
        threads: rayon::current_num_threads(),
        status: if outcome.is_ok() { "ok" } else { "failed" }.to_string(),
        reason: outcome.as_ref().err().map(|e| e.reason().to_string()),
        exit_code: outcome.as_ref().err().map_or(0, |e| e.exit_code()),
        derived: std::mem::take(&mut pipe.derived),
        files: std::mem::take(&mut pipe.files),
    };
    manifest::append(pipe.dir(), record)?;
    outcome?;
    if stages.contains(&Stage::Report) {
        report::emit_report(pipe.dir())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("gp-pump: {}: {detail}", e.reason());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
