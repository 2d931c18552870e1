//! Command-line driver for delay-equation bifurcation studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delaybif::io::write_text;
use delaybif::study::{compare, exit_code, Stage, Study, StudyConfig, Summary};
use delaybif::Error;

#[derive(Debug, Parser)]
#[command(name = "delaybif", version, about = "Continuation and bifurcation studies of delay differential equations")]
struct Cli {
    /// Study config file, or the name of a bundled config.
    #[arg(long, global = true, default_value = "reference-study")]
    config: PathBuf,

    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Stop the full pipeline after this stage.
    #[arg(long)]
    stage: Option<String>,

    /// Compare the results with the reference values after the run.
    #[arg(long, global = true)]
    tolerance_report: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for steady states from the configured guesses.
    Equilibria,
    /// Continue the equilibrium branch and locate stability switches.
    Continue,
    /// Characteristic roots at the configured delay frames.
    Spectrum,
    /// Quartic reduction and the critical delay sequences.
    CriticalDelays,
    /// Refine stability switches into Hopf points.
    Hopf,
    /// Continue periodic orbits from a Hopf point.
    Psol,
    /// Locate period doublings and continue the doubled branch.
    Double,
    /// Integrate the delay equation and classify the attractor.
    Simulate {
        /// Single delay, replacing the configured list.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Print the pass/fail matrix against the reference values.
    Report,
}

fn fail(error: &Error) -> ExitCode {
    eprintln!("error: {error}");
    ExitCode::from(exit_code(error) as u8)
}

fn write_report(out: &Path) -> Result<bool, Error> {
    let path = out.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
    let summary: Summary =
        serde_json::from_str(&text).map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
    let report = compare(&summary);
    report.to_table().write(&out.join("tolerance_report.csv"))?;
    write_text(&out.join("tolerance_report.txt"), &report.to_text())?;
    print!("{}", report.to_text());
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match StudyConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let out = cli.out.clone().unwrap_or_else(|| config.output.clone());

    if let Some(Command::Report) = cli.command {
        return match write_report(&out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(3),
            Err(e) => fail(&e),
        };
    }

    let until = match cli.stage.as_deref().map(str::parse::<Stage>).transpose() {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let mut study = match Study::open(config, &out) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let single = cli.command.is_some();
    let simulating = matches!(cli.command, Some(Command::Simulate { .. }));
    let only_tau = match cli.command {
        Some(Command::Simulate { tau }) => tau,
        _ => None,
    };
    let result = match cli.command {
        None => study.run_enabled(until),
        Some(Command::Simulate { tau: Some(tau) }) => study.simulate_at(tau),
        Some(cmd) => {
            let stage = match cmd {
                Command::Equilibria => Stage::Equilibria,
                Command::Continue => Stage::Continue,
                Command::Spectrum => Stage::Spectrum,
                Command::CriticalDelays => Stage::CriticalDelays,
                Command::Hopf => Stage::Hopf,
                Command::Psol => Stage::Psol,
                Command::Double => Stage::Double,
                Command::Simulate { .. } => Stage::Simulate,
                Command::Report => unreachable!("handled above"),
            };
            study.run_stage(stage)
        }
    };
    if let Err(failure) = result {
        eprintln!("error: {failure}");
        eprintln!("partial results kept in {}", out.display());
        return ExitCode::from(exit_code(&failure.error) as u8);
    }
    let completed = &study.summary().completed;
    // a single stage is always the most recent entry
    let shown = if single { &completed[completed.len().saturating_sub(1)..] } else { &completed[..] };
    for stage in shown {
        println!("{stage}: done");
    }
    if simulating {
        let runs = study.summary().simulations.iter().flatten();
        for run in runs.filter(|r| only_tau.is_none_or(|t| t == r.tau)) {
            let period = run.period.map_or("none".to_string(), |t| format!("{t:.6}"));
            println!("tau {}: multiplicity {} period {period}", run.tau, run.multiplicity);
        }
    }
    if cli.tolerance_report {
        if let Err(e) = write_report(&out) {
            return fail(&e);
        }
    }
    ExitCode::SUCCESS
}
