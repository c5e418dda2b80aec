use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use roadplan::{cmd_plan, cmd_simulate, cmd_smooth, load_scenario, report_path, CommandError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Stage {
    Smooth,
    Plan,
    Simulate,
}

/// Reference-line smoothing, lateral planning and closed-loop simulation.
///
/// Exit status: 0 on success, 1 on runtime or IO errors, 2 on scenario
/// parse errors, 3 when the planning cycle has no feasible candidate.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV file for smooth and plan, output directory for simulate.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `sim.seed` from the scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "simulate")]
    stage: Stage,
}

const EXIT_ERROR: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_NO_FEASIBLE: u8 = 3;

fn main() -> ExitCode {
    let args = Args::parse();
    let mut scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return ExitCode::from(EXIT_PARSE);
        }
    };
    if let Some(seed) = args.seed {
        scenario.sim.seed = seed;
    }
    let result = match args.stage {
        Stage::Smooth => cmd_smooth(&scenario, &args.out).map(|()| {
            println!("wrote {} and {}", args.out.display(), report_path(&args.out).display());
            ExitCode::SUCCESS
        }),
        Stage::Plan => cmd_plan(&scenario, &args.out).map(|s| {
            println!("{} candidates, {} checked", s.candidates, s.checked);
            match s.selected {
                Some(i) => {
                    println!("selected candidate {i}");
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("no feasible trajectory");
                    ExitCode::from(EXIT_NO_FEASIBLE)
                }
            }
        }),
        Stage::Simulate => cmd_simulate(&scenario, &args.out).map(|m| {
            println!(
                "{} ticks, max |e_fa| {:.4} m, min clearance {:.3} m, {} replans",
                m.ticks, m.max_tracking_error, m.min_clearance, m.replan_count
            );
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e: CommandError| {
        eprintln!("error: {e}");
        match e {
            CommandError::Parse(_) => ExitCode::from(EXIT_PARSE),
            _ => ExitCode::from(EXIT_ERROR),
        }
    })
}
