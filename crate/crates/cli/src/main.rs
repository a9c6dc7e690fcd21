use clap::{Parser, Subcommand};
use std::process::ExitCode;

use vacuum_cli::suites::run_suite;
use vacuum_cli::{parse_config, Overrides};

#[derive(Parser)]
#[command(name = "vel", version, about = "Verification suites and radial simulations for damped Euler flows near Barenblatt profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Barenblatt constants for the configured gas.
    Constants,
    /// Porous-medium and Darcy residual convergence, mass conservation.
    BarenblattCheck,
    /// Correction ODE and its decay bounds.
    Theta,
    /// Liu particular solutions against the Barenblatt coefficients.
    Liu,
    /// Lagrangian algebraic and differential identities.
    Identities,
    /// Hardy and weighted embedding inequalities.
    Hardy,
    /// Spherically symmetric free-boundary run.
    Radial,
    /// All suites.
    Report,
}

impl Command {
    fn suite(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::BarenblattCheck => "barenblatt-check",
            Command::Theta => "theta",
            Command::Liu => "liu",
            Command::Identities => "identities",
            Command::Hardy => "hardy",
            Command::Radial => "radial",
            Command::Report => "report",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = cfg.out_dir();
    let rep = match run_suite(cli.command.suite(), &cfg, &dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let path = match rep.write(&dir) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Constants = cli.command {
        println!("{}", serde_json::to_string_pretty(&rep.fitted).expect("map of floats serializes"));
    }
    for c in &rep.checks {
        println!("{}", c.line());
    }
    for a in &rep.artifacts {
        println!("wrote {}", a.display());
    }
    println!("wrote {}", path.display());
    if rep.pass() {
        ExitCode::SUCCESS
    } else {
        for c in rep.failures() {
            eprintln!("violated invariant `{}` (margin {:.3e})", c.name, c.margin);
        }
        ExitCode::from(1)
    }
}
