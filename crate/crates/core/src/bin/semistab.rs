use std::process::ExitCode;

use clap::Parser;
use semistab::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.dir.display());
            for c in &outcome.report.checks {
                println!("{}: {}", c.name, if c.pass { "PASS" } else { "FAIL" });
            }
            if let Some(cert) = &outcome.report.certificate {
                println!("certificate: {}", cert.verdict.as_str());
            }
            println!("verdict: {}", outcome.report.verdict().as_str());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
