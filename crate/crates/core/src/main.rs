use clap::Parser;
use opkernel::cli::{self, RunConfig};

fn main() {
    let cfg = RunConfig::parse();
    cli::configure_threads();
    let outcome = cli::run(&cfg);
    if let Some(err) = outcome.report.get("error").and_then(|e| e.as_str()) {
        eprintln!("opkernel: {err}");
    }
    if let Err(err) = cli::write_report(&cfg, &outcome) {
        eprintln!("opkernel: {err}");
        std::process::exit(cli::exit_status(&err));
    }
    std::process::exit(outcome.status);
}
