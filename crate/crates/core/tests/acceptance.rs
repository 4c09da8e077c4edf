//! Runs every acceptance criterion on the built-in models and prints one
//! pass/fail line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use convlab::suite::{run_suite, CriterionStatus};

fn main() -> ExitCode {
    let seed = std::env::var("CONVLAB_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let start = Instant::now();
    let summary = match run_suite(&[], seed, |c| println!("{}", c.line())) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("suite failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let failed = summary.criteria.iter().filter(|c| c.status == CriterionStatus::Fail).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        summary.criteria.len() - failed,
        summary.criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
