//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//! Set `ACCEPTANCE_ONLY=3,7` to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use monosde::Engine;
use monosde_cli::verify::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let engine = Engine::from_env();
    let seed = 20_240_917;
    let mut failed = 0;
    println!("\nrunning {} acceptance criteria", if only.is_empty() { CRITERIA.len() } else { only.len() });
    for (id, _) in CRITERIA.iter().filter(|(id, _)| only.is_empty() || only.contains(id)) {
        let start = Instant::now();
        let o = run_criterion(*id, seed, &engine);
        println!(
            "criterion {:>2} {:<24} ... {} ({:.1}s) {}",
            o.id,
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!("\nacceptance result: {} failed\n", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
