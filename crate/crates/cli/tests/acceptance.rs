//! Acceptance suite: every criterion at its stated tolerance, one line each.

use std::process::ExitCode;
use std::time::Instant;

use pathheat::verify::{determinism, run, Profile};

fn main() -> ExitCode {
    let seed = 0;
    let start = Instant::now();
    let first = run(Profile::Desk, seed, 1).expect("verify run");
    let first_time = start.elapsed();
    let second = run(Profile::Desk, seed, 3).expect("verify run");
    let mut lines = first.lines();
    let det = determinism(&first, &second, (1, 3));
    lines.push(format!(
        "[{}] criterion {:>2} {}: {}",
        if det.passed { "PASS" } else { "FAIL" },
        det.id,
        det.name,
        det.summary
    ));
    println!("acceptance suite (seed {seed}, one pass took {:.1} s)", first_time.as_secs_f64());
    for l in &lines {
        println!("{l}");
    }
    let failures = first.criteria.iter().filter(|c| !c.passed).count() + usize::from(!det.passed);
    println!("{} of 11 criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
