//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use bd_sym::acceptance::{run, CRITERIA};

fn main() -> ExitCode {
    let mut failed = 0;
    for &(id, _) in CRITERIA.iter() {
        let start = Instant::now();
        let result = run(id);
        println!("{result} ({:.1} s)", start.elapsed().as_secs_f64());
        if !result.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
