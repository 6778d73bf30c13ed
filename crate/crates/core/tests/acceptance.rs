//! Runs every acceptance criterion at its default tolerance and prints one
//! PASS/FAIL line per criterion. Exits nonzero when any criterion fails.

use std::process::ExitCode;

use eplab::harness::{Acceptance, Tolerances};

fn main() -> ExitCode {
    let suite = Acceptance::new(Tolerances::default());
    let outcomes = suite.run(&[], |o| println!("{}", o.line()));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 && outcomes.len() == 14 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
