//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;

use lasso_replica::acceptance;

fn main() -> ExitCode {
    let criteria: [fn() -> acceptance::CriterionReport; 13] = [
        acceptance::criterion_1,
        acceptance::criterion_2,
        acceptance::criterion_3,
        acceptance::criterion_4,
        acceptance::criterion_5,
        acceptance::criterion_6,
        acceptance::criterion_7,
        acceptance::criterion_8,
        acceptance::criterion_9,
        acceptance::criterion_10,
        acceptance::criterion_11,
        acceptance::criterion_12,
        acceptance::criterion_13,
    ];
    let mut failed = 0;
    for criterion in criteria {
        let report = criterion();
        println!("{report}");
        if !report.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
