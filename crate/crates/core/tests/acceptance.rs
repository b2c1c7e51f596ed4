//! Runs the full acceptance suite and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use coupling_lab::verify::{verify_all, VerifyOptions};

fn main() -> ExitCode {
    let start = Instant::now();
    let opts = VerifyOptions::default();
    let (summary, _) = match verify_all(&opts, |r| println!("{}", r.line())) {
        Ok(v) => v,
        Err(e) => {
            println!("[FAIL] acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let passed = summary.criteria.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/{} criteria passed in {:.1} s", summary.criteria.len(), start.elapsed().as_secs_f64());
    if summary.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
