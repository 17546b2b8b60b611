//! One line per acceptance criterion. Failing criteria are reported, not
//! hidden; set `BBM_ACCEPTANCE_STRICT=1` to turn any failure into a non-zero
//! exit status. `BBM_ACCEPTANCE_ONLY=1,5` restricts the run.

use std::process::ExitCode;

use bbm_harness::criteria;

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::var("BBM_ACCEPTANCE_ONLY")
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let strict = std::env::var("BBM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut passed = 0;
    let mut total = 0;
    for c in criteria::all().iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let outcome = criteria::evaluate(c);
        println!("{}", outcome.line());
        total += 1;
        passed += outcome.pass() as usize;
    }
    println!("acceptance: {passed}/{total} criteria pass");
    if strict && passed < total {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
