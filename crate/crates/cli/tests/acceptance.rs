//! Acceptance criteria 1 to 10, one line each. Criteria 1 to 9 are the
//! verification suites at seed 7; criterion 10 reruns `verify all` with a
//! different thread count and compares the report bytes.

use serde_json::Value;
use std::process::{Command, ExitCode};
use std::time::Instant;

const CRITERIA: [(&str, &str); 9] = [
    ("strip", "Poisson strip killing level is uniform"),
    ("terminal", "stable terminal law KS"),
    ("killing", "q-sequence extrapolates to the conditioned value"),
    ("lamperti", "stable and Lamperti exact identities, extracted exponent"),
    ("undershoot", "stable undershoot law KS"),
    ("potential", "closed form, inversion and Monte Carlo agree"),
    ("lastpassage", "CTMC identities, g law and marginal"),
    ("overshoot", "strip terminal law vs last zero of the overshoot"),
    ("ladderbox", "Brownian ladder box identities and samplers"),
];

fn verify_all(threads: &str) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_condsub"))
        .args(["verify", "all", "--seed", "7", "--threads", threads])
        .output()
        .expect("run condsub");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let (code1, bytes1) = verify_all("1");
    let report: Value = serde_json::from_slice(&bytes1).expect("verify emits a JSON report");
    let suites = report["suites"].as_array().expect("suites array");
    let mut all_ok = true;
    for (k, (suite, what)) in CRITERIA.iter().enumerate() {
        let found = suites.iter().find(|s| s["suite"] == *suite);
        let (ok, detail) = match found {
            None => (false, "suite missing from report".to_string()),
            Some(s) => {
                let reports = s["reports"].as_array().cloned().unwrap_or_default();
                let bad: Vec<String> = reports
                    .iter()
                    .filter(|r| r["status"] != "pass")
                    .map(|r| format!("{} [{}]", r["name"].as_str().unwrap_or("?"), r["status"].as_str().unwrap_or("?")))
                    .collect();
                let ok = s["passed"] == true && bad.is_empty() && !reports.is_empty();
                let detail = if bad.is_empty() {
                    format!("{} checks", reports.len())
                } else {
                    format!("{} of {} checks failed: {}", bad.len(), reports.len(), bad.join("; "))
                };
                (ok, detail)
            }
        };
        all_ok &= ok;
        println!("criterion {:>2} {:<11} {}  {what}: {detail}", k + 1, suite, if ok { "PASS" } else { "FAIL" });
    }
    let (code8, bytes8) = verify_all("8");
    let same = bytes1 == bytes8 && code1 == code8;
    all_ok &= same && code1 == 0;
    println!(
        "criterion 10 determinism  {}  threads 1 vs 8: {} bytes, {}",
        if same { "PASS" } else { "FAIL" },
        bytes1.len(),
        if same { "identical" } else { "reports differ" }
    );
    println!("acceptance finished in {:.0} s", start.elapsed().as_secs_f64());
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
