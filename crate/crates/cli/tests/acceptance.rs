//! One pass/fail line per acceptance criterion.
//!
//! Criteria 1 to 8 run through the library. Criterion 9 runs `bivmac verify`
//! twice with different worker counts and compares the reports byte for byte.

use std::process::{Command, ExitCode};

use bivmac::acceptance::{self, CheckOutcome, DEFAULT_SEED};

fn verify_report(threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bivmac"))
        .args([
            "verify",
            "--seed",
            &DEFAULT_SEED.to_string(),
            "--threads",
            threads,
        ])
        .env_remove("BIVMAC_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0) | Some(3) => Ok(out.stdout),
        code => Err(format!(
            "exit {code:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        )),
    }
}

fn determinism_via_binary() -> CheckOutcome {
    let start = std::time::Instant::now();
    let (passed, summary) = match (verify_report("1"), verify_report("4")) {
        (Ok(a), Ok(b)) => (
            a == b && !a.is_empty(),
            format!(
                "`verify` with 1 and 4 threads: {} bytes each, identical: {}",
                a.len(),
                a == b
            ),
        ),
        (Err(e), _) | (_, Err(e)) => (false, format!("verify failed to run: {e}")),
    };
    CheckOutcome {
        id: 9,
        name: "determinism".into(),
        passed,
        summary,
        elapsed: start.elapsed(),
    }
}

fn run() -> Result<Vec<CheckOutcome>, bivmac::Error> {
    let seed = DEFAULT_SEED;
    let (mc, sim) = acceptance::uncoded_monte_carlo(seed)?;
    Ok(vec![
        acceptance::oracle_equivalence()?,
        acceptance::case_continuity(seed)?,
        acceptance::uncoded_optimality()?,
        mc,
        acceptance::uncoded_closed_form(&sim)?,
        acceptance::independent_coincidence()?,
        acceptance::high_snr_scaling()?,
        acceptance::vq_trends(seed)?,
        determinism_via_binary(),
    ])
}

fn main() -> ExitCode {
    let checks = match run() {
        Ok(c) => c,
        Err(e) => {
            println!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &checks {
        println!("{c} ({:.2} s)", c.elapsed.as_secs_f64());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
