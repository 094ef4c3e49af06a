//! Runs every brute-force oracle against the numerical core and prints the
//! report table.
//!
//! cargo run --release --example oracle_suite

use std::time::Instant;

use kineme_lab::synth::oracle::{oracle_suite, OracleConfig};

fn main() -> kineme_lab::Result<()> {
    let start = Instant::now();
    let report = oracle_suite(&OracleConfig::default())?;
    print!("{report}");
    println!(
        "{} in {:.1} s",
        if report.passed() {
            "all oracles pass"
        } else {
            "oracle failure"
        },
        start.elapsed().as_secs_f64()
    );
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
