//! Finite-difference check of every layer, head, encoder mode and language
//! model in double precision.
//!
//!     cargo run --release --example gradient_check

use mgt_detect::gradsuite::run_suite;
use mgt_detect::numerics::GradCheckConfig;

fn main() {
    let start = std::time::Instant::now();
    let report = run_suite(&GradCheckConfig::default());
    print!("{}", report.render_table());
    println!(
        "{} cases, max rel err {:.2e}, {:.2}s",
        report.cases.len(),
        report.max_rel_err(),
        start.elapsed().as_secs_f64()
    );
    if !report.passed() {
        std::process::exit(1);
    }
}
