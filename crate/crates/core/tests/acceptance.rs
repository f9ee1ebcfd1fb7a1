//! Runs every acceptance criterion at its stated tolerance and prints one
//! line per criterion.

use canard_core::verify::{run_suite, Suite};

fn main() {
    let reports = run_suite(Suite::All);
    for r in &reports {
        println!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {} failed", reports.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
