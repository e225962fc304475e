//! Runs the maintainability checks on files: `lint FILE...`.

use pa_reward::maintainability::maintainability_verdict;

fn main() {
    for path in std::env::args().skip(1) {
        let src = std::fs::read_to_string(&path).expect("readable file");
        match maintainability_verdict(&src) {
            Ok(r) => {
                println!("{path}: {} finding(s)", r.findings.len());
                for f in r.findings {
                    println!("  {} {} {}", f.span, f.kind.as_str(), f.message);
                }
            }
            Err(e) => println!("{path}: {e}"),
        }
    }
}
