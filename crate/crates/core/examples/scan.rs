//! Runs the detectors on files: `scan CWE-ID FILE...`.

use pa_reward::detectors::{detect_source, DetectorRegistry};
use pa_reward::finding::CweId;

fn main() {
    let mut args = std::env::args().skip(1);
    let cwe: CweId = args.next().expect("cwe id").parse().expect("valid cwe");
    let reg = DetectorRegistry::builtin();
    for path in args {
        let src = std::fs::read_to_string(&path).expect("readable file");
        match detect_source(&src, &[cwe], &reg) {
            Ok(fs) => {
                println!("{path}: {} finding(s)", fs.len());
                for f in fs {
                    println!("  {} {}", f.span, f.message);
                    for h in f.evidence.hops() {
                        println!("    {}:{} {}    [{}]", h.line, h.col, h.text, h.note);
                    }
                }
            }
            Err(e) => println!("{path}: error {e}"),
        }
    }
}
