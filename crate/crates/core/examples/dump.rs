//! Prints the CFG and SSA listing of a source file.
fn main() {
    let path = std::env::args().nth(1).expect("usage: dump <file.py>");
    let src = std::fs::read_to_string(path).expect("readable file");
    match pa_reward::frontend::analyze_source(&src) {
        Ok(a) => {
            print!("{}", pa_reward::frontend::dump(&a, false));
            print!("{}", pa_reward::frontend::dump(&a, true));
        }
        Err(e) => eprintln!("{e}"),
    }
}
