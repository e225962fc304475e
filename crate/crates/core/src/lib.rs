//! Program-analysis rewards for reinforcement learning on code generation.
//!
//! Candidates are parsed into a CFG/SSA form, checked by taint-based CWE
//! detectors or maintainability checks, executed against unit tests in a
//! subprocess sandbox, and combined into a hybrid reward.

pub mod detectors;
pub mod eval;
pub mod exec;
pub mod finding;
pub mod frontend;
pub mod maintainability;
pub mod reward;
pub mod taint;
pub mod task;
