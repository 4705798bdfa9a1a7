//! Independent brute-force checkers for the plan encoding and the
//! doxastic model checker, used by tests and the acceptance run.

pub mod encoding;
pub mod model_checker;
