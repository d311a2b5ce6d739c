//! Detection and repair of integer overflow and non-termination bugs in
//! small imperative programs.

pub mod lang;
pub mod overflow;
pub mod equiv;
pub mod io_repair;
pub mod termination;
pub mod term_repair;
pub mod harness;
