pub mod eval;
pub mod gen;
pub mod plotdata;
pub mod report;
