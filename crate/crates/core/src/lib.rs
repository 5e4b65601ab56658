//! A desk-scale workbench for step-bounded Kolmogorov and instance complexity
//! over a fixed toy machine, with stage-by-stage simulators of classic
//! effective constructions on r.e. sets.

pub mod bitstr;
pub mod cache;
pub mod complexity;
pub mod constructions;
pub mod icc;
pub mod oracle;
pub mod registry;
pub mod trace;
pub mod vm;
