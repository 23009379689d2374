//! Lie point symmetries of semi-linear parabolic PDEs with terminal
//! condition and of the associated uncoupled FBSDEs, with exact symbolic
//! machinery and numerical cross-checks.

pub mod ansatz;
pub mod calculus;
pub mod catalog;
pub mod determining;
pub mod expr;
pub mod linalg;
pub mod numerics;
pub mod par;
pub mod problem;
pub mod reductions;
