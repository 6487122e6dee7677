//! Joint channel and parameter estimation for RIS-assisted wideband MIMO
//! links using tensor decompositions.

pub mod linalg;
pub mod tensor;
pub mod array;
pub mod presets;
pub mod probing;
pub mod esprit;
pub mod vscpd;
pub mod estimator;
pub mod crlb;
pub mod harness;
