pub mod error;
pub mod laurent;
pub mod point;
pub mod flatchart;
pub mod frobstruct;
pub mod pencil;
pub mod potential;
pub mod report;
pub mod suites;
pub mod toda;

pub use error::{Error, Result};
