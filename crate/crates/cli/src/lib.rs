//! Plan runner and theory report behind the `bomuse` binary.

pub mod experiment;
pub mod report;
