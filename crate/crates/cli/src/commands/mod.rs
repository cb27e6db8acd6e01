pub mod analyze;
pub mod estimate;
pub mod experiment;
pub mod gen;
