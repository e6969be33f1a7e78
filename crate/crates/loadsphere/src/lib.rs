pub mod cli;
pub mod curve;
pub mod embedding;
pub mod error;
pub mod generative;
pub mod oracle;
mod parallel;
pub mod profiles;
pub mod sphere;
pub mod stats;
