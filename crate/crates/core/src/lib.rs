pub mod cli;
pub mod data;
pub mod error;
pub mod geom;
pub mod gradsuite;
pub mod imageproc;
pub mod locate;
pub mod metrics;
pub mod nn;
mod parallel;
pub mod quantify;
pub mod reference;
pub mod tensor;
