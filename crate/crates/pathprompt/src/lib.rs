//! Python front end, completion backends, artifact formats and the pipeline
//! driving path-constraint test generation.

pub mod backend;
pub mod config;
pub mod manifest;
pub mod parser;
pub mod pipeline;
pub mod sandbox;

pub use pathprompt_core;
