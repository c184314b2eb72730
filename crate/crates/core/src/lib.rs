pub mod classifier;
pub mod dumpgen;
pub mod encoding;
pub mod engine;
pub mod kb;
pub mod keys;
pub mod parser;
pub mod redactor;
pub mod report;
