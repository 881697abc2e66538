//! IO, file formats, benchmarking, and process adapters around the
//! `vigil-core` engine. The `vigil` binary in this crate exposes the
//! pipelines on the command line.

pub mod bench;
pub mod config;
pub mod jsonl;
pub mod pnm;
pub mod proc;
pub mod report;
