//! Turn-based open-domain dialogue engine.
//!
//! Each turn is processed without in-process memory: the previous
//! [`store::SessionRecord`] is fetched, the utterance is annotated, the
//! entity tracker and the response generators run, and the new record is
//! written back.

pub mod concurrency;
pub mod config;
pub mod corpus;
pub mod knowledge;
pub mod linker;
pub mod manager;
pub mod metrics;
pub mod neural;
pub mod nlp;
pub mod phonetics;
pub mod replay;
pub mod resources;
pub mod rgs;
pub mod store;
pub mod tracker;
pub mod treelet;
pub mod types;
