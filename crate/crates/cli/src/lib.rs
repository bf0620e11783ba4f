//! Benchmark harness behind the `switchmd` binary: seeded instance
//! generation, one solver run per requested accuracy, and CSV/JSON report
//! emission. Lives in a library so the formats and invariants are testable
//! without spawning the binary.

pub mod bench;

pub use bench::{
    run_bench, Algorithm, BenchConfig, BenchRow, GeometryKind, OutputFormat, RowOutcome, SetKind,
};
