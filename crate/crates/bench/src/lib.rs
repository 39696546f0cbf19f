//! Verification and measurement harness: the plaintext oracle that defines
//! correct search results, a seeded workload generator, a conformance runner
//! that faces the oracle off against a live client/server pair, and the
//! desk-scale scaling benchmarks.

pub mod conformance;
pub mod error;
pub mod oracle;
pub mod scaling;
pub mod workload;

pub use conformance::{run_conformance, ConformanceReport, Divergence, PairConfig};
pub use error::BenchError;
pub use oracle::{PlainIndex, Step};
pub use scaling::{
    bench_bandwidth, bench_data_update, bench_rotate, bench_search, run_scaling, synthetic_database,
    to_csv, BandwidthReport, BandwidthSample, MetricsRow, Suite,
};
pub use workload::{WorkloadConfig, WorkloadScript};
