//! Desk-scale scaling benchmarks: per-operation timings across database
//! sizes and worker counts, plus padded-bandwidth accounting under both
//! padding policies. Absolute numbers are hardware-bound; the interesting
//! outputs are the shapes (constant update cost, linear rotation, linear
//! search) and the byte counts.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use bamboo_core::client::{Client, KeyUpdateToken, PaddingPolicy};
use bamboo_core::group::Scalar;
use bamboo_core::server::{EdbBackend, EncryptedDatabase, MemoryBackend, RecordBytes};
use bamboo_core::{FileId, GroupElement, GroupParams, Op};
use bamboo_wire::inmem::duplex;
use bamboo_wire::{ClientSession, EdbService};
use rand::Rng;
use rayon::prelude::*;

use crate::error::BenchError;

/// One metrics line: `{op, N, workers, policy, median_us, bytes}`.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub op: String,
    pub n: u64,
    pub workers: usize,
    pub policy: String,
    pub median_us: u64,
    pub bytes: u64,
}

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("op,n,workers,policy,median_us,bytes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.op, r.n, r.workers, r.policy, r.median_us, r.bytes
        ));
    }
    out
}

fn median_us(mut samples: Vec<Duration>) -> u64 {
    samples.sort_unstable();
    samples[samples.len() / 2].as_micros() as u64
}

/// Fills a database with `n` synthetic records (uniform random elements).
/// Content is never linked by these benchmarks, only stored and re-keyed.
pub fn synthetic_database(n: u64) -> EncryptedDatabase<MemoryBackend> {
    let records: Vec<RecordBytes> = (0..n)
        .into_par_iter()
        .map(|_| {
            let mut rng = rand::thread_rng();
            (
                GroupElement::random(&mut rng).to_bytes(),
                GroupElement::random(&mut rng).to_bytes(),
                GroupElement::random(&mut rng).to_bytes(),
            )
        })
        .collect();
    let mut backend = MemoryBackend::with_capacity(0, n as usize);
    backend.swap_epoch(0, records);
    EncryptedDatabase::new(backend)
}

/// Times client-side data-update generation plus the store, at several
/// database sizes. The constant-cost claim means these medians should not
/// drift with N.
pub fn bench_data_update(
    params: GroupParams,
    sizes: &[u64],
    samples: usize,
) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    let mut rng = rand::thread_rng();
    for &n in sizes {
        let mut edb = synthetic_database(n);
        let mut client = Client::in_memory(params, 1 << 20, 2, &mut rng)?;
        let mut update = |i: usize, timed: bool| -> Result<Option<Duration>, BenchError> {
            let keyword = format!("k{:02}", i % 50);
            let id = FileId::from_u64(&params, rng.gen_range(1..u64::MAX >> 1)).unwrap();
            let start = timed.then(Instant::now);
            let ct = client.data_update(Op::Add, &keyword, &id, &mut rand::thread_rng())?;
            edb.store(0, &ct)?;
            Ok(start.map(|s| s.elapsed()))
        };
        for i in 0..10 {
            update(i, false)?; // warm-up
        }
        let mut durations = Vec::with_capacity(samples);
        for i in 0..samples {
            durations.push(update(i, true)?.unwrap());
        }
        rows.push(MetricsRow {
            op: "data_update".into(),
            n,
            workers: 1,
            policy: "-".into(),
            median_us: median_us(durations),
            bytes: 99,
        });
    }
    Ok(rows)
}

/// Times whole-database rotations for every (size, workers) combination.
/// One untimed warm-up rotation runs per size.
pub fn bench_rotate(
    sizes: &[u64],
    workers: &[usize],
    runs: usize,
) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    let mut rng = rand::thread_rng();
    for &n in sizes {
        let mut edb = synthetic_database(n);
        let mut epoch = 0u64;
        let mut rotate = |edb: &mut EncryptedDatabase<MemoryBackend>,
                          epoch: &mut u64,
                          w: usize|
         -> Result<Duration, BenchError> {
            let token = KeyUpdateToken {
                delta: Scalar::random(&mut rng),
                new_epoch: *epoch + 1,
            };
            let start = Instant::now();
            edb.rotate(&token, w)?;
            *epoch += 1;
            Ok(start.elapsed())
        };
        rotate(&mut edb, &mut epoch, workers[0])?; // warm-up
        for &w in workers {
            let mut durations = Vec::with_capacity(runs);
            for _ in 0..runs {
                durations.push(rotate(&mut edb, &mut epoch, w)?);
            }
            rows.push(MetricsRow {
                op: "rotate".into(),
                n,
                workers: w,
                policy: "-".into(),
                median_us: median_us(durations),
                bytes: 32,
            });
        }
    }
    Ok(rows)
}

/// Times server-side searches over chains of the given lengths. Each chain
/// gets its own client whose `a_max` is the next power of two, so the padded
/// response stays proportional to the chain.
pub fn bench_search(
    params: GroupParams,
    chain_lens: &[u32],
    runs: usize,
) -> Result<Vec<MetricsRow>, BenchError> {
    let mut rows = Vec::new();
    let mut rng = rand::thread_rng();
    for &len in chain_lens {
        let a_max = u64::from(len).next_power_of_two();
        let mut client = Client::in_memory(params, a_max, 2, &mut rng)?;
        let mut edb = EncryptedDatabase::empty();
        for v in 1..=len {
            let id = FileId::from_u64(&params, v as u64).unwrap();
            let ct = client.data_update(Op::Add, "chain", &id, &mut rng)?;
            edb.store(0, &ct)?;
        }
        let td = client.trapdoor("chain", PaddingPolicy::Max, &mut rng)?;
        let warm = edb.search(&params, &td, &mut rng)?;
        assert_eq!(warm.found as u32, len);
        let mut durations = Vec::with_capacity(runs);
        for _ in 0..runs {
            let start = Instant::now();
            let resp = edb.search(&params, &td, &mut rng)?;
            durations.push(start.elapsed());
            debug_assert_eq!(resp.components.len() as u64, a_max);
        }
        rows.push(MetricsRow {
            op: "search".into(),
            n: len as u64,
            workers: 1,
            policy: "max".into(),
            median_us: median_us(durations),
            bytes: a_max * 33,
        });
    }
    Ok(rows)
}

/// One keyword's measured search under both padding policies.
#[derive(Debug, Clone)]
pub struct BandwidthSample {
    pub keyword: String,
    pub updates: u32,
    /// Response payload bytes under the fixed-maximum policy.
    pub max_bytes: u64,
    /// Response payload bytes under the adjustable policy.
    pub adjustable_bytes: u64,
    pub max_us: u64,
    pub adjustable_us: u64,
}

#[derive(Debug, Default)]
pub struct BandwidthReport {
    pub samples: Vec<BandwidthSample>,
}

impl BandwidthReport {
    pub fn total_max_bytes(&self) -> u64 {
        self.samples.iter().map(|s| s.max_bytes).sum()
    }

    pub fn total_adjustable_bytes(&self) -> u64 {
        self.samples.iter().map(|s| s.adjustable_bytes).sum()
    }

    pub fn rows(&self) -> Vec<MetricsRow> {
        let mut rows = Vec::with_capacity(self.samples.len() * 2);
        for s in &self.samples {
            rows.push(MetricsRow {
                op: "search_bandwidth".into(),
                n: s.updates as u64,
                workers: 1,
                policy: "max".into(),
                median_us: s.max_us,
                bytes: s.max_bytes,
            });
            rows.push(MetricsRow {
                op: "search_bandwidth".into(),
                n: s.updates as u64,
                workers: 1,
                policy: "adjustable".into(),
                median_us: s.adjustable_us,
                bytes: s.adjustable_bytes,
            });
        }
        rows
    }
}

/// Builds a Zipf-shaped corpus (keyword ranked `i` gets about
/// `base / i^exponent` updates), then searches every keyword over the wire
/// under both policies, recording payload bytes and wall time.
pub fn bench_bandwidth(
    params: GroupParams,
    keywords: usize,
    a_max: u64,
    x: u64,
    exponent: f64,
    base_count: u32,
) -> Result<BandwidthReport, BenchError> {
    let mut rng = rand::thread_rng();
    let mut client = Client::in_memory(params, a_max, x, &mut rng)?;
    let mut edb = EncryptedDatabase::empty();
    let mut counts = Vec::with_capacity(keywords);
    for i in 0..keywords {
        let count = ((base_count as f64 / ((i + 1) as f64).powf(exponent)).round() as u32).max(1);
        counts.push((format!("kw{i:03}"), count));
    }
    for (keyword, count) in &counts {
        for v in 1..=*count {
            let id = FileId::from_u64(&params, v as u64)?;
            let ct = client.data_update(Op::Add, keyword, &id, &mut rng)?;
            edb.store(0, &ct)?;
        }
    }

    let service = Arc::new(EdbService::new(edb, params, 1));
    let (ours, theirs) = duplex();
    let server = {
        let service = Arc::clone(&service);
        thread::spawn(move || service.serve_connection(theirs))
    };
    let mut session = ClientSession::new(ours);

    let mut report = BandwidthReport::default();
    for (keyword, count) in &counts {
        let mut run = |policy: PaddingPolicy| -> Result<(u64, u64), BenchError> {
            let td = client.trapdoor(keyword, policy, &mut rng)?;
            let start = Instant::now();
            let components = session.search(&td)?;
            let elapsed = start.elapsed().as_micros() as u64;
            Ok((components.len() as u64 * 33, elapsed))
        };
        let (max_bytes, max_us) = run(PaddingPolicy::Max)?;
        let (adjustable_bytes, adjustable_us) = run(PaddingPolicy::Adjustable)?;
        report.samples.push(BandwidthSample {
            keyword: keyword.clone(),
            updates: *count,
            max_bytes,
            adjustable_bytes,
            max_us,
            adjustable_us,
        });
    }

    drop(session);
    server.join().map_err(|_| BenchError::ServerPanic)??;
    Ok(report)
}

/// Named benchmark suites for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Update,
    Rotate,
    Search,
    Bandwidth,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Suite, String> {
        Ok(match s {
            "update" => Suite::Update,
            "rotate" => Suite::Rotate,
            "search" => Suite::Search,
            "bandwidth" => Suite::Bandwidth,
            "all" => Suite::All,
            other => return Err(format!("unknown suite {other:?} (expected update, rotate, search, bandwidth, or all)")),
        })
    }
}

/// Runs a suite at desk scale and returns the metrics table.
pub fn run_scaling(params: GroupParams, suite: Suite, runs: usize) -> Result<Vec<MetricsRow>, BenchError> {
    let runs = runs.max(1);
    let mut rows = Vec::new();
    if matches!(suite, Suite::Update | Suite::All) {
        rows.extend(bench_data_update(params, &[1_000, 10_000, 100_000], 100)?);
    }
    if matches!(suite, Suite::Rotate | Suite::All) {
        rows.extend(bench_rotate(&[1_000, 10_000], &[1], runs)?);
        rows.extend(bench_rotate(&[100_000], &[1, 2, 4], runs)?);
    }
    if matches!(suite, Suite::Search | Suite::All) {
        rows.extend(bench_search(params, &[100, 1_000, 10_000], runs)?);
    }
    if matches!(suite, Suite::Bandwidth | Suite::All) {
        rows.extend(bench_bandwidth(params, 100, 4_096, 2, 1.2, 300)?.rows());
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bamboo_core::pgen;

    #[test]
    fn csv_has_the_contract_columns() {
        let rows = vec![MetricsRow {
            op: "rotate".into(),
            n: 10,
            workers: 2,
            policy: "-".into(),
            median_us: 123,
            bytes: 32,
        }];
        let csv = to_csv(&rows);
        assert!(csv.starts_with("op,n,workers,policy,median_us,bytes\n"));
        assert!(csv.contains("rotate,10,2,-,123,32\n"));
    }

    #[test]
    fn synthetic_database_has_the_requested_size() {
        let edb = synthetic_database(500);
        assert_eq!(edb.len(), 500);
        assert_eq!(edb.epoch(), 0);
    }

    #[test]
    fn small_bandwidth_run_orders_policies() {
        let params = pgen(128, 128).unwrap();
        let report = bench_bandwidth(params, 12, 256, 2, 1.2, 40).unwrap();
        assert_eq!(report.samples.len(), 12);
        for s in &report.samples {
            assert!(s.adjustable_bytes <= s.max_bytes, "{s:?}");
        }
        assert!(report.total_adjustable_bytes() < report.total_max_bytes());
    }
}
