//! Conformance runner: executes a workload script against both the plaintext
//! oracle and a live client/server pair speaking the real wire protocol over
//! an in-memory stream, asserting exact result-set equality at every search.

use std::fmt;
use std::sync::Arc;
use std::thread;

use bamboo_core::client::{Client, PaddingPolicy};
use bamboo_core::server::EncryptedDatabase;
use bamboo_core::{CoreError, FileId, GroupParams, Op};
use bamboo_wire::inmem::duplex;
use bamboo_wire::{ClientSession, EdbService};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::BenchError;
use crate::oracle::{PlainIndex, Step};
use crate::workload::WorkloadScript;

#[derive(Debug, Clone)]
pub struct PairConfig {
    pub policy: PaddingPolicy,
    pub a_max: u64,
    pub x: u64,
    pub workers: usize,
}

impl Default for PairConfig {
    fn default() -> PairConfig {
        PairConfig {
            policy: PaddingPolicy::Max,
            a_max: 512,
            x: 2,
            workers: 1,
        }
    }
}

/// A search whose encrypted result set disagreed with the oracle.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub step: usize,
    pub keyword: String,
    pub expected: Vec<String>,
    pub got: Vec<String>,
}

#[derive(Debug, Default)]
pub struct ConformanceReport {
    pub steps: usize,
    pub updates: usize,
    pub searches: usize,
    pub rotations: usize,
    pub divergences: Vec<Divergence>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} steps ({} updates, {} searches, {} rotations): {}",
            self.steps,
            self.updates,
            self.searches,
            self.rotations,
            if self.passed() {
                "no divergences".to_string()
            } else {
                format!("{} divergences", self.divergences.len())
            }
        )?;
        if let Some(first) = self.divergences.first() {
            write!(
                f,
                "; first at step {} keyword {:?}: expected {:?}, got {:?}",
                first.step, first.keyword, first.expected, first.got
            )?;
        }
        Ok(())
    }
}

/// Runs one script end to end. The crypto RNG is seeded from the script seed
/// so an observed divergence replays exactly.
pub fn run_conformance(
    params: GroupParams,
    script: &WorkloadScript,
    cfg: &PairConfig,
) -> Result<ConformanceReport, BenchError> {
    let mut rng = ChaCha20Rng::seed_from_u64(script.seed ^ 0x5eed_c0de);
    let mut client = Client::in_memory(params, cfg.a_max, cfg.x, &mut rng)?;
    let service = Arc::new(EdbService::new(EncryptedDatabase::empty(), params, cfg.workers));
    let (ours, theirs) = duplex();
    let server = {
        let service = Arc::clone(&service);
        thread::spawn(move || service.serve_connection(theirs))
    };
    let mut session = ClientSession::new(ours);

    let mut oracle = PlainIndex::new();
    let mut report = ConformanceReport {
        steps: script.steps.len(),
        ..Default::default()
    };

    for (i, step) in script.steps.iter().enumerate() {
        match step {
            Step::Add(w, id) | Step::Del(w, id) => {
                let op = if matches!(step, Step::Add(..)) { Op::Add } else { Op::Del };
                let ct = client.data_update(op, w, id, &mut rng)?;
                session.data_update(client.epoch(), &ct)?;
                oracle.update(w, op, id.clone());
                report.updates += 1;
            }
            Step::Search(w) => {
                report.searches += 1;
                let expected = oracle.search(w);
                let got = match client.trapdoor(w, cfg.policy, &mut rng) {
                    Err(CoreError::UnknownKeyword) => {
                        // Never-updated keywords abort locally; the oracle
                        // must agree there is nothing to find.
                        if oracle.update_count(w) == 0 {
                            continue;
                        }
                        Vec::new()
                    }
                    Err(e) => return Err(e.into()),
                    Ok(td) => {
                        let components = session.search(&td)?;
                        let live = client.decrypt_results(w, &components)?;
                        live.into_iter().collect::<Vec<FileId>>()
                    }
                };
                if got != expected {
                    report.divergences.push(Divergence {
                        step: i,
                        keyword: w.clone(),
                        expected: expected.iter().map(FileId::to_hex).collect(),
                        got: got.iter().map(FileId::to_hex).collect(),
                    });
                }
            }
            Step::Rotate => {
                let token = client.key_update(&mut rng)?;
                let new_epoch = session.key_update(&token)?;
                debug_assert_eq!(new_epoch, client.epoch());
                report.rotations += 1;
            }
        }
    }

    drop(session);
    server.join().map_err(|_| BenchError::ServerPanic)??;
    Ok(report)
}
