//! Seeded workload scripts: reproducible step lists with configurable
//! delete/search mix, rotation count, and an optional Zipf-shaped keyword
//! frequency to mimic natural corpora.

use std::collections::HashMap;

use bamboo_core::{FileId, GroupParams};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::Zipf;

use crate::error::BenchError;
use crate::oracle::Step;

#[derive(Debug, Clone)]
pub struct WorkloadConfig {
    pub seed: u64,
    pub steps: usize,
    pub keywords: usize,
    /// Fraction of steps that are deletes.
    pub del_ratio: f64,
    /// Fraction of steps that are searches.
    pub search_ratio: f64,
    /// Rotations interleaved at random positions (counted within `steps`).
    pub rotations: usize,
    /// Zipf exponent for keyword picks; `None` selects uniformly.
    pub zipf_exponent: Option<f64>,
}

impl Default for WorkloadConfig {
    fn default() -> WorkloadConfig {
        WorkloadConfig {
            seed: 0,
            steps: 1000,
            keywords: 50,
            del_ratio: 0.3,
            search_ratio: 0.05,
            rotations: 2,
            zipf_exponent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadScript {
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl WorkloadScript {
    /// Generates a reproducible script: the same config yields the same
    /// steps, byte for byte.
    pub fn generate(params: &GroupParams, cfg: &WorkloadConfig) -> WorkloadScript {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let keywords: Vec<String> = (0..cfg.keywords.max(1)).map(|i| format!("kw{i:03}")).collect();
        let zipf = cfg
            .zipf_exponent
            .map(|s| Zipf::new(keywords.len() as u64, s).expect("valid zipf parameters"));

        let mut rotate_at: Vec<usize> = (0..cfg.steps).collect();
        rotate_at.shuffle(&mut rng);
        rotate_at.truncate(cfg.rotations.min(cfg.steps));
        rotate_at.sort_unstable();

        // Track prior updates so deletes can target real ids and searches
        // only hit keywords the client knows about.
        let mut added: HashMap<usize, Vec<FileId>> = HashMap::new();
        let mut updated: Vec<usize> = Vec::new();
        let mut steps = Vec::with_capacity(cfg.steps);
        for i in 0..cfg.steps {
            if rotate_at.binary_search(&i).is_ok() {
                steps.push(Step::Rotate);
                continue;
            }
            let kw_idx = match &zipf {
                Some(z) => (z.sample(&mut rng) as usize - 1).min(keywords.len() - 1),
                None => rng.gen_range(0..keywords.len()),
            };
            let roll: f64 = rng.gen();
            if roll < cfg.search_ratio {
                if updated.is_empty() {
                    steps.push(Step::Add(keywords[kw_idx].clone(), random_id(params, &mut rng)));
                    record_add(&mut added, &mut updated, kw_idx, &steps);
                } else {
                    let target = updated[rng.gen_range(0..updated.len())];
                    steps.push(Step::Search(keywords[target].clone()));
                }
            } else if roll < cfg.search_ratio + cfg.del_ratio {
                // Mostly delete something that was added; occasionally issue
                // a dangling delete to exercise the no-op path.
                let ids = added.get(&kw_idx);
                let id = match ids {
                    Some(ids) if !ids.is_empty() && rng.gen_bool(0.9) => {
                        ids[rng.gen_range(0..ids.len())].clone()
                    }
                    _ => random_id(params, &mut rng),
                };
                steps.push(Step::Del(keywords[kw_idx].clone(), id));
                if !updated.contains(&kw_idx) {
                    updated.push(kw_idx);
                }
            } else {
                steps.push(Step::Add(keywords[kw_idx].clone(), random_id(params, &mut rng)));
                record_add(&mut added, &mut updated, kw_idx, &steps);
            }
        }
        WorkloadScript { seed: cfg.seed, steps }
    }

    /// Serializes to the script file format: a `seed=<u64>` header, then one
    /// step per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("seed={}\n", self.seed);
        for step in &self.steps {
            match step {
                Step::Add(w, id) => out.push_str(&format!("add {w} {}\n", id.to_hex())),
                Step::Del(w, id) => out.push_str(&format!("del {w} {}\n", id.to_hex())),
                Step::Search(w) => out.push_str(&format!("search {w}\n")),
                Step::Rotate => out.push_str("rotate\n"),
            }
        }
        out
    }

    pub fn parse(params: &GroupParams, text: &str) -> Result<WorkloadScript, BenchError> {
        let mut lines = text.lines().enumerate();
        let seed = loop {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| BenchError::parse(0, "missing seed header"))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value = line
                .strip_prefix("seed=")
                .ok_or_else(|| BenchError::parse(lineno + 1, "expected `seed=<u64>` header"))?;
            break value
                .parse::<u64>()
                .map_err(|_| BenchError::parse(lineno + 1, "seed is not a u64"))?;
        };

        let mut steps = Vec::new();
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let step = match parts.next() {
                Some("add") | Some("del") => {
                    let op = line.starts_with("add");
                    let keyword = parts
                        .next()
                        .ok_or_else(|| BenchError::parse(lineno + 1, "missing keyword"))?
                        .to_string();
                    let hex = parts
                        .next()
                        .ok_or_else(|| BenchError::parse(lineno + 1, "missing identifier"))?;
                    let id = FileId::from_hex(params, hex)
                        .map_err(|e| BenchError::parse(lineno + 1, &e.to_string()))?;
                    if op {
                        Step::Add(keyword, id)
                    } else {
                        Step::Del(keyword, id)
                    }
                }
                Some("search") => Step::Search(
                    parts
                        .next()
                        .ok_or_else(|| BenchError::parse(lineno + 1, "missing keyword"))?
                        .to_string(),
                ),
                Some("rotate") => Step::Rotate,
                _ => return Err(BenchError::parse(lineno + 1, "unknown step")),
            };
            if parts.next().is_some() {
                return Err(BenchError::parse(lineno + 1, "trailing tokens"));
            }
            steps.push(step);
        }
        Ok(WorkloadScript { seed, steps })
    }
}

fn record_add(
    added: &mut HashMap<usize, Vec<FileId>>,
    updated: &mut Vec<usize>,
    kw_idx: usize,
    steps: &[Step],
) {
    if let Some(Step::Add(_, id)) = steps.last() {
        added.entry(kw_idx).or_default().push(id.clone());
    }
    if !updated.contains(&kw_idx) {
        updated.push(kw_idx);
    }
}

fn random_id(params: &GroupParams, rng: &mut impl Rng) -> FileId {
    loop {
        let v = rng.gen_range(1u64..=u64::MAX >> 1);
        if let Ok(id) = FileId::from_u64(params, v) {
            return id;
        }
    }
}
