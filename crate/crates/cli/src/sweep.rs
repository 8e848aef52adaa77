use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Duration;

use kzmps::evolution::{cool_ground_state, run_sweep_with_reference, write_record, CheckpointPolicy, GroundState, RunRecord};
use kzmps::imps::{read_state, write_state};
use kzmps::Truncation;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::plan::{cell_key, ExperimentPlan};
use crate::results::{atomic_write, write_results, ResultRow};

/// Sidecar stored next to each cell's run record; resume reads only this.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CellSummary {
    plan_hash: String,
    key: String,
    row: ResultRow,
}

#[derive(Serialize, Deserialize)]
struct GroundFile {
    hash: String,
    energy: f64,
    steps: usize,
    last_change: f64,
    state: serde_json::Value,
}

pub struct SweepOutcome {
    pub computed: usize,
    pub cached: usize,
    pub failed: Vec<(String, String)>,
}

fn cells_dir(plan: &ExperimentPlan) -> PathBuf {
    plan.output.join("cells")
}

fn summary_path(plan: &ExperimentPlan, key: &str) -> PathBuf {
    cells_dir(plan).join(format!("{key}.summary.json"))
}

fn load_summary(path: &Path, hash: &str) -> Option<CellSummary> {
    let text = fs::read_to_string(path).ok()?;
    let s: CellSummary = serde_json::from_str(&text).ok()?;
    (s.plan_hash == hash).then_some(s)
}

fn ground_path(plan: &ExperimentPlan, chi: usize) -> PathBuf {
    plan.output.join("ground").join(format!("{}_chi{chi}.json", plan.model.kind))
}

/// Reference ground state for one bond dimension, from the cache when its
/// hash matches, otherwise cooled and stored.
fn ground_state(plan: &ExperimentPlan, chi: usize) -> Result<GroundState<f64>, String> {
    let path = ground_path(plan, chi);
    let hash = plan.ground_hash(chi);
    let trunc = Truncation::new(chi, plan.cutoff);
    let critical = plan.model.with_couplings(1.0, 1.0);
    if plan.resume {
        if let Some(g) = fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str::<GroundFile>(&t).ok()) {
            if g.hash == hash {
                let bytes = serde_json::to_vec(&g.state).map_err(|e| e.to_string())?;
                let mps = read_state(bytes.as_slice()).map_err(|e| e.to_string())?;
                return Ok(GroundState { mps, energy: g.energy, model: critical, trunc, steps: g.steps, last_change: g.last_change });
            }
        }
    }
    let gs = cool_ground_state::<f64>(&critical, trunc, &plan.cooling).map_err(|e| format!("ground state at chi {chi}: {e}"))?;
    let mut bytes = Vec::new();
    write_state(&gs.mps, &mut bytes).map_err(|e| e.to_string())?;
    let file = GroundFile {
        hash,
        energy: gs.energy,
        steps: gs.steps,
        last_change: gs.last_change,
        state: serde_json::from_slice(&bytes).map_err(|e| e.to_string())?,
    };
    fs::create_dir_all(path.parent().expect("ground dir")).map_err(|e| e.to_string())?;
    atomic_write(&path, &serde_json::to_vec(&file).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(gs)
}

/// Rebuild `results.csv` from every summary of the current plan, ordered
/// by `(chi, v)`.
fn rewrite_results(plan: &ExperimentPlan, hash: &str) -> std::io::Result<()> {
    let mut rows: BTreeMap<(usize, u64), ResultRow> = BTreeMap::new();
    for &chi in &plan.chis {
        for &v in &plan.rates {
            if let Some(s) = load_summary(&summary_path(plan, &cell_key(chi, v)), hash) {
                rows.insert((chi, v.to_bits()), s.row);
            }
        }
    }
    let rows: Vec<ResultRow> = rows.into_values().collect();
    write_results(&plan.output.join("results.csv"), &rows)
}

fn store(plan: &ExperimentPlan, hash: &str, key: &str, rec: &RunRecord) -> std::io::Result<()> {
    let dir = cells_dir(plan);
    let record_path = dir.join(format!("{key}.record.json"));
    let tmp = record_path.with_extension("tmp");
    {
        let w = BufWriter::new(fs::File::create(&tmp)?);
        write_record(rec, w).map_err(std::io::Error::other)?;
    }
    fs::rename(&tmp, &record_path)?;
    let summary = CellSummary { plan_hash: hash.to_string(), key: key.to_string(), row: ResultRow::from(rec) };
    atomic_write(&summary_path(plan, key), &serde_json::to_vec_pretty(&summary)?)?;
    rewrite_results(plan, hash)
}

/// Run every grid cell that has no result for this plan yet.
///
/// Cells run on a pool of `workers` threads; finished records go through a
/// channel to a single writer that owns all result files.
pub fn run_plan(plan: &ExperimentPlan, workers: usize) -> Result<SweepOutcome, String> {
    fs::create_dir_all(cells_dir(plan)).map_err(|e| format!("{}: {e}", plan.output.display()))?;
    let hash = plan.hash();
    let mut pending: Vec<(usize, f64)> = Vec::new();
    let mut cached = 0;
    for &chi in &plan.chis {
        for &v in &plan.rates {
            if plan.resume && load_summary(&summary_path(plan, &cell_key(chi, v)), &hash).is_some() {
                cached += 1;
            } else {
                pending.push((chi, v));
            }
        }
    }
    rewrite_results(plan, &hash).map_err(|e| e.to_string())?;
    if pending.is_empty() {
        return Ok(SweepOutcome { computed: 0, cached, failed: vec![] });
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| e.to_string())?;
    let mut chis: Vec<usize> = pending.iter().map(|c| c.0).collect();
    chis.dedup();
    let grounds: Vec<(usize, Result<GroundState<f64>, String>)> =
        pool.install(|| chis.par_iter().map(|&chi| (chi, ground_state(plan, chi))).collect());
    let grounds: BTreeMap<usize, Result<GroundState<f64>, String>> = grounds.into_iter().collect();

    let (tx, rx) = mpsc::channel::<(String, Result<RunRecord, String>)>();
    let writer = {
        let plan = plan.clone();
        let hash = hash.clone();
        std::thread::spawn(move || {
            let mut computed = 0;
            let mut failed = Vec::new();
            for (key, res) in rx {
                match res.and_then(|rec| store(&plan, &hash, &key, &rec).map_err(|e| e.to_string())) {
                    Ok(()) => {
                        computed += 1;
                        eprintln!("done {key}");
                    }
                    Err(e) => failed.push((key, e)),
                }
            }
            (computed, failed)
        })
    };
    pool.install(|| {
        pending.par_iter().for_each_with(tx, |tx, &(chi, v)| {
            let key = cell_key(chi, v);
            let res = match &grounds[&chi] {
                Err(e) => Err(e.clone()),
                Ok(gs) => {
                    let cp = CheckpointPolicy { path: cells_dir(plan).join(format!("{key}.checkpoint.json")), interval: Duration::from_secs(300) };
                    run_sweep_with_reference(&plan.config(chi, v), gs, Some(&cp)).map_err(|e| e.to_string())
                }
            };
            tx.send((key, res)).expect("writer alive");
        })
    });
    let (computed, failed) = writer.join().map_err(|_| "result writer panicked".to_string())?;
    Ok(SweepOutcome { computed, cached, failed })
}
