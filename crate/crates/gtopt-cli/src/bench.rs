//! Incremental-join scaling benchmark.
//!
//! For each client count the scenario starts from an empty network and
//! clients join one at a time, one cycle per join. Per row the timing split
//! follows the cycle reports: gt = matching plus rule application, ilp =
//! problem build plus solve, misc = the wall-clock remainder, each the mean
//! over the configured repeats. Bandwidths are sampled uniformly per client
//! (download 50..250, upload 10..50 Mbit/s) from the given seed, so rows are
//! reproducible; the default server upload is sized generously because a
//! saturated server cannot be relieved by one-at-a-time joiners (relays only
//! form among waiting clients).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gtopt::overlay::{self, DataConfig, EventOp, RunConfig, Scenario, ScenarioEvent, ServerConfig};

use crate::Failure;

pub struct BenchRow {
    pub clients: usize,
    pub gt_ms: f64,
    pub ilp_ms: f64,
    pub misc_ms: f64,
    pub total_ms: f64,
    pub objective: f64,
    pub violations: usize,
}

pub const CSV_HEADER: &str = "clients,gt_ms,ilp_ms,misc_ms,total_ms,objective,violations";

/// Scenario with `count` clients joining one per step.
pub fn join_scenario(count: usize, seed: u64, server_upload: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = (1..=count)
        .map(|i| {
            let down: f64 = rng.gen_range(50.0..=250.0);
            let up: f64 = rng.gen_range(10.0..=50.0);
            ScenarioEvent {
                step: i as u64,
                op: EventOp::Add,
                id: format!("c{i:04}"),
                up: Some(up),
                down: Some(down),
            }
        })
        .collect();
    Scenario {
        server: ServerConfig {
            upload: server_upload,
        },
        data: DataConfig::default(),
        events,
    }
}

/// One benchmark row: run the scenario `repeats` times, average the timings.
pub fn measure(
    count: usize,
    seed: u64,
    server_upload: f64,
    repeats: usize,
) -> Result<BenchRow, Failure> {
    let scenario = join_scenario(count, seed, server_upload);
    let mut gt = 0.0;
    let mut ilp = 0.0;
    let mut total = 0.0;
    let mut objective = 0.0;
    let mut violations = 0usize;
    for rep in 0..repeats.max(1) {
        let started = std::time::Instant::now();
        let run = overlay::run_scenario(&scenario, &RunConfig::default()).map_err(|e| match e {
            overlay::OverlayError::InfeasibleCycle { step, .. } => Failure::Infeasible(format!(
                "bench with {count} clients: infeasible at step {step}"
            )),
            other => Failure::Input(other.to_string()),
        })?;
        let wall = started.elapsed().as_secs_f64() * 1e3;
        gt += run.trace.iter().map(|t| t.report.gt_ms).sum::<f64>();
        ilp += run.trace.iter().map(|t| t.report.ilp_ms).sum::<f64>();
        total += wall;
        if rep == 0 {
            objective = run
                .trace
                .last()
                .and_then(|t| t.report.objective)
                .unwrap_or(0.0);
            violations = run.trace.iter().map(|t| t.violations.len()).sum();
        }
    }
    let n = repeats.max(1) as f64;
    let (gt, ilp, total) = (gt / n, ilp / n, total / n);
    Ok(BenchRow {
        clients: count,
        gt_ms: gt,
        ilp_ms: ilp,
        misc_ms: (total - gt - ilp).max(0.0),
        total_ms: total,
        objective,
        violations,
    })
}

pub fn render_csv(rows: &[BenchRow]) -> String {
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3},{},{}\n",
            r.clients, r.gt_ms, r.ilp_ms, r.misc_ms, r.total_ms, r.objective, r.violations
        ));
    }
    csv
}

pub fn bench_cmd(
    range: (usize, usize),
    step: usize,
    repeats: usize,
    server_upload: f64,
    out: &Path,
    seed: u64,
) -> Result<(), Failure> {
    if step == 0 {
        return Err(Failure::Input("--step must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut count = range.0;
    while count <= range.1 {
        let row = measure(count, seed, server_upload, repeats)?;
        println!(
            "clients={} gt={:.1}ms ilp={:.1}ms misc={:.1}ms total={:.1}ms violations={}",
            row.clients, row.gt_ms, row.ilp_ms, row.misc_ms, row.total_ms, row.violations
        );
        rows.push(row);
        count += step;
    }
    let csv = render_csv(&rows);
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Io(format!("creating {}: {e}", out.display())))?;
    let path = out.join("bench.csv");
    std::fs::write(&path, &csv)
        .map_err(|e| Failure::Io(format!("writing {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
