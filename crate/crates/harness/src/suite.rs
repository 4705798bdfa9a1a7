//! Parameter sweeps over random tasks with success, failure and hang rates
//! and mean decision time per condition.

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::generator::{generate, TaskParams};
use crate::scenario::Scenario;
use crate::sim::{run_pair, AgentKind, RunConfig, SimError, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteGrid {
    pub num_variables: Vec<usize>,
    pub num_orders: Vec<usize>,
    pub num_constraints: Vec<usize>,
    pub diff: Vec<usize>,
    pub domain_size: usize,
    /// Each entry runs a team of two agents of that kind.
    pub agents: Vec<AgentKind>,
    pub tasks: usize,
    /// Runs per task; the ego agent alternates between runs.
    pub reps: usize,
    pub iterations: u32,
    pub timeout_ms: Option<u64>,
    pub wall_clock_ms: Option<u64>,
    pub seed: u64,
}

impl Default for SuiteGrid {
    fn default() -> Self {
        SuiteGrid {
            num_variables: vec![3, 4, 5],
            num_orders: vec![2],
            num_constraints: vec![3],
            diff: vec![0, 1, 2, 3],
            domain_size: 2,
            agents: vec![AgentKind::Epike, AgentKind::Pike],
            tasks: 10,
            reps: 2,
            iterations: 1000,
            timeout_ms: None,
            wall_clock_ms: None,
            seed: 0,
        }
    }
}

/// One condition of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub agents: String,
    pub num_variables: usize,
    pub num_orders: usize,
    pub num_constraints: usize,
    pub diff: usize,
    pub runs: usize,
    pub success: usize,
    pub failure: usize,
    pub hang: usize,
    /// Tasks the generator could not build.
    pub skipped: usize,
    pub success_rate: f64,
    pub failure_rate: f64,
    pub hang_rate: f64,
    pub callbacks: usize,
    pub mean_callback_ms: f64,
}

impl SuiteGrid {
    /// Task parameters per condition, in sweep order.
    pub fn conditions(&self) -> Vec<TaskParams> {
        let mut out = Vec::new();
        for &num_variables in &self.num_variables {
            for &num_orders in &self.num_orders {
                for &num_constraints in &self.num_constraints {
                    for &diff in &self.diff {
                        if num_orders >= num_variables || diff > num_constraints {
                            continue;
                        }
                        out.push(TaskParams {
                            num_variables,
                            num_orders,
                            num_constraints,
                            diff,
                            domain_size: self.domain_size,
                            seed: 0,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn run_config(&self, seed: u64, ego: usize) -> RunConfig {
        let mut cfg = RunConfig {
            seed,
            ego,
            wall_clock: self.wall_clock_ms.map(Duration::from_millis),
            ..RunConfig::default()
        };
        cfg.session.iteration_cap = self.iterations;
        cfg.session.time_budget = self.timeout_ms.map(Duration::from_millis);
        cfg
    }

    /// Seed of task `t`; identical across agent kinds so teams face the
    /// same tasks.
    pub fn task_seed(&self, t: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(t as u64)
    }
}

/// Runs one condition for one agent kind.
pub fn run_condition(grid: &SuiteGrid, params: &TaskParams, kind: &AgentKind) -> Result<SuiteRow, SimError> {
    let mut counts = [0usize; 3];
    let mut skipped = 0;
    let mut millis = Vec::new();
    for t in 0..grid.tasks {
        let p = TaskParams {
            seed: grid.task_seed(t),
            ..params.clone()
        };
        let scenario = match generate(&p).ok().and_then(|f| Scenario::from_file(f).ok()) {
            Some(s) => s,
            None => {
                skipped += 1;
                continue;
            }
        };
        for r in 0..grid.reps {
            let cfg = grid.run_config(p.seed.wrapping_add(r as u64 * 7919), r % 2);
            let out = run_pair(&scenario, &[kind.clone(), kind.clone()], &cfg)?;
            counts[match out.verdict {
                Verdict::Success => 0,
                Verdict::Failure => 1,
                Verdict::Hang => 2,
            }] += 1;
            millis.extend(out.callbacks.iter().map(|c| c.millis));
        }
    }
    let runs: usize = counts.iter().sum();
    let rate = |k: usize| if runs == 0 { 0.0 } else { counts[k] as f64 / runs as f64 };
    Ok(SuiteRow {
        agents: kind.to_string(),
        num_variables: params.num_variables,
        num_orders: params.num_orders,
        num_constraints: params.num_constraints,
        diff: params.diff,
        runs,
        success: counts[0],
        failure: counts[1],
        hang: counts[2],
        skipped,
        success_rate: rate(0),
        failure_rate: rate(1),
        hang_rate: rate(2),
        callbacks: millis.len(),
        mean_callback_ms: if millis.is_empty() {
            0.0
        } else {
            millis.iter().sum::<f64>() / millis.len() as f64
        },
    })
}

/// Every condition for every agent kind, reporting each row as it lands.
pub fn run_suite(grid: &SuiteGrid, mut progress: impl FnMut(&SuiteRow)) -> Result<Vec<SuiteRow>, SimError> {
    let mut rows = Vec::new();
    for params in grid.conditions() {
        for kind in &grid.agents {
            let row = run_condition(grid, &params, kind)?;
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[SuiteRow], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
