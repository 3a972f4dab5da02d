//! Batch planning: sample targets along the reference path, predict one
//! region per target as a single batch, then plan to each target.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::actions::ActionSet;
use crate::datagen::Scenario;
use crate::grid::{left_normal, Cell, OccupancyGrid, Pose, ReferencePath, RegionMask};
use crate::region::{predict_batch, Concurrency, RegionError, RegionSource};
use crate::search::{plan, PlanStatus, SearchConfig, SearchStats};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("longitudinal_step must be at least 1")]
    Step,
    #[error("max_targets must be at least 1")]
    MaxTargets,
    #[error("lateral offsets must be sorted and unique")]
    Offsets,
}

/// Where station walking starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFrom {
    /// Stations `L, L - step, …` back from the far end of the path.
    #[default]
    FarEnd,
    /// Stations `step, 2·step, …` out from the ego.
    Ego,
}

impl std::str::FromStr for SampleFrom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "far-end" => Ok(Self::FarEnd),
            "ego" => Ok(Self::Ego),
            other => Err(format!("unknown sampling origin {other:?} (expected far-end or ego)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSamplerConfig {
    /// Spacing of stations along the reference path, cells.
    pub longitudinal_step: f64,
    /// Signed offsets perpendicular to the path, positive to the left.
    pub lateral_offsets: Vec<i32>,
    pub max_targets: usize,
    pub from: SampleFrom,
}

impl Default for TargetSamplerConfig {
    fn default() -> Self {
        Self {
            longitudinal_step: 25.0,
            lateral_offsets: vec![-10, -5, 0, 5, 10],
            max_targets: 50,
            from: SampleFrom::FarEnd,
        }
    }
}

impl TargetSamplerConfig {
    pub fn with_max_targets(&self, max_targets: usize) -> Self {
        Self { max_targets, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.longitudinal_step >= 1.0) {
            return Err(SamplerError::Step);
        }
        if self.max_targets == 0 {
            return Err(SamplerError::MaxTargets);
        }
        if self.lateral_offsets.windows(2).any(|p| p[0] >= p[1]) {
            return Err(SamplerError::Offsets);
        }
        Ok(())
    }
}

/// Targets at stations spaced `longitudinal_step` apart along `refpath`,
/// each station emitting its lateral offsets in order. The ego station
/// itself is never used. Cells that fall outside the grid or on an occupied
/// (inflated) cell are dropped.
pub fn sample_targets(grid: &OccupancyGrid, refpath: &ReferencePath, cfg: &TargetSamplerConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    let length = refpath.length();
    let mut k = 0;
    'stations: loop {
        let s = match cfg.from {
            SampleFrom::FarEnd => length - k as f64 * cfg.longitudinal_step,
            SampleFrom::Ego => (k + 1) as f64 * cfg.longitudinal_step,
        };
        if s <= 0.0 || s > length + 1e-9 {
            break;
        }
        let (c, r, heading) = refpath.station(s.min(length)).expect("station within length");
        let (nc, nr) = left_normal(heading);
        for &off in &cfg.lateral_offsets {
            let o = off as f64;
            let cell = Cell::new((c + nc * o).round() as i32, (r + nr * o).round() as i32);
            if grid.in_bounds(cell) && !grid.is_occupied(cell) {
                out.push(cell);
                if out.len() == cfg.max_targets {
                    break 'stations;
                }
            }
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetOutcome {
    pub index: usize,
    pub target: Cell,
    pub source: &'static str,
    /// `None` when the plan call itself errored.
    pub status: Option<PlanStatus>,
    pub stats: SearchStats,
    pub cost: Option<f64>,
    /// Batch predict time divided evenly over the targets.
    pub predict_ms: f64,
    pub plan_ms: f64,
    pub used_region: bool,
    /// Mask or plan failure for this target; the batch continues.
    pub error: Option<String>,
    #[serde(skip)]
    pub path: Vec<Pose>,
}

impl TargetOutcome {
    pub fn reached(&self) -> bool {
        self.status == Some(PlanStatus::Reached)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Totals {
    pub targets: usize,
    pub successes: usize,
    pub plan_ms: f64,
    pub predict_ms: f64,
    pub expanded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiPlanReport {
    pub scenario: String,
    pub source: &'static str,
    pub per_target: Vec<TargetOutcome>,
    pub totals: Totals,
}

impl MultiPlanReport {
    /// One JSON object per target followed by a totals object.
    pub fn write_json_lines(&self, mut out: impl Write) -> std::io::Result<()> {
        for t in &self.per_target {
            serde_json::to_writer(&mut out, t)?;
            writeln!(out)?;
        }
        let summary = serde_json::json!({
            "scenario": self.scenario,
            "source": self.source,
            "totals": self.totals,
        });
        serde_json::to_writer(&mut out, &summary)?;
        writeln!(out)
    }

    /// Writes `path_{index}.csv` (`col,row,heading`) for each reached target.
    pub fn write_path_csvs(&self, dir: &std::path::Path) -> std::io::Result<usize> {
        std::fs::create_dir_all(dir)?;
        let mut n = 0;
        for t in self.per_target.iter().filter(|t| t.reached()) {
            let mut s = String::from("col,row,heading\n");
            for p in &t.path {
                s.push_str(&format!("{},{},{}\n", p.col, p.row, p.heading));
            }
            std::fs::write(dir.join(format!("path_{}.csv", t.index)), s)?;
            n += 1;
        }
        Ok(n)
    }
}

/// Samples targets, predicts all masks as one timed batch, then plans to
/// every target. Per-target failures are recorded, never raised.
pub fn plan_all(
    scenario: &Scenario,
    source: &RegionSource,
    scfg: &SearchConfig,
    tcfg: &TargetSamplerConfig,
    actions: &ActionSet,
    concurrency: Concurrency,
) -> MultiPlanReport {
    let targets = sample_targets(&scenario.inflated, &scenario.refpath, tcfg);
    plan_targets(scenario, &targets, source, scfg, actions, concurrency)
}

/// [`plan_all`] with an explicit target list.
pub fn plan_targets(
    scenario: &Scenario,
    targets: &[Cell],
    source: &RegionSource,
    scfg: &SearchConfig,
    actions: &ActionSet,
    concurrency: Concurrency,
) -> MultiPlanReport {
    let clock = Instant::now();
    let masks = predict_batch(source, scenario, targets, actions, concurrency);
    let predict_ms = clock.elapsed().as_secs_f64() * 1e3;
    let share = if targets.is_empty() { 0.0 } else { predict_ms / targets.len() as f64 };

    let one = |(index, (&target, mask)): (usize, (&Cell, &Result<Option<RegionMask>, RegionError>))| {
        let (region, mask_error) = match mask {
            Ok(m) => (m.as_ref(), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let t0 = Instant::now();
        let result = plan(&scenario.inflated, scenario.start, target, scenario.speed, region, scfg, actions);
        let plan_ms = t0.elapsed().as_secs_f64() * 1e3;
        let mut outcome = TargetOutcome {
            index,
            target,
            source: source.kind(),
            status: None,
            stats: SearchStats::default(),
            cost: None,
            predict_ms: share,
            plan_ms,
            used_region: region.is_some(),
            error: mask_error,
            path: Vec::new(),
        };
        match result {
            Ok(r) => {
                outcome.status = Some(r.status);
                outcome.stats = r.stats;
                outcome.cost = r.cost;
                outcome.path = r.path;
            }
            Err(e) => outcome.error = Some(e.to_string()),
        }
        outcome
    };
    let pairs = targets.iter().zip(masks.iter()).enumerate();
    let per_target: Vec<TargetOutcome> = match concurrency {
        Concurrency::Sequential => pairs.map(one).collect(),
        Concurrency::Parallel => pairs.collect::<Vec<_>>().into_par_iter().map(one).collect(),
    };

    let totals = Totals {
        targets: per_target.len(),
        successes: per_target.iter().filter(|t| t.reached()).count(),
        plan_ms: per_target.iter().map(|t| t.plan_ms).sum(),
        predict_ms,
        expanded: per_target.iter().map(|t| t.stats.expanded).sum(),
    };
    MultiPlanReport { scenario: scenario.id.clone(), source: source.kind(), per_target, totals }
}
