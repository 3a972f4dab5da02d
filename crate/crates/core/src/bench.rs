//! Benchmark harness: batch planning over a grid of scenarios, target
//! counts and region sources, emitted as CSV.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::actions::ActionSet;
use crate::datagen::{build_scenario, Scenario, ScenarioError, ScenarioSpec};
use crate::multi::{plan_all, TargetSamplerConfig};
use crate::raster::{self, RasterError};
use crate::region::{Concurrency, RegionSource};
use crate::search::{PlanResult, SearchConfig};

pub const BENCH_HEADER: &str = "targets,source,plan_ms,predict_ms,expanded,success,reps";
pub const SUMMARY_HEADER: &str = "targets,source,plan_ms_median,predict_ms_median,null_plan_ms,ratio,paired_ratio_median";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite: {0}")]
    Suite(String),
    #[error("scenario {id}: {source} ({} rows completed)", completed.len())]
    Scenario { id: String, source: ScenarioError, completed: Vec<BenchRow> },
    #[error("plan was run without tracing; no footprint to dump")]
    TraceDisabled,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BenchSuite {
    pub scenarios: Vec<ScenarioSpec>,
    pub target_counts: Vec<usize>,
    pub repetitions: usize,
    pub sources: Vec<RegionSource>,
    pub search: SearchConfig,
    pub sampler: TargetSamplerConfig,
    pub concurrency: Concurrency,
}

impl Default for BenchSuite {
    fn default() -> Self {
        Self {
            scenarios: (0..5).map(|i| ScenarioSpec { id: format!("s{i}"), seed: i, ..Default::default() }).collect(),
            target_counts: vec![1, 3, 7, 10, 15, 20, 30, 40, 50],
            repetitions: 3,
            sources: vec![RegionSource::Null, RegionSource::oracle()],
            search: SearchConfig::default(),
            sampler: TargetSamplerConfig::default(),
            concurrency: Concurrency::Sequential,
        }
    }
}

impl BenchSuite {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Suite(m.into()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.target_counts.is_empty() || self.target_counts.windows(2).any(|p| p[0] >= p[1]) || self.target_counts[0] == 0 {
            return bad("target counts must be positive and strictly increasing");
        }
        if self.sources.is_empty() || self.scenarios.is_empty() {
            return bad("suite needs at least one scenario and one source");
        }
        self.search.validate().map_err(|e| BenchError::Suite(e.to_string()))?;
        self.sampler.validate().map_err(|e| BenchError::Suite(e.to_string()))
    }
}

/// One (target count, source) cell of the suite, aggregated over
/// `scenarios × repetitions` runs; `reps` is that run count.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub targets: usize,
    pub source: &'static str,
    pub plan_ms: f64,
    pub plan_ms_median: f64,
    pub predict_ms: f64,
    pub predict_ms_median: f64,
    pub expanded: f64,
    pub successes: usize,
    pub reps: usize,
    /// Median over runs of null plan time / this source's plan time, when
    /// the suite includes the null source.
    pub paired_ratio_median: Option<f64>,
    /// Per-run total plan times, in run order.
    pub plan_ms_runs: Vec<f64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Default)]
struct Acc {
    plan: Vec<f64>,
    predict: Vec<f64>,
    expanded: Vec<f64>,
    successes: usize,
}

/// Runs every (target count, scenario, repetition, source) combination
/// sequentially. Rows come out count-major, then in suite source order.
pub fn run_suite(suite: &BenchSuite, actions: &ActionSet) -> Result<Vec<BenchRow>, BenchError> {
    suite.validate()?;
    let mut scenarios: Vec<Scenario> = Vec::with_capacity(suite.scenarios.len());
    for spec in &suite.scenarios {
        let sc = build_scenario(spec).map_err(|source| BenchError::Scenario { id: spec.id.clone(), source, completed: Vec::new() })?;
        scenarios.push(sc);
    }

    let mut rows = Vec::new();
    for &count in &suite.target_counts {
        let tcfg = suite.sampler.with_max_targets(count);
        let mut accs: Vec<Acc> = suite.sources.iter().map(|_| Acc::default()).collect();
        for sc in &scenarios {
            for _ in 0..suite.repetitions {
                for (src, acc) in suite.sources.iter().zip(accs.iter_mut()) {
                    let r = plan_all(sc, src, &suite.search, &tcfg, actions, suite.concurrency);
                    acc.plan.push(r.totals.plan_ms);
                    acc.predict.push(r.totals.predict_ms);
                    acc.expanded.push(r.totals.expanded as f64);
                    acc.successes += r.totals.successes;
                }
            }
        }
        let null_runs = suite.sources.iter().position(|s| *s == RegionSource::Null).map(|i| accs[i].plan.clone());
        for (src, acc) in suite.sources.iter().zip(accs) {
            let paired = null_runs.as_ref().map(|null| {
                let ratios: Vec<f64> = null.iter().zip(&acc.plan).map(|(n, p)| n / p.max(1e-9)).collect();
                median(&ratios)
            });
            rows.push(BenchRow {
                targets: count,
                source: src.kind(),
                plan_ms: mean(&acc.plan),
                plan_ms_median: median(&acc.plan),
                predict_ms: mean(&acc.predict),
                predict_ms_median: median(&acc.predict),
                expanded: mean(&acc.expanded),
                successes: acc.successes,
                reps: acc.plan.len(),
                paired_ratio_median: paired,
                plan_ms_runs: acc.plan,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        writeln!(s, "{},{},{:.3},{:.3},{:.1},{},{}", r.targets, r.source, r.plan_ms, r.predict_ms, r.expanded, r.successes, r.reps).unwrap();
    }
    s
}

/// Medians plus the plain-over-this-source plan-time ratios.
pub fn summary_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let null = rows.iter().find(|n| n.targets == r.targets && n.source == "null");
        let (null_ms, ratio) = match null {
            Some(n) => (format!("{:.3}", n.plan_ms), format!("{:.3}", n.plan_ms / r.plan_ms.max(1e-9))),
            None => (String::new(), String::new()),
        };
        let paired = r.paired_ratio_median.map(|p| format!("{p:.3}")).unwrap_or_default();
        writeln!(s, "{},{},{:.3},{:.3},{},{},{}", r.targets, r.source, r.plan_ms_median, r.predict_ms_median, null_ms, ratio, paired).unwrap();
    }
    s
}

/// Writes `bench.csv` and `bench_summary.csv` under `dir`.
pub fn write_reports(rows: &[BenchRow], dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("bench.csv"), bench_csv(rows))?;
    std::fs::write(dir.join("bench_summary.csv"), summary_csv(rows))?;
    Ok(())
}

/// Writes the θ-projected expansion footprint of a traced plan as a PGM.
pub fn dump_search_space(result: &PlanResult, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let footprint = result.footprint.as_ref().ok_or(BenchError::TraceDisabled)?;
    raster::write_mask(footprint, path)?;
    Ok(())
}
