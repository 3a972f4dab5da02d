//! Training-pair generation: for each target sampled on a base scenario,
//! build augmented variants, plan plainly, and write the dilated path as a
//! label next to the predictor input.

pub mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

pub use scenario::{build_scenario, build_template, derive_seed, Scenario, ScenarioError, ScenarioSpec, Template, Vehicle};

use crate::actions::ActionSet;
use crate::grid::{dilate, Cell};
use crate::multi::{sample_targets, SamplerError, TargetSamplerConfig};
use crate::raster::{self, RasterError};
use crate::region::{path_raster, render_fcn_input, Concurrency, ORACLE_RADIUS};
use crate::search::{plan, SearchConfig};

pub const MANIFEST_HEADER: &str = "input,label,seed,target_col,target_row,shift";

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("per_target must be at least 1")]
    PerTarget,
    #[error("output directory {} is not writable: {source}", path.display())]
    Unwritable { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub label_radius: u32,
    /// Labels come from completed plans, so the limit is generous.
    pub search: SearchConfig,
    pub concurrency: Concurrency,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            label_radius: ORACLE_RADIUS,
            search: SearchConfig { time_limit: Duration::from_secs(5), ..Default::default() },
            concurrency: Concurrency::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// Paths relative to the output directory.
    pub input: String,
    pub label: String,
    pub seed: u64,
    pub target: Cell,
    pub shift: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    pub targets: usize,
    /// Variants whose plan did not reach the target or could not be built.
    pub skipped: usize,
}

impl Manifest {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{MANIFEST_HEADER}\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{},{}", r.input, r.label, r.seed, r.target.col, r.target.row, r.shift).unwrap();
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Vec<ManifestRow>, String> {
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err("missing manifest header".into());
        }
        lines
            .enumerate()
            .map(|(i, line)| {
                let f: Vec<&str> = line.split(',').collect();
                let bad = || format!("manifest row {}: {line:?}", i + 1);
                if f.len() != 6 {
                    return Err(bad());
                }
                Ok(ManifestRow {
                    input: f[0].into(),
                    label: f[1].into(),
                    seed: f[2].parse().map_err(|_| bad())?,
                    target: Cell::new(f[3].parse().map_err(|_| bad())?, f[4].parse().map_err(|_| bad())?),
                    shift: f[5].parse().map_err(|_| bad())?,
                })
            })
            .collect()
    }
}

fn check_writable(dir: &Path) -> Result<(), DatagenError> {
    let unwritable = |source| DatagenError::Unwritable { path: dir.to_path_buf(), source };
    std::fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"").map_err(unwritable)?;
    std::fs::remove_file(&probe).map_err(unwritable)
}

/// Generates `per_target` samples for every target sampled on the
/// unshifted reference path of `spec`'s scenario. Variant `v` of target `t`
/// is rebuilt from `derive_seed(spec.seed, t, v)`, so each sample is
/// reproducible from its manifest row alone.
pub fn generate_samples(
    spec: &ScenarioSpec,
    sampler: &TargetSamplerConfig,
    per_target: usize,
    out_dir: &Path,
    options: &GenOptions,
) -> Result<Manifest, DatagenError> {
    if per_target == 0 {
        return Err(DatagenError::PerTarget);
    }
    sampler.validate()?;
    options.search.validate().map_err(|e| ScenarioError::Param(e.to_string()))?;
    check_writable(out_dir)?;

    let base = build_scenario(spec)?;
    let targets = sample_targets(&base.inflated, &base.true_refpath, sampler);
    let actions = ActionSet::default();

    let jobs: Vec<(usize, usize)> = (0..targets.len()).flat_map(|t| (0..per_target).map(move |v| (t, v))).collect();
    let one = |&(t, v): &(usize, usize)| -> Result<Option<ManifestRow>, DatagenError> {
        let target = targets[t];
        let seed = derive_seed(spec.seed, t as u64, v as u64);
        let variant = match build_scenario(&spec.with_seed(seed)) {
            Ok(sc) => sc,
            Err(ScenarioError::EgoBlocked(_)) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let Ok(result) = plan(&variant.inflated, variant.start, target, variant.speed, None, &options.search, &actions) else {
            return Ok(None);
        };
        if !result.reached() {
            return Ok(None);
        }
        let (w, h) = (variant.inflated.width(), variant.inflated.height());
        let label = dilate(&path_raster(&result.path, w, h), options.label_radius);
        let input = render_fcn_input(&variant.inflated, &variant.refpath, target);
        let stem = format!("{}_{t}_{v}", spec.id);
        let row = ManifestRow {
            input: format!("input_{stem}.ppm"),
            label: format!("label_{stem}.pgm"),
            seed,
            target,
            shift: variant.shift,
        };
        raster::write_ppm(&input, out_dir.join(&row.input))?;
        raster::write_mask(&label, out_dir.join(&row.label))?;
        Ok(Some(row))
    };
    let results: Vec<Result<Option<ManifestRow>, DatagenError>> = match options.concurrency {
        Concurrency::Sequential => jobs.iter().map(one).collect(),
        Concurrency::Parallel => jobs.par_iter().map(one).collect(),
    };

    let mut rows = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    let manifest = Manifest { rows, targets: targets.len(), skipped };
    std::fs::write(out_dir.join("manifest.csv"), manifest.to_csv())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi::SampleFrom;

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec { id: "t".into(), seed: 42, vehicles: (1, 3), ..Default::default() }
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            rows: vec![ManifestRow { input: "a.ppm".into(), label: "a.pgm".into(), seed: 7, target: Cell::new(3, 4), shift: -2 }],
            targets: 1,
            skipped: 0,
        };
        let csv = m.to_csv();
        assert!(csv.starts_with("input,label,seed,target_col,target_row,shift\n"));
        assert_eq!(Manifest::parse_csv(&csv).unwrap(), m.rows);
        assert!(Manifest::parse_csv("nope\n").is_err());
    }

    #[test]
    fn per_target_zero_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let r = generate_samples(&small_spec(), &TargetSamplerConfig::default(), 0, dir.path(), &GenOptions::default());
        assert!(matches!(r, Err(DatagenError::PerTarget)));
    }

    #[test]
    fn unwritable_directory_fails_first() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        std::fs::write(&file, b"x").unwrap();
        let r = generate_samples(&small_spec(), &TargetSamplerConfig::default(), 1, &file.join("sub"), &GenOptions::default());
        assert!(matches!(r, Err(DatagenError::Unwritable { .. })), "{r:?}");
    }

    #[test]
    fn samples_pair_up_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let sampler = TargetSamplerConfig { longitudinal_step: 60.0, lateral_offsets: vec![0], max_targets: 2, from: SampleFrom::Ego };
        let spec = ScenarioSpec { vehicles: (0, 0), ..small_spec() };
        let opts = GenOptions::default();
        let m = generate_samples(&spec, &sampler, 2, dir.path(), &opts).unwrap();
        assert_eq!(m.targets, 2);
        assert_eq!(m.rows.len() + m.skipped, 4);
        assert_eq!(m.rows.len(), 4);
        let rows = Manifest::parse_csv(&std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap()).unwrap();
        assert_eq!(rows, m.rows);
        let actions = ActionSet::default();
        for row in &rows {
            let input = raster::read_ppm(dir.path().join(&row.input)).unwrap();
            let label = raster::read_mask(dir.path().join(&row.label)).unwrap();
            let mut disk = crate::grid::RegionMask::new(label.width(), label.height());
            disk.stamp_disk(row.target, crate::region::TARGET_RADIUS);
            assert_eq!(input.channel(2).to_mask(), disk);

            let sc = build_scenario(&spec.with_seed(row.seed)).unwrap();
            assert_eq!(sc.shift, row.shift);
            let r = plan(&sc.inflated, sc.start, row.target, sc.speed, None, &opts.search, &actions).unwrap();
            assert!(path_raster(&r.path, label.width(), label.height()).is_subset_of(&label));
            assert!(label.is_connected());
            assert!(label.get(sc.start.cell()) && label.get(row.target));
        }
    }

    #[test]
    fn unreached_variants_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        // A 1 ns budget times out every plan.
        let sampler = TargetSamplerConfig { longitudinal_step: 200.0, lateral_offsets: vec![0], max_targets: 1, from: SampleFrom::Ego };
        let opts = GenOptions {
            search: SearchConfig { time_limit: Duration::from_nanos(1), ..Default::default() },
            ..GenOptions::default()
        };
        let m = generate_samples(&small_spec(), &sampler, 3, dir.path(), &opts).unwrap();
        assert_eq!(m.rows.len(), 0);
        assert_eq!(m.skipped, 3);
        assert_eq!(std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap(), format!("{MANIFEST_HEADER}\n"));
    }
}
