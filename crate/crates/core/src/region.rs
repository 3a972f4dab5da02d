//! Path-region sources standing in for the learned predictor, and the
//! 3-channel input raster a predictor consumes.

use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::actions::ActionSet;
use crate::datagen::Scenario;
use crate::grid::{dilate, Cell, OccupancyGrid, Pose, ReferencePath, RegionMask};
use crate::raster::{self, RasterError, RgbRaster};
use crate::search::{plan, PlanError, SearchConfig};

/// Default dilation of the reference polyline in predictor inputs, cells.
pub const REFERENCE_RADIUS: u32 = 3;
/// Default radius of the target disk in predictor inputs, cells.
pub const TARGET_RADIUS: u32 = 4;
/// Default dilation of planned paths into oracle masks and labels, cells.
pub const ORACLE_RADIUS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Concurrency {
    #[default]
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionSource {
    /// No prediction: every target gets `None`.
    Null,
    /// Masks named `mask_{scenario_id}_{target_index}.pgm` under `dir`.
    File { dir: PathBuf },
    /// Plain-plan each target and dilate the resulting path.
    Oracle { radius: u32, search: SearchConfig },
}

impl RegionSource {
    /// The inner plan gets a long limit: a mask is only as good as the
    /// path it was dilated from.
    pub fn oracle() -> Self {
        let search = SearchConfig { time_limit: Duration::from_secs(10), ..SearchConfig::default() };
        RegionSource::Oracle { radius: ORACLE_RADIUS, search }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RegionSource::Null => "null",
            RegionSource::File { .. } => "file",
            RegionSource::Oracle { .. } => "oracle",
        }
    }
}

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("mask for target {index} ({}): {source}", path.display())]
    File { index: usize, path: PathBuf, source: RasterError },
    #[error("oracle plan for target {index} failed: {source}")]
    Plan { index: usize, source: PlanError },
    #[error("oracle dilation radius must be at least 1")]
    Radius,
}

pub fn mask_file_name(scenario_id: &str, index: usize) -> String {
    format!("mask_{scenario_id}_{index}.pgm")
}

pub fn input_file_name(scenario_id: &str, index: usize) -> String {
    format!("input_{scenario_id}_{index}.ppm")
}

/// Rasterizes a pose path as an 8-connected polyline.
pub fn path_raster(path: &[Pose], width: usize, height: usize) -> RegionMask {
    let mut mask = RegionMask::new(width, height);
    mask.stamp_polyline(&path.iter().map(Pose::cell).collect::<Vec<_>>());
    mask
}

/// One entry per target, index-aligned. A failed entry does not abort the
/// rest of the batch.
pub type BatchPrediction = Vec<Result<Option<RegionMask>, RegionError>>;

pub fn predict_batch(
    source: &RegionSource,
    scenario: &Scenario,
    targets: &[Cell],
    actions: &ActionSet,
    concurrency: Concurrency,
) -> BatchPrediction {
    let grid = &scenario.inflated;
    let one = |(index, &target): (usize, &Cell)| -> Result<Option<RegionMask>, RegionError> {
        match source {
            RegionSource::Null => Ok(None),
            RegionSource::File { dir } => {
                let path = dir.join(mask_file_name(&scenario.id, index));
                raster::read_mask_sized(&path, grid.width(), grid.height())
                    .map(Some)
                    .map_err(|source| RegionError::File { index, path, source })
            }
            RegionSource::Oracle { radius, search } => {
                if *radius == 0 {
                    return Err(RegionError::Radius);
                }
                let result = plan(grid, scenario.start, target, scenario.speed, None, search, actions)
                    .map_err(|source| RegionError::Plan { index, source })?;
                Ok(result
                    .reached()
                    .then(|| dilate(&path_raster(&result.path, grid.width(), grid.height()), *radius)))
            }
        }
    };
    match concurrency {
        Concurrency::Sequential => targets.iter().enumerate().map(one).collect(),
        Concurrency::Parallel => targets.par_iter().enumerate().map(one).collect(),
    }
}

/// Predictor input: channel 0 obstacles, channel 1 the dilated reference
/// path, channel 2 a disk at the target.
pub fn render_fcn_input(grid: &OccupancyGrid, refpath: &ReferencePath, target: Cell) -> RgbRaster {
    render_fcn_input_with(grid, refpath, target, REFERENCE_RADIUS, TARGET_RADIUS)
}

pub fn render_fcn_input_with(
    grid: &OccupancyGrid,
    refpath: &ReferencePath,
    target: Cell,
    reference_radius: u32,
    target_radius: u32,
) -> RgbRaster {
    let (w, h) = (grid.width(), grid.height());
    let mut out = RgbRaster::new(w, h);
    out.set_channel(0, &grid.as_mask());
    out.set_channel(1, &dilate(&refpath.raster(w, h), reference_radius));
    let mut disk = RegionMask::new(w, h);
    disk.stamp_disk(target, target_radius);
    out.set_channel(2, &disk);
    out
}

/// Writes one mask per target under the file-source naming pattern and
/// returns the paths (`None` where no mask was produced).
pub fn export_masks(
    dir: &Path,
    scenario_id: &str,
    masks: &BatchPrediction,
) -> Result<Vec<Option<PathBuf>>, RasterError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(masks.len());
    for (i, m) in masks.iter().enumerate() {
        match m {
            Ok(Some(mask)) => {
                let path = dir.join(mask_file_name(scenario_id, i));
                raster::write_mask(mask, &path)?;
                written.push(Some(path));
            }
            _ => written.push(None),
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_scenario, ScenarioSpec};
    use crate::raster::GrayRaster;

    fn open_scenario() -> Scenario {
        build_scenario(&ScenarioSpec { vehicles: (0, 0), shift: (0, 0), id: "open".into(), ..Default::default() }).unwrap()
    }

    #[test]
    fn null_source_gives_none() {
        let sc = open_scenario();
        let targets = [Cell::new(128, 400), Cell::new(120, 380), Cell::new(140, 360)];
        let out = predict_batch(&RegionSource::Null, &sc, &targets, &ActionSet::default(), Concurrency::Sequential);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|m| matches!(m, Ok(None))));
    }

    #[test]
    fn oracle_covers_the_planned_path() {
        let sc = open_scenario();
        let set = ActionSet::default();
        let targets = [Cell::new(128, 380), Cell::new(110, 300), Cell::new(150, 200)];
        let out = predict_batch(&RegionSource::oracle(), &sc, &targets, &set, Concurrency::Sequential);
        let RegionSource::Oracle { search, .. } = RegionSource::oracle() else { unreachable!() };
        for (m, &t) in out.iter().zip(&targets) {
            let mask = m.as_ref().unwrap().as_ref().expect("reachable");
            let r = plan(&sc.inflated, sc.start, t, sc.speed, None, &search, &set).unwrap();
            let raster = path_raster(&r.path, mask.width(), mask.height());
            assert!(raster.is_subset_of(mask));
            assert!(mask.get(t));
        }
        let par = predict_batch(&RegionSource::oracle(), &sc, &targets, &set, Concurrency::Parallel);
        for (a, b) in out.iter().zip(&par) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
    }

    #[test]
    fn oracle_walled_off_target_is_none() {
        let mut sc = open_scenario();
        let mut grid = sc.grid.clone();
        for c in 100..=140 {
            for r in [200, 240] {
                grid.set_occupied(Cell::new(c, r), true);
            }
        }
        for r in 200..=240 {
            for c in [100, 140] {
                grid.set_occupied(Cell::new(c, r), true);
            }
        }
        sc.inflated = grid.inflate(5).unwrap();
        let out = predict_batch(&RegionSource::oracle(), &sc, &[Cell::new(120, 220), Cell::new(128, 400)], &ActionSet::default(), Concurrency::Sequential);
        assert!(matches!(out[0], Ok(None)));
        assert!(matches!(out[1], Ok(Some(_))));
    }

    #[test]
    fn file_source_loads_by_pattern_and_reports_missing() {
        let sc = open_scenario();
        let dir = tempfile::tempdir().unwrap();
        let mut m = RegionMask::new(sc.inflated.width(), sc.inflated.height());
        m.set(Cell::new(5, 5), true);
        raster::write_mask(&m, dir.path().join(mask_file_name("open", 0))).unwrap();
        raster::write_mask(&RegionMask::new(8, 8), dir.path().join(mask_file_name("open", 2))).unwrap();
        let src = RegionSource::File { dir: dir.path().to_path_buf() };
        let targets = [Cell::new(128, 400); 3];
        let out = predict_batch(&src, &sc, &targets, &ActionSet::default(), Concurrency::Sequential);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].as_ref().unwrap().as_ref(), Some(&m));
        assert!(matches!(&out[1], Err(RegionError::File { index: 1, source: RasterError::Io(_), .. })));
        assert!(matches!(&out[2], Err(RegionError::File { index: 2, source: RasterError::DimensionMismatch { .. }, .. })));
    }

    #[test]
    fn fcn_input_channels() {
        let grid = OccupancyGrid::free(64, 64, 0.2, Cell::new(32, 60)).unwrap();
        let refpath = ReferencePath::from_positions(&[(32.0, 60.0), (32.0, 4.0)]).unwrap();
        let target = Cell::new(40, 10);
        let img = render_fcn_input(&grid, &refpath, target);
        assert!(img.channel(0).to_mask().is_empty());
        let mut disk = RegionMask::new(64, 64);
        disk.stamp_disk(target, TARGET_RADIUS);
        // |disk(4)| = 49 lattice points.
        assert_eq!(img.channel(2).to_mask().count(), 49);
        assert_eq!(img.channel(2).to_mask(), disk);
        // Vertical line of 57 cells dilated by 3: 7 columns wide plus rounded caps.
        let green = img.channel(1).to_mask();
        assert!(green.get(Cell::new(29, 30)) && green.get(Cell::new(35, 30)) && !green.get(Cell::new(36, 30)));

        let clipped = render_fcn_input(&grid, &refpath, Cell::new(0, 0));
        // Quarter disk including the axes: 1 + 4 + 4 + 3·3 - 3 inner corners outside r=4.
        let expected = (0..=4).flat_map(|r: i32| (0..=4).map(move |c: i32| (c, r))).filter(|&(c, r)| c * c + r * r <= 16).count();
        assert_eq!(clipped.channel(2).to_mask().count(), expected);
    }

    #[test]
    fn fcn_obstacle_channel_is_the_grid_raster() {
        let sc = build_scenario(&ScenarioSpec { seed: 11, ..Default::default() }).unwrap();
        let img = render_fcn_input(&sc.inflated, &sc.refpath, Cell::new(128, 300));
        assert_eq!(img.channel(0), GrayRaster::from(&sc.inflated));
        let again = render_fcn_input(&sc.inflated, &sc.refpath, Cell::new(128, 300));
        assert_eq!(raster::encode_ppm(&img), raster::encode_ppm(&again));
    }
}
