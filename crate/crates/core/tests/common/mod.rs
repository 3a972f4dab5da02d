//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance suite.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regionplan_core::datagen::{build_scenario, Scenario, ScenarioSpec, Template};
use regionplan_core::multi::SampleFrom;
use regionplan_core::region::{path_raster, ORACLE_RADIUS};
use regionplan_core::{dilate, sample_targets, ActionSet, Cell, OccupancyGrid, Pose, RegionMask, SearchConfig, TargetSamplerConfig};

#[derive(Debug, Clone)]
pub struct Case {
    pub grid: OccupancyGrid,
    pub start: Pose,
    pub target: Cell,
    pub speed: f64,
}

/// A random grid of at most 20×20 with free, distinct endpoints.
pub fn small_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.gen_range(8..=20usize), rng.gen_range(8..=20usize));
    let density = rng.gen_range(0.0..0.3);
    let mut cells: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    let mut pick = |rng: &mut ChaCha8Rng| {
        let c = Cell::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
        cells[c.row as usize * w + c.col as usize] = false;
        c
    };
    let start = pick(&mut rng);
    let mut target = pick(&mut rng);
    while target == start {
        target = pick(&mut rng);
    }
    let heading = rng.gen_range(-PI..PI);
    let speed = [0.0, 2.0, 5.0, 10.0][rng.gen_range(0..4)];
    let grid = OccupancyGrid::new(w, h, 0.2, cells, start).unwrap();
    Case { grid, start: Pose::new(start.col, start.row, heading), target, speed }
}

fn wrap(a: f64) -> f64 {
    let a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Every cell of the straight move must be free. At each step along the
/// major axis the minor offset is `k·d_minor / n` rounded half-up.
fn move_is_free(grid: &OccupancyGrid, from: Cell, dx: i32, dy: i32) -> bool {
    let n = dx.abs().max(dy.abs());
    let half_up = |p: i32| (2 * p + n).div_euclid(2 * n);
    (0..=n).all(|k| {
        let c = Cell::new(from.col + half_up(dx * k), from.row + half_up(dy * k));
        grid.in_bounds(c) && !grid.is_occupied(c)
    })
}

/// Dijkstra over exact `(cell, heading)` states: a state's heading is the
/// direction of the move that entered it, so no two headings are merged.
/// Returns the cheapest cost of reaching `target` exactly.
pub fn dijkstra(case: &Case, cfg: &SearchConfig, actions: &ActionSet) -> Option<f64> {
    let limit = cfg.profile.angle_limit(case.speed);
    let moves: Vec<(i32, i32, f64, f64)> = actions
        .actions()
        .iter()
        .map(|a| (a.dx, a.dy, (-a.dy as f64).atan2(a.dx as f64), ((a.dx * a.dx + a.dy * a.dy) as f64).sqrt()))
        .collect();
    // State: (col, row, entering move), with usize::MAX for the start.
    type State = (i32, i32, usize);
    let mut best: HashMap<State, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let root: State = (case.start.col, case.start.row, usize::MAX);
    best.insert(root, 0.0);
    heap.push(Reverse((Ordered(0.0), root)));
    while let Some(Reverse((Ordered(g), s))) = heap.pop() {
        if best.get(&s).is_some_and(|&b| g > b) {
            continue;
        }
        if (s.0, s.1) == (case.target.col, case.target.row) {
            return Some(g);
        }
        let heading = if s.2 == usize::MAX { case.start.heading } else { moves[s.2].2 };
        for (i, &(dx, dy, dir, len)) in moves.iter().enumerate() {
            if wrap(dir - heading).abs() > limit {
                continue;
            }
            let from = Cell::new(s.0, s.1);
            if !move_is_free(&case.grid, from, dx, dy) {
                continue;
            }
            let next: State = (s.0 + dx, s.1 + dy, i);
            let ng = g + len + cfg.delta_ang_weight * wrap(dir - heading).abs();
            if best.get(&next).map_or(true, |&b| ng < b) {
                best.insert(next, ng);
                heap.push(Reverse((Ordered(ng), next)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ordered(f64);

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Seeded scenario cycling through the three templates.
pub fn scenario(seed: u64) -> Scenario {
    let template = match seed % 3 {
        0 => Template::corridor(),
        1 => Template::s_curve(),
        _ => Template::lot(),
    };
    build_scenario(&ScenarioSpec { id: format!("s{seed}"), seed, template, ..Default::default() }).unwrap()
}

/// Targets walking outward from the ego, `step` cells apart.
pub fn near_targets(sc: &Scenario, step: f64, count: usize) -> Vec<Cell> {
    let cfg = TargetSamplerConfig { longitudinal_step: step, lateral_offsets: vec![0], max_targets: count, from: SampleFrom::Ego };
    sample_targets(&sc.inflated, &sc.refpath, &cfg)
}

/// The oracle mask for a plain plan's path.
pub fn path_mask(sc: &Scenario, path: &[Pose]) -> RegionMask {
    dilate(&path_raster(path, sc.inflated.width(), sc.inflated.height()), ORACLE_RADIUS)
}
