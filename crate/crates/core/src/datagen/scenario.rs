//! Synthetic scenarios: a road template, randomly placed vehicle obstacles
//! and a laterally shifted reference path, all determined by one seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{left_normal, Cell, GridError, OccupancyGrid, Pose, RefPathError, ReferencePath};

/// Vehicle footprint in cells (4.6 m × 1.8 m at 0.2 m/cell).
pub const VEHICLE_LENGTH: f64 = 23.0;
pub const VEHICLE_WIDTH: f64 = 9.0;

/// Vehicles are not placed closer than this to the ego along the path.
const MIN_VEHICLE_STATION: f64 = 40.0;
/// Lateral jitter of a vehicle around its lane centre, cells.
const LANE_JITTER: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("ego is walled off: {0}")]
    EgoBlocked(String),
    #[error("invalid scenario parameter: {0}")]
    Param(String),
    #[error("scenario file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    RefPath(#[from] RefPathError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    /// Straight road with side walls.
    Corridor { half_width: u32 },
    /// Road whose centreline follows a sine wave.
    SCurve { half_width: u32, amplitude: f64, period: f64 },
    /// Walled open area with scattered blocks.
    Lot { blocks: u32 },
}

impl Template {
    pub fn name(&self) -> &'static str {
        match self {
            Template::Corridor { .. } => "corridor",
            Template::SCurve { .. } => "s-curve",
            Template::Lot { .. } => "lot",
        }
    }

    pub fn corridor() -> Self {
        Template::Corridor { half_width: 40 }
    }

    pub fn s_curve() -> Self {
        Template::SCurve { half_width: 36, amplitude: 40.0, period: 400.0 }
    }

    pub fn lot() -> Self {
        Template::Lot { blocks: 14 }
    }

    /// The default-parameter template for `corridor`, `s-curve` or `lot`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "corridor" => Some(Self::corridor()),
            "s-curve" => Some(Self::s_curve()),
            "lot" => Some(Self::lot()),
            _ => None,
        }
    }
}

/// Everything needed to rebuild a scenario bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub seed: u64,
    pub template: Template,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub ego: Cell,
    /// Inclusive range of vehicle obstacles to place.
    pub vehicles: (u32, u32),
    /// Inclusive range of the lateral reference-path shift, cells.
    pub shift: (i32, i32),
    /// Distance between the centre lane and the parallel lanes, cells.
    pub lane_offset: f64,
    /// Obstacle inflation (vehicle radius), cells.
    pub inflation: u32,
    /// Vehicle speed, m/s.
    pub speed: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            id: "scenario".into(),
            seed: 0,
            template: Template::corridor(),
            width: 256,
            height: 512,
            resolution: 0.2,
            ego: Cell::new(128, 460),
            vehicles: (4, 10),
            shift: (-8, 8),
            lane_offset: 16.0,
            inflation: 5,
            speed: 5.0,
        }
    }
}

impl ScenarioSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Param(m));
        if self.vehicles.0 > self.vehicles.1 {
            return bad(format!("vehicle range {}..={} is empty", self.vehicles.0, self.vehicles.1));
        }
        if self.shift.0 > self.shift.1 {
            return bad(format!("shift range {}..={} is empty", self.shift.0, self.shift.1));
        }
        if self.width < 21 || self.height < 21 {
            return bad(format!("scenario grid {}x{} is smaller than the 21x21 window", self.width, self.height));
        }
        if !(self.resolution > 0.0) || !(self.speed >= 0.0) {
            return bad("resolution must be positive and speed non-negative".into());
        }
        if self.ego.col < 0 || self.ego.row < 0 || self.ego.col as usize >= self.width || self.ego.row as usize >= self.height {
            return bad(format!("ego {:?} outside the grid", self.ego));
        }
        match self.template {
            Template::SCurve { period, .. } if !(period > 0.0) => bad("s-curve period must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Parses the flat `key = value` format. Missing keys take defaults.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ScenarioError::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }

        fn take<T: FromStr>(map: &mut BTreeMap<String, (usize, String)>, key: &str, default: T) -> Result<T, ScenarioError> {
            match map.remove(key) {
                None => Ok(default),
                Some((line, v)) => v
                    .parse()
                    .map_err(|_| ScenarioError::Parse { line, msg: format!("bad value {v:?} for {key}") }),
            }
        }

        let d = ScenarioSpec::default();
        let template_name: String = take(&mut map, "template", "corridor".to_string())?;
        let template = match template_name.as_str() {
            "corridor" => {
                let Template::Corridor { half_width } = Template::corridor() else { unreachable!() };
                Template::Corridor { half_width: take(&mut map, "half_width", half_width)? }
            }
            "s-curve" => {
                let Template::SCurve { half_width, amplitude, period } = Template::s_curve() else { unreachable!() };
                Template::SCurve {
                    half_width: take(&mut map, "half_width", half_width)?,
                    amplitude: take(&mut map, "amplitude", amplitude)?,
                    period: take(&mut map, "period", period)?,
                }
            }
            "lot" => {
                let Template::Lot { blocks } = Template::lot() else { unreachable!() };
                Template::Lot { blocks: take(&mut map, "blocks", blocks)? }
            }
            other => return Err(ScenarioError::Param(format!("unknown template {other:?}"))),
        };
        let spec = ScenarioSpec {
            id: take(&mut map, "id", d.id)?,
            seed: take(&mut map, "seed", d.seed)?,
            template,
            width: take(&mut map, "width", d.width)?,
            height: take(&mut map, "height", d.height)?,
            resolution: take(&mut map, "resolution", d.resolution)?,
            ego: Cell::new(take(&mut map, "ego_col", d.ego.col)?, take(&mut map, "ego_row", d.ego.row)?),
            vehicles: (take(&mut map, "vehicles_min", d.vehicles.0)?, take(&mut map, "vehicles_max", d.vehicles.1)?),
            shift: (take(&mut map, "shift_min", d.shift.0)?, take(&mut map, "shift_max", d.shift.1)?),
            lane_offset: take(&mut map, "lane_offset", d.lane_offset)?,
            inflation: take(&mut map, "inflation", d.inflation)?,
            speed: take(&mut map, "speed", d.speed)?,
        };
        if let Some((key, (line, _))) = map.into_iter().next() {
            return Err(ScenarioError::Parse { line, msg: format!("unknown key {key:?}") });
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("id", self.id.clone());
        kv("seed", self.seed.to_string());
        kv("template", self.template.name().into());
        match &self.template {
            Template::Corridor { half_width } => kv("half_width", half_width.to_string()),
            Template::SCurve { half_width, amplitude, period } => {
                kv("half_width", half_width.to_string());
                kv("amplitude", amplitude.to_string());
                kv("period", period.to_string());
            }
            Template::Lot { blocks } => kv("blocks", blocks.to_string()),
        }
        kv("width", self.width.to_string());
        kv("height", self.height.to_string());
        kv("resolution", self.resolution.to_string());
        kv("ego_col", self.ego.col.to_string());
        kv("ego_row", self.ego.row.to_string());
        kv("vehicles_min", self.vehicles.0.to_string());
        kv("vehicles_max", self.vehicles.1.to_string());
        kv("shift_min", self.shift.0.to_string());
        kv("shift_max", self.shift.1.to_string());
        kv("lane_offset", self.lane_offset.to_string());
        kv("inflation", self.inflation.to_string());
        kv("speed", self.speed.to_string());
        s
    }
}

/// A placed vehicle obstacle: centre, heading (radians), footprint cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub center: (f64, f64),
    pub heading: f64,
    pub cells: Vec<Cell>,
}

/// A built scenario. `refpath` is what the planner sees (shifted);
/// `true_refpath` is the unshifted route the obstacles were laid along.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub grid: OccupancyGrid,
    pub inflated: OccupancyGrid,
    pub refpath: ReferencePath,
    pub true_refpath: ReferencePath,
    pub shift: i32,
    pub start: Pose,
    pub speed: f64,
    pub vehicles: Vec<Vehicle>,
}

fn vehicle_cells(center: (f64, f64), heading: f64) -> Vec<Cell> {
    // Along-track unit vector in screen terms.
    let (ac, ar) = (heading.cos(), -heading.sin());
    let (lc, lr) = left_normal(heading);
    let reach = (VEHICLE_LENGTH.hypot(VEHICLE_WIDTH) / 2.0).ceil() as i32 + 1;
    let (cc, cr) = (center.0.round() as i32, center.1.round() as i32);
    let mut out = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let (c, r) = (cc + dc, cr + dr);
            let (vc, vr) = (c as f64 - center.0, r as f64 - center.1);
            let along = vc * ac + vr * ar;
            let lateral = vc * lc + vr * lr;
            if along.abs() <= VEHICLE_LENGTH / 2.0 && lateral.abs() <= VEHICLE_WIDTH / 2.0 {
                out.push(Cell::new(c, r));
            }
        }
    }
    out
}

/// The bare template (walls only) and its unshifted reference path.
pub fn build_template(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<(OccupancyGrid, ReferencePath), ScenarioError> {
    let (w, h) = (spec.width, spec.height);
    let ego = spec.ego;
    let top = 16.0f64.min(ego.row as f64 - 1.0);
    let mut cells = vec![false; w * h];
    let set = |cells: &mut Vec<bool>, c: i32, r: i32| {
        if c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h {
            cells[r as usize * w + c as usize] = true;
        }
    };

    let positions: Vec<(f64, f64)> = match &spec.template {
        Template::Corridor { half_width } => {
            let hw = *half_width as i32;
            for r in 0..h as i32 {
                for c in 0..w as i32 {
                    if (c - ego.col).abs() > hw {
                        set(&mut cells, c, r);
                    }
                }
            }
            let mut pts = Vec::new();
            let mut row = ego.row as f64;
            while row > top {
                pts.push((ego.col as f64, row));
                row -= 20.0;
            }
            pts.push((ego.col as f64, top));
            pts
        }
        Template::SCurve { half_width, amplitude, period } => {
            let centre = |r: f64| ego.col as f64 + amplitude * (2.0 * PI * (ego.row as f64 - r) / period).sin();
            let hw = *half_width as f64;
            for r in 0..h as i32 {
                // The road below the ego continues straight.
                let cc = centre((r as f64).min(ego.row as f64));
                for c in 0..w as i32 {
                    if (c as f64 - cc).abs() > hw {
                        set(&mut cells, c, r);
                    }
                }
            }
            let mut pts = Vec::new();
            let mut row = ego.row as f64;
            while row > top {
                pts.push((centre(row), row));
                row -= 8.0;
            }
            pts.push((centre(top), top));
            pts
        }
        Template::Lot { blocks } => {
            for r in 0..h as i32 {
                for c in 0..w as i32 {
                    if c < 3 || r < 3 || c >= w as i32 - 3 || r >= h as i32 - 3 {
                        set(&mut cells, c, r);
                    }
                }
            }
            let keep_clear = spec.inflation as f64 + 12.0;
            let mut placed = 0;
            let mut attempts = 0;
            while placed < *blocks && attempts < 1000 {
                attempts += 1;
                let bw = rng.gen_range(8..=30);
                let bh = rng.gen_range(8..=30);
                let c0 = rng.gen_range(0..w as i32);
                let r0 = rng.gen_range(0..h as i32);
                let near_ego = (c0..c0 + bw)
                    .flat_map(|c| (r0..r0 + bh).map(move |r| (c, r)))
                    .any(|(c, r)| Cell::new(c, r).distance(ego) <= keep_clear);
                if near_ego {
                    continue;
                }
                for r in r0..r0 + bh {
                    for c in c0..c0 + bw {
                        set(&mut cells, c, r);
                    }
                }
                placed += 1;
            }
            let bend = ego.row as f64 * 0.55;
            let far_col = (ego.col as f64 + w as f64 * 0.25).min(w as f64 - 20.0);
            vec![(ego.col as f64, ego.row as f64), (ego.col as f64, bend), (far_col, top)]
        }
    };

    let grid = OccupancyGrid::new(w, h, spec.resolution, cells, ego).map_err(|e| match e {
        GridError::EgoOccupied { .. } => ScenarioError::EgoBlocked("template covers the ego cell".into()),
        other => other.into(),
    })?;
    Ok((grid, ReferencePath::from_positions(&positions)?))
}

/// Builds the scenario for `spec`: template, vehicles along the reference
/// path and a parallel lane on either side, inflation, and the shifted path.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut grid, true_refpath) = build_template(spec, &mut rng)?;
    let ego = spec.ego;

    let template_inflated = grid.inflate(spec.inflation).map_err(|_| {
        ScenarioError::EgoBlocked(format!("walls lie within {} cells of the ego", spec.inflation))
    })?;
    let free_neighbours = (-1..=1)
        .flat_map(|dr| (-1..=1).map(move |dc| (dc, dr)))
        .filter(|&(dc, dr)| (dc, dr) != (0, 0) && !template_inflated.is_occupied(ego.offset(dc, dr)))
        .count();
    if free_neighbours == 0 {
        return Err(ScenarioError::EgoBlocked("no free neighbour after inflation".into()));
    }

    let count = rng.gen_range(spec.vehicles.0..=spec.vehicles.1);
    let length = true_refpath.length();
    let clearance = spec.inflation as f64 + 1.5;
    let mut vehicles = Vec::new();
    let mut attempts = 0;
    while (vehicles.len() as u32) < count && attempts < 50 * (count + 1) {
        attempts += 1;
        let hi = length - VEHICLE_LENGTH / 2.0;
        if hi <= MIN_VEHICLE_STATION {
            break;
        }
        let s = rng.gen_range(MIN_VEHICLE_STATION..hi);
        let lane = rng.gen_range(-1i32..=1) as f64 * spec.lane_offset;
        let jitter = rng.gen_range(-LANE_JITTER..=LANE_JITTER);
        let (c, r, heading) = true_refpath.station(s).expect("station within path length");
        let (nc, nr) = left_normal(heading);
        let centre = (c + nc * (lane + jitter), r + nr * (lane + jitter));
        let cells = vehicle_cells(centre, heading);
        if cells.iter().any(|cell| cell.distance(ego) <= clearance) {
            continue;
        }
        for &cell in &cells {
            grid.set_occupied(cell, true);
        }
        vehicles.push(Vehicle { center: centre, heading, cells });
    }

    let inflated = grid.inflate(spec.inflation).map_err(|_| ScenarioError::EgoBlocked("vehicles cover the ego".into()))?;
    let shift = rng.gen_range(spec.shift.0..=spec.shift.1);
    let refpath = true_refpath.shifted(shift as f64);
    let start_heading = true_refpath.points()[0].2;

    Ok(Scenario {
        id: spec.id.clone(),
        grid,
        inflated,
        refpath,
        true_refpath,
        shift,
        start: Pose::new(ego.col, ego.row, start_heading),
        speed: spec.speed,
        vehicles,
    })
}

/// Derives an independent child seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
