//! Lookup-table A* over `(col, row, θ)` states, with an optional soft
//! region constraint.
//!
//! Step cost is `length + delta_ang_weight · |Δheading|` and the heuristic is
//! the Euclidean cell distance to the target. When a region mask is given,
//! a child landing inside it has its g-increment and its heuristic scaled by
//! `w`, which pulls the search into the region without forbidding anything
//! outside it.

use std::cell::RefCell;
use std::cmp::Ordering;
use dary_heap::QuaternaryHeap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{ActionSet, SpeedProfile};
use crate::grid::{angle_diff, Cell, GridError, OccupancyGrid, Pose, RegionMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Equal f: lower h first, then insertion order.
    #[default]
    LowerH,
    /// Equal f: insertion order only.
    Fifo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Region weight in `(0, 1]`.
    pub w: f64,
    /// Cost units (cells) per radian of heading change.
    pub delta_ang_weight: f64,
    pub theta_bins: usize,
    pub time_limit: Duration,
    /// Goal radius in cells; heading at the goal is unconstrained.
    pub goal_tolerance: f64,
    pub tie_break: TieBreak,
    pub profile: SpeedProfile,
    /// Record the θ-projected footprint of expanded cells.
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            w: 0.15,
            delta_ang_weight: 3.0,
            theta_bins: 72,
            time_limit: Duration::from_millis(100),
            goal_tolerance: 1.0,
            tie_break: TieBreak::LowerH,
            profile: SpeedProfile::default(),
            trace: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |msg: String| Err(PlanError::Config(msg));
        if !(self.w > 0.0 && self.w <= 1.0) {
            return bad(format!("w = {} must lie in (0, 1]", self.w));
        }
        if !(self.delta_ang_weight >= 0.0) {
            return bad(format!("delta_ang_weight = {} must be non-negative", self.delta_ang_weight));
        }
        if !(8..=u16::MAX as usize).contains(&self.theta_bins) {
            return bad(format!("theta_bins = {} must lie in [8, 65535]", self.theta_bins));
        }
        if self.time_limit.is_zero() {
            return bad("time_limit must be positive".into());
        }
        if !(self.goal_tolerance >= 0.0) {
            return bad(format!("goal_tolerance = {} must be non-negative", self.goal_tolerance));
        }
        Ok(())
    }

    /// Bucket index of a heading; bins are centred on multiples of the bin width.
    pub fn theta_bin(&self, heading: f64) -> usize {
        let width = 2.0 * PI / self.theta_bins as f64;
        (heading.rem_euclid(2.0 * PI) / width).round() as usize % self.theta_bins
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("start cell ({}, {}) is occupied", .0.col, .0.row)]
    StartOccupied(Cell),
    #[error("target cell ({}, {}) is occupied on the inflated grid", .0.col, .0.row)]
    TargetOccupied(Cell),
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("parent chain of node {0} does not terminate at a root")]
    BrokenChain(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanStatus {
    Reached,
    Timeout,
    Exhausted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Nodes popped and expanded (stale queue entries are not counted).
    pub expanded: usize,
    pub pushed: usize,
    pub elapsed_ms: f64,
    /// Expansions whose cell lies inside the region mask.
    pub region_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub status: PlanStatus,
    /// Start-to-target poses; empty unless reached.
    pub path: Vec<Pose>,
    /// g of the terminal node (region-weighted when a region was used).
    pub cost: Option<f64>,
    pub stats: SearchStats,
    /// Expanded cells projected over θ, when tracing was enabled.
    pub footprint: Option<RegionMask>,
    /// Popped `(col, row, theta_bin)` states in order, when tracing was enabled.
    pub pops: Option<Vec<(i32, i32, usize)>>,
}

impl PlanResult {
    pub fn reached(&self) -> bool {
        self.status == PlanStatus::Reached
    }
}

const ROOT: u32 = u32::MAX;
const NO_ACTION: u16 = u16::MAX;

/// Kept small: a long search allocates millions of these.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SearchNode {
    col: i32,
    row: i32,
    /// Unweighted step costs accumulated inside / outside the region; g is
    /// `w · g_in + g_out`.
    g_in: f64,
    g_out: f64,
    parent: u32,
    /// Incoming action, which also fixes the exact heading.
    action: u16,
    theta_bin: u16,
}

impl SearchNode {
    fn parent(&self) -> Option<usize> {
        (self.parent != ROOT).then_some(self.parent as usize)
    }
}

/// Follows parent links from `terminal` and returns root-first poses.
fn backtrack(nodes: &[SearchNode], terminal: usize, heading: impl Fn(&SearchNode) -> f64) -> Result<Vec<Pose>, PlanError> {
    let mut out = Vec::new();
    let mut cur = Some(terminal);
    while let Some(i) = cur {
        if out.len() > nodes.len() {
            return Err(PlanError::BrokenChain(terminal));
        }
        let node = nodes.get(i).ok_or(PlanError::BrokenChain(terminal))?;
        out.push(Pose::new(node.col, node.row, heading(node)));
        cur = node.parent();
    }
    out.reverse();
    Ok(out)
}

/// f and h are non-negative, so their bit patterns order like the values.
#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: u64,
    h: u64,
    node: u32,
}

impl OpenEntry {
    fn new(f: f64, h: f64, node: u32) -> Self {
        debug_assert!(f >= 0.0 && h >= 0.0);
        Self { f: f.to_bits(), h: h.to_bits(), node }
    }
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // The heap is a max-heap: "greater" pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        // Node indices grow with push order, so they double as the FIFO key.
        (other.f, other.h, other.node).cmp(&(self.f, self.h, self.node))
    }
}

#[derive(Debug, Clone, Copy)]
struct Child {
    step: f64,
    /// `dx, dy` as a row-major index offset.
    delta: i32,
    /// `bin * GTable::CELLS`.
    bin_offset: u32,
    action: u16,
    bin: u16,
    dx: i8,
    dy: i8,
    /// Chebyshev length; every swept cell lies within it of the parent.
    reach: u8,
    /// Every swept cell lies within this Chebyshev distance of the parent
    /// or of the child.
    split: u8,
}

/// Best g per `(cell, θ-bin)`. Storage comes in 4×4-cell tiles allocated on
/// first touch, bin-major within a tile so neighbouring cells reached by
/// the same action share cache lines. Each cell records where its bin-0
/// entry lives, so a lookup is one load and an add.
#[derive(Default)]
struct GTable {
    /// Per cell, the offset of its bin-0 entry in `g`, or `NONE`.
    base: Vec<u32>,
    g: Vec<f64>,
    /// Origins of allocated tiles, so a reset only clears what was touched.
    tiles: Vec<(usize, usize)>,
    width: usize,
    height: usize,
    /// Entries per tile.
    stride: usize,
}

impl GTable {
    const NONE: u32 = u32::MAX;
    const SIDE: usize = 4;
    const CELLS: usize = Self::SIDE * Self::SIDE;

    /// Whether every entry of a full table is addressable by a `u32` base.
    fn fits(width: usize, height: usize, bins: usize) -> bool {
        let cells = width.div_ceil(Self::SIDE) * height.div_ceil(Self::SIDE) * Self::CELLS;
        cells.checked_mul(bins).is_some_and(|n| n < Self::NONE as usize)
    }

    /// Empties the table for a new search, keeping its allocations.
    fn reset(&mut self, width: usize, height: usize, bins: usize) {
        if (width, height) != (self.width, self.height) {
            self.base.clear();
            self.base.resize(width * height, Self::NONE);
            (self.width, self.height) = (width, height);
        } else {
            for &(c0, r0) in &self.tiles {
                for r in r0..(r0 + Self::SIDE).min(height) {
                    self.base[r * width + c0..r * width + (c0 + Self::SIDE).min(width)].fill(Self::NONE);
                }
            }
        }
        self.tiles.clear();
        self.g.clear();
        self.stride = bins * Self::CELLS;
    }

    #[inline]
    fn get(&self, cell: usize, bin_offset: usize) -> f64 {
        match self.base[cell] {
            Self::NONE => f64::INFINITY,
            b => {
                let i = b as usize + bin_offset;
                debug_assert!(i < self.g.len() && bin_offset < self.stride);
                // SAFETY: `b` lies in the first `CELLS` entries of an
                // allocated tile of `stride` entries, and `bin_offset` is a
                // multiple of `CELLS` below `stride`.
                unsafe { *self.g.get_unchecked(i) }
            }
        }
    }

    fn set(&mut self, cell: usize, bin_offset: usize, g: f64) {
        if self.base[cell] == Self::NONE {
            self.allocate(cell);
        }
        let i = self.base[cell] as usize + bin_offset;
        self.g[i] = g;
    }

    fn allocate(&mut self, cell: usize) {
        let (col, row) = (cell % self.width, cell / self.width);
        let (c0, r0) = (col & !(Self::SIDE - 1), row & !(Self::SIDE - 1));
        let start = self.g.len();
        self.g.resize(start + self.stride, f64::INFINITY);
        self.tiles.push((c0, r0));
        for r in r0..(r0 + Self::SIDE).min(self.height) {
            for c in c0..(c0 + Self::SIDE).min(self.width) {
                self.base[r * self.width + c] = (start + (r - r0) * Self::SIDE + (c - c0)) as u32;
            }
        }
    }
}

/// Search buffers reused across plans on the same thread, so long searches
/// do not pay for fresh pages every time.
#[derive(Default)]
struct Workspace {
    nodes: Vec<SearchNode>,
    open: QuaternaryHeap<OpenEntry>,
    best_g: GTable,
}

thread_local! {
    static WORKSPACE: RefCell<Workspace> = RefCell::new(Workspace::default());
}

/// Plans from `start` to `target` on `grid` (which should already be
/// inflated by the vehicle radius).
///
/// With `region = None`, an all-false region, or `w = 1`, the search pops the
/// same states in the same order.
pub fn plan(
    grid: &OccupancyGrid,
    start: Pose,
    target: Cell,
    speed: f64,
    region: Option<&RegionMask>,
    cfg: &SearchConfig,
    actions: &ActionSet,
) -> Result<PlanResult, PlanError> {
    let clock = Instant::now();
    cfg.validate()?;
    grid.check_bounds(start.cell())?;
    grid.check_bounds(target)?;
    if let Some(mask) = region {
        grid.check_mask(mask)?;
    }
    if !GTable::fits(grid.width(), grid.height(), cfg.theta_bins) {
        return Err(PlanError::Config(format!(
            "{}×{} cells × {} θ-bins is too many states",
            grid.width(),
            grid.height(),
            cfg.theta_bins
        )));
    }
    if grid.is_occupied(start.cell()) {
        return Err(PlanError::StartOccupied(start.cell()));
    }
    if grid.is_occupied(target) {
        return Err(PlanError::TargetOccupied(target));
    }
    WORKSPACE.with(|ws| match ws.try_borrow_mut() {
        Ok(mut ws) => search(&mut ws, clock, grid, start, target, speed, region, cfg, actions),
        Err(_) => search(&mut Workspace::default(), clock, grid, start, target, speed, region, cfg, actions),
    })
}

#[allow(clippy::too_many_arguments)]
fn search(
    ws: &mut Workspace,
    clock: Instant,
    grid: &OccupancyGrid,
    start: Pose,
    target: Cell,
    speed: f64,
    region: Option<&RegionMask>,
    cfg: &SearchConfig,
    actions: &ActionSet,
) -> Result<PlanResult, PlanError> {
    let limit = cfg.profile.angle_limit(speed);
    let width = grid.width();
    let cell_index = |col: i32, row: i32| row as usize * width + col as usize;
    let in_region = |c: Cell| region.is_some_and(|m| m.get(c));
    // At w = 1 the weighting is the identity; skipping it keeps costs bit-equal.
    let weighting = if cfg.w < 1.0 { region } else { None };
    let weighted = |c: Cell| weighting.is_some_and(|m| m.get(c));
    // FIFO tie-breaking queues every entry with h = 0 so only order decides.
    let queue_h = |h: f64| if cfg.tie_break == TieBreak::LowerH { h } else { 0.0 };

    let Workspace { nodes, open, best_g } = ws;
    nodes.clear();
    open.clear();
    best_g.reset(grid.width(), grid.height(), cfg.theta_bins);
    let clearance = grid.clearance();
    let mut stats = SearchStats::default();
    let mut footprint = cfg.trace.then(|| RegionMask::new(grid.width(), grid.height()));
    let mut pops = cfg.trace.then(Vec::new);
    // Children per incoming action, filled on first use.
    let mut children_cache: Vec<Option<Vec<Child>>> = vec![None; actions.len()];
    let expand = |heading: f64| -> Vec<Child> {
        actions
            .children_within(heading, limit)
            .into_iter()
            .map(|i| {
                let a = actions.get(i);
                let step = a.length + cfg.delta_ang_weight * angle_diff(a.direction, heading);
                let reach = a.dx.abs().max(a.dy.abs());
                let split = actions
                    .sweep(i)
                    .iter()
                    .map(|&(c, r)| c.abs().max(r.abs()).min((a.dx - c).abs().max((a.dy - r).abs())))
                    .max()
                    .unwrap_or(0);
                let bin = cfg.theta_bin(a.direction);
                Child {
                    step,
                    delta: a.dy * width as i32 + a.dx,
                    bin_offset: (bin * GTable::CELLS) as u32,
                    action: i as u16,
                    bin: bin as u16,
                    dx: a.dx as i8,
                    dy: a.dy as i8,
                    reach: reach as u8,
                    split: split as u8,
                }
            })
            .collect()
    };
    let root_children = expand(start.heading);
    let max_reach = (0..actions.len()).map(|i| actions.get(i).dx.abs().max(actions.get(i).dy.abs())).max().unwrap_or(0);
    let (grid_w, grid_h) = (grid.width() as i32, grid.height() as i32);

    let root_bin = cfg.theta_bin(start.heading);
    let mut root_h = start.cell().distance(target);
    if weighted(start.cell()) {
        root_h *= cfg.w;
    }
    nodes.push(SearchNode { col: start.col, row: start.row, g_in: 0.0, g_out: 0.0, parent: ROOT, action: NO_ACTION, theta_bin: root_bin as u16 });
    best_g.set(cell_index(start.col, start.row), root_bin * GTable::CELLS, 0.0);
    open.push(OpenEntry::new(root_h, queue_h(root_h), 0));
    stats.pushed = 1;

    let heading_of = |n: &SearchNode| if n.action == NO_ACTION { start.heading } else { actions.get(n.action as usize).direction };
    let g_of = |n: &SearchNode| cfg.w * n.g_in + n.g_out;
    let finish = |status, path, cost, mut stats: SearchStats, footprint, pops| {
        stats.elapsed_ms = clock.elapsed().as_secs_f64() * 1e3;
        Ok(PlanResult { status, path, cost, stats, footprint, pops })
    };

    loop {
        if clock.elapsed() >= cfg.time_limit {
            return finish(PlanStatus::Timeout, Vec::new(), None, stats, footprint, pops);
        }
        let Some(entry) = open.pop() else {
            return finish(PlanStatus::Exhausted, Vec::new(), None, stats, footprint, pops);
        };
        let node = nodes[entry.node as usize];
        let node_g = g_of(&node);
        let node_index = cell_index(node.col, node.row);
        if node_g > best_g.get(node_index, node.theta_bin as usize * GTable::CELLS) {
            continue;
        }
        stats.expanded += 1;
        let cell = Cell::new(node.col, node.row);
        if in_region(cell) {
            stats.region_hits += 1;
        }
        if let Some(fp) = footprint.as_mut() {
            fp.set(cell, true);
        }
        if let Some(p) = pops.as_mut() {
            p.push((node.col, node.row, node.theta_bin as usize));
        }
        if cell.distance(target) <= cfg.goal_tolerance {
            let path = backtrack(&nodes, entry.node as usize, heading_of)?;
            return finish(PlanStatus::Reached, path, Some(node_g), stats, footprint, pops);
        }

        let children: &[Child] = if node.action == NO_ACTION {
            &root_children
        } else {
            let slot = &mut children_cache[node.action as usize];
            if slot.is_none() {
                *slot = Some(expand(heading_of(&node)));
            }
            slot.as_deref().unwrap()
        };

        let node_clearance = clearance[node_index] as i32;
        let interior = node.col >= max_reach && node.row >= max_reach && node.col + max_reach < grid_w && node.row + max_reach < grid_h;
        for &Child { step, delta, bin_offset, action, bin, dx, dy, reach, split } in children {
            let child = cell.offset(dx as i32, dy as i32);
            if !interior && !grid.in_bounds(child) {
                continue;
            }
            // The endpoint is part of the sweep, so an occupied child is
            // rejected before its g is looked up.
            let child_index = node_index.wrapping_add_signed(delta as isize);
            let child_clearance = clearance[child_index] as i32;
            if child_clearance == 0 {
                continue;
            }
            let bin_offset = bin_offset as usize;
            // Weighted sums are formed from unweighted partial sums so that
            // scaling preserves the exact f-ties of the unweighted search.
            let inside = weighted(child);
            let (g_in, g_out) = if inside { (node.g_in + step, node.g_out) } else { (node.g_in, node.g_out + step) };
            let g = cfg.w * g_in + g_out;
            if g >= best_g.get(child_index, bin_offset) {
                continue;
            }
            let (reach, split) = (reach as i32, split as i32);
            let clear = node_clearance > reach || (node_clearance > split && child_clearance > split);
            if !clear
                && actions.sweep(action as usize).iter().any(|&(dc, dr)| grid.occupied_unchecked(node.col + dc, node.row + dr))
            {
                continue;
            }
            best_g.set(child_index, bin_offset, g);
            let h_raw = child.distance(target);
            let (h, f) = if inside { (cfg.w * h_raw, cfg.w * (g_in + h_raw) + g_out) } else { (h_raw, g + h_raw) };
            let idx = nodes.len() as u32;
            nodes.push(SearchNode { col: child.col, row: child.row, g_in, g_out, parent: entry.node, action, theta_bin: bin });
            open.push(OpenEntry::new(f, queue_h(h), idx));
            stats.pushed += 1;
        }
    }
}

/// Unweighted cost of a pose sequence: step lengths plus scaled heading changes.
pub fn path_cost(path: &[Pose], delta_ang_weight: f64) -> f64 {
    path.windows(2)
        .map(|p| {
            p[0].cell().distance(p[1].cell()) + delta_ang_weight * angle_diff(p[1].heading, p[0].heading)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathDefect {
    #[error("path is empty")]
    Empty,
    #[error("path starts at {0:?}, not at the start pose")]
    WrongStart(Pose),
    #[error("path ends {0:.3} cells from the target")]
    MissesTarget(f64),
    #[error("step {0} is not an action of the set")]
    NotAnAction(usize),
    #[error("step {0} turns more than the angle limit")]
    TurnTooSharp(usize),
    #[error("step {0} heading does not match its action direction")]
    HeadingMismatch(usize),
    #[error("step {step} collides at {cell:?}")]
    Collision { step: usize, cell: Cell },
    #[error("step {0} leaves the grid")]
    OutOfBounds(usize),
}

/// Checks that a reached path starts at `start`, ends within tolerance of
/// `target`, and decomposes into collision-free set actions within the
/// angle limit.
pub fn validate_path(
    grid: &OccupancyGrid,
    path: &[Pose],
    start: Pose,
    target: Cell,
    speed: f64,
    cfg: &SearchConfig,
    actions: &ActionSet,
) -> Result<(), PathDefect> {
    let first = path.first().ok_or(PathDefect::Empty)?;
    if first.cell() != start.cell() || first.heading != start.heading {
        return Err(PathDefect::WrongStart(*first));
    }
    let limit = cfg.profile.angle_limit(speed);
    for (i, p) in path.windows(2).enumerate() {
        let (dx, dy) = (p[1].col - p[0].col, p[1].row - p[0].row);
        let a = actions.find(dx, dy).map(|k| actions.get(k)).ok_or(PathDefect::NotAnAction(i))?;
        if p[1].heading != a.direction {
            return Err(PathDefect::HeadingMismatch(i));
        }
        if angle_diff(a.direction, p[0].heading) > limit {
            return Err(PathDefect::TurnTooSharp(i));
        }
        match grid.trace_line(p[0].cell(), p[1].cell()) {
            Ok(None) => {}
            Ok(Some(cell)) => return Err(PathDefect::Collision { step: i, cell }),
            Err(_) => return Err(PathDefect::OutOfBounds(i)),
        }
    }
    let end = path.last().unwrap().cell().distance(target);
    if end > cfg.goal_tolerance {
        return Err(PathDefect::MissesTarget(end));
    }
    Ok(())
}
