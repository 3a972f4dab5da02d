//! The lookup-table action set: straight-segment motion primitives to cells
//! of the 21×21 window around the current cell, plus the speed-dependent
//! angular window that limits which of them may follow a given heading.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::grid::{angle_diff, line_cells, Cell};

/// Half-width of the lookup window (the window is `2 * RADIUS + 1` wide).
pub const WINDOW_RADIUS: i32 = 10;

/// One motion primitive. `dx` is the column offset, `dy` the row offset
/// (screen convention, +row is down); `direction` is measured with +y up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub dx: i32,
    pub dy: i32,
    pub direction: f64,
    pub length: f64,
}

impl Action {
    pub fn new(dx: i32, dy: i32) -> Self {
        debug_assert!((dx, dy) != (0, 0));
        Self {
            dx,
            dy,
            // Integer negation keeps (−1, 0) at +π rather than −π.
            direction: ((-dy) as f64).atan2(dx as f64),
            length: Cell::new(0, 0).distance(Cell::new(dx, dy)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionMode {
    /// Visible lattice points only: `gcd(|dx|, |dy|) = 1`.
    #[default]
    Coprime,
    /// Every nonzero offset in the window.
    AllOffsets,
}

impl FromStr for ActionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coprime" => Ok(Self::Coprime),
            "all-offsets" | "all" => Ok(Self::AllOffsets),
            other => Err(format!("unknown action mode {other:?} (expected coprime or all-offsets)")),
        }
    }
}

/// Ordered set of actions with the swept cells of each one precomputed.
#[derive(Debug, Clone)]
pub struct ActionSet {
    actions: Vec<Action>,
    // Cells after the origin along each action's line, relative to the origin.
    sweeps: Vec<Vec<(i32, i32)>>,
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl ActionSet {
    pub fn build(mode: ActionMode) -> Self {
        let r = WINDOW_RADIUS;
        let mut actions: Vec<Action> = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| (dx, dy) != (0, 0))
            .filter(|&(dx, dy)| mode == ActionMode::AllOffsets || gcd(dx, dy) == 1)
            .map(|(dx, dy)| Action::new(dx, dy))
            .collect();
        actions.sort_by(|a, b| {
            a.direction
                .total_cmp(&b.direction)
                .then(a.length.total_cmp(&b.length))
                .then((a.dx, a.dy).cmp(&(b.dx, b.dy)))
        });
        Self::from_actions(actions)
    }

    fn from_actions(actions: Vec<Action>) -> Self {
        let origin = Cell::new(0, 0);
        let sweeps = actions
            .iter()
            .map(|a| line_cells(origin, Cell::new(a.dx, a.dy)).skip(1).map(|c| (c.col, c.row)).collect())
            .collect();
        Self { actions, sweeps }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> &Action {
        &self.actions[index]
    }

    /// Cells swept by action `index` (origin excluded, endpoint included).
    pub fn sweep(&self, index: usize) -> &[(i32, i32)] {
        &self.sweeps[index]
    }

    pub fn find(&self, dx: i32, dy: i32) -> Option<usize> {
        self.actions.iter().position(|a| a.dx == dx && a.dy == dy)
    }

    pub fn contains(&self, dx: i32, dy: i32) -> bool {
        self.find(dx, dy).is_some()
    }

    /// Indices of the actions within `limit` radians of `heading`, in set order.
    pub fn children_within(&self, heading: f64, limit: f64) -> Vec<usize> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, a)| angle_diff(a.direction, heading) <= limit)
            .map(|(i, _)| i)
            .collect()
    }

    /// CSV dump with header `dx,dy,direction,length`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dx,dy,direction,length\n");
        for a in &self.actions {
            writeln!(out, "{},{},{},{}", a.dx, a.dy, a.direction, a.length).unwrap();
        }
        out
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self::build(ActionMode::default())
    }
}

/// Piecewise-constant map from speed (m/s) to the allowed heading change.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl SpeedProfile {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, String> {
        if breakpoints.is_empty() {
            return Err("speed profile needs at least one breakpoint".into());
        }
        for &(speed, limit) in &breakpoints {
            if !(speed >= 0.0) {
                return Err(format!("breakpoint speed {speed} must be non-negative"));
            }
            if !(limit > 0.0 && limit <= PI) {
                return Err(format!("angle limit {limit} must lie in (0, π]"));
            }
        }
        for pair in breakpoints.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err("breakpoint speeds must be strictly increasing".into());
            }
            if pair[1].1 > pair[0].1 {
                return Err("angle limits must not increase with speed".into());
            }
        }
        Ok(Self { breakpoints })
    }

    /// Same limit at every speed.
    pub fn constant(limit: f64) -> Self {
        Self::new(vec![(0.0, limit)]).expect("valid constant profile")
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Limit of the last breakpoint at or below `speed`; below the first
    /// breakpoint, the first limit.
    pub fn angle_limit(&self, speed: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|&&(s, _)| s <= speed)
            .last()
            .unwrap_or(&self.breakpoints[0])
            .1
    }
}

impl Default for SpeedProfile {
    /// 0 m/s → 120°, 2 → 90°, 5 → 60°, 10 → 40°.
    fn default() -> Self {
        Self::new(vec![
            (0.0, 120f64.to_radians()),
            (2.0, 90f64.to_radians()),
            (5.0, 60f64.to_radians()),
            (10.0, 40f64.to_radians()),
        ])
        .expect("valid default profile")
    }
}
