//! Lookup-table A* path planning on occupancy grids, with predicted path
//! regions used as soft constraints, batch planning to many targets, and a
//! generator for (input, label) training pairs.

pub mod actions;
pub mod bench;
pub mod datagen;
pub mod grid;
pub mod multi;
pub mod raster;
pub mod region;
pub mod search;

pub use actions::{Action, ActionMode, ActionSet, SpeedProfile};
pub use grid::{dilate, Cell, OccupancyGrid, Pose, ReferencePath, RegionMask};
pub use multi::{plan_all, sample_targets, MultiPlanReport, SampleFrom, TargetSamplerConfig};
pub use region::{predict_batch, render_fcn_input, RegionSource};
pub use search::{plan, PlanResult, PlanStatus, SearchConfig, SearchStats};
