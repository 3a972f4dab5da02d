//! Fixtures shared by the criterion benches.

use regionplan_core::datagen::{build_scenario, Scenario, ScenarioSpec, Template};
use regionplan_core::Cell;

/// Seeded benchmark scenario.
pub fn scenario(template: Template, seed: u64) -> Scenario {
    build_scenario(&ScenarioSpec { id: format!("bench{seed}"), seed, template, ..Default::default() })
        .expect("benchmark scenario builds")
}

/// Last free cell on the reference path, walking back from its far end.
pub fn far_target(sc: &Scenario) -> Cell {
    let mut s = sc.refpath.length();
    while s > 0.0 {
        let (c, r, _) = sc.refpath.station(s).expect("station within length");
        let cell = Cell::new(c.round() as i32, r.round() as i32);
        if !sc.inflated.is_occupied(cell) {
            return cell;
        }
        s -= 5.0;
    }
    sc.start.cell()
}
