use std::collections::BTreeMap;
use std::path::Path;

use regionplan_core::datagen::{build_scenario, generate_samples, GenOptions, Manifest, ScenarioSpec};
use regionplan_core::multi::SampleFrom;
use regionplan_core::raster::{encode_ppm, read_mask};
use regionplan_core::region::{path_raster, render_fcn_input_with};
use regionplan_core::{plan, ActionSet, Cell, OccupancyGrid, ReferencePath, TargetSamplerConfig};

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn golden_input_raster() {
    let mut cells = vec![false; 5 * 4];
    cells[0] = true;
    let grid = OccupancyGrid::new(5, 4, 0.2, cells, Cell::new(2, 3)).unwrap();
    let refpath = ReferencePath::from_positions(&[(0.0, 3.0), (4.0, 3.0)]).unwrap();
    let bytes = encode_ppm(&render_fcn_input_with(&grid, &refpath, Cell::new(4, 0), 1, 1));

    let mut expected = b"P6\n5 4\n255\n".to_vec();
    for row in 0..4 {
        for col in 0..5 {
            let obstacle = (col, row) == (0, 0);
            let reference = row >= 2;
            let target = [(4, 0), (3, 0), (4, 1)].contains(&(col, row));
            expected.extend([obstacle, reference, target].map(|b| if b { 255u8 } else { 0 }));
        }
    }
    assert_eq!(bytes, expected);
}

#[test]
fn fixed_seed_trees_are_byte_identical() {
    let spec = ScenarioSpec { id: "g".into(), seed: 11, vehicles: (2, 4), ..Default::default() };
    let sampler = TargetSamplerConfig { longitudinal_step: 40.0, lateral_offsets: vec![-5, 5], max_targets: 3, from: SampleFrom::Ego };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = generate_samples(&spec, &sampler, 2, a.path(), &GenOptions::default()).unwrap();
    let mb = generate_samples(&spec, &sampler, 2, b.path(), &GenOptions::default()).unwrap();
    assert_eq!(ma, mb);
    assert!(!ma.rows.is_empty());
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), 2 * ma.rows.len() + 1);
    assert_eq!(ta, tb);

    let set = ActionSet::default();
    let rows = Manifest::parse_csv(std::str::from_utf8(&ta["manifest.csv"]).unwrap()).unwrap();
    for row in rows {
        let sc = build_scenario(&spec.with_seed(row.seed)).unwrap();
        let r = plan(&sc.inflated, sc.start, row.target, sc.speed, None, &GenOptions::default().search, &set).unwrap();
        let label = read_mask(a.path().join(&row.label)).unwrap();
        assert!(path_raster(&r.path, label.width(), label.height()).is_subset_of(&label), "{}", row.label);
    }
}
