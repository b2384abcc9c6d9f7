use std::sync::Arc;

use actin_machine::automaton::{AutomatonField, AutomatonParams, VoxelState};
use actin_machine::electrodes::{run_trial, Electrode, RecordingParams};
use actin_machine::fixtures::{straight_tube, tube_axis};
use actin_machine::gates::{mine, GateType};
use actin_machine::grid::{rasterize_segments, Dims, Segment};
use actin_machine::machine::{global_graph, run_all_inputs, MachineConfig};

const LEN: usize = 61;
const R: usize = 2;

fn rec(steps: usize) -> RecordingParams {
    RecordingParams {
        steps,
        ..RecordingParams::default()
    }
}

#[test]
fn wave_reaches_far_end_of_tube() {
    let m = Arc::new(straight_tube(LEN, R));
    let es = [
        Electrode::new(0, tube_axis(R, 2), 4),
        Electrode::new(1, tube_axis(R, LEN - 3), 4),
    ];
    let t = run_trial(&m, &AutomatonParams::default(), &rec(100), &es, &[true, false]).unwrap();
    let first = t.spikes[1].iter().position(|&s| s).expect("far electrode spikes");
    assert!(first > 0);
}

#[test]
fn mirror_symmetric_tube_gives_symmetric_gates() {
    let m = Arc::new(straight_tube(LEN, R));
    let x = Electrode::new(0, tube_axis(R, 2), 4);
    let y = Electrode::new(1, tube_axis(R, LEN - 3), 4);
    let out = Electrode::new(2, tube_axis(R, LEN / 2), 4);
    let c = mine(&m, &AutomatonParams::default(), &rec(80), &x, &y, &[out], false).unwrap();
    // Colliding waves annihilate, so the output drops out early under 11.
    for g in &c.map[0] {
        assert!(matches!(g, GateType::Zero | GateType::Or | GateType::Xor), "{g}");
    }
    assert!(c.counts[0][GateType::Or.column().unwrap()] > 0);
}

#[test]
fn identical_inputs_only_show_symmetric_gates() {
    let m = Arc::new(straight_tube(LEN, R));
    let x = Electrode::new(0, tube_axis(R, 2), 4);
    let y = Electrode::new(1, tube_axis(R, 2), 4);
    let outs = [
        Electrode::new(2, tube_axis(R, 20), 4),
        Electrode::new(3, tube_axis(R, 45), 4),
    ];
    let c = mine(&m, &AutomatonParams::default(), &rec(80), &x, &y, &outs, false).unwrap();
    for row in &c.map {
        for g in row {
            assert!(matches!(g, GateType::Or | GateType::Zero), "{g}");
        }
    }
    assert!(c.totals()[GateType::Or.column().unwrap()] > 0);
}

#[test]
fn disconnected_components_stay_apart() {
    let dims = Dims::new(50, 20, 7).unwrap();
    let segs = [
        Segment { a: [0.0, 4.0, 3.0], b: [49.0, 4.0, 3.0] },
        Segment { a: [0.0, 15.0, 3.0], b: [49.0, 15.0, 3.0] },
    ];
    let m = Arc::new(rasterize_segments(dims, &segs, R));
    let params = AutomatonParams::default();
    let mut f = AutomatonField::new(m.clone()).unwrap();
    f.excite_ball(actin_machine::Voxel::new(2, 4, 3), 4).unwrap();
    let mut reached_far_end = false;
    for _ in 0..60 {
        f.step(&params);
        for (idx, s) in f.states().iter().enumerate() {
            let v = dims.voxel(idx);
            if v.j >= 10 {
                assert_eq!(*s, VoxelState::Resting, "{v:?} woke up");
            } else if v.i >= 45 && *s == VoxelState::Excited {
                reached_far_end = true;
            }
        }
    }
    assert!(reached_far_end);
}

#[test]
fn tube_machine_is_deterministic_and_normalised() {
    let m = Arc::new(straight_tube(LEN, R));
    let mut cfg = MachineConfig::new(vec![
        Electrode::new(0, tube_axis(R, 2), 4),
        Electrode::new(1, tube_axis(R, LEN / 2), 4),
        Electrode::new(2, tube_axis(R, LEN - 3), 4),
    ]);
    cfg.rec.steps = 80;
    let a = run_all_inputs(&cfg, &m).unwrap();
    let b = run_all_inputs(&cfg, &m).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    assert!(a[0].states.iter().all(|&s| s == 0));
    let g = global_graph(&a);
    for src in g.sources() {
        let total: f64 = g.edges().filter(|e| e.from == src).map(|e| e.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
