use std::path::Path;
use std::process::Command;

use actin_machine_cli::manifest::{Axis, NetworkSource};
use actin_machine_cli::{cmd_mine_gates, cmd_minimize, cmd_simulate, cmd_sweep, RunManifest};

fn adm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_adm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_manifest() -> RunManifest {
    let mut m = RunManifest::default();
    m.params.steps = 120;
    m.simulate.snapshot_steps = vec![13, 50, 100];
    m
}

fn strip_hash_line(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.starts_with("# manifest-hash"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn manifest_json_round_trips() {
    let mut m = RunManifest::default();
    m.network = NetworkSource::Synthetic {
        dims: [40, 40, 8],
        segments: 6,
        bundle_radius: 2,
        seed: 9,
        neighbors: 0,
    };
    m.gates.grid = Some(vec![5, 7]);
    m.machine.g_at = Some(3);
    let back = RunManifest::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.hash(), m.hash());
}

#[test]
fn hash_ignores_output_dir_only() {
    let a = RunManifest::default();
    let mut b = a.clone();
    b.output_dir = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    b.params.theta += 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn unknown_manifest_field_is_a_usage_error() {
    let err = RunManifest::from_json(r#"{"params": {"thetta": 3}}"#).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("thetta"), "{err}");
}

#[test]
fn simulate_emits_one_raster_per_snapshot_step() {
    let out = cmd_simulate(&small_manifest()).unwrap();
    for t in [13, 50, 100] {
        let pgm = out.get(&format!("snapshot_t{t}.pgm")).expect("raster present");
        assert!(pgm.starts_with(b"P5\n# manifest-hash: "));
    }
    assert!(out.get("snapshot_t200.pgm").is_none());
    assert!(out.get("potentials.csv").is_some());
    assert!(out.get("spikes.csv").is_some());
}

#[test]
fn input_zero_leaves_no_excited_pixels() {
    let mut m = small_manifest();
    m.simulate.input = "0".into();
    let out = cmd_simulate(&m).unwrap();
    for t in [13, 50, 100] {
        let pgm = out.get(&format!("snapshot_t{t}.pgm")).unwrap();
        // Header is three text lines plus the comment; pixels follow.
        let mut newlines = 0;
        let body = pgm
            .iter()
            .position(|&b| {
                newlines += (b == b'\n') as usize;
                newlines == 4
            })
            .unwrap();
        assert!(pgm[body + 1..].iter().all(|&p| p != 255), "excited pixel at t={t}");
    }
}

#[test]
fn same_manifest_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = small_manifest();
    m.output_dir = dir.path().join("a");
    let manifest = dir.path().join("run.json");
    std::fs::write(&manifest, m.to_json()).unwrap();
    let mpath = manifest.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for target in [&a, &b] {
        let o = adm(&["simulate", "--manifest", mpath, "--out", target.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 6);
    for n in names {
        let fa = std::fs::read(a.join(&n)).unwrap();
        let fb = std::fs::read(b.join(&n)).unwrap();
        if n == "manifest.json" {
            // Only the output directory differs.
            let ma = RunManifest::from_json(std::str::from_utf8(&fa).unwrap()).unwrap();
            let mb = RunManifest::from_json(std::str::from_utf8(&fb).unwrap()).unwrap();
            assert_eq!(ma.hash(), mb.hash());
        } else {
            assert_eq!(fa, fb, "{n:?} differs");
        }
    }
}

#[test]
fn missing_electrode_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_electrodes.txt");
    let o = adm(&[
        "simulate",
        "--electrodes",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no_such_electrodes.txt"), "{err}");
    assert!(err.contains("usage"), "{err}");
}

#[test]
fn bad_parameter_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = adm(&["simulate", "--theta", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));
}

#[test]
fn single_point_sweep_matches_mine_gates() {
    let mut m = small_manifest();
    m.gates.axis = Axis::Delta;
    m.gates.grid = Some(vec![m.params.delta]);
    let sweep = cmd_sweep(&m).unwrap();
    let mined = cmd_mine_gates(&m).unwrap();
    assert_eq!(
        strip_hash_line(sweep.get("sweep_delta.csv").unwrap()),
        strip_hash_line(mined.get("gates.csv").unwrap())
    );
}

#[test]
fn gate_inputs_must_exist() {
    let mut m = small_manifest();
    m.gates.in_y = 42;
    let err = cmd_mine_gates(&m).unwrap_err();
    assert!(err.to_string().contains("gates.in_y"), "{err}");
}

#[test]
fn minimize_from_bitstring() {
    let mut m = RunManifest::default();
    m.minimize.table = Some("0111".into());
    let out = cmd_minimize(&m).unwrap();
    let txt = strip_hash_line(out.get("dnf.txt").unwrap());
    assert_eq!(txt, "e0: x0 + x1");
}

#[test]
fn minimize_reads_machine_g_csv() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.csv");
    std::fs::write(&g, "# comment\ninput,state\n0,0\n1,2\n2,1\n3,3\n").unwrap();
    let o = adm(&[
        "minimize",
        "--g-csv",
        g.to_str().unwrap(),
        "--arity",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let txt = std::fs::read_to_string(dir.path().join("dnf.txt")).unwrap();
    assert!(txt.ends_with("e0: x1\ne1: x0\n"), "{txt}");
    let missing = dir.path().join("short.csv");
    std::fs::write(&missing, "input,state\n0,0\n1,1\n").unwrap();
    let o = adm(&["minimize", "--g-csv", missing.to_str().unwrap(), "--arity", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn machine_cli_writes_the_pipeline_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = adm(&["machine", "--steps", "200", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "sequences.csv",
        "global.dot",
        "pruned.dot",
        "pruned_summary.txt",
        "richness.csv",
        "nodes_per_input.csv",
        "inputs_per_node.csv",
        "per_input/input_63.dot",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let dot = std::fs::read_to_string(dir.path().join("global.dot")).unwrap();
    assert!(dot.contains("// manifest-hash: "));
    assert!(std::fs::read_dir(dir.path()).unwrap().any(|e| {
        let n = e.unwrap().file_name();
        let n = n.to_string_lossy();
        n.starts_with("dnf_t") && n.ends_with(".txt")
    }));
    assert!(!Path::new(&dir.path().join("per_input/input_0.dot")).exists());
}

#[test]
fn shipped_manifests_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests");
    let bundled = RunManifest::load(&dir.join("bundled.json")).unwrap();
    let mut expected = RunManifest::default();
    expected.output_dir = "out/bundled".into();
    assert_eq!(bundled, expected);
    let sweep = RunManifest::load(&dir.join("delta_sweep.json")).unwrap();
    assert_eq!(sweep.gates.axis, Axis::Delta);
    assert_eq!(sweep.params.delta, 20);
}
