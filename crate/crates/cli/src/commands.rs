//! One function per subcommand. Each builds its outputs in memory and then
//! writes them in a fixed order, so a manifest always yields the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use actin_machine::electrodes::{parse_input_bits, run_trial_observed, SpikeRaster};
use actin_machine::gates::{
    self, FrequencyTable, GateCensus, SweepAxis, SweepRow, DELTA_GRID, THETA_GRID,
};
use actin_machine::logic::{dnf_csv, dnf_lines, minimize, tables_from_g, TruthTable};
use actin_machine::machine::{
    global_graph, per_input_dot, prune_max, richness, run_input_trials, sequences_csv,
    sequences_from_trials, snapshot_csv, snapshot_function, MachineConfig,
};
use actin_machine::{Electrode, Error, Trial};

use crate::error::{CliError, CliResult};
use crate::manifest::{Axis, RunManifest};

/// Output files in write order, as (relative path, contents).
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(path))
            .map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| CliError::Write {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(&path, bytes).map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

fn with_comment(comment: &str, body: &str) -> String {
    format!("# {comment}\n{body}")
}

fn traces_csv(comment: &str, electrodes: &[Electrode], columns: &[Vec<u32>]) -> String {
    let mut s = format!("# {comment}\nt");
    for e in electrodes {
        let _ = write!(s, ",e{}", e.id);
    }
    s.push('\n');
    let steps = columns.first().map_or(0, Vec::len);
    for t in 0..steps {
        let _ = write!(s, "{}", t + 1);
        for c in columns {
            let _ = write!(s, ",{}", c[t]);
        }
        s.push('\n');
    }
    s
}

/// One trial with snapshot rasters and per-electrode traces.
pub fn cmd_simulate(m: &RunManifest) -> CliResult<Outputs> {
    m.validate()?;
    let matrix = m.load_network()?;
    let electrodes = m.load_electrodes()?;
    let params = m.params.automaton();
    let rec = m.params.recording();
    let opts = &m.simulate;
    let bits = parse_input_bits(&opts.input, electrodes.len())
        .map_err(|e| CliError::usage("simulate.input", e.to_string()))?;
    let dims = matrix.dims();
    let z = opts.slice.unwrap_or(dims.nz / 2);
    if z >= dims.nz {
        return Err(CliError::usage(
            "simulate.slice",
            format!("slice {z} outside 0..{}", dims.nz),
        ));
    }
    if let Some(&bad) = opts.snapshot_steps.iter().find(|&&t| t == 0 || t > rec.steps) {
        return Err(CliError::usage(
            "simulate.snapshot_steps",
            format!("step {bad} outside 1..={}", rec.steps),
        ));
    }

    let prov = m.hash_comment();
    let mut rasters = BTreeMap::new();
    let trial = run_trial_observed(&matrix, &params, &rec, &electrodes, &bits, |f| {
        let t = f.time() as usize;
        if opts.snapshot_steps.contains(&t) {
            rasters.insert(t, f.snapshot_slice(z).expect("slice checked above"));
        }
    })?;

    let mut out = Outputs::default();
    out.add("manifest.json", m.to_json());
    for (t, r) in &rasters {
        out.add(format!("snapshot_t{t}.pgm"), r.to_pgm(Some(&prov)));
        if opts.ppm {
            out.add(format!("snapshot_t{t}.ppm"), r.to_ppm(Some(&prov)));
        }
    }
    out.add("potentials.csv", traces_csv(&prov, &electrodes, &trial.potentials));
    let spikes: Vec<Vec<u32>> = trial
        .spikes
        .iter()
        .map(|s| s.iter().map(|&b| b as u32).collect())
        .collect();
    out.add("spikes.csv", traces_csv(&prov, &electrodes, &spikes));
    Ok(out)
}

struct GateSetup {
    in_x: Electrode,
    in_y: Electrode,
    outputs: Vec<Electrode>,
}

fn gate_setup(m: &RunManifest, electrodes: &[Electrode]) -> CliResult<GateSetup> {
    let find = |id: u32, field: &str| {
        electrodes
            .iter()
            .find(|e| e.id == id)
            .copied()
            .ok_or_else(|| CliError::usage(field, format!("no electrode with id {id}")))
    };
    let in_x = find(m.gates.in_x, "gates.in_x")?;
    let in_y = find(m.gates.in_y, "gates.in_y")?;
    if in_x.id == in_y.id {
        return Err(CliError::usage("gates.in_y", "inputs x and y must differ"));
    }
    let outputs = electrodes
        .iter()
        .filter(|e| e.id != in_x.id && e.id != in_y.id)
        .copied()
        .collect::<Vec<_>>();
    if outputs.is_empty() {
        return Err(CliError::usage("electrodes", "need at least one output electrode"));
    }
    Ok(GateSetup { in_x, in_y, outputs })
}

fn axis_of(a: Axis) -> SweepAxis {
    match a {
        Axis::Theta => SweepAxis::Theta,
        Axis::Delta => SweepAxis::Delta,
    }
}

fn gate_map_csv(comment: &str, census: &GateCensus) -> String {
    let mut s = format!("# {comment}\nelectrode");
    let steps = census.map.first().map_or(0, Vec::len);
    for t in 1..=steps {
        let _ = write!(s, ",{t}");
    }
    s.push('\n');
    for (id, row) in census.outputs.iter().zip(&census.map) {
        let _ = write!(s, "{id}");
        for g in row {
            let _ = write!(s, ",{g}");
        }
        s.push('\n');
    }
    s
}

/// Gate census for one parameter set.
pub fn cmd_mine_gates(m: &RunManifest) -> CliResult<Outputs> {
    m.validate()?;
    let matrix = m.load_network()?;
    let electrodes = m.load_electrodes()?;
    let setup = gate_setup(m, &electrodes)?;
    let params = m.params.automaton();
    let census = gates::mine(
        &matrix,
        &params,
        &m.params.recording(),
        &setup.in_x,
        &setup.in_y,
        &setup.outputs,
        m.gates.dedupe_per_electrode,
    )?;
    let axis = axis_of(m.gates.axis);
    let table = FrequencyTable {
        axis,
        rows: vec![SweepRow {
            param: match axis {
                SweepAxis::Theta => params.theta,
                SweepAxis::Delta => params.delta,
            },
            counts: census.totals(),
            nu: census.nu(),
        }],
    };
    let prov = m.hash_comment();
    let mut out = Outputs::default();
    out.add("manifest.json", m.to_json());
    out.add("gates.csv", table.to_csv(Some(&prov)));
    out.add("gates_per_electrode.csv", with_comment(&prov, &census.per_electrode_csv()));
    out.add("gate_map.csv", gate_map_csv(&prov, &census));
    Ok(out)
}

/// Gate frequencies over a grid of θ or δ values.
pub fn cmd_sweep(m: &RunManifest) -> CliResult<Outputs> {
    m.validate()?;
    let matrix = m.load_network()?;
    let electrodes = m.load_electrodes()?;
    let setup = gate_setup(m, &electrodes)?;
    let base = m.params.automaton();
    let rec = m.params.recording();
    let dedupe = m.gates.dedupe_per_electrode;
    let (name, table) = match m.gates.axis {
        Axis::Theta => {
            let grid = m.gates.grid.clone().unwrap_or_else(|| THETA_GRID.to_vec());
            let t = gates::sweep_theta(&matrix, &grid, base, &rec, &setup.in_x, &setup.in_y, &setup.outputs, dedupe)?;
            ("sweep_theta.csv", t)
        }
        Axis::Delta => {
            let grid = m.gates.grid.clone().unwrap_or_else(|| DELTA_GRID.to_vec());
            let t = gates::sweep_delta(&matrix, &grid, base, &rec, &setup.in_x, &setup.in_y, &setup.outputs, dedupe)?;
            ("sweep_delta.csv", t)
        }
    };
    let mut out = Outputs::default();
    out.add("manifest.json", m.to_json());
    out.add(name, table.to_csv(Some(&m.hash_comment())));
    Ok(out)
}

/// Full state-machine pipeline: sequences, graphs, richness, g(t) and DNFs.
pub fn cmd_machine(m: &RunManifest) -> CliResult<Outputs> {
    m.validate()?;
    let matrix = m.load_network()?;
    let cfg = MachineConfig {
        electrodes: m.load_electrodes()?,
        params: m.params.automaton(),
        rec: m.params.recording(),
    };
    cfg.validate()
        .map_err(|e| CliError::usage("electrodes", e.to_string()))?;
    let k = cfg.k();
    let trials: Vec<Trial> = run_input_trials(&cfg, &matrix)?;
    let seqs = sequences_from_trials(&trials, cfg.rec.steps);

    let prov = m.hash_comment();
    let p = Some(prov.as_str());
    let mut out = Outputs::default();
    out.add("manifest.json", m.to_json());
    let simulated: Vec<_> = seqs.iter().filter(|s| s.input != 0).cloned().collect();
    out.add("sequences.csv", sequences_csv(&simulated, p));
    for (idx, e) in cfg.electrodes.iter().enumerate() {
        let raster = SpikeRaster::from_trials(&trials, idx, e.id);
        out.add(format!("spikes_e{}.csv", e.id), raster.to_csv(p));
    }

    let g = global_graph(&seqs);
    let pruned = prune_max(&g);
    out.add("global.dot", g.to_dot(p));
    out.add("pruned.dot", pruned.to_dot(&g, p));
    out.add("pruned_summary.txt", pruned.summary(p));
    for s in &simulated {
        out.add(format!("per_input/input_{}.dot", s.input), per_input_dot(s, p));
    }

    let rich = richness(&seqs);
    out.add("richness.csv", rich.to_csv(p));
    out.add("nodes_per_input.csv", rich.nodes_per_input_csv(p));
    out.add("inputs_per_node.csv", rich.inputs_per_node_csv(p));

    let moment = m.machine.g_at.or_else(|| rich.richest_moment());
    // A run without any response has no moment to export.
    if let Some(t) = moment {
        let gmap = snapshot_function(&seqs, &rich, t, k)
            .map_err(|e| CliError::usage("machine.g_at", e.to_string()))?;
        out.add(format!("g_t{t}.csv"), snapshot_csv(&gmap, p));
        let dnfs: Vec<_> = tables_from_g(&gmap, k)?.iter().map(minimize).collect();
        out.add(format!("dnf_t{t}.txt"), with_comment(&prov, &dnf_lines(&dnfs)));
        out.add(format!("dnf_t{t}.csv"), dnf_csv(&dnfs, p));
    }
    Ok(out)
}

fn read_g_csv(path: &Path) -> CliResult<BTreeMap<u32, u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::usage("minimize.g_csv", format!("cannot read {}: {e}", path.display()))
    })?;
    let mut g = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "input,state" {
            continue;
        }
        let bad = || CliError::usage("minimize.g_csv", format!("line {}: expected `input,state`", n + 1));
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        g.insert(a, b);
    }
    Ok(g)
}

/// Minimal DNFs for either a `g` CSV (one function per electrode) or a
/// single truth-table bitstring.
pub fn cmd_minimize(m: &RunManifest) -> CliResult<Outputs> {
    let o = &m.minimize;
    let tables: Vec<TruthTable> = match (&o.g_csv, &o.table) {
        (Some(path), None) => {
            let k = o
                .arity
                .ok_or_else(|| CliError::usage("minimize.arity", "required with a g CSV"))?;
            let g = read_g_csv(path)?;
            tables_from_g(&g, k).map_err(|e| match e {
                Error::MissingEntry(v) => CliError::usage("minimize.g_csv", format!("no row for input {v}")),
                other => CliError::usage("minimize.arity", other.to_string()),
            })?
        }
        (None, Some(bits)) => {
            let t = TruthTable::from_bitstring(bits)
                .map_err(|e| CliError::usage("minimize.table", e.to_string()))?;
            if let Some(k) = o.arity {
                if k != t.arity() {
                    return Err(CliError::usage(
                        "minimize.arity",
                        format!("table has arity {}, not {k}", t.arity()),
                    ));
                }
            }
            vec![t]
        }
        _ => {
            return Err(CliError::usage(
                "minimize",
                "give exactly one of a g CSV or a truth table",
            ))
        }
    };
    let dnfs: Vec<_> = tables.iter().map(minimize).collect();
    let prov = m.hash_comment();
    let mut out = Outputs::default();
    out.add("dnf.txt", with_comment(&prov, &dnf_lines(&dnfs)));
    out.add("dnf.csv", dnf_csv(&dnfs, Some(&prov)));
    Ok(out)
}
