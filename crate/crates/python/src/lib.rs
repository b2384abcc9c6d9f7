//! Python bindings: networks, the automaton, electrodes, gate mining, the
//! state-machine pipeline and DNF minimisation.

use std::path::PathBuf;
use std::sync::Arc;

use actin_machine::automaton::{AutomatonField, AutomatonParams, VoxelState};
use actin_machine::electrodes::{self, bits_from_value, RecordingParams, SpikeDetector};
use actin_machine::gates::{self, classify, GateQuad};
use actin_machine::grid::{self, Placement, RawEncoding, RgbThreshold, SyntheticNetworkSpec};
use actin_machine::logic::{self, TruthTable};
use actin_machine::machine::{self, MachineConfig, StateSequence};
use actin_machine::{fixtures, ConductiveMatrix, Dims, Electrode, Voxel};
use pyo3::exceptions::{PyIndexError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: actin_machine::Error) -> PyErr {
    match e {
        actin_machine::Error::Io { .. } | actin_machine::Error::Image { .. } => PyIOError::new_err(e.to_string()),
        actin_machine::Error::OutOfBounds { .. } => PyIndexError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn voxel(v: (usize, usize, usize)) -> Voxel {
    Voxel::new(v.0, v.1, v.2)
}

/// Binary voxel grid of conductive sites.
#[pyclass(name = "Network", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: Arc<ConductiveMatrix>,
}

impl PyNetwork {
    fn wrap(m: ConductiveMatrix) -> Self {
        PyNetwork { inner: Arc::new(m) }
    }
}

#[pymethods]
impl PyNetwork {
    /// Network from a flat occupancy list, x fastest then y then z.
    #[new]
    fn new(dims: (usize, usize, usize), occupancy: Vec<bool>) -> PyResult<Self> {
        let d = Dims::new(dims.0, dims.1, dims.2).map_err(py_err)?;
        ConductiveMatrix::from_occupancy(d, occupancy).map(Self::wrap).map_err(py_err)
    }

    #[staticmethod]
    fn bundled() -> Self {
        Self::wrap(fixtures::bundled_network())
    }

    #[staticmethod]
    #[pyo3(signature = (dims, segments, bundle_radius, seed, neighbors=2))]
    fn synthetic(
        dims: (usize, usize, usize),
        segments: usize,
        bundle_radius: usize,
        seed: u64,
        neighbors: usize,
    ) -> PyResult<Self> {
        let spec = SyntheticNetworkSpec {
            dims: Dims::new(dims.0, dims.1, dims.2).map_err(py_err)?,
            segment_count: segments,
            bundle_radius,
            seed,
            placement: match neighbors {
                0 => Placement::UniformEndpoints,
                n => Placement::NearestNeighbor { neighbors: n },
            },
        };
        grid::generate_synthetic(&spec).map(Self::wrap).map_err(py_err)
    }

    #[staticmethod]
    fn tube(length: usize, radius: usize) -> Self {
        Self::wrap(fixtures::straight_tube(length, radius))
    }

    #[staticmethod]
    fn ring(major: usize, minor: usize) -> Self {
        Self::wrap(fixtures::ring(major, minor))
    }

    #[staticmethod]
    fn load_raw(path: PathBuf) -> PyResult<Self> {
        grid::load_raw_matrix(&path).map(Self::wrap).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (dir, threshold=(40, 19, 19)))]
    fn load_image_stack(dir: PathBuf, threshold: (u8, u8, u8)) -> PyResult<Self> {
        let th = RgbThreshold {
            r_min: threshold.0,
            g_min: threshold.1,
            b_min: threshold.2,
        };
        grid::load_image_stack(&dir, th).map(Self::wrap).map_err(py_err)
    }

    #[pyo3(signature = (path, packed=false))]
    fn save_raw(&self, path: PathBuf, packed: bool) -> PyResult<()> {
        let enc = if packed { RawEncoding::Packed } else { RawEncoding::Byte };
        grid::save_raw_matrix(&self.inner, &path, enc).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let d = self.inner.dims();
        (d.nx, d.ny, d.nz)
    }

    fn conductive_count(&self) -> usize {
        self.inner.conductive_count()
    }

    fn is_conductive(&self, i: i64, j: i64, z: i64) -> bool {
        self.inner.get(i, j, z)
    }

    fn __repr__(&self) -> String {
        let d = self.inner.dims();
        format!(
            "Network({}x{}x{}, {} conductive)",
            d.nx,
            d.ny,
            d.nz,
            self.inner.conductive_count()
        )
    }
}

#[pyclass(name = "Params", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyParams {
    #[pyo3(get)]
    radius: u32,
    #[pyo3(get)]
    theta: u32,
    #[pyo3(get)]
    delta: u32,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (radius=3, theta=7, delta=20))]
    fn new(radius: u32, theta: u32, delta: u32) -> PyResult<Self> {
        let p = AutomatonParams { radius, theta, delta };
        p.validate().map_err(py_err)?;
        Ok(PyParams { radius, theta, delta })
    }

    fn __repr__(&self) -> String {
        format!("Params(radius={}, theta={}, delta={})", self.radius, self.theta, self.delta)
    }
}

impl PyParams {
    fn get(&self) -> AutomatonParams {
        AutomatonParams {
            radius: self.radius,
            theta: self.theta,
            delta: self.delta,
        }
    }
}

fn default_params() -> PyParams {
    PyParams {
        radius: 3,
        theta: 7,
        delta: 20,
    }
}

/// Evolving automaton state on a network.
#[pyclass(name = "Field")]
struct PyField {
    inner: AutomatonField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(network: &PyNetwork) -> PyResult<Self> {
        AutomatonField::new(network.inner.clone())
            .map(|inner| PyField { inner })
            .map_err(py_err)
    }

    /// Excites conductive voxels strictly within `radius` of `center`.
    fn excite(&mut self, center: (usize, usize, usize), radius: u32) -> PyResult<usize> {
        self.inner.excite_ball(voxel(center), radius).map_err(py_err)
    }

    /// Sets one voxel to "resting", "excited" or "refractory".
    #[pyo3(signature = (v, state, countdown=0))]
    fn set(&mut self, v: (usize, usize, usize), state: &str, countdown: u16) -> PyResult<()> {
        let s = match state {
            "resting" => VoxelState::Resting,
            "excited" => VoxelState::Excited,
            "refractory" => VoxelState::Refractory,
            other => return Err(PyValueError::new_err(format!("unknown state {other:?}"))),
        };
        self.inner.set_voxel(voxel(v), s, countdown).map_err(py_err)
    }

    #[pyo3(signature = (params=None, steps=1))]
    fn step(&mut self, py: Python<'_>, params: Option<PyParams>, steps: usize) {
        let p = params.unwrap_or_else(default_params).get();
        let inner = &mut self.inner;
        py.detach(|| {
            for _ in 0..steps {
                inner.step(&p);
            }
        });
    }

    fn state(&self, v: (usize, usize, usize)) -> &'static str {
        match self.inner.state(voxel(v)) {
            VoxelState::Resting => "resting",
            VoxelState::Excited => "excited",
            VoxelState::Refractory => "refractory",
        }
    }

    /// Per-voxel states as bytes: 0 resting, 1 excited, 2 refractory.
    fn states<'py>(&self, py: Python<'py>) -> Bound<'py, pyo3::types::PyBytes> {
        let raw: Vec<u8> = self.inner.states().iter().map(|&s| s as u8).collect();
        pyo3::types::PyBytes::new(py, &raw)
    }

    #[getter]
    fn time(&self) -> u64 {
        self.inner.time()
    }

    fn excited_count(&self) -> usize {
        self.inner.excited_count()
    }

    fn refractory_count(&self) -> usize {
        self.inner.refractory_count()
    }

    fn potential(&self, electrode: &PyElectrode) -> u32 {
        electrodes::potential(&self.inner, &electrode.inner)
    }

    /// PGM image of slice `z`.
    fn slice_pgm<'py>(&self, py: Python<'py>, z: usize) -> PyResult<Bound<'py, pyo3::types::PyBytes>> {
        let r = self.inner.snapshot_slice(z).map_err(py_err)?;
        Ok(pyo3::types::PyBytes::new(py, &r.to_pgm(None)))
    }
}

#[pyclass(name = "Electrode", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyElectrode {
    inner: Electrode,
}

#[pymethods]
impl PyElectrode {
    #[new]
    #[pyo3(signature = (id, pos, radius=electrodes::DEFAULT_ELECTRODE_RADIUS))]
    fn new(id: u32, pos: (usize, usize, usize), radius: u32) -> Self {
        PyElectrode {
            inner: Electrode::new(id, voxel(pos), radius),
        }
    }

    #[getter]
    fn id(&self) -> u32 {
        self.inner.id
    }

    #[getter]
    fn pos(&self) -> (usize, usize, usize) {
        (self.inner.pos.i, self.inner.pos.j, self.inner.pos.z)
    }

    #[getter]
    fn radius(&self) -> u32 {
        self.inner.radius
    }

    fn __repr__(&self) -> String {
        let p = self.inner.pos;
        format!("Electrode({}, ({}, {}, {}), radius={})", self.inner.id, p.i, p.j, p.z, self.inner.radius)
    }
}

fn unwrap_electrodes(es: &[PyElectrode]) -> Vec<Electrode> {
    es.iter().map(|e| e.inner).collect()
}

fn wrap_electrodes(es: Vec<Electrode>) -> Vec<PyElectrode> {
    es.into_iter().map(|inner| PyElectrode { inner }).collect()
}

/// Electrodes from a layout file, or `"gates"`, `"machine"`, `"fixture"`.
#[pyfunction]
fn load_electrodes(source: &str) -> PyResult<Vec<PyElectrode>> {
    let es = match source {
        "gates" => electrodes::parse_electrodes(electrodes::GATE_LAYOUT),
        "machine" => electrodes::parse_electrodes(electrodes::MACHINE_LAYOUT),
        "fixture" => Ok(fixtures::bundled_electrodes(6)),
        path => electrodes::load_electrodes(PathBuf::from(path).as_path()),
    };
    es.map(wrap_electrodes).map_err(py_err)
}

fn recording(steps: usize, spike_threshold: u32, rising_edge: bool) -> RecordingParams {
    RecordingParams {
        spike_threshold,
        steps,
        detector: if rising_edge {
            SpikeDetector::RisingEdge
        } else {
            SpikeDetector::Level
        },
    }
}

/// Result of one stimulation run.
#[pyclass(name = "Trial", frozen)]
struct PyTrial {
    #[pyo3(get)]
    input: u32,
    /// `potentials[e][t - 1]`.
    #[pyo3(get)]
    potentials: Vec<Vec<u32>>,
    #[pyo3(get)]
    spikes: Vec<Vec<bool>>,
    #[pyo3(get)]
    states: Vec<u32>,
}

/// Stimulates the electrodes selected by `input` (electrode 0 is the most
/// significant bit) and records `steps` steps.
#[pyfunction]
#[pyo3(signature = (network, electrodes, input, params=None, steps=1000, spike_threshold=1, rising_edge=false))]
fn run_trial(
    py: Python<'_>,
    network: &PyNetwork,
    electrodes: Vec<PyElectrode>,
    input: u32,
    params: Option<PyParams>,
    steps: usize,
    spike_threshold: u32,
    rising_edge: bool,
) -> PyResult<PyTrial> {
    let es = unwrap_electrodes(&electrodes);
    let p = params.unwrap_or_else(default_params).get();
    let rec = recording(steps, spike_threshold, rising_edge);
    let bits = bits_from_value(input, es.len());
    let m = network.inner.clone();
    let t = py
        .detach(|| electrodes::run_trial(&m, &p, &rec, &es, &bits))
        .map_err(py_err)?;
    Ok(PyTrial {
        input: t.input_value(),
        potentials: t.potentials,
        spikes: t.spikes,
        states: t.states,
    })
}

/// Gate name for the outputs on inputs (0,0), (0,1), (1,0), (1,1).
#[pyfunction]
fn classify_gate(z00: bool, z01: bool, z10: bool, z11: bool) -> String {
    classify(GateQuad::new(z00, z01, z10, z11)).to_string()
}

/// Gate counts per output electrode, keyed by electrode id.
#[pyfunction]
#[pyo3(signature = (network, in_x, in_y, outputs, params=None, steps=1000, dedupe_per_electrode=false))]
fn mine_gates(
    py: Python<'_>,
    network: &PyNetwork,
    in_x: PyElectrode,
    in_y: PyElectrode,
    outputs: Vec<PyElectrode>,
    params: Option<PyParams>,
    steps: usize,
    dedupe_per_electrode: bool,
) -> PyResult<Vec<(u32, Vec<(String, u64)>)>> {
    let p = params.unwrap_or_else(default_params).get();
    let rec = recording(steps, 1, false);
    let outs = unwrap_electrodes(&outputs);
    let m = network.inner.clone();
    let census = py
        .detach(|| gates::mine(&m, &p, &rec, &in_x.inner, &in_y.inner, &outs, dedupe_per_electrode))
        .map_err(py_err)?;
    Ok(census
        .outputs
        .iter()
        .zip(&census.counts)
        .map(|(id, c)| {
            let named = gates::GateType::COUNTED
                .iter()
                .zip(c)
                .map(|(g, n)| (g.to_string(), *n))
                .collect();
            (*id, named)
        })
        .collect())
}

/// Analysis of the state machine induced by a set of electrodes.
#[pyclass(name = "Machine", frozen)]
struct PyMachine {
    k: usize,
    seqs: Vec<StateSequence>,
    graph: machine::TransitionGraph,
    pruned: machine::PrunedGraph,
    rich: machine::Richness,
}

#[pymethods]
impl PyMachine {
    #[new]
    #[pyo3(signature = (network, electrodes, params=None, steps=1000))]
    fn new(
        py: Python<'_>,
        network: &PyNetwork,
        electrodes: Vec<PyElectrode>,
        params: Option<PyParams>,
        steps: usize,
    ) -> PyResult<Self> {
        let cfg = MachineConfig {
            electrodes: unwrap_electrodes(&electrodes),
            params: params.unwrap_or_else(default_params).get(),
            rec: recording(steps, 1, false),
        };
        let m = network.inner.clone();
        let seqs = py.detach(|| machine::run_all_inputs(&cfg, &m)).map_err(py_err)?;
        let graph = machine::global_graph(&seqs);
        let pruned = machine::prune_max(&graph);
        let rich = machine::richness(&seqs);
        Ok(PyMachine {
            k: cfg.k(),
            seqs,
            graph,
            pruned,
            rich,
        })
    }

    /// State sequence of input `value`, steps 1..T.
    fn sequence(&self, value: u32) -> PyResult<Vec<u32>> {
        self.seqs
            .iter()
            .find(|s| s.input == value)
            .map(|s| s.states.clone())
            .ok_or_else(|| PyIndexError::new_err(format!("no input {value}")))
    }

    /// Global graph edges as (from, to, count, weight).
    fn edges(&self) -> Vec<(u32, u32, u64, f64)> {
        self.graph.edges().map(|e| (e.from, e.to, e.count, e.weight)).collect()
    }

    /// Kept successor of each node after max-weight pruning.
    fn pruned(&self) -> Vec<(u32, u32)> {
        self.pruned.successor.iter().map(|(&a, &b)| (a, b)).collect()
    }

    fn fixed_points(&self) -> Vec<u32> {
        self.pruned.fixed_points()
    }

    fn garden_of_eden(&self) -> Vec<u32> {
        self.pruned.garden_of_eden()
    }

    fn global_dot(&self) -> String {
        self.graph.to_dot(None)
    }

    fn pruned_dot(&self) -> String {
        self.pruned.to_dot(&self.graph, None)
    }

    /// Richness rows as (moment, step, states).
    fn richness(&self) -> Vec<(usize, usize, Vec<u32>)> {
        self.rich
            .rows
            .iter()
            .map(|r| (r.moment, r.step, r.states.iter().copied().collect()))
            .collect()
    }

    fn richest_moment(&self) -> Option<usize> {
        self.rich.richest_moment()
    }

    /// State reached by every input at response moment `moment`.
    fn g(&self, moment: usize) -> PyResult<Vec<(u32, u32)>> {
        machine::snapshot_function(&self.seqs, &self.rich, moment, self.k)
            .map(|g| g.into_iter().collect())
            .map_err(py_err)
    }

    /// Minimal DNF of each electrode's bit of g at `moment`.
    fn dnfs(&self, moment: usize) -> PyResult<Vec<String>> {
        let g = machine::snapshot_function(&self.seqs, &self.rich, moment, self.k).map_err(py_err)?;
        let tables = logic::tables_from_g(&g, self.k).map_err(py_err)?;
        Ok(tables.iter().map(|t| logic::minimize(t).to_string()).collect())
    }
}

/// Minimal DNF of a truth table given as a bitstring, input 0 first.
#[pyfunction]
fn minimize(table: &str) -> PyResult<String> {
    let t = TruthTable::from_bitstring(table).map_err(py_err)?;
    Ok(logic::minimize(&t).to_string())
}

#[pymodule]
fn actin_droplet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyElectrode>()?;
    m.add_class::<PyTrial>()?;
    m.add_class::<PyMachine>()?;
    m.add_function(wrap_pyfunction!(load_electrodes, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(classify_gate, m)?)?;
    m.add_function(wrap_pyfunction!(mine_gates, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    Ok(())
}
