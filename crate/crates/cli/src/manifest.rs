//! Serializable description of one run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use actin_machine::electrodes::{self, load_electrodes, parse_electrodes};
use actin_machine::fixtures;
use actin_machine::grid::{
    generate_synthetic, load_image_stack, load_raw_matrix, Placement, RgbThreshold, SyntheticNetworkSpec,
};
use actin_machine::{AutomatonParams, ConductiveMatrix, Dims, Electrode, RecordingParams, SpikeDetector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    /// Directory of numbered PNG or TIFF slices.
    ImageStack { dir: PathBuf, rgb_threshold: [u8; 3] },
    Raw { path: PathBuf },
    Synthetic {
        dims: [usize; 3],
        segments: usize,
        bundle_radius: usize,
        seed: u64,
        /// Nearest predecessors linked per new point; 0 joins uniform random endpoints.
        neighbors: usize,
    },
    /// The seeded synthetic network shipped with the library.
    #[default]
    Bundled,
}


#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Level,
    RisingEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub radius: u32,
    pub theta: u32,
    pub delta: u32,
    /// Overrides every electrode radius when set.
    pub electrode_radius: Option<u32>,
    pub spike_threshold: u32,
    pub steps: usize,
    pub detector: Detector,
}

impl Default for Params {
    fn default() -> Self {
        let a = AutomatonParams::default();
        let r = RecordingParams::default();
        Params {
            radius: a.radius,
            theta: a.theta,
            delta: a.delta,
            electrode_radius: None,
            spike_threshold: r.spike_threshold,
            steps: r.steps,
            detector: Detector::Level,
        }
    }
}

impl Params {
    pub fn automaton(&self) -> AutomatonParams {
        AutomatonParams {
            radius: self.radius,
            theta: self.theta,
            delta: self.delta,
        }
    }

    pub fn recording(&self) -> RecordingParams {
        RecordingParams {
            spike_threshold: self.spike_threshold,
            steps: self.steps,
            detector: match self.detector {
                Detector::Level => SpikeDetector::Level,
                Detector::RisingEdge => SpikeDetector::RisingEdge,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    /// Binary string, `0b` literal or decimal value.
    pub input: String,
    pub snapshot_steps: Vec<usize>,
    /// z index of the rendered slice; the middle slice when unset.
    pub slice: Option<usize>,
    pub ppm: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            input: "1".into(),
            snapshot_steps: vec![13, 50, 200, 500],
            slice: None,
            ppm: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Theta,
    Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateOptions {
    /// Electrode ids of the two inputs; every other electrode is an output.
    pub in_x: u32,
    pub in_y: u32,
    pub dedupe_per_electrode: bool,
    pub axis: Axis,
    /// Sweep values; the standard grid of the axis when unset.
    pub grid: Option<Vec<u32>>,
}

impl Default for GateOptions {
    fn default() -> Self {
        GateOptions {
            in_x: 0,
            in_y: 1,
            dedupe_per_electrode: false,
            axis: Axis::Theta,
            grid: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineOptions {
    /// Response moment for the exported state function; the richest moment when unset.
    pub g_at: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    /// `input,state` CSV as written by `machine`.
    pub g_csv: Option<PathBuf>,
    pub arity: Option<usize>,
    /// Truth table as a bitstring, input 0 first.
    pub table: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub network: NetworkSource,
    pub params: Params,
    /// Path of an electrode file, or `bundled:gates`, `bundled:machine`, `bundled:fixture`.
    pub electrodes: String,
    pub output_dir: PathBuf,
    pub simulate: SimulateOptions,
    pub gates: GateOptions,
    pub machine: MachineOptions,
    pub minimize: MinimizeOptions,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            network: NetworkSource::Bundled,
            params: Params::default(),
            electrodes: "bundled:fixture".into(),
            output_dir: PathBuf::from("out"),
            simulate: SimulateOptions::default(),
            gates: GateOptions::default(),
            machine: MachineOptions::default(),
            minimize: MinimizeOptions::default(),
        }
    }
}

pub const FIXTURE_ELECTRODES: usize = 6;

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage("manifest", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::usage("manifest", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// SHA-256 of the canonical JSON form with the output directory blanked,
    /// so moving the outputs elsewhere keeps the hash.
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.output_dir = PathBuf::new();
        let json = serde_json::to_string(&m).expect("manifest serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn hash_comment(&self) -> String {
        format!("manifest-hash: {}", self.hash())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params
            .automaton()
            .validate()
            .and_then(|_| self.params.recording().validate())
            .map_err(|e| CliError::usage("params", e.to_string()))?;
        if self.params.electrode_radius == Some(0) {
            return Err(CliError::usage("params.electrode_radius", "must be at least 1"));
        }
        if self.electrodes.trim().is_empty() {
            return Err(CliError::usage("electrodes", "no electrode source given"));
        }
        Ok(())
    }

    pub fn load_network(&self) -> CliResult<Arc<ConductiveMatrix>> {
        let m = match &self.network {
            NetworkSource::ImageStack { dir, rgb_threshold } => {
                if !dir.is_dir() {
                    return Err(CliError::usage(
                        "network.dir",
                        format!("image stack directory {} does not exist", dir.display()),
                    ));
                }
                let [r, g, b] = *rgb_threshold;
                load_image_stack(dir, RgbThreshold { r_min: r, g_min: g, b_min: b })?
            }
            NetworkSource::Raw { path } => {
                if !path.is_file() {
                    return Err(CliError::usage(
                        "network.path",
                        format!("raw matrix {} does not exist", path.display()),
                    ));
                }
                load_raw_matrix(path)?
            }
            NetworkSource::Synthetic {
                dims,
                segments,
                bundle_radius,
                seed,
                neighbors,
            } => {
                let dims = Dims::new(dims[0], dims[1], dims[2])
                    .map_err(|e| CliError::usage("network.dims", e.to_string()))?;
                let placement = match neighbors {
                    0 => Placement::UniformEndpoints,
                    &n => Placement::NearestNeighbor { neighbors: n },
                };
                generate_synthetic(&SyntheticNetworkSpec {
                    dims,
                    segment_count: *segments,
                    bundle_radius: *bundle_radius,
                    seed: *seed,
                    placement,
                })
                .map_err(|e| CliError::usage("network", e.to_string()))?
            }
            NetworkSource::Bundled => fixtures::bundled_network(),
        };
        Ok(Arc::new(m))
    }

    pub fn load_electrodes(&self) -> CliResult<Vec<Electrode>> {
        let mut es = match self.electrodes.as_str() {
            "bundled:gates" => parse_electrodes(electrodes::GATE_LAYOUT)?,
            "bundled:machine" => parse_electrodes(electrodes::MACHINE_LAYOUT)?,
            "bundled:fixture" => fixtures::bundled_electrodes(FIXTURE_ELECTRODES),
            other if other.starts_with("bundled:") => {
                return Err(CliError::usage("electrodes", format!("unknown bundled layout {other:?}")));
            }
            path => {
                let path = Path::new(path);
                if !path.is_file() {
                    return Err(CliError::usage(
                        "electrodes",
                        format!("electrode file {} not found", path.display()),
                    ));
                }
                load_electrodes(path)?
            }
        };
        if let Some(r) = self.params.electrode_radius {
            for e in &mut es {
                e.radius = r;
            }
        }
        if es.is_empty() {
            return Err(CliError::usage("electrodes", "electrode list is empty"));
        }
        Ok(es)
    }
}
