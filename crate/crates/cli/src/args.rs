//! Command-line flags. Every flag overrides the matching manifest field.

use std::path::PathBuf;

use actin_machine::grid::RgbThreshold;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::manifest::{Axis, Detector, NetworkSource, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "adm", version, about = "Actin droplet machine simulator and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trial and write snapshot slices plus electrode traces.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Input string: binary digits, 0b literal or decimal.
        #[arg(long)]
        input: Option<String>,
        /// Comma-separated steps to render.
        #[arg(long, value_delimiter = ',')]
        snapshot_steps: Option<Vec<usize>>,
        #[arg(long)]
        slice: Option<usize>,
        /// Also write colour PPM slices.
        #[arg(long)]
        ppm: bool,
    },
    /// Count logical gates for one parameter set.
    MineGates {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        gates: GateArgs,
    },
    /// Gate frequencies over a θ or δ grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        gates: GateArgs,
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u32>>,
    },
    /// Run all inputs and analyse the induced state machine.
    Machine {
        #[command(flatten)]
        common: CommonArgs,
        /// Response moment for g(t) and the DNFs.
        #[arg(long)]
        g_at: Option<usize>,
    },
    /// Minimise Boolean functions to DNF.
    Minimize {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// `input,state` CSV as written by `machine`.
        #[arg(long)]
        g_csv: Option<PathBuf>,
        #[arg(long)]
        arity: Option<usize>,
        /// Truth table bitstring, input 0 first.
        #[arg(long)]
        table: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    Theta,
    Delta,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DetectorArg {
    Level,
    RisingEdge,
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON manifest; flags given alongside it take precedence.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    /// Directory of numbered PNG/TIFF slices.
    #[arg(long, group = "net")]
    pub image_stack: Option<PathBuf>,
    /// Strict per-channel minimum, as R,G,B.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub rgb_threshold: Option<Vec<u8>>,
    /// Voxel matrix in the raw format.
    #[arg(long, group = "net")]
    pub raw: Option<PathBuf>,
    /// Generate a synthetic network from this seed.
    #[arg(long, group = "net")]
    pub synthetic_seed: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "96,96,16")]
    pub synthetic_dims: Vec<usize>,
    #[arg(long, default_value_t = 24)]
    pub synthetic_segments: usize,
    #[arg(long, default_value_t = 2)]
    pub synthetic_radius: usize,
    /// Nearest predecessors per new point; 0 for uniform endpoints.
    #[arg(long, default_value_t = 2)]
    pub synthetic_neighbors: usize,
    /// Use the bundled synthetic network.
    #[arg(long, group = "net")]
    pub bundled: bool,

    #[arg(long)]
    pub radius: Option<u32>,
    #[arg(long)]
    pub theta: Option<u32>,
    #[arg(long)]
    pub delta: Option<u32>,
    #[arg(long)]
    pub electrode_radius: Option<u32>,
    #[arg(long)]
    pub spike_threshold: Option<u32>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub detector: Option<DetectorArg>,

    /// Electrode file or bundled:gates|machine|fixture.
    #[arg(long)]
    pub electrodes: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct GateArgs {
    #[arg(long)]
    pub in_x: Option<u32>,
    #[arg(long)]
    pub in_y: Option<u32>,
    /// Count each gate type at most once per output electrode.
    #[arg(long)]
    pub dedupe_per_electrode: bool,
}

fn base(manifest: &Option<PathBuf>) -> CliResult<RunManifest> {
    match manifest {
        Some(p) => RunManifest::load(p),
        None => Ok(RunManifest::default()),
    }
}

impl CommonArgs {
    fn apply(&self, m: &mut RunManifest) -> CliResult<()> {
        if let Some(o) = &self.out {
            m.output_dir = o.clone();
        }
        if let Some(dir) = &self.image_stack {
            let d = RgbThreshold::default();
            let t = self.rgb_threshold.clone().unwrap_or(vec![d.r_min, d.g_min, d.b_min]);
            m.network = NetworkSource::ImageStack {
                dir: dir.clone(),
                rgb_threshold: [t[0], t[1], t[2]],
            };
        } else if self.rgb_threshold.is_some() {
            match &mut m.network {
                NetworkSource::ImageStack { rgb_threshold, .. } => {
                    let t = self.rgb_threshold.as_ref().expect("checked");
                    *rgb_threshold = [t[0], t[1], t[2]];
                }
                _ => return Err(CliError::usage("rgb_threshold", "only applies to an image stack")),
            }
        }
        if let Some(p) = &self.raw {
            m.network = NetworkSource::Raw { path: p.clone() };
        }
        if let Some(seed) = self.synthetic_seed {
            let d = &self.synthetic_dims;
            m.network = NetworkSource::Synthetic {
                dims: [d[0], d[1], d[2]],
                segments: self.synthetic_segments,
                bundle_radius: self.synthetic_radius,
                seed,
                neighbors: self.synthetic_neighbors,
            };
        }
        if self.bundled {
            m.network = NetworkSource::Bundled;
        }
        let p = &mut m.params;
        if let Some(v) = self.radius {
            p.radius = v;
        }
        if let Some(v) = self.theta {
            p.theta = v;
        }
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = self.electrode_radius {
            p.electrode_radius = Some(v);
        }
        if let Some(v) = self.spike_threshold {
            p.spike_threshold = v;
        }
        if let Some(v) = self.steps {
            p.steps = v;
        }
        if let Some(d) = self.detector {
            p.detector = match d {
                DetectorArg::Level => Detector::Level,
                DetectorArg::RisingEdge => Detector::RisingEdge,
            };
        }
        if let Some(e) = &self.electrodes {
            m.electrodes = e.clone();
        }
        Ok(())
    }
}

impl GateArgs {
    fn apply(&self, m: &mut RunManifest) {
        if let Some(v) = self.in_x {
            m.gates.in_x = v;
        }
        if let Some(v) = self.in_y {
            m.gates.in_y = v;
        }
        if self.dedupe_per_electrode {
            m.gates.dedupe_per_electrode = true;
        }
    }
}

impl Command {
    /// Manifest after applying this command's flags on top of `--manifest`.
    pub fn manifest(&self) -> CliResult<RunManifest> {
        let m = match self {
            Command::Simulate {
                common,
                input,
                snapshot_steps,
                slice,
                ppm,
            } => {
                let mut m = base(&common.manifest)?;
                common.apply(&mut m)?;
                if let Some(v) = input {
                    m.simulate.input = v.clone();
                }
                if let Some(v) = snapshot_steps {
                    m.simulate.snapshot_steps = v.clone();
                }
                if slice.is_some() {
                    m.simulate.slice = *slice;
                }
                if *ppm {
                    m.simulate.ppm = true;
                }
                m
            }
            Command::MineGates { common, gates } => {
                let mut m = base(&common.manifest)?;
                common.apply(&mut m)?;
                gates.apply(&mut m);
                m
            }
            Command::Sweep {
                common,
                gates,
                axis,
                grid,
            } => {
                let mut m = base(&common.manifest)?;
                common.apply(&mut m)?;
                gates.apply(&mut m);
                if let Some(a) = axis {
                    m.gates.axis = match a {
                        AxisArg::Theta => Axis::Theta,
                        AxisArg::Delta => Axis::Delta,
                    };
                }
                if grid.is_some() {
                    m.gates.grid = grid.clone();
                }
                m
            }
            Command::Machine { common, g_at } => {
                let mut m = base(&common.manifest)?;
                common.apply(&mut m)?;
                if g_at.is_some() {
                    m.machine.g_at = *g_at;
                }
                m
            }
            Command::Minimize {
                manifest,
                out,
                g_csv,
                arity,
                table,
            } => {
                let mut m = base(manifest)?;
                if let Some(o) = out {
                    m.output_dir = o.clone();
                }
                if g_csv.is_some() {
                    m.minimize.g_csv = g_csv.clone();
                }
                if arity.is_some() {
                    m.minimize.arity = *arity;
                }
                if table.is_some() {
                    m.minimize.table = table.clone();
                }
                m
            }
        };
        Ok(m)
    }

    pub fn run(&self) -> CliResult<(RunManifest, crate::Outputs)> {
        let m = self.manifest()?;
        let out = match self {
            Command::Simulate { .. } => crate::cmd_simulate(&m)?,
            Command::MineGates { .. } => crate::cmd_mine_gates(&m)?,
            Command::Sweep { .. } => crate::cmd_sweep(&m)?,
            Command::Machine { .. } => crate::cmd_machine(&m)?,
            Command::Minimize { .. } => crate::cmd_minimize(&m)?,
        };
        Ok((m, out))
    }
}
