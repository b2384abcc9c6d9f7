//! Electrodes: stimulation and potential readout on an automaton field, spike
//! detection, and the per-trial recording loop.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::automaton::{open_ball_offsets, AutomatonField, AutomatonParams};
use crate::error::{Error, Result};
use crate::grid::{ConductiveMatrix, Dims, Voxel};

pub const DEFAULT_ELECTRODE_RADIUS: u32 = 4;

/// Ten-electrode layout used for gate mining on the reference network
/// (1024x1024x30). Electrodes 0 and 9 are the inputs.
pub const GATE_LAYOUT: &str = include_str!("../data/electrodes_gates.txt");

/// Eight-electrode layout on the reference network where every electrode is
/// both input and output.
pub const MACHINE_LAYOUT: &str = include_str!("../data/electrodes_machine.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Electrode {
    pub id: u32,
    pub pos: Voxel,
    pub radius: u32,
}

impl Electrode {
    pub fn new(id: u32, pos: Voxel, radius: u32) -> Self {
        Electrode { id, pos, radius }
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        dims.checked_voxel(self.pos.i as i64, self.pos.j as i64, self.pos.z as i64)?;
        if self.radius == 0 {
            return Err(Error::param("electrode radius", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parses an electrode layout: a `RADIUS <r_e>` header followed by one
/// `<id> <i> <j> <z>` line per electrode. Blank lines and `#` comments are
/// ignored.
pub fn parse_electrodes(text: &str) -> Result<Vec<Electrode>> {
    let mut radius = None;
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = body.split_ascii_whitespace().collect();
        if tokens[0].eq_ignore_ascii_case("RADIUS") {
            if radius.is_some() || !out.is_empty() {
                return Err(Error::format(start, "RADIUS must appear once, before any electrode"));
            }
            let r = tokens
                .get(1)
                .and_then(|t| t.parse::<u32>().ok())
                .filter(|&r| r >= 1 && tokens.len() == 2)
                .ok_or_else(|| Error::format(start, format!("bad radius line `{body}`")))?;
            radius = Some(r);
            continue;
        }
        let r = radius.ok_or_else(|| Error::format(start, "missing RADIUS header"))?;
        let nums: Option<Vec<u64>> = tokens.iter().map(|t| t.parse().ok()).collect();
        match nums.as_deref() {
            Some(&[id, i, j, z]) => out.push(Electrode::new(
                id as u32,
                Voxel::new(i as usize, j as usize, z as usize),
                r,
            )),
            _ => return Err(Error::format(start, format!("bad electrode line `{body}`"))),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("electrode layout lists no electrodes"));
    }
    Ok(out)
}

pub fn load_electrodes(path: &Path) -> Result<Vec<Electrode>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_electrodes(&text)
}

/// Renders a layout in the format accepted by [`parse_electrodes`]. All
/// electrodes must share one radius.
pub fn format_electrodes(electrodes: &[Electrode]) -> Result<String> {
    let r = electrodes
        .first()
        .ok_or(Error::EmptyInput("no electrodes"))?
        .radius;
    if electrodes.iter().any(|e| e.radius != r) {
        return Err(Error::Domain("electrodes have different radii".into()));
    }
    let mut s = format!("RADIUS {r}\n");
    for e in electrodes {
        let _ = writeln!(s, "{} {} {} {}", e.id, e.pos.i, e.pos.j, e.pos.z);
    }
    Ok(s)
}

/// Number of excited voxels strictly closer than `e.radius` to `e.pos`.
pub fn potential(field: &AutomatonField, e: &Electrode) -> u32 {
    potential_with(field, e, &open_ball_offsets(e.radius))
}

fn potential_with(field: &AutomatonField, e: &Electrode, ball: &[[i32; 3]]) -> u32 {
    let dims = field.dims();
    let states = field.states();
    ball.iter()
        .filter(|d| {
            let (i, j, z) = (
                e.pos.i as i64 + d[0] as i64,
                e.pos.j as i64 + d[1] as i64,
                e.pos.z as i64 + d[2] as i64,
            );
            dims.contains(i, j, z)
                && states[dims.index(Voxel::new(i as usize, j as usize, z as usize))]
                    == crate::automaton::VoxelState::Excited
        })
        .count() as u32
}

/// Excites the aperture of every electrode whose bit is set.
pub fn stimulate(field: &mut AutomatonField, electrodes: &[Electrode], bits: &[bool]) -> Result<()> {
    if bits.len() != electrodes.len() {
        return Err(Error::LengthMismatch {
            expected: electrodes.len(),
            actual: bits.len(),
        });
    }
    for (e, &b) in electrodes.iter().zip(bits) {
        if b {
            field.excite_ball(e.pos, e.radius)?;
        }
    }
    Ok(())
}

/// Bits of `value` as a `k`-bit string, most significant bit first, so bit 0
/// belongs to electrode 0.
pub fn bits_from_value(value: u32, k: usize) -> Vec<bool> {
    (0..k).map(|i| (value >> (k - 1 - i)) & 1 == 1).collect()
}

pub fn value_from_bits(bits: &[bool]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
}

/// Parses either a plain binary string (`"101"`) or a decimal value.
pub fn parse_input_bits(text: &str, k: usize) -> Result<Vec<bool>> {
    let t = text.trim();
    if let Some(bin) = t.strip_prefix("0b") {
        return parse_bitstring(bin, k);
    }
    if t.len() == k && t.chars().all(|c| c == '0' || c == '1') && k > 1 {
        return parse_bitstring(t, k);
    }
    let v: u32 = t
        .parse()
        .map_err(|_| Error::Domain(format!("input `{t}` is neither a bit string nor a number")))?;
    if k < 32 && v >> k != 0 {
        return Err(Error::Domain(format!("input {v} does not fit in {k} bits")));
    }
    Ok(bits_from_value(v, k))
}

fn parse_bitstring(s: &str, k: usize) -> Result<Vec<bool>> {
    if s.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: s.len(),
        });
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Domain(format!("`{c}` is not a bit"))),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SpikeDetector {
    /// Spike whenever the potential is at or above the threshold.
    #[default]
    Level,
    /// Spike only when the potential crosses the threshold from below.
    RisingEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RecordingParams {
    pub spike_threshold: u32,
    pub steps: usize,
    pub detector: SpikeDetector,
}

impl Default for RecordingParams {
    fn default() -> Self {
        RecordingParams {
            spike_threshold: 1,
            steps: 1000,
            detector: SpikeDetector::Level,
        }
    }
}

impl RecordingParams {
    pub fn validate(&self) -> Result<()> {
        if self.spike_threshold == 0 {
            return Err(Error::param("spike_threshold", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Everything recorded during one stimulation run. Column `t - 1` holds
/// step `t` for `t` in `1..=steps`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trial {
    pub input: Vec<bool>,
    /// `potentials[e][t - 1]`.
    pub potentials: Vec<Vec<u32>>,
    /// `spikes[e][t - 1]`.
    pub spikes: Vec<Vec<bool>>,
    /// Machine state per step, electrode 0 in the most significant bit.
    pub states: Vec<u32>,
}

impl Trial {
    pub fn input_value(&self) -> u32 {
        value_from_bits(&self.input)
    }
}

fn validate_setup(
    matrix: &ConductiveMatrix,
    params: &AutomatonParams,
    rec: &RecordingParams,
    electrodes: &[Electrode],
) -> Result<()> {
    params.validate()?;
    rec.validate()?;
    if electrodes.len() > 32 {
        return Err(Error::param("electrodes", "at most 32 electrodes fit a state word"));
    }
    for e in electrodes {
        e.validate(matrix.dims())?;
    }
    Ok(())
}

/// Runs one trial, calling `observe` with the field after every step.
pub fn run_trial_observed(
    matrix: &Arc<ConductiveMatrix>,
    params: &AutomatonParams,
    rec: &RecordingParams,
    electrodes: &[Electrode],
    bits: &[bool],
    mut observe: impl FnMut(&AutomatonField),
) -> Result<Trial> {
    validate_setup(matrix, params, rec, electrodes)?;
    let mut field = AutomatonField::new(matrix.clone())?;
    stimulate(&mut field, electrodes, bits)?;
    let balls: Vec<Vec<[i32; 3]>> = electrodes.iter().map(|e| open_ball_offsets(e.radius)).collect();
    let k = electrodes.len();
    let mut potentials = vec![Vec::with_capacity(rec.steps); k];
    let mut spikes = vec![Vec::with_capacity(rec.steps); k];
    let mut states = Vec::with_capacity(rec.steps);
    let mut prev: Vec<u32> = electrodes
        .iter()
        .zip(&balls)
        .map(|(e, b)| potential_with(&field, e, b))
        .collect();
    for _ in 0..rec.steps {
        field.step(params);
        observe(&field);
        let mut word = 0u32;
        for (idx, (e, ball)) in electrodes.iter().zip(&balls).enumerate() {
            let p = potential_with(&field, e, ball);
            let above = p >= rec.spike_threshold;
            let spike = match rec.detector {
                SpikeDetector::Level => above,
                SpikeDetector::RisingEdge => above && prev[idx] < rec.spike_threshold,
            };
            prev[idx] = p;
            potentials[idx].push(p);
            spikes[idx].push(spike);
            word = (word << 1) | spike as u32;
        }
        states.push(word);
    }
    Ok(Trial {
        input: bits.to_vec(),
        potentials,
        spikes,
        states,
    })
}

/// Stimulates an all-resting field with `bits` at `t = 0`, then records
/// potentials, spikes and machine states for `rec.steps` steps.
pub fn run_trial(
    matrix: &Arc<ConductiveMatrix>,
    params: &AutomatonParams,
    rec: &RecordingParams,
    electrodes: &[Electrode],
    bits: &[bool],
) -> Result<Trial> {
    run_trial_observed(matrix, params, rec, electrodes, bits, |_| {})
}

/// Runs independent trials in parallel; results follow the order of `inputs`.
pub fn run_trials(
    matrix: &Arc<ConductiveMatrix>,
    params: &AutomatonParams,
    rec: &RecordingParams,
    electrodes: &[Electrode],
    inputs: &[Vec<bool>],
) -> Result<Vec<Trial>> {
    inputs
        .par_iter()
        .map(|bits| run_trial(matrix, params, rec, electrodes, bits))
        .collect()
}

/// Spike matrix of one electrode: row per input value, column per step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeRaster {
    pub electrode: u32,
    pub inputs: Vec<u32>,
    pub rows: Vec<Vec<bool>>,
}

impl SpikeRaster {
    /// Collects electrode `index` from every trial.
    pub fn from_trials(trials: &[Trial], index: usize, electrode: u32) -> Self {
        SpikeRaster {
            electrode,
            inputs: trials.iter().map(Trial::input_value).collect(),
            rows: trials.iter().map(|t| t.spikes[index].clone()).collect(),
        }
    }

    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        csv_matrix(
            header_comment,
            &self.inputs,
            self.rows.iter().map(|r| r.iter().map(|&b| b as u32).collect()),
        )
    }
}

/// Raw potentials of one electrode in the same shape as [`SpikeRaster`].
pub fn potentials_csv(trials: &[Trial], index: usize, header_comment: Option<&str>) -> String {
    csv_matrix(
        header_comment,
        &trials.iter().map(Trial::input_value).collect::<Vec<_>>(),
        trials.iter().map(|t| t.potentials[index].clone()),
    )
}

fn csv_matrix(
    comment: Option<&str>,
    inputs: &[u32],
    rows: impl Iterator<Item = Vec<u32>>,
) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        let _ = writeln!(out, "# {c}");
    }
    let mut rows = rows.peekable();
    let width = rows.peek().map_or(0, Vec::len);
    out.push_str("input");
    for t in 1..=width {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (input, row) in inputs.iter().zip(rows) {
        let _ = write!(out, "{input}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::VoxelState;

    fn cube(n: usize) -> Arc<ConductiveMatrix> {
        Arc::new(ConductiveMatrix::from_fn(Dims::new(n, n, n).unwrap(), |_| true))
    }

    #[test]
    fn bundled_layouts_parse() {
        let gates = parse_electrodes(GATE_LAYOUT).unwrap();
        assert_eq!(gates.len(), 10);
        assert_eq!(gates[0].pos, Voxel::new(369, 567, 6));
        assert_eq!(gates[9].pos, Voxel::new(705, 394, 17));
        assert!(gates.iter().all(|e| e.radius == 4));
        let machine = parse_electrodes(MACHINE_LAYOUT).unwrap();
        assert_eq!(machine.len(), 8);
        assert_eq!(machine[5].pos, Voxel::new(369, 424, 7));
        let dims = Dims::new(1024, 1024, 30).unwrap();
        assert!(gates.iter().chain(&machine).all(|e| e.validate(dims).is_ok()));
    }

    #[test]
    fn layout_round_trip_and_errors() {
        let es = vec![
            Electrode::new(0, Voxel::new(1, 2, 3), 2),
            Electrode::new(1, Voxel::new(4, 5, 6), 2),
        ];
        let text = format_electrodes(&es).unwrap();
        assert_eq!(parse_electrodes(&text).unwrap(), es);
        assert!(parse_electrodes("0 1 2 3\n").is_err());
        assert!(parse_electrodes("RADIUS 4\n0 1 2\n").is_err());
        assert!(parse_electrodes("RADIUS 0\n0 1 2 3\n").is_err());
        assert!(parse_electrodes("RADIUS 4\n").is_err());
        assert!(parse_electrodes("# c\nRADIUS 4 # r\n\n7 1 2 3\n").is_ok());
    }

    #[test]
    fn potential_is_strict_in_radius() {
        let m = cube(11);
        let e = Electrode::new(0, Voxel::new(5, 5, 5), 4);
        let mut f = AutomatonField::new(m.clone()).unwrap();
        assert_eq!(potential(&f, &e), 0);
        f.set_voxel(Voxel::new(5, 5, 5), VoxelState::Excited, 0).unwrap();
        assert_eq!(potential(&f, &e), 1);

        let mut g = AutomatonField::new(m.clone()).unwrap();
        g.set_voxel(Voxel::new(9, 5, 5), VoxelState::Excited, 0).unwrap();
        assert_eq!(potential(&g, &e), 0);
        // (2, 2, 2) away: d^2 = 12 < 16.
        g.set_voxel(Voxel::new(7, 7, 7), VoxelState::Excited, 0).unwrap();
        assert_eq!(potential(&g, &e), 1);
        // Refractory voxels do not count.
        g.set_voxel(Voxel::new(5, 5, 6), VoxelState::Refractory, 3).unwrap();
        assert_eq!(potential(&g, &e), 1);
    }

    #[test]
    fn stimulate_respects_bits() {
        let m = cube(20);
        let es = vec![
            Electrode::new(0, Voxel::new(3, 3, 3), 2),
            Electrode::new(1, Voxel::new(15, 15, 15), 3),
        ];
        let mut f = AutomatonField::new(m.clone()).unwrap();
        stimulate(&mut f, &es, &[false, false]).unwrap();
        assert_eq!(f.excited_count(), 0);
        stimulate(&mut f, &es, &[true, false]).unwrap();
        assert_eq!(f.excited_count(), open_ball_offsets(2).len());
        assert!(potential(&f, &es[1]) == 0);
        let mut g = AutomatonField::new(m.clone()).unwrap();
        stimulate(&mut g, &es, &[true, true]).unwrap();
        assert_eq!(g.excited_count(), open_ball_offsets(2).len() + open_ball_offsets(3).len());
        assert!(matches!(
            stimulate(&mut g, &es, &[true]),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn bit_encoding_is_msb_first() {
        assert_eq!(bits_from_value(5, 4), vec![false, true, false, true]);
        assert_eq!(value_from_bits(&[true, false, false, false, false, false]), 32);
        for v in 0..64 {
            assert_eq!(value_from_bits(&bits_from_value(v, 6)), v);
        }
        assert_eq!(parse_input_bits("000001", 6).unwrap(), bits_from_value(1, 6));
        assert_eq!(parse_input_bits("63", 6).unwrap(), vec![true; 6]);
        assert_eq!(parse_input_bits("0b10", 2).unwrap(), vec![true, false]);
        assert!(parse_input_bits("64", 6).is_err());
        assert!(parse_input_bits("x", 6).is_err());
    }

    #[test]
    fn zero_input_records_nothing() {
        let m = cube(8);
        let es = vec![Electrode::new(0, Voxel::new(2, 2, 2), 2)];
        let rec = RecordingParams { steps: 20, ..Default::default() };
        let t = run_trial(&m, &AutomatonParams::default(), &rec, &es, &[false]).unwrap();
        assert!(t.states.iter().all(|&s| s == 0));
        assert!(t.spikes[0].iter().all(|&s| !s));
        assert_eq!(t.states.len(), 20);
    }

    #[test]
    fn rising_edge_fires_once_per_crossing() {
        // Voxel grid too small to propagate: stimulation dies after one step.
        let m = cube(9);
        let es = vec![Electrode::new(0, Voxel::new(4, 4, 4), 3)];
        let params = AutomatonParams { radius: 1, theta: 1, delta: 2 };
        let level = RecordingParams { steps: 30, ..Default::default() };
        let edge = RecordingParams { detector: SpikeDetector::RisingEdge, ..level };
        let a = run_trial(&m, &params, &level, &es, &[true]).unwrap();
        let b = run_trial(&m, &params, &edge, &es, &[true]).unwrap();
        for (t, (&sa, &sb)) in a.spikes[0].iter().zip(&b.spikes[0]).enumerate() {
            let prev = if t == 0 { 1 } else { a.potentials[0][t - 1] };
            assert_eq!(sb, sa && prev < 1);
            assert_eq!(sa, a.potentials[0][t] >= 1);
        }
    }

    #[test]
    fn csv_shape() {
        let trial = Trial {
            input: vec![true, false],
            potentials: vec![vec![3, 0], vec![0, 1]],
            spikes: vec![vec![true, false], vec![false, true]],
            states: vec![2, 1],
        };
        let r = SpikeRaster::from_trials(std::slice::from_ref(&trial), 1, 7);
        assert_eq!(r.to_csv(None), "input,1,2\n2,0,1\n");
        assert_eq!(potentials_csv(&[trial], 0, Some("h")), "# h\ninput,1,2\n2,3,0\n");
    }
}
