//! Two-input Boolean gate mining from spike responses, and parameter sweeps
//! counting how many gates a network realises.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use rayon::prelude::*;

use crate::automaton::AutomatonParams;
use crate::electrodes::{run_trials, Electrode, RecordingParams, Trial};
use crate::error::{Error, Result};
use crate::grid::ConductiveMatrix;

/// Responses of one output slot to the inputs `(x, y)` = 00, 01, 10, 11.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GateQuad {
    pub z00: bool,
    pub z01: bool,
    pub z10: bool,
    pub z11: bool,
}

impl GateQuad {
    pub fn new(z00: bool, z01: bool, z10: bool, z11: bool) -> Self {
        GateQuad { z00, z01, z10, z11 }
    }

    /// `z00` is the most significant of the four bits.
    pub fn code(self) -> u8 {
        (self.z00 as u8) << 3 | (self.z01 as u8) << 2 | (self.z10 as u8) << 1 | self.z11 as u8
    }

    pub fn from_code(code: u8) -> Self {
        GateQuad::new(code & 8 != 0, code & 4 != 0, code & 2 != 0, code & 1 != 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateType {
    Zero,
    Or,
    And,
    Xor,
    /// `!x & y`
    NotAnd,
    /// `x & !y`
    AndNot,
    SelectX,
    SelectY,
    Other(u8),
}

impl GateType {
    /// Gate types that are counted in a census, in CSV column order.
    pub const COUNTED: [GateType; 7] = [
        GateType::Or,
        GateType::And,
        GateType::Xor,
        GateType::NotAnd,
        GateType::AndNot,
        GateType::SelectX,
        GateType::SelectY,
    ];

    pub fn column(self) -> Option<usize> {
        Self::COUNTED.iter().position(|&g| g == self)
    }

    pub fn is_counted(self) -> bool {
        self.column().is_some()
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateType::Zero => f.write_str("ZERO"),
            GateType::Or => f.write_str("OR"),
            GateType::And => f.write_str("AND"),
            GateType::Xor => f.write_str("XOR"),
            GateType::NotAnd => f.write_str("NOTAND"),
            GateType::AndNot => f.write_str("ANDNOT"),
            GateType::SelectX => f.write_str("SELX"),
            GateType::SelectY => f.write_str("SELY"),
            GateType::Other(code) => write!(f, "OTHER({code:04b})"),
        }
    }
}

pub fn classify(q: GateQuad) -> GateType {
    match (q.z00, q.z01, q.z10, q.z11) {
        (false, false, false, false) => GateType::Zero,
        (false, true, true, true) => GateType::Or,
        (false, false, false, true) => GateType::And,
        (false, true, true, false) => GateType::Xor,
        (false, true, false, false) => GateType::NotAnd,
        (false, false, true, false) => GateType::AndNot,
        (false, false, true, true) => GateType::SelectX,
        (false, true, false, true) => GateType::SelectY,
        _ => GateType::Other(q.code()),
    }
}

/// Input pairs in quad order.
pub const INPUT_PAIRS: [(bool, bool); 4] = [(false, false), (false, true), (true, false), (true, true)];

/// Gate counts per output electrode plus the full per-slot gate map.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCensus {
    pub outputs: Vec<u32>,
    /// `counts[e][c]`, `c` indexing [`GateType::COUNTED`].
    pub counts: Vec<[u64; 7]>,
    /// `map[e][t - 1]`.
    pub map: Vec<Vec<GateType>>,
    pub deduplicated: bool,
}

impl GateCensus {
    /// Builds a census from the four trials in [`INPUT_PAIRS`] order.
    /// `output_indices` select electrodes within each trial.
    pub fn from_trials(
        trials: &[Trial; 4],
        output_indices: &[usize],
        output_ids: Vec<u32>,
        dedupe_per_electrode: bool,
    ) -> Self {
        let steps = trials[0].states.len();
        let mut counts = Vec::with_capacity(output_indices.len());
        let mut map = Vec::with_capacity(output_indices.len());
        for &e in output_indices {
            let row: Vec<GateType> = (0..steps)
                .map(|t| {
                    classify(GateQuad::new(
                        trials[0].spikes[e][t],
                        trials[1].spikes[e][t],
                        trials[2].spikes[e][t],
                        trials[3].spikes[e][t],
                    ))
                })
                .collect();
            let mut c = [0u64; 7];
            for g in &row {
                if let Some(col) = g.column() {
                    c[col] += 1;
                }
            }
            if dedupe_per_electrode {
                for v in &mut c {
                    *v = (*v).min(1);
                }
            }
            counts.push(c);
            map.push(row);
        }
        GateCensus {
            outputs: output_ids,
            counts,
            map,
            deduplicated: dedupe_per_electrode,
        }
    }

    pub fn totals(&self) -> [u64; 7] {
        let mut t = [0u64; 7];
        for c in &self.counts {
            for (a, b) in t.iter_mut().zip(c) {
                *a += b;
            }
        }
        t
    }

    /// Average number of counted gates per output electrode.
    pub fn nu(&self) -> f64 {
        if self.outputs.is_empty() {
            return 0.0;
        }
        self.totals().iter().sum::<u64>() as f64 / self.outputs.len() as f64
    }

    pub fn per_electrode_csv(&self) -> String {
        let mut s = String::from("electrode,OR,AND,XOR,NOTAND,ANDNOT,SELX,SELY\n");
        for (id, c) in self.outputs.iter().zip(&self.counts) {
            let _ = write!(s, "{id}");
            for v in c {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Mines gates with `in_x`/`in_y` as inputs and reads every output electrode.
pub fn mine(
    matrix: &Arc<ConductiveMatrix>,
    params: &AutomatonParams,
    rec: &RecordingParams,
    in_x: &Electrode,
    in_y: &Electrode,
    outputs: &[Electrode],
    dedupe_per_electrode: bool,
) -> Result<GateCensus> {
    if in_x.id == in_y.id {
        return Err(Error::Domain("input electrodes x and y are the same".into()));
    }
    if outputs
        .iter()
        .any(|o| o.id == in_x.id || o.id == in_y.id)
    {
        return Err(Error::Domain("an output electrode is also an input".into()));
    }
    let mut electrodes = vec![*in_x, *in_y];
    electrodes.extend_from_slice(outputs);
    let inputs: Vec<Vec<bool>> = INPUT_PAIRS
        .iter()
        .map(|&(x, y)| {
            let mut bits = vec![false; electrodes.len()];
            bits[0] = x;
            bits[1] = y;
            bits
        })
        .collect();
    let trials: [Trial; 4] = run_trials(matrix, params, rec, &electrodes, &inputs)?
        .try_into()
        .expect("four trials");
    let indices: Vec<usize> = (2..electrodes.len()).collect();
    Ok(GateCensus::from_trials(
        &trials,
        &indices,
        outputs.iter().map(|o| o.id).collect(),
        dedupe_per_electrode,
    ))
}

/// Threshold grid with the refractory delay held fixed.
pub const THETA_GRID: [u32; 9] = [4, 5, 6, 7, 8, 9, 10, 11, 12];
pub const THETA_SWEEP_DELTA: u32 = 20;
/// Refractory-delay grid with the threshold held fixed.
pub const DELTA_GRID: [u32; 11] = [10, 15, 17, 18, 19, 20, 21, 22, 23, 24, 30];
pub const DELTA_SWEEP_THETA: u32 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Theta,
    Delta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: u32,
    pub counts: [u64; 7],
    pub nu: f64,
}

/// Gate frequencies over a parameter grid; one row per grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl FrequencyTable {
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("param,OR,AND,XOR,NOTAND,ANDNOT,SELX,SELY,nu\n");
        for r in &self.rows {
            let _ = write!(s, "{}", r.param);
            for c in r.counts {
                let _ = write!(s, ",{c}");
            }
            let _ = writeln!(s, ",{:.6}", r.nu);
        }
        s
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    matrix: &Arc<ConductiveMatrix>,
    axis: SweepAxis,
    values: &[u32],
    base: AutomatonParams,
    rec: &RecordingParams,
    in_x: &Electrode,
    in_y: &Electrode,
    outputs: &[Electrode],
    dedupe: bool,
) -> Result<FrequencyTable> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep grid is empty"));
    }
    let rows = values
        .par_iter()
        .map(|&v| {
            let params = match axis {
                SweepAxis::Theta => AutomatonParams { theta: v, ..base },
                SweepAxis::Delta => AutomatonParams { delta: v, ..base },
            };
            let census = mine(matrix, &params, rec, in_x, in_y, outputs, dedupe)?;
            Ok(SweepRow {
                param: v,
                counts: census.totals(),
                nu: census.nu(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyTable { axis, rows })
}

/// Sweeps the threshold; `base.theta` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn sweep_theta(
    matrix: &Arc<ConductiveMatrix>,
    thetas: &[u32],
    base: AutomatonParams,
    rec: &RecordingParams,
    in_x: &Electrode,
    in_y: &Electrode,
    outputs: &[Electrode],
    dedupe: bool,
) -> Result<FrequencyTable> {
    sweep(matrix, SweepAxis::Theta, thetas, base, rec, in_x, in_y, outputs, dedupe)
}

/// Sweeps the refractory delay; `base.delta` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn sweep_delta(
    matrix: &Arc<ConductiveMatrix>,
    deltas: &[u32],
    base: AutomatonParams,
    rec: &RecordingParams,
    in_x: &Electrode,
    in_y: &Electrode,
    outputs: &[Electrode],
    dedupe: bool,
) -> Result<FrequencyTable> {
    sweep(matrix, SweepAxis::Delta, deltas, base, rec, in_x, in_y, outputs, dedupe)
}
