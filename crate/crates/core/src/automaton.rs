//! Synchronous three-state excitable automaton over a conductive matrix.
//!
//! Each conductive voxel is resting, excited or refractory. A resting voxel
//! fires when the number of excited voxels within Euclidean distance `r`
//! strictly exceeds `theta`; an excited voxel turns refractory with its
//! countdown set to `delta`; a refractory voxel counts down to zero and then
//! rests. All voxels update from the same snapshot of step `t`.
//!
//! [`AutomatonField::step`] only touches the active set (excited voxels, their
//! resting neighbours and refractory voxels). [`AutomatonField::step_full_sweep`]
//! is the plain double-buffered sweep over every voxel and produces identical
//! fields; it exists as a reference.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ConductiveMatrix, Dims, Voxel};

/// Largest supported neighbourhood radius. Keeps neighbour counts within u16.
pub const MAX_RADIUS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AutomatonParams {
    pub radius: u32,
    pub theta: u32,
    pub delta: u32,
}

impl Default for AutomatonParams {
    fn default() -> Self {
        AutomatonParams {
            radius: 3,
            theta: 7,
            delta: 20,
        }
    }
}

impl AutomatonParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 || self.radius > MAX_RADIUS {
            return Err(Error::param(
                "radius",
                format!("must be in 1..={MAX_RADIUS}, got {}", self.radius),
            ));
        }
        if self.theta == 0 {
            return Err(Error::param("theta", "must be at least 1"));
        }
        if self.delta > u16::MAX as u32 {
            return Err(Error::param(
                "delta",
                format!("must be at most {}, got {}", u16::MAX, self.delta),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum VoxelState {
    #[default]
    Resting = 0,
    Excited = 1,
    Refractory = 2,
}

/// All nonzero lattice offsets with squared norm `<= r*r`, ordered by
/// `(dz, dj, di)`.
pub fn neighborhood_offsets(r: u32) -> Vec<[i32; 3]> {
    ball_offsets(r as i64 * r as i64, r as i32, false)
}

/// Lattice offsets strictly inside a ball of the given radius, origin
/// included. Used for stimulation and electrode apertures.
pub fn open_ball_offsets(radius: u32) -> Vec<[i32; 3]> {
    if radius == 0 {
        return Vec::new();
    }
    let r2 = radius as i64 * radius as i64;
    ball_offsets(r2 - 1, radius as i32, true)
}

fn ball_offsets(max_norm2: i64, extent: i32, with_origin: bool) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    for dz in -extent..=extent {
        for dj in -extent..=extent {
            for di in -extent..=extent {
                let n2 = (di * di + dj * dj + dz * dz) as i64;
                if n2 <= max_norm2 && (with_origin || n2 != 0) {
                    out.push([di, dj, dz]);
                }
            }
        }
    }
    out
}

/// Neighbourhood offset with its linear index delta for a given grid.
#[derive(Clone, Copy, Debug)]
struct Stencil {
    d: [i32; 3],
    linear: i64,
}

fn stencil(dims: Dims, offsets: &[[i32; 3]]) -> Vec<Stencil> {
    let mut out: Vec<Stencil> = offsets
        .iter()
        .map(|&d| Stencil {
            d,
            linear: d[0] as i64
                + dims.nx as i64 * (d[1] as i64 + dims.ny as i64 * d[2] as i64),
        })
        .collect();
    out.sort_by_key(|s| s.linear);
    out
}

/// Per-voxel automaton state over a shared conductive matrix.
#[derive(Clone, Debug)]
pub struct AutomatonField {
    matrix: Arc<ConductiveMatrix>,
    state: Vec<VoxelState>,
    countdown: Vec<u16>,
    /// Sorted indices of excited voxels.
    excited: Vec<u32>,
    /// Indices of refractory voxels, unordered.
    refractory: Vec<u32>,
    t: u64,
    counts: Vec<u16>,
}

impl PartialEq for AutomatonField {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
            && self.matrix.dims() == other.matrix.dims()
            && self.state == other.state
            && self.countdown == other.countdown
    }
}

impl AutomatonField {
    /// An all-resting field at `t = 0`.
    pub fn new(matrix: Arc<ConductiveMatrix>) -> Result<Self> {
        let n = matrix.dims().len();
        if n > u32::MAX as usize {
            return Err(Error::Dimension(format!("{n} voxels exceed the u32 index space")));
        }
        Ok(AutomatonField {
            matrix,
            state: vec![VoxelState::Resting; n],
            countdown: vec![0; n],
            excited: Vec::new(),
            refractory: Vec::new(),
            t: 0,
            counts: Vec::new(),
        })
    }

    pub fn matrix(&self) -> &Arc<ConductiveMatrix> {
        &self.matrix
    }

    pub fn dims(&self) -> Dims {
        self.matrix.dims()
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.state
    }

    pub fn countdowns(&self) -> &[u16] {
        &self.countdown
    }

    pub fn state(&self, v: Voxel) -> VoxelState {
        self.state[self.dims().index(v)]
    }

    pub fn countdown(&self, v: Voxel) -> u16 {
        self.countdown[self.dims().index(v)]
    }

    /// Excited voxel indices in ascending order.
    pub fn excited_indices(&self) -> &[u32] {
        &self.excited
    }

    pub fn excited_count(&self) -> usize {
        self.excited.len()
    }

    pub fn refractory_count(&self) -> usize {
        self.refractory.len()
    }

    pub fn is_quiescent(&self) -> bool {
        self.excited.is_empty() && self.refractory.is_empty()
    }

    /// Excites every conductive resting voxel strictly closer than `radius`
    /// to `center`. Returns how many voxels changed.
    pub fn excite_ball(&mut self, center: Voxel, radius: u32) -> Result<usize> {
        let dims = self.dims();
        dims.checked_voxel(center.i as i64, center.j as i64, center.z as i64)?;
        let before = self.excited.len();
        for d in open_ball_offsets(radius) {
            let (i, j, z) = (
                center.i as i64 + d[0] as i64,
                center.j as i64 + d[1] as i64,
                center.z as i64 + d[2] as i64,
            );
            if !self.matrix.get(i, j, z) {
                continue;
            }
            let idx = dims.index(Voxel::new(i as usize, j as usize, z as usize));
            if self.state[idx] == VoxelState::Resting {
                self.state[idx] = VoxelState::Excited;
                self.excited.push(idx as u32);
            }
        }
        let changed = self.excited.len() - before;
        if changed > 0 {
            self.excited.sort_unstable();
        }
        Ok(changed)
    }

    /// Overwrites one voxel. `countdown` is only kept for refractory voxels.
    /// Intended for building initial conditions.
    pub fn set_voxel(&mut self, v: Voxel, state: VoxelState, countdown: u16) -> Result<()> {
        let dims = self.dims();
        dims.checked_voxel(v.i as i64, v.j as i64, v.z as i64)?;
        if !self.matrix.is_conductive(v) {
            return Err(Error::Domain(format!("voxel {v:?} is not conductive")));
        }
        let idx = dims.index(v);
        let id = idx as u32;
        match self.state[idx] {
            VoxelState::Excited => self.excited.retain(|&p| p != id),
            VoxelState::Refractory => self.refractory.retain(|&p| p != id),
            VoxelState::Resting => {}
        }
        self.state[idx] = state;
        self.countdown[idx] = 0;
        match state {
            VoxelState::Excited => {
                let at = self.excited.partition_point(|&p| p < id);
                self.excited.insert(at, id);
            }
            VoxelState::Refractory => {
                self.countdown[idx] = countdown;
                self.refractory.push(id);
            }
            VoxelState::Resting => {}
        }
        Ok(())
    }

    /// Advances the field by one synchronous step.
    ///
    /// Work is proportional to the active set. Neighbour counting is split
    /// into index ranges processed in parallel; each range only writes its own
    /// counters, so the result does not depend on the thread count.
    pub fn step(&mut self, params: &AutomatonParams) {
        let dims = self.dims();
        let n = dims.len();
        let theta = params.theta;
        let delta = params.delta.min(u16::MAX as u32) as u16;
        let stencil = stencil(dims, &neighborhood_offsets(params.radius));
        let reach = stencil.last().map_or(0, |s| s.linear) as usize;

        if self.counts.len() != n {
            self.counts = vec![0; n];
        }
        let chunk_len = n
            .div_ceil(rayon::current_num_threads() * 8)
            .max(4096)
            .min(n.max(1));

        let matrix = &*self.matrix;
        let state = &self.state;
        let excited = &self.excited;
        let fired: Vec<Vec<u32>> = if excited.is_empty() {
            Vec::new()
        } else {
            self.counts
                .par_chunks_mut(chunk_len)
                .enumerate()
                .map(|(chunk, counts)| {
                    let lo = chunk * chunk_len;
                    let hi = lo + counts.len();
                    let src_lo = lo.saturating_sub(reach) as u32;
                    let src_hi = (hi + reach).min(n) as u64;
                    let first = excited.partition_point(|&p| p < src_lo);
                    let mut touched = Vec::new();
                    for &src in excited[first..].iter().take_while(|&&p| (p as u64) < src_hi) {
                        let s = src as i64;
                        let v = dims.voxel(src as usize);
                        let (x, y, z) = (v.i as i64, v.j as i64, v.z as i64);
                        let from = stencil.partition_point(|o| s + o.linear < lo as i64);
                        for o in stencil[from..].iter().take_while(|o| s + o.linear < hi as i64) {
                            if !dims.contains(x + o.d[0] as i64, y + o.d[1] as i64, z + o.d[2] as i64) {
                                continue;
                            }
                            let target = (s + o.linear) as usize;
                            if !matrix.is_conductive_index(target)
                                || state[target] != VoxelState::Resting
                            {
                                continue;
                            }
                            let c = &mut counts[target - lo];
                            if *c == 0 {
                                touched.push(target as u32);
                            }
                            *c += 1;
                        }
                    }
                    let mut fired: Vec<u32> = touched
                        .iter()
                        .copied()
                        .filter(|&p| counts[p as usize - lo] as u32 > theta)
                        .collect();
                    for &p in &touched {
                        counts[p as usize - lo] = 0;
                    }
                    fired.sort_unstable();
                    fired
                })
                .collect()
        };

        let mut refractory = Vec::with_capacity(self.refractory.len() + self.excited.len());
        for &p in &self.refractory {
            let p_us = p as usize;
            if self.countdown[p_us] > 0 {
                self.countdown[p_us] -= 1;
                refractory.push(p);
            } else {
                self.state[p_us] = VoxelState::Resting;
            }
        }
        for &p in &self.excited {
            self.state[p as usize] = VoxelState::Refractory;
            self.countdown[p as usize] = delta;
            refractory.push(p);
        }
        let mut new_excited = Vec::with_capacity(fired.iter().map(Vec::len).sum());
        for part in fired {
            new_excited.extend(part);
        }
        for &p in &new_excited {
            self.state[p as usize] = VoxelState::Excited;
        }
        self.excited = new_excited;
        self.refractory = refractory;
        self.t += 1;
    }

    /// Reference update: recomputes every voxel from a read-only copy of the
    /// previous step. Slow; output-equivalent to [`step`](Self::step).
    pub fn step_full_sweep(&mut self, params: &AutomatonParams) {
        let dims = self.dims();
        let offsets = neighborhood_offsets(params.radius);
        let delta = params.delta.min(u16::MAX as u32) as u16;
        let prev_state = self.state.clone();
        let prev_count = self.countdown.clone();
        let matrix = &*self.matrix;
        let slice = dims.slice_len();

        self.state
            .par_chunks_mut(slice)
            .zip(self.countdown.par_chunks_mut(slice))
            .enumerate()
            .for_each(|(z, (st, cd))| {
                for k in 0..slice {
                    let idx = z * slice + k;
                    if !matrix.is_conductive_index(idx) {
                        continue;
                    }
                    let (next, h) = match prev_state[idx] {
                        VoxelState::Excited => (VoxelState::Refractory, delta),
                        VoxelState::Refractory if prev_count[idx] > 0 => {
                            (VoxelState::Refractory, prev_count[idx] - 1)
                        }
                        VoxelState::Refractory => (VoxelState::Resting, 0),
                        VoxelState::Resting => {
                            let v = dims.voxel(idx);
                            let sigma = offsets
                                .iter()
                                .filter(|d| {
                                    let (i, j, zz) = (
                                        v.i as i64 + d[0] as i64,
                                        v.j as i64 + d[1] as i64,
                                        v.z as i64 + d[2] as i64,
                                    );
                                    dims.contains(i, j, zz)
                                        && prev_state[dims.index(Voxel::new(
                                            i as usize,
                                            j as usize,
                                            zz as usize,
                                        ))] == VoxelState::Excited
                                })
                                .count() as u32;
                            if sigma > params.theta {
                                (VoxelState::Excited, 0)
                            } else {
                                (VoxelState::Resting, 0)
                            }
                        }
                    };
                    st[k] = next;
                    cd[k] = h;
                }
            });

        self.excited.clear();
        self.refractory.clear();
        for (idx, s) in self.state.iter().enumerate() {
            match s {
                VoxelState::Excited => self.excited.push(idx as u32),
                VoxelState::Refractory => self.refractory.push(idx as u32),
                VoxelState::Resting => {}
            }
        }
        self.t += 1;
    }

    /// Class map of slice `z`.
    pub fn snapshot_slice(&self, z: usize) -> Result<Raster> {
        let dims = self.dims();
        if z >= dims.nz {
            return Err(Error::Domain(format!(
                "slice {z} out of range for {} slices",
                dims.nz
            )));
        }
        let base = z * dims.slice_len();
        let pixels = (base..base + dims.slice_len())
            .map(|idx| {
                if !self.matrix.is_conductive_index(idx) {
                    return PixelClass::NonConductive;
                }
                match self.state[idx] {
                    VoxelState::Resting => PixelClass::Resting,
                    VoxelState::Excited => PixelClass::Excited,
                    VoxelState::Refractory => PixelClass::Refractory,
                }
            })
            .map(|c| c as u8)
            .collect();
        Ok(Raster {
            width: dims.nx,
            height: dims.ny,
            pixels,
        })
    }
}

/// Grey levels used in snapshot rasters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum PixelClass {
    NonConductive = 0,
    Resting = 64,
    Refractory = 128,
    Excited = 255,
}

/// One byte per pixel, row-major with x fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    /// Binary PGM (P5). An optional comment is written after the magic number.
    pub fn to_pgm(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = b"P5\n".to_vec();
        if let Some(c) = comment {
            out.extend(format!("# {c}\n").bytes());
        }
        out.extend(format!("{} {}\n255\n", self.width, self.height).bytes());
        out.extend(&self.pixels);
        out
    }

    /// Binary PPM (P6): excited red, refractory magenta, resting grey.
    pub fn to_ppm(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = b"P6\n".to_vec();
        if let Some(c) = comment {
            out.extend(format!("# {c}\n").bytes());
        }
        out.extend(format!("{} {}\n255\n", self.width, self.height).bytes());
        for &p in &self.pixels {
            let rgb: [u8; 3] = match p {
                x if x == PixelClass::Excited as u8 => [255, 0, 0],
                x if x == PixelClass::Refractory as u8 => [255, 0, 255],
                x if x == PixelClass::Resting as u8 => [64, 64, 64],
                _ => [0, 0, 0],
            };
            out.extend(rgb);
        }
        out
    }
}
