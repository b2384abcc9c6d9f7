//! Small deterministic networks used by tests, examples and the CLI.

use std::sync::Arc;

use crate::automaton::{AutomatonField, VoxelState};
use crate::electrodes::{Electrode, DEFAULT_ELECTRODE_RADIUS};
use crate::grid::{
    generate_synthetic, rasterize_segments, ConductiveMatrix, Dims, Placement, Segment,
    SyntheticNetworkSpec, Voxel,
};

/// A solid tube of radius `radius` along x, centred in y and z, spanning the
/// full length of the grid.
pub fn straight_tube(length: usize, radius: usize) -> ConductiveMatrix {
    let side = 2 * radius + 3;
    let c = (side / 2) as f64;
    let dims = Dims::new(length, side, side).expect("non-empty");
    rasterize_segments(
        dims,
        &[Segment {
            a: [0.0, c, c],
            b: [(length - 1) as f64, c, c],
        }],
        radius,
    )
}

/// Centre-line voxel at position `i` along a [`straight_tube`].
pub fn tube_axis(radius: usize, i: usize) -> Voxel {
    let c = (2 * radius + 3) / 2;
    Voxel::new(i, c, c)
}

/// A closed torus in the xy-plane: centre-line circle of radius `major`,
/// tube radius `minor`.
pub fn ring(major: usize, minor: usize) -> ConductiveMatrix {
    let side = 2 * (major + minor) + 3;
    let depth = 2 * minor + 3;
    let dims = Dims::new(side, side, depth).expect("non-empty");
    let c = (side / 2) as f64;
    let cz = (depth / 2) as f64;
    let (r, m) = (major as f64, minor as f64);
    ConductiveMatrix::from_fn(dims, |v| {
        let dx = v.i as f64 - c;
        let dy = v.j as f64 - c;
        let dz = v.z as f64 - cz;
        let radial = (dx * dx + dy * dy).sqrt() - r;
        radial * radial + dz * dz <= m * m
    })
}

/// Centre-line voxel of a [`ring`] at angle `angle` (radians).
pub fn ring_point(major: usize, minor: usize, angle: f64) -> Voxel {
    let side = 2 * (major + minor) + 3;
    let depth = 2 * minor + 3;
    let c = (side / 2) as f64;
    Voxel::new(
        (c + major as f64 * angle.cos()).round() as usize,
        (c + major as f64 * angle.sin()).round() as usize,
        depth / 2,
    )
}

/// Seeded synthetic network used for regression runs.
pub const BUNDLED_SPEC: SyntheticNetworkSpec = SyntheticNetworkSpec {
    dims: Dims {
        nx: 96,
        ny: 96,
        nz: 16,
    },
    segment_count: 24,
    bundle_radius: 2,
    seed: 20190424,
    placement: Placement::NearestNeighbor { neighbors: 2 },
};

pub fn bundled_network() -> ConductiveMatrix {
    generate_synthetic(&BUNDLED_SPEC).expect("bundled spec is valid")
}

/// A [`ring`] field carrying a single wave that travels in the direction of
/// increasing angle.
///
/// An arc of `arc` voxels just past angle zero is excited and the arc just
/// before it is refractory with countdown `delta`, so the wave cannot spread
/// backwards.
pub fn reentrant_ring(major: usize, minor: usize, arc: f64, delta: u32) -> AutomatonField {
    let delta = u16::try_from(delta).expect("delta fits the countdown width");
    let m = Arc::new(ring(major, minor));
    let dims = m.dims();
    let c = (dims.nx / 2) as f64;
    let width = arc / major as f64;
    let mut f = AutomatonField::new(m.clone()).expect("ring is non-empty");
    for idx in 0..dims.len() {
        if !m.is_conductive_index(idx) {
            continue;
        }
        let v = dims.voxel(idx);
        let angle = (v.j as f64 - c).atan2(v.i as f64 - c);
        let state = if (0.0..width).contains(&angle) {
            Some((VoxelState::Excited, 0))
        } else if (-width..0.0).contains(&angle) {
            Some((VoxelState::Refractory, delta))
        } else {
            None
        };
        if let Some((s, h)) = state {
            f.set_voxel(v, s, h).expect("voxel is conductive");
        }
    }
    f
}

/// Distinct segment endpoints of [`BUNDLED_SPEC`], in order of first use,
/// rounded to voxels.
pub fn bundled_endpoints() -> Vec<Voxel> {
    let mut out: Vec<Voxel> = Vec::new();
    let segs = BUNDLED_SPEC.segments().expect("bundled spec is valid");
    for p in segs.iter().flat_map(|s| [s.a, s.b]) {
        let v = Voxel::new(p[0].round() as usize, p[1].round() as usize, p[2].round() as usize);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Electrodes at the first `count` endpoints of the bundled network.
pub fn bundled_electrodes(count: usize) -> Vec<Electrode> {
    bundled_endpoints()
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(id, v)| Electrode::new(id as u32, v, DEFAULT_ELECTRODE_RADIUS))
        .collect()
}
