//! The conductive matrix: a dense 3D occupancy grid marking voxels that can
//! carry excitation.
//!
//! Voxels are addressed as `(i, j, z)` with `i` along x, `j` along y and `z`
//! along the slice axis. Linear storage is x-fastest, then y, then z, which is
//! also the payload order of the raw file format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Grid extent in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Dimension(format!(
                "every extent must be at least 1, got {nx}x{ny}x{nz}"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn contains(&self, i: i64, j: i64, z: i64) -> bool {
        i >= 0
            && j >= 0
            && z >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && (z as usize) < self.nz
    }

    #[inline]
    pub fn index(&self, v: Voxel) -> usize {
        v.i + self.nx * (v.j + self.ny * v.z)
    }

    #[inline]
    pub fn voxel(&self, index: usize) -> Voxel {
        let i = index % self.nx;
        let rest = index / self.nx;
        Voxel {
            i,
            j: rest % self.ny,
            z: rest / self.ny,
        }
    }

    /// Validates a signed coordinate and converts it to a [`Voxel`].
    pub fn checked_voxel(&self, i: i64, j: i64, z: i64) -> Result<Voxel> {
        if self.contains(i, j, z) {
            Ok(Voxel::new(i as usize, j as usize, z as usize))
        } else {
            Err(Error::OutOfBounds {
                i,
                j,
                z,
                nx: self.nx,
                ny: self.ny,
                nz: self.nz,
            })
        }
    }
}

/// An in-bounds voxel coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Voxel {
    pub i: usize,
    pub j: usize,
    pub z: usize,
}

impl Voxel {
    pub const fn new(i: usize, j: usize, z: usize) -> Self {
        Voxel { i, j, z }
    }

    /// Squared Euclidean distance in index space.
    #[inline]
    pub fn dist2(&self, other: &Voxel) -> u64 {
        let d = |a: usize, b: usize| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        };
        d(self.i, other.i) + d(self.j, other.j) + d(self.z, other.z)
    }
}

/// Physical voxel size in micrometres. Metadata only; the automaton works on
/// the isotropic index lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelSize {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for VoxelSize {
    /// Confocal stack resolution of the reference network.
    fn default() -> Self {
        VoxelSize {
            x: 0.22,
            y: 0.22,
            z: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConductiveMatrix {
    dims: Dims,
    occupancy: Vec<bool>,
}

impl ConductiveMatrix {
    pub fn empty(dims: Dims) -> Self {
        ConductiveMatrix {
            dims,
            occupancy: vec![false; dims.len()],
        }
    }

    pub fn from_occupancy(dims: Dims, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: occupancy.len(),
            });
        }
        Ok(ConductiveMatrix { dims, occupancy })
    }

    /// Builds a matrix from a predicate over voxel coordinates.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(Voxel) -> bool) -> Self {
        let occupancy = (0..dims.len()).map(|idx| f(dims.voxel(idx))).collect();
        ConductiveMatrix { dims, occupancy }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    /// Conductivity at a signed coordinate; anything outside the grid is
    /// non-conductive.
    #[inline]
    pub fn get(&self, i: i64, j: i64, z: i64) -> bool {
        self.dims.contains(i, j, z)
            && self.occupancy[self.dims.index(Voxel::new(i as usize, j as usize, z as usize))]
    }

    #[inline]
    pub fn is_conductive(&self, v: Voxel) -> bool {
        self.occupancy[self.dims.index(v)]
    }

    #[inline]
    pub fn is_conductive_index(&self, index: usize) -> bool {
        self.occupancy[index]
    }

    pub fn set(&mut self, v: Voxel, value: bool) {
        let idx = self.dims.index(v);
        self.occupancy[idx] = value;
    }

    pub fn conductive_count(&self) -> usize {
        self.occupancy.iter().filter(|&&c| c).count()
    }

    /// Voxelwise union with another matrix of identical dimensions.
    pub fn union_with(&mut self, other: &ConductiveMatrix) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!(
                "cannot merge {:?} with {:?}",
                self.dims, other.dims
            )));
        }
        for (a, &b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            *a |= b;
        }
        Ok(())
    }
}

/// Per-channel lower bounds; a pixel conducts when every channel strictly
/// exceeds its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RgbThreshold {
    pub r_min: u8,
    pub g_min: u8,
    pub b_min: u8,
}

impl Default for RgbThreshold {
    fn default() -> Self {
        RgbThreshold {
            r_min: 40,
            g_min: 19,
            b_min: 19,
        }
    }
}

impl RgbThreshold {
    #[inline]
    pub fn passes(&self, rgb: [u8; 3]) -> bool {
        rgb[0] > self.r_min && rgb[1] > self.g_min && rgb[2] > self.b_min
    }
}

/// Converts an ordered stack of RGB slices (slice index = z) into a
/// conductive matrix.
pub fn threshold_image_stack(slices: &[RgbImage], th: RgbThreshold) -> Result<ConductiveMatrix> {
    let first = slices
        .first()
        .ok_or(Error::EmptyInput("image stack has no slices"))?;
    let (w, h) = first.dimensions();
    for (z, s) in slices.iter().enumerate() {
        if s.dimensions() != (w, h) {
            return Err(Error::Dimension(format!(
                "slice {z} is {}x{}, expected {w}x{h}",
                s.width(),
                s.height()
            )));
        }
    }
    let dims = Dims::new(w as usize, h as usize, slices.len())?;
    let mut occupancy = Vec::with_capacity(dims.len());
    for s in slices {
        // RgbImage pixels are row-major, i.e. x fastest, matching our layout.
        occupancy.extend(s.pixels().map(|p| th.passes(p.0)));
    }
    ConductiveMatrix::from_occupancy(dims, occupancy)
}

/// Lists image files in `dir` ordered by the number embedded in their file
/// stem (`slice_2.png` sorts before `slice_10.png`).
pub fn list_image_stack(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("png" | "tif" | "tiff")) {
            files.push(path);
        }
    }
    files.sort_by_key(|p| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
        (digits.parse::<u64>().unwrap_or(u64::MAX), p.clone())
    });
    Ok(files)
}

pub fn load_image_stack(dir: &Path, th: RgbThreshold) -> Result<ConductiveMatrix> {
    let files = list_image_stack(dir)?;
    let slices = files
        .iter()
        .map(|p| {
            image::open(p)
                .map(|img| img.to_rgb8())
                .map_err(|source| Error::Image {
                    path: p.clone(),
                    source,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    threshold_image_stack(&slices, th)
}

/// Payload encoding of the raw matrix file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RawEncoding {
    /// One byte per voxel, each 0 or 1.
    #[default]
    Byte,
    /// Eight voxels per byte, LSB first, each z-slice padded to a whole byte.
    Packed,
}

impl RawEncoding {
    fn keyword(self) -> &'static str {
        match self {
            RawEncoding::Byte => "byte",
            RawEncoding::Packed => "packed",
        }
    }
}

const MAX_HEADER_LEN: usize = 256;

pub fn encode_raw(matrix: &ConductiveMatrix, encoding: RawEncoding) -> Vec<u8> {
    let d = matrix.dims;
    let mut out = format!(
        "VOXELS {} {} {} {}\n",
        d.nx,
        d.ny,
        d.nz,
        encoding.keyword()
    )
    .into_bytes();
    match encoding {
        RawEncoding::Byte => out.extend(matrix.occupancy.iter().map(|&c| c as u8)),
        RawEncoding::Packed => {
            for slice in matrix.occupancy.chunks(d.slice_len()) {
                for byte in slice.chunks(8) {
                    let packed = byte
                        .iter()
                        .enumerate()
                        .fold(0u8, |acc, (bit, &c)| acc | ((c as u8) << bit));
                    out.push(packed);
                }
            }
        }
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<ConductiveMatrix> {
    let newline = bytes
        .iter()
        .take(MAX_HEADER_LEN)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(0, "header line not terminated by a newline"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|e| Error::format(e.valid_up_to(), "header is not ASCII"))?;
    let mut fields = header.split_ascii_whitespace();
    if fields.next() != Some("VOXELS") {
        return Err(Error::format(0, "header must start with VOXELS"));
    }
    let mut extent = |name: &str| -> Result<usize> {
        let tok = fields
            .next()
            .ok_or_else(|| Error::format(newline, format!("header is missing {name}")))?;
        let offset = tok.as_ptr() as usize - bytes.as_ptr() as usize;
        match tok.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(Error::format(offset, format!("invalid {name} `{tok}`"))),
        }
    };
    let nx = extent("n_x")?;
    let ny = extent("n_y")?;
    let nz = extent("n_z")?;
    let encoding = match fields.next() {
        Some("byte") => RawEncoding::Byte,
        Some("packed") => RawEncoding::Packed,
        Some(other) => {
            let offset = other.as_ptr() as usize - bytes.as_ptr() as usize;
            return Err(Error::format(offset, format!("unknown encoding `{other}`")));
        }
        None => return Err(Error::format(newline, "header is missing the encoding")),
    };
    if fields.next().is_some() {
        return Err(Error::format(newline, "trailing tokens in header"));
    }
    let dims = Dims::new(nx, ny, nz)?;
    let start = newline + 1;
    let payload = &bytes[start..];
    let slice_bytes = dims.slice_len().div_ceil(8);
    let expected = match encoding {
        RawEncoding::Byte => dims.len(),
        RawEncoding::Packed => slice_bytes * nz,
    };
    if payload.len() < expected {
        return Err(Error::format(
            start + payload.len(),
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            start + expected,
            format!(
                "{} unexpected bytes after payload",
                payload.len() - expected
            ),
        ));
    }
    let occupancy = match encoding {
        RawEncoding::Byte => payload
            .iter()
            .enumerate()
            .map(|(k, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::format(start + k, format!("voxel byte {b} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?,
        RawEncoding::Packed => {
            let mut occ = Vec::with_capacity(dims.len());
            for slice in payload.chunks(slice_bytes) {
                occ.extend(
                    (0..dims.slice_len()).map(|k| (slice[k / 8] >> (k % 8)) & 1 == 1),
                );
            }
            occ
        }
    };
    ConductiveMatrix::from_occupancy(dims, occupancy)
}

pub fn save_raw_matrix(matrix: &ConductiveMatrix, path: &Path, encoding: RawEncoding) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_raw(matrix, encoding))
        .map_err(|e| Error::io(path, e))
}

pub fn load_raw_matrix(path: &Path) -> Result<ConductiveMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raw(&bytes)
}

/// How segment endpoints are chosen by [`generate_synthetic`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    /// Each segment joins two independent uniform points.
    UniformEndpoints,
    /// Points are dropped one at a time and each new point is joined to its
    /// `neighbors` nearest predecessors, giving a connected mesh with loops
    /// once `neighbors >= 2`. Stands in for a Delaunay edge set.
    NearestNeighbor { neighbors: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticNetworkSpec {
    pub dims: Dims,
    pub segment_count: usize,
    pub bundle_radius: usize,
    pub seed: u64,
    pub placement: Placement,
}

/// A straight bundle between two points in continuous index space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Segment {
    fn dist2_to_point(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|k| (p[k] - self.a[k]).powi(2)).sum()
    }

    /// Squared distance from `p` to the closest point of the segment.
    pub fn dist2_to(&self, p: [f64; 3]) -> f64 {
        let ab = [self.b[0] - self.a[0], self.b[1] - self.a[1], self.b[2] - self.a[2]];
        let ap = [p[0] - self.a[0], p[1] - self.a[1], p[2] - self.a[2]];
        let len2 = ab.iter().map(|c| c * c).sum::<f64>();
        let t = if len2 > 0.0 {
            (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (0..3)
            .map(|k| {
                let d = ap[k] - t * ab[k];
                d * d
            })
            .sum()
    }
}

impl SyntheticNetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.segment_count == 0 {
            return Err(Error::param("segment_count", "must be at least 1"));
        }
        if self.bundle_radius == 0 {
            return Err(Error::param("bundle_radius", "must be at least 1"));
        }
        if let Placement::NearestNeighbor { neighbors } = self.placement {
            if neighbors == 0 {
                return Err(Error::param("neighbors", "must be at least 1"));
            }
        }
        if self.dims.len() < 2 {
            return Err(Error::Generation(format!(
                "a {}x{}x{} grid cannot hold a segment",
                self.dims.nx, self.dims.ny, self.dims.nz
            )));
        }
        Ok(())
    }

    /// Samples the segment set. Pure in `(self, seed)`.
    pub fn segments(&self) -> Result<Vec<Segment>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.dims;
        let point = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            let mut axis = |n: usize| {
                if n == 1 {
                    0.0
                } else {
                    rng.random_range(0.0..=(n - 1) as f64)
                }
            };
            [axis(d.nx), axis(d.ny), axis(d.nz)]
        };
        let mut segments = Vec::with_capacity(self.segment_count);
        match self.placement {
            Placement::UniformEndpoints => {
                while segments.len() < self.segment_count {
                    let a = point(&mut rng);
                    let b = point(&mut rng);
                    segments.push(Segment { a, b });
                }
            }
            Placement::NearestNeighbor { neighbors } => {
                let mut points: Vec<[f64; 3]> = vec![point(&mut rng)];
                while segments.len() < self.segment_count {
                    let p = point(&mut rng);
                    let mut order: Vec<(f64, usize)> = points
                        .iter()
                        .enumerate()
                        .map(|(k, q)| (Segment { a: p, b: p }.dist2_to(*q), k))
                        .collect();
                    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                    for &(_, k) in order.iter().take(neighbors) {
                        if segments.len() == self.segment_count {
                            break;
                        }
                        segments.push(Segment { a: points[k], b: p });
                    }
                    points.push(p);
                }
            }
        }
        Ok(segments)
    }
}

/// Marks every voxel whose centre lies within `radius` of some segment.
pub fn rasterize_segments(dims: Dims, segments: &[Segment], radius: usize) -> ConductiveMatrix {
    let mut m = ConductiveMatrix::empty(dims);
    let r2 = (radius * radius) as f64;
    // Sample points at most one voxel apart; every voxel within `radius` of
    // the segment is then within `radius + 1` of a sample on each axis.
    let reach = radius as i64 + 1;
    for s in segments {
        let len = s.dist2_to_point(s.b).sqrt();
        let samples = len.ceil() as usize + 1;
        let mut last_centre = None;
        for k in 0..=samples {
            let t = k as f64 / samples as f64;
            let c = [0, 1, 2].map(|a| (s.a[a] + t * (s.b[a] - s.a[a])).round() as i64);
            if last_centre == Some(c) {
                continue;
            }
            last_centre = Some(c);
            for z in c[2] - reach..=c[2] + reach {
                for j in c[1] - reach..=c[1] + reach {
                    for i in c[0] - reach..=c[0] + reach {
                        if !dims.contains(i, j, z) {
                            continue;
                        }
                        if s.dist2_to([i as f64, j as f64, z as f64]) <= r2 {
                            m.set(Voxel::new(i as usize, j as usize, z as usize), true);
                        }
                    }
                }
            }
        }
    }
    m
}

/// Builds a synthetic bundle network: random segments rasterized as solid
/// tubes of radius `bundle_radius`.
pub fn generate_synthetic(spec: &SyntheticNetworkSpec) -> Result<ConductiveMatrix> {
    let segments = spec.segments()?;
    Ok(rasterize_segments(spec.dims, &segments, spec.bundle_radius))
}
