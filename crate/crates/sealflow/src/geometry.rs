//! Surface profiles, mesh generation and the interface face graph.
//!
//! All lengths are in meters. Surface heights are stored on an N x N node
//! grid (row-major, x fastest) and are non-positive: z = 0 is the rigid flat,
//! so the initial nodal gap is simply -z.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid surface parameters: {0}")]
    InvalidProfile(String),
    #[error("grid too coarse for the requested spectrum: {points_per_wavelength:.2} points per shortest wavelength (need >= 4)")]
    UnresolvedSpectrum { points_per_wavelength: f64 },
    #[error("downsample factor {factor} does not divide the face count {faces}")]
    BadDownsample { factor: usize, faces: usize },
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),
    #[error("inverted element {element}: det J = {det:.3e}")]
    InvertedElement { element: usize, det: f64 },
    #[error("height map file {path}: {reason}")]
    BadHeightFile { path: String, reason: String },
}

/// Analytic or generated description of the potential contact surface.
#[derive(Debug, Clone)]
pub enum SurfaceProfile {
    /// Uniform height z = -gap: a plane channel of constant opening.
    Flat { size: f64, gap: f64, n: usize },
    /// Extruded cosine channel with a ring-shaped "atoll" elevation whose
    /// crest reaches the plane z = 0. The simulated domain is half a
    /// wavelength wide: x in [0, wavelength/2], y in [0, channel_length].
    AtollChannel {
        amplitude: f64,
        wavelength: f64,
        channel_length: f64,
        atoll_radius: f64,
        n: usize,
    },
    /// Periodic self-affine Gaussian surface with a band-limited power-law
    /// spectrum, shifted so the highest point touches z = 0.
    RandomRough {
        size: f64,
        rms_heights: f64,
        hurst: f64,
        k_low: f64,
        k_high: f64,
        n: usize,
        seed: u64,
    },
    /// Externally measured heights from a plain-text matrix file (meters),
    /// shifted so the highest point touches z = 0.
    File { size: f64, path: String },
}

/// Nodal heights on an N x N grid spanning [0, lx] x [0, ly].
#[derive(Debug, Clone)]
pub struct HeightField {
    pub n: usize,
    pub lx: f64,
    pub ly: f64,
    /// Row-major: z[j * n + i] at (x_i, y_j).
    pub z: Vec<f64>,
}

impl HeightField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.z[j * self.n + i]
    }

    /// rms of heights about the mean, over the periodic cell (the duplicated
    /// last row/column is excluded so periodic surfaces are not double
    /// counted).
    pub fn rms(&self) -> f64 {
        let m = self.n - 1;
        let mut mean = 0.0;
        for j in 0..m {
            for i in 0..m {
                mean += self.at(i, j);
            }
        }
        mean /= (m * m) as f64;
        let mut var = 0.0;
        for j in 0..m {
            for i in 0..m {
                let d = self.at(i, j) - mean;
                var += d * d;
            }
        }
        (var / (m * m) as f64).sqrt()
    }

    /// Keeps every `factor`-th grid point; corner points are preserved.
    pub fn downsample(&self, factor: usize) -> Result<HeightField, GeometryError> {
        let faces = self.n - 1;
        if factor == 0 || faces % factor != 0 {
            return Err(GeometryError::BadDownsample { factor, faces });
        }
        let m = faces / factor;
        let mut z = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                z.push(self.at(i * factor, j * factor));
            }
        }
        Ok(HeightField { n: m + 1, lx: self.lx, ly: self.ly, z })
    }

    /// Writes the plain-text matrix format: N rows of N whitespace-separated
    /// heights in meters.
    pub fn write_text(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        for j in 0..self.n {
            for i in 0..self.n {
                if i > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{:.17e}", self.at(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the plain-text matrix format written by [`write_text`].
    pub fn read_text(path: &Path, size: f64) -> Result<HeightField, GeometryError> {
        let err = |reason: String| GeometryError::BadHeightFile {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            rows.push(row.map_err(|e| err(format!("line {}: {}", ln + 1, e)))?);
        }
        let n = rows.len();
        if n < 2 {
            return Err(err("need at least 2 rows".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(err(format!("matrix must be square ({n} rows)")));
        }
        let z: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(HeightField { n, lx: size, ly: size, z })
    }
}

/// Height of the atoll-channel profile at a point, z <= 0 on its domain.
pub fn atoll_height(x: f64, y: f64, amplitude: f64, wavelength: f64, channel_length: f64, atoll_radius: f64) -> f64 {
    let r2 = (x - 0.5 * wavelength).powi(2) + (y - 0.5 * channel_length).powi(2);
    let s = r2 / (atoll_radius * atoll_radius);
    let a = 1.0 - 2.0 * s * (1.0 - s).exp();
    amplitude * (a * (2.0 * PI * x / wavelength).cos() - 1.0)
}

impl SurfaceProfile {
    pub fn grid_points(&self) -> Option<usize> {
        match self {
            SurfaceProfile::Flat { n, .. }
            | SurfaceProfile::AtollChannel { n, .. }
            | SurfaceProfile::RandomRough { n, .. } => Some(*n),
            SurfaceProfile::File { .. } => None,
        }
    }

    /// Builds the nodal height field for this profile.
    pub fn heights(&self) -> Result<HeightField, GeometryError> {
        match *self {
            SurfaceProfile::Flat { size, gap, n } => {
                check_grid(n)?;
                if gap < 0.0 {
                    return Err(GeometryError::InvalidProfile("flat gap must be >= 0".into()));
                }
                Ok(HeightField { n, lx: size, ly: size, z: vec![-gap; n * n] })
            }
            SurfaceProfile::AtollChannel { amplitude, wavelength, channel_length, atoll_radius, n } => {
                check_grid(n)?;
                if amplitude <= 0.0 || wavelength <= 0.0 || channel_length <= 0.0 || atoll_radius <= 0.0 {
                    return Err(GeometryError::InvalidProfile(
                        "atoll parameters must be positive".into(),
                    ));
                }
                let lx = 0.5 * wavelength;
                let ly = channel_length;
                let mut z = Vec::with_capacity(n * n);
                for j in 0..n {
                    let y = ly * j as f64 / (n - 1) as f64;
                    for i in 0..n {
                        let x = lx * i as f64 / (n - 1) as f64;
                        z.push(atoll_height(x, y, amplitude, wavelength, channel_length, atoll_radius));
                    }
                }
                Ok(HeightField { n, lx, ly, z })
            }
            SurfaceProfile::RandomRough { size, rms_heights, hurst, k_low, k_high, n, seed } => {
                let mut field = generate_rough_surface(size, rms_heights, hurst, k_low, k_high, n, seed)?;
                shift_to_touch(&mut field.z);
                Ok(field)
            }
            SurfaceProfile::File { size, ref path } => {
                let mut field = HeightField::read_text(Path::new(path), size)?;
                shift_to_touch(&mut field.z);
                Ok(field)
            }
        }
    }
}

fn check_grid(n: usize) -> Result<(), GeometryError> {
    if n < 3 {
        return Err(GeometryError::InvalidProfile(format!("grid_points_per_side = {n} < 3")));
    }
    Ok(())
}

fn shift_to_touch(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for v in z.iter_mut() {
        *v -= max;
    }
}

/// Generates a periodic Gaussian random surface with isotropic power-law
/// spectrum ~ |k|^(-2(H+1)) between the cutoffs `k_low` and `k_high`, zero
/// power outside, zero mean, and rms of heights exactly `rms_heights`.
/// Deterministic for a fixed seed.
pub fn generate_rough_surface(
    size: f64,
    rms_heights: f64,
    hurst: f64,
    k_low: f64,
    k_high: f64,
    n: usize,
    seed: u64,
) -> Result<HeightField, GeometryError> {
    check_grid(n)?;
    let m = n - 1;
    if !m.is_power_of_two() {
        return Err(GeometryError::InvalidProfile(format!(
            "grid_points_per_side - 1 = {m} must be a power of two"
        )));
    }
    if !(k_low > 0.0 && k_high > k_low) {
        return Err(GeometryError::InvalidProfile("need 0 < k_low < k_high".into()));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(GeometryError::InvalidProfile(format!("hurst = {hurst} outside (0, 1)")));
    }
    if rms_heights <= 0.0 || size <= 0.0 {
        return Err(GeometryError::InvalidProfile("size and rms_heights must be positive".into()));
    }
    let shortest_wavelength = 2.0 * PI / k_high;
    let points_per_wavelength = shortest_wavelength * m as f64 / size;
    if points_per_wavelength < 4.0 {
        return Err(GeometryError::UnresolvedSpectrum { points_per_wavelength });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); m * m];
    let dk = 2.0 * PI / size;
    // Fill Hermitian pairs in a fixed scan order so the result is
    // reproducible bit-for-bit for a given seed.
    for jy in 0..m {
        for jx in 0..m {
            let idx = jy * m + jx;
            let cx = (m - jx) % m;
            let cy = (m - jy) % m;
            let conj_idx = cy * m + cx;
            if conj_idx < idx {
                continue; // partner already filled
            }
            let fx = signed_freq(jx, m);
            let fy = signed_freq(jy, m);
            let k = dk * ((fx * fx + fy * fy) as f64).sqrt();
            if k < k_low || k > k_high {
                continue;
            }
            let amp = k.powf(-(hurst + 1.0));
            if conj_idx == idx {
                let a: f64 = StandardNormal.sample(&mut rng);
                spec[idx] = Complex::new(a * amp, 0.0);
            } else {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let c = Complex::new(a, b) * (amp / 2.0_f64.sqrt());
                spec[idx] = c;
                spec[conj_idx] = c.conj();
            }
        }
    }

    ifft2_inplace(&mut spec, m);
    let mut z: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    for v in &mut z {
        *v -= mean;
    }
    let rms = (z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64).sqrt();
    if rms == 0.0 {
        return Err(GeometryError::InvalidProfile(
            "spectral band contains no grid wavenumbers".into(),
        ));
    }
    let scale = rms_heights / rms;
    for v in &mut z {
        *v *= scale;
    }

    // Expand the periodic m x m cell to the n x n node grid with wrapped
    // duplicate last row/column.
    let mut full = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            full[j * n + i] = z[(j % m) * m + (i % m)];
        }
    }
    Ok(HeightField { n, lx: size, ly: size, z: full })
}

fn signed_freq(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

fn ifft2_inplace(data: &mut [Complex<f64>], m: usize) {
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);
    // Rows.
    for row in data.chunks_exact_mut(m) {
        ifft.process(row);
    }
    // Columns.
    let mut col = vec![Complex::new(0.0, 0.0); m];
    for i in 0..m {
        for j in 0..m {
            col[j] = data[j * m + i];
        }
        ifft.process(&mut col);
        for j in 0..m {
            data[j * m + i] = col[j];
        }
    }
}

/// Named node sets of the bulk mesh boundary.
#[derive(Debug, Clone, Default)]
pub struct BoundarySets {
    pub bottom: Vec<u32>,
    pub inlet: Vec<u32>,   // y = 0 side, all depths
    pub outlet: Vec<u32>,  // y = ly side
    pub x_min: Vec<u32>,
    pub x_max: Vec<u32>,
}

/// Structured hexahedral mesh of the solid below the contact surface.
///
/// Nodes are ordered layer by layer from the bottom (k = 0) to the surface
/// (k = nz), each layer row-major in (i, j). Surface node s = j * nx + i maps
/// to bulk node `surface_offset + s`.
#[derive(Debug, Clone)]
pub struct BulkMesh {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub coords: Vec<Vector3<f64>>,
    pub hexes: Vec<[u32; 8]>,
    /// Surface faces in local CCW order seen from outside (+z), row-major in
    /// face (i, j); corner s-indices are surface-node indices.
    pub surface_faces: Vec<[u32; 4]>,
    pub boundary: BoundarySets,
    /// Surface nodal heights (z of the top layer), length nx * ny.
    pub heights: Vec<f64>,
}

impl BulkMesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }
    pub fn n_surface_nodes(&self) -> usize {
        self.nx * self.ny
    }
    pub fn surface_offset(&self) -> usize {
        self.nx * self.ny * self.nz
    }
    /// Bulk node id of surface node s.
    pub fn surface_node(&self, s: usize) -> usize {
        self.surface_offset() + s
    }
    pub fn n_faces(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }
    pub fn face_grid(&self) -> (usize, usize) {
        (self.nx - 1, self.ny - 1)
    }
    /// Apparent interface area lx * ly.
    pub fn apparent_area(&self) -> f64 {
        self.lx * self.ly
    }
    /// Corner coordinates of a surface face.
    pub fn face_coords(&self, f: usize) -> [Vector3<f64>; 4] {
        self.surface_faces[f].map(|s| self.coords[self.surface_node(s as usize)])
    }
    /// Smallest surface edge length, used for the default augmentation.
    pub fn min_surface_edge(&self) -> f64 {
        let mut min = f64::INFINITY;
        for f in 0..self.n_faces() {
            let c = self.face_coords(f);
            for e in 0..4 {
                min = min.min((c[(e + 1) % 4] - c[e]).norm());
            }
        }
        min
    }
}

/// Builds the structured bulk mesh under a height field. The top surface
/// follows the heights; the flat bottom face sits a depth `b` below the
/// lowest surface point. Layer thicknesses grow geometrically with
/// `grading_ratio` from the surface downwards.
pub fn build_bulk_mesh(
    heights: &HeightField,
    b: f64,
    nz: usize,
    grading_ratio: f64,
) -> Result<BulkMesh, GeometryError> {
    if b <= 0.0 {
        return Err(GeometryError::InvalidMesh(format!("depth B = {b} must be positive")));
    }
    if nz == 0 {
        return Err(GeometryError::InvalidMesh("nz must be >= 1".into()));
    }
    if grading_ratio < 1.0 {
        return Err(GeometryError::InvalidMesh(format!(
            "grading ratio {grading_ratio} must be >= 1"
        )));
    }
    let n = heights.n;
    let (nx, ny) = (n, n);
    let min_h = heights.z.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_bottom = min_h - b;

    // Cumulative depth fraction below the surface after each layer,
    // thicknesses t, t*r, t*r^2, ... from the surface down.
    let mut cum = vec![0.0; nz + 1];
    let mut total = 0.0;
    let mut t = 1.0;
    for j in 0..nz {
        total += t;
        cum[j + 1] = total;
        t *= grading_ratio;
    }
    for c in &mut cum {
        *c /= total;
    }

    let mut coords = Vec::with_capacity(nx * ny * (nz + 1));
    for k in 0..=nz {
        // k = 0 bottom, k = nz surface; depth fraction below surface:
        let frac = cum[nz - k];
        for j in 0..ny {
            let y = heights.ly * j as f64 / (ny - 1) as f64;
            for i in 0..nx {
                let x = heights.lx * i as f64 / (nx - 1) as f64;
                let zs = heights.at(i, j);
                let z = zs - frac * (zs - z_bottom);
                coords.push(Vector3::new(x, y, z));
            }
        }
    }

    let nid = |i: usize, j: usize, k: usize| -> u32 { ((k * ny + j) * nx + i) as u32 };
    let mut hexes = Vec::with_capacity((nx - 1) * (ny - 1) * nz);
    for k in 0..nz {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                hexes.push([
                    nid(i, j, k),
                    nid(i + 1, j, k),
                    nid(i + 1, j + 1, k),
                    nid(i, j + 1, k),
                    nid(i, j, k + 1),
                    nid(i + 1, j, k + 1),
                    nid(i + 1, j + 1, k + 1),
                    nid(i, j + 1, k + 1),
                ]);
            }
        }
    }

    let sid = |i: usize, j: usize| -> u32 { (j * nx + i) as u32 };
    let mut surface_faces = Vec::with_capacity((nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            surface_faces.push([sid(i, j), sid(i + 1, j), sid(i + 1, j + 1), sid(i, j + 1)]);
        }
    }

    let mut boundary = BoundarySets::default();
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..nx {
                let id = nid(i, j, k);
                if k == 0 {
                    boundary.bottom.push(id);
                }
                if j == 0 {
                    boundary.inlet.push(id);
                }
                if j == ny - 1 {
                    boundary.outlet.push(id);
                }
                if i == 0 {
                    boundary.x_min.push(id);
                }
                if i == nx - 1 {
                    boundary.x_max.push(id);
                }
            }
        }
    }

    let mesh = BulkMesh {
        nx,
        ny,
        nz,
        lx: heights.lx,
        ly: heights.ly,
        coords,
        hexes,
        surface_faces,
        boundary,
        heights: heights.z.clone(),
    };

    // Positive-Jacobian scan at all quadrature points.
    for (e, hex) in mesh.hexes.iter().enumerate() {
        let c = hex.map(|id| mesh.coords[id as usize]);
        if let Err(bad) = crate::fem::hex_jacobians(&c) {
            return Err(GeometryError::InvertedElement { element: e, det: bad.det });
        }
    }
    Ok(mesh)
}

/// Edge-sharing adjacency of the interface faces (von Neumann neighborhood).
#[derive(Debug, Clone)]
pub struct InterfaceGraph {
    pub n_faces: usize,
    pub neighbors: Vec<Vec<u32>>,
    pub periodic_x: bool,
}

/// Builds the 4-connected face graph of a structured (fx x fy) face grid.
/// With `periodic_x` the first and last face columns are adjacent.
pub fn build_interface_graph(fx: usize, fy: usize, periodic_x: bool) -> InterfaceGraph {
    let fid = |i: usize, j: usize| (j * fx + i) as u32;
    let mut neighbors = vec![Vec::with_capacity(4); fx * fy];
    for j in 0..fy {
        for i in 0..fx {
            let mut list = Vec::with_capacity(4);
            if i > 0 {
                list.push(fid(i - 1, j));
            } else if periodic_x && fx > 1 {
                list.push(fid(fx - 1, j));
            }
            if i + 1 < fx {
                list.push(fid(i + 1, j));
            } else if periodic_x && fx > 1 {
                list.push(fid(0, j));
            }
            if j > 0 {
                list.push(fid(i, j - 1));
            }
            if j + 1 < fy {
                list.push(fid(i, j + 1));
            }
            list.sort_unstable();
            list.dedup();
            neighbors[fid(i, j) as usize] = list;
        }
    }
    InterfaceGraph { n_faces: fx * fy, neighbors, periodic_x }
}
