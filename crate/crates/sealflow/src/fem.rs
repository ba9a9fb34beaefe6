//! Shared finite-element machinery: bilinear quad and trilinear hex bases,
//! Gauss quadrature and surface Jacobian data.
//!
//! Local node ordering is counter-clockwise when viewed from outside the
//! solid. For a surface face with outward normal +z this is
//! `(-1,-1), (1,-1), (1,1), (-1,1)` in parent coordinates; hexes follow the
//! usual 8-node ordering with the bottom quad first and the top quad above it
//! in the same rotational sense. Contact, fluid, FSI and trapped-fluid
//! elements all rely on this ordering being consistent.

use nalgebra::{Matrix2, Vector2, Vector3};

/// Parent-space corner coordinates of the quad, in local node order.
pub const QUAD_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Parent-space corner coordinates of the hex, in local node order.
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

const GP: f64 = 0.577_350_269_189_625_76; // 1/sqrt(3)

/// 2x2 Gauss points on the quad, ordered so that point `i` is the one
/// nearest to local node `i` (weights are all 1). The refined contact-area
/// rule depends on this pairing.
pub fn quad_gauss_points() -> [[f64; 2]; 4] {
    QUAD_CORNERS.map(|c| [c[0] * GP, c[1] * GP])
}

/// 2x2x2 Gauss points on the hex, unit weights.
pub fn hex_gauss_points() -> [[f64; 3]; 8] {
    HEX_CORNERS.map(|c| [c[0] * GP, c[1] * GP, c[2] * GP])
}

/// Bilinear shape function values at a parent point.
pub fn quad_shape(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (i, c) in QUAD_CORNERS.iter().enumerate() {
        n[i] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
    }
    n
}

/// Parent-space gradients (dN/dxi, dN/deta) of the bilinear basis.
pub fn quad_shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (i, c) in QUAD_CORNERS.iter().enumerate() {
        g[i][0] = 0.25 * c[0] * (1.0 + c[1] * eta);
        g[i][1] = 0.25 * c[1] * (1.0 + c[0] * xi);
    }
    g
}

/// Trilinear shape function values at a parent point.
pub fn hex_shape(xi: f64, eta: f64, zeta: f64) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (i, c) in HEX_CORNERS.iter().enumerate() {
        n[i] = 0.125 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta) * (1.0 + c[2] * zeta);
    }
    n
}

/// Parent-space gradients of the trilinear basis.
pub fn hex_shape_grad(xi: f64, eta: f64, zeta: f64) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (i, c) in HEX_CORNERS.iter().enumerate() {
        g[i][0] = 0.125 * c[0] * (1.0 + c[1] * eta) * (1.0 + c[2] * zeta);
        g[i][1] = 0.125 * c[1] * (1.0 + c[0] * xi) * (1.0 + c[2] * zeta);
        g[i][2] = 0.125 * c[2] * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
    }
    g
}

/// Geometric data of one surface face evaluated at one Gauss point.
///
/// `j_scalar` is the area stretch |dx/dxi x dx/deta| on the (possibly tilted)
/// physical face; `j_mat` is the 2x2 in-plane map of the face projected onto
/// the z = 0 plane, used by the lubrication elements. `normal` is the unit
/// outward normal of the solid surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceGaussData {
    pub xi: [f64; 2],
    pub weight: f64,
    pub shape: [f64; 4],
    pub j_scalar: f64,
    pub normal: Vector3<f64>,
    pub j_mat: Matrix2<f64>,
    pub det_j_mat: f64,
    /// Physical (x,y) gradients of the four shape functions on the projected
    /// face: grad N = J^{-T} grad_parent N.
    pub grad_phys: [Vector2<f64>; 4],
}

/// Error raised by degenerate face geometry.
#[derive(Debug, thiserror::Error)]
#[error("degenerate surface face: {reason} (value {value:.3e})")]
pub struct DegenerateFace {
    pub reason: &'static str,
    pub value: f64,
}

/// Evaluates the surface Jacobian data of a 4-node face at the 2x2 Gauss
/// points. `coords` are the physical corner positions in local node order.
pub fn surface_jacobians(coords: &[Vector3<f64>; 4]) -> Result<[SurfaceGaussData; 4], DegenerateFace> {
    let mut out = [None; 4];
    for (k, gp) in quad_gauss_points().iter().enumerate() {
        let shape = quad_shape(gp[0], gp[1]);
        let grad = quad_shape_grad(gp[0], gp[1]);
        let mut d_xi = Vector3::zeros();
        let mut d_eta = Vector3::zeros();
        for i in 0..4 {
            d_xi += coords[i] * grad[i][0];
            d_eta += coords[i] * grad[i][1];
        }
        let cross = d_xi.cross(&d_eta);
        let j_scalar = cross.norm();
        if j_scalar <= 1e-300 {
            return Err(DegenerateFace { reason: "zero area stretch", value: j_scalar });
        }
        let normal = cross / j_scalar;
        let j_mat = Matrix2::new(d_xi.x, d_eta.x, d_xi.y, d_eta.y);
        let det_j_mat = j_mat.determinant();
        if det_j_mat <= 0.0 {
            return Err(DegenerateFace { reason: "non-positive projected Jacobian", value: det_j_mat });
        }
        let inv_t = j_mat
            .try_inverse()
            .ok_or(DegenerateFace { reason: "singular projected Jacobian", value: det_j_mat })?
            .transpose();
        let mut grad_phys = [Vector2::zeros(); 4];
        for i in 0..4 {
            grad_phys[i] = inv_t * Vector2::new(grad[i][0], grad[i][1]);
        }
        out[k] = Some(SurfaceGaussData {
            xi: *gp,
            weight: 1.0,
            shape,
            j_scalar,
            normal,
            j_mat,
            det_j_mat,
            grad_phys,
        });
    }
    Ok(out.map(|g| g.unwrap()))
}

/// Physical-gradient and volume data of a hex at one Gauss point.
#[derive(Debug, Clone, Copy)]
pub struct HexGaussData {
    pub weight: f64,
    pub det_j: f64,
    /// grad N in physical space, one 3-vector per node.
    pub grad_phys: [Vector3<f64>; 8],
}

/// Error for inverted or collapsed hexes.
#[derive(Debug, thiserror::Error)]
#[error("non-positive hex Jacobian (det J = {det:.3e})")]
pub struct BadHex {
    pub det: f64,
}

/// Evaluates physical gradients and |J| of a hex at the 2x2x2 Gauss points.
pub fn hex_jacobians(coords: &[Vector3<f64>; 8]) -> Result<[HexGaussData; 8], BadHex> {
    let mut out = [None; 8];
    for (k, gp) in hex_gauss_points().iter().enumerate() {
        let grad = hex_shape_grad(gp[0], gp[1], gp[2]);
        // J[a][b] = d x_a / d xi_b
        let mut j = nalgebra::Matrix3::<f64>::zeros();
        for i in 0..8 {
            for a in 0..3 {
                for b in 0..3 {
                    j[(a, b)] += coords[i][a] * grad[i][b];
                }
            }
        }
        let det_j = j.determinant();
        if det_j <= 0.0 {
            return Err(BadHex { det: det_j });
        }
        let inv_t = j.try_inverse().ok_or(BadHex { det: det_j })?.transpose();
        let mut grad_phys = [Vector3::zeros(); 8];
        for i in 0..8 {
            grad_phys[i] = inv_t * Vector3::new(grad[i][0], grad[i][1], grad[i][2]);
        }
        out[k] = Some(HexGaussData { weight: 1.0, det_j, grad_phys });
    }
    Ok(out.map(|g| g.unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_nodal_interpolation() {
        let n = quad_shape(-1.0, -1.0);
        assert_eq!(n, [1.0, 0.0, 0.0, 0.0]);
        let n = quad_shape(0.0, 0.0);
        for v in n {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn quad_partition_of_unity_and_grad_sum() {
        for gp in quad_gauss_points() {
            let n = quad_shape(gp[0], gp[1]);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let g = quad_shape_grad(gp[0], gp[1]);
            let sx: f64 = g.iter().map(|gi| gi[0]).sum();
            let sy: f64 = g.iter().map(|gi| gi[1]).sum();
            assert!(sx.abs() < 1e-15 && sy.abs() < 1e-15);
            assert!(gp[0].abs() < 1.0 && gp[1].abs() < 1.0);
        }
    }

    #[test]
    fn quad_gradients_match_finite_differences() {
        // 17 deterministic pseudo-random interior points.
        let mut s = 0.123_f64;
        let h = 1e-6;
        for _ in 0..17 {
            s = (s * 9301.0 + 49297.0) % 1.0;
            let xi = 1.8 * s - 0.9;
            s = (s * 9301.0 + 49297.0) % 1.0;
            let eta = 1.8 * s - 0.9;
            let g = quad_shape_grad(xi, eta);
            for i in 0..4 {
                let dx = (quad_shape(xi + h, eta)[i] - quad_shape(xi - h, eta)[i]) / (2.0 * h);
                let dy = (quad_shape(xi, eta + h)[i] - quad_shape(xi, eta - h)[i]) / (2.0 * h);
                assert!((g[i][0] - dx).abs() <= 1e-7 * (1.0 + dx.abs()));
                assert!((g[i][1] - dy).abs() <= 1e-7 * (1.0 + dy.abs()));
            }
        }
    }

    #[test]
    fn hex_nodal_values() {
        let n = hex_shape(-1.0, -1.0, -1.0);
        assert_eq!(n[0], 1.0);
        assert_eq!(n[1..].iter().sum::<f64>(), 0.0);
        let n = hex_shape(0.0, 0.0, 0.0);
        for v in n {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn hex_gradients_match_finite_differences() {
        let mut s = 0.71_f64;
        let h = 1e-6;
        for _ in 0..17 {
            let mut p = [0.0; 3];
            for q in &mut p {
                s = (s * 9301.0 + 49297.0) % 1.0;
                *q = 1.8 * s - 0.9;
            }
            let g = hex_shape_grad(p[0], p[1], p[2]);
            for i in 0..8 {
                for d in 0..3 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[d] += h;
                    pm[d] -= h;
                    let fd = (hex_shape(pp[0], pp[1], pp[2])[i] - hex_shape(pm[0], pm[1], pm[2])[i])
                        / (2.0 * h);
                    assert!((g[i][d] - fd).abs() <= 1e-7 * (1.0 + fd.abs()));
                }
            }
        }
    }

    fn unit_square_at(z: f64) -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, 0.0, z),
            Vector3::new(1.0, 0.0, z),
            Vector3::new(1.0, 1.0, z),
            Vector3::new(0.0, 1.0, z),
        ]
    }

    #[test]
    fn unit_square_jacobians() {
        let data = surface_jacobians(&unit_square_at(0.0)).unwrap();
        for g in &data {
            assert!((g.j_scalar - 0.25).abs() < 1e-14);
            assert!((g.det_j_mat - 0.25).abs() < 1e-14);
            assert!((g.normal - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
        }
        // Translation in z changes nothing.
        let data2 = surface_jacobians(&unit_square_at(-3.5)).unwrap();
        for (a, b) in data.iter().zip(data2.iter()) {
            assert_eq!(a.j_scalar, b.j_scalar);
            assert_eq!(a.det_j_mat, b.det_j_mat);
        }
    }

    #[test]
    fn tilted_square_area_stretch() {
        // Face whose projection is the unit square, tilted about the x axis:
        // physical area 1/cos(theta), projected area 1.
        let theta: f64 = 0.4;
        let t = theta.tan();
        let coords = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, t),
            Vector3::new(0.0, 1.0, t),
        ];
        let data = surface_jacobians(&coords).unwrap();
        for g in &data {
            assert!((g.j_scalar - 0.25 / theta.cos()).abs() < 1e-12);
            assert!((g.det_j_mat - 0.25).abs() < 1e-14);
            assert!((g.normal.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_rule_exact_for_bilinear_products() {
        // sum_ij int N_i N_j dGamma = area, here on a skewed planar face.
        let coords = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(2.0, 0.1, 0.0),
            Vector3::new(2.2, 1.4, 0.0),
            Vector3::new(-0.1, 1.2, 0.0),
        ];
        let data = surface_jacobians(&coords).unwrap();
        let mut total = 0.0;
        let mut area = 0.0;
        for g in &data {
            area += g.weight * g.j_scalar;
            for i in 0..4 {
                for j in 0..4 {
                    total += g.weight * g.shape[i] * g.shape[j] * g.j_scalar;
                }
            }
        }
        assert!((total - area).abs() < 1e-12 * area);
    }

    #[test]
    fn degenerate_face_is_reported() {
        let coords = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(3.0, 0.0, 0.0),
        ];
        assert!(surface_jacobians(&coords).is_err());
    }
}
