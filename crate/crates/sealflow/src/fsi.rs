//! Fluid-structure interface elements: hydrostatic plus Poiseuille-shear
//! traction of the flowing fluid applied to the solid surface. Active in
//! two-way coupling only.
//!
//! Normals and Jacobians are evaluated on the reference geometry and never
//! updated, matching the small-deformation linearization; the consistent
//! pressure block therefore contains both the hydrostatic and the shear
//! sensitivities.

use crate::fem::SurfaceGaussData;
use nalgebra::{Vector2, Vector3};

/// Residual and tangent blocks of one FSI element.
#[derive(Debug, Clone)]
pub struct FsiBlocks {
    /// Nodal surface force R^fsi_u_i (3-vector per node).
    pub r_u: [Vector3<f64>; 4],
    /// d R^fsi_u_i / d g_k: shear-term gap sensitivity, index [k][i]; the
    /// assembly maps it to the u_z column with dg/du_z = NU_Z.
    pub k_ug: [[Vector3<f64>; 4]; 4],
    /// d R^fsi_u_i / d p_l, index [l][i].
    pub k_up: [[Vector3<f64>; 4]; 4],
}

/// Evaluates one FSI element on the reference face geometry. `include_shear`
/// keeps the (g/2) grad p traction term; dropping it quantifies the effect
/// of the shear traction on the solution.
pub fn fsi_residual_tangent(
    gauss: &[SurfaceGaussData; 4],
    gaps: &[f64; 4],
    pressures: &[f64; 4],
    include_shear: bool,
) -> FsiBlocks {
    let mut out = FsiBlocks {
        r_u: [Vector3::zeros(); 4],
        k_ug: [[Vector3::zeros(); 4]; 4],
        k_up: [[Vector3::zeros(); 4]; 4],
    };
    for gp in gauss {
        let w = gp.weight * gp.j_scalar;
        let mut p = 0.0;
        let mut grad_p = Vector2::zeros();
        for k in 0..4 {
            p += gp.shape[k] * pressures[k];
            grad_p += gp.grad_phys[k] * pressures[k];
        }
        let grad_p3 = Vector3::new(grad_p.x, grad_p.y, 0.0);
        for i in 0..4 {
            let ni = gp.shape[i];
            // Hydrostatic part: sum_j p_j int n N_i N_j J.
            out.r_u[i] += gp.normal * (w * ni * p);
            for l in 0..4 {
                out.k_up[l][i] += gp.normal * (w * ni * gp.shape[l]);
            }
            if include_shear {
                let mut g = 0.0;
                for k in 0..4 {
                    g += gp.shape[k] * gaps[k];
                }
                out.r_u[i] += grad_p3 * (0.5 * g * w * ni);
                for k in 0..4 {
                    out.k_ug[k][i] += grad_p3 * (0.5 * gp.shape[k] * w * ni);
                }
                for l in 0..4 {
                    let gl3 = Vector3::new(gp.grad_phys[l].x, gp.grad_phys[l].y, 0.0);
                    out.k_up[l][i] += gl3 * (0.5 * g * w * ni);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::surface_jacobians;

    fn flat_face(l: f64) -> [SurfaceGaussData; 4] {
        surface_jacobians(&[
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(l, 0.0, 0.0),
            Vector3::new(l, l, 0.0),
            Vector3::new(0.0, l, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn zero_pressure_zero_output() {
        let gauss = flat_face(1.0);
        let b = fsi_residual_tangent(&gauss, &[0.1; 4], &[0.0; 4], true);
        for r in b.r_u {
            assert_eq!(r, Vector3::zeros());
        }
        for row in b.k_ug {
            for v in row {
                assert_eq!(v, Vector3::zeros());
            }
        }
    }

    #[test]
    fn uniform_pressure_flat_face_forces() {
        // Uniform p, zero gradient: each node carries p * n * area / 4.
        let l = 2.0;
        let gauss = flat_face(l);
        let p = 3.0e6;
        let b = fsi_residual_tangent(&gauss, &[0.5; 4], &[p; 4], true);
        let mut total = Vector3::zeros();
        for r in b.r_u {
            assert!(r.x.abs() < 1e-9 && r.y.abs() < 1e-9);
            assert!((r.z - p * l * l / 4.0).abs() < 1e-9 * p * l * l);
            total += r;
        }
        // Resultant equals p * area along the normal.
        assert!((total.z - p * l * l).abs() < 1e-10 * p * l * l);
    }

    #[test]
    fn shear_term_vanishes_for_closed_gap() {
        let gauss = flat_face(1.0);
        let p = [1e6, 2e6, 3e6, 4e6];
        let with = fsi_residual_tangent(&gauss, &[0.0; 4], &p, true);
        let without = fsi_residual_tangent(&gauss, &[0.0; 4], &p, false);
        for i in 0..4 {
            assert!((with.r_u[i] - without.r_u[i]).norm() < 1e-18);
        }
    }

    #[test]
    fn tangents_match_finite_differences() {
        let gauss = surface_jacobians(&[
            Vector3::new(0.0, 0.0, -2e-6),
            Vector3::new(1.0e-3, 0.0, -1e-6),
            Vector3::new(1.1e-3, 1.0e-3, 0.0),
            Vector3::new(0.1e-3, 0.9e-3, -3e-6),
        ])
        .unwrap();
        let gaps = [2e-6, 1e-6, 0.0, 3e-6];
        let p = [9e6, 4e6, 1e6, 6e6];
        let b0 = fsi_residual_tangent(&gauss, &gaps, &p, true);
        let scale = b0
            .k_up
            .iter()
            .flatten()
            .chain(b0.k_ug.iter().flatten())
            .fold(1e-300_f64, |a, v| a.max(v.norm()));
        let mut max_rel: f64 = 0.0;

        let hg = 1e-10;
        for k in 0..4 {
            let mut gp_ = gaps;
            let mut gm = gaps;
            gp_[k] += hg;
            gm[k] -= hg;
            let bp = fsi_residual_tangent(&gauss, &gp_, &p, true);
            let bm = fsi_residual_tangent(&gauss, &gm, &p, true);
            for i in 0..4 {
                let fd = (bp.r_u[i] - bm.r_u[i]) / (2.0 * hg);
                max_rel = max_rel.max((b0.k_ug[k][i] - fd).norm() / scale);
            }
        }
        let hp = 1.0;
        for l in 0..4 {
            let mut pp = p;
            let mut pm = p;
            pp[l] += hp;
            pm[l] -= hp;
            let bp = fsi_residual_tangent(&gauss, &gaps, &pp, true);
            let bm = fsi_residual_tangent(&gauss, &gaps, &pm, true);
            for i in 0..4 {
                let fd = (bp.r_u[i] - bm.r_u[i]) / (2.0 * hp);
                max_rel = max_rel.max((b0.k_up[l][i] - fd).norm() / scale);
            }
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn pressure_pushes_surface_away_from_flat() {
        // n points toward the flat (+z); with p > 0 the residual acts as a
        // stored-energy gradient whose equilibrium displaces the surface in
        // -z. The work increment of the traction for a -z virtual motion is
        // positive: -R_u . du > 0 with du_z < 0.
        let gauss = flat_face(1.0);
        let b = fsi_residual_tangent(&gauss, &[1e-6; 4], &[5e6; 4], true);
        let du = Vector3::new(0.0, 0.0, -1e-8);
        let mut work = 0.0;
        for r in b.r_u {
            work += -r.dot(&du);
        }
        assert!(work > 0.0);
    }
}
