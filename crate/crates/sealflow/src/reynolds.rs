//! Fluid-flow elements: weak Reynolds equation on the projected interface
//! faces, with the gap-sensitivity block for two-way coupling.
//!
//! The residual carries the 1/(12 mu) Poiseuille factor. It scales the fluid
//! rows uniformly, so dropping it (as some write-ups do) would not change the
//! converged solution; it is kept for dimensional consistency of the flux.
//!
//! The film thickness entering the Poiseuille coefficient is max(g, 0).
//! Converged states have g >= 0 wherever flow elements act, so this is not a
//! regularization of the solution; it only keeps transient Newton iterates
//! with non-admissible penetration from turning the fluid operator
//! anti-diffusive. There is no positive floor: a closed film conducts
//! nothing.

use crate::fem::SurfaceGaussData;
use nalgebra::Vector2;

/// Fluid properties of the flowing phase.
#[derive(Debug, Clone, Copy)]
pub struct FluidProperties {
    /// Dynamic viscosity [Pa s].
    pub viscosity: f64,
    pub p_inlet: f64,
    pub p_outlet: f64,
}

/// Residual and tangent blocks of one fluid-flow element.
#[derive(Debug, Clone)]
pub struct FlowBlocks {
    /// R^f_p_i, i over the four face nodes.
    pub r_p: [f64; 4],
    /// d R^f_p_i / d p_j, index [i][j].
    pub k_pp: [[f64; 4]; 4],
    /// d R^f_p_i / d g_l, index [l][i]; the assembly maps gap to u_z via
    /// dg/du_z = NU_Z. Zero in one-way mode (rigid-wall assumption).
    pub k_pg: [[f64; 4]; 4],
}

/// Evaluates one fluid-flow element. `gauss` must come from the reference
/// face geometry (small-strain frozen Jacobians); `two_way` enables the gap
/// sensitivity block.
pub fn flow_residual_tangent(
    gauss: &[SurfaceGaussData; 4],
    gaps: &[f64; 4],
    pressures: &[f64; 4],
    viscosity: f64,
    two_way: bool,
) -> FlowBlocks {
    let c = 1.0 / (12.0 * viscosity);
    let mut out = FlowBlocks { r_p: [0.0; 4], k_pp: [[0.0; 4]; 4], k_pg: [[0.0; 4]; 4] };
    for gp in gauss {
        let mut g = 0.0;
        let mut grad_p = Vector2::zeros();
        for k in 0..4 {
            g += gp.shape[k] * gaps[k];
            grad_p += gp.grad_phys[k] * pressures[k];
        }
        let film = g.max(0.0);
        let g3 = film * film * film;
        let w = c * gp.weight * gp.det_j_mat;
        for i in 0..4 {
            let gi = gp.grad_phys[i];
            out.r_p[i] += w * g3 * grad_p.dot(&gi);
            for j in 0..4 {
                out.k_pp[i][j] += w * g3 * gp.grad_phys[j].dot(&gi);
            }
            if two_way {
                let dgd = 3.0 * film * film; // one-sided: zero for g <= 0
                for l in 0..4 {
                    out.k_pg[l][i] += w * dgd * gp.shape[l] * grad_p.dot(&gi);
                }
            }
        }
    }
    out
}

/// Poiseuille flux q = -g^3/(12 mu) grad p at one Gauss point of a face.
pub fn face_flux(
    gp: &SurfaceGaussData,
    gaps: &[f64; 4],
    pressures: &[f64; 4],
    viscosity: f64,
) -> Vector2<f64> {
    let mut g = 0.0;
    let mut grad_p = Vector2::zeros();
    for k in 0..4 {
        g += gp.shape[k] * gaps[k];
        grad_p += gp.grad_phys[k] * pressures[k];
    }
    let film = g.max(0.0);
    -grad_p * (film * film * film / (12.0 * viscosity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::surface_jacobians;
    use nalgebra::Vector3;

    fn square_face(l: f64) -> [SurfaceGaussData; 4] {
        surface_jacobians(&[
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(l, 0.0, 0.0),
            Vector3::new(l, l, 0.0),
            Vector3::new(0.0, l, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_pressure_in_kernel() {
        let gauss = square_face(1e-3);
        let b = flow_residual_tangent(&gauss, &[1e-5, 2e-5, 3e-5, 4e-5], &[7e6; 4], 1.0, true);
        for r in b.r_p {
            assert!(r.abs() < 1e-20);
        }
    }

    #[test]
    fn closed_film_kills_flow() {
        let gauss = square_face(1e-3);
        let b = flow_residual_tangent(&gauss, &[0.0; 4], &[1e6, 0.0, 2e6, 5e5], 1.0, true);
        assert_eq!(b.r_p, [0.0; 4]);
        assert_eq!(b.k_pp, [[0.0; 4]; 4]);
    }

    #[test]
    fn plane_poiseuille_flux() {
        let l = 1e-3;
        let gauss = square_face(l);
        let g = 2e-5;
        let mu = 1.0;
        let dp = 1e7;
        // Linear drop along y: p = dp * (1 - y/l).
        let p = [dp, dp, 0.0, 0.0];
        for gp in &gauss {
            let q = face_flux(gp, &[g; 4], &p, mu);
            assert!(q.x.abs() < 1e-20);
            let expect = g * g * g * dp / (12.0 * mu * l);
            assert!((q.y - expect).abs() < 1e-12 * expect);
        }
        // Zero pressure gradient and zero gap both give zero flux.
        let q = face_flux(&gauss[0], &[g; 4], &[5e6; 4], mu);
        assert!(q.norm() < 1e-20);
        let q = face_flux(&gauss[0], &[0.0; 4], &p, mu);
        assert!(q.norm() < 1e-30);
    }

    #[test]
    fn tangents_match_finite_differences() {
        // Irregular planar face, mixed gaps and pressures.
        let gauss = surface_jacobians(&[
            Vector3::new(0.0, 0.0, -1e-6),
            Vector3::new(1.1e-3, 0.1e-3, 0.0),
            Vector3::new(1.2e-3, 0.9e-3, -3e-6),
            Vector3::new(-0.1e-3, 1.0e-3, 0.0),
        ])
        .unwrap();
        let gaps = [1e-5, 2e-5, 5e-6, 8e-6];
        let p = [9e6, 4e6, 1e6, 6e6];
        let mu = 0.07;
        let b0 = flow_residual_tangent(&gauss, &gaps, &p, mu, true);
        let mut max_rel: f64 = 0.0;
        let scale = b0
            .k_pp
            .iter()
            .chain(b0.k_pg.iter())
            .flatten()
            .fold(1e-300_f64, |a, &v| a.max(v.abs()));

        let hp = 1.0;
        for j in 0..4 {
            let mut pp = p;
            let mut pm = p;
            pp[j] += hp;
            pm[j] -= hp;
            let bp = flow_residual_tangent(&gauss, &gaps, &pp, mu, true);
            let bm = flow_residual_tangent(&gauss, &gaps, &pm, mu, true);
            for i in 0..4 {
                let fd = (bp.r_p[i] - bm.r_p[i]) / (2.0 * hp);
                max_rel = max_rel.max((b0.k_pp[i][j] - fd).abs() / scale);
            }
        }
        let hg = 1e-11;
        for l in 0..4 {
            let mut gp_ = gaps;
            let mut gm = gaps;
            gp_[l] += hg;
            gm[l] -= hg;
            let bp = flow_residual_tangent(&gauss, &gp_, &p, mu, true);
            let bm = flow_residual_tangent(&gauss, &gm, &p, mu, true);
            for i in 0..4 {
                let fd = (bp.r_p[i] - bm.r_p[i]) / (2.0 * hg);
                max_rel = max_rel.max((b0.k_pg[l][i] - fd).abs() / scale);
            }
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn one_way_drops_gap_block() {
        let gauss = square_face(1e-3);
        let b = flow_residual_tangent(&gauss, &[1e-5; 4], &[1e6, 2e6, 3e6, 4e6], 1.0, false);
        assert_eq!(b.k_pg, [[0.0; 4]; 4]);
        assert!(b.r_p.iter().any(|&r| r != 0.0));
    }
}
