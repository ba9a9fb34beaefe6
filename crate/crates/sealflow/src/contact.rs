//! Face-to-rigid-flat contact elements with augmented Lagrangian treatment.
//!
//! Every interface face carries a contact element at all times; nodal
//! activity is decided per face by the sign of the augmented multiplier
//! lambda_hat_i = lambda_i + eps * gtilde_i (active when <= 0, ties count as
//! active). The rigid flat normal is fixed, nu = (0, 0, -1), so the gap law
//! g = g0 + nu . u couples only the z displacement: dg/du_z = -1.

use crate::fem::{surface_jacobians, DegenerateFace};
use nalgebra::Vector3;

/// z component of the outward normal of the rigid flat (nu = -e_z), i.e.
/// dg/du_z for every surface node.
pub const NU_Z: f64 = -1.0;

/// Mortar weight matrix of one face: I_ij = int N_i N_j J dxi deta.
#[derive(Debug, Clone, Copy)]
pub struct MortarFace {
    pub weights: [[f64; 4]; 4],
    pub area: f64,
}

/// Computes the mortar weights of a face from its corner coordinates.
pub fn mortar_weights(coords: &[Vector3<f64>; 4]) -> Result<MortarFace, DegenerateFace> {
    let gauss = surface_jacobians(coords)?;
    let mut w = [[0.0; 4]; 4];
    let mut area = 0.0;
    for gp in &gauss {
        area += gp.weight * gp.j_scalar;
        for i in 0..4 {
            for j in 0..4 {
                w[i][j] += gp.weight * gp.shape[i] * gp.shape[j] * gp.j_scalar;
            }
        }
    }
    Ok(MortarFace { weights: w, area })
}

/// gtilde_i = sum_j I_ij g_j.
pub fn weighted_gaps(mortar: &MortarFace, gaps: &[f64; 4]) -> [f64; 4] {
    let mut wg = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            wg[i] += mortar.weights[i][j] * gaps[j];
        }
    }
    wg
}

/// Augmented multipliers and the per-node activity of one face.
pub fn classify(
    mortar: &MortarFace,
    gaps: &[f64; 4],
    lambda: &[f64; 4],
    eps: f64,
) -> ([f64; 4], [bool; 4]) {
    let wg = weighted_gaps(mortar, gaps);
    let mut hat = [0.0; 4];
    let mut active = [false; 4];
    for i in 0..4 {
        hat[i] = lambda[i] + eps * wg[i];
        active[i] = hat[i] <= 0.0;
    }
    (hat, active)
}

/// Residual and tangent blocks of one contact element.
///
/// Displacement entries act on the z DOF only; the caller applies the nu
/// factors: R_u[j].z = NU_Z * r_u_coeff[j], K_uu zz-block = k_uu[j][k]
/// (nu_z^2 = 1 already included), K_ulam[(j z), i] = NU_Z * k_ulam[i][j].
#[derive(Debug, Clone)]
pub struct ContactBlocks {
    /// sum over active i of lambda_hat_i I_ij, per node j.
    pub r_u_coeff: [f64; 4],
    /// gtilde_i when active, -lambda_i / eps when inactive.
    pub r_lam: [f64; 4],
    /// eps * sum over active i of I_ij I_ik, du_z x du_z coupling.
    pub k_uu: [[f64; 4]; 4],
    /// I_ij for active i (zero rows for inactive i); index [i][j].
    pub k_ulam: [[f64; 4]; 4],
    /// -1/eps on inactive diagonal entries, 0 on active.
    pub k_lamlam: [f64; 4],
}

/// Evaluates the contact element with a frozen activity pattern. The pattern
/// normally comes from [`classify`] on the same state; freezing it separately
/// keeps finite-difference tangent checks meaningful across the branch.
pub fn contact_residual_tangent(
    mortar: &MortarFace,
    gaps: &[f64; 4],
    lambda: &[f64; 4],
    eps: f64,
    active: &[bool; 4],
) -> ContactBlocks {
    let wg = weighted_gaps(mortar, gaps);
    let mut out = ContactBlocks {
        r_u_coeff: [0.0; 4],
        r_lam: [0.0; 4],
        k_uu: [[0.0; 4]; 4],
        k_ulam: [[0.0; 4]; 4],
        k_lamlam: [0.0; 4],
    };
    for i in 0..4 {
        if active[i] {
            let hat = lambda[i] + eps * wg[i];
            out.r_lam[i] = wg[i];
            for j in 0..4 {
                out.r_u_coeff[j] += hat * mortar.weights[i][j];
                out.k_ulam[i][j] = mortar.weights[i][j];
                for k in 0..4 {
                    out.k_uu[j][k] += eps * mortar.weights[i][j] * mortar.weights[i][k];
                }
            }
        } else {
            out.r_lam[i] = -lambda[i] / eps;
            out.k_lamlam[i] = -1.0 / eps;
        }
    }
    out
}
