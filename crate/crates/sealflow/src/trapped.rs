//! Trapped-fluid pools: nonlinear compressibility law, pool volume from the
//! gap field, and the superelement residual with its rank-one tangent.
//!
//! One superelement spans all faces of a pool. Its DOFs are the z
//! displacements of every node of those faces; the volume is linear in them
//! (frozen normals, small strain), so the tangent is exactly the rank-one
//! outer product of the volume gradient.

use crate::contact::NU_Z;

/// Constitutive constants of the trapped fluid: bulk modulus
/// K = K0 + K1 * p.
#[derive(Debug, Clone, Copy)]
pub struct TrappedFluid {
    pub k0: f64,
    pub k1: f64,
}

/// One trapped pool with its formation state.
#[derive(Debug, Clone)]
pub struct TrappedZone {
    pub id: u32,
    /// Interface face ids of the pool.
    pub faces: Vec<u32>,
    /// Volume at the moment the pool formed.
    pub v0: f64,
    /// Fluid pressure at the moment the pool formed.
    pub p0: f64,
    /// Load step at which the pool was first identified.
    pub created_step: u32,
    /// True once the pool has survived a converged load step.
    pub existed_at_previous_step: bool,
}

/// p(V) of Eq. p = (p0 + K0/K1) (V/V0)^(-K1) - K0/K1; strictly decreasing
/// in V.
pub fn trapped_pressure(v: f64, v0: f64, p0: f64, fluid: &TrappedFluid) -> f64 {
    assert!(v > 0.0 && v0 > 0.0, "trapped volume must be positive");
    let a = p0 + fluid.k0 / fluid.k1;
    a * (v / v0).powf(-fluid.k1) - fluid.k0 / fluid.k1
}

/// Inverse law V*(p), the volume at which the pool pressure equals p.
pub fn trapped_volume_at_pressure(p: f64, v0: f64, p0: f64, fluid: &TrappedFluid) -> f64 {
    let a = p0 + fluid.k0 / fluid.k1;
    v0 * ((p + fluid.k0 / fluid.k1) / a).powf(-1.0 / fluid.k1)
}

/// dp/dV with the sign flipped: the (positive) rank-one tangent coefficient
/// sigma = (p0 + K0/K1) (K1/V0) (V/V0)^(-K1-1).
pub fn trapped_stiffness_coefficient(v: f64, v0: f64, p0: f64, fluid: &TrappedFluid) -> f64 {
    let a = p0 + fluid.k0 / fluid.k1;
    a * (fluid.k1 / v0) * (v / v0).powf(-fluid.k1 - 1.0)
}

/// Per-face volume quadrature weights: a_j = sum_gp N_j (-n . nu) J w for
/// the four local nodes, evaluated once on the reference geometry.
#[derive(Debug, Clone, Copy)]
pub struct FaceVolumeWeights(pub [f64; 4]);

impl FaceVolumeWeights {
    pub fn from_gauss(gauss: &[crate::fem::SurfaceGaussData; 4]) -> Self {
        let mut a = [0.0; 4];
        for gp in gauss {
            // -n . nu = n_z for the flat with nu = -e_z.
            let f = gp.normal.z * gp.j_scalar * gp.weight;
            for j in 0..4 {
                a[j] += gp.shape[j] * f;
            }
        }
        FaceVolumeWeights(a)
    }
}

/// Pool volume V = sum over faces of sum_j a_j g_j.
pub fn pool_volume(
    faces: &[u32],
    face_nodes: impl Fn(u32) -> [u32; 4],
    face_weights: impl Fn(u32) -> FaceVolumeWeights,
    gap_of_node: impl Fn(u32) -> f64,
) -> f64 {
    let mut v = 0.0;
    for &f in faces {
        let nodes = face_nodes(f);
        let w = face_weights(f).0;
        for j in 0..4 {
            v += w[j] * gap_of_node(nodes[j]);
        }
    }
    v
}

/// Gradient of the pool volume with respect to nodal z displacements,
/// accumulated as (surface node, dV/du_z) pairs with one entry per node.
pub fn pool_volume_gradient(
    faces: &[u32],
    face_nodes: impl Fn(u32) -> [u32; 4],
    face_weights: impl Fn(u32) -> FaceVolumeWeights,
) -> Vec<(u32, f64)> {
    let mut acc: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for &f in faces {
        let nodes = face_nodes(f);
        let w = face_weights(f).0;
        for j in 0..4 {
            // dg/du_z = NU_Z.
            *acc.entry(nodes[j]).or_insert(0.0) += w[j] * NU_Z;
        }
    }
    acc.into_iter().collect()
}

/// Superelement residual and rank-one tangent data of one pool:
/// R^tf = -p(V) dV/dU and K^tf = sigma (dV/dU)(dV/dU)^T.
#[derive(Debug, Clone)]
pub struct TrappedEval {
    pub volume: f64,
    pub pressure: f64,
    pub sigma: f64,
    /// (surface node, dV/du_z) pairs.
    pub grad: Vec<(u32, f64)>,
}

/// Fraction of the formation volume used as an evaluation floor: Newton
/// iterates can overshoot into non-physical V <= 0 before the pool pressure
/// pushes them back; the law is evaluated at max(V, floor) so the restoring
/// force stays defined. Converged pools sit far above the floor.
const VOLUME_FLOOR: f64 = 1e-9;

pub fn trapped_residual_tangent(
    zone: &TrappedZone,
    fluid: &TrappedFluid,
    face_nodes: impl Fn(u32) -> [u32; 4] + Copy,
    face_weights: impl Fn(u32) -> FaceVolumeWeights + Copy,
    gap_of_node: impl Fn(u32) -> f64,
) -> TrappedEval {
    let volume = pool_volume(&zone.faces, face_nodes, face_weights, gap_of_node);
    if zone.v0 <= 0.0 {
        // Degenerate pocket formed with no fluid volume: inert.
        return TrappedEval { volume, pressure: 0.0, sigma: 0.0, grad: Vec::new() };
    }
    let v_eval = volume.max(VOLUME_FLOOR * zone.v0);
    let pressure = trapped_pressure(v_eval, zone.v0, zone.p0, fluid);
    let sigma = trapped_stiffness_coefficient(v_eval, zone.v0, zone.p0, fluid);
    let grad = pool_volume_gradient(&zone.faces, face_nodes, face_weights);
    TrappedEval { volume, pressure, sigma, grad }
}
