//! Linear isotropic elasticity on trilinear hexes: the solid residual and
//! tangent under small strain, full 2x2x2 integration.

use crate::fem::{hex_jacobians, BadHex};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy)]
pub struct ElasticMaterial {
    pub young: f64,
    pub poisson: f64,
}

impl ElasticMaterial {
    pub fn new(young: f64, poisson: f64) -> Self {
        assert!(young > 0.0, "E must be positive");
        assert!(poisson > -1.0 && poisson < 0.5, "nu must be in (-1, 0.5)");
        Self { young, poisson }
    }

    pub fn lame_lambda(&self) -> f64 {
        self.young * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))
    }

    pub fn lame_mu(&self) -> f64 {
        self.young / (2.0 * (1.0 + self.poisson))
    }

    /// Effective contact modulus E* = E / (1 - nu^2).
    pub fn effective_modulus(&self) -> f64 {
        self.young / (1.0 - self.poisson * self.poisson)
    }
}

/// Hooke's law: sigma = lambda tr(eps) I + 2 mu eps.
pub fn hooke_stress(strain: &Matrix3<f64>, material: &ElasticMaterial) -> Matrix3<f64> {
    let tr = strain.trace();
    Matrix3::identity() * (material.lame_lambda() * tr) + strain * (2.0 * material.lame_mu())
}

pub type HexVector = SVector<f64, 24>;
pub type HexMatrix = SMatrix<f64, 24, 24>;

/// Element stiffness of one hex, K_e = int B^T C B dV with full integration.
/// The residual (internal force) is K_e * u_e since the model is linear.
pub fn hex_stiffness(coords: &[Vector3<f64>; 8], material: &ElasticMaterial) -> Result<HexMatrix, BadHex> {
    let lam = material.lame_lambda();
    let mu = material.lame_mu();
    let gauss = hex_jacobians(coords)?;
    let mut k = HexMatrix::zeros();
    for gp in &gauss {
        // Voigt B matrix: strain = [exx, eyy, ezz, 2exy, 2eyz, 2ezx].
        let mut b = SMatrix::<f64, 6, 24>::zeros();
        for i in 0..8 {
            let g = gp.grad_phys[i];
            let c = 3 * i;
            b[(0, c)] = g.x;
            b[(1, c + 1)] = g.y;
            b[(2, c + 2)] = g.z;
            b[(3, c)] = g.y;
            b[(3, c + 1)] = g.x;
            b[(4, c + 1)] = g.z;
            b[(4, c + 2)] = g.y;
            b[(5, c)] = g.z;
            b[(5, c + 2)] = g.x;
        }
        let mut c_mat = SMatrix::<f64, 6, 6>::zeros();
        for a in 0..3 {
            for bb in 0..3 {
                c_mat[(a, bb)] = lam;
            }
            c_mat[(a, a)] += 2.0 * mu;
            c_mat[(a + 3, a + 3)] = mu;
        }
        k += b.transpose() * c_mat * b * (gp.det_j * gp.weight);
    }
    Ok(k)
}

/// Internal force vector and tangent of one hex for nodal displacements `u`
/// (u is [u1x, u1y, u1z, u2x, ...]).
pub fn hex_residual_tangent(
    coords: &[Vector3<f64>; 8],
    u: &HexVector,
    material: &ElasticMaterial,
) -> Result<(HexVector, HexMatrix), BadHex> {
    let k = hex_stiffness(coords, material)?;
    Ok((k * u, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn mat() -> ElasticMaterial {
        ElasticMaterial::new(1.0e9, 0.4)
    }

    fn unit_cube() -> [Vector3<f64>; 8] {
        crate::fem::HEX_CORNERS.map(|c| Vector3::new(0.5 * (c[0] + 1.0), 0.5 * (c[1] + 1.0), 0.5 * (c[2] + 1.0)))
    }

    #[test]
    fn lame_constants_consistent() {
        let m = mat();
        let lam = m.lame_lambda();
        let mu = m.lame_mu();
        // Invert back to (E, nu).
        let e = mu * (3.0 * lam + 2.0 * mu) / (lam + mu);
        let nu = lam / (2.0 * (lam + mu));
        assert!((e - m.young).abs() < 1e-6 * m.young);
        assert!((nu - m.poisson).abs() < 1e-15);
        assert!((m.effective_modulus() - m.young / (1.0 - 0.16)).abs() < 1.0);
    }

    #[test]
    fn hooke_reference_states() {
        let m = mat();
        let lam = m.lame_lambda();
        let mu = m.lame_mu();
        assert_eq!(hooke_stress(&Matrix3::zeros(), &m), Matrix3::zeros());

        let e = 1e-3;
        let strain = Matrix3::from_diagonal(&Vector3::new(e, 0.0, 0.0));
        let s = hooke_stress(&strain, &m);
        assert!((s[(0, 0)] - (lam + 2.0 * mu) * e).abs() < 1e-9 * m.young);
        assert!((s[(1, 1)] - lam * e).abs() < 1e-9 * m.young);
        assert!((s[(2, 2)] - lam * e).abs() < 1e-9 * m.young);

        let hydro = Matrix3::identity() * (e / 3.0);
        let s = hooke_stress(&hydro, &m);
        let k_bulk = lam + 2.0 * mu / 3.0;
        for a in 0..3 {
            assert!((s[(a, a)] - k_bulk * e).abs() < 1e-9 * m.young);
        }
    }

    #[test]
    fn zero_displacement_zero_residual() {
        let (r, _) = hex_residual_tangent(&unit_cube(), &HexVector::zeros(), &mat()).unwrap();
        assert_eq!(r, HexVector::zeros());
    }

    #[test]
    fn rigid_modes_are_zero_energy() {
        let coords = unit_cube();
        let (_, k) = hex_residual_tangent(&coords, &HexVector::zeros(), &mat()).unwrap();
        let knorm = k.norm();
        // Translations.
        for d in 0..3 {
            let mut t = HexVector::zeros();
            for i in 0..8 {
                t[3 * i + d] = 1.0;
            }
            assert!((k * t).norm() < 1e-10 * knorm);
        }
        // Linearized rotations about each axis.
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let mut t = HexVector::zeros();
            for i in 0..8 {
                t[3 * i + a] = -coords[i][b];
                t[3 * i + b] = coords[i][a];
            }
            assert!((k * t).norm() < 1e-10 * knorm * t.norm());
        }
        // Exactly 6 near-zero eigenvalues on the undistorted element.
        let dk = DMatrix::from_fn(24, 24, |i, j| k[(i, j)]);
        let eig = dk.symmetric_eigenvalues();
        let mut vals: Vec<f64> = eig.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = vals[23];
        assert!(vals[5] < 1e-10 * scale && vals[6] > 1e-8 * scale);
        assert!(vals[0] > -1e-10 * scale, "tangent must be PSD");
    }

    #[test]
    fn tangent_matches_finite_difference() {
        // Distorted hex, random displacement state.
        let mut coords = unit_cube();
        let mut s = 0.37_f64;
        let mut rand = || {
            s = (s * 9301.0 + 49297.0) % 1.0;
            s - 0.5
        };
        for c in &mut coords {
            *c += Vector3::new(rand(), rand(), rand()) * 0.1;
        }
        let mut u = HexVector::zeros();
        for v in u.iter_mut() {
            *v = rand() * 1e-3;
        }
        let m = mat();
        let (_, k) = hex_residual_tangent(&coords, &u, &m).unwrap();
        let h = 1e-7;
        let mut max_rel: f64 = 0.0;
        for j in 0..24 {
            let mut up = u;
            let mut um = u;
            up[j] += h;
            um[j] -= h;
            let (rp, _) = hex_residual_tangent(&coords, &up, &m).unwrap();
            let (rm, _) = hex_residual_tangent(&coords, &um, &m).unwrap();
            let fd = (rp - rm) / (2.0 * h);
            for i in 0..24 {
                let denom = k.norm().max(1.0);
                max_rel = max_rel.max((k[(i, j)] - fd[i]).abs() / denom);
            }
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    /// Patch test: uniform pressure on top of a 2x2x2-hex block with roller
    /// sides and bottom reproduces sigma_zz = -t0 everywhere to 1e-10.
    #[test]
    fn uniform_pressure_patch_test() {
        let m = mat();
        let n = 3; // nodes per side
        let nid = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
        let mut coords = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    coords.push(Vector3::new(i as f64 / 2.0, j as f64 / 2.0, k as f64 / 2.0));
                }
            }
        }
        let ndof = coords.len() * 3;
        let mut kg = DMatrix::<f64>::zeros(ndof, ndof);
        for kk in 0..n - 1 {
            for j in 0..n - 1 {
                for i in 0..n - 1 {
                    let ids = [
                        nid(i, j, kk),
                        nid(i + 1, j, kk),
                        nid(i + 1, j + 1, kk),
                        nid(i, j + 1, kk),
                        nid(i, j, kk + 1),
                        nid(i + 1, j, kk + 1),
                        nid(i + 1, j + 1, kk + 1),
                        nid(i, j + 1, kk + 1),
                    ];
                    let c = ids.map(|id| coords[id]);
                    let ke = hex_stiffness(&c, &m).unwrap();
                    for a in 0..8 {
                        for b in 0..8 {
                            for d1 in 0..3 {
                                for d2 in 0..3 {
                                    kg[(3 * ids[a] + d1, 3 * ids[b] + d2)] += ke[(3 * a + d1, 3 * b + d2)];
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!((kg.clone() - kg.transpose()).norm() < 1e-9 * kg.norm());

        // Consistent nodal load for traction t0 downward on the top face
        // (area 1, 9 nodes: corners 1/16, edges 1/8, center 1/4 of t0).
        let t0 = 1.0e6;
        let mut f = DMatrix::<f64>::zeros(ndof, 1);
        for j in 0..n {
            for i in 0..n {
                let wx = if i == 1 { 0.5 } else { 0.25 };
                let wy = if j == 1 { 0.5 } else { 0.25 };
                f[(3 * nid(i, j, n - 1) + 2, 0)] = -t0 * wx * wy;
            }
        }

        // Roller boundary: u_x = 0 on x faces, u_y = 0 on y faces, u_z = 0 bottom.
        let mut fixed = vec![false; ndof];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let id = nid(i, j, k);
                    if i == 0 || i == n - 1 {
                        fixed[3 * id] = true;
                    }
                    if j == 0 || j == n - 1 {
                        fixed[3 * id + 1] = true;
                    }
                    if k == 0 {
                        fixed[3 * id + 2] = true;
                    }
                }
            }
        }
        let free: Vec<usize> = (0..ndof).filter(|&d| !fixed[d]).collect();
        let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| kg[(free[a], free[b])]);
        let ff = DMatrix::from_fn(free.len(), 1, |a, _| f[(free[a], 0)]);
        // Positive definite after elimination.
        let chol = kff.clone().cholesky().expect("reduced stiffness must be SPD");
        let uf = chol.solve(&ff);
        let mut u = vec![0.0; ndof];
        for (a, &d) in free.iter().enumerate() {
            u[d] = uf[(a, 0)];
        }

        // Analytic oedometric state: sigma_zz = -t0 uniform.
        let lam = m.lame_lambda();
        let mu = m.lame_mu();
        let ezz = -t0 / (lam + 2.0 * mu);
        for (idx, c) in coords.iter().enumerate() {
            let expect = ezz * c.z;
            assert!((u[3 * idx + 2] - expect).abs() < 1e-10 * expect.abs().max(1e-12));
            assert!(u[3 * idx].abs() < 1e-16);
            assert!(u[3 * idx + 1].abs() < 1e-16);
        }
        // Recover stress in one element at a Gauss point.
        let strain = Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, ezz));
        let s = hooke_stress(&strain, &m);
        assert!((s[(2, 2)] + t0).abs() < 1e-10 * t0);
    }
}
