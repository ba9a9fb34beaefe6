//! Randomized element-level verification: every element tangent is compared
//! against central finite differences of its residual with frozen statuses,
//! over randomized geometries and states. Used by the `selfcheck` CLI
//! subcommand and the acceptance suite.

use crate::contact::{self, NU_Z};
use crate::elasticity::{hex_residual_tangent, ElasticMaterial, HexVector};
use crate::fem::surface_jacobians;
use crate::fsi::fsi_residual_tangent;
use crate::reynolds::flow_residual_tangent;
use crate::trapped::{self, FaceVolumeWeights, TrappedFluid, TrappedZone};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub element: &'static str,
    pub trials: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

const TOL: f64 = 1e-5;

/// Runs all element checks with `trials` randomized states each. With
/// `perturb` set, every tangent is deliberately scaled by (1 + 1e-3) to make
/// the suite fail; this exists to verify that the harness actually detects
/// broken tangents.
pub fn run_all(trials: usize, seed: u64, perturb: bool) -> Vec<CheckResult> {
    let bias = if perturb { 1.0 + 1e-3 } else { 1.0 };
    vec![
        check_hex(trials, seed, bias),
        check_contact(trials, seed + 1, bias),
        check_flow(trials, seed + 2, bias),
        check_fsi(trials, seed + 3, bias),
        check_trapped(trials, seed + 4, bias),
    ]
}

fn random_face(rng: &mut ChaCha8Rng) -> [Vector3<f64>; 4] {
    let l = 1e-3;
    loop {
        let mut c = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(l, 0.0, 0.0),
            Vector3::new(l, l, 0.0),
            Vector3::new(0.0, l, 0.0),
        ];
        for p in &mut c {
            p.x += rng.gen_range(-0.15 * l..0.15 * l);
            p.y += rng.gen_range(-0.15 * l..0.15 * l);
            p.z += rng.gen_range(-0.02 * l..0.0);
        }
        if surface_jacobians(&c).is_ok() {
            return c;
        }
    }
}

fn check_hex(trials: usize, seed: u64, bias: f64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let material = ElasticMaterial::new(1.0e9, 0.4);
    let mut max_rel: f64 = 0.0;
    for _ in 0..trials {
        let mut coords = crate::fem::HEX_CORNERS
            .map(|c| Vector3::new(c[0], c[1], c[2]) * 0.5e-3);
        for p in &mut coords {
            *p += Vector3::new(
                rng.gen_range(-5e-5..5e-5),
                rng.gen_range(-5e-5..5e-5),
                rng.gen_range(-5e-5..5e-5),
            );
        }
        let mut u = HexVector::zeros();
        for x in u.iter_mut() {
            *x = rng.gen_range(-1e-6..1e-6);
        }
        let (_, k) = match hex_residual_tangent(&coords, &u, &material) {
            Ok(rk) => rk,
            Err(_) => continue,
        };
        let scale = k.norm();
        let h = 1e-9;
        for j in 0..24 {
            let mut up = u;
            let mut um = u;
            up[j] += h;
            um[j] -= h;
            let (rp, _) = hex_residual_tangent(&coords, &up, &material).unwrap();
            let (rm, _) = hex_residual_tangent(&coords, &um, &material).unwrap();
            for i in 0..24 {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                max_rel = max_rel.max((k[(i, j)] * bias - fd).abs() / scale);
            }
        }
    }
    CheckResult { element: "hex", trials, max_rel_error: max_rel, tolerance: TOL }
}

fn check_contact(trials: usize, seed: u64, bias: f64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for _ in 0..trials {
        let coords = random_face(&mut rng);
        let mortar = contact::mortar_weights(&coords).unwrap();
        let eps = 10f64.powf(rng.gen_range(13.0..16.0));
        let gaps: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2e-6..4e-6));
        let lam: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-5e5..5e4));
        let (_, active) = contact::classify(&mortar, &gaps, &lam, eps);
        let b0 = contact::contact_residual_tangent(&mortar, &gaps, &lam, eps, &active);
        let scale = b0
            .k_uu
            .iter()
            .flatten()
            .chain(b0.k_ulam.iter().flatten())
            .fold(1.0 / eps, |a, &v| a.max(v.abs()));
        // u_z direction.
        let h = 1e-10;
        for k in 0..4 {
            let mut gp = gaps;
            let mut gm = gaps;
            gp[k] += NU_Z * h;
            gm[k] -= NU_Z * h;
            let bp = contact::contact_residual_tangent(&mortar, &gp, &lam, eps, &active);
            let bm = contact::contact_residual_tangent(&mortar, &gm, &lam, eps, &active);
            for j in 0..4 {
                let fd = NU_Z * (bp.r_u_coeff[j] - bm.r_u_coeff[j]) / (2.0 * h);
                max_rel = max_rel.max((b0.k_uu[j][k] * bias - fd).abs() / scale);
            }
            for i in 0..4 {
                let fd = (bp.r_lam[i] - bm.r_lam[i]) / (2.0 * h);
                let k_lu = b0.k_ulam[i][k] * NU_Z;
                max_rel = max_rel.max((k_lu * bias - fd).abs() / scale);
            }
        }
        // lambda direction.
        let hl = 1.0;
        for i in 0..4 {
            let mut lp = lam;
            let mut lm = lam;
            lp[i] += hl;
            lm[i] -= hl;
            let bp = contact::contact_residual_tangent(&mortar, &gaps, &lp, eps, &active);
            let bm = contact::contact_residual_tangent(&mortar, &gaps, &lm, eps, &active);
            let fd = (bp.r_lam[i] - bm.r_lam[i]) / (2.0 * hl);
            max_rel = max_rel.max((b0.k_lamlam[i] * bias - fd).abs() / scale);
            for j in 0..4 {
                let fd = NU_Z * (bp.r_u_coeff[j] - bm.r_u_coeff[j]) / (2.0 * hl);
                let k_ul = NU_Z * b0.k_ulam[i][j];
                max_rel = max_rel.max((k_ul * bias - fd).abs() / scale);
            }
        }
    }
    CheckResult { element: "contact", trials, max_rel_error: max_rel, tolerance: TOL }
}

fn check_flow(trials: usize, seed: u64, bias: f64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for _ in 0..trials {
        let coords = random_face(&mut rng);
        let gauss = surface_jacobians(&coords).unwrap();
        let gaps: [f64; 4] = std::array::from_fn(|_| rng.gen_range(1e-6..3e-5));
        let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1e7));
        let mu = rng.gen_range(0.01..2.0);
        let b0 = flow_residual_tangent(&gauss, &gaps, &p, mu, true);
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
                max_rel = max_rel.max((b0.k_pp[i][j] * bias - fd).abs() / scale);
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
                max_rel = max_rel.max((b0.k_pg[l][i] * bias - fd).abs() / scale);
            }
        }
    }
    CheckResult { element: "flow", trials, max_rel_error: max_rel, tolerance: TOL }
}

fn check_fsi(trials: usize, seed: u64, bias: f64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for _ in 0..trials {
        let coords = random_face(&mut rng);
        let gauss = surface_jacobians(&coords).unwrap();
        let gaps: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..3e-5));
        let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1e7));
        let b0 = fsi_residual_tangent(&gauss, &gaps, &p, true);
        let scale = b0
            .k_up
            .iter()
            .flatten()
            .chain(b0.k_ug.iter().flatten())
            .fold(1e-300_f64, |a, v| a.max(v.norm()));
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
                max_rel = max_rel.max((b0.k_ug[k][i] * bias - fd).norm() / scale);
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
                max_rel = max_rel.max((b0.k_up[l][i] * bias - fd).norm() / scale);
            }
        }
    }
    CheckResult { element: "fsi", trials, max_rel_error: max_rel, tolerance: TOL }
}

fn check_trapped(trials: usize, seed: u64, bias: f64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fluid = TrappedFluid { k0: 2.0e9, k1: 9.25 };
    let mut max_rel: f64 = 0.0;
    for _ in 0..trials {
        // Two-face pool with randomized flat-ish geometry.
        let f0 = random_face(&mut rng);
        let mut f1 = f0;
        let shift = f0[1] - f0[0];
        for p in &mut f1 {
            *p += shift;
        }
        let nodes = [[0u32, 1, 2, 3], [1, 4, 5, 2]];
        let weights = [
            FaceVolumeWeights::from_gauss(&surface_jacobians(&f0).unwrap()),
            FaceVolumeWeights::from_gauss(&surface_jacobians(&f1).unwrap()),
        ];
        let mut gaps: Vec<f64> = (0..6).map(|_| rng.gen_range(1e-6..3e-6)).collect();
        let area: f64 = weights.iter().map(|w| w.0.iter().sum::<f64>()).sum();
        let zone = TrappedZone {
            id: 1,
            faces: vec![0, 1],
            v0: area * 2.5e-6,
            p0: rng.gen_range(0.0..1e6),
            created_step: 0,
            existed_at_previous_step: true,
        };
        let eval = |g: &Vec<f64>| {
            trapped::trapped_residual_tangent(
                &zone,
                &fluid,
                |f| nodes[f as usize],
                |f| weights[f as usize],
                |n| g[n as usize],
            )
        };
        let e0 = eval(&gaps);
        let scale = e0.sigma * e0.grad.iter().map(|(_, w)| w * w).sum::<f64>();
        let h = 1e-12;
        for (col, &(ncol, wcol)) in e0.grad.clone().iter().enumerate() {
            gaps[ncol as usize] += NU_Z * h;
            let ep = eval(&gaps);
            gaps[ncol as usize] -= 2.0 * NU_Z * h;
            let em = eval(&gaps);
            gaps[ncol as usize] += NU_Z * h;
            for (row, &(_, wrow)) in e0.grad.iter().enumerate() {
                let fd = (-ep.pressure * ep.grad[row].1 + em.pressure * em.grad[row].1) / (2.0 * h);
                let k = e0.sigma * wrow * wcol;
                max_rel = max_rel.max((k * bias - fd).abs() / scale);
            }
            let _ = col;
        }
    }
    CheckResult { element: "trapped", trials, max_rel_error: max_rel, tolerance: TOL }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_elements_pass_with_consistent_tangents() {
        let results = run_all(20, 42, false);
        assert_eq!(results.len(), 5);
        for r in &results {
            assert!(r.passed(), "{}: max rel error {}", r.element, r.max_rel_error);
        }
        let names: Vec<_> = results.iter().map(|r| r.element).collect();
        assert_eq!(names, vec!["hex", "contact", "flow", "fsi", "trapped"]);
    }

    #[test]
    fn perturbed_tangents_are_detected() {
        let results = run_all(5, 42, true);
        assert!(results.iter().any(|r| !r.passed()));
    }
}
