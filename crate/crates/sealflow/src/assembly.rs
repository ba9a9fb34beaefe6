//! Problem setup (reference-geometry element data, elastic stiffness) and
//! per-iteration assembly of the monolithic residual and tangent.
//!
//! The global DOF vector is (u; lambda; p). Contact elements contribute on
//! every face in every iteration (the augmented Lagrangian keeps inactive
//! faces regularized); fluid and FSI elements contribute on FLOW faces;
//! trapped superelements per registry. Pressure DOFs not touched by any FLOW
//! face are pinned to zero through plain identity rows, so the system
//! dimension never changes. The trapped rank-one tangents are kept out of
//! the sparse matrix and folded into the solve as low-rank updates.

use crate::contact::{self, MortarFace, NU_Z};
use crate::dofs::{DofMap, LateralBc};
use crate::elasticity::{hex_stiffness, ElasticMaterial};
use crate::fem::{surface_jacobians, SurfaceGaussData};
use crate::fsi::fsi_residual_tangent;
use crate::geometry::{BulkMesh, GeometryError, InterfaceGraph};
use crate::partition::FaceLabel;
use crate::reynolds::{flow_residual_tangent, FluidProperties};
use crate::trapped::{FaceVolumeWeights, TrappedFluid, TrappedZone};
use faer::sparse::Triplet;

/// Coupling flavor of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    OneWay,
    TwoWayNoTrap,
    TwoWayFull,
}

impl CouplingMode {
    pub fn two_way(self) -> bool {
        self != CouplingMode::OneWay
    }
    pub fn traps(self) -> bool {
        self == CouplingMode::TwoWayFull
    }
}

/// Reference-geometry data of one interface face.
#[derive(Debug, Clone)]
pub struct FaceData {
    /// Surface-node indices of the corners.
    pub snodes: [u32; 4],
    pub gauss: [SurfaceGaussData; 4],
    pub mortar: MortarFace,
    pub vol_weights: FaceVolumeWeights,
}

/// Compressed sparse rows over the full DOF set, used for the constant
/// elastic operator.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    pub fn mat_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[e] * x[self.col[e] as usize];
            }
            out[r] += acc;
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("face {face}: {source}")]
    Face {
        face: usize,
        source: crate::fem::DegenerateFace,
    },
    #[error("hex {element}: {source}")]
    Hex {
        element: usize,
        source: crate::fem::BadHex,
    },
}

/// Everything fixed for a run: mesh, reference element data, DOF layout and
/// the constant elastic stiffness.
pub struct Problem {
    pub mesh: BulkMesh,
    pub graph: InterfaceGraph,
    pub dofs: DofMap,
    pub material: ElasticMaterial,
    pub fluid: FluidProperties,
    pub trapped_fluid: TrappedFluid,
    /// Augmentation parameter [N/m^5].
    pub epsilon: f64,
    pub include_shear: bool,
    pub reference_gap: f64,
    pub lateral: LateralBc,
    pub faces: Vec<FaceData>,
    /// Initial nodal gap per surface node (height below the flat).
    pub g0: Vec<f64>,
    elastic: CsrMatrix,
    elastic_kff: Vec<Triplet<u32, u32, f64>>,
    pub inlet_faces: Vec<u32>,
    pub outlet_faces: Vec<u32>,
}

pub struct ProblemOptions {
    pub epsilon: Option<f64>,
    pub include_shear: bool,
    /// Reference gap h_ref of the transmissivity normalization: the channel
    /// amplitude for deterministic profiles, the rms of heights for rough
    /// surfaces.
    pub reference_gap: f64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self { epsilon: None, include_shear: true, reference_gap: 1.0 }
    }
}

impl Problem {
    pub fn build(
        mesh: BulkMesh,
        lateral: LateralBc,
        material: ElasticMaterial,
        fluid: FluidProperties,
        trapped_fluid: TrappedFluid,
        options: ProblemOptions,
    ) -> Result<Problem, ProblemError> {
        let (fx, fy) = mesh.face_grid();
        let graph = crate::geometry::build_interface_graph(fx, fy, lateral == LateralBc::PeriodicX);
        let dofs = DofMap::build(&mesh, lateral);

        let mut faces = Vec::with_capacity(mesh.n_faces());
        for f in 0..mesh.n_faces() {
            let coords = mesh.face_coords(f);
            let gauss =
                surface_jacobians(&coords).map_err(|source| ProblemError::Face { face: f, source })?;
            let mortar = contact::mortar_weights(&coords)
                .map_err(|source| ProblemError::Face { face: f, source })?;
            faces.push(FaceData {
                snodes: mesh.surface_faces[f],
                gauss,
                mortar,
                vol_weights: FaceVolumeWeights::from_gauss(&gauss),
            });
        }

        let g0: Vec<f64> = mesh.heights.iter().map(|&h| -h).collect();

        // Constant elastic stiffness: raw element triplets, merged once.
        let mut raw: Vec<(u32, u32, f64)> = Vec::with_capacity(mesh.hexes.len() * 576);
        for (e, hex) in mesh.hexes.iter().enumerate() {
            let coords = hex.map(|n| mesh.coords[n as usize]);
            let ke = hex_stiffness(&coords, &material)
                .map_err(|source| ProblemError::Hex { element: e, source })?;
            let dof_of = |a: usize, c: usize| dofs.u_dof(hex[a] as usize, c);
            for a in 0..8 {
                for c1 in 0..3 {
                    let d1 = dof_of(a, c1);
                    for b in 0..8 {
                        for c2 in 0..3 {
                            let v = ke[(3 * a + c1, 3 * b + c2)];
                            if v != 0.0 {
                                raw.push((d1, dof_of(b, c2), v));
                            }
                        }
                    }
                }
            }
        }
        raw.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(raw.len() / 2);
        for (r, c, v) in raw {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let n = dofs.n_dofs;
        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col = Vec::with_capacity(merged.len());
        let mut val = Vec::with_capacity(merged.len());
        let mut elastic_kff = Vec::new();
        for &(r, c, v) in &merged {
            col.push(c);
            val.push(v);
            let fr = dofs.free_index[r as usize];
            let fc = dofs.free_index[c as usize];
            if fr != u32::MAX && fc != u32::MAX {
                elastic_kff.push(Triplet::new(fr, fc, v));
            }
        }
        let elastic = CsrMatrix { n, row_ptr, col, val };

        let inlet_faces: Vec<u32> = (0..fx as u32).collect();
        let outlet_faces: Vec<u32> = (((fy - 1) * fx) as u32..(fy * fx) as u32).collect();

        let epsilon = options.epsilon.unwrap_or_else(|| {
            let h = mesh.min_surface_edge();
            0.01 * material.effective_modulus() / (h * h * h)
        });

        Ok(Problem {
            mesh,
            graph,
            dofs,
            material,
            fluid,
            trapped_fluid,
            epsilon,
            include_shear: options.include_shear,
            reference_gap: options.reference_gap,
            lateral,
            faces,
            g0,
            elastic,
            elastic_kff,
            inlet_faces,
            outlet_faces,
        })
    }

    /// Dirichlet seed faces for the FLOW flood: faces owning at least one
    /// inlet or outlet pressure node.
    pub fn seed_faces(&self) -> Vec<u32> {
        let mut s = self.inlet_faces.clone();
        s.extend_from_slice(&self.outlet_faces);
        s
    }

    /// Nodal gaps g = g0 + nu . u for every surface node.
    pub fn gaps(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dofs.n_snodes)
            .map(|s| self.g0[s] + NU_Z * v[self.dofs.surface_uz(&self.mesh, s) as usize])
            .collect()
    }

    /// Per-face nodal activity and the per-face "any node active" flag.
    pub fn classify_faces(&self, gaps: &[f64], v: &[f64]) -> (Vec<[bool; 4]>, Vec<bool>) {
        let mut node_active = Vec::with_capacity(self.faces.len());
        let mut face_active = Vec::with_capacity(self.faces.len());
        for face in &self.faces {
            let g = face.snodes.map(|s| gaps[s as usize]);
            let lam = face.snodes.map(|s| v[self.dofs.lam_dof(s as usize) as usize]);
            let (_, active) = contact::classify(&face.mortar, &g, &lam, self.epsilon);
            node_active.push(active);
            face_active.push(active.iter().any(|&a| a));
        }
        (node_active, face_active)
    }

    /// Pool volume of a face set for a given displacement state, used both
    /// for the running zones and for formation volumes from the previous
    /// converged step.
    pub fn volume_of_faces(&self, faces: &[u32], gaps: &[f64]) -> f64 {
        crate::trapped::pool_volume(
            faces,
            |f| self.faces[f as usize].snodes,
            |f| self.faces[f as usize].vol_weights,
            |s| gaps[s as usize],
        )
    }
}

/// One rank-one tangent term sigma * w w^T in free-DOF indices.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub sigma: f64,
    pub w: Vec<(u32, f64)>,
}

/// Assembled residual (full DOF space) and free-system tangent.
pub struct Assembled {
    pub r: Vec<f64>,
    pub triplets: Vec<Triplet<u32, u32, f64>>,
    pub rank_one: Vec<RankOne>,
    /// Current pressure of each zone evaluated during assembly, aligned
    /// with the `zones` argument.
    pub zone_pressures: Vec<f64>,
    pub zone_volumes: Vec<f64>,
}

pub fn assemble(
    problem: &Problem,
    v: &[f64],
    gaps: &[f64],
    labels: &[FaceLabel],
    node_active: &[[bool; 4]],
    zones: &[TrappedZone],
    mode: CouplingMode,
) -> Assembled {
    let dofs = &problem.dofs;
    let n = dofs.n_dofs;
    let mut r = vec![0.0; n];
    problem.elastic.mat_vec_into(v, &mut r);

    let mut triplets = problem.elastic_kff.clone();
    let free = |d: u32| dofs.free_index[d as usize];
    let push = |triplets: &mut Vec<Triplet<u32, u32, f64>>, d1: u32, d2: u32, val: f64| {
        let (f1, f2) = (free(d1), free(d2));
        if f1 != u32::MAX && f2 != u32::MAX && val != 0.0 {
            triplets.push(Triplet::new(f1, f2, val));
        }
    };

    let two_way = mode.two_way();
    let mut flow_pdof = vec![false; n];
    let mut fluid_diag = vec![0.0; n];

    for (fi, face) in problem.faces.iter().enumerate() {
        let g = face.snodes.map(|s| gaps[s as usize]);
        let lam_dofs = face.snodes.map(|s| dofs.lam_dof(s as usize));
        let uz_dofs = face.snodes.map(|s| dofs.surface_uz(&problem.mesh, s as usize));
        let lam = lam_dofs.map(|d| v[d as usize]);

        // Contact element on every face.
        let blocks =
            contact::contact_residual_tangent(&face.mortar, &g, &lam, problem.epsilon, &node_active[fi]);
        for j in 0..4 {
            r[uz_dofs[j] as usize] += NU_Z * blocks.r_u_coeff[j];
            for k in 0..4 {
                push(&mut triplets, uz_dofs[j], uz_dofs[k], blocks.k_uu[j][k]);
            }
        }
        for i in 0..4 {
            r[lam_dofs[i] as usize] += blocks.r_lam[i];
            push(&mut triplets, lam_dofs[i], lam_dofs[i], blocks.k_lamlam[i]);
            for j in 0..4 {
                let c = NU_Z * blocks.k_ulam[i][j];
                push(&mut triplets, uz_dofs[j], lam_dofs[i], c);
                push(&mut triplets, lam_dofs[i], uz_dofs[j], c);
            }
        }

        if labels[fi] != FaceLabel::Flow {
            continue;
        }
        let p_dofs = face.snodes.map(|s| dofs.p_dof(s as usize));
        for d in p_dofs {
            flow_pdof[d as usize] = true;
        }
        let pf = p_dofs.map(|d| v[d as usize]);

        // Fluid-flow element.
        let fb = flow_residual_tangent(&face.gauss, &g, &pf, problem.fluid.viscosity, two_way);
        for i in 0..4 {
            r[p_dofs[i] as usize] += fb.r_p[i];
            fluid_diag[p_dofs[i] as usize] += fb.k_pp[i][i];
            for j in 0..4 {
                push(&mut triplets, p_dofs[i], p_dofs[j], fb.k_pp[i][j]);
            }
            if two_way {
                for l in 0..4 {
                    push(&mut triplets, p_dofs[i], uz_dofs[l], NU_Z * fb.k_pg[l][i]);
                }
            }
        }

        // FSI element (two-way only).
        if two_way {
            let sb = fsi_residual_tangent(&face.gauss, &g, &pf, problem.include_shear);
            let node_ids = face.snodes.map(|s| problem.mesh.surface_node(s as usize));
            for i in 0..4 {
                for c in 0..3 {
                    let d = dofs.u_dof(node_ids[i], c);
                    r[d as usize] += sb.r_u[i][c];
                    for k in 0..4 {
                        push(&mut triplets, d, uz_dofs[k], NU_Z * sb.k_ug[k][i][c]);
                    }
                    for l in 0..4 {
                        push(&mut triplets, d, p_dofs[l], sb.k_up[l][i][c]);
                    }
                }
            }
        }
    }

    // Trapped superelements: residual rows plus rank-one tangent terms.
    let mut rank_one = Vec::new();
    let mut zone_pressures = Vec::with_capacity(zones.len());
    let mut zone_volumes = Vec::with_capacity(zones.len());
    if mode.traps() {
        for zone in zones {
            if zone.faces.is_empty() {
                zone_pressures.push(0.0);
                zone_volumes.push(0.0);
                continue;
            }
            let eval = crate::trapped::trapped_residual_tangent(
                zone,
                &problem.trapped_fluid,
                |f| problem.faces[f as usize].snodes,
                |f| problem.faces[f as usize].vol_weights,
                |s| gaps[s as usize],
            );
            zone_pressures.push(eval.pressure);
            zone_volumes.push(eval.volume);
            // Fold gradient entries by global DOF (periodic ties can map two
            // surface nodes onto one DOF).
            let mut by_dof: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
            for (snode, w) in eval.grad {
                *by_dof.entry(dofs.surface_uz(&problem.mesh, snode as usize)).or_insert(0.0) += w;
            }
            let mut w_free = Vec::with_capacity(by_dof.len());
            for (&d, &w) in &by_dof {
                r[d as usize] += -eval.pressure * w;
                let f = free(d);
                if f != u32::MAX {
                    w_free.push((f, w));
                }
            }
            if eval.sigma > 0.0 && !w_free.is_empty() {
                rank_one.push(RankOne { sigma: eval.sigma, w: w_free });
            }
        }
    } else {
        zone_pressures.resize(zones.len(), 0.0);
        zone_volumes.resize(zones.len(), 0.0);
    }

    // Identity rows pin pressure DOFs that no FLOW face touches, and DOFs
    // whose every adjacent film is fully closed at this iterate (their fluid
    // rows are empty; such faces cannot stay FLOW at convergence).
    let mut done = vec![false; n];
    for s in 0..dofs.n_snodes {
        let d = dofs.p_dof(s);
        if done[d as usize] {
            continue;
        }
        done[d as usize] = true;
        if dofs.prescribed[d as usize] {
            continue;
        }
        if flow_pdof[d as usize] && fluid_diag[d as usize] != 0.0 {
            continue;
        }
        r[d as usize] += v[d as usize];
        push(&mut triplets, d, d, 1.0);
    }

    Assembled { r, triplets, rank_one, zone_pressures, zone_volumes }
}

/// Residual norms of the three DOF families plus the displacement reaction
/// norm over the prescribed displacement DOFs.
pub struct ResidualNorms {
    pub r_u: f64,
    pub r_u_reaction: f64,
    pub r_lambda_inf: f64,
    pub r_p_inf: f64,
}

pub fn residual_norms(problem: &Problem, r: &[f64]) -> ResidualNorms {
    let dofs = &problem.dofs;
    let n_u = 3 * dofs.n_nodes;
    // u DOFs occupy the contiguous leading block of the numbering; lambda
    // and p follow. Recover family membership through the maps.
    let mut seen = vec![0u8; dofs.n_dofs];
    for node in 0..dofs.n_nodes {
        for c in 0..3 {
            seen[dofs.u_dof(node, c) as usize] = 1;
        }
    }
    for s in 0..dofs.n_snodes {
        seen[dofs.lam_dof(s) as usize] = 2;
        seen[dofs.p_dof(s) as usize] = 3;
    }
    let _ = n_u;
    let mut ru2 = 0.0;
    let mut react2 = 0.0;
    let mut rl: f64 = 0.0;
    let mut rp: f64 = 0.0;
    for d in 0..dofs.n_dofs {
        let val = r[d];
        match seen[d] {
            1 => {
                if dofs.prescribed[d] {
                    react2 += val * val;
                } else {
                    ru2 += val * val;
                }
            }
            2 => rl = rl.max(val.abs()),
            3 => {
                if !dofs.prescribed[d] {
                    rp = rp.max(val.abs());
                }
            }
            _ => {}
        }
    }
    ResidualNorms {
        r_u: ru2.sqrt(),
        r_u_reaction: react2.sqrt(),
        r_lambda_inf: rl,
        r_p_inf: rp,
    }
}
