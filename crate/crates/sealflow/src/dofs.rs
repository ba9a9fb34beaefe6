//! Global DOF layout: displacements for every bulk node, one contact
//! multiplier and one fluid pressure per surface node, with optional
//! periodic ties in x and Dirichlet bookkeeping.
//!
//! The layout is fixed at mesh build time; interface status changes never
//! change the system dimension. Periodic ties identify the x = L node column
//! with x = 0, so tied nodes share global indices.

use crate::geometry::BulkMesh;

/// Solid boundary condition flavor of the two studied set-ups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateralBc {
    /// u_x = 0 on both x side walls (symmetry walls of the channel problem).
    RollerX,
    /// Periodic in x: displacements, multipliers and pressures tied.
    PeriodicX,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_nodes: usize,
    pub n_snodes: usize,
    pub n_dofs: usize,
    u: Vec<u32>,
    lam: Vec<u32>,
    p: Vec<u32>,
    /// True for Dirichlet-driven DOFs (rollers, bottom u_z, inlet/outlet p).
    pub prescribed: Vec<bool>,
    /// Position of each DOF in the free system, u32::MAX if prescribed.
    pub free_index: Vec<u32>,
    pub free_dofs: Vec<u32>,
    /// Unique u_z DOFs of the bottom face (driven by the approach).
    pub bottom_uz: Vec<u32>,
    /// Unique DOFs prescribed to zero (rollers).
    pub zero_dofs: Vec<u32>,
    /// Unique pressure DOFs at the inlet / outlet Dirichlet sides.
    pub p_inlet: Vec<u32>,
    pub p_outlet: Vec<u32>,
}

impl DofMap {
    pub fn u_dof(&self, node: usize, comp: usize) -> u32 {
        self.u[3 * node + comp]
    }
    /// u_z DOF of a surface node (by surface index).
    pub fn surface_uz(&self, mesh: &BulkMesh, snode: usize) -> u32 {
        self.u_dof(mesh.surface_node(snode), 2)
    }
    pub fn lam_dof(&self, snode: usize) -> u32 {
        self.lam[snode]
    }
    pub fn p_dof(&self, snode: usize) -> u32 {
        self.p[snode]
    }
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn build(mesh: &BulkMesh, lateral: LateralBc) -> DofMap {
        let n_nodes = mesh.n_nodes();
        let n_snodes = mesh.n_surface_nodes();
        let (nx, ny) = (mesh.nx, mesh.ny);
        let periodic = lateral == LateralBc::PeriodicX;

        // Master node of each node: with periodic x the i = nx-1 column maps
        // onto i = 0.
        let master = |node: usize| -> usize {
            if !periodic {
                return node;
            }
            let per_layer = nx * ny;
            let (layer, rem) = (node / per_layer, node % per_layer);
            let (j, i) = (rem / nx, rem % nx);
            if i == nx - 1 {
                (layer * ny + j) * nx
            } else {
                node
            }
        };

        let mut u = vec![u32::MAX; 3 * n_nodes];
        let mut next: u32 = 0;
        for node in 0..n_nodes {
            let m = master(node);
            if m == node {
                for c in 0..3 {
                    u[3 * node + c] = next;
                    next += 1;
                }
            }
        }
        for node in 0..n_nodes {
            let m = master(node);
            if m != node {
                for c in 0..3 {
                    u[3 * node + c] = u[3 * m + c];
                }
            }
        }

        let s_off = mesh.surface_offset();
        let mut lam = vec![u32::MAX; n_snodes];
        let mut p = vec![u32::MAX; n_snodes];
        for s in 0..n_snodes {
            if master(s_off + s) == s_off + s {
                lam[s] = next;
                next += 1;
            }
        }
        for s in 0..n_snodes {
            let m = master(s_off + s);
            if m != s_off + s {
                lam[s] = lam[m - s_off];
            }
        }
        for s in 0..n_snodes {
            if master(s_off + s) == s_off + s {
                p[s] = next;
                next += 1;
            }
        }
        for s in 0..n_snodes {
            let m = master(s_off + s);
            if m != s_off + s {
                p[s] = p[m - s_off];
            }
        }
        let n_dofs = next as usize;

        let mut prescribed = vec![false; n_dofs];
        let mut bottom_uz = Vec::new();
        let mut zero_dofs = Vec::new();
        for &node in &mesh.boundary.bottom {
            bottom_uz.push(u[3 * node as usize + 2]);
        }
        for &node in mesh.boundary.inlet.iter().chain(mesh.boundary.outlet.iter()) {
            zero_dofs.push(u[3 * node as usize + 1]); // u_y = 0
        }
        if lateral == LateralBc::RollerX {
            for &node in mesh.boundary.x_min.iter().chain(mesh.boundary.x_max.iter()) {
                zero_dofs.push(u[3 * node as usize]); // u_x = 0
            }
        }
        let mut p_inlet = Vec::new();
        let mut p_outlet = Vec::new();
        for j in [0usize, ny - 1] {
            for i in 0..nx {
                let s = j * nx + i;
                if j == 0 {
                    p_inlet.push(p[s]);
                } else {
                    p_outlet.push(p[s]);
                }
            }
        }
        for list in [&mut bottom_uz, &mut zero_dofs, &mut p_inlet, &mut p_outlet] {
            list.sort_unstable();
            list.dedup();
        }
        for &d in bottom_uz.iter().chain(&zero_dofs).chain(&p_inlet).chain(&p_outlet) {
            prescribed[d as usize] = true;
        }

        let mut free_index = vec![u32::MAX; n_dofs];
        let mut free_dofs = Vec::with_capacity(n_dofs);
        for d in 0..n_dofs {
            if !prescribed[d] {
                free_index[d] = free_dofs.len() as u32;
                free_dofs.push(d as u32);
            }
        }

        DofMap {
            n_nodes,
            n_snodes,
            n_dofs,
            u,
            lam,
            p,
            prescribed,
            free_index,
            free_dofs,
            bottom_uz,
            zero_dofs,
            p_inlet,
            p_outlet,
        }
    }
}
