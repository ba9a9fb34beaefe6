//! Derived interface quantities and field export: real contact area by both
//! methods, mean flux and effective transmissivity, legacy-VTK writers and
//! the per-step CSV log. All floats are written with 17 significant digits.

use crate::assembly::Problem;
use crate::partition::FaceLabel;
use crate::reynolds::face_flux;
use crate::solver::StepSummary;
use nalgebra::{Matrix3, Vector3};
use std::io::{self, Write};
use std::path::Path;

/// Sum of full face areas over faces with at least one active node.
pub fn contact_area_straightforward(problem: &Problem, node_active: &[[bool; 4]]) -> f64 {
    let mut area = 0.0;
    for (f, face) in problem.faces.iter().enumerate() {
        if node_active[f].iter().any(|&a| a) {
            area += face.mortar.area;
        }
    }
    area
}

/// Refined method: per face, only the Gauss-point areas nearest to active
/// nodes count (Gauss point i is paired with node i by construction).
pub fn contact_area_refined(problem: &Problem, node_active: &[[bool; 4]]) -> f64 {
    let mut area = 0.0;
    for (f, face) in problem.faces.iter().enumerate() {
        for i in 0..4 {
            if node_active[f][i] {
                area += face.gauss[i].weight * face.gauss[i].j_scalar;
            }
        }
    }
    area
}

/// Mean y-flux over the apparent area: quadrature of q_y over FLOW faces,
/// zero elsewhere.
pub fn mean_flux_y(problem: &Problem, labels: &[FaceLabel], gaps: &[f64], v: &[f64]) -> f64 {
    let mut q = 0.0;
    for (f, face) in problem.faces.iter().enumerate() {
        if labels[f] != FaceLabel::Flow {
            continue;
        }
        let g = face.snodes.map(|s| gaps[s as usize]);
        let p = face.snodes.map(|s| v[problem.dofs.p_dof(s as usize) as usize]);
        for gp in &face.gauss {
            let flux = face_flux(gp, &g, &p, problem.fluid.viscosity);
            q += flux.y * gp.det_j_mat * gp.weight;
        }
    }
    q / problem.mesh.apparent_area()
}

/// Effective transmissivity K_eff = -12 mu Q L / (h_ref^3 (p_out - p_in)).
pub fn effective_transmissivity(problem: &Problem, mean_flux: f64) -> f64 {
    let dp = problem.fluid.p_outlet - problem.fluid.p_inlet;
    assert!(dp != 0.0, "effective transmissivity needs p_in != p_out");
    let h = problem.reference_gap;
    -12.0 * problem.fluid.viscosity * mean_flux * problem.mesh.ly / (h * h * h * dp)
}

/// Discrete boundary fluxes: sums of the fluid residual rows at the inlet
/// and outlet Dirichlet pressure DOFs. At a converged state these balance to
/// solver precision.
pub fn boundary_fluxes(problem: &Problem, r: &[f64]) -> (f64, f64) {
    let qin: f64 = problem.dofs.p_inlet.iter().map(|&d| r[d as usize]).sum();
    let qout: f64 = problem.dofs.p_outlet.iter().map(|&d| r[d as usize]).sum();
    (qin, qout)
}

fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Per-step scalar log. The column order is fixed:
/// step, approach, p_ext, p_ext_over_estar, k_eff, area_frac_straightforward,
/// area_frac_refined, n_tf, max_trapped_pressure, newton_iterations,
/// final_status_changes.
pub struct CsvWriter {
    file: std::fs::File,
}

pub const CSV_HEADER: &str = "step,approach,p_ext,p_ext_over_estar,k_eff,area_frac_straightforward,area_frac_refined,n_tf,max_trapped_pressure,newton_iterations,final_status_changes";

impl CsvWriter {
    pub fn create(path: &Path) -> io::Result<CsvWriter> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "{CSV_HEADER}")?;
        Ok(CsvWriter { file })
    }

    /// Opens for appending without rewriting the header (restarted runs).
    pub fn append(path: &Path) -> io::Result<CsvWriter> {
        let file = std::fs::OpenOptions::new().append(true).open(path)?;
        Ok(CsvWriter { file })
    }

    pub fn write_row(&mut self, s: &StepSummary, effective_modulus: f64) -> io::Result<()> {
        writeln!(
            self.file,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.step,
            fmt(s.approach),
            fmt(s.p_ext),
            fmt(s.p_ext / effective_modulus),
            fmt(s.k_eff),
            fmt(s.area_frac_straightforward),
            fmt(s.area_frac_refined),
            s.n_tf,
            fmt(s.max_trapped_pressure),
            s.newton_iterations,
            s.final_status_changes
        )?;
        self.file.flush()
    }
}

/// Legacy-VTK ASCII unstructured grid of the interface: nodal p, lambda,
/// gap and u_z, cell status labels (0 = CONTACT, 1 = FLOW, 2+k = TRAP(k),
/// -1 = NONE).
pub fn write_surface_vtk(
    problem: &Problem,
    v: &[f64],
    labels: &[FaceLabel],
    path: &Path,
) -> io::Result<()> {
    let mesh = &problem.mesh;
    let n = mesh.n_surface_nodes();
    let gaps = problem.gaps(v);
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\ninterface fields\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {n} double\n"));
    for s in 0..n {
        let c = mesh.coords[mesh.surface_node(s)];
        out.push_str(&format!("{} {} {}\n", fmt(c.x), fmt(c.y), fmt(c.z)));
    }
    let m = mesh.n_faces();
    out.push_str(&format!("CELLS {m} {}\n", 5 * m));
    for f in 0..m {
        let fc = mesh.surface_faces[f];
        out.push_str(&format!("4 {} {} {} {}\n", fc[0], fc[1], fc[2], fc[3]));
    }
    out.push_str(&format!("CELL_TYPES {m}\n"));
    for _ in 0..m {
        out.push_str("9\n");
    }
    out.push_str(&format!("POINT_DATA {n}\n"));
    let scalar = |out: &mut String, name: &str, get: &dyn Fn(usize) -> f64| {
        out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for s in 0..n {
            out.push_str(&fmt(get(s)));
            out.push('\n');
        }
    };
    scalar(&mut out, "pressure", &|s| v[problem.dofs.p_dof(s) as usize]);
    scalar(&mut out, "lambda", &|s| v[problem.dofs.lam_dof(s) as usize]);
    scalar(&mut out, "gap", &|s| gaps[s]);
    scalar(&mut out, "u_z", &|s| {
        v[problem.dofs.surface_uz(mesh, s) as usize]
    });
    out.push_str(&format!("CELL_DATA {m}\nSCALARS status int 1\nLOOKUP_TABLE default\n"));
    for l in labels {
        out.push_str(&format!("{}\n", l.encode()));
    }
    std::fs::write(path, out)
}

/// Bulk VTK with the displacement vector and element-center sigma_zz.
pub fn write_bulk_vtk(problem: &Problem, v: &[f64], path: &Path) -> io::Result<()> {
    let mesh = &problem.mesh;
    let n = mesh.n_nodes();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nbulk fields\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {n} double\n"));
    for c in &mesh.coords {
        out.push_str(&format!("{} {} {}\n", fmt(c.x), fmt(c.y), fmt(c.z)));
    }
    let m = mesh.hexes.len();
    out.push_str(&format!("CELLS {m} {}\n", 9 * m));
    for h in &mesh.hexes {
        out.push_str(&format!(
            "8 {} {} {} {} {} {} {} {}\n",
            h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7]
        ));
    }
    out.push_str(&format!("CELL_TYPES {m}\n"));
    for _ in 0..m {
        out.push_str("12\n");
    }
    out.push_str(&format!("POINT_DATA {n}\nVECTORS displacement double\n"));
    for node in 0..n {
        out.push_str(&format!(
            "{} {} {}\n",
            fmt(v[problem.dofs.u_dof(node, 0) as usize]),
            fmt(v[problem.dofs.u_dof(node, 1) as usize]),
            fmt(v[problem.dofs.u_dof(node, 2) as usize])
        ));
    }
    out.push_str(&format!("CELL_DATA {m}\nSCALARS sigma_zz double 1\nLOOKUP_TABLE default\n"));
    for hex in &mesh.hexes {
        let coords = hex.map(|id| mesh.coords[id as usize]);
        let grads = crate::fem::hex_shape_grad(0.0, 0.0, 0.0);
        // Jacobian at the element center.
        let mut j = Matrix3::<f64>::zeros();
        for i in 0..8 {
            for a in 0..3 {
                for b in 0..3 {
                    j[(a, b)] += coords[i][a] * grads[i][b];
                }
            }
        }
        let inv_t = j.try_inverse().unwrap().transpose();
        let mut grad_u = Matrix3::<f64>::zeros();
        for (i, node) in hex.iter().enumerate() {
            let gp = inv_t * Vector3::new(grads[i][0], grads[i][1], grads[i][2]);
            for a in 0..3 {
                let ua = v[problem.dofs.u_dof(*node as usize, a) as usize];
                for b in 0..3 {
                    grad_u[(a, b)] += ua * gp[b];
                }
            }
        }
        let strain = (grad_u + grad_u.transpose()) * 0.5;
        let sigma = crate::elasticity::hooke_stress(&strain, &problem.material);
        out.push_str(&fmt(sigma[(2, 2)]));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Per-iteration label dump: text header plus one byte per face (row-major),
/// the encoded label clamped to 0..255.
pub fn write_label_dump(
    problem: &Problem,
    labels: &[FaceLabel],
    step: u32,
    iteration: u32,
    path: &Path,
) -> io::Result<()> {
    let (fx, fy) = problem.mesh.face_grid();
    let mut bytes = format!("sealflow labels step={step} iter={iteration} fx={fx} fy={fy}\n").into_bytes();
    for l in labels {
        let code = l.encode();
        bytes.push(code.clamp(0, 255) as u8);
    }
    std::fs::write(path, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        let s = fmt(std::f64::consts::PI);
        // 1 leading digit + 16 decimals.
        assert!(s.starts_with("3.1415926535897931"));
        let round_trip: f64 = s.parse().unwrap();
        assert_eq!(round_trip, std::f64::consts::PI);
    }
}
