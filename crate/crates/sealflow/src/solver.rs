//! Displacement-controlled load stepping around a monolithic Newton loop
//! with per-iteration interface partitioning, plus checkpointing of the
//! complete restartable state.

use crate::assembly::{assemble, residual_norms, Assembled, CouplingMode, Problem};
use crate::linsolve::{solve_monolithic, SolveError};
use crate::partition::{
    count_status_changes, flood_flow, identify_trapped_zones, label_contact, FaceLabel,
    PreviousStep,
};
use crate::trapped::TrappedZone;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: CouplingMode,
    pub load_steps: u32,
    /// Total vertical approach of the bottom face toward the flat [m].
    pub total_approach: f64,
    /// Relative tolerance on ||R_u||_2 / ||R_ext||_2.
    pub tol_u: f64,
    /// Absolute tolerance on ||R_lambda||_inf (weighted-gap units, m^3).
    pub tol_lambda: f64,
    /// Absolute tolerance on ||R_p||_inf (volumetric flux units, m^3/s).
    pub tol_p: f64,
    pub max_iterations: u32,
    /// Force scale used when the reaction norm is exactly zero (degenerate
    /// zero-load step under displacement control).
    pub force_scale: f64,
    /// Stop after the interface stops percolating, plus one confirmation
    /// step.
    pub stop_on_sealing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: CouplingMode::TwoWayFull,
            load_steps: 100,
            total_approach: 0.0,
            tol_u: 1e-6,
            tol_lambda: 1e-12,
            tol_p: 1e-12,
            max_iterations: 40,
            force_scale: 1.0,
            stop_on_sealing: true,
        }
    }
}

/// Complete restartable simulation state at a converged load step.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Last converged load step (0 = initial configuration).
    pub step: u32,
    /// Global DOF vector (u; lambda; p), prescribed values included.
    pub v: Vec<f64>,
    /// Face labels at the last converged step.
    pub labels: Vec<FaceLabel>,
    /// Trapped-zone registry of zones that survived the last converged step.
    pub zones: Vec<TrappedZone>,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: u32,
    pub status_changes: usize,
    pub r_u_rel: f64,
    pub r_lambda_inf: f64,
    pub r_p_inf: f64,
}

#[derive(Debug, Clone)]
pub struct StepSummary {
    pub step: u32,
    pub approach: f64,
    /// Bottom reaction force per apparent area [Pa], positive in compression.
    pub p_ext: f64,
    pub k_eff: f64,
    pub mean_flux: f64,
    pub area_frac_straightforward: f64,
    pub area_frac_refined: f64,
    pub n_tf: usize,
    pub max_trapped_pressure: f64,
    pub newton_iterations: u32,
    pub final_status_changes: usize,
    /// Discrete boundary fluxes from the fluid residual rows at the
    /// Dirichlet pressure nodes [m^3/s].
    pub flux_inlet: f64,
    pub flux_outlet: f64,
    /// True when no FLOW path connects inlet to outlet.
    pub sealed: bool,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub summary: StepSummary,
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("step {step}, iteration {iteration}: {source}")]
    LinearSolve {
        step: u32,
        iteration: u32,
        source: SolveError,
    },
    #[error("step {step}: no convergence in {iterations} iterations (last r_u_rel = {r_u_rel:.3e}, r_lambda = {r_lambda:.3e}, r_p = {r_p:.3e})")]
    MaxIterations {
        step: u32,
        iterations: u32,
        r_u_rel: f64,
        r_lambda: f64,
        r_p: f64,
        records: Vec<IterationRecord>,
    },
    #[error("checkpoint {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Initial state: zero displacement, zero multipliers, Dirichlet pressures
/// applied, the whole interface labelled FLOW (the fluid initially occupies
/// the entire free volume), and the flow field equilibrated once on the
/// undeformed gaps. The equilibration is a single linear rigid-wall solve;
/// it only improves the first Newton guess and cannot change any converged
/// result.
pub fn initial_state(problem: &Problem) -> SolverState {
    let mut v = vec![0.0; problem.dofs.n_dofs];
    for &d in &problem.dofs.p_inlet {
        v[d as usize] = problem.fluid.p_inlet;
    }
    for &d in &problem.dofs.p_outlet {
        v[d as usize] = problem.fluid.p_outlet;
    }
    let labels = vec![FaceLabel::Flow; problem.mesh.n_faces()];
    let gaps = problem.gaps(&v);
    let (node_active, _) = problem.classify_faces(&gaps, &v);
    let assembled = assemble(problem, &v, &gaps, &labels, &node_active, &[], CouplingMode::OneWay);
    let rhs: Vec<f64> = problem
        .dofs
        .free_dofs
        .iter()
        .map(|&d| -assembled.r[d as usize])
        .collect();
    if let Ok((dv, _)) =
        solve_monolithic(problem.dofs.n_free(), &assembled.triplets, &assembled.rank_one, &rhs)
    {
        for (fi, &d) in problem.dofs.free_dofs.iter().enumerate() {
            v[d as usize] += dv[fi];
        }
    }
    SolverState { step: 0, v, labels, zones: Vec::new() }
}

/// Outcome of one converged Newton loop.
pub struct NewtonOutcome {
    pub labels: Vec<FaceLabel>,
    pub node_active: Vec<[bool; 4]>,
    pub zones: Vec<TrappedZone>,
    pub assembled: Assembled,
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

/// Runs Newton iterations at fixed prescribed displacements until the three
/// residual norms pass simultaneously. Labels are refreshed from the current
/// iterate at the top of every iteration; the status-change count of
/// iteration 1 is taken against the previous converged step.
pub fn newton_loop(
    problem: &Problem,
    config: &SolverConfig,
    v: &mut Vec<f64>,
    prev: &SolverState,
    step: u32,
) -> Result<NewtonOutcome, SolverError> {
    newton_loop_observed(problem, config, v, prev, step, &mut |_, _, _| {})
}

/// [`newton_loop`] with a per-iteration observer of the fresh labels (used
/// for label dumps).
pub fn newton_loop_observed(
    problem: &Problem,
    config: &SolverConfig,
    v: &mut Vec<f64>,
    prev: &SolverState,
    step: u32,
    observer: &mut dyn FnMut(u32, &[FaceLabel], &Problem),
) -> Result<NewtonOutcome, SolverError> {
    let seeds = problem.seed_faces();
    let prev_gaps = problem.gaps(&prev.v);
    let prev_pressures = |f: u32| {
        problem.faces[f as usize]
            .snodes
            .map(|s| prev.v[problem.dofs.p_dof(s as usize) as usize])
    };
    let prev_volume = |faces: &[u32]| problem.volume_of_faces(faces, &prev_gaps);

    let mut zones = prev.zones.clone();
    let mut labels_prev_iter = prev.labels.clone();
    let mut records = Vec::new();
    let mut warnings = Vec::new();

    for it in 1..=config.max_iterations {
        let gaps = problem.gaps(v);
        let (node_active, face_active) = problem.classify_faces(&gaps, v);
        let mut labels = label_contact(&face_active);
        flood_flow(&mut labels, &problem.graph, &seeds);
        if config.mode.traps() {
            let prev_ctx = PreviousStep {
                labels: &prev.labels,
                face_pressures: &prev_pressures,
                volume_of_faces: &prev_volume,
            };
            let mut w =
                identify_trapped_zones(&mut labels, &problem.graph, &mut zones, &prev_ctx, step);
            warnings.append(&mut w);
        }
        let status_changes = count_status_changes(&labels, &labels_prev_iter);
        observer(it, &labels, problem);

        let assembled = assemble(problem, v, &gaps, &labels, &node_active, &zones, config.mode);
        let norms = residual_norms(problem, &assembled.r);
        let denom = if norms.r_u_reaction > 0.0 { norms.r_u_reaction } else { config.force_scale };
        let r_u_rel = norms.r_u / denom;
        records.push(IterationRecord {
            iteration: it,
            status_changes,
            r_u_rel,
            r_lambda_inf: norms.r_lambda_inf,
            r_p_inf: norms.r_p_inf,
        });

        if r_u_rel < config.tol_u
            && norms.r_lambda_inf < config.tol_lambda
            && norms.r_p_inf < config.tol_p
        {
            return Ok(NewtonOutcome {
                labels,
                node_active,
                zones,
                assembled,
                records,
                warnings,
            });
        }

        // Newton update: K dv = -R on the free DOFs.
        let nf = problem.dofs.n_free();
        let rhs: Vec<f64> = problem
            .dofs
            .free_dofs
            .iter()
            .map(|&d| -assembled.r[d as usize])
            .collect();
        let (dv, _report) = solve_monolithic(nf, &assembled.triplets, &assembled.rank_one, &rhs)
            .map_err(|source| SolverError::LinearSolve { step, iteration: it, source })?;
        for (fi, &d) in problem.dofs.free_dofs.iter().enumerate() {
            v[d as usize] += dv[fi];
        }
        labels_prev_iter = labels;
    }

    let last = records.last().unwrap();
    Err(SolverError::MaxIterations {
        step,
        iterations: config.max_iterations,
        r_u_rel: last.r_u_rel,
        r_lambda: last.r_lambda_inf,
        r_p: last.r_p_inf,
        records,
    })
}

/// True when a FLOW path connects the inlet face row to the outlet face row.
pub fn percolates(problem: &Problem, labels: &[FaceLabel]) -> bool {
    let mut visited = vec![false; labels.len()];
    let mut stack = Vec::new();
    for &f in &problem.inlet_faces {
        if labels[f as usize] == FaceLabel::Flow && !visited[f as usize] {
            visited[f as usize] = true;
            stack.push(f);
        }
    }
    while let Some(f) = stack.pop() {
        if problem.outlet_faces.contains(&f) {
            return true;
        }
        for &nb in &problem.graph.neighbors[f as usize] {
            if !visited[nb as usize] && labels[nb as usize] == FaceLabel::Flow {
                visited[nb as usize] = true;
                stack.push(nb);
            }
        }
    }
    false
}

/// One simulation: problem, solver configuration and the running state.
pub struct Simulation {
    pub problem: Problem,
    pub config: SolverConfig,
    pub state: SolverState,
    /// First sealed step, once observed.
    pub sealed_at: Option<u32>,
}

impl Simulation {
    pub fn new(problem: Problem, config: SolverConfig) -> Simulation {
        let state = initial_state(&problem);
        Simulation { problem, config, state, sealed_at: None }
    }

    pub fn approach_at(&self, step: u32) -> f64 {
        self.config.total_approach * step as f64 / self.config.load_steps as f64
    }

    /// True when all requested steps are done or sealing (plus the
    /// confirmation step) ended the run.
    pub fn finished(&self) -> bool {
        if self.state.step >= self.config.load_steps {
            return true;
        }
        if self.config.stop_on_sealing {
            if let Some(s) = self.sealed_at {
                return self.state.step >= s + 1;
            }
        }
        false
    }

    /// Advances one load step and returns its report.
    pub fn step(&mut self) -> Result<StepReport, SolverError> {
        self.step_with_observer(|_, _, _| {})
    }

    /// Advances one load step, reporting the fresh labels of every Newton
    /// iteration to the observer.
    pub fn step_with_observer(
        &mut self,
        mut observer: impl FnMut(u32, &[FaceLabel], &Problem),
    ) -> Result<StepReport, SolverError> {
        let step = self.state.step + 1;
        let approach = self.approach_at(step);
        let mut v = self.state.v.clone();
        for &d in &self.problem.dofs.bottom_uz {
            v[d as usize] = approach;
        }

        let outcome = newton_loop_observed(
            &self.problem,
            &self.config,
            &mut v,
            &self.state,
            step,
            &mut observer,
        )?;
        let summary = self.summarize(step, approach, &v, &outcome);

        // Converged: promote to the new state; surviving zones become
        // inheritable.
        let mut zones = outcome.zones;
        zones.retain(|z| !z.faces.is_empty());
        for z in &mut zones {
            z.existed_at_previous_step = true;
        }
        self.state = SolverState { step, v, labels: outcome.labels, zones };
        if summary.sealed && self.sealed_at.is_none() {
            self.sealed_at = Some(step);
        }
        Ok(StepReport { summary, records: outcome.records, warnings: outcome.warnings })
    }

    fn summarize(&self, step: u32, approach: f64, v: &[f64], outcome: &NewtonOutcome) -> StepSummary {
        let problem = &self.problem;
        let gaps = problem.gaps(v);
        let a0 = problem.mesh.apparent_area();

        let mut p_ext = 0.0;
        for &d in &problem.dofs.bottom_uz {
            p_ext += outcome.assembled.r[d as usize];
        }
        p_ext /= a0;

        let area_straight = crate::postproc::contact_area_straightforward(problem, &outcome.node_active);
        let area_refined = crate::postproc::contact_area_refined(problem, &outcome.node_active);
        let mean_flux = crate::postproc::mean_flux_y(problem, &outcome.labels, &gaps, v);
        // Undefined without a driving pressure difference.
        let k_eff = if problem.fluid.p_inlet != problem.fluid.p_outlet {
            crate::postproc::effective_transmissivity(problem, mean_flux)
        } else {
            f64::NAN
        };
        let (flux_inlet, flux_outlet) = crate::postproc::boundary_fluxes(problem, &outcome.assembled.r);

        let live_zones: Vec<&TrappedZone> =
            outcome.zones.iter().filter(|z| !z.faces.is_empty()).collect();
        let max_trapped_pressure = outcome
            .zone_pressures()
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);

        StepSummary {
            step,
            approach,
            p_ext,
            k_eff,
            mean_flux,
            area_frac_straightforward: area_straight / a0,
            area_frac_refined: area_refined / a0,
            n_tf: live_zones.len(),
            max_trapped_pressure,
            newton_iterations: outcome.records.len() as u32 - 1,
            final_status_changes: outcome.records.last().map_or(0, |r| r.status_changes),
            flux_inlet,
            flux_outlet,
            sealed: !percolates(problem, &outcome.labels),
        }
    }

    /// Serializes the complete restartable state.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), SolverError> {
        let io_err = |source| SolverError::Io { path: path.display().to_string(), source };
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CKPT_MAGIC);
        push_u64(&mut buf, self.state.step as u64);
        push_u64(&mut buf, self.state.v.len() as u64);
        for &x in &self.state.v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        push_u64(&mut buf, self.state.labels.len() as u64);
        for l in &self.state.labels {
            buf.extend_from_slice(&l.encode().to_le_bytes());
        }
        push_u64(&mut buf, self.state.zones.len() as u64);
        for z in &self.state.zones {
            buf.extend_from_slice(&z.id.to_le_bytes());
            buf.extend_from_slice(&z.created_step.to_le_bytes());
            buf.extend_from_slice(&z.v0.to_le_bytes());
            buf.extend_from_slice(&z.p0.to_le_bytes());
            push_u64(&mut buf, z.faces.len() as u64);
            for &f in &z.faces {
                buf.extend_from_slice(&f.to_le_bytes());
            }
        }
        push_u64(&mut buf, self.sealed_at.map_or(0, |s| s as u64 + 1));
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(&buf).map_err(io_err)?;
        Ok(())
    }

    /// Restores a simulation from a checkpoint written by the same problem
    /// and configuration; the continuation is bit-identical to an
    /// uninterrupted run.
    pub fn restore(problem: Problem, config: SolverConfig, path: &Path) -> Result<Simulation, SolverError> {
        let bad = |reason: &str| SolverError::BadCheckpoint {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| SolverError::Io { path: path.display().to_string(), source })?;
        let mut cur = 0usize;
        if bytes.len() < CKPT_MAGIC.len() || &bytes[..CKPT_MAGIC.len()] != CKPT_MAGIC {
            return Err(bad("bad magic"));
        }
        cur += CKPT_MAGIC.len();
        let step = read_u64(&bytes, &mut cur).ok_or_else(|| bad("truncated"))? as u32;
        let nv = read_u64(&bytes, &mut cur).ok_or_else(|| bad("truncated"))? as usize;
        if nv != problem.dofs.n_dofs {
            return Err(bad("DOF count mismatch"));
        }
        let mut v = Vec::with_capacity(nv);
        for _ in 0..nv {
            v.push(f64::from_le_bytes(
                bytes
                    .get(cur..cur + 8)
                    .ok_or_else(|| bad("truncated"))?
                    .try_into()
                    .unwrap(),
            ));
            cur += 8;
        }
        let nl = read_u64(&bytes, &mut cur).ok_or_else(|| bad("truncated"))? as usize;
        if nl != problem.mesh.n_faces() {
            return Err(bad("face count mismatch"));
        }
        let mut labels = Vec::with_capacity(nl);
        for _ in 0..nl {
            let code = i32::from_le_bytes(
                bytes
                    .get(cur..cur + 4)
                    .ok_or_else(|| bad("truncated"))?
                    .try_into()
                    .unwrap(),
            );
            cur += 4;
            labels.push(match code {
                -1 => FaceLabel::None,
                0 => FaceLabel::Contact,
                1 => FaceLabel::Flow,
                k if k >= 2 => FaceLabel::Trap((k - 2) as u32),
                _ => return Err(bad("bad label code")),
            });
        }
        let nz = read_u64(&bytes, &mut cur).ok_or_else(|| bad("truncated"))? as usize;
        let mut zones = Vec::with_capacity(nz);
        for _ in 0..nz {
            let id = u32::from_le_bytes(bytes.get(cur..cur + 4).ok_or_else(|| bad("truncated"))?.try_into().unwrap());
            cur += 4;
            let created_step =
                u32::from_le_bytes(bytes.get(cur..cur + 4).ok_or_else(|| bad("truncated"))?.try_into().unwrap());
            cur += 4;
            let v0 = f64::from_le_bytes(bytes.get(cur..cur + 8).ok_or_else(|| bad("truncated"))?.try_into().unwrap());
            cur += 8;
            let p0 = f64::from_le_bytes(bytes.get(cur..cur + 8).ok_or_else(|| bad("truncated"))?.try_into().unwrap());
            cur += 8;
            let nf = read_u64(&bytes, &mut cur).ok_or_else(|| bad("truncated"))? as usize;
            let mut faces = Vec::with_capacity(nf);
            for _ in 0..nf {
                faces.push(u32::from_le_bytes(
                    bytes.get(cur..cur + 4).ok_or_else(|| bad("truncated"))?.try_into().unwrap(),
                ));
                cur += 4;
            }
            zones.push(TrappedZone {
                id,
                faces,
                v0,
                p0,
                created_step,
                existed_at_previous_step: true,
            });
        }
        let sealed_raw = read_u64(&bytes, &mut cur).ok_or_else(|| bad("truncated"))?;
        let sealed_at = if sealed_raw == 0 { None } else { Some(sealed_raw as u32 - 1) };
        Ok(Simulation {
            problem,
            config,
            state: SolverState { step, v, labels, zones },
            sealed_at,
        })
    }

    /// Displacement vector of every bulk node at the current state.
    pub fn displacements(&self) -> Vec<nalgebra::Vector3<f64>> {
        (0..self.problem.dofs.n_nodes)
            .map(|n| {
                nalgebra::Vector3::new(
                    self.state.v[self.problem.dofs.u_dof(n, 0) as usize],
                    self.state.v[self.problem.dofs.u_dof(n, 1) as usize],
                    self.state.v[self.problem.dofs.u_dof(n, 2) as usize],
                )
            })
            .collect()
    }
}

impl NewtonOutcome {
    /// Current pressures of the zones, aligned with `zones`.
    pub fn zone_pressures(&self) -> &[f64] {
        &self.assembled.zone_pressures
    }
}

const CKPT_MAGIC: &[u8] = b"SEALFLOW.CKPT.1\n";

fn push_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn read_u64(bytes: &[u8], cur: &mut usize) -> Option<u64> {
    let s = bytes.get(*cur..*cur + 8)?;
    *cur += 8;
    Some(u64::from_le_bytes(s.try_into().unwrap()))
}
