//! Run configuration: a sectioned TOML file validated as a whole, reporting
//! every error (missing keys, type mismatches, constraint violations,
//! unknown keys) with its section.key path rather than stopping at the
//! first.

use crate::assembly::{CouplingMode, Problem, ProblemError, ProblemOptions};
use crate::dofs::LateralBc;
use crate::elasticity::ElasticMaterial;
use crate::geometry::{build_bulk_mesh, SurfaceProfile};
use crate::reynolds::FluidProperties;
use crate::solver::SolverConfig;
use crate::trapped::TrappedFluid;
use std::fmt;
use toml::Value;

#[derive(Debug, Clone)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct GeometrySection {
    pub profile: SurfaceProfile,
    pub depth: f64,
    pub depth_elements: usize,
    pub grading_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct OutputSection {
    pub directory: String,
    pub field_every: u32,
    pub checkpoint_every: u32,
    pub bulk_fields: bool,
    pub label_dumps: bool,
    pub restart_from: Option<String>,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub material: ElasticMaterial,
    pub fluid: FluidProperties,
    pub trapped_fluid: TrappedFluid,
    pub solver: SolverConfig,
    pub augmentation: Option<f64>,
    pub include_shear: bool,
    pub output: OutputSection,
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a toml::value::Table>,
    errors: Vec<ConfigError>,
    consumed: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a toml::value::Table, name: &'static str, errors_out: &mut Vec<ConfigError>) -> Section<'a> {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors_out.push(ConfigError {
                    path: name.into(),
                    message: "must be a table".into(),
                });
                None
            }
            None => {
                errors_out.push(ConfigError {
                    path: name.into(),
                    message: "required section missing".into(),
                });
                None
            }
        };
        Section { name, table, errors: Vec::new(), consumed: Vec::new() }
    }

    fn err(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            path: format!("{}.{}", self.name, key),
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.consumed.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn f64_req(&mut self, key: &'static str) -> Option<f64> {
        match self.raw(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(x)) => Some(*x as f64),
            Some(_) => {
                self.err(key, "must be a number");
                None
            }
            None => {
                if self.table.is_some() {
                    self.err(key, "required key missing");
                }
                None
            }
        }
    }

    fn f64_opt(&mut self, key: &'static str, default: f64) -> Option<f64> {
        match self.raw(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(x)) => Some(*x as f64),
            Some(_) => {
                self.err(key, "must be a number");
                None
            }
            None => Some(default),
        }
    }

    fn f64_optional(&mut self, key: &'static str) -> Option<Option<f64>> {
        match self.raw(key) {
            Some(Value::Float(x)) => Some(Some(*x)),
            Some(Value::Integer(x)) => Some(Some(*x as f64)),
            Some(_) => {
                self.err(key, "must be a number");
                None
            }
            None => Some(None),
        }
    }

    fn int_req(&mut self, key: &'static str) -> Option<i64> {
        match self.raw(key) {
            Some(Value::Integer(x)) => Some(*x),
            Some(_) => {
                self.err(key, "must be an integer");
                None
            }
            None => {
                if self.table.is_some() {
                    self.err(key, "required key missing");
                }
                None
            }
        }
    }

    fn int_opt(&mut self, key: &'static str, default: i64) -> Option<i64> {
        match self.raw(key) {
            Some(Value::Integer(x)) => Some(*x),
            Some(_) => {
                self.err(key, "must be an integer");
                None
            }
            None => Some(default),
        }
    }

    fn bool_opt(&mut self, key: &'static str, default: bool) -> Option<bool> {
        match self.raw(key) {
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.err(key, "must be a boolean");
                None
            }
            None => Some(default),
        }
    }

    fn string_req(&mut self, key: &'static str) -> Option<String> {
        match self.raw(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.err(key, "must be a string");
                None
            }
            None => {
                if self.table.is_some() {
                    self.err(key, "required key missing");
                }
                None
            }
        }
    }

    fn string_optional(&mut self, key: &'static str) -> Option<Option<String>> {
        match self.raw(key) {
            Some(Value::String(s)) => Some(Some(s.clone())),
            Some(_) => {
                self.err(key, "must be a string");
                None
            }
            None => Some(None),
        }
    }

    fn positive(&mut self, key: &'static str, value: Option<f64>) -> Option<f64> {
        match value {
            Some(x) if x > 0.0 => Some(x),
            Some(x) => {
                self.err(key, format!("must be positive (got {x})"));
                None
            }
            None => None,
        }
    }

    /// Flags keys that were never consumed.
    fn finish(mut self, errors_out: &mut Vec<ConfigError>) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.consumed.iter().any(|k| k == key) {
                    self.errors.push(ConfigError {
                        path: format!("{}.{}", self.name, key),
                        message: "unknown key".into(),
                    });
                }
            }
        }
        errors_out.append(&mut self.errors);
    }
}

/// Parses and validates the sectioned TOML text.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let root: Value = match text.parse() {
        Ok(v) => v,
        Err(e) => {
            return Err(vec![ConfigError { path: "(file)".into(), message: e.to_string() }]);
        }
    };
    let root = match root {
        Value::Table(t) => t,
        _ => {
            return Err(vec![ConfigError {
                path: "(file)".into(),
                message: "top level must be a table".into(),
            }]);
        }
    };
    let mut errors = Vec::new();
    for key in root.keys() {
        if !["geometry", "material", "fluid", "solver", "output"].contains(&key.as_str()) {
            errors.push(ConfigError { path: key.clone(), message: "unknown section".into() });
        }
    }

    // [geometry]
    let mut g = Section::new(&root, "geometry", &mut errors);
    let kind = g.string_req("profile");
    let depth = { let tmp = g.f64_req("depth"); g.positive("depth", tmp) };
    let depth_elements = match g.int_opt("depth_elements", 8) {
        Some(x) if x >= 1 => Some(x as usize),
        Some(x) => {
            g.err("depth_elements", format!("must be >= 1 (got {x})"));
            None
        }
        None => None,
    };
    let grading_ratio = match g.f64_opt("grading_ratio", 2.0) {
        Some(x) if x >= 1.0 => Some(x),
        Some(x) => {
            g.err("grading_ratio", format!("must be >= 1 (got {x})"));
            None
        }
        None => None,
    };
    let profile = match kind.as_deref() {
        Some("atoll") => {
            let amplitude = { let tmp = g.f64_req("amplitude"); g.positive("amplitude", tmp) };
            let wavelength = { let tmp = g.f64_req("wavelength"); g.positive("wavelength", tmp) };
            let channel_length = { let tmp = g.f64_req("channel_length"); g.positive("channel_length", tmp) };
            let atoll_radius = { let tmp = g.f64_req("atoll_radius"); g.positive("atoll_radius", tmp) };
            let n = g.int_req("grid_points_per_side");
            match (amplitude, wavelength, channel_length, atoll_radius, n) {
                (Some(a), Some(w), Some(l), Some(r), Some(n)) if n >= 3 => {
                    Some(SurfaceProfile::AtollChannel {
                        amplitude: a,
                        wavelength: w,
                        channel_length: l,
                        atoll_radius: r,
                        n: n as usize,
                    })
                }
                (_, _, _, _, Some(n)) if n < 3 => {
                    g.err("grid_points_per_side", "must be >= 3");
                    None
                }
                _ => None,
            }
        }
        Some("rough") => {
            let size = { let tmp = g.f64_req("size"); g.positive("size", tmp) };
            let rms = { let tmp = g.f64_req("rms_heights"); g.positive("rms_heights", tmp) };
            let hurst = match g.f64_req("hurst") {
                Some(h) if h > 0.0 && h < 1.0 => Some(h),
                Some(h) => {
                    g.err("hurst", format!("must be in (0, 1) (got {h})"));
                    None
                }
                None => None,
            };
            let k_low = { let tmp = g.f64_req("k_low"); g.positive("k_low", tmp) };
            let k_high = { let tmp = g.f64_req("k_high"); g.positive("k_high", tmp) };
            if let (Some(kl), Some(ks)) = (k_low, k_high) {
                if kl >= ks {
                    g.err("k_high", "must exceed k_low");
                }
            }
            let n = g.int_req("grid_points_per_side");
            let seed = g.int_opt("seed", 0).map(|s| s as u64);
            match (size, rms, hurst, k_low, k_high, n, seed) {
                (Some(size), Some(rms_heights), Some(hurst), Some(k_low), Some(k_high), Some(n), Some(seed))
                    if n >= 3 && k_low < k_high =>
                {
                    Some(SurfaceProfile::RandomRough {
                        size,
                        rms_heights,
                        hurst,
                        k_low,
                        k_high,
                        n: n as usize,
                        seed,
                    })
                }
                _ => None,
            }
        }
        Some("flat") => {
            let size = { let tmp = g.f64_req("size"); g.positive("size", tmp) };
            let gap = match g.f64_req("gap") {
                Some(x) if x >= 0.0 => Some(x),
                Some(x) => {
                    g.err("gap", format!("must be >= 0 (got {x})"));
                    None
                }
                None => None,
            };
            let n = g.int_req("grid_points_per_side");
            match (size, gap, n) {
                (Some(size), Some(gap), Some(n)) if n >= 3 => {
                    Some(SurfaceProfile::Flat { size, gap, n: n as usize })
                }
                _ => None,
            }
        }
        Some("file") => {
            let size = { let tmp = g.f64_req("size"); g.positive("size", tmp) };
            let path = g.string_req("height_file");
            match (size, path) {
                (Some(size), Some(path)) => Some(SurfaceProfile::File { size, path }),
                _ => None,
            }
        }
        Some(other) => {
            let msg = format!("unknown profile '{other}' (expected atoll, rough, flat or file)");
            g.err("profile", msg);
            None
        }
        None => None,
    };
    g.finish(&mut errors);

    // [material]
    let mut m = Section::new(&root, "material", &mut errors);
    let young = { let tmp = m.f64_req("young"); m.positive("young", tmp) };
    let poisson = match m.f64_req("poisson") {
        Some(x) if x > -1.0 && x < 0.5 => Some(x),
        Some(x) => {
            m.err("poisson", format!("must be in (-1, 0.5) (got {x})"));
            None
        }
        None => None,
    };
    m.finish(&mut errors);

    // [fluid]
    let mut f = Section::new(&root, "fluid", &mut errors);
    let viscosity = { let tmp = f.f64_req("viscosity"); f.positive("viscosity", tmp) };
    let p_inlet = f.f64_req("p_inlet");
    let p_outlet = f.f64_req("p_outlet");
    let k0 = { let tmp = f.f64_opt("k0", 2.0e9); f.positive("k0", tmp) };
    let k1 = { let tmp = f.f64_opt("k1", 9.25); f.positive("k1", tmp) };
    f.finish(&mut errors);

    // [solver]
    let mut s = Section::new(&root, "solver", &mut errors);
    let mode = match s.string_req("mode").as_deref() {
        Some("one_way") => Some(CouplingMode::OneWay),
        Some("two_way_no_trap") => Some(CouplingMode::TwoWayNoTrap),
        Some("two_way_full") => Some(CouplingMode::TwoWayFull),
        Some(other) => {
            let msg =
                format!("unknown mode '{other}' (expected one_way, two_way_no_trap or two_way_full)");
            s.err("mode", msg);
            None
        }
        None => None,
    };
    let load_steps = match s.int_req("load_steps") {
        Some(x) if x >= 0 => Some(x as u32),
        Some(x) => {
            s.err("load_steps", format!("must be >= 0 (got {x})"));
            None
        }
        None => None,
    };
    let total_approach = match s.f64_req("total_approach") {
        Some(x) if x >= 0.0 => Some(x),
        Some(x) => {
            s.err("total_approach", format!("must be >= 0 (got {x})"));
            None
        }
        None => None,
    };
    let augmentation = match s.f64_optional("augmentation") {
        Some(Some(x)) if x > 0.0 => Some(Some(x)),
        Some(Some(x)) => {
            s.err("augmentation", format!("must be positive (got {x})"));
            None
        }
        Some(None) => Some(None),
        None => None,
    };
    let tol_u = { let tmp = s.f64_opt("tolerance_u", 1e-6); s.positive("tolerance_u", tmp) };
    let tol_lambda = { let tmp = s.f64_opt("tolerance_lambda", 1e-12); s.positive("tolerance_lambda", tmp) };
    let tol_p = { let tmp = s.f64_opt("tolerance_p", 1e-12); s.positive("tolerance_p", tmp) };
    let max_iterations = match s.int_opt("max_iterations", 40) {
        Some(x) if x >= 1 => Some(x as u32),
        Some(x) => {
            s.err("max_iterations", format!("must be >= 1 (got {x})"));
            None
        }
        None => None,
    };
    let force_scale = { let tmp = s.f64_opt("force_scale", 1.0); s.positive("force_scale", tmp) };
    let include_shear = s.bool_opt("include_shear", true);
    let stop_on_sealing = s.bool_opt("stop_on_sealing", true);
    s.finish(&mut errors);

    // [output]
    let mut o = Section::new(&root, "output", &mut errors);
    let directory = match o.string_optional("directory") {
        Some(Some(d)) => Some(d),
        Some(None) => Some("out".to_string()),
        None => None,
    };
    let field_every = o.int_opt("field_every", 0).map(|x| x.max(0) as u32);
    let checkpoint_every = o.int_opt("checkpoint_every", 0).map(|x| x.max(0) as u32);
    let bulk_fields = o.bool_opt("bulk_fields", false);
    let label_dumps = o.bool_opt("label_dumps", false);
    let restart_from = o.string_optional("restart_from");
    o.finish(&mut errors);

    if !errors.is_empty() {
        return Err(errors);
    }

    Ok(RunConfig {
        geometry: GeometrySection {
            profile: profile.unwrap(),
            depth: depth.unwrap(),
            depth_elements: depth_elements.unwrap(),
            grading_ratio: grading_ratio.unwrap(),
        },
        material: ElasticMaterial::new(young.unwrap(), poisson.unwrap()),
        fluid: FluidProperties {
            viscosity: viscosity.unwrap(),
            p_inlet: p_inlet.unwrap(),
            p_outlet: p_outlet.unwrap(),
        },
        trapped_fluid: TrappedFluid { k0: k0.unwrap(), k1: k1.unwrap() },
        solver: SolverConfig {
            mode: mode.unwrap(),
            load_steps: load_steps.unwrap(),
            total_approach: total_approach.unwrap(),
            tol_u: tol_u.unwrap(),
            tol_lambda: tol_lambda.unwrap(),
            tol_p: tol_p.unwrap(),
            max_iterations: max_iterations.unwrap(),
            force_scale: force_scale.unwrap(),
            stop_on_sealing: stop_on_sealing.unwrap(),
        },
        augmentation: augmentation.unwrap(),
        include_shear: include_shear.unwrap(),
        output: OutputSection {
            directory: directory.unwrap(),
            field_every: field_every.unwrap(),
            checkpoint_every: checkpoint_every.unwrap(),
            bulk_fields: bulk_fields.unwrap(),
            label_dumps: label_dumps.unwrap(),
            restart_from: restart_from.unwrap(),
        },
    })
}

impl RunConfig {
    /// Lateral boundary flavor implied by the profile: rough surfaces run
    /// periodic in x, deterministic channels use symmetry walls.
    pub fn lateral(&self) -> LateralBc {
        match self.geometry.profile {
            SurfaceProfile::RandomRough { .. } => LateralBc::PeriodicX,
            _ => LateralBc::RollerX,
        }
    }

    /// Builds the discrete problem described by this configuration.
    pub fn build_problem(&self) -> Result<Problem, ProblemError> {
        let heights = self.geometry.profile.heights()?;
        let reference_gap = match &self.geometry.profile {
            SurfaceProfile::Flat { gap, .. } => *gap,
            SurfaceProfile::AtollChannel { amplitude, .. } => *amplitude,
            SurfaceProfile::RandomRough { rms_heights, .. } => *rms_heights,
            SurfaceProfile::File { .. } => heights.rms(),
        };
        let mesh = build_bulk_mesh(
            &heights,
            self.geometry.depth,
            self.geometry.depth_elements,
            self.geometry.grading_ratio,
        )?;
        Problem::build(
            mesh,
            self.lateral(),
            self.material,
            self.fluid,
            self.trapped_fluid,
            ProblemOptions {
                epsilon: self.augmentation,
                include_shear: self.include_shear,
                reference_gap,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATOLL_TOML: &str = r#"
[geometry]
profile = "atoll"
amplitude = 2.0e-5
wavelength = 2.0e-3
channel_length = 1.0e-3
atoll_radius = 3.3e-4
grid_points_per_side = 17
depth = 1.4e-3
depth_elements = 3

[material]
young = 1.0e9
poisson = 0.4

[fluid]
viscosity = 1.0
p_inlet = 1.0e7
p_outlet = 0.0
k0 = 2.0e9
k1 = 9.25

[solver]
mode = "two_way_full"
load_steps = 30
total_approach = 6.4e-5

[output]
directory = "out"
"#;

    #[test]
    fn atoll_config_parses_with_paper_values() {
        let cfg = parse_config(ATOLL_TOML).unwrap();
        match cfg.geometry.profile {
            SurfaceProfile::AtollChannel { amplitude, wavelength, channel_length, atoll_radius, n } => {
                assert_eq!(amplitude, 2.0e-5);
                assert_eq!(wavelength, 2.0e-3);
                assert_eq!(channel_length, 1.0e-3);
                assert_eq!(atoll_radius, 3.3e-4);
                assert_eq!(n, 17);
            }
            _ => panic!("wrong profile"),
        }
        assert_eq!(cfg.material.young, 1.0e9);
        assert_eq!(cfg.fluid.p_inlet, 1.0e7);
        assert_eq!(cfg.trapped_fluid.k1, 9.25);
        assert_eq!(cfg.solver.load_steps, 30);
        let problem = cfg.build_problem().unwrap();
        assert_eq!(problem.mesh.n_faces(), 16 * 16);
    }

    #[test]
    fn empty_file_reports_every_missing_section() {
        let errs = parse_config("").unwrap_err();
        for section in ["geometry", "material", "fluid", "solver"] {
            assert!(
                errs.iter().any(|e| e.path == section),
                "no error for section {section}: {errs:?}"
            );
        }
    }

    #[test]
    fn negative_viscosity_is_a_single_pointed_error() {
        let text = ATOLL_TOML.replace("viscosity = 1.0", "viscosity = -2.0");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert_eq!(errs[0].path, "fluid.viscosity");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = ATOLL_TOML.replace("viscosity = 1.0", "viscosity = 1.0\nviscositty = 2.0");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "fluid.viscositty"));
    }

    #[test]
    fn multiple_errors_are_all_collected() {
        let text = ATOLL_TOML
            .replace("young = 1.0e9", "young = -1.0")
            .replace("mode = \"two_way_full\"", "mode = \"sideways\"")
            .replace("p_inlet = 1.0e7", "");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "material.young"));
        assert!(errs.iter().any(|e| e.path == "solver.mode"));
        assert!(errs.iter().any(|e| e.path == "fluid.p_inlet"));
    }
}
