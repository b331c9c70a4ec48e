//! Scenario files: flat TOML with five sections. Parsing collects every
//! violation it can see before giving up, so a bad file reads as one
//! complete diagnosis instead of a fix-resubmit loop.

use halfspace::field::FieldPreset;
use halfspace::grid::Grid;
use halfspace::scenario::{FarField, Nonlinearity, Scenario};
use halfspace::solver::NewtonOptions;
use halfspace::weights::{WeightKind, WeightModel};
use std::collections::BTreeSet;
use std::f64::consts::E;
use std::path::PathBuf;
use toml::Value;

/// Everything a run needs beyond the scenario itself.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub newton: NewtonOptions,
    /// Initial Newton iterate, scaled by `initial_scale`.
    pub initial: FieldPreset,
    pub initial_scale: f64,
    /// Ball radii for the capacity / energy scans; strictly increasing.
    pub radii: Vec<f64>,
    pub basis_size: usize,
    pub tol_sym: f64,
    /// Analyse this dumped state instead of solving first.
    pub field_dump: Option<PathBuf>,
}

struct Section<'a> {
    table: Option<&'a toml::map::Map<String, Value>>,
    name: &'static str,
}

/// One collector for every complaint the file produces.
struct Problems(Vec<String>);

impl Problems {
    fn push(&mut self, s: impl Into<String>) {
        self.0.push(s.into());
    }
}

impl<'a> Section<'a> {
    fn float(&self, key: &str, problems: &mut Problems) -> Option<f64> {
        let v = self.table?.get(key)?;
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                problems.push(format!("{}.{key} must be a number", self.name));
                None
            }
        }
    }

    fn require_float(&self, key: &str, problems: &mut Problems) -> Option<f64> {
        if self.table.is_some_and(|t| t.contains_key(key)) {
            self.float(key, problems)
        } else {
            problems.push(format!("missing required key {}.{key}", self.name));
            None
        }
    }

    fn integer(&self, key: &str, problems: &mut Problems) -> Option<i64> {
        let v = self.table?.get(key)?;
        match v {
            Value::Integer(i) => Some(*i),
            _ => {
                problems.push(format!("{}.{key} must be an integer", self.name));
                None
            }
        }
    }

    fn require_integer(&self, key: &str, problems: &mut Problems) -> Option<i64> {
        if self.table.is_some_and(|t| t.contains_key(key)) {
            self.integer(key, problems)
        } else {
            problems.push(format!("missing required key {}.{key}", self.name));
            None
        }
    }

    fn string(&self, key: &str, problems: &mut Problems) -> Option<String> {
        let v = self.table?.get(key)?;
        match v {
            Value::String(s) => Some(s.clone()),
            _ => {
                problems.push(format!("{}.{key} must be a string", self.name));
                None
            }
        }
    }

    fn require_string(&self, key: &str, problems: &mut Problems) -> Option<String> {
        if self.table.is_some_and(|t| t.contains_key(key)) {
            self.string(key, problems)
        } else {
            problems.push(format!("missing required key {}.{key}", self.name));
            None
        }
    }

    fn float_list(&self, key: &str, problems: &mut Problems) -> Option<Vec<f64>> {
        let v = self.table?.get(key)?;
        let Value::Array(items) = v else {
            problems.push(format!("{}.{key} must be an array of numbers", self.name));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    problems.push(format!("{}.{key} must be an array of numbers", self.name));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn reject_unknown(&self, allowed: &[&str], problems: &mut Problems) {
        let Some(table) = self.table else { return };
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for key in table.keys() {
            if !allowed.contains(key.as_str()) {
                problems.push(format!("unknown key {}.{key}", self.name));
            }
        }
    }
}

fn law(
    sec: &Section,
    which: &str,
    problems: &mut Problems,
) -> Option<Nonlinearity> {
    let name = sec.require_string(which, problems)?;
    let slope_key = format!("{which}_slope");
    let exp_key = format!("{which}_exponent");
    match name.as_str() {
        "zero" => Some(Nonlinearity::Zero),
        "linear" => {
            let slope = sec.float(&slope_key, problems).unwrap_or(1.0);
            Some(Nonlinearity::Linear { slope })
        }
        "double_well" => Some(Nonlinearity::DoubleWell),
        "power" => {
            if !sec.table.is_some_and(|t| t.contains_key(exp_key.as_str())) {
                problems.push(format!("missing required key nonlinearity.{exp_key}"));
                return None;
            }
            let exponent = sec.float(&exp_key, problems)?;
            Some(Nonlinearity::Power { exponent })
        }
        other => {
            problems.push(format!(
                "nonlinearity.{which} must be one of zero, linear, double_well, power (got {other})"
            ));
            None
        }
    }
}

fn preset(
    sec: &Section,
    key: &str,
    omega: Option<[f64; 2]>,
    width: f64,
    constant: f64,
    problems: &mut Problems,
) -> Option<FieldPreset> {
    let name = sec.string(key, problems)?;
    match name.as_str() {
        "zero" => Some(FieldPreset::Zero),
        "constant" => Some(FieldPreset::Constant { value: constant }),
        "expcos" => Some(FieldPreset::ExpCos),
        "tanh" => Some(FieldPreset::Tanh { omega: omega.unwrap_or([1.0, 0.0]), width }),
        "saddle" => Some(FieldPreset::Saddle),
        "radial" => Some(FieldPreset::Radial),
        other => {
            problems.push(format!(
                "{}.{key} must be one of zero, constant, expcos, tanh, saddle, radial (got {other})",
                sec.name
            ));
            None
        }
    }
}

/// Parse and fully validate a scenario file. Returns either a ready run
/// configuration or the complete list of violations.
pub fn parse(text: &str) -> Result<RunConfig, Vec<String>> {
    let root: Value = match text.parse() {
        Ok(v) => v,
        Err(e) => return Err(vec![format!("not valid TOML: {e}")]),
    };
    let Value::Table(root) = root else {
        return Err(vec!["top level must be a table".into()]);
    };
    let mut problems = Problems(Vec::new());

    for key in root.keys() {
        if !["weight", "nonlinearity", "grid", "newton", "verify"].contains(&key.as_str()) {
            problems.push(format!("unknown section [{key}]"));
        }
    }
    let section = |name: &'static str| -> Section<'_> {
        let table = root.get(name).and_then(|v| v.as_table());
        Section { table, name }
    };
    for name in ["weight", "nonlinearity", "grid"] {
        if root.get(name).is_none() {
            problems.push(format!("missing section [{name}]"));
        } else if root.get(name).and_then(|v| v.as_table()).is_none() {
            problems.push(format!("[{name}] must be a table"));
        }
    }

    // [weight]
    let weight = section("weight");
    weight.reject_unknown(&["kind", "p", "alpha", "grad_floor"], &mut problems);
    let alpha = weight.require_float("alpha", &mut problems);
    let grad_floor = weight.float("grad_floor", &mut problems).unwrap_or(1e-10);
    let kind = match weight.require_string("kind", &mut problems).as_deref() {
        Some("p_laplacian") => {
            weight.require_float("p", &mut problems).map(|p| WeightKind::PLaplacian { p })
        }
        Some("mean_curvature") => {
            if weight.table.is_some_and(|t| t.contains_key("p")) {
                problems.push("weight.p applies only to kind = \"p_laplacian\"");
            }
            Some(WeightKind::MeanCurvature)
        }
        Some(other) => {
            problems.push(format!(
                "weight.kind must be p_laplacian or mean_curvature (got {other})"
            ));
            None
        }
        None => None,
    };
    let model = match (kind, alpha) {
        (Some(kind), Some(alpha)) => match WeightModel::new(kind, alpha, grad_floor) {
            Ok(m) => Some(m),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        },
        _ => None,
    };

    // [nonlinearity]
    let laws = section("nonlinearity");
    laws.reject_unknown(
        &["f", "g", "f_slope", "g_slope", "f_exponent", "g_exponent"],
        &mut problems,
    );
    let flux = law(&laws, "f", &mut problems);
    let reaction = law(&laws, "g", &mut problems);

    // [grid]
    let gsec = section("grid");
    gsec.reject_unknown(
        &["n", "ny", "nx", "y_extent", "x_extent", "far_field", "profile", "omega", "width",
          "constant"],
        &mut problems,
    );
    let n = gsec.require_integer("n", &mut problems);
    let ny = gsec.require_integer("ny", &mut problems);
    let nx = gsec.require_integer("nx", &mut problems);
    let y_extent = gsec.require_float("y_extent", &mut problems);
    let x_extent = gsec.require_float("x_extent", &mut problems);
    let grid = match (n, ny, nx, y_extent, x_extent, alpha) {
        (Some(n), Some(ny), Some(nx), Some(ye), Some(xe), Some(alpha))
            if n >= 0 && ny >= 0 && nx >= 0 =>
        {
            match Grid::new(n as usize, ny as usize, nx as usize, ye, xe, alpha) {
                Ok(g) => Some(g),
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            }
        }
        (Some(n), Some(ny), Some(nx), Some(_), Some(_), Some(_)) => {
            if n < 0 || ny < 0 || nx < 0 {
                problems.push("grid.n, grid.ny, grid.nx must be nonnegative");
            }
            None
        }
        _ => None,
    };
    let omega = gsec.float_list("omega", &mut problems).and_then(|v| {
        if v.len() == 2 {
            Some([v[0], v[1]])
        } else {
            problems.push("grid.omega needs exactly two components");
            None
        }
    });
    let width = gsec.float("width", &mut problems).unwrap_or(1.0);
    let constant = gsec.float("constant", &mut problems).unwrap_or(0.0);
    let far_field = match gsec.string("far_field", &mut problems).as_deref() {
        None | Some("neumann") => Some(FarField::NeumannZero),
        Some("dirichlet") => {
            if !gsec.table.is_some_and(|t| t.contains_key("profile")) {
                problems.push("dirichlet far field needs grid.profile");
                None
            } else {
                preset(&gsec, "profile", omega, width, constant, &mut problems)
                    .map(|profile| FarField::Dirichlet { profile })
            }
        }
        Some(other) => {
            problems.push(format!("grid.far_field must be neumann or dirichlet (got {other})"));
            None
        }
    };

    // [newton]
    let nsec = section("newton");
    nsec.reject_unknown(
        &["max_iterations", "residual_tolerance", "damping", "damping_floor", "linear_rtol",
          "linear_max_iterations", "dense_limit", "initial", "initial_scale", "initial_omega",
          "initial_width", "initial_constant"],
        &mut problems,
    );
    let mut newton = NewtonOptions::default();
    if let Some(v) = nsec.integer("max_iterations", &mut problems) {
        if v < 1 {
            problems.push("newton.max_iterations must be at least 1");
        } else {
            newton.max_iterations = v as usize;
        }
    }
    if let Some(v) = nsec.float("residual_tolerance", &mut problems) {
        if !(v.is_finite() && v > 0.0) {
            problems.push("newton.residual_tolerance must be positive");
        } else {
            newton.residual_tolerance = v;
        }
    }
    if let Some(v) = nsec.float("damping", &mut problems) {
        if !(v > 0.0 && v <= 1.0) {
            problems.push("newton.damping must lie in (0, 1]");
        } else {
            newton.damping = v;
        }
    }
    if let Some(v) = nsec.float("damping_floor", &mut problems) {
        if !(v > 0.0 && v <= 1.0) {
            problems.push("newton.damping_floor must lie in (0, 1]");
        } else {
            newton.damping_floor = v;
        }
    }
    if let Some(v) = nsec.float("linear_rtol", &mut problems) {
        if !(v.is_finite() && v > 0.0) {
            problems.push("newton.linear_rtol must be positive");
        } else {
            newton.linear_rtol = v;
        }
    }
    if let Some(v) = nsec.integer("linear_max_iterations", &mut problems) {
        if v < 1 {
            problems.push("newton.linear_max_iterations must be at least 1");
        } else {
            newton.linear_max_iterations = v as usize;
        }
    }
    if let Some(v) = nsec.integer("dense_limit", &mut problems) {
        if v < 0 {
            problems.push("newton.dense_limit must be nonnegative");
        } else {
            newton.dense_limit = v as usize;
        }
    }
    let initial_omega = nsec.float_list("initial_omega", &mut problems).and_then(|v| {
        if v.len() == 2 {
            Some([v[0], v[1]])
        } else {
            problems.push("newton.initial_omega needs exactly two components");
            None
        }
    });
    let initial_width = nsec.float("initial_width", &mut problems).unwrap_or(1.0);
    let initial_constant = nsec.float("initial_constant", &mut problems).unwrap_or(0.0);
    let initial = if nsec.table.is_some_and(|t| t.contains_key("initial")) {
        preset(&nsec, "initial", initial_omega, initial_width, initial_constant, &mut problems)
    } else {
        Some(FieldPreset::Zero)
    };
    let initial_scale = nsec.float("initial_scale", &mut problems).unwrap_or(1.0);
    if !initial_scale.is_finite() {
        problems.push("newton.initial_scale must be finite");
    }

    // [verify]
    let vsec = section("verify");
    vsec.reject_unknown(&["radii", "basis_size", "tol_sym", "field_dump"], &mut problems);
    let radii = vsec
        .float_list("radii", &mut problems)
        .unwrap_or_else(|| vec![E * E, E.powi(3), E.powi(4)]);
    if radii.is_empty() {
        problems.push("verify.radii must not be empty");
    }
    for w in radii.windows(2) {
        if !(w[1] > w[0]) {
            problems.push("verify.radii must increase strictly");
            break;
        }
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        problems.push("verify.radii must be positive");
    }
    let basis_size = match vsec.integer("basis_size", &mut problems) {
        Some(v) if (1..=16).contains(&v) => v as usize,
        Some(v) => {
            problems.push(format!("verify.basis_size must lie in 1..=16, got {v}"));
            4
        }
        None => 4,
    };
    let tol_sym = vsec.float("tol_sym", &mut problems).unwrap_or(1e-6);
    if !(tol_sym.is_finite() && tol_sym > 0.0) {
        problems.push("verify.tol_sym must be positive");
    }
    let field_dump = vsec.string("field_dump", &mut problems).map(PathBuf::from);

    let scenario = match (model, grid, reaction, flux, far_field) {
        (Some(model), Some(grid), Some(reaction), Some(flux), Some(far_field)) => {
            match Scenario::new(model, grid, reaction, flux, far_field) {
                Ok(sc) => Some(sc),
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            }
        }
        _ => None,
    };

    match scenario {
        Some(scenario) if problems.0.is_empty() => Ok(RunConfig {
            scenario,
            newton,
            initial: initial.unwrap_or(FieldPreset::Zero),
            initial_scale,
            radii,
            basis_size,
            tol_sym,
            field_dump,
        }),
        _ => Err(problems.0),
    }
}

/// Apply one `--tol-override KEY=V` pair.
pub fn apply_override(cfg: &mut RunConfig, key: &str, value: f64) -> Result<(), String> {
    if !(value.is_finite() && value > 0.0) {
        return Err(format!("tolerance override {key} must be positive, got {value}"));
    }
    match key {
        "newton.residual_tolerance" => cfg.newton.residual_tolerance = value,
        "newton.linear_rtol" => cfg.newton.linear_rtol = value,
        "verify.tol_sym" => cfg.tol_sym = value,
        _ => {
            return Err(format!(
                "unknown tolerance key {key}; valid keys: newton.residual_tolerance, \
                 newton.linear_rtol, verify.tol_sym"
            ))
        }
    }
    Ok(())
}
