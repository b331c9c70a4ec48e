//! Scenario-driven front end: parse a config, run solve/verify pipelines,
//! emit JSON reports and CSV plot data.
//!
//! Exit codes: 0 when every asserted inequality holds, 2 when one is
//! violated (the report carries the margins), 1 on execution errors.

mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use config::RunConfig;
use halfspace::exec::Exec;
use halfspace::field::Field;
use halfspace::geometry::Geometry;
use halfspace::solver::{newton_solve, Discretization, SolveReport};
use halfspace::stability::relaxed_stability_scan;
use halfspace::verify::{
    capacity_phi, capacity_scan, energy_growth_scan, poincare_sides, regularity_integrals,
    symmetry_detect,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Closed-form tolerance for the Muckenhoupt constant.
const TOL_MUCK: f64 = 1e-8;
/// Closed-form tolerance for the growth constant and the 𝓑 eigenvalues.
const TOL_CLOSED: f64 = 1e-12;
/// Energy growth must not outrun R² by more than this much in the exponent.
const MAX_ENERGY_EXPONENT: f64 = 2.1;
/// Scaled floor for 𝓗* and for capacity-sequence comparisons.
const TOL_FLOOR: f64 = 1e-10;
/// Dead floor that lets an exactly-zero capacity sequence count as falling.
const TOL_CAP: f64 = 1e-12;

#[derive(clap::Args)]
struct Common {
    /// Scenario file ([weight], [nonlinearity], [grid], [newton], [verify]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory receiving reports, plot data and dumps.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Override the scan radii from [verify], comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,

    /// Seed for the randomized weight probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Override a named tolerance, e.g. verify.tol_sym=1e-5. Repeatable.
    #[arg(long = "tol-override", global = true, value_name = "KEY=V")]
    tol_override: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify the coefficient model: Muckenhoupt constant, growth bound,
    /// linearisation eigenvalues.
    CheckWeight,
    /// Newton-solve the scenario and dump the state.
    Solve,
    /// Relaxed second-variation scan over the cutoff basis.
    Stability,
    /// Level-set Poincaré sides with the capacity mechanism.
    Poincare,
    /// Capacity sequence lhs(φ_R)/(log R)² over the radii.
    Capacity,
    /// Energy and weight-volume growth fits over the radii.
    EnergyScan,
    /// Per-slice lateral direction detection (two lateral axes only).
    Symmetry,
    /// Pointwise curvature identity diagnostics of the state.
    IdentityCheck,
    /// Everything above in sequence on one solved state.
    All,
}

// globals cannot be required in clap, so --config is checked by hand
#[derive(Parser)]
#[command(
    name = "halfspace",
    about = "Quasilinear boundary-reaction laboratory on a truncated half-space"
)]
struct Cli {
    #[command(flatten)]
    base: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

/// One subcommand's products: a report object, named CSV bodies, a verdict.
struct Artifacts {
    report: Value,
    csvs: Vec<(String, String)>,
    ok: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let path = cli
        .base
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("--config is required"))?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = config::parse(&text).map_err(|problems| {
        anyhow!("invalid scenario file:\n  - {}", problems.join("\n  - "))
    })?;
    if let Some(radii) = &cli.base.radii {
        if radii.is_empty() {
            bail!("--radii must not be empty");
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            bail!("--radii must be positive");
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            bail!("--radii must increase strictly");
        }
        cfg.radii = radii.clone();
    }
    for pair in &cli.base.tol_override {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("--tol-override wants KEY=V, got {pair}"))?;
        let value: f64 = value
            .parse()
            .with_context(|| format!("tolerance override {key} is not a number"))?;
        config::apply_override(&mut cfg, key, value).map_err(|e| anyhow!(e))?;
    }
    std::fs::create_dir_all(&cli.base.out)
        .with_context(|| format!("creating {}", cli.base.out.display()))?;

    let mut all_ok = true;
    let mut emit = |name: &str, artifacts: Artifacts| -> Result<()> {
        let path = cli.base.out.join(format!("{name}.json"));
        let body = serde_json::to_string_pretty(&artifacts.report)? + "\n";
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        for (file, body) in &artifacts.csvs {
            let path = cli.base.out.join(file);
            std::fs::write(&path, body)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        all_ok &= artifacts.ok;
        Ok(())
    };

    match cli.cmd {
        Cmd::CheckWeight => emit("check-weight", check_weight(&cfg, cli.base.seed)?)?,
        Cmd::Solve => {
            let (disc, u, rep) = solve_state(&cfg)?;
            emit("solve", solve_artifacts(&rep))?;
            write_dump(&u, &disc, &cli.base.out)?;
        }
        Cmd::Stability => {
            let (disc, u) = verification_state(&cfg)?;
            emit("stability", stability(&cfg, &disc, &u)?)?;
        }
        Cmd::Poincare => {
            let (disc, u) = verification_state(&cfg)?;
            emit("poincare", poincare(&cfg, &disc, &u)?)?;
        }
        Cmd::Capacity => {
            let (disc, u) = verification_state(&cfg)?;
            emit("capacity", capacity(&cfg, &disc, &u)?)?;
        }
        Cmd::EnergyScan => {
            let (disc, u) = verification_state(&cfg)?;
            emit("energy-scan", energy_scan(&cfg, &disc, &u)?)?;
        }
        Cmd::Symmetry => {
            let (disc, u) = verification_state(&cfg)?;
            emit("symmetry", symmetry(&cfg, &disc, &u)?)?;
        }
        Cmd::IdentityCheck => {
            let (disc, u) = verification_state(&cfg)?;
            emit("identity-check", identity_check(&cfg, &disc, &u)?)?;
        }
        Cmd::All => {
            emit("check-weight", check_weight(&cfg, cli.base.seed)?)?;
            let (disc, u, rep) = solve_state(&cfg)?;
            emit("solve", solve_artifacts(&rep))?;
            write_dump(&u, &disc, &cli.base.out)?;
            emit("identity-check", identity_check(&cfg, &disc, &u)?)?;
            emit("stability", stability(&cfg, &disc, &u)?)?;
            emit("poincare", poincare(&cfg, &disc, &u)?)?;
            emit("capacity", capacity(&cfg, &disc, &u)?)?;
            emit("energy-scan", energy_scan(&cfg, &disc, &u)?)?;
            if disc.grid().n == 2 {
                emit("symmetry", symmetry(&cfg, &disc, &u)?)?;
            }
        }
    }
    Ok(all_ok)
}

/// Scan radii already validated as positive and strictly increasing.
fn radii(cfg: &RunConfig) -> &[f64] {
    &cfg.radii
}

fn write_dump(u: &Field, disc: &Discretization, out: &Path) -> Result<()> {
    let path = out.join("solve_u.dump");
    u.write_dump(disc.grid(), &path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Newton-solve from the configured initial iterate; non-convergence is an
/// execution error for the verification commands, which have nothing sound
/// to report, but only a violated inequality for `solve` itself.
fn solve_state(cfg: &RunConfig) -> Result<(Discretization, Field, SolveReport)> {
    let mut seed = Field::from_preset(&cfg.scenario.grid, &cfg.initial)?;
    seed.scale(cfg.initial_scale);
    let disc = Discretization::new(cfg.scenario.clone(), Exec::Auto, &seed)?;
    let (u, rep) = newton_solve(&disc, &seed, &cfg.newton)?;
    Ok((disc, u, rep))
}

fn verification_state(cfg: &RunConfig) -> Result<(Discretization, Field)> {
    if let Some(path) = &cfg.field_dump {
        let (grid, u) = Field::read_dump(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let want = &cfg.scenario.grid;
        if grid.n != want.n
            || grid.ny != want.ny
            || grid.nx != want.nx
            || grid.y_extent != want.y_extent
            || grid.x_extent != want.x_extent
            || grid.alpha != want.alpha
        {
            bail!(
                "dumped grid ({} axes, {}x{} cells) disagrees with [grid]",
                grid.n,
                grid.ny,
                grid.nx
            );
        }
        let disc = Discretization::new(cfg.scenario.clone(), Exec::Auto, &u)?;
        return Ok((disc, u));
    }
    let (disc, u, rep) = solve_state(cfg)?;
    if !rep.converged {
        bail!(
            "newton stalled at residual {:.3e}; verification wants a solved state ({})",
            rep.final_residual_norm,
            rep.warnings.join("; ")
        );
    }
    Ok((disc, u))
}

// ---------------------------------------------------------------- reports

/// 17 significant digits; round-trips every f64.
fn jnum(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(format!("{v:.16e}").parse().expect("finite float literal"))
    } else {
        Value::String(format!("{v}"))
    }
}

fn jarr(vs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(vs.into_iter().map(jnum).collect())
}

fn jobj(pairs: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in pairs {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn check_weight(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let model = &cfg.scenario.model;
    let grid = &cfg.scenario.grid;
    let alpha = model.alpha;

    let muck = model.muckenhoupt_ratio(1.0, 1.0, 4096)?;
    let muck_closed = 1.0 / (1.0 - alpha * alpha);
    let muck_ok = (muck - muck_closed).abs() <= TOL_MUCK;

    let growth = model.growth_ratio_sup(10.0, 1000)?;
    let growth_closed = match &model.kind {
        halfspace::weights::WeightKind::PLaplacian { p } => Some((p - 2.0).abs()),
        halfspace::weights::WeightKind::MeanCurvature => Some(100.0 / 101.0),
        halfspace::weights::WeightKind::Tabulated { .. } => None,
    };
    let growth_ok = growth_closed.map_or(growth.is_finite(), |c| (growth - c).abs() <= TOL_CLOSED);

    // eigenvalues of 𝓑 at random (x, η) against the closed pair {a, a + a_t|η|}
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.n + 1;
    let samples = 1000;
    let mut max_mismatch = 0.0f64;
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let x = rng.gen_range(0.01..=grid.x_extent.max(0.02));
        let mut eta = vec![0.0; dim];
        loop {
            for e in eta.iter_mut() {
                *e = rng.gen_range(-2.0..2.0);
            }
            if eta.iter().map(|e| e * e).sum::<f64>().sqrt() > 1e-3 {
                break;
            }
        }
        let norm = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
        let a = model.a(x, norm);
        let ridge = a + model.a_t(x, norm) * norm;
        let mut closed = vec![a; dim - 1];
        closed.push(ridge);
        closed.sort_by(f64::total_cmp);
        let eigs = model.linearization_eigenvalues(x, &eta)?;
        let scale = 1.0f64.max(a.abs()).max(ridge.abs());
        let mismatch = eigs
            .iter()
            .zip(&closed)
            .map(|(e, c)| (e - c).abs())
            .fold(0.0f64, f64::max)
            / scale;
        max_mismatch = max_mismatch.max(mismatch);
        rows.push(vec![k as f64, norm, mismatch]);
    }
    let eig_ok = max_mismatch <= TOL_CLOSED;

    let ok = muck_ok && growth_ok && eig_ok;
    let report = jobj(vec![
        ("alpha", jnum(alpha)),
        (
            "muckenhoupt",
            jobj(vec![
                ("value", jnum(muck)),
                ("closed_form", jnum(muck_closed)),
                ("tol", jnum(TOL_MUCK)),
                ("ok", Value::Bool(muck_ok)),
            ]),
        ),
        (
            "growth",
            jobj(vec![
                ("value", jnum(growth)),
                (
                    "closed_form",
                    growth_closed.map_or(Value::Null, jnum),
                ),
                ("tol", jnum(TOL_CLOSED)),
                ("ok", Value::Bool(growth_ok)),
            ]),
        ),
        (
            "eigenvalues",
            jobj(vec![
                ("samples", Value::from(samples)),
                ("max_mismatch", jnum(max_mismatch)),
                ("tol", jnum(TOL_CLOSED)),
                ("ok", Value::Bool(eig_ok)),
            ]),
        ),
        ("ok", Value::Bool(ok)),
    ]);
    Ok(Artifacts {
        report,
        csvs: vec![(
            "check-weight_eigenvalue_mismatch.csv".into(),
            csv("sample,eta_norm,mismatch", rows),
        )],
        ok,
    })
}

fn solve_artifacts(rep: &SolveReport) -> Artifacts {
    let report = jobj(vec![
        ("converged", Value::Bool(rep.converged)),
        ("iterations", Value::from(rep.iterations)),
        ("final_residual_norm", jnum(rep.final_residual_norm)),
        ("energy_integral", jnum(rep.energy_integral)),
        ("damped_steps", Value::from(rep.damped_steps)),
        ("linear_iterations", Value::from(rep.linear_iterations)),
        (
            "warnings",
            Value::Array(rep.warnings.iter().map(|w| Value::String(w.clone())).collect()),
        ),
        ("ok", Value::Bool(rep.converged)),
    ]);
    let rows = rep
        .residual_norms
        .iter()
        .enumerate()
        .map(|(k, r)| vec![k as f64, *r]);
    Artifacts {
        report,
        csvs: vec![("solve_residuals.csv".into(), csv("iteration,residual_norm", rows))],
        ok: rep.converged,
    }
}

fn stability(cfg: &RunConfig, disc: &Discretization, u: &Field) -> Result<Artifacts> {
    let rep = relaxed_stability_scan(disc, u, cfg.basis_size)?;
    let ok = rep.stable;
    let report = jobj(vec![
        ("basis_size", Value::from(cfg.basis_size)),
        ("q_value", jnum(rep.q_value)),
        ("bulk_term", jnum(rep.bulk_term)),
        ("potential_term", jnum(rep.potential_term)),
        ("boundary_term", jnum(rep.boundary_term)),
        ("min_rayleigh", jnum(rep.min_rayleigh)),
        ("tol_stab", jnum(rep.tol_stab)),
        ("modes", Value::from(rep.modes)),
        ("degenerate", Value::Bool(rep.degenerate)),
        ("stable", Value::Bool(rep.stable)),
        ("ok", Value::Bool(ok)),
    ]);
    let rows = vec![
        vec![0.0, rep.bulk_term],
        vec![1.0, rep.potential_term],
        vec![2.0, rep.boundary_term],
        vec![3.0, rep.q_value],
        vec![4.0, rep.min_rayleigh],
    ];
    Ok(Artifacts {
        report,
        csvs: vec![("stability_terms.csv".into(), csv("term,value", rows))],
        ok,
    })
}

/// Margin of the level-set inequality under the largest capacity cutoff,
/// plus the capacity mechanism itself: the normalized sequence has to fall.
fn poincare(cfg: &RunConfig, disc: &Discretization, u: &Field) -> Result<Artifacts> {
    let rs = radii(cfg);
    let r_top = *rs.last().expect("radii validated nonempty");
    let (phi, truncated) = capacity_phi(disc.grid(), r_top)?;
    let rep = poincare_sides(disc, u, &phi)?;
    let tol_poin = 1e-6 * rep.rhs.abs().max(1.0);
    let margin_ok = rep.margin >= -tol_poin;

    let seq = capacity_scan(disc, u, rs)?;
    let floor = seq.iter().copied().fold(f64::INFINITY, f64::min);
    let cap_tol = TOL_CAP * (1.0 + seq[0].abs());
    let cap_ok = seq.windows(2).all(|w| w[1] <= w[0] + cap_tol);

    let ok = margin_ok && cap_ok;
    let report = jobj(vec![
        ("radius", jnum(r_top)),
        ("truncated", Value::Bool(truncated)),
        ("lhs", jnum(rep.lhs)),
        ("rhs", jnum(rep.rhs)),
        ("margin", jnum(rep.margin)),
        ("min_lambda", jnum(rep.min_lambda)),
        ("tol_poin", jnum(tol_poin)),
        ("margin_ok", Value::Bool(margin_ok)),
        ("capacity_sequence", jarr(seq.iter().copied())),
        ("capacity_floor", jnum(floor)),
        ("capacity_ok", Value::Bool(cap_ok)),
        ("ok", Value::Bool(ok)),
    ]);
    let rows = rs.iter().zip(&seq).map(|(r, v)| vec![*r, *v]);
    Ok(Artifacts {
        report,
        csvs: vec![("poincare_capacity.csv".into(), csv("radius,value", rows))],
        ok,
    })
}

fn capacity(cfg: &RunConfig, disc: &Discretization, u: &Field) -> Result<Artifacts> {
    let rs = radii(cfg);
    let seq = capacity_scan(disc, u, rs)?;
    let floor = seq.iter().copied().fold(f64::INFINITY, f64::min);
    let cap_tol = TOL_CAP * (1.0 + seq[0].abs());
    let ok = seq.windows(2).all(|w| w[1] <= w[0] + cap_tol);
    let report = jobj(vec![
        ("radii", jarr(rs.iter().copied())),
        ("values", jarr(seq.iter().copied())),
        ("floor", jnum(floor)),
        ("tol", jnum(cap_tol)),
        ("nonincreasing", Value::Bool(ok)),
        ("ok", Value::Bool(ok)),
    ]);
    let rows = rs.iter().zip(&seq).map(|(r, v)| vec![*r, *v]);
    Ok(Artifacts {
        report,
        csvs: vec![("capacity_scan.csv".into(), csv("radius,value", rows))],
        ok,
    })
}

fn energy_scan(cfg: &RunConfig, disc: &Discretization, u: &Field) -> Result<Artifacts> {
    let rs = radii(cfg);
    let rep = energy_growth_scan(disc, u, rs)?;
    let fit_ok = rep.fitted_exponent.map_or(true, |s| s <= MAX_ENERGY_EXPONENT);
    let expected_weight = disc.grid().n as f64 + 1.0 + disc.grid().alpha;
    let report = jobj(vec![
        ("radii", jarr(rep.radii.iter().copied())),
        ("energies", jarr(rep.energies.iter().copied())),
        ("weight_volumes", jarr(rep.weight_volumes.iter().copied())),
        (
            "fitted_exponent",
            rep.fitted_exponent.map_or(Value::Null, jnum),
        ),
        ("max_exponent", jnum(MAX_ENERGY_EXPONENT)),
        (
            "weight_exponent",
            rep.weight_exponent.map_or(Value::Null, jnum),
        ),
        ("expected_weight_exponent", jnum(expected_weight)),
        ("degenerate", Value::Bool(rep.degenerate)),
        ("ok", Value::Bool(fit_ok)),
    ]);
    let rows = rep
        .radii
        .iter()
        .zip(rep.energies.iter().zip(&rep.weight_volumes))
        .map(|(r, (e, w))| vec![*r, *e, *w]);
    Ok(Artifacts {
        report,
        csvs: vec![(
            "energy-scan_energies.csv".into(),
            csv("radius,energy,weight_volume", rows),
        )],
        ok: fit_ok,
    })
}

fn symmetry(cfg: &RunConfig, disc: &Discretization, u: &Field) -> Result<Artifacts> {
    let rep = symmetry_detect(disc.grid(), u, disc.exec, cfg.tol_sym)?;
    let ok = rep.is_one_dimensional;
    let omegas: Vec<Value> = rep
        .omega
        .iter()
        .map(|w| match w {
            Some([a, b]) => Value::Array(vec![jnum(*a), jnum(*b)]),
            None => Value::Null,
        })
        .collect();
    let report = jobj(vec![
        ("omega", Value::Array(omegas)),
        ("max_angular_deviation", jnum(rep.max_angular_deviation)),
        ("tol_sym", jnum(rep.tol_sym)),
        (
            "empty_slices",
            Value::Array(rep.empty_slices.iter().map(|s| Value::from(*s)).collect()),
        ),
        ("vacuous", Value::Bool(rep.vacuous)),
        ("is_one_dimensional", Value::Bool(rep.is_one_dimensional)),
        ("ok", Value::Bool(ok)),
    ]);
    let rows = rep
        .omega
        .iter()
        .enumerate()
        .filter_map(|(k, w)| w.map(|[a, b]| vec![k as f64, a, b]));
    Ok(Artifacts {
        report,
        csvs: vec![("symmetry_omega.csv".into(), csv("slice,omega1,omega2", rows))],
        ok,
    })
}

fn identity_check(cfg: &RunConfig, disc: &Discretization, u: &Field) -> Result<Artifacts> {
    let geo = Geometry::new(disc.grid(), u, disc.exec)?;
    let scale = geo.residual_scale();
    let hstar_min = geo.hstar_min();
    let hstar_floor = -TOL_FLOOR * scale * scale;
    let hstar_ok = hstar_min >= hstar_floor;
    let a3 = geo.identity_a3_residual();
    let rows = regularity_integrals(disc, u, radii(cfg))?;
    let report = jobj(vec![
        ("a3_residual", jnum(a3)),
        ("residual_scale", jnum(scale)),
        ("hstar_min", jnum(hstar_min)),
        ("hstar_floor", jnum(hstar_floor)),
        ("hstar_ok", Value::Bool(hstar_ok)),
        ("skipped_nodes", Value::from(geo.skipped)),
        ("ok", Value::Bool(hstar_ok)),
    ]);
    let csv_rows = radii(cfg)
        .iter()
        .zip(&rows)
        .map(|(r, pair)| vec![*r, pair[0], pair[1]]);
    Ok(Artifacts {
        report,
        csvs: vec![(
            "identity-check_integrals.csv".into(),
            csv("radius,first,second", csv_rows),
        )],
        ok: hstar_ok,
    })
}
