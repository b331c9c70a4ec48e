//! Checks of the main inequalities on discrete states: the level-set
//! Poincaré bound, the annulus integral bound, energy growth, the capacity
//! vanishing sequence, and lateral symmetry detection.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Field;
use crate::geometry::Geometry;
use crate::grid::Grid;
use crate::solver::Discretization;

#[derive(Debug, Clone)]
pub struct PoincareReport {
    /// `∫ φ²(a𝒦²|∇_y u|² + λ|∇_L|∇_y u||²)` over the valid part of the
    /// regular set.
    pub lhs: f64,
    /// `∫ |∇_y u|²⟨𝓑∇φ,∇φ⟩`, regular set.
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative for stable states.
    pub margin: f64,
    /// Smallest `𝒜 + 𝒜'/t · |∇_y u|²` over the regular set; the sign of the
    /// μ-carrying coefficient, reported scale-free.
    pub min_lambda: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyScanReport {
    pub radii: Vec<f64>,
    /// `∫_{B_R⁺} (a + |a_t||∇u|)|∇u|²` per radius.
    pub energies: Vec<f64>,
    /// Log-log slope of energies against radii; absent when some energy
    /// vanishes.
    pub fitted_exponent: Option<f64>,
    /// `∫_{B_{2R}⁺ ∖ B_R⁺} μ` per radius.
    pub weight_volumes: Vec<f64>,
    pub weight_exponent: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    /// Dominant lateral direction per x-slice; `None` where the slice has no
    /// regular nodes. First nonzero component canonicalized positive.
    pub omega: Vec<Option<[f64; 2]>>,
    /// Worst angle between `∇_y u` and the slice's ω-line, radians.
    pub max_angular_deviation: f64,
    pub is_one_dimensional: bool,
    pub tol_sym: f64,
    pub empty_slices: Vec<usize>,
    /// No slice had regular nodes; the verdict is vacuous.
    pub vacuous: bool,
}

fn check_radii(radii: &[f64], least: f64, what: &str) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Domain(format!("{what} needs at least one radius")));
    }
    for (k, r) in radii.iter().enumerate() {
        if !(r.is_finite() && *r >= least) {
            return Err(Error::Domain(format!(
                "{what} radius {r} lies below the minimum {least}"
            )));
        }
        if k > 0 && *r <= radii[k - 1] {
            return Err(Error::Domain(format!("{what} radii must increase strictly")));
        }
    }
    Ok(())
}

/// Left Poincaré integrand summed against `φ²`, with the smallest λ seen.
/// Every regular node contributes: the integrand is nonnegative, so nodes
/// with roughly-turning normals can only strengthen the reported side, and
/// they vanish identically for one-dimensional fields.
fn level_set_cost(disc: &Discretization, geo: &Geometry, phi: &[f64]) -> (f64, f64) {
    let model = &disc.scenario.model;
    let floor = disc.effective_floor();
    let masses = disc.node_masses();
    let mut lhs = 0.0;
    let mut min_lambda = f64::INFINITY;
    for (id, m) in masses.iter().enumerate() {
        if !geo.regular[id] {
            continue;
        }
        let g = geo.g[id];
        let ux = geo.u_x[id];
        let t = (g * g + ux * ux).sqrt();
        let (a, c) = model.curvature_scalars_with(t, floor);
        let lambda = a + c * g * g;
        min_lambda = min_lambda.min(lambda);
        let gl = geo.grad_l_g[id];
        let kappa = geo.kappa[id];
        let density = a * kappa * kappa * g * g + lambda * (gl[0] * gl[0] + gl[1] * gl[1]);
        lhs += m * phi[id] * phi[id] * density;
    }
    if !min_lambda.is_finite() {
        min_lambda = 0.0;
    }
    (lhs, min_lambda)
}

/// Both sides of the level-set Poincaré inequality for a cutoff `phi` that
/// vanishes at the far field.
pub fn poincare_sides(disc: &Discretization, u: &Field, phi: &Field) -> Result<PoincareReport> {
    u.matches(disc.grid())?;
    phi.matches(disc.grid())?;
    let geo = Geometry::new(disc.grid(), u, disc.exec)?;
    let (lhs, min_lambda) = level_set_cost(disc, &geo, &phi.values);
    let gsq: Vec<f64> = geo
        .g
        .iter()
        .zip(&geo.regular)
        .map(|(g, r)| if *r { g * g } else { 0.0 })
        .collect();
    let rhs = disc.weighted_b_form(u, phi, phi, Some(&gsq));
    Ok(PoincareReport { lhs, rhs, margin: rhs - lhs, min_lambda })
}

/// The logarithmic capacity cutoff: `log R` inside `|X| ≤ √R`, then
/// `2 log(R/|X|)` out to `|X| = R`, zero beyond. The flag reports a radius
/// escaping the grid, where the cutoff no longer vanishes on the far field.
pub fn capacity_phi(grid: &Grid, r: f64) -> Result<(Field, bool)> {
    if !(r.is_finite() && r >= std::f64::consts::E) {
        return Err(Error::Domain(format!(
            "capacity radius must be at least e, got {r}"
        )));
    }
    let truncated = r > grid.y_extent.min(grid.x_extent);
    let sqrt_r = r.sqrt();
    let mut phi = Field::zeros(grid);
    for id in 0..phi.len() {
        let rad = grid.node_radius(id);
        phi.values[id] = if rad <= sqrt_r {
            r.ln()
        } else if rad < r {
            2.0 * (r / rad).ln()
        } else {
            0.0
        };
    }
    Ok((phi, truncated))
}

/// `lhs(φ_R) / (log R)²` per radius; the sequence a bounded stable state
/// must send to zero.
pub fn capacity_scan(disc: &Discretization, u: &Field, radii: &[f64]) -> Result<Vec<f64>> {
    u.matches(disc.grid())?;
    check_radii(radii, std::f64::consts::E, "capacity")?;
    let geo = Geometry::new(disc.grid(), u, disc.exec)?;
    let mut out = Vec::with_capacity(radii.len());
    for r in radii {
        let (phi, _) = capacity_phi(disc.grid(), *r)?;
        let (lhs, _) = level_set_cost(disc, &geo, &phi.values);
        out.push(lhs / (r.ln() * r.ln()));
    }
    Ok(out)
}

/// The annulus bound: for nonnegative `h` and `η(ρ) = ∫_{B_ρ⁺} h`,
/// `∫_{√R<|X|<R} h/|X|²  ≤  2∫_{√R}^R t⁻³η(t)dt + η(R)/R²`.
/// Returns `(lhs, rhs)`; node by node the discrete rendering makes the
/// inequality exact, annulus nodes contributing equally to both sides.
pub fn tatay_bound_check(grid: &Grid, h: &Field, r: f64) -> Result<(f64, f64)> {
    h.matches(grid)?;
    if h.values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain("annulus bound needs nonnegative h".into()));
    }
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::Domain(format!(
            "annulus bound needs R > 1 so that √R < R, got {r}"
        )));
    }
    let sqrt_r = r.sqrt();
    let vols = grid.node_volumes();
    let mut pts: Vec<(f64, f64)> = (0..grid.num_nodes())
        .map(|id| (grid.node_radius(id), vols[id] * h.values[id]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let lhs: f64 = pts
        .iter()
        .filter(|(rad, _)| *rad > sqrt_r && *rad < r)
        .map(|(rad, vh)| vh / (rad * rad))
        .sum();
    let eta_r: f64 = pts.iter().take_while(|(rad, _)| *rad <= r).map(|(_, vh)| vh).sum();

    // exact integral of the step function η against 2 t⁻³ over [√R, R]
    let mut tail = 0.0;
    let mut eta = 0.0;
    let mut prev = 0.0f64;
    for (rad, vh) in &pts {
        let a = prev.max(sqrt_r);
        let b = rad.min(r);
        if b > a {
            tail += eta * (1.0 / (a * a) - 1.0 / (b * b));
        }
        eta += vh;
        prev = *rad;
        if prev >= r {
            break;
        }
    }
    let a = prev.max(sqrt_r);
    if r > a {
        tail += eta * (1.0 / (a * a) - 1.0 / (r * r));
    }
    Ok((lhs, tail + eta_r / (r * r)))
}

/// Ball energies, their growth exponent, and the weighted annulus volumes.
pub fn energy_growth_scan(
    disc: &Discretization,
    u: &Field,
    radii: &[f64],
) -> Result<EnergyScanReport> {
    u.matches(disc.grid())?;
    if radii.len() < 3 {
        return Err(Error::Domain(format!(
            "energy fit refused: needs at least 3 radii, got {}",
            radii.len()
        )));
    }
    check_radii(radii, f64::MIN_POSITIVE, "energy scan")?;
    let grid = disc.grid();
    let geo = Geometry::new(grid, u, disc.exec)?;
    let model = &disc.scenario.model;
    let floor = disc.effective_floor();
    let masses = disc.node_masses();

    let mut pts: Vec<(f64, f64, f64)> = (0..grid.num_nodes())
        .map(|id| {
            let g = geo.g[id];
            let ux = geo.u_x[id];
            let tsq = g * g + ux * ux;
            let t = tsq.sqrt();
            let (a, c) = model.curvature_scalars_with(t, floor);
            (grid.node_radius(id), masses[id] * (a * tsq + c.abs() * tsq * tsq), masses[id])
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let ball_sum = |r: f64, pick: fn(&(f64, f64, f64)) -> f64| -> f64 {
        pts.iter().take_while(|p| p.0 <= r).map(pick).sum()
    };
    let energies: Vec<f64> = radii.iter().map(|r| ball_sum(*r, |p| p.1)).collect();
    let weight_volumes: Vec<f64> = radii
        .iter()
        .map(|r| ball_sum(2.0 * r, |p| p.2) - ball_sum(*r, |p| p.2))
        .collect();
    let fitted_exponent = crate::numeric::loglog_slope(radii, &energies);
    let weight_exponent = crate::numeric::loglog_slope(radii, &weight_volumes);
    Ok(EnergyScanReport {
        radii: radii.to_vec(),
        energies,
        degenerate: fitted_exponent.is_none(),
        fitted_exponent,
        weight_volumes,
        weight_exponent,
    })
}

/// Per-ball hypothesis integrals: weighted L¹ norms of
/// `𝒜·(Σ_j |∇u_{y_j}|² + u_{y_j}²)` and `𝒜·(|∇|∇_y u||² + |∇_y u|²)`,
/// reported as `[first, second]` per radius. Diagnostics, not conclusions.
pub fn regularity_integrals(
    disc: &Discretization,
    u: &Field,
    radii: &[f64],
) -> Result<Vec<[f64; 2]>> {
    u.matches(disc.grid())?;
    check_radii(radii, f64::MIN_POSITIVE, "regularity scan")?;
    let grid = disc.grid();
    let geo = Geometry::new(grid, u, disc.exec)?;
    let model = &disc.scenario.model;
    let floor = disc.effective_floor();
    let masses = disc.node_masses();
    let sq3 = |v: &[f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];

    let mut pts: Vec<(f64, f64, f64)> = (0..grid.num_nodes())
        .map(|id| {
            let g = geo.g[id];
            let ux = geo.u_x[id];
            let (a, _) = model.curvature_scalars_with((g * g + ux * ux).sqrt(), floor);
            let mut slopes = 0.0;
            let mut values = 0.0;
            for j in 0..grid.n {
                slopes += sq3(&geo.grad_uy[id][j]);
                values += geo.grad_y[id][j] * geo.grad_y[id][j];
            }
            let first = masses[id] * a * (slopes + values);
            let second = masses[id] * a * (sq3(&geo.grad_g[id]) + g * g);
            (grid.node_radius(id), first, second)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(radii
        .iter()
        .map(|r| {
            let mut acc = [0.0; 2];
            for p in pts.iter().take_while(|p| p.0 <= *r) {
                acc[0] += p.1;
                acc[1] += p.2;
            }
            acc
        })
        .collect())
}

/// Per-slice dominant lateral direction from the structure tensor
/// `Σ ∇_y u ⊗ ∇_y u`, and the worst angle any contributing gradient makes
/// with that line. Only interior nodes contribute: at the lateral walls the
/// two axes see different stencil shapes and the mismatch would read as a
/// spurious rotation.
pub fn symmetry_detect(
    grid: &Grid,
    u: &Field,
    exec: Exec,
    tol_sym: f64,
) -> Result<SymmetryReport> {
    u.matches(grid)?;
    if grid.n != 2 {
        return Err(Error::Domain(
            "symmetry detection needs two lateral axes; one-axis fields are one-dimensional by construction"
                .into(),
        ));
    }
    if !(tol_sym.is_finite() && tol_sym > 0.0) {
        return Err(Error::Domain(format!("tol_sym must be positive, got {tol_sym}")));
    }
    let geo = Geometry::new(grid, u, exec)?;
    let mut omega = Vec::with_capacity(grid.nxn());
    let mut empty_slices = Vec::new();
    let mut max_dev = 0.0f64;
    for ix in 0..grid.nxn() {
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut syy = 0.0;
        let mut seen = false;
        for iy2 in 1..grid.nyn() - 1 {
            for iy1 in 1..grid.nyn() - 1 {
                let id = grid.node_index([iy1, iy2], ix);
                if !geo.regular[id] {
                    continue;
                }
                let [g1, g2] = geo.grad_y[id];
                sxx += g1 * g1;
                sxy += g1 * g2;
                syy += g2 * g2;
                seen = true;
            }
        }
        if !seen {
            empty_slices.push(ix);
            omega.push(None);
            continue;
        }
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let mut w = [theta.cos(), theta.sin()];
        if w[0] < 0.0 || (w[0] == 0.0 && w[1] < 0.0) {
            w = [-w[0], -w[1]];
        }
        for iy2 in 1..grid.nyn() - 1 {
            for iy1 in 1..grid.nyn() - 1 {
                let id = grid.node_index([iy1, iy2], ix);
                if !geo.regular[id] {
                    continue;
                }
                let [g1, g2] = geo.grad_y[id];
                let cross = g1 * w[1] - g2 * w[0];
                let along = g1 * w[0] + g2 * w[1];
                max_dev = max_dev.max(cross.abs().atan2(along.abs()));
            }
        }
        omega.push(Some(w));
    }
    let vacuous = empty_slices.len() == omega.len();
    Ok(SymmetryReport {
        omega,
        max_angular_deviation: max_dev,
        is_one_dimensional: max_dev <= tol_sym,
        tol_sym,
        empty_slices,
        vacuous,
    })
}
