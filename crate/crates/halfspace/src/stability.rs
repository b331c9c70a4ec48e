//! Second-variation quadratic form and the relaxed spectral scan.
//!
//! The form under study is
//! `Q(ξ) = ∫⟨𝓑(∇u)∇ξ, ∇ξ⟩ + ∫ g'(u) ξ² - ∫_{x=0} f'(u) ξ²`,
//! assembled on the same quadrature as the residual and under the same
//! frozen gradient clamp, so `Q(ξ)` is exactly `ξᵀ H ξ` for the assembled
//! second variation `H`. Stability is probed the relaxed way: only along
//! `ξ = |∇_y u| φ` with `φ` from a tensor B-spline family vanishing at the
//! far field, normalized by the boundary mass of `ξ` because the
//! destabilizing term lives on `{x = 0}`.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::Geometry;
use crate::solver::Discretization;
use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct QuadraticFormReport {
    /// `bulk_term + potential_term - boundary_term`, exactly.
    pub q_value: f64,
    pub bulk_term: f64,
    pub potential_term: f64,
    pub boundary_term: f64,
    /// Smallest Rayleigh quotient seen: `q / ∫_{x=0} ξ²` for a single form,
    /// the bottom of the projected pencil for a scan.
    pub min_rayleigh: f64,
    /// Tolerance the stability verdict used; zero for a single form.
    pub tol_stab: f64,
    pub stable: bool,
    /// Every test direction was annihilated or carried no boundary mass.
    pub degenerate: bool,
    /// Independent directions surviving the boundary-mass projection.
    pub modes: usize,
}

/// Copy of `xi` with the pinned (far-field) nodes zeroed.
fn masked(disc: &Discretization, xi: &Field) -> Field {
    let mut out = xi.clone();
    for (v, pinned) in out.values.iter_mut().zip(disc.pinned_mask()) {
        if *pinned {
            *v = 0.0;
        }
    }
    out
}

fn boundary_mass(disc: &Discretization, xi: &Field) -> f64 {
    let mut acc = 0.0;
    for (i, b) in disc.boundary_masses().iter().enumerate() {
        acc += b * xi.values[i] * xi.values[i];
    }
    acc
}

/// The stability form split into its three integrals.
pub fn quadratic_form(disc: &Discretization, u: &Field, xi: &Field) -> Result<QuadraticFormReport> {
    u.matches(disc.grid())?;
    xi.matches(disc.grid())?;
    let xi = masked(disc, xi);
    let bulk_term = disc.weighted_b_form(u, &xi, &xi, None);
    let mut potential_term = 0.0;
    let mut boundary_term = 0.0;
    for i in 0..xi.len() {
        let sq = xi.values[i] * xi.values[i];
        potential_term += disc.node_masses()[i] * disc.scenario.reaction.deriv(u.values[i]) * sq;
        boundary_term += disc.boundary_masses()[i] * disc.scenario.flux.deriv(u.values[i]) * sq;
    }
    let q_value = bulk_term + potential_term - boundary_term;
    let bmass = boundary_mass(disc, &xi);
    Ok(QuadraticFormReport {
        q_value,
        bulk_term,
        potential_term,
        boundary_term,
        min_rayleigh: if bmass > 0.0 { q_value / bmass } else { 0.0 },
        tol_stab: 0.0,
        stable: q_value >= 0.0,
        degenerate: bmass == 0.0,
        modes: 1,
    })
}

/// `|[E(u+εξ) - 2E(u) + E(u-εξ)]/ε² - Q(ξ)| / (1 + |Q(ξ)|)`; the discrete
/// second-variation identity probed through the energy alone.
pub fn second_variation_fd_check(
    disc: &Discretization,
    u: &Field,
    xi: &Field,
    eps: f64,
) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("fd step must be positive, got {eps}")));
    }
    let q = quadratic_form(disc, u, xi)?.q_value;
    let xi = masked(disc, xi);
    let mut up = u.clone();
    let mut dn = u.clone();
    for i in 0..u.len() {
        up.values[i] += eps * xi.values[i];
        dn.values[i] -= eps * xi.values[i];
    }
    let fd = (disc.energy(&up) - 2.0 * disc.energy(u) + disc.energy(&dn)) / (eps * eps);
    Ok((fd - q).abs() / (1.0 + q.abs()))
}

/// Quadratic B-spline bump on `[0, 3]`.
fn bspline2(t: f64) -> f64 {
    if t <= 0.0 || t >= 3.0 {
        0.0
    } else if t < 1.0 {
        0.5 * t * t
    } else if t < 2.0 {
        0.5 * (-2.0 * t * t + 6.0 * t - 3.0)
    } else {
        0.5 * (3.0 - t) * (3.0 - t)
    }
}

/// Nodal values of the tensor B-spline cutoffs: every lateral factor
/// vanishes at the walls, the `x` factors vanish at the truncation but the
/// two straddling the wall stay alive at `x = 0`.
fn cutoff_basis(grid: &crate::grid::Grid, b: usize) -> Vec<Vec<f64>> {
    let lat_step = 2.0 * grid.y_extent / (b + 2) as f64;
    let x_step = grid.x_extent / (b + 2) as f64;
    let lat: Vec<Vec<f64>> = (0..b)
        .map(|j| {
            grid.y_nodes
                .iter()
                .map(|y| bspline2((y + grid.y_extent) / lat_step - j as f64))
                .collect()
        })
        .collect();
    let xdir: Vec<Vec<f64>> = (0..b + 2)
        .map(|j| {
            grid.x_nodes
                .iter()
                .map(|x| bspline2(x / x_step - (j as f64 - 2.0)))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let lat2: &[Vec<f64>] = if grid.n == 2 { &lat } else { &[] };
    for bx in &xdir {
        for by1 in &lat {
            if grid.n == 1 {
                let mut phi = vec![0.0; grid.num_nodes()];
                for id in 0..grid.num_nodes() {
                    let (iy, ix) = grid.node_multi(id);
                    phi[id] = bx[ix] * by1[iy[0]];
                }
                out.push(phi);
            } else {
                for by2 in lat2 {
                    let mut phi = vec![0.0; grid.num_nodes()];
                    for id in 0..grid.num_nodes() {
                        let (iy, ix) = grid.node_multi(id);
                        phi[id] = bx[ix] * by1[iy[0]] * by2[iy[1]];
                    }
                    out.push(phi);
                }
            }
        }
    }
    out
}

/// Bottom of the spectrum of `Q` on `span{|∇_y u| φ_k}`, boundary-mass
/// normalized. The report carries the term split of the minimizing
/// direction.
pub fn relaxed_stability_scan(
    disc: &Discretization,
    u: &Field,
    basis_size: usize,
) -> Result<QuadraticFormReport> {
    u.matches(disc.grid())?;
    if !(1..=16).contains(&basis_size) {
        return Err(Error::Domain(format!(
            "basis size must lie in 1..=16, got {basis_size}"
        )));
    }
    let grid = disc.grid();
    let phis = cutoff_basis(grid, basis_size);
    if phis.len() * grid.num_nodes() > 30_000_000 {
        return Err(Error::Domain(format!(
            "scan of {} directions on {} nodes exceeds the memory budget",
            phis.len(),
            grid.num_nodes()
        )));
    }
    let geo = Geometry::new(grid, u, disc.exec)?;
    let degenerate_report = |tol: f64| QuadraticFormReport {
        q_value: 0.0,
        bulk_term: 0.0,
        potential_term: 0.0,
        boundary_term: 0.0,
        min_rayleigh: 0.0,
        tol_stab: tol,
        stable: true,
        degenerate: true,
        modes: 0,
    };

    let mut xis: Vec<Field> = Vec::with_capacity(phis.len());
    for phi in &phis {
        let mut xi = Field::zeros(grid);
        for id in 0..phi.len() {
            xi.values[id] = geo.g[id] * phi[id];
        }
        let xi = masked(disc, &xi);
        if xi.values.iter().any(|v| *v != 0.0) {
            xis.push(xi);
        }
    }
    if xis.is_empty() {
        return Ok(degenerate_report(0.0));
    }

    let k = xis.len();
    let h = disc.second_variation(u);
    let hxi: Vec<Vec<f64>> = xis.iter().map(|xi| h.spmv(&xi.values, disc.exec)).collect();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let aij = crate::numeric::dot(&xis[i].values, &hxi[j]);
            a[(i, j)] = aij;
            a[(j, i)] = aij;
            let mut bij = 0.0;
            for (id, bm) in disc.boundary_masses().iter().enumerate() {
                bij += bm * xis[i].values[id] * xis[j].values[id];
            }
            b[(i, j)] = bij;
            b[(j, i)] = bij;
        }
    }

    let beig = SymmetricEigen::new(b);
    let smax = beig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    if smax <= 0.0 {
        return Ok(degenerate_report(0.0));
    }
    let kept: Vec<usize> = (0..k)
        .filter(|i| beig.eigenvalues[*i] > 1e-12 * smax)
        .collect();
    if kept.is_empty() {
        return Ok(degenerate_report(0.0));
    }
    // W maps B-orthonormal coordinates back to basis coefficients
    let mut w = DMatrix::zeros(k, kept.len());
    for (col, i) in kept.iter().enumerate() {
        let scale = beig.eigenvalues[*i].sqrt().recip();
        for row in 0..k {
            w[(row, col)] = beig.eigenvectors[(row, *i)] * scale;
        }
    }
    let m = w.transpose() * &a * &w;
    let msym = (&m + m.transpose()) * 0.5;
    let tol_stab = 1e-6 * msym.diagonal().iter().fold(1.0f64, |t, v| t.max(v.abs()));
    let meig = SymmetricEigen::new(msym);
    let mut min_rayleigh = f64::INFINITY;
    let mut argmin = 0;
    for (i, v) in meig.eigenvalues.iter().enumerate() {
        if *v < min_rayleigh {
            min_rayleigh = *v;
            argmin = i;
        }
    }
    let coeffs = &w * meig.eigenvectors.column(argmin);
    let mut xi_min = Field::zeros(grid);
    for (c, xi) in coeffs.iter().zip(&xis) {
        for id in 0..xi_min.len() {
            xi_min.values[id] += c * xi.values[id];
        }
    }
    let mut report = quadratic_form(disc, u, &xi_min)?;
    report.min_rayleigh = min_rayleigh;
    report.tol_stab = tol_stab;
    report.stable = min_rayleigh >= -tol_stab;
    report.degenerate = false;
    report.modes = kept.len();
    Ok(report)
}

/// Residual of the linearized equation along the lateral derivatives of a
/// solved state: for each `j`,
/// `∫⟨𝓑∇u_{y_j},∇u_{y_j}⟩φ² + ∫⟨𝓑∇u_{y_j},∇(φ²)⟩u_{y_j} + ∫ g' u_{y_j}²φ²
///  - ∫_{x=0} f' u_{y_j}²φ²`
/// normalized by the sum of the four magnitudes. Returns the worst `j`.
pub fn linearized_residual_check(disc: &Discretization, u: &Field, phi: &Field) -> Result<f64> {
    u.matches(disc.grid())?;
    phi.matches(disc.grid())?;
    let grid = disc.grid();
    let geo = Geometry::new(grid, u, disc.exec)?;
    let phi_sq_vals: Vec<f64> = phi.values.iter().map(|p| p * p).collect();
    let phi_sq = Field { values: phi_sq_vals.clone() };
    let mut worst = 0.0f64;
    for j in 0..grid.n {
        let w = Field { values: geo.grad_y.iter().map(|g| g[j]).collect() };
        let t1 = disc.weighted_b_form(u, &w, &w, Some(&phi_sq_vals));
        let t2 = disc.weighted_b_form(u, &w, &phi_sq, Some(&w.values));
        let mut t3 = 0.0;
        let mut t4 = 0.0;
        for i in 0..u.len() {
            let sq = w.values[i] * w.values[i] * phi_sq_vals[i];
            t3 += disc.node_masses()[i] * disc.scenario.reaction.deriv(u.values[i]) * sq;
            t4 += disc.boundary_masses()[i] * disc.scenario.flux.deriv(u.values[i]) * sq;
        }
        let denom = t1.abs() + t2.abs() + t3.abs() + t4.abs();
        if denom > 0.0 {
            worst = worst.max((t1 + t2 + t3 - t4).abs() / denom);
        }
    }
    Ok(worst)
}
