//! Variational discretisation and the damped Newton iteration.
//!
//! Multilinear elements on the tensor grid. The bulk term is integrated by a
//! product rule: 2-point Gauss along each lateral axis times a 3-station rule
//! in `x` whose weights absorb the degenerate factor `μ` exactly for
//! quadratic integrands (see [`crate::grid::Grid::x_station_weights`]).
//! Reaction and flux terms are mass-lumped at nodes.
//!
//! Discrete energy, residual, and Jacobian form an exact derivative chain:
//! the residual is the gradient of the energy and the Jacobian its Hessian,
//! to rounding. Everything is evaluated under one gradient clamp frozen at
//! construction, which is what makes the chain differentiable.
//!
//! Assembly runs in two phases so the result is independent of thread
//! scheduling: phase A computes per-cell blocks in parallel, phase B gathers
//! them row by row in a fixed order.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::field::Field;
use crate::grid::Grid;
use crate::scenario::Scenario;
use crate::sparse::{self, Csr};

/// 2-point Gauss abscissae on `[0, 1]`.
const GAUSS: [f64; 2] = [0.211324865405187117745, 0.788675134594812882255];
/// Reference stations of the weighted `x`-rule.
const STATIONS: [f64; 3] = [0.0, 0.5, 1.0];

/// Upper-triangle packing for the 8x8 local block: row `i` starts at
/// `Σ_{k<i} (8 - k) = i (17 - i) / 2`.
fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (17 - i) / 2 + (j - i)
}

#[derive(Clone)]
struct PointRule {
    /// Quadrature weight including `μ`, the cell volume, and the lateral
    /// Gauss factors.
    w: f64,
    /// Physical shape gradients `(∂ₓ, ∂_y1, ∂_y2)` per local node.
    dphys: [[f64; 3]; 8],
}

#[derive(Clone)]
struct ColumnRule {
    points: Vec<PointRule>,
}

struct ElemData {
    mat: [f64; 36],
    res: [f64; 8],
}

pub struct Discretization {
    pub scenario: Scenario,
    pub exec: Exec,
    floor: f64,
    node_masses: Vec<f64>,
    boundary_masses: Vec<f64>,
    pinned_mask: Vec<bool>,
    pinned_values: Vec<Option<f64>>,
    columns: Vec<ColumnRule>,
    /// Shape values per reference point, shared by every column.
    shapes: Vec<[f64; 8]>,
    locals: usize,
}

fn shape_tables(n: usize) -> Vec<(usize, f64, [f64; 8], [[f64; 3]; 8])> {
    // reference points: (station index, lateral gauss weight product,
    // shape values, reference gradients)
    let locals = 1usize << (n + 1);
    let line = |k: usize, s: f64| if k == 0 { 1.0 - s } else { s };
    let dline = |k: usize| if k == 0 { -1.0 } else { 1.0 };
    let mut out = Vec::new();
    let gauss_y2: &[f64] = if n == 2 { &GAUSS } else { &[0.5] };
    for (si, _sx) in STATIONS.iter().enumerate() {
        for gy1 in GAUSS {
            for &gy2 in gauss_y2 {
                let mut shape = [0.0; 8];
                let mut dref = [[0.0; 3]; 8];
                for l in 0..locals {
                    let kx = l & 1;
                    let ky1 = (l >> 1) & 1;
                    let ky2 = (l >> 2) & 1;
                    let (px, py1) = (line(kx, STATIONS[si]), line(ky1, gy1));
                    let py2 = if n == 2 { line(ky2, gy2) } else { 1.0 };
                    shape[l] = px * py1 * py2;
                    dref[l][0] = dline(kx) * py1 * py2;
                    dref[l][1] = px * dline(ky1) * py2;
                    if n == 2 {
                        dref[l][2] = px * py1 * dline(ky2);
                    }
                }
                // each lateral Gauss point carries weight 1/2 per axis,
                // folded into the physical factor later
                out.push((si, 1.0, shape, dref));
            }
        }
    }
    out
}

impl Discretization {
    /// Builds the assembler with the gradient clamp frozen from `reference`:
    /// the model's relative floor scaled by the field's largest quadrature
    /// gradient, or taken as an absolute floor when the field is flat.
    pub fn new(scenario: Scenario, exec: Exec, reference: &Field) -> Result<Self> {
        reference.matches(&scenario.grid)?;
        let grid = scenario.grid.clone();
        let n = grid.n;
        let locals = 1usize << (n + 1);
        let hy = grid.hy();
        let lateral_factor = (hy / 2.0).powi(n as i32);
        let tables = shape_tables(n);
        let columns: Vec<ColumnRule> = (0..grid.nx)
            .map(|cx| {
                let wx = grid.x_station_weights(cx);
                let hx = grid.hx(cx);
                let points = tables
                    .iter()
                    .map(|(si, _, _shape, dref)| {
                        let mut dphys = [[0.0; 3]; 8];
                        for l in 0..locals {
                            dphys[l][0] = dref[l][0] / hx;
                            dphys[l][1] = dref[l][1] / hy;
                            dphys[l][2] = dref[l][2] / hy;
                        }
                        PointRule { w: wx[*si] * lateral_factor, dphys }
                    })
                    .collect();
                ColumnRule { points }
            })
            .collect();
        let shapes: Vec<[f64; 8]> = tables.iter().map(|(_, _, shape, _)| *shape).collect();
        let node_masses = grid.node_masses();
        let boundary_masses = grid.boundary_masses();
        let pinned_values = scenario.pinned();
        let pinned_mask: Vec<bool> = pinned_values.iter().map(Option::is_some).collect();
        let mut disc = Self {
            scenario,
            exec,
            floor: 0.0,
            node_masses,
            boundary_masses,
            pinned_mask,
            pinned_values,
            columns,
            shapes,
            locals,
        };
        let sup = disc.gradient_sup(reference);
        disc.floor = disc.scenario.model.grad_floor * sup.max(1.0);
        Ok(disc)
    }

    pub fn grid(&self) -> &Grid {
        &self.scenario.grid
    }

    /// The frozen gradient clamp, in physical units.
    pub fn effective_floor(&self) -> f64 {
        self.floor
    }

    pub fn node_masses(&self) -> &[f64] {
        &self.node_masses
    }

    pub fn boundary_masses(&self) -> &[f64] {
        &self.boundary_masses
    }

    pub fn pinned_mask(&self) -> &[bool] {
        &self.pinned_mask
    }

    /// Overwrite pinned nodes with their cached trace values.
    pub fn impose_pins(&self, field: &mut Field) {
        for (v, pin) in field.values.iter_mut().zip(&self.pinned_values) {
            if let Some(p) = pin {
                *v = *p;
            }
        }
    }

    fn gather(&self, u: &Field, cid: usize) -> ([f64; 8], Vec<usize>) {
        let ids = self.grid().cell_nodes(cid);
        let mut loc = [0.0; 8];
        for (l, id) in ids.iter().enumerate() {
            loc[l] = u.values[*id];
        }
        (loc, ids)
    }

    fn cell_gradient(&self, loc: &[f64; 8], pt: &PointRule) -> [f64; 3] {
        let mut g = [0.0; 3];
        for l in 0..self.locals {
            g[0] += loc[l] * pt.dphys[l][0];
            g[1] += loc[l] * pt.dphys[l][1];
            g[2] += loc[l] * pt.dphys[l][2];
        }
        g
    }

    /// Largest gradient magnitude over all quadrature points.
    pub fn gradient_sup(&self, u: &Field) -> f64 {
        let per_cell = self.exec.run(self.grid().num_cells(), |cid| {
            let (_, cx) = self.grid().cell_multi(cid);
            let (loc, _) = self.gather(u, cid);
            let mut sup: f64 = 0.0;
            for pt in &self.columns[cx].points {
                let g = self.cell_gradient(&loc, pt);
                sup = sup.max((g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt());
            }
            sup
        });
        per_cell.into_iter().fold(0.0, f64::max)
    }

    /// Discrete energy of the state.
    pub fn energy(&self, u: &Field) -> f64 {
        let model = &self.scenario.model;
        let per_cell = self.exec.run(self.grid().num_cells(), |cid| {
            let (_, cx) = self.grid().cell_multi(cid);
            let (loc, _) = self.gather(u, cid);
            let mut acc = 0.0;
            for pt in &self.columns[cx].points {
                let g = self.cell_gradient(&loc, pt);
                let t = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                acc += pt.w * model.profile_primitive_with(t, self.floor);
            }
            acc
        });
        let bulk = exec::sum(&per_cell);
        let nodal = self.exec.run(u.len(), |i| {
            self.node_masses[i] * self.scenario.reaction.primitive(u.values[i])
                - self.boundary_masses[i] * self.scenario.flux.primitive(u.values[i])
        });
        bulk + exec::sum(&nodal)
    }

    /// `∫ a(x, |∇u|) |∇u|²` under the frozen clamp; the coefficient-weighted
    /// gradient energy, not the full functional.
    pub fn weighted_gradient_integral(&self, u: &Field) -> f64 {
        let model = &self.scenario.model;
        let per_cell = self.exec.run(self.grid().num_cells(), |cid| {
            let (_, cx) = self.grid().cell_multi(cid);
            let (loc, _) = self.gather(u, cid);
            let mut acc = 0.0;
            for pt in &self.columns[cx].points {
                let g = self.cell_gradient(&loc, pt);
                let t = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let (a, _) = model.curvature_scalars_with(t, self.floor);
                acc += pt.w * a * t * t;
            }
            acc
        });
        exec::sum(&per_cell)
    }

    /// `∫ w ⟨𝓑(∇u) ∇ξ, ∇ζ⟩` on the same quadrature as the residual, with an
    /// optional nodal weight interpolated to the quadrature points.
    pub fn weighted_b_form(
        &self,
        u: &Field,
        xi: &Field,
        zeta: &Field,
        weight: Option<&[f64]>,
    ) -> f64 {
        let model = &self.scenario.model;
        let per_cell = self.exec.run(self.grid().num_cells(), |cid| {
            let (_, cx) = self.grid().cell_multi(cid);
            let (lu, ids) = self.gather(u, cid);
            let (lx, _) = self.gather(xi, cid);
            let (lz, _) = self.gather(zeta, cid);
            let mut lw = [1.0; 8];
            if let Some(w) = weight {
                for (l, id) in ids.iter().enumerate() {
                    lw[l] = w[*id];
                }
            }
            let mut acc = 0.0;
            for (k, pt) in self.columns[cx].points.iter().enumerate() {
                let g = self.cell_gradient(&lu, pt);
                let gx = self.cell_gradient(&lx, pt);
                let gz = self.cell_gradient(&lz, pt);
                let t = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let (a, c) = model.curvature_scalars_with(t, self.floor);
                let wval = if weight.is_some() {
                    let sh = &self.shapes[k];
                    let mut s = 0.0;
                    for l in 0..self.locals {
                        s += sh[l] * lw[l];
                    }
                    s
                } else {
                    1.0
                };
                let xz = gx[0] * gz[0] + gx[1] * gz[1] + gx[2] * gz[2];
                let ux = g[0] * gx[0] + g[1] * gx[1] + g[2] * gx[2];
                let uz = g[0] * gz[0] + g[1] * gz[1] + g[2] * gz[2];
                acc += pt.w * wval * (a * xz + c * ux * uz);
            }
            acc
        });
        exec::sum(&per_cell)
    }

    fn elem_residual(&self, loc: &[f64; 8], cx: usize) -> [f64; 8] {
        let model = &self.scenario.model;
        let mut res = [0.0; 8];
        for pt in &self.columns[cx].points {
            let g = self.cell_gradient(loc, pt);
            let t = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            let (a, _) = model.curvature_scalars_with(t, self.floor);
            for l in 0..self.locals {
                let d = &pt.dphys[l];
                res[l] += pt.w * a * (g[0] * d[0] + g[1] * d[1] + g[2] * d[2]);
            }
        }
        res
    }

    fn elem_block(&self, loc: &[f64; 8], cx: usize) -> ElemData {
        let model = &self.scenario.model;
        let mut mat = [0.0; 36];
        let mut res = [0.0; 8];
        for pt in &self.columns[cx].points {
            let g = self.cell_gradient(loc, pt);
            let t = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            let (a, c) = model.curvature_scalars_with(t, self.floor);
            let mut gdots = [0.0; 8];
            for l in 0..self.locals {
                let d = &pt.dphys[l];
                gdots[l] = g[0] * d[0] + g[1] * d[1] + g[2] * d[2];
                res[l] += pt.w * a * gdots[l];
            }
            for i in 0..self.locals {
                let di = &pt.dphys[i];
                for j in i..self.locals {
                    let dj = &pt.dphys[j];
                    let dd = di[0] * dj[0] + di[1] * dj[1] + di[2] * dj[2];
                    mat[packed(i, j)] += pt.w * (a * dd + c * gdots[i] * gdots[j]);
                }
            }
        }
        ElemData { mat, res }
    }

    /// Ids of the cells adjacent to a node, paired with the node's local
    /// index in each, in a fixed order.
    fn adjacent_cells(&self, id: usize) -> Vec<(usize, usize)> {
        let grid = self.grid();
        let (iy, ix) = grid.node_multi(id);
        let mut out = Vec::with_capacity(1 << (grid.n + 1));
        let ky2_range = if grid.n == 2 { 0..2 } else { 0..1 };
        for ky2 in ky2_range {
            if grid.n == 2 && (iy[1] < ky2 || iy[1] - ky2 >= grid.ny) {
                continue;
            }
            for ky1 in 0..2usize {
                if iy[0] < ky1 || iy[0] - ky1 >= grid.ny {
                    continue;
                }
                for kx in 0..2usize {
                    if ix < kx || ix - kx >= grid.nx {
                        continue;
                    }
                    let cid = grid.cell_index([iy[0] - ky1, iy[1] - ky2], ix - kx);
                    out.push((cid, kx | (ky1 << 1) | (ky2 << 2)));
                }
            }
        }
        out
    }

    /// First variation of the energy, with pinned entries zeroed.
    pub fn residual(&self, u: &Field) -> Vec<f64> {
        let cells = self.exec.run(self.grid().num_cells(), |cid| {
            let (_, cx) = self.grid().cell_multi(cid);
            let (loc, _) = self.gather(u, cid);
            self.elem_residual(&loc, cx)
        });
        self.exec.run(u.len(), |id| {
            if self.pinned_mask[id] {
                return 0.0;
            }
            let mut r = 0.0;
            for (cid, l) in self.adjacent_cells(id) {
                r += cells[cid][l];
            }
            r + self.node_masses[id] * self.scenario.reaction.eval(u.values[id])
                - self.boundary_masses[id] * self.scenario.flux.eval(u.values[id])
        })
    }

    /// Residual and Jacobian together. The Jacobian is exactly symmetric and
    /// has pinned rows and columns eliminated.
    pub fn assemble(&self, u: &Field) -> (Vec<f64>, Csr) {
        let grid = self.grid();
        let cells = self.exec.run(grid.num_cells(), |cid| {
            let (_, cx) = grid.cell_multi(cid);
            let (loc, _) = self.gather(u, cid);
            self.elem_block(&loc, cx)
        });
        let mut jac = Csr::grid_pattern(grid);
        let residual = self.exec.run(u.len(), |id| {
            if self.pinned_mask[id] {
                return 0.0;
            }
            let mut r = 0.0;
            for (cid, l) in self.adjacent_cells(id) {
                r += cells[cid].res[l];
            }
            r + self.node_masses[id] * self.scenario.reaction.eval(u.values[id])
                - self.boundary_masses[id] * self.scenario.flux.eval(u.values[id])
        });
        // row-parallel value fill: rows own disjoint ranges of vals
        let row_vals: Vec<Vec<f64>> = self.exec.run(u.len(), |id| {
            let (cols, _) = jac.row(id);
            let mut vals = vec![0.0; cols.len()];
            for (cid, l) in self.adjacent_cells(id) {
                let ids = grid.cell_nodes(cid);
                for (l2, jid) in ids.iter().enumerate() {
                    let k = cols.binary_search(jid).expect("cell node outside stencil");
                    vals[k] += cells[cid].mat[packed(l, l2)];
                }
            }
            let k = cols.binary_search(&id).expect("diagonal in stencil");
            vals[k] += self.node_masses[id] * self.scenario.reaction.deriv(u.values[id])
                - self.boundary_masses[id] * self.scenario.flux.deriv(u.values[id]);
            vals
        });
        let mut flat = Vec::with_capacity(jac.vals.len());
        for rv in row_vals {
            flat.extend_from_slice(&rv);
        }
        jac.vals = flat;
        jac.pin(&self.pinned_mask);
        (residual, jac)
    }

    /// Jacobian without the pinned-row elimination; the raw second
    /// variation.
    pub fn second_variation(&self, u: &Field) -> Csr {
        let grid = self.grid();
        let cells = self.exec.run(grid.num_cells(), |cid| {
            let (_, cx) = grid.cell_multi(cid);
            let (loc, _) = self.gather(u, cid);
            self.elem_block(&loc, cx)
        });
        let mut jac = Csr::grid_pattern(grid);
        let row_vals: Vec<Vec<f64>> = self.exec.run(grid.num_nodes(), |id| {
            let (cols, _) = jac.row(id);
            let mut vals = vec![0.0; cols.len()];
            for (cid, l) in self.adjacent_cells(id) {
                let ids = grid.cell_nodes(cid);
                for (l2, jid) in ids.iter().enumerate() {
                    let k = cols.binary_search(jid).expect("cell node outside stencil");
                    vals[k] += cells[cid].mat[packed(l, l2)];
                }
            }
            let k = cols.binary_search(&id).expect("diagonal in stencil");
            vals[k] += self.node_masses[id] * self.scenario.reaction.deriv(u.values[id])
                - self.boundary_masses[id] * self.scenario.flux.deriv(u.values[id]);
            vals
        });
        let mut flat = Vec::with_capacity(jac.vals.len());
        for rv in row_vals {
            flat.extend_from_slice(&rv);
        }
        jac.vals = flat;
        jac
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the Euclidean residual norm.
    pub residual_tolerance: f64,
    /// Step fraction each line search opens with, in `(0, 1]`.
    pub damping: f64,
    /// Smallest step fraction tried before giving up on an iteration.
    pub damping_floor: f64,
    pub linear_rtol: f64,
    pub linear_max_iterations: usize,
    /// Systems up to this size go through dense LU, larger ones through
    /// preconditioned MINRES.
    pub dense_limit: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 40,
            residual_tolerance: 1e-10,
            damping: 1.0,
            damping_floor: (2.0f64).powi(-10),
            linear_rtol: 1e-10,
            linear_max_iterations: 4000,
            dense_limit: sparse::DENSE_LIMIT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Euclidean residual norm before each Newton step, plus the final one.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm of the returned iterate; `converged` implies it is at
    /// or below the tolerance.
    pub final_residual_norm: f64,
    /// `∫ a |∇u|²` of the returned iterate.
    pub energy_integral: f64,
    pub damped_steps: usize,
    pub linear_iterations: usize,
    pub warnings: Vec<String>,
}

/// Damped Newton iteration. A singular Jacobian is an error; failure to
/// converge is not, it returns the best iterate with `converged: false` and
/// a warning.
pub fn newton_solve(
    disc: &Discretization,
    seed: &Field,
    opts: &NewtonOptions,
) -> Result<(Field, SolveReport)> {
    seed.matches(disc.grid())?;
    if opts.max_iterations == 0 {
        return Err(Error::Domain("newton needs max_iterations >= 1".into()));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Domain("newton damping must lie in (0, 1]".into()));
    }
    let mut u = seed.clone();
    disc.impose_pins(&mut u);

    let mut report = SolveReport {
        residual_norms: Vec::new(),
        iterations: 0,
        converged: false,
        final_residual_norm: f64::INFINITY,
        energy_integral: f64::NAN,
        damped_steps: 0,
        linear_iterations: 0,
        warnings: Vec::new(),
    };

    let mut best = u.clone();
    let mut best_norm = f64::INFINITY;

    for _ in 0..opts.max_iterations {
        let (res, jac) = disc.assemble(&u);
        let rnorm = crate::numeric::l2_norm(&res);
        report.residual_norms.push(rnorm);
        if rnorm < best_norm {
            best_norm = rnorm;
            best = u.clone();
        }
        if rnorm <= opts.residual_tolerance {
            report.converged = true;
            report.final_residual_norm = rnorm;
            report.energy_integral = disc.weighted_gradient_integral(&u);
            return Ok((u, report));
        }
        report.iterations += 1;

        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = if jac.n <= opts.dense_limit {
            sparse::solve_dense(&jac, &rhs)?
        } else {
            let pre = sparse::jacobi_inverse(&jac.diag());
            let out = sparse::minres(
                &jac,
                &rhs,
                &pre,
                opts.linear_rtol,
                opts.linear_max_iterations,
                disc.exec,
            );
            report.linear_iterations += out.iterations;
            if !out.converged {
                report.warnings.push(format!(
                    "linear solve stalled at relative residual {:.3e}",
                    out.relative_residual
                ));
            }
            out.x
        };

        let mut lambda = opts.damping;
        let mut accepted = false;
        while lambda >= opts.damping_floor {
            let mut trial = u.clone();
            for (t, d) in trial.values.iter_mut().zip(&step) {
                *t += lambda * d;
            }
            let tnorm = crate::numeric::l2_norm(&disc.residual(&trial));
            if tnorm <= opts.residual_tolerance || tnorm < rnorm * (1.0 - 1e-4 * lambda) {
                u = trial;
                if lambda < opts.damping {
                    report.damped_steps += 1;
                }
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            report.warnings.push(format!(
                "no residual decrease at damping floor (norm {rnorm:.3e})"
            ));
            report.residual_norms.push(best_norm);
            report.final_residual_norm = best_norm;
            report.energy_integral = disc.weighted_gradient_integral(&best);
            return Ok((best, report));
        }
    }

    let final_norm = crate::numeric::l2_norm(&disc.residual(&u));
    report.residual_norms.push(final_norm);
    if final_norm < best_norm {
        best_norm = final_norm;
        best = u;
    }
    report.converged = best_norm <= opts.residual_tolerance;
    if !report.converged {
        report.warnings.push(format!(
            "iteration budget exhausted at residual {best_norm:.3e}"
        ));
    }
    report.final_residual_norm = best_norm;
    report.energy_integral = disc.weighted_gradient_integral(&best);
    Ok((best, report))
}

/// Sup over wall nodes of the defect in the natural boundary condition,
/// `|-a(x₁/2, |∇u|) ∂ₓu - f(u)|`, with `∂ₓu` the two-point difference across
/// the first graded cell and the lateral gradient taken at the wall. First
/// order in the cell height; a solved state drives it to `O(h)`, anything
/// else leaves an `O(1)` defect.
pub fn boundary_flux_check(scenario: &Scenario, u: &Field) -> Result<f64> {
    u.matches(&scenario.grid)?;
    let grid = &scenario.grid;
    let x1 = grid.x_nodes[1];
    let mu_mid = scenario.model.mu(x1 / 2.0);
    let nyn = grid.nyn();
    let lat = |vals: &[f64], iy: [usize; 2], axis: usize| -> f64 {
        let pos = iy[axis];
        let tri = if pos == 0 {
            [0, 1, 2]
        } else if pos == nyn - 1 {
            [nyn - 3, nyn - 2, nyn - 1]
        } else {
            [pos - 1, pos, pos + 1]
        };
        let at = tri.iter().position(|k| *k == pos).unwrap();
        let z = [grid.y_nodes[tri[0]], grid.y_nodes[tri[1]], grid.y_nodes[tri[2]]];
        let w = crate::numeric::deriv3_weights(z, at);
        let mut s = 0.0;
        for k in 0..3 {
            let id = match axis {
                0 => grid.node_index([tri[k], iy[1]], 0),
                _ => grid.node_index([iy[0], tri[k]], 0),
            };
            s += w[k] * vals[id];
        }
        s
    };
    let mut sup = 0.0f64;
    let mut iy2 = 0;
    loop {
        for iy1 in 0..nyn {
            let iy = [iy1, iy2];
            let id0 = grid.node_index(iy, 0);
            let ux = (u.values[grid.node_index(iy, 1)] - u.values[id0]) / x1;
            let g1 = lat(&u.values, iy, 0);
            let g2 = if grid.n == 2 { lat(&u.values, iy, 1) } else { 0.0 };
            let t = (ux * ux + g1 * g1 + g2 * g2).sqrt();
            let a = mu_mid * scenario.model.profile(t);
            let defect = -a * ux - scenario.flux.eval(u.values[id0]);
            sup = sup.max(defect.abs());
        }
        iy2 += 1;
        if grid.n == 1 || iy2 == nyn {
            break;
        }
    }
    Ok(sup)
}
