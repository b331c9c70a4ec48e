//! Symmetric sparse matrices on the tensor-grid stencil, with two solvers:
//! dense LU for small systems and preconditioned MINRES for the rest.
//!
//! MINRES rather than CG: the Jacobian couples a positive bulk form with
//! boundary reaction terms of either sign, so it is symmetric but in general
//! indefinite.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::grid::Grid;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Zero matrix on the full tensor stencil: node `i` couples to every
    /// node within index distance 1 along each axis. Columns ascend within
    /// each row.
    pub fn grid_pattern(grid: &Grid) -> Csr {
        let n = grid.num_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        let reach = |i: usize, max: usize| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(max);
            lo..=hi
        };
        for id in 0..n {
            let (iy, ix) = grid.node_multi(id);
            match grid.n {
                1 => {
                    for jy in reach(iy[0], grid.ny) {
                        for jx in reach(ix, grid.nx) {
                            col_idx.push(grid.node_index([jy, 0], jx));
                        }
                    }
                }
                _ => {
                    for jy2 in reach(iy[1], grid.ny) {
                        for jy1 in reach(iy[0], grid.ny) {
                            for jx in reach(ix, grid.nx) {
                                col_idx.push(grid.node_index([jy1, jy2], jx));
                            }
                        }
                    }
                }
            }
            let start = *row_ptr.last().unwrap();
            col_idx[start..].sort_unstable();
            row_ptr.push(col_idx.len());
        }
        let vals = vec![0.0; col_idx.len()];
        Csr { n, row_ptr, col_idx, vals }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    fn pos(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pos(i, j).expect("entry outside the stencil pattern");
        self.vals[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pos(i, j).expect("entry outside the stencil pattern");
        self.vals[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pos(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn zero_values(&mut self) {
        self.vals.fill(0.0);
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Symmetric elimination of pinned unknowns: pinned rows and columns are
    /// zeroed and the diagonal set to 1. Exact because pinned corrections
    /// are zero.
    pub fn pin(&mut self, pinned: &[bool]) {
        assert_eq!(pinned.len(), self.n);
        for i in 0..self.n {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            for k in r {
                let j = self.col_idx[k];
                if pinned[i] || pinned[j] {
                    self.vals[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    /// `y = A x`, rows in parallel under `exec`.
    pub fn spmv(&self, x: &[f64], exec: Exec) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        exec.run(self.n, |i| {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (j, v) in cols.iter().zip(vals) {
                acc += v * x[*j];
            }
            acc
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                m[(i, *j)] = *v;
            }
        }
        m
    }

    /// Largest row-asymmetry `|a_ij - a_ji|`; zero for exact assembly.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*j, i)).abs());
            }
        }
        worst
    }
}

/// Threshold below which Newton steps go through dense LU.
pub const DENSE_LIMIT: usize = 2048;

/// Relative pivot size under which LU reports a singular system.
const PIVOT_TOL: f64 = 1e-13;

pub fn solve_dense(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let m = a.to_dense();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let lu = m.lu();
    let mut min_pivot = f64::INFINITY;
    for i in 0..a.n {
        min_pivot = min_pivot.min(lu.u()[(i, i)].abs());
    }
    if !(min_pivot > PIVOT_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularJacobian { pivot: min_pivot });
    }
    let rhs = DVector::from_column_slice(b);
    let x = lu.solve(&rhs).ok_or(Error::SingularJacobian { pivot: min_pivot })?;
    Ok(x.as_slice().to_vec())
}

#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned MINRES for symmetric (possibly indefinite) `A`.
/// `precond_inv` holds the elementwise inverse of a positive diagonal
/// preconditioner. Dot products are sequential so results do not depend on
/// the thread count.
pub fn minres(
    a: &Csr,
    b: &[f64],
    precond_inv: &[f64],
    rtol: f64,
    max_iterations: usize,
    exec: Exec,
) -> MinresOutcome {
    let n = a.n;
    let apply_m = |r: &[f64]| -> Vec<f64> {
        r.iter().zip(precond_inv).map(|(v, d)| v * d).collect()
    };
    let mut x = vec![0.0; n];
    let bnorm = crate::numeric::l2_norm(b);
    if bnorm == 0.0 {
        return MinresOutcome { x, iterations: 0, relative_residual: 0.0, converged: true };
    }

    let mut r1 = b.to_vec();
    let mut y = apply_m(&r1);
    let beta1_sq = exec::sum(&r1.iter().zip(&y).map(|(a, b)| a * b).collect::<Vec<_>>());
    if beta1_sq <= 0.0 {
        return MinresOutcome { x, iterations: 0, relative_residual: 1.0, converged: false };
    }
    let beta1 = beta1_sq.sqrt();

    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs: f64 = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut iterations = 0;

    for itn in 1..=max_iterations {
        iterations = itn;
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|vi| vi * s).collect();
        let mut ay = a.spmv(&v, exec);
        if itn >= 2 {
            let c = beta / oldb;
            for (ai, r) in ay.iter_mut().zip(&r1) {
                *ai -= c * r;
            }
        }
        let alfa = crate::numeric::dot(&v, &ay);
        let c = alfa / beta;
        for (ai, r) in ay.iter_mut().zip(&r2) {
            *ai -= c * r;
        }
        r1 = std::mem::replace(&mut r2, ay);
        y = apply_m(&r2);
        oldb = beta;
        let beta_sq = crate::numeric::dot(&r2, &y);
        if beta_sq < 0.0 {
            // indefinite preconditioner surface; bail with what we have
            break;
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = (0..n)
            .map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma)
            .collect();
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += phi * wi;
        }

        if phibar <= rtol * beta1 || beta <= f64::EPSILON * beta1 {
            break;
        }
    }

    // true residual, not the recurrence estimate
    let ax = a.spmv(&x, exec);
    let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let relative_residual = crate::numeric::l2_norm(&res) / bnorm;
    MinresOutcome { x, iterations, relative_residual, converged: relative_residual <= 10.0 * rtol }
}

/// Elementwise inverse of `max(|diag|, floor)`; the Jacobi preconditioner.
pub fn jacobi_inverse(diag: &[f64]) -> Vec<f64> {
    let scale = diag.iter().fold(0.0f64, |s, d| s.max(d.abs()));
    let floor = if scale > 0.0 { 1e-14 * scale } else { 1.0 };
    diag.iter().map(|d| 1.0 / d.abs().max(floor)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d(n: usize) -> Csr {
        let grid = Grid::new(1, n - 1, 2, 1.0, 1.0, 0.0).unwrap();
        // hand-build a tridiagonal CSR instead of using the grid stencil
        let _ = grid;
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                col_idx.push(j);
            }
            row_ptr.push(col_idx.len());
        }
        let vals = vec![0.0; col_idx.len()];
        let mut a = Csr { n, row_ptr, col_idx, vals };
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn pattern_covers_stencil_neighbours() {
        let grid = Grid::new(2, 3, 3, 1.0, 1.0, 0.0).unwrap();
        let a = Csr::grid_pattern(&grid);
        assert_eq!(a.n, grid.num_nodes());
        for i in 0..a.n {
            let (iy, ix) = grid.node_multi(i);
            let (cols, _) = a.row(i);
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
            for j in cols {
                let (jy, jx) = grid.node_multi(*j);
                assert!(ix.abs_diff(jx) <= 1);
                assert!(iy[0].abs_diff(jy[0]) <= 1);
                assert!(iy[1].abs_diff(jy[1]) <= 1);
            }
            assert!(cols.contains(&i));
        }
    }

    #[test]
    fn spmv_matches_dense() {
        let grid = Grid::new(2, 3, 2, 1.0, 1.0, 0.25).unwrap();
        let mut a = Csr::grid_pattern(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..a.n {
            let (cols, _) = a.row(i);
            for j in cols.to_vec() {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let x: Vec<f64> = (0..a.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dense = a.to_dense();
        let want = &dense * DVector::from_column_slice(&x);
        let got = a.spmv(&x, Exec::Sequential);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-13);
        }
        let got_par = a.spmv(&x, Exec::Auto);
        assert_eq!(got, got_par);
    }

    #[test]
    fn dense_solver_roundtrip() {
        let a = laplacian_1d(40);
        let x_true: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.spmv(&x_true, Exec::Sequential);
        let x = solve_dense(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_solver_flags_singularity() {
        let mut a = laplacian_1d(10);
        for j in 0..10 {
            let v = a.get(1, j);
            if v != 0.0 {
                a.set(1, j, 0.0);
            }
        }
        match solve_dense(&a, &vec![1.0; 10]) {
            Err(Error::SingularJacobian { .. }) => {}
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn minres_solves_indefinite_system() {
        // shifted Laplacian with mixed-sign spectrum
        let mut a = laplacian_1d(120);
        for i in 0..120 {
            let d = a.get(i, i);
            a.set(i, i, d - 1.3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x_true: Vec<f64> = (0..120).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.spmv(&x_true, Exec::Sequential);
        let pre = jacobi_inverse(&a.diag());
        let out = minres(&a, &b, &pre, 1e-12, 2000, Exec::Sequential);
        assert!(out.converged, "relres = {}", out.relative_residual);
        for (xi, ti) in out.x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-7, "{xi} vs {ti}");
        }
    }

    #[test]
    fn minres_agrees_with_dense_lu() {
        let grid = Grid::new(1, 6, 5, 1.0, 1.0, 0.0).unwrap();
        let mut a = Csr::grid_pattern(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // random symmetric fill over the pattern, diagonally weighted
        for i in 0..a.n {
            let (cols, _) = a.row(i);
            for j in cols.to_vec() {
                if j < i {
                    continue;
                }
                let v = if i == j {
                    rng.gen_range(2.0..3.0)
                } else {
                    rng.gen_range(-0.4..0.4)
                };
                a.set(i, j, v);
                if i != j {
                    a.set(j, i, v);
                }
            }
        }
        assert_eq!(a.asymmetry(), 0.0);
        let b: Vec<f64> = (0..a.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dense = solve_dense(&a, &b).unwrap();
        let pre = jacobi_inverse(&a.diag());
        let out = minres(&a, &b, &pre, 1e-13, 4000, Exec::Sequential);
        assert!(out.converged);
        for (m, d) in out.x.iter().zip(&dense) {
            assert!((m - d).abs() < 1e-8, "{m} vs {d}");
        }
    }

    #[test]
    fn pinning_is_symmetric_and_identity_on_pins() {
        let grid = Grid::new(1, 4, 3, 1.0, 1.0, 0.0).unwrap();
        let mut a = Csr::grid_pattern(&grid);
        for i in 0..a.n {
            let (cols, _) = a.row(i);
            for j in cols.to_vec() {
                a.set(i, j, 1.0 + (i + j) as f64);
            }
        }
        let pinned: Vec<bool> = (0..a.n).map(|i| grid.is_far(i)).collect();
        // symmetrise first so asymmetry comes only from pinning if broken
        let mut sym = a.clone();
        for i in 0..a.n {
            let (cols, _) = a.row(i);
            for j in cols.to_vec() {
                let v = 0.5 * (a.get(i, j) + a.get(j, i));
                sym.set(i, j, v);
            }
        }
        sym.pin(&pinned);
        assert_eq!(sym.asymmetry(), 0.0);
        for (i, p) in pinned.iter().enumerate() {
            if *p {
                let (cols, vals) = sym.row(i);
                for (j, v) in cols.iter().zip(vals) {
                    assert_eq!(*v, if i == *j { 1.0 } else { 0.0 });
                }
            }
        }
    }
}
