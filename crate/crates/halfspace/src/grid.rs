//! Tensor grid on the truncated half-space `[-Y, Y]^n × [0, X]`.
//!
//! Lateral axes are uniform. The wall-normal axis is graded toward `x = 0`
//! by `x_i = X (i/nx)^γ` with `γ = max(1, 2/(1+α))`, which equidistributes
//! the weighted measure `x^α dx` well enough that the first cell does not
//! dominate quadrature error.
//!
//! All integrals of `μ(x) = x^α` are taken per cell in closed form through
//! [`Grid::x_moments`]; nothing ever evaluates `x^α` at `x = 0`.

use crate::error::{Error, Result};

/// Lateral counts are cells, not nodes: a grid with `ny = 4` has 5 nodes per
/// lateral axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Lateral dimension `n`, 1 or 2. Points live in `ℝ^n × (0, ∞)`.
    pub n: usize,
    /// Cells per lateral axis.
    pub ny: usize,
    /// Cells across the slab.
    pub nx: usize,
    /// Lateral half-width `Y`.
    pub y_extent: f64,
    /// Slab depth `X`; the top `x = X` truncates the half-space.
    pub x_extent: f64,
    /// Weight exponent, copied from the model so moments stay consistent.
    pub alpha: f64,
    /// Grading exponent of the wall-normal axis.
    pub gamma: f64,
    pub y_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
}

impl Grid {
    pub fn new(
        n: usize,
        ny: usize,
        nx: usize,
        y_extent: f64,
        x_extent: f64,
        alpha: f64,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if !(n == 1 || n == 2) {
            problems.push(format!("lateral dimension must be 1 or 2 (got {n})"));
        }
        if ny < 2 || nx < 2 {
            problems.push(format!("need at least 2 cells per axis (got ny = {ny}, nx = {nx})"));
        }
        if !(y_extent.is_finite() && y_extent > 0.0) {
            problems.push(format!("y_extent must be positive (got {y_extent})"));
        }
        if !(x_extent.is_finite() && x_extent > 0.0) {
            problems.push(format!("x_extent must be positive (got {x_extent})"));
        }
        if !(alpha.is_finite() && alpha > -1.0 && alpha < 1.0) {
            problems.push(format!("alpha must lie strictly inside (-1, 1) (got {alpha})"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidGrid(problems.join("; ")));
        }
        let gamma = (2.0 / (1.0 + alpha)).max(1.0);
        let y_nodes: Vec<f64> = (0..=ny)
            .map(|i| -y_extent + 2.0 * y_extent * i as f64 / ny as f64)
            .collect();
        let x_nodes: Vec<f64> = (0..=nx)
            .map(|i| x_extent * (i as f64 / nx as f64).powf(gamma))
            .collect();
        Ok(Self { n, ny, nx, y_extent, x_extent, alpha, gamma, y_nodes, x_nodes })
    }

    pub fn nyn(&self) -> usize {
        self.ny + 1
    }

    pub fn nxn(&self) -> usize {
        self.nx + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nyn().pow(self.n as u32) * self.nxn()
    }

    pub fn num_cells(&self) -> usize {
        self.ny.pow(self.n as u32) * self.nx
    }

    /// Uniform lateral step.
    pub fn hy(&self) -> f64 {
        2.0 * self.y_extent / self.ny as f64
    }

    pub fn hx(&self, cx: usize) -> f64 {
        self.x_nodes[cx + 1] - self.x_nodes[cx]
    }

    /// Node id from lateral indices `(iy[0], iy[1])` and normal index `ix`;
    /// `iy[1]` is ignored when `n = 1`. The normal index varies fastest.
    pub fn node_index(&self, iy: [usize; 2], ix: usize) -> usize {
        match self.n {
            1 => iy[0] * self.nxn() + ix,
            _ => (iy[1] * self.nyn() + iy[0]) * self.nxn() + ix,
        }
    }

    pub fn node_multi(&self, id: usize) -> ([usize; 2], usize) {
        let ix = id % self.nxn();
        let rest = id / self.nxn();
        match self.n {
            1 => ([rest, 0], ix),
            _ => ([rest % self.nyn(), rest / self.nyn()], ix),
        }
    }

    /// Physical coordinates `((y1, y2), x)`; `y2 = 0` when `n = 1`.
    pub fn node_point(&self, id: usize) -> ([f64; 2], f64) {
        let (iy, ix) = self.node_multi(id);
        let y2 = if self.n == 2 { self.y_nodes[iy[1]] } else { 0.0 };
        ([self.y_nodes[iy[0]], y2], self.x_nodes[ix])
    }

    /// Distance of the node from the origin of the half-space.
    pub fn node_radius(&self, id: usize) -> f64 {
        let (y, x) = self.node_point(id);
        (y[0] * y[0] + y[1] * y[1] + x * x).sqrt()
    }

    /// Bottom face `x = 0`, where the flux condition lives.
    pub fn is_bottom(&self, id: usize) -> bool {
        self.node_multi(id).1 == 0
    }

    /// Truncation faces: lateral walls `|y_j| = Y` and the top `x = X`.
    pub fn is_far(&self, id: usize) -> bool {
        let (iy, ix) = self.node_multi(id);
        if ix == self.nx {
            return true;
        }
        (0..self.n).any(|j| iy[j] == 0 || iy[j] == self.ny)
    }

    pub fn cell_index(&self, cy: [usize; 2], cx: usize) -> usize {
        match self.n {
            1 => cy[0] * self.nx + cx,
            _ => (cy[1] * self.ny + cy[0]) * self.nx + cx,
        }
    }

    pub fn cell_multi(&self, cid: usize) -> ([usize; 2], usize) {
        let cx = cid % self.nx;
        let rest = cid / self.nx;
        match self.n {
            1 => ([rest, 0], cx),
            _ => ([rest % self.ny, rest / self.ny], cx),
        }
    }

    /// Node ids of a cell in local order `l = kx + 2·ky1 + 4·ky2` with each
    /// `k ∈ {0, 1}`; length 4 for `n = 1`, 8 for `n = 2`.
    pub fn cell_nodes(&self, cid: usize) -> Vec<usize> {
        let (cy, cx) = self.cell_multi(cid);
        let locals = 1usize << (self.n + 1);
        (0..locals)
            .map(|l| {
                let kx = l & 1;
                let ky1 = (l >> 1) & 1;
                let ky2 = (l >> 2) & 1;
                self.node_index([cy[0] + ky1, cy[1] + ky2], cx + kx)
            })
            .collect()
    }

    /// Closed-form moments `M_m = ∫ x^(α+m) dx` over cell `cx`, `m = 0, 1, 2`.
    pub fn x_moments(&self, cx: usize) -> [f64; 3] {
        let (lo, hi) = (self.x_nodes[cx], self.x_nodes[cx + 1]);
        let mut out = [0.0; 3];
        for (m, slot) in out.iter_mut().enumerate() {
            let e = self.alpha + m as f64 + 1.0;
            *slot = (hi.powf(e) - lo.powf(e)) / e;
        }
        out
    }

    /// Weights at the reference stations `ŝ = 0, 1/2, 1` reproducing
    /// `∫ μ q dx` exactly for quadratic `q`; the weighted Simpson rule.
    pub fn x_station_weights(&self, cx: usize) -> [f64; 3] {
        let [m0, m1, m2] = self.x_moments(cx);
        let (lo, h) = (self.x_nodes[cx], self.hx(cx));
        let r1 = (m1 - lo * m0) / h;
        let r2 = (m2 - 2.0 * lo * m1 + lo * lo * m0) / (h * h);
        [m0 - 3.0 * r1 + 2.0 * r2, 4.0 * (r1 - r2), 2.0 * r2 - r1]
    }

    /// Lumped `μ`-mass shares of the cell's left and right nodes:
    /// `∫ μ · (hat function) dx`. The two sum to `M₀`.
    pub fn x_lump(&self, cx: usize) -> (f64, f64) {
        let [m0, m1, _] = self.x_moments(cx);
        let (lo, hi) = (self.x_nodes[cx], self.x_nodes[cx + 1]);
        let h = hi - lo;
        ((hi * m0 - m1) / h, (m1 - lo * m0) / h)
    }

    /// Lumped node masses `m_i ≈ ∫ μ φ_i` over the slab. Positive, and they
    /// sum to `(2Y)^n · X^(1+α)/(1+α)`.
    pub fn node_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.num_nodes()];
        let y_share = (self.hy() / 2.0).powi(self.n as i32);
        for cid in 0..self.num_cells() {
            let (_, cx) = self.cell_multi(cid);
            let (wl, wr) = self.x_lump(cx);
            for (l, id) in self.cell_nodes(cid).into_iter().enumerate() {
                masses[id] += y_share * if l & 1 == 0 { wl } else { wr };
            }
        }
        masses
    }

    /// Plain Lebesgue node masses (no `μ`): tensor trapezoid shares. They
    /// sum to `(2Y)^n · X`.
    pub fn node_volumes(&self) -> Vec<f64> {
        let mut vols = vec![0.0; self.num_nodes()];
        let hy = self.hy();
        for id in 0..self.num_nodes() {
            let (iy, ix) = self.node_multi(id);
            let mut m = 1.0;
            for j in 0..self.n {
                let edge = iy[j] == 0 || iy[j] == self.ny;
                m *= if edge { hy / 2.0 } else { hy };
            }
            let left = if ix == 0 { 0.0 } else { self.x_nodes[ix] - self.x_nodes[ix - 1] };
            let right = if ix == self.nx { 0.0 } else { self.x_nodes[ix + 1] - self.x_nodes[ix] };
            vols[id] = m * 0.5 * (left + right);
        }
        vols
    }

    /// Lumped lateral masses of the bottom face, zero elsewhere. They sum to
    /// `(2Y)^n`.
    pub fn boundary_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.num_nodes()];
        let hy = self.hy();
        for id in 0..self.num_nodes() {
            let (iy, ix) = self.node_multi(id);
            if ix != 0 {
                continue;
            }
            let mut m = 1.0;
            for j in 0..self.n {
                let edge = iy[j] == 0 || iy[j] == self.ny;
                m *= if edge { hy / 2.0 } else { hy };
            }
            masses[id] = m;
        }
        masses
    }
}
