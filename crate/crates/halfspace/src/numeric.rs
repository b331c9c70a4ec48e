//! Small numerical utilities shared across modules.

/// Derivative weights of the quadratic interpolant through `(z[0], z[1], z[2])`,
/// evaluated at `z[at]`. Covers centered, one-sided and non-uniform stencils.
pub fn deriv3_weights(z: [f64; 3], at: usize) -> [f64; 3] {
    let t = z[at];
    let d01 = z[0] - z[1];
    let d02 = z[0] - z[2];
    let d12 = z[1] - z[2];
    [
        (2.0 * t - z[1] - z[2]) / (d01 * d02),
        (2.0 * t - z[0] - z[2]) / (-d01 * d12),
        (2.0 * t - z[0] - z[1]) / (d02 * d12),
    ]
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute accuracy `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let c = 0.5 * (lo + hi);
    let (fl, fc, fh) = (f(lo), f(c), f(hi));
    let whole = (hi - lo) / 6.0 * (fl + 4.0 * fc + fh);
    sign * simpson_recurse(f, lo, hi, fl, fc, fh, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let lm = 0.5 * (a + c);
    let rm = 0.5 * (c + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (c - a) / 6.0 * (fa + 4.0 * flm + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, c, fa, flm, fc, left, 0.5 * tol, depth - 1)
            + simpson_recurse(f, c, b, fc, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Least-squares slope of `ln y` against `ln x`. `None` when fewer than two
/// usable points remain (non-positive values are not usable).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((m * sxy - sx * sy) / denom)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
