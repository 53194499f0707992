//! Finite-difference and interpolation weights on non-uniform samples.

/// Weights `w_j` with `Σ w_j f(x_j) ≈ f^{(m)}(x0)`, exact for polynomials of
/// degree `< xs.len()` (Fornberg's recursion).
pub(crate) fn fd_weights(xs: &[f64], x0: f64, m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Start of a `width`-point window around sample `i`, clamped to the ends.
pub(crate) fn window(len: usize, i: usize, width: usize) -> usize {
    let half = width / 2;
    i.saturating_sub(half).min(len.saturating_sub(width))
}

/// Sample indices and weights for `d/ds` at sample `i` using `width` points.
pub(crate) fn derivative_stencil(s: &[f64], i: usize, width: usize) -> (usize, Vec<f64>) {
    let width = width.min(s.len());
    let lo = window(s.len(), i, width);
    (lo, fd_weights(&s[lo..lo + width], s[i], 1))
}

/// Cubic Lagrange weights for evaluating at `x` from the four samples
/// surrounding the interval containing `x`.
pub(crate) fn cubic_stencil(s: &[f64], x: f64) -> (usize, Vec<f64>) {
    let n = s.len();
    let width = 4.min(n);
    let k = match s.partition_point(|v| *v <= x) {
        0 => 0,
        p => p - 1,
    };
    let lo = k.saturating_sub(1).min(n - width);
    (lo, fd_weights(&s[lo..lo + width], x, 0))
}

/// Weights of `∫_{s_i}^{s_{i+1}} p` for the cubic interpolant `p` through the
/// four samples around the interval (two-point Gauss, exact for cubics).
pub(crate) fn interval_weights(s: &[f64], i: usize) -> (usize, Vec<f64>) {
    let (a, b) = (s[i], s[i + 1]);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let (lo, _) = cubic_stencil(s, mid);
    let width = 4.min(s.len());
    let mut w = vec![0.0; width];
    for x in [mid - half / 3f64.sqrt(), mid + half / 3f64.sqrt()] {
        for (wj, c) in w.iter_mut().zip(fd_weights(&s[lo..lo + width], x, 0)) {
            *wj += half * c;
        }
    }
    (lo, w)
}

/// Running integrals `∫_{s_0}^{s_i} v` of the cubic interpolant of `v`.
pub(crate) fn cumulative_integrals(s: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    out.push(0.0);
    for i in 0..s.len().saturating_sub(1) {
        let (lo, w) = interval_weights(s, i);
        let piece: f64 = w.iter().zip(&v[lo..]).map(|(w, x)| w * x).sum();
        out.push(out[i] + piece);
    }
    out
}
