//! Restarted GMRES with right diagonal preconditioning.

use crate::error::{numeric, Result};

#[allow(dead_code)]
pub(crate) struct Solve {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` to relative residual `rtol` within `max_iter` Arnoldi steps.
pub(crate) fn gmres(
    op: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    precond: &[f64],
    rtol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<Solve> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(Solve { x, residual: 0.0, iterations: 0 });
    }
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iter {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rtol {
            return Ok(Solve { x, residual: rel, iterations: total });
        }
        let m = restart.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut gvec = vec![0.0; m + 1];
        gvec[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            let z: Vec<f64> = v[j].iter().zip(precond).map(|(a, p)| a * p).collect();
            let mut w = op(&z);
            // Modified Gram–Schmidt, twice for stability.
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dotp(&w, vi);
                    h[i][j] += hij;
                    w.iter_mut().zip(vi).for_each(|(a, b)| *a -= hij * b);
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if d == 0.0 {
                k_used = j;
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            gvec[j + 1] = -sn[j] * gvec[j];
            gvec[j] *= cs[j];
            k_used = j + 1;
            total += 1;
            if (gvec[j + 1].abs() / bnorm) <= rtol * 0.5 || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = gvec[i];
            for (k, yk) in y.iter().enumerate().take(k_used).skip(i + 1) {
                s -= h[i][k] * yk;
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, (vk, pk)) in x.iter_mut().zip(v[i].iter().zip(precond)) {
                *xk += yi * vk * pk;
            }
        }
        if k_used == 0 {
            break;
        }
    }
    let ax = op(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let final_rel = norm(&r) / bnorm;
    if final_rel <= rtol {
        return Ok(Solve { x, residual: final_rel, iterations: total });
    }
    numeric(format!("GMRES stalled after {total} iterations"), final_rel.min(rel.max(final_rel)))
}
