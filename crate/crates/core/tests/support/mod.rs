//! Slow, independent reference computations used as test oracles.
#![allow(dead_code)]

use kstep_core::models::cem::{CEMDataset, CemVariant, KernelSpec};
use kstep_core::models::cox_cs::CSDataset;
use kstep_core::models::plm::PLMDataset;
use kstep_core::{Matrix, Vector};

/// Maximizer of the current-status log-likelihood over nondecreasing
/// hazards whose values at the distinct observation times lie on a grid.
#[derive(Debug, Clone)]
pub struct CoxGridOptimum {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub loglik: f64,
}

/// Exhaustive search over monotone grid vectors (exact dynamic programming
/// over the chain order), then repeated local refinement around the best
/// vector until the grid step drops below `tol`.
pub fn cox_grid_oracle(data: &CSDataset, theta: &[f64], upper: f64, step: f64, tol: f64) -> CoxGridOptimum {
    let mut times: Vec<f64> = data.y.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    // (delta, exp(theta'z)) per distinct time
    let groups: Vec<Vec<(bool, f64)>> = times
        .iter()
        .map(|t| {
            (0..data.len())
                .filter(|&i| data.y[i] == *t)
                .map(|i| {
                    let lin: f64 = data.z[i].iter().zip(theta).map(|(a, b)| a * b).sum();
                    (data.delta[i], lin.exp())
                })
                .collect()
        })
        .collect();
    let term = |j: usize, v: f64| -> f64 {
        groups[j]
            .iter()
            .map(|&(d, c)| if d { (1.0 - (-v * c).exp()).ln() } else { -v * c })
            .sum()
    };

    let m = times.len();
    let coarse: Vec<f64> = (0..=((upper / step).round() as usize)).map(|i| i as f64 * step).collect();
    let mut candidates = vec![coarse; m];
    let mut h = step;
    loop {
        let (values, loglik) = chain_dp(&candidates, &term);
        if h <= tol {
            return CoxGridOptimum { times, values, loglik };
        }
        let fine = h / 10.0;
        candidates = values
            .iter()
            .map(|c| {
                let mut v: Vec<f64> = (-20..=20).map(|i| (c + i as f64 * fine).clamp(0.0, upper)).collect();
                v.dedup();
                v
            })
            .collect();
        h = fine;
    }
}

/// Maximizes `Σ_j f(j, v_j)` over `v_j ∈ candidates[j]` with `v_1 ≤ … ≤ v_m`.
fn chain_dp(candidates: &[Vec<f64>], f: &dyn Fn(usize, f64) -> f64) -> (Vec<f64>, f64) {
    let m = candidates.len();
    let mut best: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(m);
    for j in 0..m {
        let cur = &candidates[j];
        let mut b = vec![f64::NEG_INFINITY; cur.len()];
        let mut p = vec![usize::MAX; cur.len()];
        if j == 0 {
            for (a, v) in cur.iter().enumerate() {
                b[a] = f(0, *v);
            }
        } else {
            let prev = &candidates[j - 1];
            let mut ptr = 0;
            let mut run_best = f64::NEG_INFINITY;
            let mut run_arg = usize::MAX;
            for (a, v) in cur.iter().enumerate() {
                while ptr < prev.len() && prev[ptr] <= *v {
                    if best[j - 1][ptr] > run_best {
                        run_best = best[j - 1][ptr];
                        run_arg = ptr;
                    }
                    ptr += 1;
                }
                if run_arg != usize::MAX {
                    b[a] = run_best + f(j, *v);
                    p[a] = run_arg;
                }
            }
        }
        best.push(b);
        back.push(p);
    }
    let (mut arg, total) = best[m - 1]
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let mut values = vec![0.0; m];
    for j in (0..m).rev() {
        values[j] = candidates[j][arg];
        arg = back[j][arg];
    }
    (values, total)
}

/// Penalized regression spline fit of `u` on `z` in the truncated power basis
/// `1, z, z², z³, (z − z_j)³₊` (interior knots), minimizing
/// `Σ (u_i − g(z_i))² + α ∫ g''²` over `[min z, max z]` by a dense solve.
pub fn spline_dense_fit(z: &[f64], u: &[f64], alpha: f64) -> Vec<f64> {
    let n = z.len();
    let mut zs = z.to_vec();
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let knots: Vec<f64> = zs[1..n - 1].to_vec();
    let p = 4 + knots.len();
    let basis = |x: f64| -> Vec<f64> {
        let mut v = vec![1.0, x, x * x, x * x * x];
        v.extend(knots.iter().map(|k| (x - k).max(0.0).powi(3)));
        v
    };
    let second = |x: f64| -> Vec<f64> {
        let mut v = vec![0.0, 0.0, 2.0, 6.0 * x];
        v.extend(knots.iter().map(|k| 6.0 * (x - k).max(0.0)));
        v
    };
    let mut b = Matrix::zeros(n, p);
    for i in 0..n {
        for (a, v) in basis(z[i]).into_iter().enumerate() {
            b[(i, a)] = v;
        }
    }
    // Second derivatives are linear between consecutive design points, so
    // Simpson's rule integrates their products exactly.
    let mut omega = Matrix::zeros(p, p);
    for w in zs.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let (s0, s1, s2) = (second(lo), second(mid), second(hi));
        let scale = (hi - lo) / 6.0;
        for a in 0..p {
            for c in 0..p {
                omega[(a, c)] += scale * (s0[a] * s0[c] + 4.0 * s1[a] * s1[c] + s2[a] * s2[c]);
            }
        }
    }
    let lhs = b.transpose() * &b + omega * alpha;
    let rhs = b.transpose() * Vector::from_column_slice(u);
    let coef = lhs.lu().solve(&rhs).expect("dense spline system");
    (&b * coef).iter().copied().collect()
}

/// Roughness matrix `K` with `g'Kg = ∫ g''²` for the natural cubic spline
/// interpolating `g` at `z` (any order, distinct values).
pub fn natural_spline_roughness(z: &[f64]) -> Matrix {
    let n = z.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap());
    let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let h: Vec<f64> = zs.windows(2).map(|w| w[1] - w[0]).collect();
    let m = n - 2;
    let mut q = Matrix::zeros(n, m);
    let mut r = Matrix::zeros(m, m);
    for j in 0..m {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    let rinv_qt = r.lu().solve(&q.transpose()).expect("tridiagonal R");
    let k_sorted = &q * rinv_qt;
    let mut k = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            k[(order[a], order[b])] = k_sorted[(a, b)];
        }
    }
    k
}

/// Joint minimizer over `(θ, g)` of `‖y − Wθ − g‖² + nλ² g'Kg`, solved as one
/// dense linear system of size `n + d`.
pub fn plm_joint_dense(data: &PLMDataset, lambda: f64) -> Vector {
    let n = data.len();
    let d = data.w[0].len();
    let alpha = n as f64 * lambda * lambda;
    let k = natural_spline_roughness(&data.z);
    let mut w = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            w[(i, j)] = data.w[i][j];
        }
    }
    let mut lhs = Matrix::zeros(n + d, n + d);
    let wtw = w.transpose() * &w;
    for a in 0..d {
        for b in 0..d {
            lhs[(a, b)] = wtw[(a, b)];
        }
        for i in 0..n {
            lhs[(a, d + i)] = w[(i, a)];
            lhs[(d + i, a)] = w[(i, a)];
        }
    }
    for i in 0..n {
        for j in 0..n {
            lhs[(d + i, d + j)] = alpha * k[(i, j)] + if i == j { 1.0 } else { 0.0 };
        }
    }
    let y = Vector::from_column_slice(&data.y);
    let mut rhs = Vector::zeros(n + d);
    rhs.rows_mut(0, d).copy_from(&(w.transpose() * &y));
    rhs.rows_mut(d, n).copy_from(&y);
    let sol = lhs.lu().solve(&rhs).expect("joint system");
    sol.rows(0, d).into_owned()
}

/// Gaussian-kernel Nadaraya–Watson nuisance, written out directly.
pub fn cem_nuisance_direct(data: &CEMDataset, spec: &KernelSpec, theta: &[f64], z: f64) -> f64 {
    let n = data.y.len();
    let b = spec.bandwidth_constant * (n as f64).powf(-spec.alpha.to_f64());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let u = (z - data.z[i]) / b;
        let k = (-u * u / 2.0).exp();
        let lin: f64 = data.w[i].iter().zip(theta).map(|(a, b)| a * b).sum();
        let psi = match data.variant {
            CemVariant::ConditionalNormal => (data.y[i] - lin) * (data.y[i] - lin),
            CemVariant::ConditionalExponential => data.y[i] / lin.exp(),
        };
        num += k * psi;
        den += k;
    }
    match data.variant {
        CemVariant::ConditionalNormal => num / den,
        CemVariant::ConditionalExponential => (num / den).ln(),
    }
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
