//! Levenberg-Marquardt fit of `A exp(-(x - mu)^2 / (2 sigma^2))` to a
//! smoothed histogram. Three parameters, dense 3x3 normal equations.

use crate::scalar::Real;

pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct GaussianFit<T> {
    pub amp: T,
    pub mean: T,
    pub sigma: T,
    pub converged: bool,
}

/// Fits the bell model to `(x, h)` pairs starting from the given seed.
/// `sigma_floor` bounds the width from below throughout the iteration.
pub fn fit<T: Real>(
    xs: &[T],
    hs: &[T],
    seed: (T, T, T),
    sigma_floor: T,
) -> GaussianFit<T> {
    debug_assert_eq!(xs.len(), hs.len());
    let (mut amp, mut mean, mut sigma) = seed;
    sigma = sigma.max(sigma_floor);
    amp = amp.max(T::of(1e-12));

    let residuals = |a: T, m: T, s: T| -> T {
        let mut cost = T::zero();
        for (&x, &h) in xs.iter().zip(hs) {
            let z = (x - m) / s;
            let r = h - a * (-z * z / T::of(2.0)).exp();
            cost += r * r;
        }
        cost
    };

    let mut cost = residuals(amp, mean, sigma);
    let mut damping = T::of(1e-3);
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        // normal equations J^T J delta = J^T r for the current point
        let mut jtj = [[T::zero(); 3]; 3];
        let mut jtr = [T::zero(); 3];
        for (&x, &h) in xs.iter().zip(hs) {
            let z = (x - mean) / sigma;
            let e = (-z * z / T::of(2.0)).exp();
            let model = amp * e;
            let r = h - model;
            let j = [e, model * z / sigma, model * z * z / sigma];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }

        let mut accepted = false;
        for _ in 0..12 {
            let mut lhs = jtj;
            for d in 0..3 {
                lhs[d][d] += damping * jtj[d][d].max(T::of(1e-12));
            }
            let Some(delta) = solve3(lhs, jtr) else {
                damping *= T::of(5.0);
                continue;
            };
            let trial_amp = (amp + delta[0]).max(T::of(1e-12));
            let trial_mean = mean + delta[1];
            let trial_sigma = (sigma + delta[2]).max(sigma_floor);
            let trial_cost = residuals(trial_amp, trial_mean, trial_sigma);
            if trial_cost < cost {
                let improvement = cost - trial_cost;
                amp = trial_amp;
                mean = trial_mean;
                sigma = trial_sigma;
                cost = trial_cost;
                damping = (damping / T::of(3.0)).max(T::of(1e-12));
                accepted = true;
                if improvement <= T::of(1e-10) * cost.max(T::of(1e-12)) {
                    converged = true;
                }
                break;
            }
            damping *= T::of(5.0);
        }
        if !accepted {
            // no downhill direction left at any damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }

    GaussianFit { amp, mean, sigma, converged }
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
#[allow(clippy::needless_range_loop)]
fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < T::of(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
