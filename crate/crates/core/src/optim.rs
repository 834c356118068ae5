//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! Projected L-BFGS: the two-loop direction is restricted to the free
//! variables, steps are projected onto the box, and an Armijo backtracking
//! search along the projected path keeps every accepted iterate monotone.

use crate::error::{Error, Result};
use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct BoxOptions {
    pub max_iter: usize,
    pub memory: usize,
    pub gtol: f64,
    pub ftol: f64,
    pub max_backtracks: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            memory: 8,
            gtol: 1e-6,
            ftol: 1e-10,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(l, u);
    }
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&l, &u))| {
            if (xi <= l && gi > 0.0) || (xi >= u && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `fg` (value and gradient; `None` marks a failed evaluation) over
/// the box `[lower, upper]` starting from `x0`.
pub fn minimize_box<F>(
    mut fg: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BoxOptions,
) -> Result<BoxResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Argument("bound length mismatch".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut f, mut g) = match fg(&x) {
        Some((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => (f, g),
        _ => return Err(Error::Optimizer("objective not finite at start point".into())),
    };
    let mut evaluations = 1;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let pg = projected_gradient(&x, &g, lower, upper);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm <= opts.gtol {
            converged = true;
            break;
        }
        iterations += 1;

        // Two-loop recursion on the projected gradient.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dotv(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dotv(s, y) / dotv(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dotv(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q
            .iter()
            .zip(&pg)
            .map(|(&qi, &pgi)| if pgi == 0.0 { 0.0 } else { -qi })
            .collect();
        if dotv(&dir, &g) >= 0.0 {
            memory.clear();
            dir = pg.iter().map(|v| -v).collect();
        }

        let mut step = if memory.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(gi, (ti, xi))| gi * (ti - xi))
                .sum();
            evaluations += 1;
            if let Some((ft, gt)) = fg(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= f + 1e-4 * decrease
                    && decrease < 0.0
                {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dotv(&s, &y);
        if sy > 1e-10 * dotv(&s, &s).sqrt() * dotv(&y, &y).sqrt() {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let rel = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if rel <= opts.ftol {
            converged = true;
            break;
        }
    }

    Ok(BoxResult {
        x,
        f,
        iterations,
        evaluations,
        converged,
    })
}

/// Central-difference gradient that falls back to one-sided differences at
/// the box faces, so no probe leaves `[lower, upper]`.
pub fn numeric_gradient<F>(f: &mut F, x: &[f64], fx: f64, h: f64, lower: &[f64], upper: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let xi = x[i];
        let up = (xi + h).min(upper[i]);
        let dn = (xi - h).max(lower[i]);
        let (fu, fd) = match (up > xi, dn < xi) {
            (true, true) => {
                probe[i] = up;
                let fu = f(&probe);
                probe[i] = dn;
                (fu, f(&probe))
            }
            (true, false) => {
                probe[i] = up;
                (f(&probe), fx)
            }
            (false, true) => {
                probe[i] = dn;
                (fx, f(&probe))
            }
            (false, false) => (fx, fx),
        };
        probe[i] = xi;
        let width = up - dn;
        grad[i] = if width > 0.0 { (fu - fd) / width } else { 0.0 };
    }
    grad
}
