//! Expected improvement, the region-penalized acquisition, start-point
//! generation from node data, and the swarm maximizer.

use crate::error::{Error, Result};
use crate::gp::GPModel;
use crate::optim::{self, BoxOptions};
use crate::partition::RegionChain;
use crate::rng::StreamRng;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::erf::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

#[inline]
fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Closed-form `E[max(f_min - Y, 0)]` for `Y ~ N(mean, sd²)`.
pub fn ei_from_moments(mean: f64, sd: f64, f_min: f64) -> f64 {
    let diff = f_min - mean;
    if !(sd > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / sd;
    (diff * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

pub fn expected_improvement(model: &GPModel, f_min: f64, x: &[f64]) -> f64 {
    let (mean, var) = model.predict_unchecked(x);
    ei_from_moments(mean, var.sqrt(), f_min)
}

/// Everything the penalized acquisition of one leaf depends on.
#[derive(Clone, Copy)]
pub struct AcquisitionContext<'a> {
    pub model: &'a GPModel,
    /// Best value over all observations of the run.
    pub f_min: f64,
    pub region: &'a RegionChain,
}

impl<'a> AcquisitionContext<'a> {
    pub fn new(model: &'a GPModel, f_min: f64, region: &'a RegionChain) -> Self {
        Self { model, f_min, region }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }
}

/// EI inside the leaf's region; outside it, minus the largest `|decision|`
/// among the ancestor classifiers that reject `x`.
pub fn alpha(ctx: &AcquisitionContext<'_>, x: &[f64]) -> f64 {
    match ctx.region.worst_violation(x) {
        Some(w) => -w,
        None => expected_improvement(ctx.model, ctx.f_min, x),
    }
}

/// One uniform draw in every gap of the sorted column, in random order.
pub fn gen_column(column: &[f64], rng: &mut StreamRng) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = sorted
        .windows(2)
        .map(|w| {
            let u: f64 = rng.gen();
            (w[0] + u * (w[1] - w[0])).clamp(w[0], w[1])
        })
        .collect();
    out.shuffle(rng);
    out
}

/// `n - 1` start points built column by column from the node's own points.
pub fn gen_acq_points(rows: &[&[f64]], rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Argument(format!("need at least 2 points for start generation, got {n}")));
    }
    let d = rows[0].len();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            gen_column(&col, rng)
        })
        .collect();
    Ok((0..n - 1).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Uniform points in the unit box.
pub fn uniform_points(count: usize, dim: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.gen()).collect()).collect()
}

/// Number of uniform starts used when a node is too small for gap sampling.
pub const FALLBACK_STARTS: usize = 100;

#[derive(Debug, Clone)]
pub struct SwarmOptions {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate speed limit in unit-box lengths.
    pub max_speed: f64,
    pub polish: bool,
    pub polish_step: f64,
    pub polish_options: BoxOptions,
}

impl Default for SwarmOptions {
    fn default() -> Self {
        Self {
            particles: 40,
            iterations: 200,
            inertia: 0.7298,
            cognitive: 1.4962,
            social: 1.4962,
            max_speed: 1.0,
            polish: true,
            polish_step: 1e-6,
            polish_options: BoxOptions {
                max_iter: 50,
                gtol: 1e-8,
                ftol: 1e-12,
                ..BoxOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcqResult {
    pub x_star: Vec<f64>,
    pub value: f64,
    pub polished: bool,
}

/// Maximize the penalized acquisition of `ctx` over the unit box.
pub fn maximize(ctx: &AcquisitionContext<'_>, starts: &[Vec<f64>], rng: &mut StreamRng) -> AcqResult {
    maximize_fn(|x| alpha(ctx, x), ctx.dim(), starts, &SwarmOptions::default(), rng)
}

#[inline]
fn reflect(x: &mut f64, v: &mut f64) {
    if *x < 0.0 {
        *x = -*x;
        *v = -*v;
    } else if *x > 1.0 {
        *x = 2.0 - *x;
        *v = -*v;
    }
    *x = x.clamp(0.0, 1.0);
}

/// Particle swarm over `[0, 1]^dim` seeded with the best of `starts`, then a
/// bounded quasi-Newton polish from the swarm best.
pub fn maximize_fn<F>(f: F, dim: usize, starts: &[Vec<f64>], opts: &SwarmOptions, rng: &mut StreamRng) -> AcqResult
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let p = opts.particles.max(1);

    let mut seeded: Vec<(Vec<f64>, f64)> = starts
        .iter()
        .map(|s| {
            let x: Vec<f64> = s.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let v = eval(&x);
            (x, v)
        })
        .collect();
    // Stable sort keeps the given order among equal values.
    seeded.sort_by(|a, b| b.1.total_cmp(&a.1));
    seeded.truncate(p);
    while seeded.len() < p {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
        let v = eval(&x);
        seeded.push((x, v));
    }

    let mut pos: Vec<Vec<f64>> = seeded.iter().map(|s| s.0.clone()).collect();
    let mut val: Vec<f64> = seeded.iter().map(|s| s.1).collect();
    let mut vel: Vec<Vec<f64>> = pos
        .iter()
        .map(|x| x.iter().map(|&xi| (rng.gen::<f64>() - xi) / 2.0).collect())
        .collect();
    let mut pbest = pos.clone();
    let mut pbest_val = val.clone();
    let mut g = 0;
    for i in 1..p {
        if pbest_val[i] > pbest_val[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_val = pbest_val[g];

    for _ in 0..opts.iterations {
        for i in 0..p {
            for j in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = opts.inertia * vel[i][j]
                    + opts.cognitive * r1 * (pbest[i][j] - pos[i][j])
                    + opts.social * r2 * (gbest[j] - pos[i][j]);
                vel[i][j] = v.clamp(-opts.max_speed, opts.max_speed);
                pos[i][j] += vel[i][j];
                reflect(&mut pos[i][j], &mut vel[i][j]);
            }
        }
        for i in 0..p {
            val[i] = eval(&pos[i]);
            if val[i] > pbest_val[i] {
                pbest_val[i] = val[i];
                pbest[i].clone_from(&pos[i]);
            }
        }
        for i in 0..p {
            if pbest_val[i] > gbest_val {
                gbest_val = pbest_val[i];
                gbest.clone_from(&pbest[i]);
            }
        }
    }

    let mut result = AcqResult {
        x_star: gbest,
        value: gbest_val,
        polished: false,
    };
    if opts.polish && result.value.is_finite() {
        if let Some((x, v)) = polish(&eval, &result.x_star, dim, opts) {
            // Reject steps that leave the region of a point that started inside it.
            let crossed = result.value >= 0.0 && v < 0.0;
            if !crossed && v >= result.value {
                result = AcqResult {
                    x_star: x,
                    value: v,
                    polished: true,
                };
            }
        }
    }
    result
}

fn polish<F>(eval: &F, x0: &[f64], dim: usize, opts: &SwarmOptions) -> Option<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let lower = vec![0.0; dim];
    let upper = vec![1.0; dim];
    let h = opts.polish_step;
    let mut neg = |x: &[f64]| -eval(x);
    let fg = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let fx = -eval(x);
        if !fx.is_finite() {
            return None;
        }
        let g = optim::numeric_gradient(&mut neg, x, fx, h, &lower, &upper);
        g.iter().all(|v| v.is_finite()).then_some((fx, g))
    };
    let res = optim::minimize_box(fg, x0, &lower, &upper, &opts.polish_options).ok()?;
    if res.x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return None;
    }
    let v = eval(&res.x);
    v.is_finite().then_some((res.x, v))
}
