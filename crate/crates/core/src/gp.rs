//! Gaussian-process regression with a constant (GLS) trend.
//!
//! Covariance families: power-exponential `σ² exp(-Σ |Δ_j|^{p_j} / θ_j)` and
//! a tensor-product Matérn 5/2 with length-scales `θ_j`. Hyperparameters are
//! fitted by multi-start bounded quasi-Newton minimization of twice the
//! negative log-likelihood, with σ² profiled out in closed form.

use crate::error::{Error, Result};
use crate::linalg;
use crate::optim::{self, BoxOptions};
use crate::rng::StreamRng;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    PowerExponential,
    Matern52,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::PowerExponential => "powexp",
            KernelFamily::Matern52 => "matern52",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "powexp" | "power-exponential" => Some(KernelFamily::PowerExponential),
            "matern52" | "matern-5/2" => Some(KernelFamily::Matern52),
            _ => None,
        }
    }
}

const SQRT5: f64 = 2.236_067_977_499_79;

#[inline]
fn matern52_1d(s: f64) -> f64 {
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub theta: Vec<f64>,
    /// Exponents `p_j` (power-exponential only; ignored by Matérn).
    pub powers: Vec<f64>,
    pub variance: f64,
    pub family: KernelFamily,
}

impl KernelParams {
    pub fn new(theta: Vec<f64>, powers: Vec<f64>, variance: f64, family: KernelFamily) -> Result<Self> {
        let p = Self {
            theta,
            powers,
            variance,
            family,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn power_exponential(theta: Vec<f64>, powers: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(theta, powers, variance, KernelFamily::PowerExponential)
    }

    pub fn matern52(theta: Vec<f64>, variance: f64) -> Result<Self> {
        let d = theta.len();
        Self::new(theta, vec![2.0; d], variance, KernelFamily::Matern52)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn validate(&self) -> Result<()> {
        if self.theta.is_empty() || self.theta.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Argument("length-scales must be positive and finite".into()));
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::Argument("process variance must be positive".into()));
        }
        if self.family == KernelFamily::PowerExponential {
            if self.powers.len() != self.theta.len() {
                return Err(Error::Argument("one exponent per dimension required".into()));
            }
            if self.powers.iter().any(|p| !(*p > 0.0 && *p <= 2.0)) {
                return Err(Error::Argument("exponents must lie in (0, 2]".into()));
            }
        }
        Ok(())
    }

    /// Correlation (kernel divided by σ²).
    #[inline]
    pub(crate) fn correlation(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::PowerExponential => {
                let mut s = 0.0;
                for j in 0..x.len() {
                    let a = (x[j] - y[j]).abs();
                    let p = self.powers[j];
                    let t = if p == 2.0 {
                        a * a
                    } else if a == 0.0 {
                        0.0
                    } else {
                        (p * a.ln()).exp()
                    };
                    s += t / self.theta[j];
                }
                (-s).exp()
            }
            KernelFamily::Matern52 => {
                let mut c = 1.0;
                for j in 0..x.len() {
                    c *= matern52_1d(SQRT5 * (x[j] - y[j]).abs() / self.theta[j]);
                }
                c
            }
        }
    }
}

/// Covariance between two points.
pub fn kernel_eval(params: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != params.dim() || y.len() != params.dim() {
        return Err(Error::Argument(format!(
            "kernel of dimension {} applied to points of dimension {} and {}",
            params.dim(),
            x.len(),
            y.len()
        )));
    }
    Ok(params.variance * params.correlation(x, y))
}

/// An ordered collection of `(x, f(x))` pairs, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    f: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            x: Vec::new(),
            f: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], f: &[f64]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut ds = Self::new(dim);
        if rows.len() != f.len() {
            return Err(Error::Argument("row and response counts differ".into()));
        }
        for (r, &v) in rows.iter().zip(f) {
            ds.push(r, v)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, x: &[f64], f: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "row of dimension {} pushed into dataset of dimension {}",
                x.len(),
                self.dim
            )));
        }
        self.x.extend_from_slice(x);
        self.f.push(f);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.dim.max(1))
    }

    pub fn responses(&self) -> &[f64] {
        &self.f
    }

    pub fn flat_x(&self) -> &[f64] {
        &self.x
    }

    pub fn min_response(&self) -> Option<f64> {
        self.f.iter().copied().reduce(f64::min)
    }
}

/// Relative jitter ladder applied to the correlation matrix diagonal.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Settings for [`fit_with`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub starts: usize,
    pub theta_bounds: (f64, f64),
    pub power_bounds: (f64, f64),
    /// σ² bounds as multiples of the sample variance of the responses.
    pub variance_bounds: (f64, f64),
    pub optimizer: BoxOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            theta_bounds: (1e-3, 10.0),
            power_bounds: (0.5, 2.0),
            variance_bounds: (1e-6, 1e3),
            optimizer: BoxOptions {
                max_iter: 60,
                gtol: 1e-5,
                ftol: 1e-9,
                ..BoxOptions::default()
            },
        }
    }
}

/// Per-start bookkeeping of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInfo {
    pub start_nll: Vec<f64>,
    pub final_nll: Vec<f64>,
    pub best_start: usize,
}

#[derive(Debug, Clone)]
pub struct GPModel {
    params: KernelParams,
    dim: usize,
    train_x: Vec<f64>,
    train_f: Vec<f64>,
    /// Lower factor of `Σ_n + jitter·σ²·I`.
    factor: Vec<f64>,
    /// `Σ⁻¹ (f - trend)`.
    alpha: Vec<f64>,
    trend: f64,
    jitter: f64,
    nll: f64,
    fit_info: Option<FitInfo>,
}

struct Factored {
    chol: Vec<f64>,
    jitter: f64,
}

fn factor_with_ladder(corr: &[f64], n: usize, scratch: &mut Vec<f64>) -> Result<Factored> {
    let mut last = (0, 0.0);
    for &jit in &JITTER_LADDER {
        scratch.clear();
        scratch.extend_from_slice(corr);
        for i in 0..n {
            scratch[i * n + i] += jit;
        }
        match linalg::cholesky_in_place(scratch, n) {
            Ok(()) => {
                return Ok(Factored {
                    chol: std::mem::take(scratch),
                    jitter: jit,
                })
            }
            Err(e) => last = e,
        }
    }
    Err(Error::Factorization {
        n,
        jitter: *JITTER_LADDER.last().unwrap(),
        pivot: last.0,
        pivot_value: last.1,
    })
}

/// GLS constant trend and the centered solve, given the correlation factor.
fn gls(chol: &[f64], n: usize, f: &[f64]) -> (f64, Vec<f64>, f64) {
    let ones = vec![1.0; n];
    let r_inv_1 = linalg::cholesky_solve(chol, n, &ones);
    let r_inv_f = linalg::cholesky_solve(chol, n, f);
    let denom: f64 = r_inv_1.iter().sum();
    let beta = r_inv_f.iter().sum::<f64>() / denom;
    let alpha: Vec<f64> = r_inv_f.iter().zip(&r_inv_1).map(|(a, b)| a - beta * b).collect();
    let q: f64 = f.iter().zip(&alpha).map(|(fi, ai)| (fi - beta) * ai).sum();
    (beta, alpha, q.max(0.0))
}

fn sample_variance(f: &[f64]) -> f64 {
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// Pairwise geometry of a dataset, reused across likelihood evaluations.
struct Workspace<'a> {
    data: &'a Dataset,
    family: KernelFamily,
    n: usize,
    d: usize,
    /// Per pair (i > k) and dimension: `ln|Δ|` (power-exp) or `|Δ|` (Matérn).
    geom: Vec<f64>,
    /// Per pair and dimension: the derivative factor filled by `build`.
    terms: Vec<f64>,
    corr: Vec<f64>,
    scratch: Vec<f64>,
}

struct NllEval {
    nll: f64,
    sigma2: f64,
    q: f64,
    grad: Option<Vec<f64>>,
}

impl<'a> Workspace<'a> {
    fn new(data: &'a Dataset, family: KernelFamily) -> Self {
        let n = data.len();
        let d = data.dim();
        let pairs = n * n.saturating_sub(1) / 2;
        let mut geom = Vec::with_capacity(pairs * d);
        for i in 0..n {
            let xi = data.row(i);
            for k in 0..i {
                let xk = data.row(k);
                for j in 0..d {
                    let a = (xi[j] - xk[j]).abs();
                    geom.push(match family {
                        KernelFamily::PowerExponential => {
                            if a == 0.0 {
                                f64::NEG_INFINITY
                            } else {
                                a.ln()
                            }
                        }
                        KernelFamily::Matern52 => a,
                    });
                }
            }
        }
        Self {
            data,
            family,
            n,
            d,
            geom,
            terms: vec![0.0; pairs * d],
            corr: vec![0.0; n * n],
            scratch: Vec::new(),
        }
    }

    /// Fill the lower triangle of the correlation matrix for the given
    /// log-length-scales and exponents.
    fn build(&mut self, log_theta: &[f64], powers: &[f64]) {
        let (n, d) = (self.n, self.d);
        let mut pair = 0;
        for i in 0..n {
            for k in 0..i {
                let g = &self.geom[pair * d..(pair + 1) * d];
                let t = &mut self.terms[pair * d..(pair + 1) * d];
                let r = match self.family {
                    KernelFamily::PowerExponential => {
                        let mut s = 0.0;
                        for j in 0..d {
                            let v = (powers[j] * g[j] - log_theta[j]).exp();
                            t[j] = v;
                            s += v;
                        }
                        (-s).exp()
                    }
                    KernelFamily::Matern52 => {
                        let mut c = 1.0;
                        for j in 0..d {
                            let s = SQRT5 * g[j] * (-log_theta[j]).exp();
                            let poly = 1.0 + s + s * s / 3.0;
                            c *= poly * (-s).exp();
                            t[j] = s * s * (1.0 + s) / 3.0 / poly;
                        }
                        c
                    }
                };
                self.corr[i * n + k] = r;
                pair += 1;
            }
            self.corr[i * n + i] = 1.0;
        }
    }

    /// Twice the negative log-likelihood (additive constant dropped).
    ///
    /// `variance = None` profiles σ² out (clamped to `var_bounds`). The
    /// gradient is with respect to `(ln θ, ln p [power-exp only], ln σ² [only
    /// when σ² is given])`.
    fn eval(
        &mut self,
        log_theta: &[f64],
        log_powers: Option<&[f64]>,
        variance: Option<f64>,
        var_bounds: (f64, f64),
        want_grad: bool,
    ) -> Result<NllEval> {
        let (n, d) = (self.n, self.d);
        let powers: Vec<f64> = match log_powers {
            Some(lp) => lp.iter().map(|v| v.exp().min(2.0)).collect(),
            None => vec![2.0; d],
        };
        self.build(log_theta, &powers);
        let mut scratch = std::mem::take(&mut self.scratch);
        let fac = factor_with_ladder(&self.corr, n, &mut scratch)?;
        let f = self.data.responses();
        let (_beta, alpha, q) = gls(&fac.chol, n, f);
        let log_det = linalg::cholesky_log_det(&fac.chol, n);
        let sigma2 = match variance {
            Some(v) => v,
            None => (q / n as f64).clamp(var_bounds.0, var_bounds.1),
        };
        let nll = n as f64 * sigma2.ln() + log_det + q / sigma2;

        let grad = if want_grad {
            let inv = linalg::cholesky_inverse(&fac.chol, n);
            let n_hyper = d + if self.family == KernelFamily::PowerExponential { d } else { 0 };
            let mut g = vec![0.0; n_hyper + usize::from(variance.is_some())];
            let mut pair = 0;
            for i in 0..n {
                for k in 0..i {
                    let w = inv[i * n + k] - alpha[i] * alpha[k] / sigma2;
                    let coef = 2.0 * w * self.corr[i * n + k];
                    let t = &self.terms[pair * d..(pair + 1) * d];
                    match self.family {
                        KernelFamily::PowerExponential => {
                            let geo = &self.geom[pair * d..(pair + 1) * d];
                            for j in 0..d {
                                let cj = coef * t[j];
                                g[j] += cj;
                                if t[j] != 0.0 {
                                    g[d + j] -= cj * powers[j] * geo[j];
                                }
                            }
                        }
                        KernelFamily::Matern52 => {
                            for j in 0..d {
                                g[j] += coef * t[j];
                            }
                        }
                    }
                    pair += 1;
                }
            }
            if variance.is_some() {
                g[n_hyper] = n as f64 - q / sigma2;
            }
            Some(g)
        } else {
            None
        };
        self.scratch = fac.chol;
        Ok(NllEval { nll, sigma2, q, grad })
    }
}

fn log_powers_of(params: &KernelParams) -> Option<Vec<f64>> {
    (params.family == KernelFamily::PowerExponential).then(|| params.powers.iter().map(|p| p.ln()).collect())
}

fn check_data(params: &KernelParams, data: &Dataset) -> Result<()> {
    if data.dim() != params.dim() {
        return Err(Error::Argument(format!(
            "kernel dimension {} does not match data dimension {}",
            params.dim(),
            data.dim()
        )));
    }
    if data.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    Ok(())
}

/// `log det Σ_n + f̃ᵀ Σ_n⁻¹ f̃` with the GLS constant trend removed from `f`.
pub fn neg_log_likelihood(params: &KernelParams, data: &Dataset) -> Result<f64> {
    neg_log_likelihood_with_trend(params, data, None)
}

/// As [`neg_log_likelihood`], with an optional fixed trend in place of GLS.
pub fn neg_log_likelihood_with_trend(params: &KernelParams, data: &Dataset, trend: Option<f64>) -> Result<f64> {
    check_data(params, data)?;
    params.validate()?;
    let n = data.len();
    let log_theta: Vec<f64> = params.theta.iter().map(|t| t.ln()).collect();
    let mut ws = Workspace::new(data, params.family);
    match trend {
        None => {
            let lp = log_powers_of(params);
            let v = ws.eval(&log_theta, lp.as_deref(), Some(params.variance), (0.0, f64::INFINITY), false)?;
            Ok(v.nll)
        }
        Some(beta) => {
            let powers = params.powers.clone();
            ws.build(&log_theta, &powers);
            let mut scratch = Vec::new();
            let fac = factor_with_ladder(&ws.corr, n, &mut scratch)?;
            let centered: Vec<f64> = data.responses().iter().map(|v| v - beta).collect();
            let a = linalg::cholesky_solve(&fac.chol, n, &centered);
            let q: f64 = centered.iter().zip(&a).map(|(x, y)| x * y).sum();
            let s2 = params.variance;
            Ok(n as f64 * s2.ln() + linalg::cholesky_log_det(&fac.chol, n) + q / s2)
        }
    }
}

/// [`neg_log_likelihood`] and its gradient with respect to
/// `(ln θ_1..d, ln p_1..d [power-exp only], ln σ²)`.
pub fn neg_log_likelihood_gradient(params: &KernelParams, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_data(params, data)?;
    params.validate()?;
    let log_theta: Vec<f64> = params.theta.iter().map(|t| t.ln()).collect();
    let lp = log_powers_of(params);
    let mut ws = Workspace::new(data, params.family);
    let v = ws.eval(&log_theta, lp.as_deref(), Some(params.variance), (0.0, f64::INFINITY), true)?;
    Ok((v.nll, v.grad.unwrap()))
}

/// Fit with default settings.
pub fn fit(data: &Dataset, family: KernelFamily, rng: &mut StreamRng) -> Result<GPModel> {
    fit_with(data, family, &FitOptions::default(), rng)
}

pub fn fit_with(data: &Dataset, family: KernelFamily, opts: &FitOptions, rng: &mut StreamRng) -> Result<GPModel> {
    let n = data.len();
    let d = data.dim();
    if n < 2 || d == 0 {
        return Err(Error::Fit(format!("need at least 2 points to fit (got {n})")));
    }
    if data.responses().iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite response".into()));
    }
    let var_f = sample_variance(data.responses());
    let scale = if var_f > 0.0 && var_f.is_finite() { var_f } else { 1.0 };
    let var_bounds = (opts.variance_bounds.0 * scale, opts.variance_bounds.1 * scale);

    let with_powers = family == KernelFamily::PowerExponential;
    let n_par = if with_powers { 2 * d } else { d };
    let (lt_lo, lt_hi) = (opts.theta_bounds.0.ln(), opts.theta_bounds.1.ln());
    let (lp_lo, lp_hi) = (opts.power_bounds.0.ln(), opts.power_bounds.1.ln());
    let mut lower = vec![lt_lo; d];
    let mut upper = vec![lt_hi; d];
    if with_powers {
        lower.extend(std::iter::repeat(lp_lo).take(d));
        upper.extend(std::iter::repeat(lp_hi).take(d));
    }

    // Space-filling starts over the log length-scale box; exponents start at 2.
    let starts = opts.starts.max(1);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut col: Vec<f64> = (0..starts)
            .map(|k| (k as f64 + rng.gen::<f64>()) / starts as f64)
            .collect();
        col.shuffle(rng);
        columns.push(col);
    }

    let mut ws = Workspace::new(data, family);
    let mut objective = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (lt, lp) = u.split_at(d);
        let lp = with_powers.then_some(lp);
        ws.eval(lt, lp, None, var_bounds, true)
            .ok()
            .map(|e| (e.nll, e.grad.unwrap()))
    };

    let mut info = FitInfo {
        start_nll: Vec::with_capacity(starts),
        final_nll: Vec::with_capacity(starts),
        best_start: 0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..starts {
        let mut u0: Vec<f64> = columns.iter().map(|c| lt_lo + c[s] * (lt_hi - lt_lo)).collect();
        if with_powers {
            u0.extend(std::iter::repeat(lp_hi).take(d));
        }
        debug_assert_eq!(u0.len(), n_par);
        match optim::minimize_box(&mut objective, &u0, &lower, &upper, &opts.optimizer) {
            Ok(res) => {
                // The first evaluation of each start is its start value.
                let start = objective(&u0).map(|v| v.0).unwrap_or(f64::NAN);
                info.start_nll.push(start);
                info.final_nll.push(res.f);
                if best.as_ref().map_or(true, |(bf, _)| res.f < *bf) {
                    info.best_start = s;
                    best = Some((res.f, res.x));
                }
            }
            Err(_) => {
                info.start_nll.push(f64::NAN);
                info.final_nll.push(f64::NAN);
            }
        }
    }
    let Some((_, u)) = best else {
        return Err(Error::Fit("every likelihood start failed to factorize".into()));
    };
    let (lt, lp) = u.split_at(d);
    let theta: Vec<f64> = lt.iter().map(|v| v.exp()).collect();
    let powers: Vec<f64> = if with_powers {
        lp.iter().map(|v| v.exp().min(2.0)).collect()
    } else {
        vec![2.0; d]
    };
    let ev = {
        let mut ws = Workspace::new(data, family);
        ws.eval(lt, with_powers.then_some(lp), None, var_bounds, false)?
    };
    let _ = ev.q;
    let params = KernelParams::new(theta, powers, ev.sigma2, family)?;
    let mut model = GPModel::condition(params, data)?;
    model.fit_info = Some(info);
    Ok(model)
}

impl GPModel {
    /// Condition a GP with fixed hyperparameters on `data` (no fitting).
    pub fn condition(params: KernelParams, data: &Dataset) -> Result<Self> {
        check_data(&params, data)?;
        params.validate()?;
        let n = data.len();
        let d = data.dim();
        let log_theta: Vec<f64> = params.theta.iter().map(|t| t.ln()).collect();
        let mut ws = Workspace::new(data, params.family);
        ws.build(&log_theta, &params.powers);
        let mut scratch = Vec::new();
        let fac = factor_with_ladder(&ws.corr, n, &mut scratch)?;
        let (trend, alpha_r, q) = gls(&fac.chol, n, data.responses());
        let s2 = params.variance;
        let nll = n as f64 * s2.ln() + linalg::cholesky_log_det(&fac.chol, n) + q / s2;
        let sd = s2.sqrt();
        let factor: Vec<f64> = fac.chol.iter().map(|v| v * sd).collect();
        let alpha: Vec<f64> = alpha_r.iter().map(|v| v / s2).collect();
        Ok(Self {
            params,
            dim: d,
            train_x: data.flat_x().to_vec(),
            train_f: data.responses().to_vec(),
            factor,
            alpha,
            trend,
            jitter: fac.jitter,
            nll,
            fit_info: None,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn train_size(&self) -> usize {
        self.train_f.len()
    }

    pub fn train_x(&self, i: usize) -> &[f64] {
        &self.train_x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn train_f(&self) -> &[f64] {
        &self.train_f
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn trend(&self) -> f64 {
        self.trend
    }

    /// Relative jitter that made the kernel matrix factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Twice the negative log-likelihood at the model's parameters.
    pub fn nll(&self) -> f64 {
        self.nll
    }

    pub fn fit_info(&self) -> Option<&FitInfo> {
        self.fit_info.as_ref()
    }

    /// Predictive mean and variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "point of dimension {} for a model of dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let n = self.train_size();
        let s2 = self.params.variance;
        let k: Vec<f64> = (0..n)
            .map(|i| s2 * self.params.correlation(x, self.train_x(i)))
            .collect();
        let mean = self.trend + linalg::dot(&k, &self.alpha);
        let v = linalg::solve_lower(&self.factor, n, &k);
        let var = (s2 - linalg::dot(&v, &v)).max(0.0);
        (mean, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Stream, Streams};

    fn rng(seed: u64) -> StreamRng {
        Streams::new(seed).derive(Stream::GpFit, &[])
    }

    fn random_data(n: usize, d: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Dataset {
        let mut r = rng(seed);
        let mut ds = Dataset::new(d);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| r.gen()).collect();
            let y = f(&x);
            ds.push(&x, y).unwrap();
        }
        ds
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::power_exponential(vec![1.0, 0.5], vec![2.0, 1.5], 2.5).unwrap();
        assert_eq!(kernel_eval(&p, &[0.3, 0.4], &[0.3, 0.4]).unwrap(), 2.5);
        let p1 = KernelParams::power_exponential(vec![1.0], vec![2.0], 1.0).unwrap();
        let v = kernel_eval(&p1, &[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(kernel_eval(&p1, &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::power_exponential(vec![0.0], vec![2.0], 1.0).is_err());
        assert!(KernelParams::power_exponential(vec![1.0], vec![2.5], 1.0).is_err());
        assert!(KernelParams::power_exponential(vec![1.0], vec![2.0], -1.0).is_err());
        assert!(KernelParams::matern52(vec![1.0], 1.0).is_ok());
    }

    #[test]
    fn matern_zero_distance_and_monotone() {
        let p = KernelParams::matern52(vec![0.3], 1.7).unwrap();
        assert_eq!(kernel_eval(&p, &[0.2], &[0.2]).unwrap(), 1.7);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = kernel_eval(&p, &[0.0], &[i as f64 * 0.01]).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn scalar_nll_with_fixed_trend() {
        let ds = Dataset::from_rows(&[vec![0.5]], &[2.0]).unwrap();
        let p = KernelParams::power_exponential(vec![1.0], vec![2.0], 4.0).unwrap();
        let v = neg_log_likelihood_with_trend(&p, &ds, Some(0.0)).unwrap();
        assert!((v - 2.386294).abs() < 1e-6, "{v}");
    }

    #[test]
    fn nll_permutation_invariant() {
        let ds = random_data(12, 3, 4, |x| x.iter().sum::<f64>().sin());
        let p = KernelParams::power_exponential(vec![0.3, 0.5, 0.2], vec![2.0, 1.5, 1.8], 1.3).unwrap();
        let a = neg_log_likelihood(&p, &ds).unwrap();
        let mut rows: Vec<Vec<f64>> = ds.rows().map(|r| r.to_vec()).collect();
        let mut f = ds.responses().to_vec();
        rows.reverse();
        f.reverse();
        rows.swap(0, 5);
        f.swap(0, 5);
        let b = neg_log_likelihood(&p, &Dataset::from_rows(&rows, &f).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn interpolates_training_points() {
        let ds = random_data(25, 2, 9, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let m = fit(&ds, KernelFamily::PowerExponential, &mut rng(1)).unwrap();
        for (i, x) in ds.rows().enumerate() {
            let (mu, var) = m.predict(x).unwrap();
            assert!((mu - ds.responses()[i]).abs() < 1e-4);
            assert!(var <= 1e-4 * m.params().variance);
        }
    }

    #[test]
    fn constant_response_predicts_constant() {
        let ds = random_data(15, 2, 3, |_| 4.25);
        let m = fit(&ds, KernelFamily::PowerExponential, &mut rng(2)).unwrap();
        for x in [[0.1, 0.9], [0.5, 0.5], [0.99, 0.01]] {
            assert!((m.predict(&x).unwrap().0 - 4.25).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_rows_fit_via_jitter() {
        let mut ds = random_data(10, 2, 5, |x| x[0] - x[1]);
        let row = ds.row(3).to_vec();
        let f = ds.responses()[3];
        ds.push(&row, f).unwrap();
        ds.push(&row, f).unwrap();
        let m = fit(&ds, KernelFamily::PowerExponential, &mut rng(3)).unwrap();
        assert!(m.jitter() >= JITTER_LADDER[0]);
        let m2 = fit(&ds, KernelFamily::Matern52, &mut rng(3)).unwrap();
        assert!(m2.predict(&row).unwrap().0.is_finite());
    }

    #[test]
    fn far_point_reverts_to_prior() {
        let ds = random_data(8, 2, 6, |x| 3.0 + x[0]);
        let p = KernelParams::power_exponential(vec![0.01, 0.01], vec![2.0, 2.0], 2.0).unwrap();
        let m = GPModel::condition(p, &ds).unwrap();
        // At distance ≥ 3 every correlation is below exp(-900).
        let (mu, var) = m.predict(&[3.5, 3.5]).unwrap();
        assert!((mu - m.trend()).abs() < 1e-6);
        assert!((var - 2.0).abs() < 1e-6);
    }

    #[test]
    fn single_point_conditional_matches_closed_form() {
        let ds = Dataset::from_rows(&[vec![0.2, 0.7]], &[1.5]).unwrap();
        let p = KernelParams::power_exponential(vec![0.4, 0.9], vec![1.7, 2.0], 0.8).unwrap();
        let m = GPModel::condition(p.clone(), &ds).unwrap();
        let x = [0.6, 0.1];
        let k = kernel_eval(&p, &x, &[0.2, 0.7]).unwrap();
        let kxx = 0.8 * (1.0 + JITTER_LADDER[0]);
        // Trend equals the single response under GLS.
        let mean = 1.5 + k / kxx * (1.5 - 1.5);
        let var = 0.8 - k * k / kxx;
        let (mu, v) = m.predict(&x).unwrap();
        assert!((mu - mean).abs() < 1e-10);
        assert!((v - var).abs() < 1e-10);
    }

    #[test]
    fn factor_reconstructs_jittered_covariance() {
        let ds = random_data(20, 3, 8, |x| x[0] * x[1] - x[2]);
        let m = fit(&ds, KernelFamily::PowerExponential, &mut rng(4)).unwrap();
        let n = ds.len();
        let p = m.params();
        let l = m.factor();
        for i in 0..n {
            for j in 0..=i {
                let mut s = kernel_eval(p, ds.row(i), ds.row(j)).unwrap();
                if i == j {
                    s += m.jitter() * p.variance;
                }
                let v: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                assert!((v - s).abs() <= 1e-8 * p.variance, "{i} {j}");
            }
        }
    }

    #[test]
    fn fit_dominates_start_points_and_is_deterministic() {
        let ds = random_data(30, 3, 10, |x| (5.0 * x[0]).cos() + x[1] * x[2]);
        let a = fit(&ds, KernelFamily::PowerExponential, &mut rng(11)).unwrap();
        let b = fit(&ds, KernelFamily::PowerExponential, &mut rng(11)).unwrap();
        assert_eq!(a.params(), b.params());
        let info = a.fit_info().unwrap();
        for (s, f) in info.start_nll.iter().zip(&info.final_nll) {
            assert!(f <= s);
        }
        let best = info.final_nll.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((a.nll() - best).abs() < 1e-6 * best.abs().max(1.0));
    }

    #[test]
    fn too_few_points_is_an_error() {
        let ds = random_data(1, 2, 1, |_| 0.0);
        assert!(matches!(fit(&ds, KernelFamily::Matern52, &mut rng(0)), Err(Error::Fit(_))));
    }
}
