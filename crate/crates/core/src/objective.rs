//! Objective functions: the analytic benchmark suite, constraint
//! penalization, and a line-protocol adapter for external evaluators.
//!
//! Optimizers work in the unit cube; [`Domain`] owns the affine map to the
//! native bounds of each function.

use crate::error::{Error, Result};
use crate::fmt_float;
use std::f64::consts::{E, PI};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Argument(format!(
                "bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::Argument(format!(
                "lower[{i}] = {} is not below upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::cube(dim, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Argument(format!(
                "point has dimension {}, domain has {}",
                x.len(),
                self.dim()
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lower[i] && v <= self.upper[i]) {
                return Err(Error::DomainViolation {
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(())
    }

    /// Map a unit-cube point to native coordinates (clamped against rounding).
    pub fn to_native(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &t)| {
                let (l, h) = (self.lower[i], self.upper[i]);
                (l + t * (h - l)).clamp(l, h)
            })
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.lower[i]) / (self.upper[i] - self.lower[i]))
            .collect()
    }
}

/// The analytic benchmark functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    Ackley,
    Hartmann6,
    Rastrigin,
    Schwefel,
    Levy,
    Michalewicz,
}

impl TestFunction {
    pub const ALL: [TestFunction; 6] = [
        TestFunction::Ackley,
        TestFunction::Hartmann6,
        TestFunction::Rastrigin,
        TestFunction::Schwefel,
        TestFunction::Levy,
        TestFunction::Michalewicz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Ackley => "ackley",
            TestFunction::Hartmann6 => "hartmann",
            TestFunction::Rastrigin => "rastrigin",
            TestFunction::Schwefel => "schwefel",
            TestFunction::Levy => "levy",
            TestFunction::Michalewicz => "michalewicz",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower || (lower == "hartmann6" && *f == TestFunction::Hartmann6))
    }

    /// Fixed dimension, if the function is only defined for one.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            TestFunction::Hartmann6 => Some(6),
            _ => None,
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            TestFunction::Ackley => (-32.768, 32.768),
            TestFunction::Hartmann6 => (0.0, 1.0),
            TestFunction::Rastrigin => (-5.12, 5.12),
            TestFunction::Schwefel => (-500.0, 500.0),
            TestFunction::Levy => (-10.0, 10.0),
            TestFunction::Michalewicz => (0.0, PI),
        }
    }

    pub fn domain(self, dim: usize) -> Result<Domain> {
        if let Some(fixed) = self.fixed_dim() {
            if dim != fixed {
                return Err(Error::Argument(format!("{} is defined only for d = {fixed}", self.name())));
            }
        }
        let (lo, hi) = self.bounds();
        Domain::cube(dim, lo, hi)
    }

    /// Known global minimum value, where documented.
    pub fn global_min(self, dim: usize) -> Option<f64> {
        match self {
            TestFunction::Ackley | TestFunction::Rastrigin | TestFunction::Schwefel | TestFunction::Levy => Some(0.0),
            TestFunction::Hartmann6 => Some(-3.042),
            TestFunction::Michalewicz if dim == 10 => Some(-9.660),
            TestFunction::Michalewicz => None,
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        self.domain(x.len())?.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Ackley => ackley(x),
            TestFunction::Hartmann6 => hartmann6(x),
            TestFunction::Rastrigin => rastrigin(x),
            TestFunction::Schwefel => schwefel(x),
            TestFunction::Levy => levy(x),
            TestFunction::Michalewicz => michalewicz(x),
        }
    }
}

pub fn eval_ackley(x: &[f64]) -> Result<f64> {
    TestFunction::Ackley.eval(x)
}

pub fn eval_hartmann6(x: &[f64]) -> Result<f64> {
    TestFunction::Hartmann6.eval(x)
}

pub fn eval_rastrigin(x: &[f64]) -> Result<f64> {
    TestFunction::Rastrigin.eval(x)
}

pub fn eval_schwefel(x: &[f64]) -> Result<f64> {
    TestFunction::Schwefel.eval(x)
}

pub fn eval_levy(x: &[f64]) -> Result<f64> {
    TestFunction::Levy.eval(x)
}

pub fn eval_michalewicz(x: &[f64]) -> Result<f64> {
    TestFunction::Michalewicz.eval(x)
}

fn ackley(x: &[f64]) -> f64 {
    const A: f64 = 20.0;
    const B: f64 = 0.2;
    const C: f64 = 2.0 * PI;
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (C * v).cos()).sum::<f64>() / d;
    -A * (-B * sq.sqrt()).exp() - cs.exp() + A + E
}

pub const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

pub const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

pub const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// `alpha_i * exp(-sum_j A_ij (x_j - P_ij)^2)` for one row of the table.
pub fn hartmann6_term(x: &[f64], i: usize) -> f64 {
    let inner: f64 = (0..6)
        .map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2))
        .sum();
    HARTMANN_ALPHA[i] * (-inner).exp()
}

fn hartmann6(x: &[f64]) -> f64 {
    let s: f64 = (0..4).map(|i| hartmann6_term(x, i)).sum();
    -(2.58 + s) / 1.94
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

fn schwefel(x: &[f64]) -> f64 {
    418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let mid: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wd = w[d - 1];
    let tail = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
    head + mid + tail
}

fn michalewicz(x: &[f64]) -> f64 {
    const M: i32 = 10;
    -x.iter()
        .enumerate()
        .map(|(i, &v)| v.sin() * ((i as f64 + 1.0) * v * v / PI).sin().powi(2 * M))
        .sum::<f64>()
}

/// Anything that can produce an objective value at a native-coordinate point.
pub trait Evaluate: Send + Sync {
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

impl<F> Evaluate for F
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

impl Evaluate for TestFunction {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
}

/// A domain plus an evaluator, with an evaluation counter.
pub struct Objective {
    name: String,
    domain: Domain,
    evaluator: Box<dyn Evaluate>,
    evals: AtomicU64,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.domain.dim())
            .field("evals", &self.eval_count())
            .finish()
    }
}

impl Objective {
    pub fn new(name: impl Into<String>, domain: Domain, evaluator: Box<dyn Evaluate>) -> Self {
        Self {
            name: name.into(),
            domain,
            evaluator,
            evals: AtomicU64::new(0),
        }
    }

    pub fn analytic(func: TestFunction, dim: usize) -> Result<Self> {
        Ok(Self::new(func.name(), func.domain(dim)?, Box::new(func)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::SeqCst)
    }

    /// Evaluate at a native-coordinate point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.evals.fetch_add(1, Ordering::SeqCst);
        self.domain.check(x)?;
        self.evaluator.evaluate(x)
    }

    /// Evaluate at a unit-cube point.
    pub fn evaluate_unit(&self, u: &[f64]) -> Result<f64> {
        Domain::unit(u.len())?.check(u)?;
        self.evaluate(&self.domain.to_native(u))
    }
}

/// Result of penalizing a constrained evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalized {
    pub value: f64,
    pub base: f64,
    pub violations: usize,
    pub violation_sum_sq: f64,
}

/// `g + Σ h_i²` over the constraints with `h_i > 0` (strictly).
pub fn penalize_values(base: f64, constraints: &[f64]) -> Penalized {
    let (violations, violation_sum_sq) = constraints
        .iter()
        .filter(|&&h| h > 0.0)
        .fold((0usize, 0.0f64), |(n, s), &h| (n + 1, s + h * h));
    Penalized {
        value: base + violation_sum_sq,
        base,
        violations,
        violation_sum_sq,
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// A raw objective with inequality constraints `h_i(x) ≤ 0`.
pub struct ConstrainedObjective {
    base: ScalarFn,
    constraints: Vec<ScalarFn>,
}

impl ConstrainedObjective {
    pub fn new(base: ScalarFn, constraints: Vec<ScalarFn>) -> Self {
        Self { base, constraints }
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn penalize(&self, x: &[f64]) -> Result<Penalized> {
        let g = (self.base)(x)?;
        let h = self
            .constraints
            .iter()
            .map(|c| c(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(penalize_values(g, &h))
    }
}

impl Evaluate for ConstrainedObjective {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.penalize(x)?.value)
    }
}

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(300);

/// How to launch an external evaluator.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
    /// Expect `OK f m h1 .. hm` replies and penalize violated constraints.
    pub constrained: bool,
}

impl ExternalCommand {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            timeout: DEFAULT_EXTERNAL_TIMEOUT,
            constrained: false,
        }
    }

    /// Run `script` through `sh -c`.
    pub fn shell(script: impl Into<String>) -> Self {
        Self::new("sh", vec!["-c".into(), script.into()])
    }

    pub fn constrained(mut self, yes: bool) -> Self {
        self.constrained = yes;
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

struct ChildSession {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    broken: bool,
}

/// Evaluator that talks to a child process, one request in flight at a time.
///
/// Request: `EVAL d x1 .. xd`. Replies: `OK f`, `OK f m h1 .. hm` (constrained
/// mode) or `ERR <message>`.
pub struct ExternalEvaluator {
    session: Mutex<ChildSession>,
    timeout: Duration,
    constrained: bool,
    last: Mutex<Option<Penalized>>,
}

impl ExternalEvaluator {
    pub fn spawn(cmd: &ExternalCommand) -> Result<Self> {
        let mut child = Command::new(&cmd.program)
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            session: Mutex::new(ChildSession {
                child,
                stdin,
                lines: rx,
                broken: false,
            }),
            timeout: cmd.timeout,
            constrained: cmd.constrained,
            last: Mutex::new(None),
        })
    }

    /// Penalization details of the most recent successful evaluation.
    pub fn last_penalized(&self) -> Option<Penalized> {
        *self.last.lock().unwrap()
    }

    pub fn evaluate_detailed(&self, x: &[f64]) -> Result<Penalized> {
        let mut s = self.session.lock().unwrap();
        if s.broken {
            return Err(eval_error("external evaluator is no longer usable", ""));
        }
        let mut request = format!("EVAL {}", x.len());
        for v in x {
            request.push(' ');
            request.push_str(&fmt_float(*v));
        }
        request.push('\n');
        if let Err(e) = s.stdin.write_all(request.as_bytes()).and_then(|_| s.stdin.flush()) {
            s.broken = true;
            return Err(eval_error(&format!("failed to write request: {e}"), ""));
        }
        let line = match s.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                s.broken = true;
                return Err(eval_error(&format!("failed to read reply: {e}"), ""));
            }
            Err(RecvTimeoutError::Timeout) => {
                s.broken = true;
                let _ = s.child.kill();
                return Err(eval_error(&format!("no reply within {:?}", self.timeout), ""));
            }
            Err(RecvTimeoutError::Disconnected) => {
                s.broken = true;
                return Err(eval_error("child process exited", ""));
            }
        };
        drop(s);
        let parsed = parse_reply(&line, self.constrained)?;
        *self.last.lock().unwrap() = Some(parsed);
        Ok(parsed)
    }
}

fn eval_error(message: &str, raw: &str) -> Error {
    Error::Evaluation {
        message: message.to_string(),
        raw: raw.to_string(),
    }
}

fn parse_number(tok: &str, raw: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(eval_error(&format!("malformed number {tok:?}"), raw)),
    }
}

fn parse_reply(line: &str, constrained: bool) -> Result<Penalized> {
    let raw = line.trim_end();
    let mut toks = raw.split_whitespace();
    match toks.next() {
        Some("OK") => {}
        Some("ERR") => {
            let msg = raw.trim_start().strip_prefix("ERR").unwrap_or("").trim();
            return Err(eval_error(&format!("evaluator reported: {msg}"), raw));
        }
        _ => return Err(eval_error("reply must start with OK or ERR", raw)),
    }
    let f = parse_number(toks.next().ok_or_else(|| eval_error("missing value", raw))?, raw)?;
    let rest: Vec<&str> = toks.collect();
    if !constrained {
        if !rest.is_empty() {
            return Err(eval_error("unexpected trailing fields", raw));
        }
        return Ok(penalize_values(f, &[]));
    }
    let (m_tok, hs) = rest
        .split_first()
        .ok_or_else(|| eval_error("missing constraint count", raw))?;
    let m: usize = m_tok
        .parse()
        .map_err(|_| eval_error(&format!("malformed constraint count {m_tok:?}"), raw))?;
    if hs.len() != m {
        return Err(eval_error(&format!("expected {m} constraint values, got {}", hs.len()), raw));
    }
    let h = hs.iter().map(|t| parse_number(t, raw)).collect::<Result<Vec<_>>>()?;
    Ok(penalize_values(f, &h))
}

impl Evaluate for ExternalEvaluator {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate_detailed(x)?.value)
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Ok(s) = self.session.get_mut() {
            let _ = s.child.kill();
            let _ = s.child.wait();
        }
    }
}

/// An [`Objective`] backed by a child process.
pub fn external_objective(name: &str, cmd: &ExternalCommand, domain: Domain) -> Result<Objective> {
    let evaluator = ExternalEvaluator::spawn(cmd)?;
    Ok(Objective::new(name, domain, Box::new(evaluator)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        assert!(eval_ackley(&[0.0; 6]).unwrap().abs() < 1e-12);
        assert!(eval_ackley(&[0.0; 2]).unwrap().abs() < 1e-12);
        assert_eq!(eval_rastrigin(&[0.0; 6]).unwrap(), 0.0);
        assert!(eval_levy(&[1.0; 10]).unwrap().abs() < 1e-12);
        // Schwefel's documented minimizer is 420.9687 in every coordinate.
        assert!(eval_schwefel(&[420.9687; 6]).unwrap().abs() < 1e-3);
    }

    #[test]
    fn hartmann_tables_checksum() {
        let row_a: Vec<f64> = HARTMANN_A.iter().map(|r| r.iter().sum()).collect();
        let expect_a = [43.2, 49.15, 43.2, 49.15];
        for (a, e) in row_a.iter().zip(expect_a) {
            assert!((a - e).abs() < 1e-12);
        }
        let col_a: Vec<f64> = (0..6).map(|j| HARTMANN_A.iter().map(|r| r[j]).sum()).collect();
        for (a, e) in col_a.iter().zip([30.05, 24.5, 35.75, 23.6, 26.8, 44.0]) {
            assert!((a - e).abs() < 1e-12);
        }
        let row_p: Vec<f64> = HARTMANN_P.iter().map(|r| r.iter().sum()).collect();
        for (a, e) in row_p.iter().zip([2.2870, 2.9502, 1.9901, 2.8822]) {
            assert!((a - e).abs() < 1e-12);
        }
        let col_p: Vec<f64> = (0..6).map(|j| HARTMANN_P.iter().map(|r| r[j]).sum()).collect();
        for (a, e) in col_p.iter().zip([1.0036, 1.6110, 2.6130, 1.2486, 1.3425, 2.2908]) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn hartmann_term_at_table_row_is_alpha() {
        for i in 0..4 {
            assert_eq!(hartmann6_term(&HARTMANN_P[i], i), HARTMANN_ALPHA[i]);
        }
    }

    #[test]
    fn out_of_domain_errors() {
        assert!(matches!(
            eval_rastrigin(&[0.0, 5.2]),
            Err(Error::DomainViolation { index: 1, .. })
        ));
        assert!(eval_michalewicz(&[-0.1, 1.0]).is_err());
        assert!(eval_hartmann6(&[0.5; 5]).is_err());
    }

    #[test]
    fn penalize_examples() {
        assert_eq!(penalize_values(3.0, &[-1.0, 0.0, -2.0]).value, 3.0);
        assert_eq!(penalize_values(5.0, &[2.0]).value, 9.0);
        let p = penalize_values(1.0, &[-1.0, 0.5, 3.0]);
        assert_eq!(p.value, 10.25);
        assert_eq!(p.violations, 2);
        assert_eq!(p.violation_sum_sq, 9.25);
    }

    #[test]
    fn constrained_objective_composes() {
        let c = ConstrainedObjective::new(
            Box::new(|x: &[f64]| Ok(x[0])),
            vec![Box::new(|x: &[f64]| Ok(x[0] - 1.0)), Box::new(|_: &[f64]| Ok(-1.0))],
        );
        assert_eq!(c.penalize(&[3.0]).unwrap().value, 7.0);
        assert_eq!(c.penalize(&[0.5]).unwrap().value, 0.5);
        let failing = ConstrainedObjective::new(
            Box::new(|_: &[f64]| Ok(0.0)),
            vec![Box::new(|_: &[f64]| Err(eval_error("boom", "")))],
        );
        assert!(failing.penalize(&[0.0]).is_err());
    }

    #[test]
    fn eval_count_is_exact() {
        let obj = Objective::analytic(TestFunction::Rastrigin, 3).unwrap();
        for _ in 0..17 {
            obj.evaluate_unit(&[0.2, 0.4, 0.6]).unwrap();
        }
        assert_eq!(obj.eval_count(), 17);
    }

    #[test]
    fn domain_roundtrip() {
        let d = TestFunction::Ackley.domain(2).unwrap();
        assert_eq!(d.to_native(&[0.5, 1.0]), vec![0.0, 32.768]);
        assert_eq!(d.to_unit(&[0.0, -32.768]), vec![0.5, 0.0]);
        assert!(Domain::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn reply_parsing() {
        assert_eq!(parse_reply("OK 2.5", false).unwrap().value, 2.5);
        assert_eq!(parse_reply("OK 1.0 2 -1.0 0.5", true).unwrap().value, 1.25);
        assert!(parse_reply("OK NaN?", false).is_err());
        assert!(parse_reply("OK NaN", false).is_err());
        assert!(parse_reply("OK 1.0 3 1 2", true).is_err());
        let err = parse_reply("ERR singular design", false).unwrap_err();
        assert!(err.to_string().contains("singular design"));
    }
}
