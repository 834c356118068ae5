//! Optimization loops: the partitioned-tree method and the single-GP baseline.

use crate::acquisition::{self, AcquisitionContext, SwarmOptions, FALLBACK_STARTS};
use crate::error::{Error, Result};
use crate::gp::{self, Dataset, FitOptions, KernelFamily};
use crate::objective::Objective;
use crate::partition::RegionChain;
use crate::rng::{Stream, Streams};
use crate::tree::{FitEvent, Path, Tree, TreeOptions};
use rand::Rng;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TreeBo,
    Standard,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TreeBo => "treebo",
            Method::Standard => "standard",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "treebo" => Ok(Method::TreeBo),
            "standard" => Ok(Method::Standard),
            _ => Err(Error::Argument(format!("unknown method {s:?}"))),
        }
    }
}

/// Distance below which a proposed point counts as a repeat of an observation.
pub const DUPLICATE_RADIUS: f64 = 1e-10;
/// Half-width of the uniform nudge applied to repeated points.
pub const PERTURB_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub n_init: usize,
    pub n_node: usize,
    pub n_total: usize,
    pub kernel: KernelFamily,
    pub seed: u64,
    pub refuse_small_children: bool,
    pub standardize_f: bool,
    pub fit: FitOptions,
    pub swarm: SwarmOptions,
}

impl RunConfig {
    pub fn new(method: Method, n_init: usize, n_node: usize, n_total: usize, kernel: KernelFamily, seed: u64) -> Self {
        Self {
            method,
            n_init,
            n_node,
            n_total,
            kernel,
            seed,
            refuse_small_children: true,
            standardize_f: true,
            fit: FitOptions::default(),
            swarm: SwarmOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::Argument("n_init must be at least 2".into()));
        }
        if !(self.n_init <= self.n_node && self.n_node < self.n_total) {
            return Err(Error::Argument(format!(
                "need n_init <= n_node < n_total, got {} / {} / {}",
                self.n_init, self.n_node, self.n_total
            )));
        }
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.n_total - self.n_init
    }

    fn tree_options(&self) -> TreeOptions {
        TreeOptions {
            n_node: self.n_node,
            kernel: self.kernel,
            refuse_small_children: self.refuse_small_children,
            standardize_f: self.standardize_f,
            fit: self.fit.clone(),
            swarm: self.swarm.clone(),
        }
    }
}

/// One acquisition step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iter: usize,
    /// Chosen point in unit coordinates.
    pub x: Vec<f64>,
    pub f: f64,
    pub best_so_far: f64,
    pub leaf_path: String,
    pub wall_ms: f64,
    /// Training-set size of the GP that proposed the point.
    pub gp_train_size: usize,
    /// Acquisition value at the proposed point.
    pub alpha: f64,
    pub perturbed: bool,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub rows: Vec<IterationRow>,
    pub init_best: f64,
    pub fit_events: Vec<FitEvent>,
    /// Step at which the first split succeeded (tree method only).
    pub first_split: Option<usize>,
    pub failure: Option<String>,
}

impl RunRecord {
    fn new(method: Method, seed: u64, init_best: f64) -> Self {
        Self {
            method,
            seed,
            rows: Vec::new(),
            init_best,
            fit_events: Vec::new(),
            first_split: None,
            failure: None,
        }
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_best(&self) -> f64 {
        self.rows.last().map_or(self.init_best, |r| r.best_so_far)
    }

    /// Best-so-far after `k` subsequent observations (`k = 0` is the initial design).
    pub fn best_after(&self, k: usize) -> Option<f64> {
        if k == 0 {
            Some(self.init_best)
        } else {
            self.rows.get(k - 1).map(|r| r.best_so_far)
        }
    }
}

fn check_init(cfg: &RunConfig, obj: &Objective, init: &Dataset) -> Result<()> {
    cfg.validate()?;
    if init.len() != cfg.n_init {
        return Err(Error::Argument(format!("initial design has {} points, expected {}", init.len(), cfg.n_init)));
    }
    if init.dim() != obj.dim() {
        return Err(Error::Argument("initial design dimension does not match the objective".into()));
    }
    for x in init.rows() {
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Argument("initial design must lie in the unit box".into()));
        }
    }
    Ok(())
}

/// Nudge `x` inside a small box when it repeats an existing observation.
fn dedupe(x: &mut [f64], nearest: f64, streams: &Streams, step: u64) -> bool {
    if nearest > DUPLICATE_RADIUS {
        return false;
    }
    let mut r = streams.derive(Stream::Perturbation, &[step]);
    for v in x.iter_mut() {
        *v = (*v + PERTURB_RADIUS * (2.0 * r.gen::<f64>() - 1.0)).clamp(0.0, 1.0);
    }
    true
}

/// Leaf with the largest stored acquisition value; ties go to the
/// lexicographically smallest path.
pub fn select_leaf(tree: &Tree) -> Result<Path> {
    let mut best: Option<(f64, Path)> = None;
    for p in tree.leaf_paths() {
        let v = tree.node(&p).unwrap().alpha_value();
        if v == f64::NEG_INFINITY || v.is_nan() {
            continue;
        }
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, p));
        }
    }
    best.map(|b| b.1).ok_or(Error::NoUsableLeaf)
}

/// Stepwise driver for the tree method.
pub struct TreeBo<'a> {
    cfg: RunConfig,
    obj: &'a Objective,
    tree: Tree,
    streams: Streams,
    record: RunRecord,
}

impl<'a> TreeBo<'a> {
    /// Build the root from `init` (unit coordinates) and fit it.
    pub fn new(cfg: RunConfig, obj: &'a Objective, init: &Dataset) -> Result<Self> {
        check_init(&cfg, obj, init)?;
        let streams = Streams::new(cfg.seed);
        let mut tree = Tree::new(init, cfg.tree_options(), streams)?;
        let f_min = tree.f_min();
        tree.update_node(&Path::root(), f_min, 0)?;
        let record = RunRecord::new(Method::TreeBo, cfg.seed, f_min);
        Ok(Self {
            cfg,
            obj,
            tree,
            streams,
            record,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn is_done(&self) -> bool {
        self.tree.len() >= self.cfg.n_total
    }

    /// Select a leaf, observe its maximizer, then split or refit that leaf.
    pub fn step(&mut self) -> Result<&IterationRow> {
        if self.is_done() {
            return Err(Error::Argument("run already complete".into()));
        }
        let start = Instant::now();
        let i = self.record.rows.len();
        let p = select_leaf(&self.tree)?;
        let node = self.tree.node(&p).unwrap();
        let acq = node.acq.clone().unwrap();
        let train_size = self.tree.fit_events().iter().rev().find(|e| e.path == p).map_or(0, |e| e.train_size);
        let mut x = acq.x_star.clone();
        let nearest = self.tree.nearest_distance(&x);
        let perturbed = dedupe(&mut x, nearest, &self.streams, i as u64);
        if acq.value < 0.0 {
            log::warn!("iteration {i}: best leaf {p} only offers a penalized point (alpha {:e})", acq.value);
        }
        let f = self.obj.evaluate_unit(&x)?;
        self.tree.add_observation(&p, &x, f)?;
        let n = self.tree.len();
        let step = (i + 1) as u64;
        if n < self.cfg.n_total {
            let f_min = self.tree.f_min();
            let mut split = false;
            if self.tree.wants_split(&p) {
                if let Ok((a, b)) = self.tree.split_node(&p, step)? {
                    self.tree.update_node(&a, f_min, step)?;
                    self.tree.update_node(&b, f_min, step)?;
                    self.record.first_split.get_or_insert(i);
                    split = true;
                }
            }
            if !split {
                self.tree.update_node(&p, f_min, step)?;
            }
        }
        let best = self.record.final_best().min(f);
        self.record.rows.push(IterationRow {
            iter: i,
            x,
            f,
            best_so_far: best,
            leaf_path: p.to_string(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            gp_train_size: train_size,
            alpha: acq.value,
            perturbed,
        });
        Ok(self.record.rows.last().unwrap())
    }

    pub fn finish(mut self) -> RunRecord {
        self.record.fit_events = self.tree.fit_events().to_vec();
        self.record
    }
}

/// The tree method for `n_total - n_init` iterations. Evaluation and
/// surrogate failures stop the run and are recorded in `failure`.
pub fn run_treebo(cfg: &RunConfig, obj: &Objective, init: &Dataset) -> Result<RunRecord> {
    let mut run = TreeBo::new(cfg.clone(), obj, init)?;
    while !run.is_done() {
        if let Err(e) = run.step() {
            log::error!("tree run (seed {}) stopped: {e}", cfg.seed);
            let mut rec = run.finish();
            rec.failure = Some(e.to_string());
            return Ok(rec);
        }
    }
    Ok(run.finish())
}

/// Classic loop: one GP on all data, unpenalized EI over the whole box.
pub fn run_standard(cfg: &RunConfig, obj: &Objective, init: &Dataset) -> Result<RunRecord> {
    check_init(cfg, obj, init)?;
    let streams = Streams::new(cfg.seed);
    let mut data = init.clone();
    let mut record = RunRecord::new(Method::Standard, cfg.seed, init.min_response().unwrap());
    let root = Path::root();
    let region = RegionChain::root();
    for i in 0..cfg.iterations() {
        let start = Instant::now();
        let step = i as u64;
        let coords = [step, root.key()];
        let outcome = (|| -> Result<IterationRow> {
            let f_min = data.min_response().unwrap();
            let model = gp::fit_with(&data, cfg.kernel, &cfg.fit, &mut streams.derive(Stream::GpFit, &coords))?;
            record.fit_events.push(FitEvent {
                step,
                path: root.clone(),
                own_size: data.len(),
                train_size: data.len(),
                ok: true,
            });
            let mut swarm_rng = streams.derive(Stream::Swarm, &coords);
            let rows: Vec<&[f64]> = data.rows().collect();
            let starts = if rows.len() >= 2 {
                acquisition::gen_acq_points(&rows, &mut swarm_rng)?
            } else {
                acquisition::uniform_points(FALLBACK_STARTS, data.dim(), &mut swarm_rng)
            };
            let ctx = AcquisitionContext::new(&model, f_min, &region);
            let acq = acquisition::maximize_fn(|x| acquisition::alpha(&ctx, x), data.dim(), &starts, &cfg.swarm, &mut swarm_rng);
            let mut x = acq.x_star;
            let nearest = data
                .rows()
                .map(|r| r.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            let perturbed = dedupe(&mut x, nearest, &streams, step);
            let f = obj.evaluate_unit(&x)?;
            let train = data.len();
            data.push(&x, f)?;
            Ok(IterationRow {
                iter: i,
                x,
                f,
                best_so_far: f64::NAN,
                leaf_path: root.to_string(),
                wall_ms: 0.0,
                gp_train_size: train,
                alpha: acq.value,
                perturbed,
            })
        })();
        match outcome {
            Ok(mut row) => {
                row.best_so_far = record.final_best().min(row.f);
                row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
                record.rows.push(row);
            }
            Err(e) => {
                log::error!("standard run (seed {}) stopped: {e}", cfg.seed);
                record.failure = Some(e.to_string());
                break;
            }
        }
    }
    Ok(record)
}

pub fn run(cfg: &RunConfig, obj: &Objective, init: &Dataset) -> Result<RunRecord> {
    match cfg.method {
        Method::TreeBo => run_treebo(cfg, obj, init),
        Method::Standard => run_standard(cfg, obj, init),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::TestFunction;

    fn init_for(obj: &Objective, n: usize, seed: u64) -> Dataset {
        let mut r = Streams::new(seed).derive(Stream::InitDesign, &[]);
        let mut ds = Dataset::new(obj.dim());
        for _ in 0..n {
            let x: Vec<f64> = (0..obj.dim()).map(|_| r.gen()).collect();
            let f = obj.evaluate_unit(&x).unwrap();
            ds.push(&x, f).unwrap();
        }
        ds
    }

    fn fast(mut cfg: RunConfig) -> RunConfig {
        cfg.swarm.iterations = 30;
        cfg
    }

    #[test]
    fn config_validation() {
        let k = KernelFamily::PowerExponential;
        assert!(RunConfig::new(Method::TreeBo, 10, 20, 30, k, 0).validate().is_ok());
        assert!(RunConfig::new(Method::TreeBo, 30, 20, 40, k, 0).validate().is_err());
        assert!(RunConfig::new(Method::TreeBo, 10, 30, 30, k, 0).validate().is_err());
    }

    #[test]
    fn single_step_runs_match_between_methods() {
        let obj = Objective::analytic(TestFunction::Rastrigin, 2).unwrap();
        let init = init_for(&obj, 8, 1);
        let k = KernelFamily::PowerExponential;
        assert!(run_treebo(&fast(RunConfig::new(Method::TreeBo, 8, 10, 9, k, 5)), &obj, &init).is_err());
        let cfg_t = fast(RunConfig::new(Method::TreeBo, 8, 8, 9, k, 5));
        let cfg_s = fast(RunConfig::new(Method::Standard, 8, 8, 9, k, 5));
        let t = run_treebo(&cfg_t, &obj, &init).unwrap();
        let s = run_standard(&cfg_s, &obj, &init).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].x, s.rows[0].x);
        assert_eq!(t.rows[0].f, s.rows[0].f);
    }

    #[test]
    fn tree_run_caps_fit_size_and_is_deterministic() {
        let obj = Objective::analytic(TestFunction::Ackley, 2).unwrap();
        let init = init_for(&obj, 10, 2);
        let cfg = fast(RunConfig::new(Method::TreeBo, 10, 14, 30, KernelFamily::PowerExponential, 9));
        let a = run_treebo(&cfg, &obj, &init).unwrap();
        let b = run_treebo(&cfg, &obj, &init).unwrap();
        assert!(a.completed());
        assert_eq!(a.rows.len(), 20);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!((&ra.x, ra.f, &ra.leaf_path), (&rb.x, rb.f, &rb.leaf_path));
        }
        for w in a.rows.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
        }
        for (i, r) in a.rows.iter().enumerate() {
            assert!(r.gp_train_size <= 14 || a.fit_events.iter().any(|e| e.own_size > 14), "row {i}");
        }
        assert!(a.first_split.is_some());
    }

    #[test]
    fn standard_fit_size_grows() {
        let obj = Objective::analytic(TestFunction::Levy, 2).unwrap();
        let init = init_for(&obj, 6, 3);
        let cfg = fast(RunConfig::new(Method::Standard, 6, 6, 10, KernelFamily::Matern52, 1));
        let s = run_standard(&cfg, &obj, &init).unwrap();
        for (i, r) in s.rows.iter().enumerate() {
            assert_eq!(r.gp_train_size, 6 + i);
            assert_eq!(r.leaf_path, "0");
        }
    }
}
