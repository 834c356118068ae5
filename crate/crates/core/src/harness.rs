//! Benchmark suites: Latin hypercube initial designs, presets, paired
//! repeats, summary statistics and CSV persistence.

use crate::drivers::{self, Method, RunConfig, RunRecord};
use crate::error::{Error, Result};
use crate::fmt_float;
use crate::gp::{Dataset, KernelFamily};
use crate::objective::{Objective, TestFunction};
use crate::rng::{Stream, StreamRng, Streams};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

/// Randomized Latin hypercube in `[0, 1]^d`: per column, one uniform draw in
/// each of `n` equal bins, bins visited in random order.
pub fn lhs(n: usize, d: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut bins: Vec<usize> = (0..n).collect();
        bins.shuffle(rng);
        for (i, &b) in bins.iter().enumerate() {
            let mut v = (b as f64 + rng.gen::<f64>()) / n as f64;
            if (v * n as f64).floor() as usize != b {
                v = (b as f64 + 0.5) / n as f64;
            }
            pts[i][j] = v;
        }
    }
    pts
}

/// Problem sizes of a named benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// `None` for objectives evaluated by an external program.
    pub function: Option<TestFunction>,
    pub dim: usize,
    pub n_init: usize,
    pub n_node: usize,
    pub n_total: usize,
    pub kernel: KernelFamily,
    pub constrained: bool,
}

pub const PRESETS: [Preset; 7] = [
    preset("ackley6", Some(TestFunction::Ackley), 6, 60, 100, 200, KernelFamily::PowerExponential),
    preset("hartmann6", Some(TestFunction::Hartmann6), 6, 60, 100, 200, KernelFamily::PowerExponential),
    preset("rastrigin6", Some(TestFunction::Rastrigin), 6, 60, 300, 400, KernelFamily::PowerExponential),
    preset("schwefel6", Some(TestFunction::Schwefel), 6, 60, 300, 400, KernelFamily::Matern52),
    preset("levy10", Some(TestFunction::Levy), 10, 100, 350, 450, KernelFamily::PowerExponential),
    preset("michalewicz10", Some(TestFunction::Michalewicz), 10, 100, 350, 450, KernelFamily::PowerExponential),
    Preset {
        name: "automotive",
        function: None,
        dim: 124,
        n_init: 125,
        n_node: 375,
        n_total: 600,
        kernel: KernelFamily::PowerExponential,
        constrained: true,
    },
];

const fn preset(
    name: &'static str,
    function: Option<TestFunction>,
    dim: usize,
    n_init: usize,
    n_node: usize,
    n_total: usize,
    kernel: KernelFamily,
) -> Preset {
    Preset {
        name,
        function,
        dim,
        n_init,
        n_node,
        n_total,
        kernel,
        constrained: false,
    }
}

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Everything needed to run a paired benchmark suite.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub label: String,
    pub objective: String,
    pub dim: usize,
    pub n_init: usize,
    pub n_node: usize,
    pub n_total: usize,
    pub kernel: KernelFamily,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub refuse_small_children: bool,
    pub standardize_f: bool,
}

pub const DEFAULT_REPEATS: usize = 10;

impl SuiteConfig {
    pub fn from_preset(p: &Preset) -> Self {
        Self {
            label: p.name.to_string(),
            objective: p.function.map_or(p.name, |f| f.name()).to_string(),
            dim: p.dim,
            n_init: p.n_init,
            n_node: p.n_node,
            n_total: p.n_total,
            kernel: p.kernel,
            methods: vec![Method::TreeBo, Method::Standard],
            repeats: DEFAULT_REPEATS,
            base_seed: 0,
            workers: 1,
            refuse_small_children: true,
            standardize_f: true,
        }
    }

    pub fn run_config(&self, method: Method, seed: u64) -> RunConfig {
        let mut c = RunConfig::new(method, self.n_init, self.n_node, self.n_total, self.kernel, seed);
        c.refuse_small_children = self.refuse_small_children;
        c.standardize_f = self.standardize_f;
        c
    }

    pub fn iterations(&self) -> usize {
        self.n_total.saturating_sub(self.n_init)
    }

    /// Iteration 0 plus 7 evenly spaced checkpoints ending at the last iteration.
    pub fn checkpoints(&self) -> Vec<usize> {
        checkpoints(self.iterations())
    }
}

pub fn checkpoints(iterations: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (0..=7).map(|k| ((k * iterations) as f64 / 7.0).round() as usize).collect();
    c.dedup();
    c
}

/// One method's run within a repeat.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub repeat: usize,
    pub seed: u64,
    pub method: Method,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.error.is_none() && self.record.as_ref().is_some_and(|r| r.completed())
    }

    pub fn failure_message(&self) -> Option<String> {
        self.error
            .clone()
            .or_else(|| self.record.as_ref().and_then(|r| r.failure.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub config: SuiteConfig,
    /// Ordered by repeat, then by method.
    pub runs: Vec<RunOutcome>,
}

impl SuiteResult {
    pub fn all_completed(&self) -> bool {
        self.runs.iter().all(|r| r.completed())
    }

    pub fn record(&self, repeat: usize, method: Method) -> Option<&RunRecord> {
        self.runs
            .iter()
            .find(|r| r.repeat == repeat && r.method == method)
            .and_then(|r| r.record.as_ref())
    }
}

/// Initial design of a repeat, in unit coordinates, with its responses.
pub fn initial_design(cfg: &SuiteConfig, obj: &Objective, seed: u64) -> Result<Dataset> {
    let mut rng = Streams::new(seed).derive(Stream::InitDesign, &[]);
    let pts = lhs(cfg.n_init, cfg.dim, &mut rng);
    let mut ds = Dataset::new(cfg.dim);
    for x in &pts {
        ds.push(x, obj.evaluate_unit(x)?)?;
    }
    Ok(ds)
}

fn run_repeat(cfg: &SuiteConfig, obj: &Objective, repeat: usize) -> Vec<RunOutcome> {
    let seed = cfg.base_seed.wrapping_add(repeat as u64);
    let init = initial_design(cfg, obj, seed);
    cfg.methods
        .iter()
        .map(|&method| {
            let run_id = format!("r{repeat:03}-{}", method.name());
            let result = init
                .as_ref()
                .map_err(|e| Error::Argument(format!("initial design failed: {e}")))
                .and_then(|init| drivers::run(&cfg.run_config(method, seed), obj, init));
            let (record, error) = match result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            if let Some(msg) = error.as_ref().or(record.as_ref().and_then(|r| r.failure.as_ref())) {
                log::error!("{run_id} (seed {seed}) failed: {msg}");
            } else {
                log::info!("{run_id} (seed {seed}) finished");
            }
            RunOutcome {
                run_id,
                repeat,
                seed,
                method,
                record,
                error,
            }
        })
        .collect()
}

/// Run every repeat (seed = base_seed + repeat) for each method on a shared
/// initial design. Individual failures are recorded, not propagated.
pub fn run_suite(cfg: &SuiteConfig, obj: &Objective) -> Result<SuiteResult> {
    if obj.dim() != cfg.dim {
        return Err(Error::Argument("objective dimension does not match the suite".into()));
    }
    if cfg.methods.is_empty() || cfg.repeats == 0 {
        return Err(Error::Argument("suite needs at least one method and one repeat".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))?;
    let runs: Vec<RunOutcome> = pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|r| run_repeat(cfg, obj, r))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    Ok(SuiteResult {
        config: cfg.clone(),
        runs,
    })
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let count = v.len();
        let mean = if count == 0 {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / count as f64
        };
        Stats {
            count,
            mean,
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// `treebo`, `standard`, or `delta` (tree minus baseline, per pair).
    pub series: String,
    pub checkpoint: usize,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub repeat: usize,
    pub seed: u64,
    pub checkpoint: usize,
    pub treebo: f64,
    pub standard: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub deltas: Vec<DeltaRow>,
}

impl Summary {
    pub fn get(&self, series: &str, checkpoint: usize) -> Option<&Stats> {
        self.rows
            .iter()
            .find(|r| r.series == series && r.checkpoint == checkpoint)
            .map(|r| &r.stats)
    }
}

/// Best-so-far statistics per method and checkpoint over completed runs,
/// plus per-pair deltas where both methods completed.
pub fn summarize(result: &SuiteResult) -> Summary {
    let cps = result.config.checkpoints();
    let mut rows = Vec::new();
    let mut methods = result.config.methods.clone();
    methods.sort();
    for &m in &methods {
        for &c in &cps {
            let vals: Vec<f64> = result
                .runs
                .iter()
                .filter(|r| r.method == m && r.completed())
                .filter_map(|r| r.record.as_ref().and_then(|rec| rec.best_after(c)))
                .collect();
            rows.push(SummaryRow {
                series: m.name().to_string(),
                checkpoint: c,
                stats: Stats::of(&vals),
            });
        }
    }
    let mut deltas = Vec::new();
    if methods.contains(&Method::TreeBo) && methods.contains(&Method::Standard) {
        for rep in 0..result.config.repeats {
            let pair = result
                .runs
                .iter()
                .find(|r| r.repeat == rep && r.method == Method::TreeBo && r.completed())
                .zip(
                    result
                        .runs
                        .iter()
                        .find(|r| r.repeat == rep && r.method == Method::Standard && r.completed()),
                );
            let Some((t, s)) = pair else { continue };
            let (tr, sr) = (t.record.as_ref().unwrap(), s.record.as_ref().unwrap());
            for &c in &cps {
                if let (Some(a), Some(b)) = (tr.best_after(c), sr.best_after(c)) {
                    deltas.push(DeltaRow {
                        repeat: rep,
                        seed: t.seed,
                        checkpoint: c,
                        treebo: a,
                        standard: b,
                        delta: a - b,
                    });
                }
            }
        }
        for &c in &cps {
            let vals: Vec<f64> = deltas.iter().filter(|d| d.checkpoint == c).map(|d| d.delta).collect();
            rows.push(SummaryRow {
                series: "delta".into(),
                checkpoint: c,
                stats: Stats::of(&vals),
            });
        }
    }
    Summary { rows, deltas }
}

/// Suite output directory under `root`.
pub fn suite_dir(root: &FsPath, cfg: &SuiteConfig) -> PathBuf {
    root.join(format!("{}-seed{}", cfg.label, cfg.base_seed))
}

/// Write the CSV files of a suite into `dir` (created if missing).
pub fn write_outputs(dir: &FsPath, result: &SuiteResult, obj: &Objective) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let cfg = &result.config;
    let mut obs = String::from("run_id,method,objective,dim,seed,iter,best_so_far,f,leaf_path,gp_train_size\n");
    let mut pts = String::from("run_id,method,iter");
    for j in 1..=cfg.dim {
        write!(pts, ",x{j}").unwrap();
    }
    pts.push('\n');
    let mut times = String::from("run_id,method,iter,wall_ms\n");
    let mut fails = String::from("run_id,method,seed,message\n");
    for run in &result.runs {
        if let Some(msg) = run.failure_message() {
            writeln!(fails, "{},{},{},{}", run.run_id, run.method, run.seed, csv_text(&msg)).unwrap();
        }
        let Some(rec) = &run.record else { continue };
        for row in &rec.rows {
            writeln!(
                obs,
                "{},{},{},{},{},{},{},{},{},{}",
                run.run_id,
                run.method,
                cfg.objective,
                cfg.dim,
                run.seed,
                row.iter,
                fmt_float(row.best_so_far),
                fmt_float(row.f),
                row.leaf_path,
                row.gp_train_size
            )
            .unwrap();
            write!(pts, "{},{},{}", run.run_id, run.method, row.iter).unwrap();
            for v in obj.domain().to_native(&row.x) {
                write!(pts, ",{}", fmt_float(v)).unwrap();
            }
            pts.push('\n');
            writeln!(times, "{},{},{},{:.3}", run.run_id, run.method, row.iter, row.wall_ms).unwrap();
        }
    }
    let summary = summarize(result);
    let mut sum = String::from("series,checkpoint,count,mean,median,q1,q3,min,max\n");
    for r in &summary.rows {
        let s = &r.stats;
        writeln!(
            sum,
            "{},{},{},{},{},{},{},{},{}",
            r.series,
            r.checkpoint,
            s.count,
            fmt_float(s.mean),
            fmt_float(s.median),
            fmt_float(s.q1),
            fmt_float(s.q3),
            fmt_float(s.min),
            fmt_float(s.max)
        )
        .unwrap();
    }
    let mut del = String::from("repeat,seed,checkpoint,treebo,standard,delta\n");
    for d in &summary.deltas {
        writeln!(
            del,
            "{},{},{},{},{},{}",
            d.repeat,
            d.seed,
            d.checkpoint,
            fmt_float(d.treebo),
            fmt_float(d.standard),
            fmt_float(d.delta)
        )
        .unwrap();
    }
    fs::write(dir.join("observations.csv"), obs)?;
    fs::write(dir.join("points.csv"), pts)?;
    fs::write(dir.join("timings.csv"), times)?;
    fs::write(dir.join("summary.csv"), sum)?;
    fs::write(dir.join("deltas.csv"), del)?;
    fs::write(dir.join("failures.csv"), fails)?;
    Ok(summary)
}

fn csv_text(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> StreamRng {
        Streams::new(seed).derive(Stream::InitDesign, &[])
    }

    #[test]
    fn lhs_one_point_per_bin() {
        let mut r = rng(1);
        for &(n, d) in &[(1, 3), (4, 2), (17, 5)] {
            let pts = lhs(n, d, &mut r);
            for j in 0..d {
                let mut bins: Vec<usize> = pts.iter().map(|p| (p[j] * n as f64).floor() as usize).collect();
                bins.sort_unstable();
                assert_eq!(bins, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn preset_table() {
        let a = find_preset("ackley6").unwrap();
        assert_eq!((a.dim, a.n_init, a.n_node, a.n_total), (6, 60, 100, 200));
        let l = find_preset("levy10").unwrap();
        assert_eq!((l.dim, l.n_init, l.n_node, l.n_total), (10, 100, 350, 450));
        assert_eq!(find_preset("schwefel6").unwrap().kernel, KernelFamily::Matern52);
        let auto = find_preset("automotive").unwrap();
        assert!(auto.function.is_none() && auto.constrained);
        assert!(find_preset("nope").is_none());
    }

    #[test]
    fn checkpoint_layout() {
        assert_eq!(checkpoints(140), vec![0, 20, 40, 60, 80, 100, 120, 140]);
        assert_eq!(checkpoints(350), vec![0, 50, 100, 150, 200, 250, 300, 350]);
        assert_eq!(checkpoints(3), vec![0, 1, 2, 3]);
    }

    #[test]
    fn quantiles_and_stats() {
        let s = Stats::of(&[3.0, 1.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.median, 2.0);
        let s = Stats::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }
}
