//! Split machinery: 2-medoid clustering, Gaussian-kernel SVM with a
//! cross-validated grid search, and region-membership chains.

use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::rng::StreamRng;
use rand::seq::SliceRandom;
use rand::Rng;
use std::sync::Arc;

/// Number of PAM runs (one BUILD start plus random starts).
pub const PAM_STARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    /// One label per row, each 1 or 2.
    pub labels: Vec<u8>,
    /// Medoid row indices, ascending. Cluster 1 belongs to the first.
    pub medoids: [usize; 2],
    pub cost: f64,
}

impl ClusterLabels {
    pub fn count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Dissimilarity {
    n: usize,
    d: Vec<f64>,
}

impl Dissimilarity {
    fn new(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = euclid(&rows[i], &rows[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    fn cost(&self, a: usize, b: usize) -> f64 {
        (0..self.n).map(|i| self.at(i, a).min(self.at(i, b))).sum()
    }
}

/// Total dissimilarity of `rows` to the nearer of two medoids.
pub fn pam_cost(rows: &[Vec<f64>], medoids: [usize; 2]) -> f64 {
    rows.iter()
        .map(|r| euclid(r, &rows[medoids[0]]).min(euclid(r, &rows[medoids[1]])))
        .sum()
}

fn swap_phase(dis: &Dissimilarity, mut m: [usize; 2]) -> ([usize; 2], f64) {
    let n = dis.n;
    let mut cost = dis.cost(m[0], m[1]);
    loop {
        let mut best = (cost, m);
        for slot in 0..2 {
            let keep = m[1 - slot];
            for h in 0..n {
                if h == m[0] || h == m[1] {
                    continue;
                }
                let c = dis.cost(keep, h);
                if c < best.0 {
                    let mut cand = m;
                    cand[slot] = h;
                    best = (c, cand);
                }
            }
        }
        if best.0 < cost - 1e-12 * cost.abs().max(1e-300) {
            cost = best.0;
            m = best.1;
        } else {
            return (m, cost);
        }
    }
}

fn build_phase(dis: &Dissimilarity) -> [usize; 2] {
    let n = dis.n;
    let first = (0..n)
        .map(|m| (m, (0..n).map(|i| dis.at(i, m)).sum::<f64>()))
        .fold((0, f64::INFINITY), |acc, (m, c)| if c < acc.1 { (m, c) } else { acc })
        .0;
    let second = (0..n)
        .filter(|&m| m != first)
        .map(|m| (m, dis.cost(first, m)))
        .fold((usize::MAX, f64::INFINITY), |acc, (m, c)| if c < acc.1 { (m, c) } else { acc })
        .0;
    [first, second]
}

/// 2-medoid PAM (BUILD + SWAP), best of [`PAM_STARTS`] runs.
pub fn pam_cluster(rows: &[Vec<f64>], rng: &mut StreamRng) -> Result<ClusterLabels> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::DegenerateCluster(format!("need at least 2 rows, got {n}")));
    }
    if rows.iter().all(|r| r == &rows[0]) {
        return Err(Error::DegenerateCluster("all rows identical".into()));
    }
    let dis = Dissimilarity::new(rows);
    let mut best: Option<([usize; 2], f64)> = None;
    for start in 0..PAM_STARTS {
        let init = if start == 0 {
            build_phase(&dis)
        } else {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            [a, b]
        };
        let (m, c) = swap_phase(&dis, init);
        if best.map_or(true, |(_, bc)| c < bc) {
            best = Some((m, c));
        }
    }
    let (mut m, cost) = best.unwrap();
    m.sort_unstable();
    let labels = (0..n)
        .map(|i| if dis.at(i, m[0]) <= dis.at(i, m[1]) { 1 } else { 2 })
        .collect();
    Ok(ClusterLabels { labels, medoids: m, cost })
}

/// Clustering features: each row's x followed by its (optionally standardized) response.
pub fn cluster_features(data: &Dataset, standardize_f: bool) -> Vec<Vec<f64>> {
    let f = data.responses();
    let n = f.len() as f64;
    let (mean, sd) = if standardize_f && !f.is_empty() {
        let mean = f.iter().sum::<f64>() / n;
        let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        (mean, if sd > 0.0 { sd } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    data.rows()
        .zip(f)
        .map(|(x, &v)| {
            let mut r = x.to_vec();
            r.push((v - mean) / sd);
            r
        })
        .collect()
}

/// SMO stopping tolerance on the maximal KKT violation.
pub const SMO_TOLERANCE: f64 = 1e-3;

pub fn gamma_grid(d: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (-3..=3).map(|k| (d as f64).powi(k)).collect();
    g.dedup();
    g
}

pub fn cost_grid() -> Vec<f64> {
    (-4..=4).map(|k| 2f64.powi(k)).collect()
}

/// Every `(γ, C)` candidate, ordered by C then γ (the selection tie order).
pub fn param_grid(d: usize) -> Vec<(f64, f64)> {
    let gammas = gamma_grid(d);
    cost_grid()
        .into_iter()
        .flat_map(|c| gammas.iter().map(move |&g| (g, c)))
        .collect()
}

fn rbf_matrix(x: &[f64], dim: usize, gamma: f64) -> Vec<f64> {
    let n = x.len() / dim;
    let mut k = vec![1.0; n * n];
    for i in 0..n {
        let xi = &x[i * dim..(i + 1) * dim];
        for j in 0..i {
            let xj = &x[j * dim..(j + 1) * dim];
            let s: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = (-gamma * s).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Solution of the soft-margin SVM dual.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO with second-order working-set selection on a precomputed kernel.
///
/// `kernel(i, j)` indexes into the training rows listed by `idx`; labels are ±1.
pub fn smo_solve(kernel: &[f64], stride: usize, idx: &[usize], y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = idx.len();
    let k = |a: usize, b: usize| kernel[idx[a] * stride + idx[b]];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let tau = 1e-12;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                if -y[t] * grad[t] > gmax || i == usize::MAX {
                    gmax = -y[t] * grad[t];
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (k(i, i) + k(t, t) - 2.0 * k(i, t)).max(tau);
                let obj = -b * b / a;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < tol || j == usize::MAX {
            converged = true;
            break;
        }
        let a = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(tau);
        let b = gmax + y[j] * grad[j];
        let mut step = b / a;
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });
        step = step.max(0.0);
        alpha[i] = (alpha[i] + y[i] * step).clamp(0.0, c);
        alpha[j] = (alpha[j] - y[j] * step).clamp(0.0, c);
        for t in 0..n {
            grad[t] += step * y[t] * (k(t, i) - k(t, j));
        }
        iterations += 1;
    }

    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if !at_upper && !at_lower {
            sum += yg;
            free += 1;
        } else if (at_upper && y[t] < 0.0) || (at_lower && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    DualSolution {
        alpha,
        bias: -rho,
        iterations,
        converged,
    }
}

fn smo_max_iter(n: usize) -> usize {
    10_000 * n.max(1)
}

/// Gaussian-kernel binary classifier. Class 1 ↔ negative decision, class 2 ↔ non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmClassifier {
    dim: usize,
    support_x: Vec<f64>,
    coeffs: Vec<f64>,
    bias: f64,
    gamma: f64,
    cost: f64,
    cv_accuracy: f64,
}

impl SvmClassifier {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn support_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f64] {
        &self.support_x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cv_accuracy(&self) -> f64 {
        self.cv_accuracy
    }

    /// `Σ λ_j l_j K(x_j, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (j, &c) in self.coeffs.iter().enumerate() {
            let sv = self.support_vector(j);
            let mut d2 = 0.0;
            for (a, b) in sv.iter().zip(x) {
                d2 += (a - b) * (a - b);
            }
            s += c * (-self.gamma * d2).exp();
        }
        s
    }

    pub fn classify(&self, x: &[f64]) -> u8 {
        class_of(self.decision(x))
    }
}

#[inline]
pub fn class_of(decision: f64) -> u8 {
    if decision >= 0.0 {
        2
    } else {
        1
    }
}

fn to_sign(label: u8) -> f64 {
    if label == 2 {
        1.0
    } else {
        -1.0
    }
}

/// Fold index per row: stratified, or one row per fold for fewer than 10 rows.
pub fn cv_folds(labels: &[u8], rng: &mut StreamRng) -> Vec<usize> {
    let n = labels.len();
    let mut folds = vec![0; n];
    if n < 10 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for (f, &i) in order.iter().enumerate() {
            folds[i] = f;
        }
        return folds;
    }
    let first = labels[0];
    let same: Vec<usize> = (0..n).filter(|&i| labels[i] == first).collect();
    let other: Vec<usize> = (0..n).filter(|&i| labels[i] != first).collect();
    let minority = same.len().min(other.len());
    let k = if minority >= 10 { 10 } else { minority.max(2) };
    let mut offset = 0;
    for mut group in [same, other] {
        group.shuffle(rng);
        for (r, &i) in group.iter().enumerate() {
            folds[i] = (offset + r) % k;
        }
        offset += group.len();
    }
    folds
}

fn fold_count(folds: &[usize]) -> usize {
    folds.iter().copied().max().map_or(0, |m| m + 1)
}

/// Predictions of a model trained on `train` evaluated at `test`, both as row indices.
fn train_and_predict(kernel: &[f64], n: usize, y: &[f64], train: &[usize], test: &[usize], c: f64) -> Vec<f64> {
    let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    if ty.iter().all(|&v| v == ty[0]) {
        return vec![ty[0]; test.len()];
    }
    let sol = smo_solve(kernel, n, train, &ty, c, SMO_TOLERANCE, smo_max_iter(train.len()));
    test.iter()
        .map(|&t| {
            let mut s = sol.bias;
            for (a, (&i, &yi)) in sol.alpha.iter().zip(train.iter().zip(&ty)) {
                if *a > 0.0 {
                    s += a * yi * kernel[t * n + i];
                }
            }
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Cross-validated accuracy for every grid cell, in [`param_grid`] order.
pub fn cv_grid_accuracy(x: &Dataset, labels: &[u8], folds: &[usize]) -> Vec<((f64, f64), f64)> {
    let n = x.len();
    let dim = x.dim();
    let y = canonical_signs(labels);
    let k = fold_count(folds);
    let gammas = gamma_grid(dim);
    let kernels: Vec<Vec<f64>> = gammas.iter().map(|&g| rbf_matrix(x.flat_x(), dim, g)).collect();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let train = (0..n).filter(|&i| folds[i] != f).collect();
            let test = (0..n).filter(|&i| folds[i] == f).collect();
            (train, test)
        })
        .collect();
    param_grid(dim)
        .into_iter()
        .map(|(g, c)| {
            let gi = gammas.iter().position(|&v| v == g).unwrap();
            let mut correct = 0usize;
            for (train, test) in &splits {
                if test.is_empty() {
                    continue;
                }
                let pred = train_and_predict(&kernels[gi], n, &y, train, test, c);
                correct += test.iter().zip(&pred).filter(|(&t, &p)| y[t] == p).count();
            }
            ((g, c), correct as f64 / n as f64)
        })
        .collect()
}

/// Signs relative to the first row's class, so relabeling leaves the solver input unchanged.
fn canonical_signs(labels: &[u8]) -> Vec<f64> {
    let first = labels[0];
    labels.iter().map(|&l| if l == first { 1.0 } else { -1.0 }).collect()
}

/// Train on all rows at fixed `(γ, C)`; returns the classifier and the dual.
pub fn svm_fit(x: &Dataset, labels: &[u8], gamma: f64, cost: f64) -> Result<(SvmClassifier, DualSolution)> {
    check_labels(x, labels)?;
    let n = x.len();
    let dim = x.dim();
    let y = canonical_signs(labels);
    let orient = to_sign(labels[0]);
    let kernel = rbf_matrix(x.flat_x(), dim, gamma);
    let idx: Vec<usize> = (0..n).collect();
    let sol = smo_solve(&kernel, n, &idx, &y, cost, SMO_TOLERANCE, smo_max_iter(n));
    let mut support_x = Vec::new();
    let mut coeffs = Vec::new();
    for i in 0..n {
        if sol.alpha[i] > 0.0 {
            support_x.extend_from_slice(x.row(i));
            coeffs.push(orient * sol.alpha[i] * y[i]);
        }
    }
    let cls = SvmClassifier {
        dim,
        support_x,
        coeffs,
        bias: orient * sol.bias,
        gamma,
        cost,
        cv_accuracy: f64::NAN,
    };
    Ok((cls, sol))
}

fn check_labels(x: &Dataset, labels: &[u8]) -> Result<()> {
    if labels.len() != x.len() || labels.is_empty() {
        return Err(Error::Argument("one label per row required".into()));
    }
    if labels.iter().any(|&l| l != 1 && l != 2) {
        return Err(Error::Argument("labels must be 1 or 2".into()));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass(labels[0]));
    }
    Ok(())
}

/// Grid-search `(γ, C)` by cross-validation, then retrain on all rows.
pub fn svm_train(x: &Dataset, labels: &[u8], rng: &mut StreamRng) -> Result<SvmClassifier> {
    check_labels(x, labels)?;
    let folds = cv_folds(labels, rng);
    let scores = cv_grid_accuracy(x, labels, &folds);
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    let ((gamma, cost), acc) = best;
    let (mut cls, _) = svm_fit(x, labels, gamma, cost)?;
    cls.cv_accuracy = acc;
    Ok(cls)
}

/// Ancestor classifiers and the class each must return for a point to lie in a leaf.
#[derive(Debug, Clone, Default)]
pub struct RegionChain {
    stages: Vec<(Arc<SvmClassifier>, u8)>,
}

/// Result of [`region_membership`].
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// `(stage index, decision value)` for each disagreeing stage.
    pub misclassified: Vec<(usize, f64)>,
}

impl RegionChain {
    pub fn root() -> Self {
        Self::default()
    }

    /// Chain of the child reached by requiring `class` from `classifier`.
    pub fn child(&self, classifier: Arc<SvmClassifier>, class: u8) -> Self {
        let mut stages = self.stages.clone();
        stages.push((classifier, class));
        Self { stages }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stages(&self) -> &[(Arc<SvmClassifier>, u8)] {
        &self.stages
    }

    /// Largest `|decision|` among disagreeing stages, or `None` when inside.
    pub fn worst_violation(&self, x: &[f64]) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (cls, want) in &self.stages {
            let d = cls.decision(x);
            if class_of(d) != *want {
                worst = Some(worst.map_or(d.abs(), |w: f64| w.max(d.abs())));
            }
        }
        worst
    }
}

pub fn region_membership(chain: &RegionChain, x: &[f64]) -> Membership {
    let misclassified: Vec<(usize, f64)> = chain
        .stages
        .iter()
        .enumerate()
        .filter_map(|(k, (cls, want))| {
            let d = cls.decision(x);
            (class_of(d) != *want).then_some((k, d))
        })
        .collect();
    Membership {
        inside: misclassified.is_empty(),
        misclassified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Stream, Streams};

    fn rng(seed: u64) -> StreamRng {
        Streams::new(seed).derive(Stream::Pam, &[])
    }

    fn exhaustive(rows: &[Vec<f64>]) -> f64 {
        let n = rows.len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                best = best.min(pam_cost(rows, [a, b]));
            }
        }
        best
    }

    #[test]
    fn pam_separates_two_groups() {
        let rows: Vec<Vec<f64>> = [0.0, 0.1, 10.0, 10.1].iter().map(|&v| vec![v]).collect();
        let c = pam_cluster(&rows, &mut rng(1)).unwrap();
        assert_eq!(c.labels, vec![1, 1, 2, 2]);
        assert!((c.cost - exhaustive(&rows)).abs() < 1e-12);
    }

    #[test]
    fn pam_two_distinct_rows() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        let c = pam_cluster(&rows, &mut rng(2)).unwrap();
        assert_eq!(c.labels, vec![1, 2]);
        assert_eq!(c.cost, 0.0);
    }

    #[test]
    fn pam_identical_rows_is_degenerate() {
        let rows = vec![vec![0.5, 0.5]; 5];
        assert!(matches!(pam_cluster(&rows, &mut rng(3)), Err(Error::DegenerateCluster(_))));
    }

    #[test]
    fn pam_matches_exhaustive_on_small_sets() {
        let mut r = rng(4);
        for _ in 0..50 {
            let n = r.gen_range(2..=12);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.gen::<f64>()).collect()).collect();
            let c = pam_cluster(&rows, &mut r).unwrap();
            assert!((c.cost - exhaustive(&rows)).abs() < 1e-10);
            assert!(c.count(1) >= 1 && c.count(2) >= 1);
        }
    }

    #[test]
    fn grids() {
        assert_eq!(gamma_grid(1), vec![1.0]);
        assert_eq!(gamma_grid(2).len(), 7);
        assert_eq!(param_grid(6).len(), 63);
        assert_eq!(cost_grid()[0], 0.0625);
        assert_eq!(cost_grid()[8], 16.0);
    }

    fn blobs(seed: u64, n: usize) -> (Dataset, Vec<u8>) {
        let mut r = rng(seed);
        let mut ds = Dataset::new(2);
        let mut labels = Vec::new();
        for i in 0..n {
            let (cx, l) = if i % 2 == 0 { (0.2, 1) } else { (0.8, 2) };
            let x = [cx + 0.1 * (r.gen::<f64>() - 0.5), 0.5 + 0.3 * (r.gen::<f64>() - 0.5)];
            ds.push(&x, 0.0).unwrap();
            labels.push(l);
        }
        (ds, labels)
    }

    #[test]
    fn separable_blobs_classified_exactly() {
        let (ds, labels) = blobs(5, 40);
        let cls = svm_train(&ds, &labels, &mut rng(6)).unwrap();
        for (i, x) in ds.rows().enumerate() {
            assert_eq!(cls.classify(x), labels[i]);
        }
        assert_eq!(cls.cv_accuracy(), 1.0);
    }

    #[test]
    fn flipping_labels_negates_decision() {
        let (ds, labels) = blobs(7, 30);
        let flipped: Vec<u8> = labels.iter().map(|&l| 3 - l).collect();
        let a = svm_train(&ds, &labels, &mut rng(8)).unwrap();
        let b = svm_train(&ds, &flipped, &mut rng(8)).unwrap();
        for x in [[0.1, 0.1], [0.5, 0.5], [0.9, 0.3]] {
            assert_eq!(a.decision(&x), -b.decision(&x));
        }
    }

    #[test]
    fn single_class_rejected() {
        let (ds, _) = blobs(9, 12);
        assert!(matches!(svm_train(&ds, &[1; 12], &mut rng(1)), Err(Error::SingleClass(1))));
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<u8> = (0..47).map(|i| if i < 30 { 1 } else { 2 }).collect();
        let folds = cv_folds(&labels, &mut rng(10));
        assert_eq!(fold_count(&folds), 10);
        for f in 0..10 {
            let ones = (0..47).filter(|&i| folds[i] == f && labels[i] == 1).count();
            assert!(ones == 3);
        }
        let small: Vec<u8> = (0..20).map(|i| if i < 4 { 2 } else { 1 }).collect();
        assert_eq!(fold_count(&cv_folds(&small, &mut rng(11))), 4);
    }

    #[test]
    fn root_chain_contains_everything() {
        let chain = RegionChain::root();
        let m = region_membership(&chain, &[0.3, 0.9]);
        assert!(m.inside);
        assert!(chain.worst_violation(&[0.3, 0.9]).is_none());
    }
}
