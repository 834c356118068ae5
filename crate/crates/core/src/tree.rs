//! Binary partition tree: leaf bookkeeping, data borrowing, node updates and splits.

use crate::acquisition::{self, AcqResult, AcquisitionContext, SwarmOptions, FALLBACK_STARTS};
use crate::error::{Error, Result};
use crate::gp::{self, Dataset, FitOptions, GPModel, KernelFamily};
use crate::partition::{self, RegionChain, SvmClassifier};
use crate::rng::{Stream, Streams};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Node address: `0` for the root, then one `1`/`2` per level.
///
/// The derived ordering is lexicographic on symbols, so a parent sorts
/// before its descendants and `…1` subtrees before `…2` subtrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<u8>);

impl Path {
    pub fn root() -> Self {
        Path(vec![0])
    }

    pub fn child(&self, class: u8) -> Path {
        assert!(class == 1 || class == 2, "child symbol must be 1 or 2");
        let mut s = self.0.clone();
        s.push(class);
        Path(s)
    }

    pub fn parse(s: &str) -> Result<Path> {
        let mut sym = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match (i, c) {
                (0, '0') => sym.push(0),
                (i, '1') if i > 0 => sym.push(1),
                (i, '2') if i > 0 => sym.push(2),
                _ => return Err(Error::Argument(format!("malformed path {s:?}"))),
            }
        }
        if sym.is_empty() {
            return Err(Error::Argument("empty path".into()));
        }
        Ok(Path(sym))
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.len() == 1
    }

    pub fn parent(&self) -> Option<Path> {
        (!self.is_root()).then(|| Path(self.0[..self.0.len() - 1].to_vec()))
    }

    /// Stable numeric key used to derive per-node random streams.
    pub fn key(&self) -> u64 {
        self.0.iter().fold(1u64, |h, &s| h.wrapping_mul(3).wrapping_add(u64::from(s)))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub path: Path,
    /// Global indices of the observations that fall in this node's region.
    pub indices: Vec<usize>,
    pub region: RegionChain,
    pub model: Option<Arc<GPModel>>,
    pub acq: Option<AcqResult>,
    pub classifier: Option<Arc<SvmClassifier>>,
    pub split_failed: bool,
    /// Data count at the most recent failed split attempt.
    failed_at: Option<usize>,
}

impl TreeNode {
    fn new(path: Path, indices: Vec<usize>, region: RegionChain) -> Self {
        Self {
            path,
            indices,
            region,
            model: None,
            acq: None,
            classifier: None,
            split_failed: false,
            failed_at: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.classifier.is_none()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Stored acquisition value, `-∞` when the node has none.
    pub fn alpha_value(&self) -> f64 {
        self.acq.as_ref().map_or(f64::NEG_INFINITY, |a| a.value)
    }
}

#[derive(Debug, Clone)]
pub struct TreeOptions {
    pub n_node: usize,
    pub kernel: KernelFamily,
    /// Refuse splits that leave a child with at most `d` points.
    pub refuse_small_children: bool,
    /// Standardize responses before clustering.
    pub standardize_f: bool,
    pub fit: FitOptions,
    pub swarm: SwarmOptions,
}

impl TreeOptions {
    pub fn new(n_node: usize, kernel: KernelFamily) -> Self {
        Self {
            n_node,
            kernel,
            refuse_small_children: true,
            standardize_f: true,
            fit: FitOptions::default(),
            swarm: SwarmOptions::default(),
        }
    }
}

/// One GP fit performed by [`Tree::update_node`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitEvent {
    pub step: u64,
    pub path: Path,
    pub own_size: usize,
    pub train_size: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitFailure {
    DegenerateCluster,
    SingleClass,
    SmallChild { sizes: (usize, usize) },
    Other(String),
}

impl fmt::Display for SplitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitFailure::DegenerateCluster => write!(f, "clustering degenerate"),
            SplitFailure::SingleClass => write!(f, "classifier saw a single class"),
            SplitFailure::SmallChild { sizes } => write!(f, "child sizes {} / {} too small", sizes.0, sizes.1),
            SplitFailure::Other(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    dim: usize,
    opts: TreeOptions,
    streams: Streams,
    xs: Vec<f64>,
    fs: Vec<f64>,
    nodes: BTreeMap<Path, TreeNode>,
    fit_events: Vec<FitEvent>,
}

impl Tree {
    /// A single-leaf tree holding `init` at the root.
    pub fn new(init: &Dataset, opts: TreeOptions, streams: Streams) -> Result<Self> {
        if opts.n_node == 0 {
            return Err(Error::Argument("n_node must be positive".into()));
        }
        let mut nodes = BTreeMap::new();
        let root = Path::root();
        nodes.insert(root.clone(), TreeNode::new(root, (0..init.len()).collect(), RegionChain::root()));
        Ok(Self {
            dim: init.dim(),
            opts,
            streams,
            xs: init.flat_x().to_vec(),
            fs: init.responses().to_vec(),
            nodes,
            fit_events: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn options(&self) -> &TreeOptions {
        &self.opts
    }

    pub fn n_node(&self) -> usize {
        self.opts.n_node
    }

    pub fn len(&self) -> usize {
        self.fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fs.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn f(&self, i: usize) -> f64 {
        self.fs[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.fs
    }

    pub fn f_min(&self) -> f64 {
        self.fs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn node(&self, p: &Path) -> Option<&TreeNode> {
        self.nodes.get(p)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values()
    }

    /// Leaf paths in lexicographic order.
    pub fn leaf_paths(&self) -> Vec<Path> {
        self.nodes.values().filter(|n| n.is_leaf()).map(|n| n.path.clone()).collect()
    }

    pub fn fit_events(&self) -> &[FitEvent] {
        &self.fit_events
    }

    fn leaf(&self, p: &Path) -> Result<&TreeNode> {
        match self.nodes.get(p) {
            Some(n) if n.is_leaf() => Ok(n),
            Some(_) => Err(Error::Argument(format!("node {p} is not a leaf"))),
            None => Err(Error::Argument(format!("no node at {p}"))),
        }
    }

    /// Distance from `x` to the nearest stored observation.
    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| sq_dist(self.x(i), x))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Append an observation to leaf `p`; returns its global index.
    pub fn add_observation(&mut self, p: &Path, x: &[f64], f: f64) -> Result<usize> {
        self.leaf(p)?;
        if x.len() != self.dim {
            return Err(Error::Argument("observation dimension mismatch".into()));
        }
        let idx = self.fs.len();
        self.xs.extend_from_slice(x);
        self.fs.push(f);
        self.nodes.get_mut(p).unwrap().indices.push(idx);
        Ok(idx)
    }

    fn dataset(&self, indices: &[usize]) -> Dataset {
        let mut ds = Dataset::new(self.dim);
        for &i in indices {
            ds.push(self.x(i), self.fs[i]).unwrap();
        }
        ds
    }

    /// Whether leaf `p` has reached the split threshold and has not already
    /// failed to split with its current data.
    pub fn wants_split(&self, p: &Path) -> bool {
        self.nodes.get(p).is_some_and(|n| {
            n.is_leaf() && n.len() >= self.opts.n_node && n.failed_at != Some(n.len())
        })
    }

    /// Global indices of the points another leaf lends to `p` so that its fit
    /// uses `n_node` points: those nearest (in x) to any of `p`'s own points.
    pub fn borrow_data(&self, p: &Path) -> Result<Vec<usize>> {
        let node = self.leaf(p)?;
        let n_add = self.opts.n_node.saturating_sub(node.len());
        if n_add == 0 {
            return Ok(Vec::new());
        }
        let own: Vec<bool> = {
            let mut m = vec![false; self.len()];
            for &i in &node.indices {
                m[i] = true;
            }
            m
        };
        let mut cand: Vec<(f64, usize)> = (0..self.len())
            .filter(|&q| !own[q])
            .map(|q| {
                let xq = self.x(q);
                let d = node
                    .indices
                    .iter()
                    .map(|&o| sq_dist(self.x(o), xq))
                    .fold(f64::INFINITY, f64::min);
                (d, q)
            })
            .collect();
        assert!(
            cand.len() >= n_add,
            "leaf {p} needs {n_add} borrowed points but only {} exist elsewhere",
            cand.len()
        );
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(cand.into_iter().take(n_add).map(|c| c.1).collect())
    }

    /// Refit the leaf's GP and recompute its acquisition maximizer.
    ///
    /// A failed fit leaves the node with an acquisition value of `-∞`.
    pub fn update_node(&mut self, p: &Path, f_min: f64, step: u64) -> Result<FitEvent> {
        let node = self.leaf(p)?;
        let own = node.indices.clone();
        let region = node.region.clone();
        let mut train = own.clone();
        if !p.is_root() && own.len() < self.opts.n_node {
            train.extend(self.borrow_data(p)?);
        }
        let data = self.dataset(&train);
        let coords = [step, p.key()];
        let mut fit_rng = self.streams.derive(Stream::GpFit, &coords);
        let fitted = gp::fit_with(&data, self.opts.kernel, &self.opts.fit, &mut fit_rng);
        let event = FitEvent {
            step,
            path: p.clone(),
            own_size: own.len(),
            train_size: train.len(),
            ok: fitted.is_ok(),
        };
        let (model, acq) = match fitted {
            Ok(model) => {
                let mut swarm_rng = self.streams.derive(Stream::Swarm, &coords);
                let starts = if own.len() >= 2 {
                    let rows: Vec<&[f64]> = own.iter().map(|&i| self.x(i)).collect();
                    acquisition::gen_acq_points(&rows, &mut swarm_rng)?
                } else {
                    acquisition::uniform_points(FALLBACK_STARTS, self.dim, &mut swarm_rng)
                };
                let ctx = AcquisitionContext::new(&model, f_min, &region);
                let acq = acquisition::maximize_fn(
                    |x| acquisition::alpha(&ctx, x),
                    self.dim,
                    &starts,
                    &self.opts.swarm,
                    &mut swarm_rng,
                );
                (Some(Arc::new(model)), acq)
            }
            Err(e) => {
                log::warn!("GP fit failed at node {p} (step {step}): {e}");
                let acq = AcqResult {
                    x_star: vec![0.5; self.dim],
                    value: f64::NEG_INFINITY,
                    polished: false,
                };
                (None, acq)
            }
        };
        let node = self.nodes.get_mut(p).unwrap();
        node.model = model;
        node.acq = Some(acq);
        self.fit_events.push(event.clone());
        Ok(event)
    }

    /// Cluster, classify and partition leaf `p`. On success `p` becomes an
    /// internal node and its two children are returned (not yet updated).
    pub fn split_node(&mut self, p: &Path, step: u64) -> Result<std::result::Result<(Path, Path), SplitFailure>> {
        let node = self.leaf(p)?;
        let own = node.indices.clone();
        let outcome = self.try_split(&own, p, step);
        let node = self.nodes.get_mut(p).unwrap();
        let (cls, parts) = match outcome {
            Ok(v) => v,
            Err(fail) => {
                node.split_failed = true;
                node.failed_at = Some(own.len());
                log::debug!("split of {p} refused: {fail}");
                return Ok(Err(fail));
            }
        };
        node.split_failed = false;
        node.failed_at = None;
        node.classifier = Some(cls.clone());
        node.model = None;
        node.acq = None;
        let region = node.region.clone();
        let (a, b) = (p.child(1), p.child(2));
        self.nodes
            .insert(a.clone(), TreeNode::new(a.clone(), parts.0, region.child(cls.clone(), 1)));
        self.nodes.insert(b.clone(), TreeNode::new(b.clone(), parts.1, region.child(cls, 2)));
        Ok(Ok((a, b)))
    }

    #[allow(clippy::type_complexity)]
    fn try_split(
        &self,
        own: &[usize],
        p: &Path,
        step: u64,
    ) -> std::result::Result<(Arc<SvmClassifier>, (Vec<usize>, Vec<usize>)), SplitFailure> {
        let data = self.dataset(own);
        let coords = [step, p.key()];
        let features = partition::cluster_features(&data, self.opts.standardize_f);
        let clusters = partition::pam_cluster(&features, &mut self.streams.derive(Stream::Pam, &coords))
            .map_err(|_| SplitFailure::DegenerateCluster)?;
        let cls = partition::svm_train(&data, &clusters.labels, &mut self.streams.derive(Stream::SvmCv, &coords))
            .map_err(|e| match e {
                Error::SingleClass(_) => SplitFailure::SingleClass,
                other => SplitFailure::Other(other.to_string()),
            })?;
        let (mut one, mut two) = (Vec::new(), Vec::new());
        for &i in own {
            if cls.classify(self.x(i)) == 1 {
                one.push(i);
            } else {
                two.push(i);
            }
        }
        if one.is_empty() || two.is_empty() {
            return Err(SplitFailure::SingleClass);
        }
        if self.opts.refuse_small_children && (one.len() <= self.dim || two.len() <= self.dim) {
            return Err(SplitFailure::SmallChild {
                sizes: (one.len(), two.len()),
            });
        }
        Ok((Arc::new(cls), (one, two)))
    }

    /// One line per node: path, data count, stored acquisition value, split-failure latch.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for n in self.nodes.values() {
            let alpha = if n.is_leaf() {
                crate::fmt_float(n.alpha_value())
            } else {
                "internal".to_string()
            };
            out.push_str(&format!("{}\t{}\t{}\t{}\n", n.path, n.len(), alpha, n.split_failed));
        }
        out
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn path_basics() {
        let p = Path::parse("021").unwrap();
        assert_eq!(p.depth(), 3);
        assert_eq!(p.to_string(), "021");
        assert_eq!(p.parent().unwrap(), Path::parse("02").unwrap());
        assert_eq!(Path::root().child(2).child(1), p);
        assert!(Path::parse("1").is_err());
        assert!(Path::parse("00").is_err());
        assert!(Path::parse("").is_err());
        assert!(Path::parse("01").unwrap() < Path::parse("012").unwrap());
        assert!(Path::parse("012").unwrap() < Path::parse("02").unwrap());
    }

    fn random_init(n: usize, d: usize, seed: u64) -> Dataset {
        let mut r = Streams::new(seed).derive(Stream::InitDesign, &[]);
        let mut ds = Dataset::new(d);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| r.gen()).collect();
            let f = x.iter().map(|v| (v - 0.3).powi(2)).sum();
            ds.push(&x, f).unwrap();
        }
        ds
    }

    #[test]
    fn split_partitions_parent_data() {
        let init = random_init(40, 2, 1);
        let mut tree = Tree::new(&init, TreeOptions::new(40, KernelFamily::PowerExponential), Streams::new(3)).unwrap();
        assert!(tree.wants_split(&Path::root()));
        let (a, b) = tree.split_node(&Path::root(), 0).unwrap().unwrap();
        let mut all: Vec<usize> = tree.node(&a).unwrap().indices.clone();
        all.extend(&tree.node(&b).unwrap().indices);
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert_eq!(tree.leaf_paths(), vec![a.clone(), b.clone()]);
        // Every own point satisfies its leaf's region chain.
        for leaf in [&a, &b] {
            let node = tree.node(leaf).unwrap();
            for &i in &node.indices {
                assert!(partition::region_membership(&node.region, tree.x(i)).inside);
            }
        }
        let ev = tree.update_node(&a, tree.f_min(), 1).unwrap();
        assert_eq!(ev.train_size, 40);
        let node = tree.node(&a).unwrap();
        let acq = node.acq.as_ref().unwrap();
        let ctx = AcquisitionContext::new(node.model.as_ref().unwrap(), tree.f_min(), &node.region);
        assert!((acquisition::alpha(&ctx, &acq.x_star) - acq.value).abs() <= 1e-10);
        assert!(tree.snapshot().lines().count() == 3);
    }

    #[test]
    fn borrow_prefers_nearest_then_lowest_index() {
        let rows = vec![vec![0.0], vec![0.5], vec![0.9], vec![0.1], vec![0.4], vec![0.6]];
        let ds = Dataset::from_rows(&rows, &[0.0; 6]).unwrap();
        let mut tree = Tree::new(&ds, TreeOptions::new(4, KernelFamily::PowerExponential), Streams::new(1)).unwrap();
        // Hand-build a split so that leaf 01 owns {0, 3}.
        let root = tree.nodes.get_mut(&Path::root()).unwrap();
        let labels = vec![1u8, 2, 2, 1, 2, 2];
        let (cls, _) = partition::svm_fit(&ds, &labels, 1.0, 1.0).unwrap();
        root.classifier = Some(Arc::new(cls));
        let a = Path::root().child(1);
        let b = Path::root().child(2);
        tree.nodes.insert(a.clone(), TreeNode::new(a.clone(), vec![0, 3], RegionChain::root()));
        tree.nodes.insert(b.clone(), TreeNode::new(b, vec![1, 2, 4, 5], RegionChain::root()));
        // Distances to {0.0, 0.1}: idx4 0.3, idx1 0.4, idx5 0.5, idx2 0.8.
        assert_eq!(tree.borrow_data(&a).unwrap(), vec![4, 1]);
    }

    #[test]
    fn root_never_borrows() {
        let init = random_init(6, 2, 4);
        let mut tree = Tree::new(&init, TreeOptions::new(20, KernelFamily::Matern52), Streams::new(2)).unwrap();
        let ev = tree.update_node(&Path::root(), tree.f_min(), 0).unwrap();
        assert_eq!(ev.train_size, 6);
        assert!(!tree.wants_split(&Path::root()));
    }
}
