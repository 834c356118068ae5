use proptest::prelude::*;
use std::sync::Arc;
use treebo::acquisition;
use treebo::gp::{self, Dataset, KernelParams};
use treebo::harness;
use treebo::partition::{self, RegionChain};
use treebo::rng::{Stream, Streams};
use treebo::tree::{Path, Tree, TreeOptions};

fn unit_rows(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_bounded(
        x in prop::collection::vec(0.0f64..1.0, 3),
        y in prop::collection::vec(0.0f64..1.0, 3),
        theta in prop::collection::vec(0.01f64..5.0, 3),
        powers in prop::collection::vec(0.5f64..2.0, 3),
        variance in 0.1f64..10.0,
    ) {
        for p in [
            KernelParams::power_exponential(theta.clone(), powers.clone(), variance).unwrap(),
            KernelParams::matern52(theta.clone(), variance).unwrap(),
        ] {
            let a = gp::kernel_eval(&p, &x, &y).unwrap();
            let b = gp::kernel_eval(&p, &y, &x).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0 && a <= variance * (1.0 + 1e-12));
            prop_assert!((gp::kernel_eval(&p, &x, &x).unwrap() - variance).abs() <= 1e-12 * variance);
        }
    }

    #[test]
    fn ei_is_non_negative(mean in -1e3f64..1e3, sd in 0.0f64..1e3, f_min in -1e3f64..1e3) {
        let ei = acquisition::ei_from_moments(mean, sd, f_min);
        prop_assert!(ei >= 0.0);
        prop_assert!(ei >= (f_min - mean).max(0.0) - 1e-9 * (1.0 + mean.abs() + f_min.abs()));
    }

    #[test]
    fn start_points_interleave_each_column(rows in (2usize..15, 1usize..5).prop_flat_map(|(n, d)| unit_rows(n, d)), seed in 0u64..1000) {
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let mut rng = Streams::new(seed).derive(Stream::Swarm, &[]);
        let starts = acquisition::gen_acq_points(&refs, &mut rng).unwrap();
        prop_assert_eq!(starts.len(), rows.len() - 1);
        for j in 0..rows[0].len() {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let mut got: Vec<f64> = starts.iter().map(|s| s[j]).collect();
            got.sort_by(f64::total_cmp);
            for (k, v) in got.iter().enumerate() {
                prop_assert!(col[k] <= *v && *v <= col[k + 1]);
            }
        }
    }

    #[test]
    fn lhs_has_one_point_per_bin(n in 1usize..40, d in 1usize..6, seed in 0u64..1000) {
        let mut rng = Streams::new(seed).derive(Stream::InitDesign, &[]);
        let pts = harness::lhs(n, d, &mut rng);
        prop_assert_eq!(pts.len(), n);
        for j in 0..d {
            let mut bins: Vec<usize> = pts.iter().map(|p| ((p[j] * n as f64).floor() as usize).min(n - 1)).collect();
            bins.sort_unstable();
            prop_assert_eq!(bins, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn pam_cost_is_permutation_invariant(rows in (2usize..12, 1usize..4).prop_flat_map(|(n, d)| unit_rows(n, d)), seed in 0u64..100) {
        let mut rng = Streams::new(seed).derive(Stream::Pam, &[]);
        let a = partition::pam_cluster(&rows, &mut rng).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let mut rng = Streams::new(seed).derive(Stream::Pam, &[]);
        let b = partition::pam_cluster(&rev, &mut rng).unwrap();
        prop_assert!((a.cost - b.cost).abs() <= 1e-12 * a.cost.max(1.0));
        prop_assert_eq!(a.labels.len(), rows.len());
        prop_assert!(a.count(1) > 0 && a.count(2) > 0);
    }
}

fn labelled_blobs(seed: u64, d: usize) -> (Dataset, Vec<u8>) {
    use rand::Rng;
    let mut rng = Streams::new(seed).derive(Stream::InitDesign, &[9]);
    let mut ds = Dataset::new(d);
    let mut labels = Vec::new();
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..24 {
        let x: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
        let s: f64 = x.iter().zip(&w).map(|(a, b)| (a - 0.5) * b).sum();
        labels.push(if s >= 0.0 { 2 } else { 1 });
        ds.push(&x, 0.0).unwrap();
    }
    (ds, labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn child_membership_implies_parent_membership(seed in 0u64..1000, pts in unit_rows(50, 2)) {
        let (ds1, l1) = labelled_blobs(seed, 2);
        let (ds2, l2) = labelled_blobs(seed + 1, 2);
        prop_assume!(l1.iter().any(|&l| l == 1) && l1.iter().any(|&l| l == 2));
        prop_assume!(l2.iter().any(|&l| l == 1) && l2.iter().any(|&l| l == 2));
        let c1 = Arc::new(partition::svm_fit(&ds1, &l1, 1.0, 1.0).unwrap().0);
        let c2 = Arc::new(partition::svm_fit(&ds2, &l2, 1.0, 1.0).unwrap().0);
        for a in [1u8, 2] {
            let parent = RegionChain::root().child(c1.clone(), a);
            for b in [1u8, 2] {
                let child = parent.child(c2.clone(), b);
                for x in &pts {
                    if partition::region_membership(&child, x).inside {
                        prop_assert!(partition::region_membership(&parent, x).inside);
                    }
                }
            }
        }
    }
}

fn grown_tree(seed: u64) -> Tree {
    use rand::Rng;
    let d = 2;
    let mut rng = Streams::new(seed).derive(Stream::InitDesign, &[]);
    let mut init = Dataset::new(d);
    for x in harness::lhs(20, d, &mut rng) {
        let f = (x[0] - 0.3).powi(2) + (x[1] - 0.7).abs();
        init.push(&x, f).unwrap();
    }
    let mut opts = TreeOptions::new(20, gp::KernelFamily::PowerExponential);
    opts.fit.starts = 1;
    let mut tree = Tree::new(&init, opts, Streams::new(seed)).unwrap();
    let mut step = 1u64;
    for _ in 0..4 {
        for p in tree.leaf_paths() {
            if tree.wants_split(&p) {
                let _ = tree.split_node(&p, step).unwrap();
            }
        }
        for p in tree.leaf_paths() {
            for _ in 0..6 {
                let x: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
                let f = (x[0] - 0.3).powi(2) + (x[1] - 0.7).abs();
                tree.add_observation(&p, &x, f).unwrap();
            }
        }
        step += 1;
    }
    tree
}

#[test]
fn leaves_partition_every_observation() {
    for seed in 0..4 {
        let tree = grown_tree(seed);
        assert!(tree.leaf_paths().len() > 1, "seed {seed}: tree never split");
        let mut seen = vec![0usize; tree.len()];
        for p in tree.leaf_paths() {
            for &i in &tree.node(&p).unwrap().indices {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "seed {seed}: {seen:?}");
    }
}

#[test]
fn borrow_matches_brute_force_nearest_points() {
    for seed in 0..4 {
        let tree = grown_tree(seed);
        for p in tree.leaf_paths() {
            let own = &tree.node(&p).unwrap().indices;
            let got = tree.borrow_data(&p).unwrap();
            let need = tree.n_node().saturating_sub(own.len()).min(tree.len() - own.len());
            let mut cand: Vec<(f64, usize)> = (0..tree.len())
                .filter(|q| !own.contains(q))
                .map(|q| {
                    let d = own
                        .iter()
                        .map(|&o| {
                            tree.x(o).iter().zip(tree.x(q)).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min);
                    (d, q)
                })
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut want: Vec<usize> = cand.iter().take(need).map(|c| c.1).collect();
            let mut got_sorted = got.clone();
            want.sort_unstable();
            got_sorted.sort_unstable();
            assert_eq!(got_sorted, want, "seed {seed} leaf {p}");
        }
    }
}

#[test]
fn paths_order_lexicographically() {
    let a = Path::parse("01").unwrap();
    let b = Path::parse("011").unwrap();
    let c = Path::parse("02").unwrap();
    assert!(Path::root() < a && a < b && b < c);
    assert_eq!(b.parent(), Some(a.clone()));
    assert_eq!(a.child(2), Path::parse("012").unwrap());
}
