use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::timeseries::{hourly_axis, parse_instant};

fn hp(n_trees: usize, max_depth: usize, learning_rate: f64, min_samples_leaf: usize) -> Hyperparams {
    Hyperparams {
        n_trees,
        max_depth,
        learning_rate,
        min_samples_leaf,
        row_subsample: 1.0,
        feature_subsample: 1.0,
    }
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

fn uniform_columns(rng: &mut ChaCha8Rng, p: usize, n: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn row(columns: &[Vec<f64>], r: usize) -> Vec<f64> {
    columns.iter().map(|c| c[r]).collect()
}

fn interaction_frame(n: usize, seed: u64) -> FeatureFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = uniform_columns(&mut rng, 3, n);
    let y: Vec<f64> = (0..n)
        .map(|r| cols[0][r] * cols[1][r] + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    let mut f = FeatureFrame::new(hourly_axis(parse_instant("2020-01-01T00:00Z").unwrap(), n));
    for (i, c) in cols.into_iter().enumerate() {
        f.push_column(format!("x{i}"), "", c).unwrap();
    }
    f.push_column("y", "", y).unwrap();
    f
}

#[test]
fn constant_target_gives_base_only_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cols = uniform_columns(&mut rng, 2, 50);
    let m = GbtModel::train_columns(&names(2), &cols, "y", &[4.25; 50], &hp(10, 3, 0.1, 2), 0).unwrap();
    assert!(m.degenerate);
    assert!(m.trees.is_empty());
    for r in 0..50 {
        assert_eq!(m.predict(&row(&cols, r)).unwrap(), 4.25);
    }
}

#[test]
fn single_split_recovers_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cols = uniform_columns(&mut rng, 3, 500);
    let y: Vec<f64> = cols[1].iter().map(|&v| if v > 0.2 { 5.0 } else { -1.0 }).collect();
    let m = GbtModel::train_columns(&names(3), &cols, "y", &y, &hp(1, 1, 1.0, 1), 0).unwrap();
    let pred: Vec<f64> = (0..500).map(|r| m.predict(&row(&cols, r)).unwrap()).collect();
    assert!(metrics(&y, &pred).unwrap().r2 > 0.99);
    match m.trees[0].nodes[0] {
        TreeNode::Split { feature, .. } => assert_eq!(feature, 1),
        TreeNode::Leaf { .. } => panic!("root should split"),
    }
}

/// Exhaustive search over every feature and every midpoint between distinct values.
fn brute_best_split(cols: &[Vec<f64>], y: &[f64], min_leaf: usize) -> (f64, usize, f64) {
    let n = y.len();
    let total: f64 = y.iter().sum();
    let mut best = (f64::NEG_INFINITY, usize::MAX, f64::NAN);
    for (f, col) in cols.iter().enumerate() {
        let mut vals = col.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            let (mut nl, mut sl) = (0usize, 0.0);
            for r in 0..n {
                if col[r] <= thr {
                    nl += 1;
                    sl += y[r];
                }
            }
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let sr = total - sl;
            let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - total * total / n as f64;
            if gain > best.0 {
                best = (gain, f, thr);
            }
        }
    }
    best
}

#[test]
fn root_split_matches_brute_force() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(0..12) as f64).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|r| cols[0][r] * 0.3 - cols[2][r].powi(2) * 0.1 + rng.random_range(-1.0..1.0))
            .collect();
        let m = GbtModel::train_columns(&names(3), &cols, "y", &y, &hp(1, 1, 1.0, 3), 0).unwrap();
        let (_, f, thr) = brute_best_split(&cols, &y, 3);
        match m.trees[0].nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((feature, threshold), (f, thr), "seed {seed}");
            }
            TreeNode::Leaf { .. } => panic!("root should split"),
        }
    }
}

#[test]
fn interaction_is_captured() {
    let f = interaction_frame(5_000, 3);
    let split = blocked_split(f.n_rows(), DEFAULT_BLOCK_HOURS, 0.2, 1).unwrap();
    let m = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &split.train, &hp(200, 4, 0.1, 5), 0).unwrap();
    let test = evaluate(&m, &f, &split.test).unwrap();
    assert!(test.r2 > 0.9, "test r2 {}", test.r2);
}

#[test]
fn training_loss_never_increases() {
    let f = interaction_frame(1_000, 4);
    let rows: Vec<usize> = (0..1_000).collect();
    for sub in [1.0, 0.5] {
        let mut h = hp(60, 3, 0.3, 5);
        h.row_subsample = sub;
        h.feature_subsample = if sub < 1.0 { 0.67 } else { 1.0 };
        let m = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &h, 9).unwrap();
        assert_eq!(m.train_loss.len(), 61);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn json_round_trip_reproduces_predictions() {
    let f = interaction_frame(400, 5);
    let rows: Vec<usize> = (0..400).collect();
    let m = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &hp(30, 3, 0.1, 5), 1).unwrap();
    let back = GbtModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(m, back);
    let a = m.predict_frame(&f, None).unwrap();
    let b = back.predict_frame(&f, None).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn full_subsampling_ignores_seed() {
    let f = interaction_frame(300, 6);
    let rows: Vec<usize> = (0..300).collect();
    let h = hp(20, 3, 0.1, 5);
    let a = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &h, 1).unwrap();
    let b = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &h, 2).unwrap();
    assert_eq!(a, b);
    let mut h = h;
    h.row_subsample = 0.5;
    let c = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &h, 1).unwrap();
    let d = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &h, 1).unwrap();
    let e = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &h, 2).unwrap();
    assert_eq!(c, d);
    assert_ne!(c, e);
}

#[test]
fn prediction_checks_dimension() {
    let f = interaction_frame(100, 7);
    let rows: Vec<usize> = (0..100).collect();
    let m = GbtModel::train(&f, &["x0", "x1"], "y", &rows, &hp(2, 2, 0.1, 5), 0).unwrap();
    assert!(m.predict(&[0.0]).is_err());
    assert!(m.predict(&[0.0, 0.0]).is_ok());
    assert!(GbtModel::train(&f, &["x0"], "y", &rows[..5], &hp(2, 2, 0.1, 5), 0).is_err());
}

#[test]
fn metric_examples() {
    let y = [1.0, 2.0, 4.0, 7.0];
    let m = metrics(&y, &y).unwrap();
    assert_eq!((m.r2, m.mae, m.rmse), (1.0, 0.0, 0.0));
    assert_eq!(m.mean_label, 3.5);
    let m = metrics(&y, &[3.5; 4]).unwrap();
    assert_eq!(m.r2, 0.0);
    assert!(metrics(&y, &y[..2]).is_err());
}

#[test]
fn period_metrics_split_rows() {
    let f = interaction_frame(480, 8);
    let rows: Vec<usize> = (0..480).collect();
    let m = GbtModel::train(&f, &["x0", "x1", "x2"], "y", &rows, &hp(10, 3, 0.1, 5), 0).unwrap();
    let split = f.timestamps()[100];
    let p = evaluate_periods(&m, &f, &rows, split).unwrap();
    assert_eq!(p.len(), 3);
    assert_eq!(p[0].metrics.unwrap().n, 100);
    assert_eq!(p[1].metrics.unwrap().n, 380);
    assert_eq!(p[2].metrics.unwrap().n, 480);
    let early = evaluate_periods(&m, &f, &rows[..50], split).unwrap();
    assert!(early[1].metrics.is_none());
}

#[test]
fn blocked_split_counts() {
    let s = blocked_split(960, 96, 0.2, 3).unwrap();
    assert_eq!(s.n_blocks(), 10);
    assert_eq!(s.test_blocks.iter().filter(|&&t| t).count(), 2);
    assert_eq!(s.test.len(), 192);
    assert!(blocked_split(960, 96, 0.0, 3).unwrap().test.is_empty());
    assert!(blocked_split(95, 96, 0.2, 3).is_err());
    assert!(blocked_split(960, 96, 1.5, 3).is_err());
}

#[test]
fn blocked_split_fraction_and_disjointness() {
    let mut mean = 0.0;
    for seed in 0..100 {
        let s = blocked_split(8760, 96, 0.2, seed).unwrap();
        let frac = s.realized_test_frac();
        assert!((frac - 0.2).abs() <= 0.02, "seed {seed}: {frac}");
        mean += frac / 100.0;
        let mut seen = vec![0u8; 8760];
        for &r in s.train.iter().chain(&s.test) {
            seen[r] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        // every block is entirely on one side
        for b in 0..s.n_blocks() {
            let lo = b * 96;
            let hi = (lo + 96).min(8760);
            let in_test = s.test.binary_search(&lo).is_ok();
            assert!((lo..hi).all(|r| s.test.binary_search(&r).is_ok() == in_test));
        }
    }
    assert!((mean - 0.2).abs() < 0.02);
}

fn small_space() -> SearchSpace {
    SearchSpace {
        n_trees: (10, 60),
        max_depth: (1, 4),
        learning_rate: (0.01, 0.3),
        min_samples_leaf: (5, 20),
        row_subsample: (1.0, 1.0),
        feature_subsample: (1.0, 1.0),
    }
}

#[test]
fn search_single_trial_and_point_space() {
    let f = interaction_frame(960, 9);
    let split = blocked_split(960, 96, 0.2, 0).unwrap();
    let feats = ["x0", "x1", "x2"];
    let one = random_search(&small_space(), 1, &f, &feats, "y", &split, 4).unwrap();
    assert_eq!(one.best_index, 0);
    assert_eq!(one.best, one.trials[0].hyperparams);
    let point = hp(20, 2, 0.1, 5);
    let r = random_search(&SearchSpace::point(&point), 3, &f, &feats, "y", &split, 4).unwrap();
    assert!(r.trials.iter().all(|t| t.hyperparams == point));
    assert_eq!(r.best, point);
    let mut bad = small_space();
    bad.max_depth = (5, 2);
    assert!(random_search(&bad, 2, &f, &feats, "y", &split, 4).is_err());
    assert!(random_search(&small_space(), 0, &f, &feats, "y", &split, 4).is_err());
}

#[test]
fn longer_search_is_never_worse() {
    let f = interaction_frame(960, 10);
    let split = blocked_split(960, 96, 0.2, 1).unwrap();
    let feats = ["x0", "x1", "x2"];
    for seed in 0..3 {
        let one = random_search(&small_space(), 1, &f, &feats, "y", &split, seed).unwrap();
        let many = random_search(&small_space(), 20, &f, &feats, "y", &split, seed).unwrap();
        assert_eq!(many.trials[0], one.trials[0]);
        assert!(many.best_trial().test.r2 >= one.best_trial().test.r2);
        let refit = evaluate(&many.model, &f, &split.test).unwrap();
        assert_eq!(refit, many.best_trial().test);
    }
}

#[test]
fn default_space_draws_stay_in_bounds() {
    let space = SearchSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1_000 {
        let h = space.draw(&mut rng);
        assert!((100..=1000).contains(&h.n_trees));
        assert!((3..=8).contains(&h.max_depth));
        assert!((0.01..=0.3).contains(&h.learning_rate));
        assert!((5..=50).contains(&h.min_samples_leaf));
        h.validate().unwrap();
    }
}

proptest! {
    #[test]
    fn rmse_bounds_mae(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..100)) {
        let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = metrics(&y, &p).unwrap();
        prop_assert!(m.rmse >= m.mae * (1.0 - 1e-12));
    }

    #[test]
    fn trees_are_well_formed(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = uniform_columns(&mut rng, 2, 80);
        let y: Vec<f64> = (0..80).map(|r| (cols[0][r] * 3.0).sin() + cols[1][r]).collect();
        let m = GbtModel::train_columns(&names(2), &cols, "y", &y, &hp(3, 3, 0.5, 2), seed).unwrap();
        for t in &m.trees {
            prop_assert!(t.depth() <= 3);
            let mut reached = vec![false; t.nodes.len()];
            reached[0] = true;
            for (i, node) in t.nodes.iter().enumerate() {
                if let TreeNode::Split { threshold, left, right, .. } = *node {
                    prop_assert!(threshold.is_finite());
                    prop_assert!(left > i && right > left);
                    reached[left] = true;
                    reached[right] = true;
                }
            }
            prop_assert!(reached.iter().all(|&r| r));
        }
    }
}
