use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::graph::DirectedPath;
use crate::timeseries::{hourly_axis, parse_instant, ColumnStats};

fn frame_of(cols: &[(&str, Vec<f64>)]) -> FeatureFrame {
    let n = cols[0].1.len();
    let mut f = FeatureFrame::new(hourly_axis(parse_instant("2021-09-01T00:00Z").unwrap(), n));
    for (name, v) in cols {
        f.push_column(*name, "MW", v.clone()).unwrap();
    }
    f
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn graph(text: &str) -> CausalGraph {
    CausalGraph::parse(text).unwrap()
}

/// Ground-truth model over unit-variance variables with standard normal roots.
fn truth(text: &str, coefs: &[(&str, &str, f64)], noise: f64, seed: u64) -> LinearScm {
    let g = graph(text);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for &(from, to, v) in coefs {
        c.entry(to.into()).or_default().insert(from.into(), v);
    }
    let mut stats = NormalizationStats::default();
    let mut roots = BTreeMap::new();
    let mut noise_map = BTreeMap::new();
    for name in g.nodes() {
        stats.columns.insert(name.clone(), ColumnStats { mean: 0.0, std: 1.0 });
        if g.parents(name).unwrap().is_empty() {
            roots.insert(name.clone(), normals(&mut rng, 50_000));
        } else {
            noise_map.insert(name.clone(), noise);
        }
    }
    LinearScm::from_parts(g, &c, &noise_map, &roots, stats, BTreeMap::new()).unwrap()
}

#[test]
fn r2_examples() {
    let obs = [1.0, 2.0, 3.0];
    assert_eq!(r2(&obs, &obs).unwrap(), 1.0);
    assert_eq!(r2(&obs, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert_eq!(r2(&obs, &[1.0, 2.0, 4.0]).unwrap(), 0.5);
    assert!(matches!(r2(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::Degenerate(_))));
    assert!(r2(&[1.0], &[1.0]).is_err());
}

#[test]
fn chain_recovers_slope() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = normals(&mut rng, 10_000);
    let e = normals(&mut rng, 10_000);
    let y: Vec<f64> = x.iter().zip(&e).map(|(x, e)| 0.7 * x + 0.1 * e).collect();
    let (scm, report) = LinearScm::fit(&graph("x -> y"), &frame_of(&[("x", x), ("y", y)])).unwrap();
    let c = scm.direct_effect("x", "y").unwrap();
    assert!((c - 0.7).abs() < 0.01, "{c}");
    assert!(report.r2("y").unwrap() > 0.95);
    assert_eq!(report.r2("x"), None);
}

#[test]
fn noise_free_line_is_exact() {
    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 10.0 + 3.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let (scm, report) = LinearScm::fit(&graph("x -> y"), &frame_of(&[("x", x), ("y", y)])).unwrap();
    assert!((scm.direct_effect("x", "y").unwrap() - 2.0).abs() < 1e-12);
    assert!((report.r2("y").unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn independent_parent_gives_null_slope() {
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = normals(&mut rng, n);
    let y = normals(&mut rng, n);
    let (scm, report) = LinearScm::fit(&graph("x -> y"), &frame_of(&[("x", x), ("y", y)])).unwrap();
    assert!(scm.coefficient_normalized("x", "y").unwrap().abs() < 3.0 / (n as f64).sqrt());
    assert!(report.r2("y").unwrap() < 1e-3);
}

/// Textbook Gaussian elimination with partial pivoting on the raw normal equations.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[test]
fn coefficients_match_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 300;
    let a = normals(&mut rng, n);
    let b: Vec<f64> = a.iter().map(|v| 0.5 * v + rng.sample::<f64, _>(StandardNormal)).collect();
    let c: Vec<f64> = normals(&mut rng, n).iter().map(|v| 4.0 * v + 10.0).collect();
    let y: Vec<f64> = (0..n)
        .map(|t| 1.5 * a[t] - 0.3 * b[t] + 0.2 * c[t] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let frame = frame_of(&[("a", a), ("b", b), ("c", c), ("y", y)]);
    let (scm, _) = LinearScm::fit(&graph("a -> b\na -> y\nb -> y\nc -> y"), &frame).unwrap();

    let z = |name: &str| {
        let v = frame.values(name).unwrap();
        let s = ColumnStats::of(name, v).unwrap();
        v.iter().map(|&x| s.normalize(x)).collect::<Vec<f64>>()
    };
    let cols = [z("a"), z("b"), z("c")];
    let zy = z("y");
    let xtx: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| dot(&cols[i], &cols[j])).collect())
        .collect();
    let xty: Vec<f64> = (0..3).map(|i| dot(&cols[i], &zy)).collect();
    let expect = gauss_solve(xtx, xty);
    for (name, e) in ["a", "b", "c"].iter().zip(expect) {
        let got = scm.coefficient_normalized(name, "y").unwrap();
        assert!((got - e).abs() < 1e-8, "{name}: {got} vs {e}");
    }
}

#[test]
fn singular_and_collinear_parents() {
    let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
    let dup = x.clone();
    let y: Vec<f64> = x.iter().map(|v| v * 0.5 + (v * 1.3).sin()).collect();
    let f = frame_of(&[("x", x.clone()), ("w", dup), ("y", y.clone())]);
    match LinearScm::fit(&graph("x -> y\nw -> y"), &f) {
        Err(Error::SingularFit(node)) => assert_eq!(node, "y"),
        other => panic!("{other:?}"),
    }
    let near: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 1e-3 * (i as f64).cos()).collect();
    let f = frame_of(&[("x", x), ("w", near), ("y", y)]);
    let (_, report) = LinearScm::fit(&graph("x -> y\nw -> y"), &f).unwrap();
    assert_eq!(report.warnings.len(), 1, "{:?}", report.warnings);
}

#[test]
fn missing_column_is_schema_error() {
    let f = frame_of(&[("x", vec![1.0, 2.0, 3.0])]);
    assert!(matches!(LinearScm::fit(&graph("x -> y"), &f), Err(Error::Schema(_))));
}

#[test]
fn effect_product_and_sum_rules() {
    let chain = truth("a -> b\nb -> c", &[("a", "b", 2.0), ("b", "c", 3.0)], 0.0, 4);
    let rep = chain.total_effect("a", "c").unwrap();
    assert_eq!(rep.total, 6.0);
    assert_eq!(rep.paths.len(), 1);
    assert!(!rep.has_direct_edge);
    assert!(chain.direct_effect("a", "c").is_err());

    let diamond = truth(
        "a -> b\na -> c\nb -> d\nc -> d",
        &[("a", "b", 0.5), ("a", "c", -1.0), ("b", "d", 2.0), ("c", "d", 0.25)],
        0.0,
        4,
    );
    let rep = diamond.total_effect("a", "d").unwrap();
    assert_eq!(rep.paths.len(), 2);
    assert_eq!(rep.paths[0].product, 1.0);
    assert_eq!(rep.paths[1].product, -0.25);
    let sum: f64 = rep.paths.iter().map(|p| p.product).sum();
    assert!((rep.total - sum).abs() < 1e-12);
    assert_eq!(diamond.total_effect("d", "a").unwrap().total, 0.0);
    assert!(diamond.total_effect("d", "a").unwrap().paths.is_empty());
    let p = DirectedPath(vec!["a".into(), "d".into()]);
    assert!(matches!(diamond.path_effect(&p), Err(Error::MissingEdge { .. })));
}

#[test]
fn single_edge_total_equals_direct() {
    let m = truth("a -> b\nb -> c", &[("a", "b", 0.8), ("b", "c", 3.0)], 0.1, 5);
    let rep = m.total_effect("a", "b").unwrap();
    assert_eq!(rep.total, rep.direct);
    assert_eq!(rep.direct, 0.8);
}

#[test]
fn total_effect_is_linear_in_each_edge() {
    let text = "a -> b\na -> c\nb -> c\nb -> d\nc -> d\na -> d";
    let base = [
        ("a", "b", 0.5),
        ("a", "c", -0.7),
        ("b", "c", 0.3),
        ("b", "d", 1.1),
        ("c", "d", 0.9),
        ("a", "d", -0.2),
    ];
    let m0 = truth(text, &base, 0.0, 6);
    let r0 = m0.total_effect("a", "d").unwrap();
    for k in 0..base.len() {
        let mut doubled = base;
        doubled[k].2 *= 2.0;
        let r1 = truth(text, &doubled, 0.0, 6).total_effect("a", "d").unwrap();
        for (p0, p1) in r0.paths.iter().zip(&r1.paths) {
            let uses = p0.path.edges().any(|e| e == (base[k].0, base[k].1));
            let factor = if uses { 2.0 } else { 1.0 };
            assert!((p1.product - factor * p0.product).abs() < 1e-12);
        }
    }
}

#[test]
fn total_effect_matches_interventional_slope() {
    let m = truth(
        "a -> b\na -> c\nb -> d\nc -> d\na -> d",
        &[("a", "b", 0.6), ("a", "c", -0.4), ("b", "d", 0.9), ("c", "d", 0.5), ("a", "d", 0.3)],
        0.5,
        7,
    );
    let n = 100_000;
    let mean_d = |x: f64| {
        let f = m
            .intervene_sample(&BTreeMap::from([("a".to_string(), x)]), n, 11)
            .unwrap();
        f.values("d").unwrap().iter().sum::<f64>() / n as f64
    };
    let slope = mean_d(1.0) - mean_d(0.0);
    let total = m.total_effect("a", "d").unwrap().total;
    assert!(((slope - total) / total).abs() < 0.02, "{slope} vs {total}");
}

#[test]
fn clamped_roots_without_noise_propagate_forward() {
    let m = truth("a -> c\nb -> c\nc -> d", &[("a", "c", 2.0), ("b", "c", -1.0), ("c", "d", 0.5)], 0.0, 8);
    let iv = BTreeMap::from([("a".to_string(), 1.5), ("b".to_string(), -2.0)]);
    let f = m.intervene_sample(&iv, 5, 1).unwrap();
    assert!(f.values("c").unwrap().iter().all(|&v| v == 5.0));
    assert!(f.values("d").unwrap().iter().all(|&v| v == 2.5));
    let bad = BTreeMap::from([("zz".to_string(), 1.0)]);
    assert!(matches!(m.intervene_sample(&bad, 5, 1), Err(Error::UnknownNode(_))));
}

fn fitted_chain(n: usize, seed: u64) -> (LinearScm, FeatureFrame) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = normals(&mut rng, n).iter().map(|v| 3.0 * v + 50.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.4 * v + 2.0 * rng.sample::<f64, _>(StandardNormal) - 7.0).collect();
    let frame = frame_of(&[("x", x), ("y", y)]);
    let (scm, _) = LinearScm::fit(&graph("x -> y"), &frame).unwrap();
    (scm, frame)
}

#[test]
fn sample_means_match_training_means() {
    let (scm, frame) = fitted_chain(20_000, 9);
    let n = 50_000;
    let s = scm.sample(n, 3).unwrap();
    for name in ["x", "y"] {
        let train = ColumnStats::of(name, frame.values(name).unwrap()).unwrap();
        let m = s.values(name).unwrap().iter().sum::<f64>() / n as f64;
        assert!((m - train.mean).abs() < 3.0 * train.std / (n as f64).sqrt(), "{name}");
    }
    assert_eq!(scm.sample(100, 3).unwrap(), scm.sample(100, 3).unwrap());
    assert_ne!(scm.sample(100, 3).unwrap(), scm.sample(100, 4).unwrap());
}

#[test]
fn intervening_at_the_mean_keeps_the_mean() {
    let (scm, frame) = fitted_chain(20_000, 10);
    let mx = scm.stats().mean("x").unwrap();
    let n = 50_000;
    let s = scm
        .intervene_sample(&BTreeMap::from([("x".to_string(), mx)]), n, 5)
        .unwrap();
    let train = ColumnStats::of("y", frame.values("y").unwrap()).unwrap();
    let m = s.values("y").unwrap().iter().sum::<f64>() / n as f64;
    let resid = scm.noise_std("y").unwrap() * train.std;
    assert!((m - train.mean).abs() < 4.0 * resid / (n as f64).sqrt());
}

#[test]
fn refit_on_sample_recovers_coefficients() {
    let m = truth(
        "a -> b\na -> c\nb -> c\nc -> d\nb -> d",
        &[("a", "b", 0.6), ("a", "c", 0.3), ("b", "c", -0.5), ("c", "d", 0.7), ("b", "d", 0.2)],
        0.6,
        12,
    );
    let s = m.sample(100_000, 13).unwrap();
    let (refit, _) = LinearScm::fit(m.graph(), &s).unwrap();
    // Truth is expressed on the generated variables' scale.
    let s_stats = NormalizationStats::from_frame(&s).unwrap();
    for (child, row) in m.coefficients_normalized() {
        for (parent, c_raw) in row {
            let expect = c_raw * s_stats.std(&parent).unwrap() / s_stats.std(&child).unwrap();
            let got = refit.coefficient_normalized(&parent, &child).unwrap();
            assert!((got - expect).abs() < 0.02, "{parent}->{child}: {got} vs {expect}");
        }
    }
}

#[test]
fn dropping_a_true_parent_never_raises_r2() {
    let mut held = 0;
    let trials = 40;
    for seed in 0..trials {
        let m = truth("a -> c\nb -> c", &[("a", "c", 0.5), ("b", "c", 0.4)], 0.8, 100 + seed);
        let s = m.sample(2_000, seed).unwrap();
        let (_, full) = LinearScm::fit(&graph("a -> c\nb -> c"), &s).unwrap();
        let (_, reduced) = LinearScm::fit(&graph("b\na -> c"), &s).unwrap();
        if reduced.r2("c").unwrap() <= full.r2("c").unwrap() {
            held += 1;
        }
    }
    assert!(held as f64 >= 0.95 * trials as f64);
}

#[test]
fn crisis_impact_examples() {
    // x jumps from mean 1 to mean 4 at the split; y = 2x exactly.
    let x = vec![0.0, 2.0, 0.0, 2.0, 3.0, 5.0, 3.0, 5.0];
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let frame = frame_of(&[("x", x), ("y", y)]);
    let (scm, _) = LinearScm::fit(&graph("x -> y"), &frame).unwrap();
    let split = frame.timestamps()[4];
    let imp = scm.crisis_impact(&frame, split, "x", "y").unwrap();
    assert!((imp.mean_before - 1.0).abs() < 1e-12 && (imp.mean_during - 4.0).abs() < 1e-12);
    assert!((imp.impact - 6.0).abs() < 1e-12);

    let flat = frame_of(&[("x", vec![0.0, 2.0, 2.0, 0.0]), ("y", vec![0.0, 4.0, 4.0, 0.0])]);
    let (scm, _) = LinearScm::fit(&graph("x -> y"), &flat).unwrap();
    let imp = scm.crisis_impact(&flat, flat.timestamps()[2], "x", "y").unwrap();
    assert_eq!(imp.impact, 0.0);
    assert!(scm.crisis_impact(&flat, flat.timestamps()[0], "x", "y").is_err());
    let all = crisis_impacts(&scm, &flat, flat.timestamps()[2], "y").unwrap();
    assert_eq!(all.len(), 1);
}

#[test]
fn regression_comparison_reports_both() {
    let (scm, frame) = fitted_chain(5_000, 14);
    let cmp = scm.compare_regression(&frame, "x", "y").unwrap();
    assert!((cmp.regression_slope - cmp.causal.total).abs() < 1e-9);
    assert_eq!(regression_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 2.0);
}

#[test]
fn json_round_trip_is_exact() {
    let (scm, _) = fitted_chain(200, 15);
    let text = scm.to_json().unwrap();
    let back = LinearScm::from_json(&text).unwrap();
    assert_eq!(back, scm);
    assert_eq!(back.to_json().unwrap(), text);
}
