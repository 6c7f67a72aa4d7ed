mod common;

use common::*;
use transop::stability::{
    default_coefficient_range, is_normal, operator_stability, path_trace, stability_csv,
    stability_metric,
};
use transop::synth::so2_generator;
use transop::{rng, OperatorDictionary, SquareMatrix};

#[test]
fn skew_generators_are_marginally_stable() {
    let mut r = rng::seeded(41);
    for d in 2..=8 {
        let s = skew(&mut r, d);
        assert!(operator_stability(&s).unwrap() < 1e-8, "d={d}");
        assert!(is_normal(&s, 1e-10));
    }
}

#[test]
fn metric_matches_nalgebra_on_random_matrices() {
    let mut r = rng::seeded(42);
    for i in 0..100 {
        let a = gaussian_matrix(&mut r, 6);
        let want = to_nalgebra(&a)
            .complex_eigenvalues()
            .iter()
            .map(|e| e.re.abs())
            .fold(0.0, f64::max);
        let got = operator_stability(&a).unwrap();
        assert!((got - want).abs() < 1e-8, "case {i}: {got} vs {want}");
    }
}

#[test]
fn diagonal_generators_report_their_largest_rate() {
    let a = SquareMatrix::diagonal(&[0.5, -2.0, 1.0]);
    assert_eq!(operator_stability(&a).unwrap(), 2.0);
}

#[test]
fn so2_trace_keeps_its_norm() {
    let dict = OperatorDictionary::new(vec![so2_generator()], 0.0).unwrap();
    let z0 = [3.0, -1.0];
    let range = default_coefficient_range(&so2_generator(), 201);
    let trace = path_trace(&dict, 0, &z0, &range).unwrap();
    let base = z0[0].hypot(z0[1]);
    for p in &trace.points {
        assert!((p[0].hypot(p[1]) - base).abs() < 1e-8);
    }
    assert!((trace.max_growth(&z0) - 1.0).abs() < 1e-8);
}

#[test]
fn unstable_generators_grow_along_the_trace() {
    let g = SquareMatrix::from_rows(&[&[0.3, -1.0], &[1.0, 0.3]]).unwrap();
    let dict = OperatorDictionary::new(vec![g.clone()], 0.0).unwrap();
    let range = default_coefficient_range(&g, 51);
    let trace = path_trace(&dict, 0, &[1.0, 0.0], &range).unwrap();
    assert!(trace.max_growth(&[1.0, 0.0]) > 1.5);
    assert!((stability_metric(&dict).unwrap()[0] - 0.3).abs() < 1e-12);
}

#[test]
fn csv_has_one_row_per_operator() {
    let mut r = rng::seeded(43);
    let dict =
        OperatorDictionary::new(vec![skew(&mut r, 3), gaussian_matrix(&mut r, 3)], 0.0).unwrap();
    let text = stability_csv(&dict).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "operator_index,metric,magnitude");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("1,"));
}
