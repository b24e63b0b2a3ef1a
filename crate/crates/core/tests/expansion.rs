use std::collections::BTreeMap;

use pencil_core::expansion::*;
use pencil_core::nodal::{check_admissibility, CrackConfig, Equation};
use proptest::prelude::*;

fn family(equation: Equation) -> impl Strategy<Value = (Equation, usize, Vec<f64>)> {
    let width = equation.family_count();
    (4usize..9, prop::collection::vec(-3.0f64..3.0, width))
        .prop_filter("nontrivial", |(_, c)| c.iter().any(|x| x.abs() > 0.1))
        .prop_map(move |(k, c)| (equation, k, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn blowup_round_trip(x in -10.0f64..10.0, ly in -6.0f64..0.0) {
        let y = -(10f64.powf(ly)).min(1.0 - 1e-9);
        let c = to_blowup(x, y).unwrap();
        let (x2, y2) = from_blowup(c);
        prop_assert!((x2 - x).abs() <= 1e-13 * x.abs().max(y.abs()));
        prop_assert!((y2 - y).abs() <= 1e-13 * y.abs());
    }

    #[test]
    fn single_terms_are_homogeneous(
        (equation, k, coeffs) in prop_oneof![family(Equation::Laplace), family(Equation::Bilaplace)],
        theta in -3.1f64..-0.05,
        r in 0.01f64..0.5,
        s in 0.1f64..1.9,
    ) {
        let exp = Expansion::single(equation, k, coeffs).unwrap();
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let u = exp.eval_xy(x, y).unwrap();
        let us = exp.eval_xy(s * x, s * y).unwrap();
        let scale = exp.terms().next().unwrap().1.iter().map(|c| c.abs()).sum::<f64>() * r.powi(k as i32) * (1.0 + x.abs() / y.abs()).powi(k as i32);
        prop_assert!((us - s.powi(k as i32) * u).abs() <= 1e-12 * s.powi(k as i32) * scale.max(u.abs()));
    }
}

#[test]
fn admissible_combinations_vanish_on_the_rays() {
    let configs: [&[i64]; 4] = [&[-1, 1], &[0, 1], &[-1, 0, 1], &[-3, -1, 2]];
    for alphas in configs {
        let config = CrackConfig::from_ints(alphas).unwrap();
        for equation in [Equation::Laplace, Equation::Bilaplace] {
            for v in check_admissibility(equation, &config, alphas.len(), 8, 1e-9).unwrap() {
                if !v.admissible {
                    continue;
                }
                let exp = Expansion::single(equation, v.l, v.combo_coefficients.clone().unwrap()).unwrap();
                for &a in &config.alphas {
                    for tau in [0.0, 1.0, 4.0] {
                        let scale = (-(v.l as f64) * tau).exp() * (1.0 + a.abs()).powi(v.l as i32);
                        assert!(eval_expansion(&exp, a, tau).abs() <= 1e-12 * scale, "{alphas:?} l={} α={a}", v.l);
                    }
                }
            }
        }
    }
}

#[test]
fn decay_of_truncated_expansions() {
    let radii: Vec<f64> = (0..9).map(|i| 1e-2 * 10f64.powf(-(i as f64) / 8.0)).collect();
    for l in 1..=5 {
        let terms = BTreeMap::from([(l, vec![1.0, 0.5]), (l + 1, vec![2.0, -1.0]), (l + 2, vec![-3.0, 1.0])]);
        let exp = Expansion::new(Equation::Laplace, terms).unwrap();
        let fit = decay_order(&exp, &radii).unwrap();
        assert!((fit.slope - l as f64).abs() <= 0.01 * l as f64, "l={l} slope={}", fit.slope);
    }
}

#[test]
fn trace_vanishes_at_crack_angles() {
    let exp = Expansion::single(Equation::Laplace, 3, vec![1.0, 0.0]).unwrap();
    let trace = synthesize_boundary_trace(&exp, 720).unwrap();
    assert_eq!(trace.samples.len(), 720);
    assert_eq!(trace.crack_angles.len(), 3);
    assert!(trace.crack_values.iter().all(|v| v.abs() < 1e-12));
    assert!(trace.samples.iter().all(|s| s.theta > -std::f64::consts::PI && s.theta < 0.0));
}

#[test]
fn compensated_sum_is_exact_on_cancelling_terms() {
    let v = [1e16, 1.0, -1e16, 1.0, 1e-3];
    assert_eq!(compensated_sum(v), 2.001);
}

#[test]
fn negligibility_slopes() {
    let taus: Vec<f64> = (0..21).map(|i| 2.0 + 0.5 * i as f64).collect();
    for (l, p) in [(1usize, 3.0), (2, 2.0), (2, 3.0), (3, 1.5)] {
        let exp = Expansion::single(Equation::Laplace, l, vec![1.0, 0.3]).unwrap();
        let t = perturbation_negligibility(&exp, p, &taus).unwrap();
        assert_eq!(t.predicted_slope, -(2.0 + l as f64 * (p - 1.0)));
        assert!((t.slope - t.predicted_slope).abs() <= 0.05, "l={l} p={p} slope={}", t.slope);
    }
}
