use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use vexlab::ckn::{ckn_classical_check, ckn_variable_ratio, classical_exponent, estimate_beta_ckn, origin_free_bumps};
use vexlab::expr::FieldExpression;
use vexlab::grid::{build_grid, Grid, ScalarField};
use vexlab::sampling::{bump, SineModeFamily};
use vexlab::spaces::ExponentField;
use vexlab::weights::{build_weights, WeightFields};
use vexlab::Error;

fn weights(grid: &Arc<Grid>, a_src: &str, p_src: &str) -> (WeightFields, ExponentField) {
    let dim = grid.dim();
    let a = FieldExpression::parse_with_point(a_src, dim, &vec![0.5; dim]).unwrap();
    let p = FieldExpression::parse(p_src, dim).unwrap();
    let pf = ExponentField::new(p.eval_on_grid(grid).unwrap()).unwrap();
    let w = build_weights(
        &a.eval_on_grid(grid).unwrap(),
        &a.grad_on_grid(grid).unwrap(),
        &pf,
        &p.grad_on_grid(grid).unwrap(),
    )
    .unwrap();
    (w, pf)
}

#[test]
fn field_inside_zero_set_of_a_has_ratio_zero() {
    // a = 4(x − 1/2)² left of 1/2 and 0 right of it
    let g = build_grid(1, &[(0.0, 1.0)], &[201]).unwrap();
    let (w, p) = weights(&g, "(abs(x1 - 0.5) - (x1 - 0.5))^2", "2.5 + 0.2*x1");
    let u = ScalarField::from_fn(g.clone(), |x| bump((x[0] - 0.75).abs(), 0.05, 0.2)).mask_boundary();
    let r = ckn_variable_ratio(&w, &p, &u, 0).unwrap();
    assert_eq!(r.lhs, 0.0);
    assert_eq!(r.ratio, 0.0);
}

#[test]
fn zero_field_is_rejected() {
    let g = build_grid(1, &[(0.0, 1.0)], &[51]).unwrap();
    let (w, p) = weights(&g, "norm(x - x0)^1.1", "2.5");
    let r = ckn_variable_ratio(&w, &p, &ScalarField::zeros(g.clone()), 0);
    assert!(matches!(r, Err(Error::UndefinedRatio(_))));
}

#[test]
fn hat_function_against_fine_quadrature() {
    // fields of the 1D instance: a = |x − 1/2|^1.1, p = 2.5 + 0.3x, so all four terms are live;
    // u is the hat with kinks at 0.1, 0.4, 0.7, all grid nodes
    let g = build_grid(1, &[(0.0, 1.0)], &[201]).unwrap();
    let (w, pf) = weights(&g, "norm(x - x0)^1.1", "2.5 + 0.3*x1");
    let hat = |x: f64| {
        if x <= 0.1 || x >= 0.7 {
            0.0
        } else if x <= 0.4 {
            (x - 0.1) / 0.3
        } else {
            (0.7 - x) / 0.3
        }
    };
    let slope = |x: f64| -> f64 {
        if x <= 0.1 || x >= 0.7 {
            0.0
        } else if x <= 0.4 {
            1.0 / 0.3
        } else {
            -1.0 / 0.3
        }
    };
    let u = ScalarField::from_fn(g.clone(), |x| hat(x[0])).mask_boundary();
    let r = ckn_variable_ratio(&w, &pf, &u, 0).unwrap();

    // midpoint rule with 10⁶ cells on the exact integrands
    let m = 1_000_000;
    let mut lhs = 0.0;
    let mut rhs = [0.0; 4];
    for k in 0..m {
        let x = (k as f64 + 0.5) / m as f64;
        let p = 2.5 + 0.3 * x;
        let d = (x - 0.5).abs();
        let a = d.powf(1.1);
        let da = 1.1 * d.powf(0.1);
        let (b, pa) = (a.powf(p), a.powf(p - 1.0));
        let v = hat(x);
        lhs += b * v.powf(p);
        rhs[0] += pa * da * v.powf(p);
        rhs[1] += b * slope(x).abs().powf(p);
        rhs[2] += b * 0.3 * v.powf(p + 1.0);
        rhs[3] += pa * 0.3 * v.powf(p - 1.0);
    }
    let lhs = lhs / m as f64;
    let rhs = rhs.map(|v| v / m as f64);
    // the grid rule is O(h) accurate at the kinks, h = 1/200
    let close = |got: f64, want: f64| (got - want).abs() <= 0.02 * want;
    assert!(close(r.lhs, lhs), "{} vs {lhs}", r.lhs);
    for k in 0..4 {
        assert!(close(r.rhs_terms[k], rhs[k]), "term {k}: {} vs {}", r.rhs_terms[k], rhs[k]);
    }
    assert!(close(r.ratio, lhs / rhs.iter().sum::<f64>()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn doubling_scales_each_term_within_exponent_bounds(seed in 0u64..1000) {
        let g = build_grid(1, &[(0.0, 1.0)], &[101]).unwrap();
        let (w, p) = weights(&g, "norm(x - x0)^1.1", "2.3 + 0.4*x1");
        let u = SineModeFamily::default().fields(&g, 1, seed).remove(0);
        let r1 = ckn_variable_ratio(&w, &p, &u, 0).unwrap();
        let r2 = ckn_variable_ratio(&w, &p, &u.scaled(2.0), 0).unwrap();
        let (lo, hi) = (2f64.powf(p.p_minus()), 2f64.powf(p.p_plus()));
        let within = |a: f64, b: f64, shift: f64| {
            let f = 2f64.powf(shift);
            b >= lo * f * a * (1.0 - 1e-12) && b <= hi * f * a * (1.0 + 1e-12)
        };
        prop_assert!(within(r1.lhs, r2.lhs, 0.0));
        prop_assert!(within(r1.rhs_terms[0], r2.rhs_terms[0], 0.0));
        prop_assert!(within(r1.rhs_terms[1], r2.rhs_terms[1], 0.0));
        prop_assert!(within(r1.rhs_terms[2], r2.rhs_terms[2], 1.0));
        prop_assert!(within(r1.rhs_terms[3], r2.rhs_terms[3], -1.0));
    }

    #[test]
    fn classical_exponent_is_at_least_p(a in -1.0f64..0.4, t in 0.0f64..1.0, p in 1.1f64..2.0) {
        prop_assume!(a < (3.0 - p) / p);
        let b = a + t;
        let q = classical_exponent(a, b, p, 3).unwrap();
        prop_assert!(q >= p * (1.0 - 1e-12));
        // b = a + 1 is the Hardy endpoint q = p
        prop_assert!((classical_exponent(a, a + 1.0, p, 3).unwrap() - p).abs() < 1e-12);
    }
}

#[test]
fn hardy_ratio_for_a_radial_annulus_profile() {
    // a = 0, b = 1, p = q = 2 in 3D: the ratio is ∫u²/r² / ∫|∇u|², at most 4.
    // For u = sin²(π(r − 0.3)/0.5) on 0.3 < r < 0.8 both integrals are radial.
    let prof = |r: f64| {
        if r <= 0.3 || r >= 0.8 {
            0.0
        } else {
            (PI * (r - 0.3) / 0.5).sin().powi(2)
        }
    };
    let dprof = |r: f64| {
        if r <= 0.3 || r >= 0.8 {
            0.0
        } else {
            (PI / 0.5) * (2.0 * PI * (r - 0.3) / 0.5).sin()
        }
    };
    let m = 200_000;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in 0..m {
        let r = 0.3 + 0.5 * (k as f64 + 0.5) / m as f64;
        lhs += prof(r).powi(2);
        rhs += dprof(r).powi(2) * r * r;
    }
    let exact = lhs / rhs;
    assert!(exact < 4.0);

    let ratio_on = |n: usize| {
        let g = build_grid(3, &[(-1.0, 1.0); 3], &[n; 3]).unwrap();
        let u = ScalarField::from_fn(g.clone(), |x| prof((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())).mask_boundary();
        let report = ckn_classical_check(&u, 0.0, 1.0, 2.0, 3).unwrap();
        assert_eq!(report.q, 2.0);
        assert_eq!(report.excluded_nodes, 1);
        report.ratio
    };
    // central differences are second order, so halving h cuts the error about fourfold
    let (coarse, fine) = (ratio_on(41), ratio_on(81));
    let (e_coarse, e_fine) = ((coarse - exact).abs(), (fine - exact).abs());
    assert!(e_fine < 0.4 * e_coarse, "{coarse} {fine} vs {exact}");
    assert!(e_fine <= 0.03 * exact, "{fine} vs {exact}");
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!((extrapolated - exact).abs() <= 0.005 * exact, "{extrapolated} vs {exact}");
}

#[test]
fn singular_origin_must_be_zero() {
    let g = build_grid(3, &[(-1.0, 1.0); 3], &[11; 3]).unwrap();
    let u = ScalarField::from_fn(g.clone(), |x| bump((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt(), 0.2, 0.6)).mask_boundary();
    assert!(matches!(ckn_classical_check(&u, 0.0, 1.0, 2.0, 3), Err(Error::Domain { .. })));
    // a weight-free origin is harmless
    assert!(ckn_classical_check(&u, 0.0, 0.0, 2.0, 3).is_ok());
}

#[test]
fn bumps_avoid_origin_and_boundary() {
    let g = build_grid(3, &[(-1.0, 1.0); 3], &[21; 3]).unwrap();
    let origin = g.nearest_node(&[0.0, 0.0, 0.0]);
    for u in origin_free_bumps(&g, 20, 5) {
        assert_eq!(u.values()[origin], 0.0);
        assert!(!u.is_zero());
        u.check_dirichlet().unwrap();
    }
}

#[test]
fn beta_ckn_is_deterministic_nested_and_exact_for_one_sample() {
    let g = build_grid(2, &[(0.0, 1.0), (0.0, 1.0)], &[25, 25]).unwrap();
    let (w, p) = weights(&g, "norm(x - x0)^1.1", "2.5 + 0.2*x1");
    let one = estimate_beta_ckn(&w, &p, 1, 8).unwrap();
    let u = SineModeFamily::default().fields(&g, 1, 8).remove(0);
    assert_eq!(one.beta, ckn_variable_ratio(&w, &p, &u, 0).unwrap().ratio);

    let a = estimate_beta_ckn(&w, &p, 30, 8).unwrap();
    let b = estimate_beta_ckn(&w, &p, 30, 8).unwrap();
    assert_eq!(a.beta, b.beta);
    assert_eq!(a.reports, b.reports);
    let longer = estimate_beta_ckn(&w, &p, 60, 8).unwrap();
    assert!(longer.beta >= a.beta);
    assert_eq!(&longer.reports[..30], &a.reports[..]);
    assert_eq!(a.reports[0], one.reports[0]);
}
