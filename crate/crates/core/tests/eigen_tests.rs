use std::path::PathBuf;

use proptest::prelude::*;

use vexlab::config::{Instance, RunConfig};
use vexlab::eigen::{
    check_boundary_bound, compute_lambda0, e1_norm, eigen_residual, estimate_beta, fd_residual, find_negative_direction,
    minimize_in_ball, SolverOptions,
};
use vexlab::energy::EnergyContext;
use vexlab::grid::ScalarField;
use vexlab::run::{setup, solve_lambda};
use vexlab::sampling::SineModeFamily;
use vexlab::spaces::luxemburg_norm;
use vexlab::Error;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn instance(name: &str) -> Instance {
    Instance::build(&RunConfig::from_path(&config_path(name)).unwrap()).unwrap()
}

fn relaxed() -> (Instance, EnergyContext) {
    let inst = instance("relaxed_1d.toml");
    let ctx = inst.context().unwrap();
    (inst, ctx)
}

#[test]
fn e1_norm_of_zero_and_scaling() {
    let (inst, ctx) = relaxed();
    let zero = e1_norm(&ctx, &ScalarField::zeros(inst.grid.clone())).unwrap();
    assert_eq!(zero.total, 0.0);
    let u = SineModeFamily::default().fields(&inst.grid, 1, 3).remove(0);
    let base = e1_norm(&ctx, &u).unwrap();
    assert!(base.term_b > 0.0 && base.term_a > 0.0 && base.term_c > 0.0 && base.term_d > 0.0);
    let sum = base.term_a + base.term_b + base.term_c + base.term_d;
    assert!((base.total - sum).abs() < 1e-15 * sum);
    for t in [-3.0, 0.1, 7.5] {
        let scaled = e1_norm(&ctx, &u.scaled(t)).unwrap().total;
        assert!((scaled - t.abs() * base.total).abs() < 1e-9 * scaled, "t = {t}");
    }
}

#[test]
fn e1_norm_drops_exponent_terms_for_constant_p() {
    let mut cfg = RunConfig::from_path(&config_path("relaxed_1d.toml")).unwrap();
    cfg.fields.p_expr = "2.6".into();
    let inst = Instance::build(&cfg).unwrap();
    let ctx = inst.context().unwrap();
    let u = SineModeFamily::default().fields(&inst.grid, 1, 5).remove(0);
    let b = e1_norm(&ctx, &u).unwrap();
    assert_eq!((b.term_c, b.term_d), (0.0, 0.0));
    assert!(b.term_a > 0.0 && b.term_b > 0.0);
}

#[test]
fn beta_estimate_is_deterministic_and_nested() {
    let (_, ctx) = relaxed();
    let a = estimate_beta(&ctx, 60, 11, 2.0).unwrap();
    let b = estimate_beta(&ctx, 60, 11, 2.0).unwrap();
    assert_eq!(a.beta, b.beta);
    let longer = estimate_beta(&ctx, 120, 11, 2.0).unwrap();
    assert!(longer.max_ratio >= a.max_ratio);
    assert_eq!(&longer.ratios[..60], &a.ratios[..]);
    assert_eq!(a.beta, 2.0 * a.max_ratio);
}

#[test]
fn beta_dominates_every_sample_ratio() {
    let (inst, ctx) = relaxed();
    let est = estimate_beta(&ctx, 40, 2, 1.0).unwrap();
    for (u, r) in SineModeFamily::default().fields(&inst.grid, 40, 2).iter().zip(&est.ratios) {
        let ratio = luxemburg_norm(u, ctx.q(), 1e-12).unwrap() / e1_norm(&ctx, u).unwrap().total;
        assert!((ratio - r.unwrap()).abs() < 1e-8 * ratio);
        assert!(ratio <= est.beta * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lambda0_decreases_in_beta(b1 in 0.05f64..5.0, db in 1e-3f64..5.0, rf in 0.05f64..0.99, p_plus in 2.01f64..6.0, q in 1.01f64..3.0) {
        let b2 = b1 + db;
        let rho = rf * 1f64.min(1.0 / b2);
        let l1 = compute_lambda0(rho, p_plus, q, b1).unwrap();
        let l2 = compute_lambda0(rho, p_plus, q, b2).unwrap();
        prop_assert!(l2.lambda0 < l1.lambda0);
        prop_assert_eq!(l1.alpha, l2.alpha);
        // λ₀ = α q⁻ / (ρ β)^{q⁻}
        let direct = l1.alpha * q / (rho * b1).powf(q);
        prop_assert!((l1.lambda0 - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn alpha_grows_with_rho(r1 in 0.01f64..0.5, dr in 1e-3f64..0.4, p_plus in 2.01f64..6.0) {
        let a1 = compute_lambda0(r1, p_plus, 1.5, 1.0 / 0.95).unwrap().alpha;
        let a2 = compute_lambda0(r1 + dr, p_plus, 1.5, 1.0 / 0.95).unwrap().alpha;
        prop_assert!(a2 > a1);
    }
}

#[test]
fn lambda0_rejects_bad_inputs() {
    assert!(compute_lambda0(0.5, 3.0, 1.5, 0.0).is_err());
    assert!(compute_lambda0(0.5, 3.0, 1.5, 4.0).is_err()); // rho ≥ 1/β
    assert!(compute_lambda0(0.5, 1.9, 1.5, 1.0).is_err());
    assert!(compute_lambda0(0.5, 3.0, 1.0, 1.0).is_err());
}

#[test]
fn no_negative_direction_without_lambda() {
    let (_, ctx) = relaxed();
    assert!(matches!(find_negative_direction(&ctx, 0.0), Err(Error::NoNegativeDirection(_))));
}

#[test]
fn negative_direction_stays_negative_when_shrunk() {
    let (_, ctx) = relaxed();
    let nd = find_negative_direction(&ctx, 1e-3).unwrap();
    assert!(nd.energy < 0.0);
    let at = ctx.with_lambda(1e-3).unwrap();
    for k in 1..6 {
        let t = nd.t_star * 0.5f64.powi(k);
        assert!(at.eval_i(&nd.phi.scaled(t)).unwrap() < 0.0, "t = {t}");
    }
    assert_eq!(nd.phi.values()[nd.centre], 1.0);
}

#[test]
fn boundary_energies_are_nonnegative_without_lambda() {
    let (_, ctx) = relaxed();
    let r = check_boundary_bound(&ctx, 0.3, 0.0, 50, 4).unwrap();
    assert_eq!(r.samples.len(), 50);
    assert!(r.min_energy >= 0.0);
    assert!(r.violations.is_empty() && r.advice.is_none());
    assert!(r.max_rescale_error <= 1e-8);
}

#[test]
fn zero_is_stationary_without_lambda() {
    let (inst, ctx) = relaxed();
    let zero = ScalarField::zeros(inst.grid.clone());
    assert_eq!(eigen_residual(&ctx, &zero, 0.0).unwrap(), 0.0);
    let r = minimize_in_ball(&ctx, 0.5, &zero, &SolverOptions::default()).unwrap();
    assert!(r.converged && !r.certified);
    assert_eq!(r.iterations, 0);
    assert_eq!(r.energy, 0.0);
}

#[test]
fn solve_certifies_a_nontrivial_eigenfunction() {
    let inst = instance("relaxed_1d.toml");
    let s = setup(&inst).unwrap();
    let lambda = 0.5 * s.lambda0;
    let out = solve_lambda(&s, lambda, &inst).unwrap();
    let r = &out.result;
    assert!(r.certified, "{:?}", r.diagnostic);
    assert!(r.energy < 0.0 && r.e1_norm <= s.rho && r.residual <= 1e-6);
    assert!(r.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
    assert!(out.boundary.violations.is_empty());

    let ctx = s.ctx.with_lambda(lambda).unwrap();
    let fd = fd_residual(&ctx, &r.u, 1e-6).unwrap();
    assert!((fd - r.residual).abs() <= 1e-7 + 1e-2 * r.residual, "fd {fd} vs {}", r.residual);

    // perturbing the solution raises the residual well above the tolerance;
    // growth is sublinear where u vanishes since |u|^{q-2}u is not Lipschitz there
    let v = SineModeFamily::default().fields(&inst.grid, 1, 99).remove(0).scaled(r.u.max_abs());
    let res = |eps: f64| eigen_residual(&ctx, &r.u.add_scaled(eps, &v).unwrap(), lambda).unwrap();
    let (r1, r2) = (res(1e-3), res(2e-3));
    assert!(r1 > 100.0 * r.residual);
    assert!(r2 > r1, "{r1} {r2}");
}

#[test]
fn solver_rejects_nonpositive_radius_and_boundary_data() {
    let (inst, ctx) = relaxed();
    let zero = ScalarField::zeros(inst.grid.clone());
    assert!(minimize_in_ball(&ctx, 0.0, &zero, &SolverOptions::default()).is_err());
    let ones = ScalarField::constant(inst.grid.clone(), 1.0);
    assert!(minimize_in_ball(&ctx, 0.5, &ones, &SolverOptions::default()).is_err());
}
