//! Built-in invariant checks on canned instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigen::e1_norm;
use crate::energy::{simon_check, EnergyContext};
use crate::error::{Error, Result};
use crate::expr::FieldExpression;
use crate::grid::{build_grid, ScalarField};
use crate::sampling::SineModeFamily;
use crate::spaces::{check_trichotomy, luxemburg_norm, modular, trichotomy_holds, ExponentField};
use crate::weights::build_weights;

/// Names accepted by `--filter` and `--inject-fault`.
pub const CHECKS: [&str; 4] = ["trichotomy", "gradient consistency", "simon", "homogeneity"];

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs the checks whose name contains `filter`. A check named by `fault` is fed a
/// deliberately corrupted quantity and must fail.
pub fn run(filter: Option<&str>, fault: Option<&str>) -> Result<Vec<CheckOutcome>> {
    let selected: Vec<&'static str> = CHECKS
        .iter()
        .copied()
        .filter(|name| filter.is_none_or(|f| name.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(Error::Config(format!(
            "filter `{}` matches no check (available: {})",
            filter.unwrap_or_default(),
            CHECKS.join(", ")
        )));
    }
    if let Some(f) = fault {
        if !CHECKS.contains(&f) {
            return Err(Error::Config(format!("unknown fault target `{f}`")));
        }
    }
    selected
        .into_iter()
        .map(|name| {
            let faulty = fault == Some(name);
            match name {
                "trichotomy" => trichotomy(faulty),
                "gradient consistency" => gradient_consistency(faulty),
                "simon" => simon(faulty),
                _ => homogeneity(faulty),
            }
        })
        .collect()
}

fn outcome(name: &'static str, failures: usize, total: usize, worst: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failures == 0,
        detail: format!("{failures} of {total} cases failed; worst {worst:.3e}"),
    }
}

fn trichotomy(faulty: bool) -> Result<CheckOutcome> {
    let grid = build_grid(1, &[(0.0, 1.0)], &[101])?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let family = SineModeFamily::default();
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..200 {
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let u = family.sample(&grid, &mut rng).scaled(scale);
        let (p0, p1) = (rng.gen_range(1.2..3.0), rng.gen_range(-0.5..0.5));
        let p = ExponentField::new(ScalarField::from_fn(grid.clone(), |x| p0 + p1 * x[0] * x[0]).map(|v| v.max(1.1)))?;
        let mut r = check_trichotomy(&u, &p)?;
        if faulty {
            // pair the norm of u with the modular of 3u
            r.modular = modular(&u.scaled(3.0), &p)?;
            r.passed = trichotomy_holds(r.norm, r.modular, r.p_minus, r.p_plus);
        }
        worst = worst.max((r.norm - 1.0).abs().min((r.modular - 1.0).abs()));
        if !r.passed {
            failures += 1;
        }
    }
    Ok(outcome("trichotomy", failures, 200, worst))
}

fn gradient_consistency(faulty: bool) -> Result<CheckOutcome> {
    let grid = build_grid(1, &[(0.0, 1.0)], &[101])?;
    let a = ScalarField::from_fn(grid.clone(), |x| (x[0] - 0.5).abs().powf(1.1));
    let grad_a = FieldExpression::parse_with_point("norm(x - x0)^1.1", 1, &[0.5])?.grad_on_grid(&grid)?;
    let p_expr = FieldExpression::parse("2.5 + 0.3*x1", 1)?;
    let p = ExponentField::new(p_expr.eval_on_grid(&grid)?)?;
    let q = ExponentField::new(ScalarField::from_fn(grid.clone(), |x| 1.3 + 0.1 * x[0]))?;
    let weights = build_weights(&a, &grad_a, &p, &p_expr.grad_on_grid(&grid)?)?;
    let ctx = EnergyContext::new(weights, p, q, 0.05)?;
    let family = SineModeFamily::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..20 {
        let u = family.sample(&grid, &mut rng);
        let v = family.sample(&grid, &mut rng);
        let fd = (ctx.eval_i(&u.add_scaled(h, &v)?)? - ctx.eval_i(&u.add_scaled(-h, &v)?)?) / (2.0 * h);
        let mut analytic = ctx.grad_i(&u)?.pairing(&v);
        if faulty {
            analytic *= 1.0 + 1e-3;
        }
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-5 {
            failures += 1;
        }
    }
    Ok(outcome("gradient consistency", failures, 20, worst))
}

fn simon(faulty: bool) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut failures, mut worst) = (0, 0.0f64);
    let total = 10_000;
    for k in 0..total {
        let p = if k % 2 == 0 { rng.gen_range(1.01..2.0) } else { rng.gen_range(2.0..4.0) };
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut r = simon_check(&x, &y, p)?;
        if faulty {
            // compare against a constant a quarter of the true one
            r.holds = r.lhs <= 0.25 * r.rhs + 1e-12 * r.rhs.max(1.0);
        }
        worst = worst.max(if r.rhs > 0.0 { r.lhs / r.rhs } else { 0.0 });
        if !r.holds {
            failures += 1;
        }
    }
    Ok(outcome("simon", failures, total, worst))
}

fn homogeneity(faulty: bool) -> Result<CheckOutcome> {
    let grid = build_grid(2, &[(0.0, 1.0), (0.0, 1.0)], &[21, 21])?;
    let a = ScalarField::from_fn(grid.clone(), |x| ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt().powf(1.1));
    let grad_a = FieldExpression::parse_with_point("norm(x - x0)^1.1", 2, &[0.5, 0.5])?.grad_on_grid(&grid)?;
    let p_expr = FieldExpression::parse("2.4 + 0.2*x1*x2", 2)?;
    let p = ExponentField::new(p_expr.eval_on_grid(&grid)?)?;
    let weights = build_weights(&a, &grad_a, &p, &p_expr.grad_on_grid(&grid)?)?;
    let ctx = EnergyContext::new(weights, p.clone(), p.shifted(-1.1)?, 0.0)?;
    let family = SineModeFamily::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..20 {
        let u = family.sample(&grid, &mut rng);
        let t = rng.gen_range(-5.0..5.0);
        let tu = u.scaled(t);
        let base = luxemburg_norm(&u, &p, 1e-13)?;
        let mut scaled = luxemburg_norm(&tu, &p, 1e-13)?;
        if faulty {
            scaled = modular(&tu, &p)?;
        }
        let e1 = e1_norm(&ctx, &u)?.total;
        let e1_scaled = e1_norm(&ctx, &tu)?.total;
        let rel = ((scaled - t.abs() * base).abs() / (t.abs() * base))
            .max((e1_scaled - t.abs() * e1).abs() / (t.abs() * e1));
        worst = worst.max(rel);
        if rel > 1e-8 {
            failures += 1;
        }
    }
    Ok(outcome("homogeneity", failures, 20, worst))
}
