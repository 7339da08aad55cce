//! Acceptance suite: one line per criterion, nonzero exit if any criterion fails.
//!
//! Run with `cargo test -p vexlab --test acceptance`.

#![allow(clippy::excessive_precision)]

use std::path::PathBuf;
use std::process::{Command, ExitCode, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vexlab::ckn::{ckn_classical_check, estimate_beta_ckn, origin_free_bumps, replicate_ckn};
use vexlab::config::{Instance, RunConfig};
use vexlab::eigen::{check_boundary_bound, compute_lambda0, find_negative_direction};
use vexlab::energy::{simon_check, EnergyContext};
use vexlab::expr::FieldExpression;
use vexlab::grid::{build_grid, Grid, ScalarField};
use vexlab::run::{setup, solve_lambda};
use vexlab::sampling::SineModeFamily;
use vexlab::spaces::{check_trichotomy, luxemburg_norm, modular, ExponentField};
use vexlab::weights::build_weights;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn instance(name: &str) -> Instance {
    let cfg = RunConfig::from_path(&config_path(name)).expect("config parses");
    Instance::build(&cfg).expect("instance builds")
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

/// Random Dirichlet field with magnitude spread over four decades.
fn random_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    SineModeFamily::default().sample(grid, rng).scaled(scale)
}

fn random_exponent(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ExponentField {
    let (base, slope, wave) = (rng.gen_range(1.6..3.5), rng.gen_range(-0.5..0.5), rng.gen_range(1.0..4.0));
    ExponentField::new(ScalarField::from_fn(grid.clone(), |x| base + slope * (wave * x[0]).sin())).unwrap()
}

fn luxemburg_consistency() -> Verdict {
    let start = Instant::now();
    let grid = build_grid(1, &[(0.0, 1.0)], &[201]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for p in [2.0, 2.5, 3.0] {
        let pf = ExponentField::constant(grid.clone(), p).unwrap();
        for _ in 0..100 {
            let u = random_field(&grid, &mut rng);
            let norm = luxemburg_norm(&u, &pf, 1e-13).unwrap();
            let lp = modular(&u, &pf).unwrap().powf(1.0 / p);
            worst = worst.max((norm - lp).abs() / norm);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-8 && within(elapsed, 5.0),
        format!("max relative gap {worst:.2e} over 300 fields in {elapsed:.2?}"),
    )
}

fn norm_fixed_point() -> Verdict {
    let grid = build_grid(1, &[(0.0, 1.0)], &[201]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = random_field(&grid, &mut rng);
        let p = random_exponent(&grid, &mut rng);
        let mu = luxemburg_norm(&u, &p, 1e-12).unwrap();
        worst = worst.max((modular(&u.scaled(1.0 / mu), &p).unwrap() - 1.0).abs());
    }
    verdict(worst <= 1e-10, format!("max |modular(u/mu) - 1| = {worst:.2e} over 100 fields"))
}

fn trichotomy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let grids = [
        build_grid(1, &[(0.0, 1.0)], &[101]).unwrap(),
        build_grid(2, &[(0.0, 1.0), (0.0, 2.0)], &[17, 25]).unwrap(),
    ];
    let mut violations = 0;
    for k in 0..500 {
        let grid = &grids[k % 2];
        let u = random_field(grid, &mut rng);
        let p = random_exponent(grid, &mut rng);
        if !check_trichotomy(&u, &p).unwrap().passed {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("{violations} violations in 500 instances"))
}

fn energy_context(dim: usize, n: usize, lambda: f64) -> EnergyContext {
    let grid = build_grid(dim, &vec![(0.0, 1.0); dim], &vec![n; dim]).unwrap();
    let x0 = vec![0.5; dim];
    let a = FieldExpression::parse_with_point("norm(x - x0)^1.1", dim, &x0).unwrap();
    let p = FieldExpression::parse("2.4 + 0.3*x1", dim).unwrap();
    let q = FieldExpression::parse("1.3 + 0.1*x1", dim).unwrap();
    let pf = ExponentField::new(p.eval_on_grid(&grid).unwrap()).unwrap();
    let weights = build_weights(
        &a.eval_on_grid(&grid).unwrap(),
        &a.grad_on_grid(&grid).unwrap(),
        &pf,
        &p.grad_on_grid(&grid).unwrap(),
    )
    .unwrap();
    let qf = ExponentField::new(q.eval_on_grid(&grid).unwrap()).unwrap();
    EnergyContext::new(weights, pf, qf, lambda).unwrap()
}

/// Dirichlet field with no interior zeros, so every integrand is smooth along the
/// difference stencil.
fn positive_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let m = SineModeFamily::default().sample(grid, rng);
    let m = m.scaled(1.0 / m.max_abs());
    let scale = rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let ground = ScalarField::from_fn(grid.clone(), |x| x.iter().map(|&t| (std::f64::consts::PI * t).sin()).product());
    ground.zip_map(&m, |g, mi| scale * g * (1.5 + mi)).unwrap().mask_boundary()
}

fn gradient_consistency() -> Verdict {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (dim, n) in [(1, 101), (2, 33)] {
        let ctx = energy_context(dim, n, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(104 + dim as u64);
        for _ in 0..50 {
            let u = positive_field(ctx.grid(), &mut rng);
            let v = SineModeFamily::default().sample(ctx.grid(), &mut rng);
            let (up, um) = (u.add_scaled(h, &v).unwrap(), u.add_scaled(-h, &v).unwrap());
            let fd_t = (ctx.eval_t(&up).unwrap() - ctx.eval_t(&um).unwrap()) / (2.0 * h);
            let fd_i = (ctx.eval_i(&up).unwrap() - ctx.eval_i(&um).unwrap()) / (2.0 * h);
            let an_t = ctx.grad_t(&u).unwrap().pairing(&v);
            let an_i = ctx.grad_i(&u).unwrap().pairing(&v);
            for (fd, an) in [(fd_t, an_t), (fd_i, an_i)] {
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()));
            }
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-5 && within(elapsed, 30.0),
        format!("max relative error {worst:.2e} over {cases} pairs (T and I) in {elapsed:.2?}"),
    )
}

fn simon_inequalities() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut violations = 0;
    for k in 0..100_000 {
        let p = if k % 2 == 0 { rng.gen_range(1.0..2.0) } else { rng.gen_range(2.0..=4.0) };
        let p = if p == 1.0 { 1.5 } else { p };
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let x: Vec<f64> = (0..3).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        if !simon_check(&x, &y, p).unwrap().holds {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && within(elapsed, 5.0),
        format!("{violations} violations in 100000 samples in {elapsed:.2?}"),
    )
}

fn strict_monotonicity() -> Verdict {
    let mut violations = 0;
    let mut smallest = f64::INFINITY;
    for (dim, n, seed) in [(1, 101, 106), (2, 33, 107)] {
        let ctx = energy_context(dim, n, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let u = random_field(ctx.grid(), &mut rng);
            let v = random_field(ctx.grid(), &mut rng);
            let gap = ctx.monotonicity_gap(&u, &v).unwrap();
            smallest = smallest.min(gap);
            if !(gap > 0.0) {
                violations += 1;
            }
        }
    }
    verdict(violations == 0, format!("{violations} violations in 100 pairs; smallest gap {smallest:.2e}"))
}

/// `(ρ, p⁺, q⁻, β, λ₀, α)` evaluated at 50 significant digits.
const LAMBDA0_ORACLE: [(f64, f64, f64, f64, f64, f64); 20] = [
    (0.313721, 3.779516, 2.33032, 1.546363, 0.00002737074354278773318, 2.1767710388366881515e-6),
    (0.137979, 5.760415, 2.047916, 4.00709, 2.6547254855376049213e-10, 3.8517678008108672785e-11),
    (0.317973, 3.352732, 1.36086, 2.856314, 0.000011652066331355810346, 7.511045111328181273e-6),
    (0.263181, 4.222318, 1.18192, 2.662355, 4.6405906363064595264e-7, 2.5787115374206536355e-7),
    (0.56217, 3.294037, 1.904399, 0.98522, 0.00059874772881309712726, 0.0001020513694514590633),
    (0.218319, 2.067135, 2.954296, 3.604288, 0.00052307746254603226406, 0.000087217240667376255659),
    (0.177481, 5.138132, 1.653427, 2.864347, 8.1820891546233462457e-9, 1.6168328384332011315e-9),
    (0.097428, 5.882516, 2.537516, 2.576314, 1.936061166375946082e-10, 2.2866264816410716961e-12),
    (0.177435, 3.633528, 1.648754, 1.748564, 2.6365869067082174659e-6, 2.3219822934153305641e-7),
    (0.827568, 5.109212, 2.148713, 0.538116, 0.00026414544226364160469, 0.000021616132195633177811),
    (0.104449, 5.731708, 1.8391, 3.662219, 7.0423743994485622939e-11, 6.5397749287029500455e-12),
    (0.576576, 3.211917, 1.325415, 1.585506, 0.00020299335480949251965, 0.00013597878683556086591),
    (0.074272, 4.725076, 1.931243, 2.249789, 2.6198363453013401939e-9, 4.2834876606143219074e-11),
    (0.403672, 3.193867, 2.537223, 2.207585, 0.00010778266433289356652, 0.000031709709959589335387),
    (0.079118, 2.553551, 2.538075, 4.910521, 0.000013883929665258238766, 4.9645701353745235953e-7),
    (0.041094, 4.619843, 2.692331, 1.839168, 6.719282688429752139e-9, 2.3849293755588731695e-12),
    (0.020699, 5.688646, 2.942449, 3.176197, 1.3546032658046683549e-12, 1.5300551497647328413e-16),
    (0.190643, 4.225324, 1.159672, 0.550332, 7.5112485089165874224e-7, 4.7410993137636876052e-8),
    (0.212495, 4.064267, 1.23257, 3.506736, 2.4507858272248324676e-7, 1.3836783722284688427e-7),
    (0.201297, 3.220869, 2.008011, 4.367261, 4.084337778929120361e-6, 1.5703635990345700589e-6),
];

fn formula_fidelity() -> Verdict {
    let mut worst = 0.0f64;
    for &(rho, pp, qm, beta, lambda0, alpha) in &LAMBDA0_ORACLE {
        let r = compute_lambda0(rho, pp, qm, beta).unwrap();
        worst = worst
            .max((r.lambda0 - lambda0).abs() / lambda0)
            .max((r.alpha - alpha).abs() / alpha);
    }
    verdict(worst <= 1e-12, format!("max relative deviation {worst:.2e} over 20 tuples"))
}

fn mountain_geometry() -> Verdict {
    let start = Instant::now();
    let inst = instance("reference_3d.toml");
    let s = setup(&inst).unwrap();
    let lambda = 0.5 * s.lambda0;
    let ctx = s.ctx.with_lambda(lambda).unwrap();
    let boundary = check_boundary_bound(&ctx, s.rho, s.alpha, 100, 8).unwrap();
    let nd = find_negative_direction(&ctx, lambda);
    let elapsed = start.elapsed();
    let (negative, nd_detail) = match &nd {
        Ok(d) => (d.energy < 0.0, format!("t* = {:.3e}, I(t* phi) = {:.3e}", d.t_star, d.energy)),
        Err(e) => (false, format!("no negative direction: {e}")),
    };
    verdict(
        boundary.violations.is_empty()
            && boundary.samples.len() == 100
            && boundary.max_rescale_error <= 1e-8
            && negative
            && within(elapsed, 120.0),
        format!(
            "{} boundary violations, min I on sphere {:.3e} >= alpha {:.3e}; {nd_detail}; {elapsed:.2?}",
            boundary.violations.len(),
            boundary.min_energy,
            s.alpha
        ),
    )
}

struct Solved {
    label: String,
    ctx: EnergyContext,
    u: ScalarField,
    residual: f64,
}

fn eigen_solves(solved: &mut Vec<Solved>) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for name in ["reference_3d.toml", "relaxed_1d.toml"] {
        let inst = instance(name);
        let s = setup(&inst).unwrap();
        let mut energies = Vec::new();
        for frac in [0.25, 0.5] {
            let start = Instant::now();
            let lambda = frac * s.lambda0;
            let out = match solve_lambda(&s, lambda, &inst) {
                Ok(o) => o,
                Err(e) => {
                    ok = false;
                    notes.push(format!("{name} at {frac} lambda0: {e}"));
                    continue;
                }
            };
            let elapsed = start.elapsed();
            let r = &out.result;
            let monotone = r.trace.windows(2).all(|w| w[1].energy <= w[0].energy);
            let good = r.converged
                && r.residual <= 1e-6
                && r.energy < 0.0
                && r.e1_norm <= s.rho
                && monotone
                && within(elapsed, 180.0);
            ok &= good;
            notes.push(format!(
                "{name} {frac} lambda0: res {:.1e}, I {:.2e}, e1 {:.1e}, {} it, {elapsed:.1?}",
                r.residual, r.energy, r.e1_norm, r.iterations
            ));
            energies.push(r.energy);
            solved.push(Solved {
                label: format!("{name} {frac} lambda0"),
                ctx: s.ctx.with_lambda(lambda).unwrap(),
                u: r.u.clone(),
                residual: r.residual,
            });
        }
        if energies.len() == 2 && energies[1] > energies[0] {
            ok = false;
            notes.push(format!("{name}: energy increases with lambda"));
        }
    }
    verdict(ok, notes.join("; "))
}

fn residual_cross_check(solved: &[Solved]) -> Verdict {
    if solved.len() < 4 {
        return verdict(false, "fewer than four converged solutions to check");
    }
    let mut worst = 0.0f64;
    for s in solved {
        let grid = s.ctx.grid();
        let w = grid.quadrature_weights();
        let mut sum = 0.0;
        for &node in grid.interior() {
            let ui = s.u.values()[node].abs();
            let h = 1e-6 * if ui > 0.0 { ui } else { s.u.max_abs() };
            let g = s.ctx.central_difference(&s.u, node, h).unwrap();
            sum += g * g / w[node];
        }
        let fd = sum.sqrt();
        let rel = (fd - s.residual).abs() / s.residual;
        worst = worst.max(rel);
        if rel > 1e-4 {
            return verdict(false, format!("{}: difference residual {fd:.3e} vs reported {:.3e}", s.label, s.residual));
        }
    }
    verdict(true, format!("max relative deviation {worst:.2e} over {} solutions", solved.len()))
}

fn ckn_harness() -> Verdict {
    let inst = instance("reference_3d.toml");
    let weights = inst.weights().unwrap();
    let est = estimate_beta_ckn(&weights, &inst.p, 200, 201).unwrap();
    let seeds: Vec<u64> = (1..=20).map(|k| 201 + k).collect();
    let rep = replicate_ckn(&weights, &inst.p, est.beta, 2.0, 200, &seeds).unwrap();
    let worst_batch = rep.batches.iter().map(|b| b.max_ratio).fold(0.0, f64::max);

    let grid = build_grid(3, &[(-1.0, 1.0); 3], &[33, 33, 33]).unwrap();
    let ratios: Vec<f64> = origin_free_bumps(&grid, 50, 202)
        .iter()
        .map(|u| ckn_classical_check(u, 0.0, 1.0, 2.0, 3).unwrap().ratio)
        .collect();
    let classical_ok = ratios.len() == 50 && ratios.iter().all(|r| r.is_finite() && *r > 0.0);
    let max_classical = ratios.iter().copied().fold(0.0, f64::max);
    verdict(
        est.beta.is_finite() && est.beta > 0.0 && rep.clean_fraction >= 0.95 && classical_ok,
        format!(
            "beta_ckn {:.3e}; {:.0}% of 20 batches within 2 beta (largest batch max {:.3e}); Hardy ratios finite on 50 bumps, max {max_classical:.3e}",
            est.beta,
            100.0 * rep.clean_fraction,
            worst_batch
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_vexlab"))
            .args(["solve", "--config"])
            .arg(config_path("conforming_3d.toml"))
            .arg("--out")
            .arg(&out)
            .stderr(Stdio::null())
            .status()
            .unwrap();
        (status.code(), std::fs::read(&out).unwrap_or_default())
    };
    let (c1, a) = run("first.json");
    let (c2, b) = run("second.json");
    verdict(
        c1 == Some(0) && c2 == Some(0) && !a.is_empty() && a == b,
        format!("exit codes {c1:?}/{c2:?}; documents of {} and {} bytes identical: {}", a.len(), b.len(), a == b),
    )
}

fn main() -> ExitCode {
    let mut solved = Vec::new();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Vec<Solved>) -> Verdict>)> = vec![
        ("Luxemburg consistency", Box::new(|_| luxemburg_consistency())),
        ("norm fixed point", Box::new(|_| norm_fixed_point())),
        ("modular trichotomy", Box::new(|_| trichotomy())),
        ("gradient consistency", Box::new(|_| gradient_consistency())),
        ("Simon inequalities", Box::new(|_| simon_inequalities())),
        ("strict monotonicity", Box::new(|_| strict_monotonicity())),
        ("formula fidelity", Box::new(|_| formula_fidelity())),
        ("mountain geometry", Box::new(|_| mountain_geometry())),
        ("eigen-solve certificate", Box::new(eigen_solves)),
        ("residual cross-check", Box::new(|s| residual_cross_check(s))),
        ("CKN harness", Box::new(|_| ckn_harness())),
        ("determinism", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let v = check(&mut solved);
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {}", k + 1, v.detail);
        failed += usize::from(!v.passed);
    }
    if failed == 0 {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 12 criteria failed");
        ExitCode::FAILURE
    }
}
