//! Empirical constants for the Caffarelli–Kohn–Nirenberg inequality, in its classical
//! power-weight form and in the variable-exponent form whose right side is built from
//! the potentials `A, B, C, D`.

use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{discrete_gradient, Grid, ScalarField};
use crate::sampling::{bump, SineModeFamily};
use crate::spaces::ExponentField;
use crate::weights::WeightFields;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CknReport {
    pub sample_id: usize,
    /// `∫|a|^p |u|^p`
    pub lhs: f64,
    /// `[∫A|u|^p, ∫B|∇u|^p, ∫D|u|^{p+1}, ∫C|u|^{p−1}]`
    pub rhs_terms: [f64; 4],
    /// `lhs / Σ rhs_terms`; 0 when `lhs = 0`.
    pub ratio: f64,
}

fn pow_abs(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(e)
    }
}

/// Both sides of the variable-exponent inequality for one field.
pub fn ckn_variable_ratio(weights: &WeightFields, p: &ExponentField, u: &ScalarField, sample_id: usize) -> Result<CknReport> {
    u.ensure_same_grid(&weights.b)?;
    u.ensure_same_grid(p.field())?;
    u.check_dirichlet()?;
    if u.is_zero() {
        return Err(Error::UndefinedRatio("u vanishes identically".into()));
    }
    let w = u.grid().quadrature_weights();
    let grad = discrete_gradient(u).magnitude();
    let mut lhs = 0.0;
    let mut rhs = [0.0; 4];
    for i in 0..u.len() {
        let (ui, pi, wi) = (u.values()[i], p.values()[i], w[i]);
        let up = pow_abs(ui, pi);
        lhs += wi * weights.b.values()[i] * up;
        rhs[0] += wi * weights.a.values()[i] * up;
        rhs[1] += wi * weights.b.values()[i] * pow_abs(grad.values()[i], pi);
        rhs[2] += wi * weights.d.values()[i] * pow_abs(ui, pi + 1.0);
        rhs[3] += wi * weights.c.values()[i] * pow_abs(ui, pi - 1.0);
    }
    let total: f64 = rhs.iter().sum();
    let ratio = if lhs == 0.0 {
        0.0
    } else if total > 0.0 {
        lhs / total
    } else {
        return Err(Error::UndefinedRatio(
            "left side is positive while every right-side term vanishes".into(),
        ));
    };
    Ok(CknReport {
        sample_id,
        lhs,
        rhs_terms: rhs,
        ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CknEstimate {
    /// Largest sampled ratio.
    pub beta: f64,
    pub reports: Vec<CknReport>,
    /// Ids of samples whose ratio was undefined.
    pub degenerate: Vec<usize>,
}

/// Maximum ratio over `n_samples` sine-mode fields drawn from `seed`.
pub fn estimate_beta_ckn(weights: &WeightFields, p: &ExponentField, n_samples: usize, seed: u64) -> Result<CknEstimate> {
    if n_samples == 0 {
        return Err(Error::OutOfRange("at least one sample is needed".into()));
    }
    let grid = weights.b.grid();
    let mut reports = Vec::with_capacity(n_samples);
    let mut degenerate = Vec::new();
    for (id, u) in SineModeFamily::default().fields(grid, n_samples, seed).into_iter().enumerate() {
        match ckn_variable_ratio(weights, p, &u, id) {
            Ok(r) => reports.push(r),
            Err(Error::UndefinedRatio(_)) => degenerate.push(id),
            Err(e) => return Err(e),
        }
    }
    let beta = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    if reports.is_empty() || beta == 0.0 {
        return Err(Error::DegenerateSamples);
    }
    Ok(CknEstimate {
        beta,
        reports,
        degenerate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationBatch {
    pub seed: u64,
    pub max_ratio: f64,
    /// Sample ids with ratio above `factor × β̂`.
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationReport {
    pub beta: f64,
    pub factor: f64,
    pub batches: Vec<ReplicationBatch>,
    /// Fraction of batches without violations.
    pub clean_fraction: f64,
}

/// Draws fresh batches and counts ratios above `factor × beta`. Violations are logged.
pub fn replicate_ckn(
    weights: &WeightFields,
    p: &ExponentField,
    beta: f64,
    factor: f64,
    n_samples: usize,
    seeds: &[u64],
) -> Result<ReplicationReport> {
    let mut batches = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let est = estimate_beta_ckn(weights, p, n_samples, seed)?;
        let violations: Vec<usize> = est
            .reports
            .iter()
            .filter(|r| r.ratio > factor * beta)
            .map(|r| r.sample_id)
            .collect();
        if !violations.is_empty() {
            warn!("replication seed {seed}: {} ratios exceed {factor} x {beta:e}", violations.len());
        }
        batches.push(ReplicationBatch {
            seed,
            max_ratio: est.beta,
            violations,
        });
    }
    let clean = batches.iter().filter(|b| b.violations.is_empty()).count();
    let clean_fraction = if batches.is_empty() { 1.0 } else { clean as f64 / batches.len() as f64 };
    Ok(ReplicationReport {
        beta,
        factor,
        batches,
        clean_fraction,
    })
}

/// Exponent `q = Np / (N − p(1 + a − b))` of the classical inequality, after checking
/// `1 < p < N`, `a < (N − p)/p` and `a ≤ b ≤ a + 1`.
pub fn classical_exponent(a_exp: f64, b_exp: f64, p: f64, dim: usize) -> Result<f64> {
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(Error::OutOfRange(format!("p = {p} must lie in (1, {n})")));
    }
    if !(a_exp < (n - p) / p) {
        return Err(Error::OutOfRange(format!("a = {a_exp} must be below (N - p)/p = {}", (n - p) / p)));
    }
    if !(a_exp <= b_exp && b_exp <= a_exp + 1.0) {
        return Err(Error::OutOfRange(format!("b = {b_exp} must lie in [a, a + 1] = [{a_exp}, {}]", a_exp + 1.0)));
    }
    let denom = n - p * (1.0 + a_exp - b_exp);
    if !(denom > 0.0) {
        return Err(Error::OutOfRange(format!("exponent denominator {denom} must be positive")));
    }
    Ok(n * p / denom)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ClassicalReport {
    pub q: f64,
    /// `(∫|x|^{−bq}|u|^q)^{p/q}`
    pub lhs: f64,
    /// `∫|x|^{−ap}|∇u|^p`
    pub rhs_core: f64,
    /// `lhs / rhs_core`, a lower bound on the optimal constant.
    pub ratio: f64,
    /// Nodes at the origin dropped because their weight is singular.
    pub excluded_nodes: usize,
}

/// Both sides of the classical power-weight inequality for one field.
///
/// `u` must vanish on the boundary and at any node where a weight is singular.
pub fn ckn_classical_check(u: &ScalarField, a_exp: f64, b_exp: f64, p: f64, dim: usize) -> Result<ClassicalReport> {
    let q = classical_exponent(a_exp, b_exp, p, dim)?;
    let grid = u.grid();
    if grid.dim() != dim {
        return Err(Error::OutOfRange(format!("grid has dimension {}, expected {dim}", grid.dim())));
    }
    u.check_dirichlet()?;
    let w = grid.quadrature_weights();
    let grad = discrete_gradient(u).magnitude();
    let (lhs_exp, rhs_exp) = (-b_exp * q, -a_exp * p);
    let mut x = vec![0.0; dim];
    let (mut lhs, mut rhs, mut excluded) = (0.0, 0.0, 0);
    for i in 0..u.len() {
        grid.coords_into(i, &mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 && (lhs_exp < 0.0 || rhs_exp < 0.0) {
            if u.values()[i] != 0.0 {
                return Err(Error::Domain {
                    node: i,
                    coords: x.clone(),
                    message: "u must vanish where the weight is singular".into(),
                });
            }
            excluded += 1;
            continue;
        }
        let radial = |e: f64| if e == 0.0 { 1.0 } else { r.powf(e) };
        lhs += w[i] * radial(lhs_exp) * pow_abs(u.values()[i], q);
        rhs += w[i] * radial(rhs_exp) * pow_abs(grad.values()[i], p);
    }
    if rhs == 0.0 {
        return Err(Error::UndefinedRatio("the gradient term vanishes".into()));
    }
    let lhs = lhs.powf(p / q);
    Ok(ClassicalReport {
        q,
        lhs,
        rhs_core: rhs,
        ratio: lhs / rhs,
        excluded_nodes: excluded,
    })
}

/// Smooth bumps `φ(|x − c|)` with support kept off the origin and inside the box.
///
/// Each bump is 1 on `|x − c| ≤ R/2` and vanishes for `|x − c| ≥ R`, where `R` is at most
/// the distance from `c` to the boundary and smaller than `|c|`.
pub fn origin_free_bumps(grid: &Arc<Grid>, n: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut out = Vec::with_capacity(n);
    let min_h = grid.h().iter().copied().fold(f64::INFINITY, f64::min);
    while out.len() < n {
        let c: Vec<f64> = (0..dim).map(|k| rng.gen_range(grid.lo()[k]..grid.hi()[k])).collect();
        let to_wall = (0..dim)
            .map(|k| (c[k] - grid.lo()[k]).min(grid.hi()[k] - c[k]))
            .fold(f64::INFINITY, f64::min);
        let to_origin = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let room = to_wall.min(0.9 * to_origin);
        // a bump must span a few cells to be resolved
        if room < 4.0 * min_h {
            continue;
        }
        let radius = rng.gen_range(0.5 * room..room);
        let u = ScalarField::from_fn(grid.clone(), |x| {
            let d = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            bump(d, 0.5 * radius, radius)
        })
        .mask_boundary();
        if !u.is_zero() {
            out.push(u);
        }
    }
    out
}
