//! End-to-end pipelines behind the command-line interface.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::ckn::{ckn_classical_check, estimate_beta_ckn, origin_free_bumps, replicate_ckn, ClassicalReport, CknEstimate, ReplicationReport};
use crate::config::{Instance, LambdaSpec, ValidationReport};
use crate::eigen::{
    check_boundary_bound, compute_lambda0, e1_norm, eigen_residual, estimate_beta, find_negative_direction, minimize_in_ball,
    BoundaryReport, EigenResult, SolverOptions, TraceEntry,
};
use crate::energy::EnergyContext;
use crate::error::{Error, Result};

/// Why a pipeline stopped without a certified result.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or arguments.
    Usage(String),
    /// The instance or the solve did not meet its contract.
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Syntax { .. } | Error::UnknownIdentifier { .. } => Failure::Usage(e.to_string()),
            other => Failure::Domain(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeDirectionRecord {
    pub phi: Vec<f64>,
    pub t: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryCertificate {
    pub beta_embed: f64,
    pub rho: f64,
    pub lambda0: f64,
    pub alpha: f64,
    /// `(sample id, I_λ)` on the sphere `‖u‖ = ρ`.
    pub boundary_samples: Vec<(usize, f64)>,
    pub boundary_violations: Vec<usize>,
    pub negative_direction: NegativeDirectionRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenRecord {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    pub e1_norm: f64,
    pub iterations: usize,
    /// Residual within tolerance, negative energy and inside the ball.
    pub converged: bool,
    /// Residual within tolerance only.
    pub stationary: bool,
    pub trace: Vec<TraceEntry>,
    pub diagnostic: Option<String>,
}

impl From<&EigenResult> for EigenRecord {
    fn from(r: &EigenResult) -> Self {
        Self {
            lambda: r.lambda,
            u: r.u.values().to_vec(),
            energy: r.energy,
            residual: r.residual,
            e1_norm: r.e1_norm,
            iterations: r.iterations,
            converged: r.certified,
            stationary: r.converged,
            trace: r.trace.clone(),
            diagnostic: r.diagnostic.clone(),
        }
    }
}

/// The result document of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDocument {
    pub validation: ValidationReport,
    pub forced: bool,
    pub certificate: GeometryCertificate,
    pub result: EigenRecord,
}

/// Quantities shared by every `λ` of an instance.
#[derive(Debug, Clone)]
pub struct Setup {
    pub ctx: EnergyContext,
    pub beta: f64,
    pub rho: f64,
    pub lambda0: f64,
    pub alpha: f64,
}

pub fn setup(instance: &Instance) -> Result<Setup> {
    let s = &instance.config.solver;
    let ctx = instance.context()?;
    let beta = estimate_beta(&ctx, s.beta_samples, s.seed, s.safety_factor)?.beta;
    let rho = s.rho_factor * 1f64.min(1.0 / beta);
    let l = compute_lambda0(rho, ctx.p().p_plus(), ctx.q().p_minus(), beta)?;
    Ok(Setup {
        ctx,
        beta,
        rho,
        lambda0: l.lambda0,
        alpha: l.alpha,
    })
}

/// Checks `λ ∈ (0, λ₀)`; with `force` only positivity is required.
pub fn check_lambda(lambda: f64, lambda0: f64, force: bool) -> std::result::Result<(), Failure> {
    if !(lambda > 0.0) {
        return Err(Failure::Domain(format!("λ must be positive (got {lambda})")));
    }
    if lambda >= lambda0 && !force {
        return Err(Failure::Domain(format!(
            "λ = {lambda:e} is outside guaranteed interval (0, {lambda0:e}); rerun with --force to solve anyway"
        )));
    }
    Ok(())
}

pub struct SolveOutput {
    pub certificate: GeometryCertificate,
    pub boundary: BoundaryReport,
    pub result: EigenResult,
}

/// Boundary check, negative direction and descent for one `λ`.
pub fn solve_lambda(setup: &Setup, lambda: f64, instance: &Instance) -> Result<SolveOutput> {
    let s = &instance.config.solver;
    let ctx = setup.ctx.with_lambda(lambda)?;
    let boundary = check_boundary_bound(&ctx, setup.rho, setup.alpha, s.boundary_samples, s.seed.wrapping_add(1))?;
    let nd = find_negative_direction(&ctx, lambda)?;
    let mut t = nd.t_star;
    let mut u0 = nd.phi.scaled(t);
    while e1_norm(&ctx, &u0)?.total >= setup.rho {
        t *= 0.5;
        u0 = nd.phi.scaled(t);
    }
    let start_energy = ctx.eval_i(&u0)?;
    let opts = SolverOptions {
        max_iters: s.max_iters,
        tol: s.tol,
        ..SolverOptions::default()
    };
    let mut result = minimize_in_ball(&ctx, setup.rho, &u0, &opts)?;
    result.residual = eigen_residual(&ctx, &result.u, lambda)?;
    let certificate = GeometryCertificate {
        beta_embed: setup.beta,
        rho: setup.rho,
        lambda0: setup.lambda0,
        alpha: setup.alpha,
        boundary_samples: boundary.samples.iter().map(|b| (b.id, b.energy)).collect(),
        boundary_violations: boundary.violations.clone(),
        negative_direction: NegativeDirectionRecord {
            phi: nd.phi.values().to_vec(),
            t,
            energy: start_energy,
        },
    };
    Ok(SolveOutput {
        certificate,
        boundary,
        result,
    })
}

/// The full solve pipeline for the configured `λ`.
pub fn solve(instance: &Instance, force: bool) -> std::result::Result<SolveDocument, Failure> {
    let validation = instance.validate(instance.config.mode)?;
    if !validation.passed && !force {
        return Err(Failure::Domain(
            "instance fails validation; run `validate` for details or rerun with --force".into(),
        ));
    }
    let spec = instance.config.solver.lambda()?;
    if let LambdaSpec::Absolute(l) = spec {
        if !(l > 0.0) {
            return Err(Failure::Domain(format!("λ must be positive (got {l})")));
        }
    }
    let setup = setup(instance)?;
    let lambda = spec.resolve(setup.lambda0);
    check_lambda(lambda, setup.lambda0, force)?;
    let out = solve_lambda(&setup, lambda, instance)?;
    Ok(SolveDocument {
        validation,
        forced: force,
        certificate: out.certificate,
        result: EigenRecord::from(&out.result),
    })
}

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub converged: bool,
    pub energy: Option<f64>,
    pub residual: Option<f64>,
    pub e1_norm: Option<f64>,
    pub iterations: usize,
    pub wall_ms: u128,
}

/// Solves each `λ` of the configured list, in parallel; rows keep list order.
pub fn sweep(instance: &Instance, force: bool, threads: Option<usize>) -> std::result::Result<Vec<SweepRow>, Failure> {
    let list = instance.config.solver.lambda_list()?;
    let validation = instance.validate(instance.config.mode)?;
    if !validation.passed && !force {
        return Err(Failure::Domain(
            "instance fails validation; run `validate` for details or rerun with --force".into(),
        ));
    }
    let setup = setup(instance)?;
    let run = |spec: &LambdaSpec| -> SweepRow {
        let start = Instant::now();
        let lambda = spec.resolve(setup.lambda0);
        let solved = check_lambda(lambda, setup.lambda0, force)
            .ok()
            .and_then(|_| solve_lambda(&setup, lambda, instance).ok());
        let wall_ms = start.elapsed().as_millis();
        match solved {
            Some(out) => SweepRow {
                lambda,
                converged: out.result.certified,
                energy: Some(out.result.energy),
                residual: Some(out.result.residual),
                e1_norm: Some(out.result.e1_norm),
                iterations: out.result.iterations,
                wall_ms,
            },
            None => SweepRow {
                lambda,
                converged: false,
                energy: None,
                residual: None,
                e1_norm: None,
                iterations: 0,
                wall_ms,
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(pool.install(|| list.par_iter().map(run).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct CknDocument {
    pub estimate: CknEstimate,
    pub replication: ReplicationReport,
    pub classical: Option<ClassicalSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalSummary {
    pub a_exp: f64,
    pub b_exp: f64,
    pub p: f64,
    pub reports: Vec<ClassicalReport>,
    pub max_ratio: f64,
}

/// Variable-exponent constant estimate, replication batches and, for constant `p`, the
/// classical check on origin-free bumps.
pub fn ckn(instance: &Instance) -> std::result::Result<CknDocument, Failure> {
    let cfg = &instance.config;
    let weights = instance.weights()?;
    let seed = cfg.solver.seed;
    let estimate = estimate_beta_ckn(&weights, &instance.p, cfg.ckn.samples, seed)?;
    let seeds: Vec<u64> = (1..=cfg.ckn.replications as u64).map(|k| seed.wrapping_add(k)).collect();
    let replication = replicate_ckn(&weights, &instance.p, estimate.beta, 2.0, cfg.ckn.samples, &seeds)?;
    let classical = if instance.p.is_constant() {
        let (a_exp, b_exp, bumps) = match &cfg.ckn.classical {
            Some(c) => (c.a_exp, c.b_exp, c.bumps),
            None => (0.0, 1.0, 50),
        };
        let p = instance.p.p_minus();
        let reports = origin_free_bumps(&instance.grid, bumps, seed)
            .iter()
            .map(|u| ckn_classical_check(u, a_exp, b_exp, p, instance.grid.dim()))
            .collect::<Result<Vec<_>>>()?;
        let max_ratio = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
        Some(ClassicalSummary {
            a_exp,
            b_exp,
            p,
            reports,
            max_ratio,
        })
    } else {
        None
    };
    Ok(CknDocument {
        estimate,
        replication,
        classical,
    })
}
