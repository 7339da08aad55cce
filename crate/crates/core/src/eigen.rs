//! Mountain-pass geometry and a constrained descent solver for the eigenvalue problem
//!
//! ```text
//! −div(B|∇u|^{p−2}∇u) + (A|u|^{p−2} + C|u|^{p−3})u = (λ|u|^{q−2} − D|u|^{p−1})u,  u = 0 on ∂Ω
//! ```
//!
//! Weak solutions are critical points of `I_λ`. For `λ ∈ (0, λ₀)` the energy is bounded
//! below by `α > 0` on the sphere `‖u‖ = ρ` of the weighted norm and negative somewhere
//! inside the ball, so a minimizer of `I_λ` over the ball is an interior critical point
//! with negative energy. [`minimize_in_ball`] looks for it by projected Armijo descent.

use log::debug;
use serde::Serialize;

use crate::energy::{DualVector, EnergyContext};
use crate::error::{Error, Result};
use crate::grid::{discrete_gradient, ScalarField};
use crate::sampling::{smooth_step, SineModeFamily};
use crate::spaces::{luxemburg_raw, luxemburg_norm, modular_raw, INTERNAL_TOL};

/// The four weighted Luxemburg norms making up the `E₁` norm.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct E1Breakdown {
    /// `|B^{1/p} ∇u|_{p(x)}`
    pub term_b: f64,
    /// `|A^{1/p} u|_{p(x)}`
    pub term_a: f64,
    /// `|D^{1/(p+1)} u|_{p(x)+1}`
    pub term_d: f64,
    /// `|C^{1/(p−1)} u|_{p(x)−1}`
    pub term_c: f64,
    pub total: f64,
}

/// Nodal magnitudes and exponents of the four weighted terms.
fn e1_integrands(ctx: &EnergyContext, u: &ScalarField) -> [(Vec<f64>, Vec<f64>); 4] {
    let w = ctx.weights();
    let p = ctx.p().values();
    let grad = discrete_gradient(u).magnitude();
    let weighted = |weight: &ScalarField, base: &[f64], shift: f64| -> (Vec<f64>, Vec<f64>) {
        let exps: Vec<f64> = p.iter().map(|pi| pi + shift).collect();
        let vals = weight
            .values()
            .iter()
            .zip(base)
            .zip(&exps)
            .map(|((&wt, &b), &e)| if wt == 0.0 || b == 0.0 { 0.0 } else { wt.powf(1.0 / e) * b.abs() })
            .collect();
        (vals, exps)
    };
    [
        weighted(&w.b, grad.values(), 0.0),
        weighted(&w.a, u.values(), 0.0),
        weighted(&w.d, u.values(), 1.0),
        weighted(&w.c, u.values(), -1.0),
    ]
}

/// The weighted four-term norm of `u`.
pub fn e1_norm(ctx: &EnergyContext, u: &ScalarField) -> Result<E1Breakdown> {
    if !ctx.grid().same_as(u.grid()) {
        return Err(Error::GridMismatch);
    }
    u.check_dirichlet()?;
    let qw = ctx.grid().quadrature_weights();
    let mut terms = [0.0; 4];
    for (t, (vals, exps)) in terms.iter_mut().zip(e1_integrands(ctx, u)) {
        let emin = exps.iter().copied().fold(f64::INFINITY, f64::min);
        *t = luxemburg_raw(qw, &vals, &exps, emin, INTERNAL_TOL)?;
    }
    Ok(E1Breakdown {
        term_b: terms[0],
        term_a: terms[1],
        term_d: terms[2],
        term_c: terms[3],
        total: terms.iter().sum(),
    })
}

/// Cheap upper bound on the `E₁` norm from the modulars: a term with modular `m < 1`
/// has norm at most `m^{1/e⁺}`. Returns infinity if some modular reaches 1.
fn e1_upper_bound(ctx: &EnergyContext, u: &ScalarField) -> f64 {
    let qw = ctx.grid().quadrature_weights();
    let mut bound = 0.0;
    for (vals, exps) in e1_integrands(ctx, u) {
        let m = modular_raw(qw, &vals, &exps);
        if m >= 1.0 {
            return f64::INFINITY;
        }
        if m > 0.0 {
            let emax = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            bound += m.powf(1.0 / emax);
        }
    }
    bound
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaEstimate {
    /// `safety_factor × max ratio`
    pub beta: f64,
    pub max_ratio: f64,
    pub safety_factor: f64,
    /// `|u|_{q(x)} / ‖u‖` per sample; `None` for degenerate samples.
    pub ratios: Vec<Option<f64>>,
}

/// Sampled estimate of the embedding constant of `E₁` into `L^{q(x)}`.
pub fn estimate_beta(ctx: &EnergyContext, n_samples: usize, seed: u64, safety_factor: f64) -> Result<BetaEstimate> {
    if n_samples == 0 {
        return Err(Error::OutOfRange("at least one sample is needed".into()));
    }
    if !(safety_factor >= 1.0) {
        return Err(Error::OutOfRange(format!("safety factor {safety_factor} must be at least 1")));
    }
    let family = SineModeFamily::default();
    let mut ratios = Vec::with_capacity(n_samples);
    let mut max_ratio: f64 = 0.0;
    for u in family.fields(ctx.grid(), n_samples, seed) {
        let norm = e1_norm(ctx, &u)?.total;
        if norm == 0.0 {
            ratios.push(None);
            continue;
        }
        let r = luxemburg_norm(&u, ctx.q(), INTERNAL_TOL)? / norm;
        max_ratio = max_ratio.max(r);
        ratios.push(Some(r));
    }
    if max_ratio == 0.0 {
        return Err(Error::DegenerateSamples);
    }
    Ok(BetaEstimate {
        beta: safety_factor * max_ratio,
        max_ratio,
        safety_factor,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Lambda0 {
    pub lambda0: f64,
    pub alpha: f64,
}

/// `λ₀ = ρ^{p⁺+1−q⁻} / (4^{p⁺}(2p⁺+2)) · q⁻ / β^{q⁻}` and `α = ρ^{p⁺+1} / (4^{p⁺}(2p⁺+2))`.
pub fn compute_lambda0(rho: f64, p_plus: f64, q_minus: f64, beta: f64) -> Result<Lambda0> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::OutOfRange(format!("beta = {beta} must be positive")));
    }
    let upper = 1.0f64.min(1.0 / beta);
    if !(rho > 0.0 && rho < upper) {
        return Err(Error::OutOfRange(format!("rho = {rho} must lie in (0, {upper})")));
    }
    if !(p_plus > 2.0 && p_plus.is_finite()) {
        return Err(Error::OutOfRange(format!("p+ = {p_plus} must exceed 2")));
    }
    if !(q_minus > 1.0 && q_minus.is_finite()) {
        return Err(Error::OutOfRange(format!("q- = {q_minus} must exceed 1")));
    }
    let denom = 4f64.powf(p_plus) * (2.0 * p_plus + 2.0);
    Ok(Lambda0 {
        lambda0: rho.powf(p_plus + 1.0 - q_minus) / denom * q_minus / beta.powf(q_minus),
        alpha: rho.powf(p_plus + 1.0) / denom,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySample {
    pub id: usize,
    pub energy: f64,
    pub e1_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub samples: Vec<BoundarySample>,
    pub min_energy: f64,
    /// Sample ids with `I_λ(u) < α`.
    pub violations: Vec<usize>,
    /// `max |‖u‖ − ρ|` over the rescaled samples.
    pub max_rescale_error: f64,
    pub advice: Option<String>,
}

/// Samples the sphere `‖u‖ = ρ` and checks `I_λ(u) ≥ α` there, with `λ` taken from `ctx`.
pub fn check_boundary_bound(ctx: &EnergyContext, rho: f64, alpha: f64, n_samples: usize, seed: u64) -> Result<BoundaryReport> {
    let family = SineModeFamily::default();
    let mut samples = Vec::with_capacity(n_samples);
    let mut violations = Vec::new();
    let mut min_energy = f64::INFINITY;
    let mut max_rescale_error: f64 = 0.0;
    for (id, u) in family.fields(ctx.grid(), n_samples, seed).into_iter().enumerate() {
        let norm = e1_norm(ctx, &u)?.total;
        if norm == 0.0 {
            continue;
        }
        let v = u.scaled(rho / norm);
        let e1 = e1_norm(ctx, &v)?.total;
        max_rescale_error = max_rescale_error.max((e1 - rho).abs());
        let energy = ctx.eval_i(&v)?;
        min_energy = min_energy.min(energy);
        if energy < alpha {
            violations.push(id);
        }
        samples.push(BoundarySample { id, energy, e1_norm: e1 });
    }
    let advice = (!violations.is_empty())
        .then(|| "boundary bound violated: the embedding constant was likely underestimated; re-estimate beta with more samples or a larger safety factor".to_string());
    Ok(BoundaryReport {
        lambda: ctx.lambda(),
        rho,
        alpha,
        samples,
        min_energy,
        violations,
        max_rescale_error,
        advice,
    })
}

#[derive(Debug, Clone)]
pub struct NegativeDirection {
    pub phi: ScalarField,
    pub t_star: f64,
    /// `I_λ(t_star φ)`
    pub energy: f64,
    /// Node at which `φ` is centred.
    pub centre: usize,
}

/// Deepest scan exponent: `t` goes down to `2^-MAX_HALVINGS`.
pub const MAX_HALVINGS: u32 = 40;

/// Smooth bump `φ` with `φ = 1` near a point where `q` is close to its minimum, and the
/// largest `t = 2^{-k}` with `I_λ(tφ) < 0`.
pub fn find_negative_direction(ctx: &EnergyContext, lambda: f64) -> Result<NegativeDirection> {
    let ctx = ctx.with_lambda(lambda)?;
    let grid = ctx.grid().clone();
    let q = ctx.q().values();
    let interior = grid.interior();
    let q_min = interior.iter().map(|&i| q[i]).fold(f64::INFINITY, f64::min);
    let gap = ctx.p().p_minus() - 1.0 - q_min;
    let threshold = if gap > 0.0 { q_min + 0.5 * gap } else { q_min };

    // deepest node of the low-q region
    let depth = |node: usize| {
        let x = grid.coords(node);
        (0..grid.dim())
            .map(|k| (x[k] - grid.lo()[k]).min(grid.hi()[k] - x[k]))
            .fold(f64::INFINITY, f64::min)
    };
    let centre = interior
        .iter()
        .copied()
        .filter(|&i| q[i] <= threshold)
        .fold(None::<(usize, f64)>, |best, i| {
            let d = depth(i);
            match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            }
        })
        .map(|(i, _)| i)
        .ok_or(Error::NoNegativeDirection(0))?;

    let c = grid.coords(centre);
    let radius: Vec<f64> = (0..grid.dim())
        .map(|k| (c[k] - grid.lo()[k]).min(grid.hi()[k] - c[k]))
        .collect();
    let phi = ScalarField::from_fn(grid.clone(), |x| {
        (0..x.len())
            .map(|k| smooth_step(2.0 * (1.0 - (x[k] - c[k]).abs() / radius[k])))
            .product()
    })
    .mask_boundary();

    for k in 0..=MAX_HALVINGS {
        let t = 0.5f64.powi(k as i32);
        let energy = ctx.eval_i(&phi.scaled(t))?;
        if energy < 0.0 {
            return Ok(NegativeDirection {
                phi,
                t_star: t,
                energy,
                centre,
            });
        }
    }
    Err(Error::NoNegativeDirection(MAX_HALVINGS))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Absolute residual tolerance.
    pub tol: f64,
    /// Residual tolerance relative to the dual norm of the source term `λ|u|^{q−2}u`;
    /// both tests must hold to stop.
    pub rel_tol: f64,
    /// Sufficient-decrease constant.
    pub armijo_c: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Line search gives up below this step.
    pub min_step: f64,
    /// Curvature pairs kept by the quasi-Newton model; 0 gives plain Riesz descent.
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-6,
            rel_tol: 1e-4,
            armijo_c: 1e-4,
            backtrack: 0.5,
            min_step: 1e-30,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceEntry {
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub u: ScalarField,
    pub energy: f64,
    pub residual: f64,
    pub e1_norm: f64,
    pub iterations: usize,
    /// Residual reached the tolerance.
    pub converged: bool,
    /// `converged`, negative energy and inside the ball: a nontrivial eigenfunction.
    pub certified: bool,
    pub trace: Vec<TraceEntry>,
    pub diagnostic: Option<String>,
}

/// Rescales onto the closed ball of radius `rho` if needed.
fn project(ctx: &EnergyContext, v: ScalarField, rho: f64) -> Result<(ScalarField, bool)> {
    if e1_upper_bound(ctx, &v) <= rho {
        return Ok((v, false));
    }
    let norm = e1_norm(ctx, &v)?.total;
    if norm > rho {
        Ok((v.scaled(rho / norm), true))
    } else {
        Ok((v, false))
    }
}

/// Curvature pairs of the limited-memory quasi-Newton model, on interior nodes.
struct Memory {
    pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn new(capacity: usize) -> Self {
        Self {
            pairs: std::collections::VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if !(sy > 0.0) || self.capacity == 0 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion with initial operator `γ W⁻¹`; returns `H g`.
    fn apply(&self, g: &[f64], w: &[f64]) -> Vec<f64> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut r = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &r);
            r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= a * yi);
            alphas.push(a);
        }
        let gamma = match self.pairs.back() {
            Some((_, y, rho)) => {
                let ywy: f64 = y.iter().zip(w).map(|(yi, wi)| yi * yi / wi).sum();
                1.0 / (rho * ywy)
            }
            None => 1.0,
        };
        r.iter_mut().zip(w).for_each(|(ri, wi)| *ri *= gamma / wi);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &r);
            r.iter_mut().zip(s).for_each(|(ri, si)| *ri += (a - b) * si);
        }
        r
    }
}

/// Projected descent on `I_λ` over `{‖u‖ ≤ ρ}` with Armijo backtracking.
///
/// Directions come from a limited-memory quasi-Newton model in the quadrature inner
/// product, falling back to the Riesz representative of `−∇I_λ` whenever the model fails
/// to give descent. Trial points are projected onto the ball and accepted only under
/// sufficient decrease, so recorded energies never increase.
pub fn minimize_in_ball(ctx: &EnergyContext, rho: f64, u0: &ScalarField, opts: &SolverOptions) -> Result<EigenResult> {
    if !(rho > 0.0) {
        return Err(Error::OutOfRange(format!("ball radius {rho} must be positive")));
    }
    u0.check_dirichlet()?;
    let grid = ctx.grid().clone();
    let interior = grid.interior().to_vec();
    let w: Vec<f64> = interior.iter().map(|&i| grid.quadrature_weights()[i]).collect();
    let (mut u, _) = project(ctx, u0.clone(), rho)?;
    let mut energy = ctx.eval_i(&u)?;
    let mut grad = ctx.grad_i(&u)?;
    let mut residual = grad.weighted_norm();
    let mut trace = vec![TraceEntry {
        energy,
        residual,
        step: 0.0,
    }];
    let mut memory = Memory::new(opts.memory);
    let mut iterations = 0;
    let mut diagnostic = None;

    let stationary = |u: &ScalarField, grad: &DualVector, residual: f64| -> Result<bool> {
        if residual > opts.tol {
            return Ok(false);
        }
        let source = grad.sub(&ctx.grad_t(u)?).weighted_norm();
        Ok(residual <= opts.rel_tol * source)
    };
    let mut done = stationary(&u, &grad, residual)?;
    while !done && iterations < opts.max_iters {
        let mut h_g = memory.apply(grad.values(), &w);
        let mut slope = -grad.values().iter().zip(&h_g).map(|(a, b)| a * b).sum::<f64>();
        if !(slope < 0.0) {
            memory = Memory::new(opts.memory);
            h_g = memory.apply(grad.values(), &w);
            slope = -grad.values().iter().zip(&h_g).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut dir = ScalarField::zeros(grid.clone());
        for (&node, d) in interior.iter().zip(&h_g) {
            dir.values_mut()[node] = -d;
        }
        // first step of a fresh model moves each node by at most a tenth of the iterate scale
        let mut sigma = if memory.pairs.is_empty() {
            (0.1 * u.max_abs().max(1e-12) / dir.max_abs()).min(1.0)
        } else {
            1.0
        };
        let accepted = loop {
            let (trial, projected) = project(ctx, u.add_scaled(sigma, &dir)?, rho)?;
            let e = ctx.eval_i(&trial)?;
            let decrease = if projected {
                grad.pairing(&trial.add_scaled(-1.0, &u)?)
            } else {
                sigma * slope
            };
            if e <= energy + opts.armijo_c * decrease && e <= energy {
                break Some((trial, e));
            }
            sigma *= opts.backtrack;
            if sigma < opts.min_step {
                break None;
            }
        };
        let Some((next, e_next)) = accepted else {
            if !memory.pairs.is_empty() {
                memory = Memory::new(opts.memory);
                continue;
            }
            diagnostic = Some(format!(
                "line search failed at iteration {iterations}: step fell below {}",
                opts.min_step
            ));
            break;
        };
        let g_next = ctx.grad_i(&next)?;
        let s: Vec<f64> = interior.iter().map(|&i| next.values()[i] - u.values()[i]).collect();
        memory.push(s, g_next.sub(&grad).values().to_vec());

        u = next;
        energy = e_next;
        grad = g_next;
        residual = grad.weighted_norm();
        done = stationary(&u, &grad, residual)?;
        iterations += 1;
        trace.push(TraceEntry {
            energy,
            residual,
            step: sigma,
        });
        if iterations % 1000 == 0 {
            debug!("iteration {iterations}: energy {energy:e} residual {residual:e}");
        }
    }

    let converged = done;
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("reached {} iterations with residual {residual:e}", opts.max_iters));
    }
    let e1 = e1_norm(ctx, &u)?.total;
    let certified = converged && energy < 0.0 && e1 <= rho;
    if converged && !certified && diagnostic.is_none() {
        diagnostic = Some(if energy >= 0.0 {
            "stationary point with nonnegative energy (trivial solution)".into()
        } else {
            "stationary point outside the ball".into()
        });
    }
    Ok(EigenResult {
        lambda: ctx.lambda(),
        u,
        energy,
        residual,
        e1_norm: e1,
        iterations,
        converged,
        certified,
        trace,
        diagnostic,
    })
}

/// Residual of the discrete weak form: the weighted norm of `∇I_λ(u)`.
pub fn eigen_residual(ctx: &EnergyContext, u: &ScalarField, lambda: f64) -> Result<f64> {
    Ok(ctx.with_lambda(lambda)?.grad_i(u)?.weighted_norm())
}

/// Residual recomputed from central differences of the discrete energy, one nodal
/// direction at a time, with step `rel_step·|u_i|` (or `rel_step·max|u|` where `u_i = 0`).
pub fn fd_residual(ctx: &EnergyContext, u: &ScalarField, rel_step: f64) -> Result<f64> {
    let grid = ctx.grid();
    let w = grid.quadrature_weights();
    let fallback = rel_step * u.max_abs().max(f64::MIN_POSITIVE);
    let mut sum = 0.0;
    for &node in grid.interior() {
        let ui = u.values()[node].abs();
        let h = if ui > 0.0 { rel_step * ui } else { fallback };
        let g = ctx.central_difference(u, node, h)?;
        sum += g * g / w[node];
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda0_reference_values() {
        let r = compute_lambda0(0.5, 2.5, 1.2, 1.0).unwrap();
        assert!((r.lambda0 - 1.088e-3).abs() < 5e-7, "{}", r.lambda0);
        assert!((r.alpha - 3.95e-4).abs() < 5e-7, "{}", r.alpha);
    }

    #[test]
    fn lambda0_decreases_in_beta() {
        let a = compute_lambda0(0.4, 2.5, 1.3, 1.0).unwrap();
        let b = compute_lambda0(0.4, 2.5, 1.3, 2.0).unwrap();
        assert!(b.lambda0 < a.lambda0);
        assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn lambda0_rejects_bad_radius() {
        assert!(compute_lambda0(0.6, 2.5, 1.3, 2.0).is_err());
        assert!(compute_lambda0(1.0, 2.5, 1.3, 0.5).is_err());
        assert!(compute_lambda0(0.0, 2.5, 1.3, 0.5).is_err());
        assert!(compute_lambda0(0.5, 2.0, 1.3, 0.5).is_err());
        assert!(compute_lambda0(0.5, 2.5, 1.0, 0.5).is_err());
    }
}
