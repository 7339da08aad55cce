//! Variable-exponent Lebesgue machinery on a grid: the modular `∫|u|^{p(x)}`, the
//! Luxemburg norm, the Hölder-type pairing bound and executable forms of the
//! modular/norm comparison properties.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Bisection steps allowed once the root is bracketed.
pub const MAX_BISECTION_STEPS: usize = 200;

/// Tolerance used when a norm feeds another computation rather than being the result.
pub const INTERNAL_TOL: f64 = 1e-13;

/// Slack for the modular/norm comparison checks.
pub const TRICHOTOMY_SLACK: f64 = 1e-9;

/// Exponent field with cached extrema; every value is finite and exceeds 1.
#[derive(Debug, Clone)]
pub struct ExponentField {
    field: ScalarField,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentField {
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some((node, &v)) = field.values().iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidExponent(format!("non-finite value {v} at node {node}")));
        }
        let p_minus = field.min();
        let p_plus = field.max();
        if p_minus <= 1.0 {
            return Err(Error::InvalidExponent(format!("minimum {p_minus} is not above 1")));
        }
        Ok(Self {
            field,
            p_minus,
            p_plus,
        })
    }

    pub fn constant(grid: std::sync::Arc<Grid>, p: f64) -> Result<Self> {
        Self::new(ScalarField::constant(grid, p))
    }

    /// The field `p(x) + delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::new(self.field.map(|p| p + delta))
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &std::sync::Arc<Grid> {
        self.field.grid()
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }
}

fn ensure_grid(u: &ScalarField, p: &ExponentField) -> Result<()> {
    u.ensure_same_grid(p.field())
}

/// `ρ(u) = ∫ |u|^{p(x)} dx`.
pub fn modular(u: &ScalarField, p: &ExponentField) -> Result<f64> {
    ensure_grid(u, p)?;
    Ok(modular_raw(u.grid().quadrature_weights(), u.values(), p.values()))
}

pub(crate) fn modular_raw(weights: &[f64], values: &[f64], exps: &[f64]) -> f64 {
    values
        .iter()
        .zip(exps)
        .zip(weights)
        .map(|((&v, &p), &w)| if v == 0.0 { 0.0 } else { w * v.abs().powf(p) })
        .sum()
}

/// `inf { μ > 0 : ρ(u/μ) ≤ 1 }`, returned once `|ρ(u/μ) − 1| ≤ tol`.
pub fn luxemburg_norm(u: &ScalarField, p: &ExponentField, tol: f64) -> Result<f64> {
    ensure_grid(u, p)?;
    luxemburg_raw(u.grid().quadrature_weights(), u.values(), p.values(), p.p_minus(), tol)
}

/// Luxemburg norm of nodal values against quadrature weights; `p_minus` seeds the bracket.
pub(crate) fn luxemburg_raw(weights: &[f64], values: &[f64], exps: &[f64], p_minus: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance must be positive, got {tol}")));
    }
    // (weight, p, p * ln|u|) for every node that contributes
    let terms: Vec<(f64, f64, f64)> = values
        .iter()
        .zip(exps)
        .zip(weights)
        .filter(|((v, _), w)| **v != 0.0 && **w > 0.0)
        .map(|((&v, &p), &w)| (w, p, p * v.abs().ln()))
        .collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    let rho = |mu: f64| {
        let l = mu.ln();
        terms.iter().map(|&(w, p, pl)| w * (pl - p * l).exp()).sum::<f64>()
    };

    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let measure: f64 = weights.iter().sum();
    let mu0 = max_abs * measure.powf(1.0 / p_minus);

    // lo: rho >= 1, hi: rho <= 1
    let (mut lo, mut hi);
    let r0 = rho(mu0);
    if (r0 - 1.0).abs() <= tol {
        return Ok(mu0);
    }
    if r0 > 1.0 {
        lo = mu0;
        hi = 2.0 * mu0;
        while rho(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
        }
    } else {
        hi = mu0;
        lo = 0.5 * mu0;
        while rho(lo) < 1.0 {
            hi = lo;
            lo *= 0.5;
            if lo == 0.0 {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
        }
    }

    let mut best = (f64::INFINITY, lo);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = rho(mid);
        let res = (r - 1.0).abs();
        if res < best.0 {
            best = (res, mid);
        }
        if res <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_BISECTION_STEPS,
        residual: best.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `|∫uv| ≤ (1/p⁻ + 1/q⁻) |u|_{p(x)} |v|_{q(x)}` for conjugate exponents.
pub fn holder_pairing(u: &ScalarField, v: &ScalarField, p: &ExponentField, q: &ExponentField) -> Result<HolderReport> {
    u.ensure_same_grid(v)?;
    ensure_grid(u, p)?;
    ensure_grid(u, q)?;
    for (node, (&a, &b)) in p.values().iter().zip(q.values()).enumerate() {
        let sum = 1.0 / a + 1.0 / b;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::ConjugacyViolation { node, sum });
        }
    }
    let lhs = u.zip_map(v, |a, b| a * b)?.integrate().abs();
    let rhs = (1.0 / p.p_minus() + 1.0 / q.p_minus())
        * luxemburg_norm(u, p, INTERNAL_TOL)?
        * luxemburg_norm(v, q, INTERNAL_TOL)?;
    Ok(HolderReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-10,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyReport {
    pub norm: f64,
    pub modular: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `|u| − 1` and `ρ(u) − 1` share a sign.
    pub sign_agreement: bool,
    /// `|u| > 1 ⇒ |u|^{p⁻} ≤ ρ ≤ |u|^{p⁺}` (vacuous otherwise).
    pub above_one: bool,
    /// `|u| < 1 ⇒ |u|^{p⁺} ≤ ρ ≤ |u|^{p⁻}` (vacuous otherwise).
    pub below_one: bool,
    pub passed: bool,
}

fn le_slack(a: f64, b: f64, slack: f64) -> bool {
    a <= b + slack * b.abs().max(1.0)
}

/// Executable modular/norm comparison on a single field.
pub fn check_trichotomy(u: &ScalarField, p: &ExponentField) -> Result<TrichotomyReport> {
    let norm = luxemburg_norm(u, p, INTERNAL_TOL)?;
    let rho = modular(u, p)?;
    let (pm, pp) = (p.p_minus(), p.p_plus());
    let (sign_agreement, above_one, below_one) = trichotomy_parts(norm, rho, pm, pp);
    Ok(TrichotomyReport {
        norm,
        modular: rho,
        p_minus: pm,
        p_plus: pp,
        sign_agreement,
        above_one,
        below_one,
        passed: sign_agreement && above_one && below_one,
    })
}

fn trichotomy_parts(norm: f64, rho: f64, pm: f64, pp: f64) -> (bool, bool, bool) {
    let s = TRICHOTOMY_SLACK;
    let sign_agreement = (norm - 1.0) * (rho - 1.0) >= -s;
    let above_one = norm <= 1.0 || (le_slack(norm.powf(pm), rho, s) && le_slack(rho, norm.powf(pp), s));
    let below_one = norm >= 1.0 || (le_slack(norm.powf(pp), rho, s) && le_slack(rho, norm.powf(pm), s));
    (sign_agreement, above_one, below_one)
}

/// Whether a (norm, modular) pair is compatible with exponent bounds `p⁻, p⁺`.
pub fn trichotomy_holds(norm: f64, modular: f64, p_minus: f64, p_plus: f64) -> bool {
    let (a, b, c) = trichotomy_parts(norm, modular, p_minus, p_plus);
    a && b && c
}

#[derive(Debug, Clone, Serialize)]
pub struct ModularConvergenceReport {
    pub norms: Vec<f64>,
    pub modulars: Vec<f64>,
    pub norm_converges: bool,
    pub modular_converges: bool,
    /// Both sequences reach `tol` together, or neither does.
    pub agree: bool,
}

/// Paired sequences `|u_n − u|_{p(x)}` and `ρ(u_n − u)`; a sequence "converges" when its
/// last entry is at most `tol`.
pub fn check_modular_convergence(
    seq: &[ScalarField],
    u: &ScalarField,
    p: &ExponentField,
    tol: f64,
) -> Result<ModularConvergenceReport> {
    let mut norms = Vec::with_capacity(seq.len());
    let mut modulars = Vec::with_capacity(seq.len());
    for un in seq {
        let d = un.add_scaled(-1.0, u)?;
        norms.push(luxemburg_norm(&d, p, INTERNAL_TOL)?);
        modulars.push(modular(&d, p)?);
    }
    let tends = |xs: &[f64]| xs.last().is_some_and(|&x| x <= tol);
    let norm_converges = tends(&norms);
    let modular_converges = tends(&modulars);
    Ok(ModularConvergenceReport {
        norms,
        modulars,
        norm_converges,
        modular_converges,
        agree: norm_converges == modular_converges,
    })
}
