//! The weighted energy `T`, the eigenvalue energy `I_λ = T − λ∫|u|^{q}/q`, and their
//! gradients.
//!
//! Gradients are exact derivatives of the quadrature-discretized functionals with respect
//! to the interior nodal values, so descent and finite-difference checks see one and the
//! same objective.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{discrete_gradient, Grid, ScalarField};
use crate::spaces::ExponentField;
use crate::weights::WeightFields;

#[derive(Debug, Clone)]
pub struct EnergyContext {
    grid: Arc<Grid>,
    weights: Arc<WeightFields>,
    p: ExponentField,
    q: ExponentField,
    lambda: f64,
    /// `|∇u|` is replaced by `sqrt(|∇u|² + ε²)` when positive.
    grad_smoothing: f64,
}

/// Derivative of a discretized functional along interior nodal directions.
#[derive(Debug, Clone)]
pub struct DualVector {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for DualVector {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl DualVector {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior().len() {
            return Err(Error::LengthMismatch {
                expected: grid.interior().len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Interior values, aligned with [`Grid::interior`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `Σ_interior g_i v_i`
    pub fn pairing(&self, v: &ScalarField) -> f64 {
        self.grid
            .interior()
            .iter()
            .zip(&self.values)
            .map(|(&node, g)| g * v.values()[node])
            .sum()
    }

    /// Norm of the discrete Riesz representative: `sqrt(Σ g_i² / w_i)`.
    pub fn weighted_norm(&self) -> f64 {
        let w = self.grid.quadrature_weights();
        self.grid
            .interior()
            .iter()
            .zip(&self.values)
            .map(|(&node, g)| g * g / w[node])
            .sum::<f64>()
            .sqrt()
    }

    /// The field `g_i / w_i` on interior nodes, zero on the boundary.
    pub fn riesz(&self) -> ScalarField {
        let w = self.grid.quadrature_weights();
        let mut out = vec![0.0; self.grid.node_count()];
        for (&node, g) in self.grid.interior().iter().zip(&self.values) {
            out[node] = g / w[node];
        }
        ScalarField::new(self.grid.clone(), out).expect("node count")
    }

    pub fn sub(&self, other: &DualVector) -> DualVector {
        DualVector {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, t: f64) -> DualVector {
        DualVector {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }
}

/// Per-term integrals of `T`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct TTerms {
    /// `∫ B|∇u|^p / p`
    pub gradient: f64,
    /// `∫ A|u|^p / p`
    pub a: f64,
    /// `∫ D|u|^{p+1} / (p+1)`
    pub d: f64,
    /// `∫ C|u|^{p−1} / (p−1)`
    pub c: f64,
}

impl TTerms {
    pub fn total(&self) -> f64 {
        self.gradient + self.a + self.d + self.c
    }
}

#[inline]
fn abs_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(e)
    }
}

/// `|v|^{e−1} sign(v)`, i.e. the derivative of `|v|^e / e`, taken as 0 at 0.
#[inline]
fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e - 1.0)
    }
}

impl EnergyContext {
    pub fn new(weights: WeightFields, p: ExponentField, q: ExponentField, lambda: f64) -> Result<Self> {
        let grid = weights.b.grid().clone();
        for f in [&weights.a, &weights.c, &weights.d, p.field(), q.field()] {
            f.ensure_same_grid(&weights.b)?;
        }
        for (name, f) in [("A", &weights.a), ("B", &weights.b), ("C", &weights.c), ("D", &weights.d)] {
            if f.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::OutOfRange(format!("weight {name} must be finite and nonnegative")));
            }
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::OutOfRange(format!("lambda = {lambda} must be finite and nonnegative")));
        }
        Ok(Self {
            grid,
            weights: Arc::new(weights),
            p,
            q,
            lambda,
            grad_smoothing: 0.0,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::OutOfRange(format!("lambda = {lambda} must be finite and nonnegative")));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    pub fn with_grad_smoothing(mut self, eps: f64) -> Self {
        self.grad_smoothing = eps.max(0.0);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn weights(&self) -> &WeightFields {
        &self.weights
    }

    pub fn p(&self) -> &ExponentField {
        &self.p
    }

    pub fn q(&self) -> &ExponentField {
        &self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if !self.grid.same_as(u.grid()) {
            return Err(Error::GridMismatch);
        }
        u.check_dirichlet()
    }

    /// `|g|` or its smoothed version, and the factor multiplying `g` in the flux.
    #[inline]
    fn grad_energy(&self, g2: f64, p: f64) -> (f64, f64) {
        let eps = self.grad_smoothing;
        if eps > 0.0 {
            let s = g2 + eps * eps;
            ((s.powf(0.5 * p) - eps.powf(p)) / p, s.powf(0.5 * p - 1.0))
        } else if g2 == 0.0 {
            (0.0, 0.0)
        } else {
            (g2.powf(0.5 * p) / p, g2.powf(0.5 * p - 1.0))
        }
    }

    /// Unweighted integrands of `T` at node `i`, given the discrete gradient there.
    fn node_terms(&self, ui: f64, gi: &[f64], i: usize) -> TTerms {
        let wf = &self.weights;
        let p = self.p.values()[i];
        let mut t = TTerms {
            gradient: 0.0,
            a: 0.0,
            d: 0.0,
            c: 0.0,
        };
        let b = wf.b.values()[i];
        if b != 0.0 {
            let g2: f64 = gi.iter().map(|v| v * v).sum();
            t.gradient = b * self.grad_energy(g2, p).0;
        }
        if ui != 0.0 {
            let au = ui.abs();
            let (a, c, d) = (wf.a.values()[i], wf.c.values()[i], wf.d.values()[i]);
            if a != 0.0 {
                t.a = a * au.powf(p) / p;
            }
            if d != 0.0 {
                t.d = d * au.powf(p + 1.0) / (p + 1.0);
            }
            if c != 0.0 {
                t.c = c * au.powf(p - 1.0) / (p - 1.0);
            }
        }
        t
    }

    pub fn t_terms(&self, u: &ScalarField) -> Result<TTerms> {
        self.check(u)?;
        let dim = self.grid.dim();
        let grad = discrete_gradient(u);
        let w = self.grid.quadrature_weights();
        let mut t = TTerms {
            gradient: 0.0,
            a: 0.0,
            d: 0.0,
            c: 0.0,
        };
        for (i, gi) in grad.components().chunks_exact(dim).enumerate() {
            let local = self.node_terms(u.values()[i], gi, i);
            t.gradient += w[i] * local.gradient;
            t.a += w[i] * local.a;
            t.d += w[i] * local.d;
            t.c += w[i] * local.c;
        }
        Ok(t)
    }

    /// Central difference `(I_λ(u + h e) − I_λ(u − h e)) / 2h` along the nodal direction `e`
    /// at an interior node, summing only the quadrature nodes whose integrand changes.
    pub fn central_difference(&self, u: &ScalarField, node: usize, h: f64) -> Result<f64> {
        self.check(u)?;
        if self.grid.is_boundary(node) {
            return Err(Error::BoundaryViolation {
                node,
                value: u.values()[node],
            });
        }
        let w = self.grid.quadrature_weights();
        let mut g = vec![0.0; self.grid.dim()];
        let mut values = u.values().to_vec();
        let mut local = |values: &[f64]| {
            self.grid
                .stencil(node)
                .into_iter()
                .map(|j| {
                    self.grid.gradient_at(values, j, &mut g);
                    let t = self.node_terms(values[j], &g, j).total();
                    let s = abs_pow(values[j], self.q.values()[j]) / self.q.values()[j];
                    w[j] * (t - self.lambda * s)
                })
                .sum::<f64>()
        };
        let centre = values[node];
        values[node] = centre + h;
        let plus = local(&values);
        values[node] = centre - h;
        let minus = local(&values);
        Ok((plus - minus) / (2.0 * h))
    }

    pub fn eval_t(&self, u: &ScalarField) -> Result<f64> {
        Ok(self.t_terms(u)?.total())
    }

    /// `∫ |u|^{q(x)} / q(x)`
    pub fn source_term(&self, u: &ScalarField) -> Result<f64> {
        self.check(u)?;
        let w = self.grid.quadrature_weights();
        Ok(u
            .values()
            .iter()
            .zip(self.q.values())
            .zip(w)
            .map(|((&v, &q), &wi)| wi * abs_pow(v, q) / q)
            .sum())
    }

    pub fn eval_i(&self, u: &ScalarField) -> Result<f64> {
        let t = self.eval_t(u)?;
        if self.lambda == 0.0 {
            return Ok(t);
        }
        Ok(t - self.lambda * self.source_term(u)?)
    }

    fn grad_t_full(&self, u: &ScalarField) -> Vec<f64> {
        let dim = self.grid.dim();
        let grad = discrete_gradient(u);
        let w = self.grid.quadrature_weights();
        let wf = &self.weights;
        let mut flux = vec![0.0; grad.components().len()];
        for (i, gi) in grad.components().chunks_exact(dim).enumerate() {
            let b = wf.b.values()[i];
            if b == 0.0 {
                continue;
            }
            let g2: f64 = gi.iter().map(|v| v * v).sum();
            let factor = w[i] * b * self.grad_energy(g2, self.p.values()[i]).1;
            if factor != 0.0 {
                for k in 0..dim {
                    flux[i * dim + k] = factor * gi[k];
                }
            }
        }
        let mut out = self.grid.gradient_adjoint(&flux);
        for (i, o) in out.iter_mut().enumerate() {
            let ui = u.values()[i];
            if ui == 0.0 {
                continue;
            }
            let p = self.p.values()[i];
            let (a, c, d) = (wf.a.values()[i], wf.c.values()[i], wf.d.values()[i]);
            let mut local = 0.0;
            if a != 0.0 {
                local += a * signed_pow(ui, p);
            }
            if d != 0.0 {
                local += d * signed_pow(ui, p + 1.0);
            }
            if c != 0.0 {
                local += c * signed_pow(ui, p - 1.0);
            }
            *o += w[i] * local;
        }
        out
    }

    fn restrict(&self, full: Vec<f64>) -> DualVector {
        let values = self.grid.interior().iter().map(|&n| full[n]).collect();
        DualVector {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Gradient of the discretized `T` over interior nodes.
    pub fn grad_t(&self, u: &ScalarField) -> Result<DualVector> {
        self.check(u)?;
        Ok(self.restrict(self.grad_t_full(u)))
    }

    /// Gradient of the discretized `I_λ` over interior nodes.
    pub fn grad_i(&self, u: &ScalarField) -> Result<DualVector> {
        self.check(u)?;
        let mut full = self.grad_t_full(u);
        if self.lambda != 0.0 {
            let w = self.grid.quadrature_weights();
            for (i, o) in full.iter_mut().enumerate() {
                let ui = u.values()[i];
                if ui != 0.0 {
                    *o -= self.lambda * w[i] * signed_pow(ui, self.q.values()[i]);
                }
            }
        }
        Ok(self.restrict(full))
    }

    /// `⟨∇T(u) − ∇T(v), u − v⟩`, positive for distinct arguments.
    pub fn monotonicity_gap(&self, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        if u.values() == v.values() {
            return Err(Error::OutOfRange("monotonicity gap needs distinct fields".into()));
        }
        let diff = u.add_scaled(-1.0, v)?;
        Ok(self.grad_t(u)?.sub(&self.grad_t(v)?).pairing(&diff))
    }
}

/// Free-function spellings of the context methods.
pub fn eval_t(ctx: &EnergyContext, u: &ScalarField) -> Result<f64> {
    ctx.eval_t(u)
}

pub fn grad_t(ctx: &EnergyContext, u: &ScalarField) -> Result<DualVector> {
    ctx.grad_t(u)
}

pub fn eval_i(ctx: &EnergyContext, u: &ScalarField) -> Result<f64> {
    ctx.eval_i(u)
}

pub fn grad_i(ctx: &EnergyContext, u: &ScalarField) -> Result<DualVector> {
    ctx.grad_i(u)
}

pub fn monotonicity_gap(ctx: &EnergyContext, u: &ScalarField, v: &ScalarField) -> Result<f64> {
    ctx.monotonicity_gap(u, v)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimonReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `c_p = 2^p` for `p ≥ 2`, `C_p = 1/(p − 1)` below.
    pub constant: f64,
    pub holds: bool,
}

pub const SIMON_SLACK: f64 = 1e-12;

fn vnorm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Pointwise Simon inequality between `|x − y|^p` and the monotonicity pairing of `|·|^{p−2}·`.
pub fn simon_check(x: &[f64], y: &[f64], p: f64) -> Result<SimonReport> {
    if !(p > 1.0) {
        return Err(Error::OutOfRange(format!("Simon inequalities need p > 1, got {p}")));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let (nx, ny) = (vnorm(x), vnorm(y));
    let fx = if nx == 0.0 { 0.0 } else { nx.powf(p - 2.0) };
    let fy = if ny == 0.0 { 0.0 } else { ny.powf(p - 2.0) };
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let pair: f64 = x
        .iter()
        .zip(y)
        .zip(&diff)
        .map(|((a, b), d)| (fx * a - fy * b) * d)
        .sum::<f64>()
        .max(0.0);
    let lhs = abs_pow(vnorm(&diff), p);
    let (constant, rhs) = if p >= 2.0 {
        let cp = 0.5f64.powf(-p);
        (cp, cp * pair)
    } else {
        let cp = 1.0 / (p - 1.0);
        let mass = abs_pow(nx, p) + abs_pow(ny, p);
        let rhs = if pair == 0.0 {
            0.0
        } else {
            cp * pair.powf(0.5 * p) * mass.powf(0.5 * (2.0 - p))
        };
        (cp, rhs)
    };
    Ok(SimonReport {
        lhs,
        rhs,
        constant,
        holds: lhs <= rhs + SIMON_SLACK * rhs.max(1.0),
    })
}
