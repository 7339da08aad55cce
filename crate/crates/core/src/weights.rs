//! The potentials `A, B, C, D` built from the coefficient `a(x)` and exponent `p(x)`,
//! and validators for the structural hypotheses on `a`, `p` and `q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::spaces::ExponentField;

/// Location and strength of the degeneracy of `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpec {
    pub x0: Vec<f64>,
    pub r: f64,
    pub s: f64,
}

impl SingularSpec {
    pub fn new(x0: Vec<f64>, r: f64, s: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::OutOfRange(format!("radius r = {r} must be positive")));
        }
        if !(s > 1.0) {
            return Err(Error::OutOfRange(format!("exponent s = {s} must exceed 1")));
        }
        Ok(Self { x0, r, s })
    }

    /// Whether the closed ball `B(x0, r)` lies inside the box of `grid`.
    pub fn ball_inside(&self, grid: &Grid) -> bool {
        self.x0.len() == grid.dim()
            && (0..grid.dim()).all(|k| self.x0[k] - self.r >= grid.lo()[k] && self.x0[k] + self.r <= grid.hi()[k])
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// How hypothesis (P) is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    /// `2 < p(x) < N` everywhere.
    #[default]
    Strict,
    /// Only `p(x) > 2`; low-dimensional runs outside the theory.
    Relaxed,
}

impl std::str::FromStr for ValidationMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "strict" => Ok(Self::Strict),
            "relaxed" => Ok(Self::Relaxed),
            other => Err(format!("unknown mode `{other}` (expected strict or relaxed)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeViolation {
    pub node: usize,
    pub coords: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AReport {
    pub ball_inside_domain: bool,
    pub nonvanishing_violations: Vec<NodeViolation>,
    pub lower_bound_violations: Vec<NodeViolation>,
    pub gradient_finite: bool,
    pub passed: bool,
}

/// Hypothesis (A): `a ≠ 0` away from `x0`, and `|a(x)| ≥ |x − x0|^s` on `B(x0, r)`.
pub fn validate_a(a: &ScalarField, grad_a: &VectorField, spec: &SingularSpec) -> Result<AReport> {
    let grid = a.grid();
    if !grid.same_as(grad_a.grid()) {
        return Err(Error::GridMismatch);
    }
    let centre = grid.nearest_node(&spec.x0);
    let mut nonvanishing = Vec::new();
    let mut lower = Vec::new();
    for (node, &v) in a.values().iter().enumerate() {
        let x = grid.coords(node);
        if node != centre && v == 0.0 {
            nonvanishing.push(NodeViolation {
                node,
                coords: x.clone(),
                reason: "a vanishes away from x0".into(),
            });
        }
        let d = spec.distance(&x);
        if d <= spec.r {
            let bound = d.powf(spec.s);
            if v.abs() < bound * (1.0 - 1e-12) {
                lower.push(NodeViolation {
                    node,
                    coords: x,
                    reason: format!("|a| = {} < |x - x0|^s = {bound}", v.abs()),
                });
            }
        }
    }
    let gradient_finite = grad_a.components().iter().all(|g| g.is_finite());
    let ball_inside_domain = spec.ball_inside(grid);
    Ok(AReport {
        passed: nonvanishing.is_empty() && lower.is_empty() && gradient_finite && ball_inside_domain,
        ball_inside_domain,
        nonvanishing_violations: nonvanishing,
        lower_bound_violations: lower,
        gradient_finite,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PReport {
    pub mode: ValidationMode,
    pub dim: usize,
    pub p_minus: f64,
    pub p_plus: f64,
    /// Nodes with `p ≤ 2`.
    pub lower_violations: Vec<usize>,
    /// Nodes with `p ≥ N`.
    pub upper_violations: Vec<usize>,
    pub strict_pass: bool,
    pub relaxed_pass: bool,
    pub passed: bool,
    pub diagnostic: Option<String>,
}

/// Hypothesis (P): `2 < p(x) < N` (strict) or `p(x) > 2` (relaxed).
pub fn validate_p(p: &ExponentField, dim: usize, mode: ValidationMode) -> PReport {
    let n = dim as f64;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (node, &v) in p.values().iter().enumerate() {
        if v <= 2.0 {
            lower.push(node);
        }
        if v >= n {
            upper.push(node);
        }
    }
    let relaxed_pass = lower.is_empty();
    let strict_pass = relaxed_pass && upper.is_empty();
    let passed = match mode {
        ValidationMode::Strict => strict_pass,
        ValidationMode::Relaxed => relaxed_pass,
    };
    let diagnostic = if dim <= 2 && mode == ValidationMode::Strict {
        Some(format!("(P) infeasible: the window 2 < p(x) < {dim} is empty"))
    } else if !passed {
        Some(format!(
            "(P) violated at {} node(s) (p in [{}, {}])",
            lower.len() + if mode == ValidationMode::Strict { upper.len() } else { 0 },
            p.p_minus(),
            p.p_plus()
        ))
    } else {
        None
    };
    PReport {
        mode,
        dim,
        p_minus: p.p_minus(),
        p_plus: p.p_plus(),
        lower_violations: lower,
        upper_violations: upper,
        strict_pass,
        relaxed_pass,
        passed,
        diagnostic,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub name: String,
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

impl Comparison {
    fn lt(name: &str, left: f64, right: f64) -> Self {
        Self {
            name: name.to_string(),
            left,
            right,
            holds: left < right,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QReport {
    pub q_minus: f64,
    pub q_plus: f64,
    pub min_p_minus_one: f64,
    /// `N p⁻ / (N + s p⁺)`, the embedding exponent bound.
    pub embedding_bound: f64,
    pub chain: Vec<Comparison>,
    /// `p⁻ > 1 + s`
    pub embedding_condition: Comparison,
    pub passed: bool,
}

/// Hypothesis (Q) `1 < q⁻ < min(p − 1) < q⁺ < N p⁻/(N + s p⁺)` plus `p⁻ > 1 + s`.
///
/// `q` is taken as a raw field so that inadmissible exponents (e.g. `q ≡ 1`) can be reported.
pub fn validate_q(q: &ScalarField, p: &ExponentField, spec: &SingularSpec, dim: usize) -> Result<QReport> {
    q.ensure_same_grid(p.field())?;
    let n = dim as f64;
    let q_minus = q.min();
    let q_plus = q.max();
    let min_pm1 = p.p_minus() - 1.0;
    let bound = n * p.p_minus() / (n + spec.s * p.p_plus());
    let chain = vec![
        Comparison::lt("1 < q-", 1.0, q_minus),
        Comparison::lt("q- < min(p - 1)", q_minus, min_pm1),
        Comparison::lt("min(p - 1) < q+", min_pm1, q_plus),
        Comparison::lt("q+ < N p- / (N + s p+)", q_plus, bound),
    ];
    let embedding_condition = Comparison::lt("1 + s < p-", 1.0 + spec.s, p.p_minus());
    let passed = chain.iter().all(|c| c.holds) && embedding_condition.holds;
    Ok(QReport {
        q_minus,
        q_plus,
        min_p_minus_one: min_pm1,
        embedding_bound: bound,
        chain,
        embedding_condition,
        passed,
    })
}

/// The four potentials, all nonnegative.
#[derive(Debug, Clone)]
pub struct WeightFields {
    pub a: ScalarField,
    pub b: ScalarField,
    pub c: ScalarField,
    pub d: ScalarField,
}

/// `A = |a|^{p−1}|∇a|`, `B = |a|^p`, `C = |a|^{p−1}|∇p|`, `D = B|∇p|`, with `0^{positive} = 0`.
pub fn build_weights(
    a: &ScalarField,
    grad_a: &VectorField,
    p: &ExponentField,
    grad_p: &VectorField,
) -> Result<WeightFields> {
    a.ensure_same_grid(p.field())?;
    if !a.grid().same_as(grad_a.grid()) || !a.grid().same_as(grad_p.grid()) {
        return Err(Error::GridMismatch);
    }
    let grad_a = grad_a.magnitude();
    let grad_p = grad_p.magnitude();
    let nodes = a.len();
    let (mut wa, mut wb, mut wc, mut wd) = (
        Vec::with_capacity(nodes),
        Vec::with_capacity(nodes),
        Vec::with_capacity(nodes),
        Vec::with_capacity(nodes),
    );
    for i in 0..nodes {
        let abs_a = a.values()[i].abs();
        let pi = p.values()[i];
        let (pow_m1, pow_p) = if abs_a == 0.0 {
            (0.0, 0.0)
        } else {
            (abs_a.powf(pi - 1.0), abs_a.powf(pi))
        };
        let ga = grad_a.values()[i];
        let gp = grad_p.values()[i];
        wa.push(pow_m1 * ga);
        wb.push(pow_p);
        wc.push(pow_m1 * gp);
        wd.push(pow_p * gp);
    }
    let grid = a.grid().clone();
    Ok(WeightFields {
        a: ScalarField::new(grid.clone(), wa)?,
        b: ScalarField::new(grid.clone(), wb)?,
        c: ScalarField::new(grid.clone(), wc)?,
        d: ScalarField::new(grid, wd)?,
    })
}
