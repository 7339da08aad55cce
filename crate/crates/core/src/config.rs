//! Run configuration and the problem instance it describes.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::expr::FieldExpression;
use crate::grid::{build_grid, Grid, ScalarField, VectorField};
use crate::spaces::ExponentField;
use crate::weights::{build_weights, validate_a, validate_p, validate_q, AReport, PReport, QReport, SingularSpec, ValidationMode, WeightFields};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: ValidationMode,
    pub domain: DomainConfig,
    pub fields: FieldsConfig,
    pub singular: SingularSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub ckn: CknConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    /// One `[lo, hi]` pair per axis.
    pub extent: Vec<[f64; 2]>,
    /// Nodes per axis.
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    pub a_expr: String,
    pub p_expr: String,
    pub q_expr: String,
}

/// The eigenvalue parameter, either absolute or relative to `λ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LambdaSpec {
    Absolute(f64),
    Fraction(f64),
}

impl LambdaSpec {
    pub fn resolve(self, lambda0: f64) -> f64 {
        match self {
            Self::Absolute(l) => l,
            Self::Fraction(f) => f * lambda0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rho_factor: f64,
    pub lambda: Option<f64>,
    pub lambda_fraction: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub lambda_fractions: Option<Vec<f64>>,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub beta_samples: usize,
    pub safety_factor: f64,
    pub boundary_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho_factor: 0.9,
            lambda: None,
            lambda_fraction: None,
            lambdas: None,
            lambda_fractions: None,
            max_iters: 20_000,
            tol: 1e-6,
            seed: 0,
            beta_samples: 200,
            safety_factor: 2.0,
            boundary_samples: 100,
        }
    }
}

impl SolverConfig {
    /// The single `λ` of a solve run.
    pub fn lambda(&self) -> Result<LambdaSpec> {
        match (self.lambda, self.lambda_fraction) {
            (Some(l), None) => Ok(LambdaSpec::Absolute(l)),
            (None, Some(f)) => Ok(LambdaSpec::Fraction(f)),
            (Some(_), Some(_)) => Err(Error::Config("give either solver.lambda or solver.lambda_fraction, not both".into())),
            (None, None) => Err(Error::Config("solver.lambda or solver.lambda_fraction is required".into())),
        }
    }

    /// The `λ` list of a sweep run.
    pub fn lambda_list(&self) -> Result<Vec<LambdaSpec>> {
        let list = match (&self.lambdas, &self.lambda_fractions) {
            (Some(l), None) => l.iter().map(|&x| LambdaSpec::Absolute(x)).collect(),
            (None, Some(f)) => f.iter().map(|&x| LambdaSpec::Fraction(x)).collect(),
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either solver.lambdas or solver.lambda_fractions, not both".into()))
            }
            (None, None) => return Err(Error::Config("solver.lambdas or solver.lambda_fractions is required".into())),
        };
        if Vec::is_empty(&list) {
            return Err(Error::Config("the lambda list is empty".into()));
        }
        Ok(list)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CknConfig {
    pub samples: usize,
    pub replications: usize,
    /// Parameters of the classical check; run only for constant `p`.
    pub classical: Option<ClassicalConfig>,
}

impl Default for CknConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            replications: 20,
            classical: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    pub a_exp: f64,
    pub b_exp: f64,
    pub bumps: usize,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn check(&self) -> Result<()> {
        let d = &self.domain;
        if d.extent.len() != d.dim || d.n.len() != d.dim {
            return Err(Error::Config(format!(
                "domain.extent and domain.n need {} entries each",
                d.dim
            )));
        }
        if self.singular.x0.len() != d.dim {
            return Err(Error::Config(format!("singular.x0 needs {} coordinates", d.dim)));
        }
        SingularSpec::new(self.singular.x0.clone(), self.singular.r, self.singular.s).map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.solver;
        if !(s.rho_factor > 0.0 && s.rho_factor < 1.0) {
            return Err(Error::Config(format!("solver.rho_factor = {} must lie in (0, 1)", s.rho_factor)));
        }
        if !(s.tol > 0.0) || s.max_iters == 0 || s.beta_samples == 0 {
            return Err(Error::Config("solver.tol, solver.max_iters and solver.beta_samples must be positive".into()));
        }
        if !(s.safety_factor >= 1.0) {
            return Err(Error::Config(format!("solver.safety_factor = {} must be at least 1", s.safety_factor)));
        }
        Ok(())
    }
}

/// Fields sampled from a configuration, before any hypothesis is enforced.
#[derive(Debug, Clone)]
pub struct Instance {
    pub config: RunConfig,
    pub grid: Arc<Grid>,
    pub spec: SingularSpec,
    pub a: ScalarField,
    pub grad_a: VectorField,
    pub p: ExponentField,
    pub grad_p: VectorField,
    pub q: ScalarField,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub a: AReport,
    pub p: PReport,
    pub q: QReport,
    pub passed: bool,
}

impl Instance {
    /// Parses the expressions and samples them with analytic gradients.
    pub fn build(config: &RunConfig) -> Result<Self> {
        let d = &config.domain;
        let extent: Vec<(f64, f64)> = d.extent.iter().map(|e| (e[0], e[1])).collect();
        let grid = build_grid(d.dim, &extent, &d.n)?;
        let spec = SingularSpec::new(config.singular.x0.clone(), config.singular.r, config.singular.s)?;
        let parse = |src: &str| FieldExpression::parse_with_point(src, d.dim, &spec.x0);
        let a_expr = parse(&config.fields.a_expr)?;
        let p_expr = parse(&config.fields.p_expr)?;
        let q_expr = parse(&config.fields.q_expr)?;
        let a = a_expr.eval_on_grid(&grid)?;
        let grad_a = a_expr.grad_on_grid(&grid)?;
        let p = ExponentField::new(p_expr.eval_on_grid(&grid)?)?;
        let grad_p = p_expr.grad_on_grid(&grid)?;
        let q = q_expr.eval_on_grid(&grid)?;
        Ok(Self {
            config: config.clone(),
            grid,
            spec,
            a,
            grad_a,
            p,
            grad_p,
            q,
        })
    }

    pub fn validate(&self, mode: ValidationMode) -> Result<ValidationReport> {
        let a = validate_a(&self.a, &self.grad_a, &self.spec)?;
        let p = validate_p(&self.p, self.grid.dim(), mode);
        let q = validate_q(&self.q, &self.p, &self.spec, self.grid.dim())?;
        let passed = a.passed && p.passed && q.passed;
        Ok(ValidationReport { mode, a, p, q, passed })
    }

    pub fn weights(&self) -> Result<WeightFields> {
        build_weights(&self.a, &self.grad_a, &self.p, &self.grad_p)
    }

    /// Energy context at `λ = 0`.
    pub fn context(&self) -> Result<EnergyContext> {
        let q = ExponentField::new(self.q.clone())?;
        EnergyContext::new(self.weights()?, self.p.clone(), q, 0.0)
    }
}
