//! Objective functions as averages of component losses with evaluable
//! gradients.
//!
//! Every problem is a finite family `f_i`, `i = 0..n-1`, with the full
//! objective `f = (1/n) sum_i f_i`. The simulators only ever query gradients;
//! scalar losses are also provided for the builtin catalog so gradients can be
//! checked against finite differences.

use crate::{Error, Matrix, Result, Vector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A finite-sum objective with component gradients.
///
/// Objectives are immutable after construction and cheap to clone; they can be
/// shared freely across concurrent trajectory workers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Objective {
    name: String,
    dim: usize,
    kind: Kind,
    /// Per-component Lipschitz constants of the gradients, when a global
    /// bound exists (quartics are only locally Lipschitz and store none).
    lipschitz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Kind {
    /// f = x^2 with f_0 = (x-1)^2 - 1, f_1 = (x+1)^2 - 1.
    Quad1d,
    /// f = x^4 + 6x^2 with f_0 = (x-1)^4 - 1, f_1 = (x+1)^4 - 1.
    Quartic1d,
    /// f = 1 - e^{-(x-1)^2} - e^{-(x+1)^2} with f_j = 1 - 2 e^{-(x∓1)^2}.
    DoubleWell,
    /// f_i = (x - c_i)^2 / 2 over n components, d = 1.
    LinQuad { c: Vec<f64> },
    /// f = sum_i c_i x_i^2 / 2 with components f_{0,1} = f ∓ sum_i x_i.
    SepQuad { c: Vec<f64> },
    /// f = sum_i c_i (x_i^4 + 6 x_i^2) / 2 with components
    /// sum_i c_i (x_i ∓ 1)^4 / 2 ∓ 1.
    SepQuartic { c: Vec<f64> },
    /// f = a x^2 / 2, a single component.
    ScaledQuad { a: f64 },
}

/// Parameters accepted by [`builtin_objective`]. Catalog entries ignore the
/// fields they do not use.
#[derive(Debug, Clone, Default)]
pub struct BuiltinParams {
    /// Dimension for the separable nd problems (default 100).
    pub dim: Option<usize>,
    /// Explicit coefficients for `linquad` / separable problems.
    pub coeffs: Option<Vec<f64>>,
    /// Seed used to draw coefficients uniformly from [0, 5] when none are
    /// supplied (recorded so runs are reproducible).
    pub seed: Option<u64>,
    /// Curvature for `scaled-quad`.
    pub a: Option<f64>,
}

/// Construct a catalog problem by name.
///
/// Known names: `quad1d`, `quartic1d`, `doublewell`, `linquad`,
/// `sep-quad-nd`, `sep-quartic-nd`, `scaled-quad`.
pub fn builtin_objective(name: &str, params: &BuiltinParams) -> Result<Objective> {
    let obj = match name {
        "quad1d" => Objective {
            name: name.into(),
            dim: 1,
            kind: Kind::Quad1d,
            lipschitz: Some(vec![2.0, 2.0]),
        },
        "quartic1d" => Objective {
            name: name.into(),
            dim: 1,
            kind: Kind::Quartic1d,
            lipschitz: None,
        },
        "doublewell" => Objective {
            name: name.into(),
            dim: 1,
            // |f_j''| = |4 e^{-u^2} (1 - 2u^2)| <= 4
            kind: Kind::DoubleWell,
            lipschitz: Some(vec![4.0, 4.0]),
        },
        "linquad" => {
            let n = 100usize;
            let c = match &params.coeffs {
                Some(c) => c.clone(),
                None => (1..=n).map(|i| -0.5 + i as f64 / (2 * n) as f64).collect(),
            };
            let l = vec![1.0; c.len()];
            Objective {
                name: name.into(),
                dim: 1,
                kind: Kind::LinQuad { c },
                lipschitz: Some(l),
            }
        }
        "sep-quad-nd" => {
            let c = nd_coeffs(params)?;
            let lmax = c.iter().cloned().fold(0.0, f64::max);
            Objective {
                name: name.into(),
                dim: c.len(),
                kind: Kind::SepQuad { c },
                lipschitz: Some(vec![lmax, lmax]),
            }
        }
        "sep-quartic-nd" => {
            let c = nd_coeffs(params)?;
            Objective {
                name: name.into(),
                dim: c.len(),
                kind: Kind::SepQuartic { c },
                lipschitz: None,
            }
        }
        "scaled-quad" => {
            let a = params.a.unwrap_or(1.0);
            if !(a > 0.0) {
                return Err(Error::Parameter(format!("scaled-quad needs a > 0, got {a}")));
            }
            Objective {
                name: name.into(),
                dim: 1,
                kind: Kind::ScaledQuad { a },
                lipschitz: Some(vec![a]),
            }
        }
        _ => return Err(Error::UnknownObjective(name.into())),
    };
    Ok(obj)
}

fn nd_coeffs(params: &BuiltinParams) -> Result<Vec<f64>> {
    if let Some(c) = &params.coeffs {
        if c.is_empty() {
            return Err(Error::Parameter("empty coefficient vector".into()));
        }
        return Ok(c.clone());
    }
    let d = params.dim.unwrap_or(100);
    if d == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    let mut rng = crate::rng::driver_rng(params.seed.unwrap_or(0));
    Ok((0..d).map(|_| rng.random_range(0.0..5.0)).collect())
}

/// Load coefficients for a custom separable quadratic from a plain-text file,
/// one number per line (blank lines ignored).
pub fn load_coefficients(path: &std::path::Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Parameter(format!("line {}: not a number: {line:?}", lineno + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parameter("coefficient file is empty".into()));
    }
    Ok(out)
}

fn check_finite(x: &Vector) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput)
    }
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of components n.
    pub fn n_components(&self) -> usize {
        match &self.kind {
            Kind::Quad1d | Kind::Quartic1d | Kind::DoubleWell => 2,
            Kind::LinQuad { c } => c.len(),
            Kind::SepQuad { .. } | Kind::SepQuartic { .. } => 2,
            Kind::ScaledQuad { .. } => 1,
        }
    }

    pub fn lipschitz_bounds(&self) -> Option<&[f64]> {
        self.lipschitz.as_deref()
    }

    /// True when every component gradient is affine in x, which makes the
    /// linear-SME covariance law applicable.
    pub fn gradient_linear(&self) -> bool {
        matches!(
            self.kind,
            Kind::Quad1d | Kind::LinQuad { .. } | Kind::SepQuad { .. } | Kind::ScaledQuad { .. }
        )
    }

    /// Coefficient vector, for problems that carry one.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::LinQuad { c } | Kind::SepQuad { c } | Kind::SepQuartic { c } => Some(c),
            _ => None,
        }
    }

    /// ∇f_i(x) written into `out` (0-based component index).
    pub fn grad_component_into(&self, i: usize, x: &Vector, out: &mut Vector) -> Result<()> {
        let n = self.n_components();
        if i >= n {
            return Err(Error::ComponentIndex { index: i, n });
        }
        check_finite(x)?;
        let s = if i == 0 { -1.0 } else { 1.0 }; // shift sign for the ± pairs
        match &self.kind {
            Kind::Quad1d => out[0] = 2.0 * (x[0] + s),
            Kind::Quartic1d => out[0] = 4.0 * (x[0] + s).powi(3),
            Kind::DoubleWell => {
                let u = x[0] + s;
                out[0] = 4.0 * u * (-u * u).exp();
            }
            Kind::LinQuad { c } => out[0] = x[0] - c[i],
            Kind::SepQuad { c } => {
                for j in 0..self.dim {
                    out[j] = c[j] * x[j] + s;
                }
            }
            Kind::SepQuartic { c } => {
                for j in 0..self.dim {
                    out[j] = 2.0 * c[j] * (x[j] + s).powi(3);
                }
            }
            Kind::ScaledQuad { a } => out[0] = a * x[0],
        }
        Ok(())
    }

    /// ∇f_i(x) (0-based component index).
    pub fn grad_component(&self, i: usize, x: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(self.dim);
        self.grad_component_into(i, x, &mut out)?;
        Ok(out)
    }

    /// Full gradient ∇f(x) = (1/n) sum_i ∇f_i(x) written into `out`.
    pub fn grad_full_into(&self, x: &Vector, out: &mut Vector) -> Result<()> {
        check_finite(x)?;
        match &self.kind {
            // closed forms avoid the component loop in hot paths
            Kind::Quad1d => out[0] = 2.0 * x[0],
            Kind::Quartic1d => out[0] = 4.0 * x[0].powi(3) + 12.0 * x[0],
            Kind::DoubleWell => {
                let (u, v) = (x[0] - 1.0, x[0] + 1.0);
                out[0] = 2.0 * u * (-u * u).exp() + 2.0 * v * (-v * v).exp();
            }
            Kind::LinQuad { c } => {
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                out[0] = x[0] - mean;
            }
            Kind::SepQuad { c } => {
                for j in 0..self.dim {
                    out[j] = c[j] * x[j];
                }
            }
            Kind::SepQuartic { c } => {
                for j in 0..self.dim {
                    out[j] = 2.0 * c[j] * (x[j].powi(3) + 3.0 * x[j]);
                }
            }
            Kind::ScaledQuad { a } => out[0] = a * x[0],
        }
        Ok(())
    }

    pub fn grad_full(&self, x: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(self.dim);
        self.grad_full_into(x, &mut out)?;
        Ok(out)
    }

    /// Scalar loss of component i (used by the finite-difference checks and
    /// chart labels).
    pub fn loss_component(&self, i: usize, x: &Vector) -> Result<f64> {
        let n = self.n_components();
        if i >= n {
            return Err(Error::ComponentIndex { index: i, n });
        }
        check_finite(x)?;
        let s = if i == 0 { -1.0 } else { 1.0 };
        Ok(match &self.kind {
            Kind::Quad1d => (x[0] + s).powi(2) - 1.0,
            Kind::Quartic1d => (x[0] + s).powi(4) - 1.0,
            Kind::DoubleWell => 1.0 - 2.0 * (-(x[0] + s).powi(2)).exp(),
            Kind::LinQuad { c } => 0.5 * (x[0] - c[i]).powi(2),
            Kind::SepQuad { c } => {
                let f: f64 = (0..self.dim).map(|j| 0.5 * c[j] * x[j] * x[j]).sum();
                f + s * x.iter().sum::<f64>()
            }
            Kind::SepQuartic { c } => {
                let f: f64 = (0..self.dim).map(|j| 0.5 * c[j] * (x[j] + s).powi(4)).sum();
                f + s
            }
            Kind::ScaledQuad { a } => 0.5 * a * x[0] * x[0],
        })
    }

    /// Full loss f(x) = (1/n) sum_i f_i(x).
    pub fn loss_full(&self, x: &Vector) -> Result<f64> {
        let n = self.n_components();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.loss_component(i, x)?;
        }
        Ok(acc / n as f64)
    }

    /// Conditional gradient-noise covariance at a single point:
    /// (1/n) sum_i (∇f_i(x) - ∇f(x)) (∇f_i(x) - ∇f(x))^T.
    pub fn component_covariance(&self, x: &Vector) -> Result<Matrix> {
        check_finite(x)?;
        let n = self.n_components();
        let mean = self.grad_full(x)?;
        let mut cov = Matrix::zeros(self.dim, self.dim);
        let mut g = Vector::zeros(self.dim);
        for i in 0..n {
            self.grad_component_into(i, x, &mut g)?;
            let dev = &g - &mean;
            cov.syger(1.0 / n as f64, &dev, &dev, 1.0);
        }
        // syger fills the lower triangle; mirror it
        symmetrize_from_lower(&mut cov);
        Ok(cov)
    }

    /// Second moment of component gradients:
    /// (1/n) sum_i ∇f_i(x) ∇f_i(x)^T (used by the covariance evolution laws).
    pub fn gradient_second_moment(&self, x: &Vector) -> Result<Matrix> {
        check_finite(x)?;
        let n = self.n_components();
        let mut m = Matrix::zeros(self.dim, self.dim);
        let mut g = Vector::zeros(self.dim);
        for i in 0..n {
            self.grad_component_into(i, x, &mut g)?;
            m.syger(1.0 / n as f64, &g, &g, 1.0);
        }
        symmetrize_from_lower(&mut m);
        Ok(m)
    }

    /// Linear part of the full gradient applied to `v`: ∇f(v) - ∇f(0).
    /// For affine gradients this is the Hessian-vector product H v.
    pub fn grad_full_linear_part(&self, v: &Vector) -> Result<Vector> {
        let zero = Vector::zeros(self.dim);
        Ok(self.grad_full(v)? - self.grad_full(&zero)?)
    }

    /// Hessian-vector product (∇²f(x)) v. Analytic for every catalog entry;
    /// the caller can fall back to [`Objective::hessian_vec_fd`] otherwise.
    pub fn hessian_vec(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        check_finite(x)?;
        let mut out = Vector::zeros(self.dim);
        match &self.kind {
            Kind::Quad1d => out[0] = 2.0 * v[0],
            Kind::Quartic1d => out[0] = (12.0 * x[0] * x[0] + 12.0) * v[0],
            Kind::DoubleWell => {
                let (u, w) = (x[0] - 1.0, x[0] + 1.0);
                let h = 2.0 * (-u * u).exp() * (1.0 - 2.0 * u * u)
                    + 2.0 * (-w * w).exp() * (1.0 - 2.0 * w * w);
                out[0] = h * v[0];
            }
            Kind::LinQuad { .. } => out[0] = v[0],
            Kind::SepQuad { c } => {
                for j in 0..self.dim {
                    out[j] = c[j] * v[j];
                }
            }
            Kind::SepQuartic { c } => {
                for j in 0..self.dim {
                    out[j] = 6.0 * c[j] * (x[j] * x[j] + 1.0) * v[j];
                }
            }
            Kind::ScaledQuad { a } => out[0] = a * v[0],
        }
        Ok(out)
    }

    /// Central finite-difference Hessian-vector product with step
    /// `1e-5 * (1 + |x|)`, for objectives without an analytic Hessian.
    pub fn hessian_vec_fd(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        let eps = 1e-5 * (1.0 + x.norm());
        let xp = x + v * eps;
        let xm = x - v * eps;
        Ok((self.grad_full(&xp)? - self.grad_full(&xm)?) / (2.0 * eps))
    }
}

fn symmetrize_from_lower(m: &mut Matrix) {
    let d = m.nrows();
    for r in 0..d {
        for c in (r + 1)..d {
            m[(r, c)] = m[(c, r)];
        }
    }
}
