//! Local cost models: proximal operators, gradients and local minimizers.
//!
//! The tracking costs are `(1/q)|y - u|^q` plus an optional constraint:
//! `q = 2` unconstrained (average), `q = 2` with `y >= u` (maximum) and
//! `q = 1` unconstrained (median). Their proxes are closed-form. The
//! learning cost is a ridge-regularized logistic loss whose prox and
//! minimizer come from accelerated gradient descent.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Inner solver tolerance on the gradient norm.
pub const INNER_TOL: f64 = 1e-10;
pub const INNER_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    ConsensusAvg { u: f64 },
    ConsensusMax { u: f64 },
    ConsensusMedian { u: f64 },
    LogisticRidge(LogisticRidge),
}

/// `f(y) = (1/m) sum_h log(1 + exp(-b_h a_h^T y)) + (ridge/2) |y|^2`.
///
/// With no samples the loss term vanishes and only the ridge remains.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRidge {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    ridge: f64,
    dim: usize,
    smoothness: f64,
}

impl LogisticRidge {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>, ridge: f64, dim: usize) -> Result<Self> {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge must be positive (got {ridge})")));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("logistic dimension must be at least 1".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        if let Some(bad) = features.iter().find(|a| a.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        if labels.iter().any(|b| *b != 1.0 && *b != -1.0) {
            return Err(Error::InvalidConfig("logistic labels must be +1 or -1".into()));
        }
        let m = features.len().max(1) as f64;
        let sq: f64 = features.iter().map(|a| dot(a, a)).sum();
        Ok(Self { smoothness: ridge + sq / (4.0 * m), features, labels, ridge, dim })
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Upper bound on the Lipschitz constant of the gradient.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Writes the gradient at `y` into `grad`.
    pub(crate) fn gradient_into(&self, y: &[f64], grad: &mut [f64]) {
        for (g, yi) in grad.iter_mut().zip(y) {
            *g = self.ridge * yi;
        }
        let m = self.labels.len();
        if m > 0 {
            let inv_m = 1.0 / m as f64;
            for (a, b) in self.features.iter().zip(&self.labels) {
                let coef = -b * sigmoid(-b * dot(a, y)) * inv_m;
                for (g, ai) in grad.iter_mut().zip(a) {
                    *g += coef * ai;
                }
            }
        }
    }

    fn value(&self, y: &[f64]) -> f64 {
        let m = self.labels.len();
        let loss = if m == 0 {
            0.0
        } else {
            self.features.iter().zip(&self.labels).map(|(a, b)| softplus(-b * dot(a, y))).sum::<f64>() / m as f64
        };
        loss + 0.5 * self.ridge * dot(y, y)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(y, &mut g);
        g
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl CostModel {
    pub fn dim(&self) -> usize {
        match self {
            CostModel::LogisticRidge(l) => l.dim,
            _ => 1,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, CostModel::ConsensusAvg { .. } | CostModel::LogisticRidge(_))
    }

    /// Reference signal of the tracking costs.
    pub fn signal(&self) -> Option<f64> {
        match self {
            CostModel::ConsensusAvg { u } | CostModel::ConsensusMax { u } | CostModel::ConsensusMedian { u } => {
                Some(*u)
            }
            CostModel::LogisticRidge(_) => None,
        }
    }

    /// Same cost family with a new reference signal.
    pub fn with_signal(&self, u: f64) -> CostModel {
        match self {
            CostModel::ConsensusAvg { .. } => CostModel::ConsensusAvg { u },
            CostModel::ConsensusMax { .. } => CostModel::ConsensusMax { u },
            CostModel::ConsensusMedian { .. } => CostModel::ConsensusMedian { u },
            other => other.clone(),
        }
    }

    /// Objective value; `+inf` outside the constraint set.
    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            CostModel::ConsensusAvg { u } => 0.5 * (y[0] - u).powi(2),
            CostModel::ConsensusMax { u } => {
                if y[0] >= *u {
                    0.5 * (y[0] - u).powi(2)
                } else {
                    f64::INFINITY
                }
            }
            CostModel::ConsensusMedian { u } => (y[0] - u).abs(),
            CostModel::LogisticRidge(l) => l.value(y),
        }
    }

    /// `argmin_y f(y) + (w/2)|y - v|^2`.
    pub fn prox(&self, v: &[f64], w: f64) -> Result<Vec<f64>> {
        self.prox_from(v, w, None)
    }

    /// Prox with an optional warm start for the iterative variant.
    pub fn prox_from(&self, v: &[f64], w: f64, start: Option<&[f64]>) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        debug_assert!(w > 0.0);
        match self {
            CostModel::ConsensusAvg { u } => Ok(vec![(u + w * v[0]) / (1.0 + w)]),
            CostModel::ConsensusMax { u } => Ok(vec![u.max((u + w * v[0]) / (1.0 + w))]),
            CostModel::ConsensusMedian { u } => {
                let lower = v[0] - 1.0 / w;
                let upper = v[0] + 1.0 / w;
                Ok(vec![u + (lower - u).max(0.0) + (upper - u).min(0.0)])
            }
            CostModel::LogisticRidge(l) => {
                let x0 = start.unwrap_or(v).to_vec();
                accelerated_descent(
                    |y, g| {
                        l.gradient_into(y, g);
                        for ((gi, yi), vi) in g.iter_mut().zip(y).zip(v) {
                            *gi += w * (yi - vi);
                        }
                    },
                    x0,
                    l.smoothness + w,
                    l.ridge + w,
                )
            }
        }
    }

    pub fn local_minimizer(&self) -> Result<Vec<f64>> {
        self.local_minimizer_from(None)
    }

    pub fn local_minimizer_from(&self, start: Option<&[f64]>) -> Result<Vec<f64>> {
        match self {
            CostModel::ConsensusAvg { u } | CostModel::ConsensusMax { u } | CostModel::ConsensusMedian { u } => {
                Ok(vec![*u])
            }
            CostModel::LogisticRidge(l) => {
                let x0 = start.map_or_else(|| vec![0.0; l.dim], <[f64]>::to_vec);
                accelerated_descent(|y, g| l.gradient_into(y, g), x0, l.smoothness, l.ridge)
            }
        }
    }

    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            CostModel::ConsensusAvg { u } => Ok(vec![y[0] - u]),
            CostModel::LogisticRidge(l) => {
                if y.len() != l.dim {
                    return Err(Error::DimensionMismatch { expected: l.dim, got: y.len() });
                }
                Ok(l.gradient(y))
            }
            _ => Err(Error::NonsmoothCost),
        }
    }
}

/// Prox of the min-consensus cost `(1/2)(y-u)^2 + indicator(y <= u)`,
/// obtained from the max variant by sign flip.
pub fn min_consensus_prox(u: f64, v: f64, w: f64) -> f64 {
    -CostModel::ConsensusMax { u: -u }.prox(&[-v], w).expect("scalar")[0]
}

/// Nesterov's method for an `mu`-strongly convex, `lipschitz`-smooth objective
/// with step `1/lipschitz`, momentum reset whenever the gradient points
/// against the last step, and termination at gradient norm [`INNER_TOL`].
///
/// `grad(y, g)` writes the gradient at `y` into `g`.
pub fn accelerated_descent<F>(mut grad: F, x0: Vec<f64>, lipschitz: f64, mu: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let dim = x0.len();
    let step = 1.0 / lipschitz;
    let kappa_root = (lipschitz / mu).sqrt();
    let momentum = (kappa_root - 1.0) / (kappa_root + 1.0);
    let mut g = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];

    let mut x = x0;
    let mut y = x.clone();
    let mut last_norm = f64::INFINITY;

    for _ in 0..INNER_MAX_ITERS {
        grad(&y, &mut g);
        last_norm = norm(&g);
        if last_norm <= INNER_TOL {
            return Ok(y);
        }
        if !last_norm.is_finite() {
            break;
        }
        let mut ascent = 0.0;
        for ((xn, (yi, gi)), xo) in x_new.iter_mut().zip(y.iter().zip(&g)).zip(&x) {
            *xn = yi - step * gi;
            ascent += gi * (*xn - xo);
        }
        let beta = if ascent > 0.0 { 0.0 } else { momentum };
        for ((yi, xn), xo) in y.iter_mut().zip(&x_new).zip(&x) {
            *yi = xn + beta * (xn - xo);
        }
        std::mem::swap(&mut x, &mut x_new);
    }
    Err(Error::SolverStalled { iterations: INNER_MAX_ITERS, residual: last_norm })
}

/// Synthetic binary classification data, one Gaussian cluster per class.
///
/// Class means sit at `±separation/2` along a random unit direction shared by
/// all agents; each agent adds its own mean shift scaled by `heterogeneity`,
/// then unit-variance isotropic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationGenerator {
    pub samples: usize,
    pub dim: usize,
    pub separation: f64,
    pub heterogeneity: f64,
    pub ridge: f64,
    direction: Vec<f64>,
}

impl ClassificationGenerator {
    pub fn new<R: Rng + ?Sized>(
        samples: usize,
        dim: usize,
        separation: f64,
        heterogeneity: f64,
        ridge: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if samples == 0 || dim == 0 {
            return Err(Error::InvalidConfig("classification data needs samples >= 1 and dim >= 1".into()));
        }
        let mut direction: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&direction);
        if n > 0.0 {
            direction.iter_mut().for_each(|d| *d /= n);
        } else {
            direction[0] = 1.0;
        }
        Ok(Self { samples, dim, separation, heterogeneity, ridge, direction })
    }

    pub fn sample_agent<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CostModel> {
        let shift: Vec<f64> =
            (0..self.dim).map(|_| self.heterogeneity * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut features = Vec::with_capacity(self.samples);
        let mut labels = Vec::with_capacity(self.samples);
        for _ in 0..self.samples {
            let b: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let a: Vec<f64> = (0..self.dim)
                .map(|l| {
                    0.5 * b * self.separation * self.direction[l] + shift[l] + rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            features.push(a);
            labels.push(b);
        }
        Ok(CostModel::LogisticRidge(LogisticRidge::new(features, labels, self.ridge, self.dim)?))
    }
}

pub fn make_classification_data<R: Rng + ?Sized>(
    n_agents: usize,
    samples: usize,
    dim: usize,
    separation: f64,
    heterogeneity: f64,
    ridge: f64,
    rng: &mut R,
) -> Result<Vec<CostModel>> {
    let generator = ClassificationGenerator::new(samples, dim, separation, heterogeneity, ridge, rng)?;
    (0..n_agents).map(|_| generator.sample_agent(rng)).collect()
}
