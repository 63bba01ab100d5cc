//! Optimality measures: projected gradient, generalized gradient, relative
//! residual and the stationarity certificates.

use serde::{Deserialize, Serialize};

use crate::block::{BlockPartition, BlockedIterate};
use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, DenseMatrix};
use crate::problem::BlockProblem;
use crate::solvers::selection::is_valid_coordinate;

/// `∇ᴾf(x)_i = g_i` where `x_i > 0` and `min(0, g_i)` where `x_i = 0`.
pub fn projected_gradient(x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    if x.len() != g.len() {
        return Err(Error::dims(format!("x has {} entries, g has {}", x.len(), g.len())));
    }
    Ok(x.iter().zip(g).map(|(&xi, &gi)| projected_component(xi, gi)).collect())
}

#[inline]
fn projected_component(x: f64, g: f64) -> f64 {
    if x > 0.0 {
        g
    } else {
        g.min(0.0)
    }
}

pub(crate) fn projected_gradient_norm_sq(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            let p = projected_component(xi, gi);
            p * p
        })
        .sum()
}

/// `G(x) = (x - [x - αg]₊)/α`.
pub fn generalized_gradient(x: &[f64], g: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if x.len() != g.len() {
        return Err(Error::dims(format!("x has {} entries, g has {}", x.len(), g.len())));
    }
    Ok(x.iter()
        .zip(g)
        .map(|(&xi, &gi)| (xi - (xi - alpha * gi).max(0.0)) / alpha)
        .collect())
}

/// `‖A - UVᵀ‖_F / ‖A‖_F`.
pub fn relative_residual(a: &DataMatrix, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    let (m, n) = a.shape();
    if u.rows() != m || v.rows() != n || u.cols() != v.cols() {
        return Err(Error::dims(format!(
            "A is {m}x{n}, U is {}x{}, V is {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let norm_a = a.frobenius_norm();
    if norm_a == 0.0 {
        return Err(Error::invalid("relative residual of a zero data matrix"));
    }
    let approx = u.mul_transpose(v)?;
    Ok(a.to_dense().sub(&approx)?.frobenius_norm() / norm_a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub proj_grad: Vec<f64>,
    pub proj_grad_norm: f64,
    /// `‖∇ᴾf(x)‖ / ‖∇ᴾf(x⁰)‖`; equals `proj_grad_norm` when no reference
    /// norm is given and 0 when the reference norm is 0.
    pub rel_proj_grad: f64,
    pub per_block_norms: Vec<f64>,
}

impl OptimalityReport {
    pub fn new(x: &[f64], g: &[f64], partition: &BlockPartition, initial_norm: Option<f64>) -> Result<Self> {
        if partition.dim() != x.len() {
            return Err(Error::dims("partition does not match the iterate"));
        }
        let proj_grad = projected_gradient(x, g)?;
        let per_block_norms = partition
            .ranges()
            .iter()
            .map(|r| proj_grad[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let proj_grad_norm = proj_grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_proj_grad = match initial_norm {
            Some(n0) if n0 > 0.0 => proj_grad_norm / n0,
            Some(_) => 0.0,
            None => proj_grad_norm,
        };
        Ok(Self {
            proj_grad,
            proj_grad_norm,
            rel_proj_grad,
            per_block_norms,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.proj_grad_norm == 0.0
    }
}

/// Stepsizes probed by the fixed-point certificate.
pub const PROBE_STEPSIZES: [f64; 3] = [0.1, 1.0, 10.0];

/// The three computable stationarity certificates at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificates {
    /// `‖∇ᴾf(x)‖`.
    pub proj_grad_norm: f64,
    /// `max_b ‖d_b‖` over valid blocks (invalid coordinates removed).
    pub max_direction_norm: f64,
    /// `max_α ‖x(α) - x‖` over [`PROBE_STEPSIZES`].
    pub max_displacement: f64,
    pub tol: f64,
}

impl StationarityCertificates {
    pub fn projected_gradient_small(&self) -> bool {
        self.proj_grad_norm <= self.tol
    }

    pub fn directions_small(&self) -> bool {
        self.max_direction_norm <= self.tol
    }

    pub fn fixed_point(&self) -> bool {
        self.max_displacement <= self.tol
    }

    /// All three certificates give the same verdict.
    pub fn agree(&self) -> bool {
        let a = self.projected_gradient_small();
        a == self.directions_small() && a == self.fixed_point()
    }

    pub fn stationary(&self) -> bool {
        self.agree() && self.projected_gradient_small()
    }
}

/// Evaluates the projected-gradient, search-direction and fixed-point
/// certificates of stationarity at `x`.
pub fn stationarity_equivalence_check<P: BlockProblem + ?Sized>(
    problem: &P,
    x: &BlockedIterate,
    tol: f64,
) -> Result<StationarityCertificates> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let session = problem.session(x.clone())?;
    let g = session.gradient();
    let xv = x.values();
    let partition = x.partition();

    let mut d = vec![0.0; xv.len()];
    let mut max_direction_norm: f64 = 0.0;
    for b in 0..partition.block_count() {
        let r = partition.range(b);
        let valid = xv[r.clone()]
            .iter()
            .zip(&g[r.clone()])
            .any(|(&xi, &gi)| is_valid_coordinate(xi, gi));
        if !valid || !session.block_admissible(b) {
            continue;
        }
        let raw = session.direction(b)?;
        let mut sq = 0.0;
        for (k, i) in r.enumerate() {
            if is_valid_coordinate(xv[i], g[i]) {
                d[i] = raw[k];
                sq += raw[k] * raw[k];
            }
        }
        max_direction_norm = max_direction_norm.max(sq.sqrt());
    }

    let max_displacement = PROBE_STEPSIZES
        .iter()
        .map(|&alpha| {
            xv.iter()
                .zip(&d)
                .map(|(&xi, &di)| {
                    let moved = (xi + alpha * di).max(0.0) - xi;
                    moved * moved
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);

    Ok(StationarityCertificates {
        proj_grad_norm: projected_gradient_norm_sq(xv, &g).sqrt(),
        max_direction_norm,
        max_displacement,
        tol,
    })
}
