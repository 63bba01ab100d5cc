//! Reference functions, Bregman distances and the exact Bregman subproblem.
//!
//! The catalogue is closed: every supported reference is a strongly convex
//! quadratic with an explicit gradient inverse, which is what makes the
//! search-direction subproblem
//!
//! ```text
//! d = argmin_d <g, d> + D_h(x + d, x)
//! ```
//!
//! solvable in closed form: `d = (∇h)⁻¹(∇h(x) - g) - x`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2};
use crate::problem::BlockProblem;

/// Absolute slack on the sampled relative-smoothness inequality.
pub const RELATIVE_SMOOTHNESS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum ReferenceKind {
    /// `h(x) = ½‖x‖²`.
    Energy,
    /// `h(x) = (c/2)‖x‖²`.
    ScaledEnergy { scale: f64 },
    /// `h(x) = ½ xᵀQx` with `Q` symmetric positive definite.
    WeightedQuadratic {
        q: DMatrix<f64>,
        chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    },
}

/// A block reference function `h_b` with its analysis constants.
#[derive(Debug, Clone)]
pub struct ReferenceFunction {
    kind: ReferenceKind,
    strong_convexity: f64,
    gradient_smoothness: f64,
    relative_smoothness: f64,
    symmetry: f64,
}

impl ReferenceFunction {
    pub fn energy() -> Self {
        Self {
            kind: ReferenceKind::Energy,
            strong_convexity: 1.0,
            gradient_smoothness: 1.0,
            relative_smoothness: 1.0,
            symmetry: 1.0,
        }
    }

    pub fn scaled_energy(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidReference(format!(
                "scaled energy needs a positive finite scale, got {scale}"
            )));
        }
        Ok(Self {
            kind: ReferenceKind::ScaledEnergy { scale },
            strong_convexity: scale,
            gradient_smoothness: scale,
            relative_smoothness: 1.0,
            symmetry: 1.0,
        })
    }

    /// `½ xᵀQx`; `m` and `M` are the extreme eigenvalues of `Q`.
    pub fn weighted_quadratic(q: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() == 0 {
            return Err(Error::InvalidReference(format!(
                "Q must be square and nonempty, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidReference("Q has non-finite entries".into()));
        }
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidReference(format!(
                "Q is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let eig = nalgebra::SymmetricEigen::new(q.clone());
        let m = eig.eigenvalues.min();
        let big_m = eig.eigenvalues.max();
        if m <= 0.0 {
            return Err(Error::InvalidReference(format!(
                "Q is not positive definite (smallest eigenvalue {m:e})"
            )));
        }
        let chol = nalgebra::Cholesky::new(q.clone())
            .ok_or_else(|| Error::InvalidReference("Cholesky factorization failed".into()))?;
        Ok(Self {
            kind: ReferenceKind::WeightedQuadratic { q, chol },
            strong_convexity: m,
            gradient_smoothness: big_m,
            relative_smoothness: 1.0,
            symmetry: 1.0,
        })
    }

    /// Sets the relative-smoothness constant `L_b` of `(f_b, h_b)`.
    pub fn with_relative_smoothness(mut self, l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidReference(format!(
                "relative smoothness constant must be positive, got {l}"
            )));
        }
        self.relative_smoothness = l;
        Ok(self)
    }

    pub fn kind(&self) -> &ReferenceKind {
        &self.kind
    }

    /// `m_b`.
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    /// `M_b`.
    pub fn gradient_smoothness(&self) -> f64 {
        self.gradient_smoothness
    }

    /// `L_b`.
    pub fn relative_smoothness(&self) -> f64 {
        self.relative_smoothness
    }

    /// `β(h_b)`.
    pub fn symmetry(&self) -> f64 {
        self.symmetry
    }

    /// True for references whose Bregman projection onto the nonnegative
    /// orthant is the Euclidean one (isotropic quadratics).
    pub fn is_isotropic(&self) -> bool {
        !matches!(self.kind, ReferenceKind::WeightedQuadratic { .. })
    }

    pub fn step_bound(&self) -> StepSizeBound {
        StepSizeBound::new(
            self.strong_convexity,
            self.gradient_smoothness,
            self.relative_smoothness,
            self.symmetry,
        )
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if let ReferenceKind::WeightedQuadratic { q, .. } = &self.kind {
            if q.nrows() != n {
                return Err(Error::dims(format!(
                    "reference is {}-dimensional, vector has {n} entries",
                    q.nrows()
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(match &self.kind {
            ReferenceKind::Energy => 0.5 * dot(x, x),
            ReferenceKind::ScaledEnergy { scale } => 0.5 * scale * dot(x, x),
            ReferenceKind::WeightedQuadratic { q, .. } => {
                let xv = DVector::from_column_slice(x);
                0.5 * xv.dot(&(q * &xv))
            }
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok(match &self.kind {
            ReferenceKind::Energy => x.to_vec(),
            ReferenceKind::ScaledEnergy { scale } => x.iter().map(|v| scale * v).collect(),
            ReferenceKind::WeightedQuadratic { q, .. } => {
                (q * DVector::from_column_slice(x)).as_slice().to_vec()
            }
        })
    }

    /// `(∇h)⁻¹(y)`, i.e. `∇h*(y)`.
    pub fn gradient_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        Ok(match &self.kind {
            ReferenceKind::Energy => y.to_vec(),
            ReferenceKind::ScaledEnergy { scale } => y.iter().map(|v| v / scale).collect(),
            ReferenceKind::WeightedQuadratic { chol, .. } => {
                chol.solve(&DVector::from_column_slice(y)).as_slice().to_vec()
            }
        })
    }

    /// `(u-x)ᵀ ∇²h (u-x) / 2`, the exact Bregman distance of a quadratic.
    fn quadratic_form_of_difference(&self, u: &[f64], x: &[f64]) -> f64 {
        let diff: Vec<f64> = u.iter().zip(x).map(|(a, b)| a - b).collect();
        match &self.kind {
            ReferenceKind::Energy => 0.5 * dot(&diff, &diff),
            ReferenceKind::ScaledEnergy { scale } => 0.5 * scale * dot(&diff, &diff),
            ReferenceKind::WeightedQuadratic { q, .. } => {
                let dv = DVector::from_vec(diff);
                0.5 * dv.dot(&(q * &dv))
            }
        }
    }
}

/// `α* = (1+β)m / (2LM)`, the stepsize maximizing the guaranteed decrease.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepSizeBound {
    pub alpha_star: f64,
    pub m: f64,
    pub big_m: f64,
    pub l: f64,
    pub beta: f64,
}

impl StepSizeBound {
    pub fn new(m: f64, big_m: f64, l: f64, beta: f64) -> Self {
        Self {
            alpha_star: (1.0 + beta) * m / (2.0 * l * big_m),
            m,
            big_m,
            l,
            beta,
        }
    }
}

/// `D_h(u, x) = h(u) - h(x) - <∇h(x), u - x>`.
pub fn bregman_distance(h: &ReferenceFunction, u: &[f64], x: &[f64]) -> Result<f64> {
    if u.len() != x.len() {
        return Err(Error::dims(format!(
            "u has {} entries, x has {}",
            u.len(),
            x.len()
        )));
    }
    h.check_dim(u.len())?;
    Ok(h.quadratic_form_of_difference(u, x))
}

/// Exact minimizer of `<g, d> + D_h(x + d, x)`.
pub fn bregman_step(h: &ReferenceFunction, x_b: &[f64], g_b: &[f64]) -> Result<Vec<f64>> {
    if x_b.len() != g_b.len() {
        return Err(Error::dims(format!(
            "block has {} entries, gradient has {}",
            x_b.len(),
            g_b.len()
        )));
    }
    h.check_dim(x_b.len())?;
    // For quadratics (∇h)⁻¹(∇h(x) - g) - x collapses to -(∇²h)⁻¹ g; the
    // collapsed form is evaluated so that Energy yields -g exactly.
    Ok(match &h.kind {
        ReferenceKind::Energy => g_b.iter().map(|g| -g).collect(),
        ReferenceKind::ScaledEnergy { scale } => g_b.iter().map(|g| -g / scale).collect(),
        ReferenceKind::WeightedQuadratic { chol, .. } => {
            let sol = chol.solve(&DVector::from_column_slice(g_b));
            sol.iter().map(|v| -v).collect()
        }
    })
}

/// Outcome of a sampled relative-smoothness test.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeSmoothnessReport {
    pub holds: bool,
    pub samples: usize,
    pub violations: usize,
    /// Largest `|remainder| / (L·D_h)` seen.
    pub worst_ratio: f64,
    /// Largest `|remainder| - L·D_h` seen.
    pub worst_excess: f64,
}

/// Samples pairs `(x, y)` that differ only in block `b` and tests
/// `|f(y) - f(x) - <∇_b f(x), y_b - x_b>| <= L·D_h(y_b, x_b) + 1e-9`.
pub fn relative_smoothness_check<P: BlockProblem + ?Sized>(
    problem: &P,
    b: usize,
    l: f64,
    samples: usize,
    rng_seed: u64,
) -> Result<RelativeSmoothnessReport> {
    if !(l > 0.0) {
        return Err(Error::invalid(format!("L must be positive, got {l}")));
    }
    let partition = problem.partition();
    if b >= partition.block_count() {
        return Err(Error::InvalidBlock {
            block: b,
            reason: format!("only {} blocks", partition.block_count()),
        });
    }
    let range = partition.range(b);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut report = RelativeSmoothnessReport {
        holds: true,
        samples,
        violations: 0,
        worst_ratio: 0.0,
        worst_excess: f64::NEG_INFINITY,
    };
    for _ in 0..samples {
        let x = problem.sample_feasible(&mut rng);
        let mut y = x.clone();
        for v in &mut y[range.clone()] {
            *v = rng.gen::<f64>();
        }
        let h = match problem.reference(&x, b) {
            Ok(h) => h,
            // an invalid reference (e.g. a zero NMF column) says nothing here
            Err(Error::InvalidBlock { .. }) => continue,
            Err(e) => return Err(e),
        };
        let g = problem.partial_gradient(&x, b);
        let step: Vec<f64> = y[range.clone()]
            .iter()
            .zip(&x[range.clone()])
            .map(|(a, c)| a - c)
            .collect();
        let remainder = problem.objective(&y) - problem.objective(&x) - dot(&g, &step);
        let dist = bregman_distance(&h, &y[range.clone()], &x[range.clone()])?;
        let excess = remainder.abs() - l * dist;
        if excess > RELATIVE_SMOOTHNESS_SLACK {
            report.violations += 1;
            report.holds = false;
        }
        report.worst_excess = report.worst_excess.max(excess);
        if dist > 0.0 {
            report.worst_ratio = report.worst_ratio.max(remainder.abs() / (l * dist));
        }
    }
    Ok(report)
}

/// Estimate of `β(h) = inf D_h(x,y)/D_h(y,x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryEstimate {
    pub value: f64,
    /// `true` when the value is known in closed form; `false` when it is a
    /// sampled lower-bound heuristic.
    pub exact: bool,
}

/// Quadratic references are symmetric, so every supported kind returns the
/// exact value 1; [`sampled_symmetry_ratio`] is the sampling estimator.
pub fn symmetric_coefficient_estimate(
    h: &ReferenceFunction,
    samples: usize,
    rng_seed: u64,
) -> SymmetryEstimate {
    match h.kind {
        ReferenceKind::Energy
        | ReferenceKind::ScaledEnergy { .. }
        | ReferenceKind::WeightedQuadratic { .. } => {
            let _ = (samples, rng_seed);
            SymmetryEstimate {
                value: 1.0,
                exact: true,
            }
        }
    }
}

/// Minimum of `D_h(x,y)/D_h(y,x)` over `samples` random pairs in `[0,1]^dim`,
/// with both distances evaluated from the definition.
pub fn sampled_symmetry_ratio(
    h: &ReferenceFunction,
    dim: usize,
    samples: usize,
    rng_seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let dxy = definition_distance(h, &x, &y)?;
        let dyx = definition_distance(h, &y, &x)?;
        if dyx > 0.0 {
            best = best.min(dxy / dyx);
        }
    }
    Ok(best)
}

fn definition_distance(h: &ReferenceFunction, u: &[f64], x: &[f64]) -> Result<f64> {
    let grad = h.gradient(x)?;
    let diff: Vec<f64> = u.iter().zip(x).map(|(a, b)| a - b).collect();
    Ok(h.value(u)? - h.value(x)? - dot(&grad, &diff))
}

/// `‖g + ∇h(x + d) - ∇h(x)‖`, the first-order residual of the subproblem.
pub fn subproblem_stationarity_residual(
    h: &ReferenceFunction,
    x_b: &[f64],
    g_b: &[f64],
    d_b: &[f64],
) -> Result<f64> {
    let moved: Vec<f64> = x_b.iter().zip(d_b).map(|(a, b)| a + b).collect();
    let gm = h.gradient(&moved)?;
    let gx = h.gradient(x_b)?;
    let r: Vec<f64> = g_b
        .iter()
        .zip(gm.iter().zip(&gx))
        .map(|(g, (a, b))| g + a - b)
        .collect();
    Ok(norm2(&r))
}
