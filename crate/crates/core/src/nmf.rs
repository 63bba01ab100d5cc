//! Nonnegative matrix factorization `min ½‖A - UVᵀ‖²_F` over `U, V >= 0` as a
//! block problem with one block per column of `U` and of `V`.
//!
//! The variable is flattened as the `R` columns of `U` (each of length `M`)
//! followed by the `R` columns of `V` (each of length `N`), so block `c < R`
//! is `u_c` and block `R + c` is `v_c`.
//!
//! For a `V` block the subfunction `f_b(v) = ½‖Ā - u vᵀ‖²` with
//! `Ā = A - Σ_{d≠c} u_d v_dᵀ` is paired with `h_b(v) = (c/2)‖v‖²`,
//! `c = uᵀu`; the two have equal Hessians, so `L_b = 1` and the search
//! direction is `d = Āᵀu/c - v`. `U` blocks are symmetric.

use std::cell::Cell;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::block::{BlockPartition, BlockedIterate};
use crate::bregman::ReferenceFunction;
use crate::error::{Error, Result};
use crate::matrix::{dot, sum_sq_compensated, DataMatrix, DenseMatrix};
use crate::metrics::OptimalityReport;
use crate::problem::{BlockProblem, Session};
use crate::solvers::selection::is_valid_coordinate;

/// Columns with squared norm at or below this are treated as zero.
pub const ZERO_NORM_GUARD: f64 = 1e-30;

/// Block updates between full recomputations of the maintained quantities.
pub const REFRESH_INTERVAL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    U,
    V,
}

/// How an [`NmfState`] keeps its derived quantities current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NmfBackend {
    /// Dense residual `E = A - UVᵀ` and cached gradients (default for dense `A`).
    Residual,
    /// `AV`, `AᵀU`, `UᵀU`, `VᵀV` without densifying `A` (default for sparse `A`).
    Gram,
}

#[derive(Debug, Clone)]
pub struct NmfProblem {
    a: DataMatrix,
    rank: usize,
    m: usize,
    n: usize,
    a_norm: f64,
    a_norm_sq: f64,
    partition: BlockPartition,
    backend: NmfBackend,
}

impl NmfProblem {
    pub fn new(a: impl Into<DataMatrix>, rank: usize) -> Result<Self> {
        let a = a.into();
        let (m, n) = a.shape();
        if rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if rank > m.min(n) {
            return Err(Error::invalid(format!("rank {rank} exceeds min({m}, {n})")));
        }
        if !a.is_nonnegative() {
            return Err(Error::invalid("data matrix has a negative entry"));
        }
        let mut sizes = vec![m; rank];
        sizes.extend(std::iter::repeat_n(n, rank));
        let backend = match a {
            DataMatrix::Dense(_) => NmfBackend::Residual,
            DataMatrix::Sparse(_) => NmfBackend::Gram,
        };
        let a_norm_sq = match &a {
            DataMatrix::Dense(d) => sum_sq_compensated(d.data()),
            DataMatrix::Sparse(s) => {
                let vals: Vec<f64> = s.entries().map(|(_, _, v)| v).collect();
                sum_sq_compensated(&vals)
            }
        };
        Ok(Self {
            a_norm: a_norm_sq.sqrt(),
            a_norm_sq,
            a,
            rank,
            m,
            n,
            partition: BlockPartition::from_sizes(&sizes)?,
            backend,
        })
    }

    pub fn with_backend(mut self, backend: NmfBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn backend(&self) -> NmfBackend {
        self.backend
    }

    pub fn data(&self) -> &DataMatrix {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(M, N)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn data_norm(&self) -> f64 {
        self.a_norm
    }

    /// Which factor column block `b` is.
    pub fn block_factor(&self, b: usize) -> (Factor, usize) {
        if b < self.rank {
            (Factor::U, b)
        } else {
            (Factor::V, b - self.rank)
        }
    }

    pub fn block_index(&self, factor: Factor, col: usize) -> usize {
        match factor {
            Factor::U => col,
            Factor::V => self.rank + col,
        }
    }

    fn u_col<'x>(&self, x: &'x [f64], c: usize) -> &'x [f64] {
        &x[c * self.m..(c + 1) * self.m]
    }

    fn v_col<'x>(&self, x: &'x [f64], c: usize) -> &'x [f64] {
        let off = self.rank * self.m + c * self.n;
        &x[off..off + self.n]
    }

    fn factor_col<'x>(&self, x: &'x [f64], factor: Factor, c: usize) -> &'x [f64] {
        match factor {
            Factor::U => self.u_col(x, c),
            Factor::V => self.v_col(x, c),
        }
    }

    /// The block's own column and the partner column it is paired with.
    fn block_columns<'x>(&self, x: &'x [f64], b: usize) -> (&'x [f64], &'x [f64]) {
        match self.block_factor(b) {
            (Factor::U, c) => (self.u_col(x, c), self.v_col(x, c)),
            (Factor::V, c) => (self.v_col(x, c), self.u_col(x, c)),
        }
    }

    /// Flattens `U` (`M×R`) and `V` (`N×R`) into the block variable.
    pub fn flatten(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<BlockedIterate> {
        if u.shape() != (self.m, self.rank) || v.shape() != (self.n, self.rank) {
            return Err(Error::dims(format!(
                "expected U {}x{} and V {}x{}, got {:?} and {:?}",
                self.m,
                self.rank,
                self.n,
                self.rank,
                u.shape(),
                v.shape()
            )));
        }
        let mut x = u.to_col_major();
        x.extend(v.to_col_major());
        BlockedIterate::new(x, self.partition.clone())
    }

    /// `(U, V)` from a flattened variable.
    pub fn unflatten(&self, x: &[f64]) -> Result<(DenseMatrix, DenseMatrix)> {
        if x.len() != self.partition.dim() {
            return Err(Error::dims("iterate length does not match the problem"));
        }
        let split = self.m * self.rank;
        Ok((
            DenseMatrix::from_col_major(self.m, self.rank, &x[..split])?,
            DenseMatrix::from_col_major(self.n, self.rank, &x[split..])?,
        ))
    }

    /// Entries uniform on `[0, 1]`.
    pub fn random_iterate(&self, rng: &mut dyn RngCore) -> BlockedIterate {
        let x = (0..self.partition.dim()).map(|_| rng.gen::<f64>()).collect();
        BlockedIterate::new(x, self.partition.clone()).expect("uniform entries are feasible")
    }

    pub fn state(&self, x: BlockedIterate) -> Result<NmfState<'_>> {
        NmfState::new(self, x)
    }

    pub fn state_from_factors(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<NmfState<'_>> {
        self.state(self.flatten(u, v)?)
    }

    /// `A - UVᵀ` computed from scratch.
    fn residual_from_scratch(&self, x: &[f64]) -> DenseMatrix {
        let mut e = self.a.to_dense();
        let neg: Vec<Vec<f64>> = (0..self.rank).map(|c| self.v_col(x, c).iter().map(|v| -v).collect()).collect();
        for c in 0..self.rank {
            e.add_outer(self.u_col(x, c), &neg[c]).expect("shapes fixed by the problem");
        }
        e
    }

    /// `Āᵀu_c` (V block) or `Ā v_c` (U block) from `A` and the factors.
    fn deflated_product(&self, x: &[f64], b: usize) -> Vec<f64> {
        let (factor, c) = self.block_factor(b);
        let partner = match factor {
            Factor::U => Factor::V,
            Factor::V => Factor::U,
        };
        let own_of = |d| self.factor_col(x, factor, d);
        let partner_of = |d| self.factor_col(x, partner, d);
        let p = partner_of(c);
        let mut out = match factor {
            Factor::V => self.a.tr_mul_vec(p),
            Factor::U => self.a.mul_vec(p),
        };
        for d in 0..self.rank {
            if d == c {
                continue;
            }
            let k = dot(partner_of(d), p);
            for (o, w) in out.iter_mut().zip(own_of(d)) {
                *o -= k * w;
            }
        }
        out
    }

    fn reference_for_scale(&self, b: usize, scale: f64) -> Result<ReferenceFunction> {
        if !(scale > ZERO_NORM_GUARD) {
            return Err(Error::InvalidBlock {
                block: b,
                reason: format!("partner column has squared norm {scale:e}"),
            });
        }
        ReferenceFunction::scaled_energy(scale)
    }
}

impl BlockProblem for NmfProblem {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn objective(&self, x: &[f64]) -> f64 {
        0.5 * sum_sq_compensated(self.residual_from_scratch(x).data())
    }

    /// `∇_{u_c} = -A v_c + U(Vᵀv_c)`, `∇_{v_c} = -Aᵀu_c + V(Uᵀu_c)`.
    fn partial_gradient(&self, x: &[f64], b: usize) -> Vec<f64> {
        let (own, partner) = self.block_columns(x, b);
        let c = dot(partner, partner);
        self.deflated_product(x, b)
            .iter()
            .zip(own)
            .map(|(abar, w)| c * w - abar)
            .collect()
    }

    fn reference(&self, x: &[f64], b: usize) -> Result<ReferenceFunction> {
        let (_, partner) = self.block_columns(x, b);
        self.reference_for_scale(b, dot(partner, partner))
    }

    fn block_subproblem_direction(&self, x: &[f64], b: usize) -> Result<Vec<f64>> {
        let (own, partner) = self.block_columns(x, b);
        let c = dot(partner, partner);
        self.reference_for_scale(b, c)?;
        Ok(self
            .deflated_product(x, b)
            .iter()
            .zip(own)
            .map(|(abar, w)| abar / c - w)
            .collect())
    }

    fn block_admissible(&self, x: &[f64], b: usize) -> bool {
        let (_, partner) = self.block_columns(x, b);
        dot(partner, partner) > ZERO_NORM_GUARD
    }

    fn relative_residual(&self, x: &[f64]) -> Option<f64> {
        (self.a_norm > 0.0).then(|| (2.0 * self.objective(x)).sqrt() / self.a_norm)
    }

    fn session(&self, x: BlockedIterate) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(self.state(x)?))
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Residual {
        e: DenseMatrix,
        /// `∇f` in the flattened layout.
        grad: Vec<f64>,
    },
    Gram {
        /// `A v_c`, one entry per column.
        av: Vec<Vec<f64>>,
        /// `Aᵀu_c`.
        atu: Vec<Vec<f64>>,
        /// Row-major `R×R`.
        utu: Vec<f64>,
        vtv: Vec<f64>,
    },
}

/// Factors `U, V` of one run plus the maintained quantities that make block
/// updates cheap.
#[derive(Debug, Clone)]
pub struct NmfState<'a> {
    problem: &'a NmfProblem,
    x: BlockedIterate,
    cache: Cache,
    since_refresh: usize,
    objective: Cell<Option<f64>>,
}

impl<'a> NmfState<'a> {
    pub fn new(problem: &'a NmfProblem, x: BlockedIterate) -> Result<Self> {
        if x.partition() != &problem.partition {
            return Err(Error::dims("iterate partition differs from the problem's"));
        }
        let cache = Self::build_cache(problem, x.values());
        Ok(Self {
            problem,
            x,
            cache,
            since_refresh: 0,
            objective: Cell::new(None),
        })
    }

    fn build_cache(p: &NmfProblem, x: &[f64]) -> Cache {
        let r = p.rank;
        match p.backend {
            NmfBackend::Residual => {
                let e = p.residual_from_scratch(x);
                let mut grad = Vec::with_capacity(x.len());
                for c in 0..r {
                    grad.extend(e.mul_vec(p.v_col(x, c)).into_iter().map(|v| -v));
                }
                for c in 0..r {
                    grad.extend(e.tr_mul_vec(p.u_col(x, c)).into_iter().map(|v| -v));
                }
                Cache::Residual { e, grad }
            }
            NmfBackend::Gram => {
                let av = (0..r).map(|c| p.a.mul_vec(p.v_col(x, c))).collect();
                let atu = (0..r).map(|c| p.a.tr_mul_vec(p.u_col(x, c))).collect();
                let mut utu = vec![0.0; r * r];
                let mut vtv = vec![0.0; r * r];
                for c in 0..r {
                    for d in 0..r {
                        utu[c * r + d] = dot(p.u_col(x, c), p.u_col(x, d));
                        vtv[c * r + d] = dot(p.v_col(x, c), p.v_col(x, d));
                    }
                }
                Cache::Gram { av, atu, utu, vtv }
            }
        }
    }

    pub fn problem(&self) -> &'a NmfProblem {
        self.problem
    }

    pub fn u(&self) -> DenseMatrix {
        self.problem.unflatten(self.x.values()).expect("state is consistent").0
    }

    pub fn v(&self) -> DenseMatrix {
        self.problem.unflatten(self.x.values()).expect("state is consistent").1
    }

    pub fn u_col(&self, c: usize) -> &[f64] {
        self.problem.u_col(self.x.values(), c)
    }

    pub fn v_col(&self, c: usize) -> &[f64] {
        self.problem.v_col(self.x.values(), c)
    }

    /// The maintained residual `A - UVᵀ` (residual backend only).
    pub fn residual(&self) -> Option<&DenseMatrix> {
        match &self.cache {
            Cache::Residual { e, .. } => Some(e),
            Cache::Gram { .. } => None,
        }
    }

    /// `‖E - (A - UVᵀ)‖_F` against a from-scratch recomputation (0 for the
    /// Gram backend, which keeps no residual).
    pub fn residual_drift(&self) -> f64 {
        match &self.cache {
            Cache::Residual { e, .. } => {
                let fresh = self.problem.residual_from_scratch(self.x.values());
                e.sub(&fresh).expect("same shape").frobenius_norm()
            }
            Cache::Gram { .. } => 0.0,
        }
    }

    /// Recomputes every maintained quantity from `A`, `U` and `V`.
    pub fn refresh(&mut self) {
        self.cache = Self::build_cache(self.problem, self.x.values());
        self.since_refresh = 0;
        self.objective.set(None);
    }

    fn partner_scale(&self, b: usize) -> f64 {
        let (_, partner) = self.problem.block_columns(self.x.values(), b);
        dot(partner, partner)
    }

    /// `Āᵀu_c` for a V block, `Ā v_c` for a U block.
    fn deflated(&self, b: usize) -> Vec<f64> {
        let p = self.problem;
        let x = self.x.values();
        let (factor, c) = p.block_factor(b);
        let (own, partner) = p.block_columns(x, b);
        let scale = dot(partner, partner);
        match &self.cache {
            Cache::Residual { e, .. } => {
                let prod = match factor {
                    Factor::V => e.tr_mul_vec(partner),
                    Factor::U => e.mul_vec(partner),
                };
                prod.iter().zip(own).map(|(q, w)| q + scale * w).collect()
            }
            Cache::Gram { av, atu, utu, vtv } => {
                let r = p.rank;
                let (base, gram) = match factor {
                    Factor::V => (&atu[c], utu),
                    Factor::U => (&av[c], vtv),
                };
                let mut out = base.clone();
                for d in 0..r {
                    if d == c {
                        continue;
                    }
                    let k = gram[d * r + c];
                    let col = match factor {
                        Factor::V => p.v_col(x, d),
                        Factor::U => p.u_col(x, d),
                    };
                    for (o, w) in out.iter_mut().zip(col) {
                        *o -= k * w;
                    }
                }
                out
            }
        }
    }

    fn gram_gradient(&self, b: usize) -> Vec<f64> {
        let (own, partner) = self.problem.block_columns(self.x.values(), b);
        let scale = dot(partner, partner);
        self.deflated(b)
            .iter()
            .zip(own)
            .map(|(q, w)| scale * w - q)
            .collect()
    }

    /// Gradient assembled from the maintained residual or Gram matrices,
    /// bypassing the incremental gradient cache.
    pub fn fresh_gradient(&self) -> Vec<f64> {
        match &self.cache {
            Cache::Residual { e, .. } => {
                let p = self.problem;
                let x = self.x.values();
                let mut g = Vec::with_capacity(x.len());
                for c in 0..p.rank {
                    g.extend(e.mul_vec(p.v_col(x, c)).into_iter().map(|v| -v));
                }
                for c in 0..p.rank {
                    g.extend(e.tr_mul_vec(p.u_col(x, c)).into_iter().map(|v| -v));
                }
                g
            }
            Cache::Gram { .. } => (0..self.problem.partition.block_count())
                .flat_map(|b| self.gram_gradient(b))
                .collect(),
        }
    }

    fn compute_objective(&self) -> f64 {
        match &self.cache {
            Cache::Residual { e, .. } => 0.5 * sum_sq_compensated(e.data()),
            Cache::Gram { av, utu, vtv, .. } => {
                let p = self.problem;
                let x = self.x.values();
                let cross: f64 = (0..p.rank).map(|c| dot(p.u_col(x, c), &av[c])).sum();
                let quad: f64 = utu.iter().zip(vtv).map(|(a, b)| a * b).sum();
                (0.5 * p.a_norm_sq - cross + 0.5 * quad).max(0.0)
            }
        }
    }

    fn apply_block(&mut self, b: usize, values: &[f64]) -> Result<()> {
        let p = self.problem;
        let r = p.rank;
        let range = p.partition.range(b);
        if values.len() != range.len() {
            return Err(Error::dims(format!(
                "block {b} has {} entries, got {}",
                range.len(),
                values.len()
            )));
        }
        let delta: Vec<f64> = values
            .iter()
            .zip(&self.x.values()[range])
            .map(|(new, old)| new - old)
            .collect();
        self.x.set_block(b, values)?;
        let x = self.x.values();
        let (factor, c) = p.block_factor(b);
        match &mut self.cache {
            Cache::Residual { e, grad } => {
                let neg: Vec<f64> = delta.iter().map(|d| -d).collect();
                let (m, n) = (p.m, p.n);
                let u_off = |d: usize| d * m;
                let v_off = |d: usize| r * m + d * n;
                match factor {
                    Factor::V => {
                        let u_c = p.u_col(x, c);
                        e.add_outer(u_c, &neg)?;
                        for d in 0..r {
                            let k = dot(u_c, p.u_col(x, d));
                            for (g, dl) in grad[v_off(d)..v_off(d) + n].iter_mut().zip(&delta) {
                                *g += k * dl;
                            }
                            if d != c {
                                let k = dot(&delta, p.v_col(x, d));
                                for (g, u) in grad[u_off(d)..u_off(d) + m].iter_mut().zip(u_c) {
                                    *g += k * u;
                                }
                            }
                        }
                        let fresh = e.mul_vec(p.v_col(x, c));
                        for (g, f) in grad[u_off(c)..u_off(c) + m].iter_mut().zip(fresh) {
                            *g = -f;
                        }
                    }
                    Factor::U => {
                        let v_c = p.v_col(x, c);
                        e.add_outer(&neg, v_c)?;
                        for d in 0..r {
                            let k = dot(v_c, p.v_col(x, d));
                            for (g, dl) in grad[u_off(d)..u_off(d) + m].iter_mut().zip(&delta) {
                                *g += k * dl;
                            }
                            if d != c {
                                let k = dot(&delta, p.u_col(x, d));
                                for (g, v) in grad[v_off(d)..v_off(d) + n].iter_mut().zip(v_c) {
                                    *g += k * v;
                                }
                            }
                        }
                        let fresh = e.tr_mul_vec(p.u_col(x, c));
                        for (g, f) in grad[v_off(c)..v_off(c) + n].iter_mut().zip(fresh) {
                            *g = -f;
                        }
                    }
                }
            }
            Cache::Gram { av, atu, utu, vtv } => {
                let own_of = |d| p.factor_col(x, factor, d);
                let (gram, prod) = match factor {
                    Factor::V => (vtv, av),
                    Factor::U => (utu, atu),
                };
                prod[c] = match factor {
                    Factor::V => p.a.mul_vec(own_of(c)),
                    Factor::U => p.a.tr_mul_vec(own_of(c)),
                };
                for d in 0..r {
                    let k = dot(own_of(c), own_of(d));
                    gram[c * r + d] = k;
                    gram[d * r + c] = k;
                }
            }
        }
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh();
        }
        self.objective.set(None);
        Ok(())
    }
}

impl Session for NmfState<'_> {
    fn iterate(&self) -> &BlockedIterate {
        &self.x
    }

    fn objective(&self) -> f64 {
        if let Some(f) = self.objective.get() {
            return f;
        }
        let f = self.compute_objective();
        self.objective.set(Some(f));
        f
    }

    fn partial_gradient(&self, b: usize) -> Vec<f64> {
        match &self.cache {
            Cache::Residual { grad, .. } => grad[self.problem.partition.range(b)].to_vec(),
            Cache::Gram { .. } => self.gram_gradient(b),
        }
    }

    fn gradient(&self) -> Vec<f64> {
        match &self.cache {
            Cache::Residual { grad, .. } => grad.clone(),
            Cache::Gram { .. } => self.fresh_gradient(),
        }
    }

    fn reference(&self, b: usize) -> Result<ReferenceFunction> {
        self.problem.reference_for_scale(b, self.partner_scale(b))
    }

    fn direction(&self, b: usize) -> Result<Vec<f64>> {
        let scale = self.partner_scale(b);
        self.problem.reference_for_scale(b, scale)?;
        let (own, _) = self.problem.block_columns(self.x.values(), b);
        Ok(self
            .deflated(b)
            .iter()
            .zip(own)
            .map(|(q, w)| q / scale - w)
            .collect())
    }

    fn block_admissible(&self, b: usize) -> bool {
        self.partner_scale(b) > ZERO_NORM_GUARD
    }

    fn objective_with_block(&self, b: usize, values: &[f64]) -> f64 {
        let p = self.problem;
        let x = self.x.values();
        let (own, partner) = p.block_columns(x, b);
        let delta: Vec<f64> = values.iter().zip(own).map(|(a, c)| a - c).collect();
        match &self.cache {
            Cache::Residual { e, .. } => {
                // ½‖E - u δᵀ‖² (V block) or ½‖E - δ vᵀ‖² (U block)
                let (rows, cols) = e.shape();
                let mut terms = Vec::with_capacity(rows * cols);
                let (row_vec, col_vec) = match p.block_factor(b).0 {
                    Factor::V => (partner, delta.as_slice()),
                    Factor::U => (delta.as_slice(), partner),
                };
                for i in 0..rows {
                    let er = e.row(i);
                    for j in 0..cols {
                        terms.push(er[j] - row_vec[i] * col_vec[j]);
                    }
                }
                0.5 * sum_sq_compensated(&terms)
            }
            Cache::Gram { .. } => {
                let g = self.gram_gradient(b);
                let scale = dot(partner, partner);
                self.objective() + dot(&delta, &g) + 0.5 * scale * dot(&delta, &delta)
            }
        }
    }

    /// `δᵀ∇_b f + (c/2)‖δ‖²`, exact because `f` is quadratic in each block.
    fn objective_change(&self, b: usize, values: &[f64]) -> f64 {
        let (own, partner) = self.problem.block_columns(self.x.values(), b);
        let delta: Vec<f64> = values.iter().zip(own).map(|(a, c)| a - c).collect();
        let g = self.partial_gradient(b);
        dot(&delta, &g) + 0.5 * dot(partner, partner) * dot(&delta, &delta)
    }

    fn objective_at(&self, x: &[f64]) -> f64 {
        self.problem.objective(x)
    }

    fn set_block(&mut self, b: usize, values: &[f64]) -> Result<()> {
        self.apply_block(b, values)
    }

    fn set_values(&mut self, values: &[f64]) -> Result<()> {
        self.x.set_values(values)?;
        self.refresh();
        Ok(())
    }

    fn relative_residual(&self) -> Option<f64> {
        let p = self.problem;
        (p.a_norm > 0.0).then(|| (2.0 * self.objective()).sqrt() / p.a_norm)
    }
}

/// `‖A - UVᵀ‖²_F` (no ½).
pub fn nmf_objective(state: &NmfState<'_>) -> f64 {
    2.0 * state.objective()
}

/// `∇_b f` with `f = ½‖A - UVᵀ‖²`.
pub fn nmf_block_gradient(state: &NmfState<'_>, block: usize) -> Vec<f64> {
    state.partial_gradient(block)
}

/// `ScaledEnergy(c)` with `c` the squared norm of the partner column.
pub fn nmf_reference(state: &NmfState<'_>, block: usize) -> Result<ReferenceFunction> {
    state.reference(block)
}

/// `Āᵀu_c/(u_cᵀu_c) - v_c` for a V block (symmetric for U).
pub fn nmf_direction(state: &NmfState<'_>, block: usize) -> Result<Vec<f64>> {
    state.direction(block)
}

/// Unit-stepsize update: the block becomes `[Āᵀu_c/(u_cᵀu_c)]₊` (V) or
/// `[Ā v_c/(v_cᵀv_c)]₊` (U).
pub fn nmf_block_update(state: &mut NmfState<'_>, block: usize) -> Result<()> {
    let scale = state.partner_scale(block);
    state.problem.reference_for_scale(block, scale)?;
    let new: Vec<f64> = state.deflated(block).iter().map(|q| (q / scale).max(0.0)).collect();
    state.apply_block(block, &new)
}

/// Blocks with a nonzero partner column and at least one valid coordinate.
pub fn nmf_valid_blocks(state: &NmfState<'_>) -> Vec<usize> {
    let g = state.gradient();
    let x = state.x.values();
    (0..state.problem.partition.block_count())
        .filter(|&b| {
            let r = state.problem.partition.range(b);
            state.block_admissible(b)
                && x[r.clone()]
                    .iter()
                    .zip(&g[r])
                    .any(|(&xi, &gi)| is_valid_coordinate(xi, gi))
        })
        .collect()
}

/// Projected-gradient report over both factors.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfOptimality {
    pub report: OptimalityReport,
    /// Blocks whose partner column is zero. A zero projected gradient with
    /// such blocks present may be a degenerate critical point (e.g. `U = V = 0`).
    pub degenerate_blocks: Vec<usize>,
}

impl NmfOptimality {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_blocks.is_empty()
    }
}

/// Assembles `∇_U f = (UVᵀ - A)V`, `∇_V f = (UVᵀ - A)ᵀU` from the maintained
/// residual and projects them.
pub fn nmf_full_projected_gradient(state: &NmfState<'_>) -> Result<NmfOptimality> {
    let g = state.fresh_gradient();
    let report = OptimalityReport::new(state.x.values(), &g, &state.problem.partition, None)?;
    let degenerate_blocks = (0..state.problem.partition.block_count())
        .filter(|&b| !state.block_admissible(b))
        .collect();
    Ok(NmfOptimality {
        report,
        degenerate_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eye2() -> NmfProblem {
        NmfProblem::new(DenseMatrix::identity(2), 1).unwrap()
    }

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_col_major(v.len(), 1, v).unwrap()
    }

    #[test]
    fn objective_examples() {
        let p = eye2();
        let s = p.state_from_factors(&col(&[1.0, 0.0]), &col(&[1.0, 0.0])).unwrap();
        assert_eq!(nmf_objective(&s), 1.0);
        let z = p.state_from_factors(&col(&[0.0, 0.0]), &col(&[0.0, 0.0])).unwrap();
        assert_eq!(nmf_objective(&z), 2.0);
    }

    #[test]
    fn reference_examples() {
        let p = NmfProblem::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap(), 1).unwrap();
        let s = p.state_from_factors(&col(&[3.0, 4.0]), &col(&[1.0, 0.0])).unwrap();
        let h = nmf_reference(&s, 1).unwrap();
        assert_eq!(h.strong_convexity(), 25.0);
        assert_eq!(h.gradient_smoothness(), 25.0);
        assert_eq!(h.step_bound().alpha_star, 1.0);
        assert_eq!(nmf_reference(&s, 0).unwrap().strong_convexity(), 1.0);
        let z = p.state_from_factors(&col(&[0.0, 0.0]), &col(&[1.0, 0.0])).unwrap();
        assert!(matches!(nmf_reference(&z, 1), Err(Error::InvalidBlock { block: 1, .. })));
    }

    #[test]
    fn direction_and_update_example() {
        // A = I, u = [1,0], v = [1,1]: Āᵀu = [1,0], d = [0,-1], v⁺ = [1,0]
        let p = eye2();
        let mut s = p.state_from_factors(&col(&[1.0, 0.0]), &col(&[1.0, 1.0])).unwrap();
        assert_eq!(nmf_direction(&s, 1).unwrap(), vec![0.0, -1.0]);
        nmf_block_update(&mut s, 1).unwrap();
        assert_eq!(s.v_col(0), &[1.0, 0.0]);
        assert_eq!(nmf_objective(&s), 1.0);
        assert_eq!(s.objective(), 0.5);
    }

    #[test]
    fn zero_partner_gives_zero_gradient() {
        let p = eye2();
        let s = p.state_from_factors(&col(&[0.0, 0.0]), &col(&[0.3, 0.7])).unwrap();
        assert_eq!(nmf_block_gradient(&s, 1), vec![0.0, 0.0]);
        assert!(!nmf_valid_blocks(&s).contains(&1));
    }

    #[test]
    fn zero_factors_are_a_flagged_critical_point() {
        let p = eye2();
        let s = p.state_from_factors(&col(&[0.0, 0.0]), &col(&[0.0, 0.0])).unwrap();
        let opt = nmf_full_projected_gradient(&s).unwrap();
        assert!(opt.report.is_zero());
        assert!(opt.is_degenerate());
    }

    fn random_problem(seed: u64, m: usize, n: usize, r: usize) -> (NmfProblem, BlockedIterate) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..m * n).map(|_| rng.gen::<f64>()).collect();
        let p = NmfProblem::new(DenseMatrix::new(m, n, a).unwrap(), r).unwrap();
        let x = p.random_iterate(&mut rng);
        (p, x)
    }

    #[test]
    fn session_matches_stateless_problem() {
        let (p, x) = random_problem(1, 6, 5, 3);
        let s = p.state(x.clone()).unwrap();
        for b in 0..6 {
            let g1 = s.partial_gradient(b);
            let g2 = p.partial_gradient(x.values(), b);
            for (a, c) in g1.iter().zip(&g2) {
                assert!((a - c).abs() < 1e-12);
            }
            let d1 = s.direction(b).unwrap();
            let d2 = p.block_subproblem_direction(x.values(), b).unwrap();
            for (a, c) in d1.iter().zip(&d2) {
                assert!((a - c).abs() < 1e-12);
            }
        }
        assert!((s.objective() - p.objective(x.values())).abs() < 1e-12);
    }

    #[test]
    fn incremental_caches_track_recomputation() {
        for backend in [NmfBackend::Residual, NmfBackend::Gram] {
            let (p, x) = random_problem(2, 7, 6, 3);
            let p = p.with_backend(backend);
            let mut s = p.state(x).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for k in 0..250 {
                let b = rng.gen_range(0..6);
                let len = p.partition().block_len(b);
                let vals: Vec<f64> = (0..len)
                    .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
                    .collect();
                s.set_block(b, &vals).unwrap();
                let fresh = p.state(s.iterate().clone()).unwrap();
                assert!((s.objective() - fresh.objective()).abs() < 1e-10, "{backend:?} step {k}");
                for (a, c) in s.gradient().iter().zip(p.gradient(s.iterate().values()).iter()) {
                    assert!((a - c).abs() < 1e-10, "{backend:?} step {k}");
                }
                let probe: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
                let mut y = s.iterate().values().to_vec();
                y[p.partition().range(b)].copy_from_slice(&probe);
                assert!((s.objective_with_block(b, &probe) - p.objective(&y)).abs() < 1e-10);
            }
            assert!(s.residual_drift() < 1e-12);
        }
    }

    #[test]
    fn sparse_and_dense_agree() {
        let trip = vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 0.5), (3, 2, 4.0)];
        let sp = SparseMatrix::from_triplets(4, 3, trip).unwrap();
        let dense = sp.to_dense();
        let ps = NmfProblem::new(sp, 2).unwrap();
        let pd = NmfProblem::new(dense, 2).unwrap();
        assert_eq!(ps.backend(), NmfBackend::Gram);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = pd.random_iterate(&mut rng);
        let (ss, sd) = (ps.state(x.clone()).unwrap(), pd.state(x).unwrap());
        assert!((ss.objective() - sd.objective()).abs() < 1e-12);
        for b in 0..4 {
            let (a, c) = (ss.direction(b).unwrap(), sd.direction(b).unwrap());
            for (x, y) in a.iter().zip(&c) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(NmfProblem::new(DenseMatrix::identity(2), 3).is_err());
        assert!(NmfProblem::new(DenseMatrix::identity(2), 0).is_err());
        let neg = DenseMatrix::from_rows(&[[1.0, -0.5]]).unwrap();
        assert!(NmfProblem::new(neg, 1).is_err());
    }
}
