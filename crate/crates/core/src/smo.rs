//! Sequential minimal optimization for the box- and equality-constrained
//! quadratic programs behind both the classifier and the regressor.
//!
//! The solver minimizes
//!
//! ```text
//! f(β) = ½ βᵀQβ + pᵀβ    subject to  Σ s_t β_t = 0,  0 ≤ β_t ≤ C
//! ```
//!
//! with `s_t ∈ {−1, +1}` and `Q_uv = s_u s_v K(base(u), base(v))`. Each
//! variable maps onto a base sample (`base(t) = t mod m`), which lets the
//! regression problem reuse one kernel matrix for its `2m` variables.
//!
//! The first variable of a working pair is the most violating one in
//! `I_up`; its partner is the violator in `I_low` promising the largest
//! decrease of `f` (second-order selection). The iteration stops once the
//! violation `max_{I_up} −s_t G_t − min_{I_low} −s_t G_t` drops to `tol`.

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelRows};
use crate::scalar::Scalar;

/// Stopping and bookkeeping options.
#[derive(Clone, Debug)]
pub struct SolverParams<F> {
    pub tol: F,
    /// Maximum number of pair updates.
    pub max_iter: usize,
    /// Record the dual objective after every update.
    pub trace_objective: bool,
}

/// Result of a solver run.
#[derive(Clone, Debug)]
pub struct Solution<F> {
    /// One coefficient per variable, in `[0, C]`.
    pub beta: Vec<F>,
    /// Offset of the decision function.
    pub bias: F,
    /// Final maximal KKT violation.
    pub violation: F,
    pub iterations: usize,
    /// Objective `f(β)` (minimization form) at the returned point.
    pub objective: F,
    /// `f(β)` after every update when tracing was requested.
    pub objective_trace: Vec<F>,
}

pub(crate) struct Problem<'a, F> {
    pub signs: Vec<bool>,
    pub linear: Vec<F>,
    pub c: F,
    pub kernel: Kernel<F>,
    pub samples: &'a [Vec<F>],
}

/// Curvature used when a pair has non-positive second derivative.
const TAU: f64 = 1e-12;

impl<'a, F: Scalar> Problem<'a, F> {
    fn sign(&self, t: usize) -> F {
        if self.signs[t] {
            F::one()
        } else {
            -F::one()
        }
    }

    fn in_up(&self, t: usize, b: F) -> bool {
        if self.signs[t] {
            b < self.c
        } else {
            b > F::zero()
        }
    }

    fn in_low(&self, t: usize, b: F) -> bool {
        if self.signs[t] {
            b > F::zero()
        } else {
            b < self.c
        }
    }

    pub(crate) fn solve(&self, params: &SolverParams<F>) -> Result<Solution<F>> {
        let n = self.signs.len();
        let m = self.samples.len();
        debug_assert_eq!(self.linear.len(), n);
        debug_assert!(m > 0 && n.is_multiple_of(m));

        let mut rows = KernelRows::new(self.kernel, self.samples);
        let diag: Vec<F> = (0..m).map(|i| rows.diag(i)).collect();
        let c = self.c;
        let tau = F::lit(TAU);

        let mut beta = vec![F::zero(); n];
        let mut grad = self.linear.clone();
        let mut trace = Vec::new();
        let mut iterations = 0;

        let violation = loop {
            let Some((i, g_max)) = self.select_up(&beta, &grad) else {
                break F::neg_infinity();
            };
            let k_i = rows.row(i % m);
            let (j, gap) = self.select_low(&beta, &grad, i, g_max, &k_i, &diag);
            if gap <= params.tol {
                break gap;
            }
            let j = j.expect("gap > tol implies j");
            if iterations >= params.max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    violation: gap.as_f64(),
                    objective: self.objective(&beta, &grad).as_f64(),
                });
            }
            iterations += 1;

            let (bi, bj) = (i % m, j % m);
            let k_j = rows.row(bj);
            let (si, sj) = (self.sign(i), self.sign(j));
            let q_ij = si * sj * k_i[bj];
            let (old_i, old_j) = (beta[i], beta[j]);
            let (mut ai, mut aj) = (old_i, old_j);

            if self.signs[i] != self.signs[j] {
                let mut quad = diag[bi] + diag[bj] + q_ij + q_ij;
                if quad <= F::zero() {
                    quad = tau;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > F::zero() {
                    if aj < F::zero() {
                        aj = F::zero();
                        ai = diff;
                    }
                } else if ai < F::zero() {
                    ai = F::zero();
                    aj = -diff;
                }
                if diff > F::zero() {
                    if ai > c {
                        ai = c;
                        aj = c - diff;
                    }
                } else if aj > c {
                    aj = c;
                    ai = c + diff;
                }
            } else {
                let mut quad = diag[bi] + diag[bj] - q_ij - q_ij;
                if quad <= F::zero() {
                    quad = tau;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > c {
                    if ai > c {
                        ai = c;
                        aj = sum - c;
                    }
                } else if aj < F::zero() {
                    aj = F::zero();
                    ai = sum;
                }
                if sum > c {
                    if aj > c {
                        aj = c;
                        ai = sum - c;
                    }
                } else if ai < F::zero() {
                    ai = F::zero();
                    aj = sum;
                }
            }
            beta[i] = ai;
            beta[j] = aj;

            // G_t += Q_ti Δβ_i + Q_tj Δβ_j
            let di = (ai - old_i) * si;
            let dj = (aj - old_j) * sj;
            for (t, g) in grad.iter_mut().enumerate() {
                let bt = t % m;
                *g += self.sign(t) * (k_i[bt] * di + k_j[bt] * dj);
            }

            if params.trace_objective {
                trace.push(self.objective(&beta, &grad));
            }
        };

        Ok(Solution {
            bias: self.bias(&beta, &grad),
            objective: self.objective(&beta, &grad),
            beta,
            violation,
            iterations,
            objective_trace: trace,
        })
    }

    /// Most violating variable in `I_up` and its value of `−s_t G_t`.
    fn select_up(&self, beta: &[F], grad: &[F]) -> Option<(usize, F)> {
        let mut best: Option<(usize, F)> = None;
        for t in 0..beta.len() {
            let v = -self.sign(t) * grad[t];
            if self.in_up(t, beta[t]) && best.is_none_or(|(_, b)| v > b) {
                best = Some((t, v));
            }
        }
        best
    }

    /// Partner of `i` with the largest guaranteed objective decrease, and the
    /// maximal violation `g_max − min_{I_low} −s_t G_t`.
    fn select_low(
        &self,
        beta: &[F],
        grad: &[F],
        i: usize,
        g_max: F,
        k_i: &[F],
        diag: &[F],
    ) -> (Option<usize>, F) {
        let m = self.samples.len();
        let bi = i % m;
        let mut g_min = F::infinity();
        let mut best = (None, F::infinity());
        for t in 0..beta.len() {
            if !self.in_low(t, beta[t]) {
                continue;
            }
            let v = -self.sign(t) * grad[t];
            g_min = g_min.min(v);
            let b = g_max - v;
            if b > F::zero() {
                let bt = t % m;
                let mut a = diag[bi] + diag[bt] - k_i[bt] - k_i[bt];
                if a <= F::zero() {
                    a = F::lit(TAU);
                }
                let gain = -(b * b) / a;
                if gain < best.1 {
                    best = (Some(t), gain);
                }
            }
        }
        let gap = if g_min.is_finite() {
            g_max - g_min
        } else {
            F::neg_infinity()
        };
        (best.0, gap)
    }

    /// Decision offset: mean of `−s_t G_t` over free variables, or the
    /// midpoint of the feasible interval when every variable sits at a bound.
    fn bias(&self, beta: &[F], grad: &[F]) -> F {
        let mut sum = F::zero();
        let mut free = 0usize;
        let mut lo = F::neg_infinity();
        let mut hi = F::infinity();
        for t in 0..beta.len() {
            let v = -self.sign(t) * grad[t];
            let b = beta[t];
            if b > F::zero() && b < self.c {
                sum += v;
                free += 1;
            } else {
                if self.in_up(t, b) {
                    lo = lo.max(v);
                }
                if self.in_low(t, b) {
                    hi = hi.min(v);
                }
            }
        }
        if free > 0 {
            sum / F::from_count(free)
        } else if lo.is_finite() && hi.is_finite() {
            (lo + hi) / F::lit(2.0)
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            F::zero()
        }
    }

    /// `f(β) = ½ βᵀ(G + p)`, since `G = Qβ + p`.
    fn objective(&self, beta: &[F], grad: &[F]) -> F {
        let half = F::lit(0.5);
        beta.iter()
            .zip(grad)
            .zip(&self.linear)
            .map(|((&b, &g), &p)| half * b * (g + p))
            .sum()
    }
}
