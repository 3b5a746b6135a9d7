//! Kernel functions and Gram matrices shared by the classifier and the
//! regressor.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{sq_dist, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "F: Scalar")]
pub enum Kernel<F> {
    Linear,
    Rbf { gamma: F },
}

impl<F: Scalar> Kernel<F> {
    pub fn rbf(gamma: F) -> Result<Self> {
        let kernel = Kernel::Rbf { gamma };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Default RBF width for classification: `1 / n_features`.
    pub fn default_rbf(n_features: usize) -> Self {
        Kernel::Rbf {
            gamma: F::one() / F::from_count(n_features.max(1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma > F::zero() && gamma.is_finite()) => Err(
                Error::InvalidParameter(format!("RBF gamma must be positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn gamma(&self) -> Option<F> {
        match *self {
            Kernel::Rbf { gamma } => Some(gamma),
            Kernel::Linear => None,
        }
    }

    pub fn eval(&self, x: &[F], y: &[F]) -> Result<F> {
        check_dim(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[F], y: &[F]) -> F {
        match *self {
            Kernel::Linear => x.iter().zip(y).map(|(&a, &b)| a * b).sum(),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(x, y)).exp(),
        }
    }

    /// Dense Gram matrix. Only the upper triangle is evaluated; the lower
    /// triangle is a mirror, so the result is exactly symmetric.
    pub fn gram(&self, xs: &[Vec<F>]) -> Result<Array2<F>> {
        let n = xs.len();
        if let Some(first) = xs.first() {
            for x in xs {
                check_dim(first.len(), x.len())?;
            }
        }
        let rows: Vec<Vec<F>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| self.eval_unchecked(&xs[i], &xs[j]))
                    .collect()
            })
            .collect();
        let mut g = Array2::zeros((n, n));
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                g[[i, j]] = v;
                g[[j, i]] = v;
            }
        }
        Ok(g)
    }
}

/// Up to this many rows the solver works on a fully materialized Gram matrix.
pub(crate) const DENSE_LIMIT: usize = 4096;

/// Budget (in matrix entries) for the row cache used above [`DENSE_LIMIT`].
const CACHE_ENTRIES: usize = 64 << 20;

/// Row access to a kernel matrix over a fixed sample set.
pub(crate) enum KernelRows<'a, F> {
    Dense(Vec<Arc<[F]>>),
    Cached {
        kernel: Kernel<F>,
        xs: &'a [Vec<F>],
        rows: HashMap<usize, Arc<[F]>>,
        order: VecDeque<usize>,
        capacity: usize,
    },
}

impl<'a, F: Scalar> KernelRows<'a, F> {
    pub(crate) fn new(kernel: Kernel<F>, xs: &'a [Vec<F>]) -> Self {
        let n = xs.len();
        if n <= DENSE_LIMIT {
            let g = kernel.gram(xs).expect("dimensions validated by caller");
            let rows = g
                .rows()
                .into_iter()
                .map(|r| r.iter().copied().collect::<Arc<[F]>>())
                .collect();
            KernelRows::Dense(rows)
        } else {
            KernelRows::Cached {
                kernel,
                xs,
                rows: HashMap::new(),
                order: VecDeque::new(),
                capacity: (CACHE_ENTRIES / n).max(2),
            }
        }
    }

    pub(crate) fn diag(&self, i: usize) -> F {
        match self {
            KernelRows::Dense(rows) => rows[i][i],
            KernelRows::Cached { kernel, xs, .. } => kernel.eval_unchecked(&xs[i], &xs[i]),
        }
    }

    pub(crate) fn row(&mut self, i: usize) -> Arc<[F]> {
        match self {
            KernelRows::Dense(rows) => rows[i].clone(),
            KernelRows::Cached {
                kernel,
                xs,
                rows,
                order,
                capacity,
            } => {
                if let Some(r) = rows.get(&i) {
                    return r.clone();
                }
                let xi = &xs[i];
                let r: Arc<[F]> = xs
                    .par_iter()
                    .map(|xj| kernel.eval_unchecked(xi, xj))
                    .collect::<Vec<_>>()
                    .into();
                if rows.len() >= *capacity {
                    if let Some(old) = order.pop_front() {
                        rows.remove(&old);
                    }
                }
                rows.insert(i, r.clone());
                order.push_back(i);
                r
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_unit_offset() {
        let k = Kernel::rbf(0.5).unwrap();
        assert!((k.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap() - 0.606_530_7f64).abs() < 1e-7);
    }

    #[test]
    fn rbf_identity_is_one() {
        let k = Kernel::rbf(3.7).unwrap();
        assert_eq!(k.eval(&[0.3, -2.0, 5.0], &[0.3, -2.0, 5.0]).unwrap(), 1.0);
    }

    #[test]
    fn linear_dot() {
        let k = Kernel::<f64>::Linear;
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
    }

    #[test]
    fn dimension_mismatch() {
        let k = Kernel::<f64>::Linear;
        assert!(matches!(
            k.eval(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
        assert!(k.gram(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn rejects_bad_gamma() {
        assert!(Kernel::rbf(0.0f64).is_err());
        assert!(Kernel::rbf(-1.0f32).is_err());
        assert!(Kernel::rbf(f64::NAN).is_err());
    }

    #[test]
    fn gram_single_and_orthonormal() {
        let g = Kernel::rbf(2.0).unwrap().gram(&[vec![4.0, 1.0]]).unwrap();
        assert_eq!(g.shape(), &[1, 1]);
        assert_eq!(g[[0, 0]], 1.0);

        let g = Kernel::<f64>::Linear
            .gram(&[vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        assert_eq!(g, ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn cached_rows_match_dense() {
        let xs: Vec<Vec<f64>> = (0..DENSE_LIMIT + 3)
            .map(|i| vec![(i % 17) as f64 * 0.1, (i % 5) as f64])
            .collect();
        let k = Kernel::rbf(0.3).unwrap();
        let mut rows = KernelRows::new(k, &xs);
        assert!(matches!(rows, KernelRows::Cached { .. }));
        let r = rows.row(7);
        for j in [0, 7, 100, DENSE_LIMIT + 2] {
            assert_eq!(r[j], k.eval(&xs[7], &xs[j]).unwrap());
        }
        assert_eq!(rows.diag(9), 1.0);
    }
}
