//! Cross-validation and grid search over (C, γ) for the classifier and
//! (C, γ, ε) for the regressor.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::scalar::Scalar;
use crate::svc::{self, ClassLabel, SvcParams, TrainingSet};
use crate::svr::{self, SvrParams, SvrSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Share of correctly classified rows; higher is better.
    Accuracy,
    /// Mean squared error; lower is better.
    Mse,
}

impl Metric {
    fn better<F: Scalar>(self, a: F, b: F) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Mse => a < b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// `k` folds. Unordered data is shuffled by the seed first; ordered data
    /// is cut into `k + 1` contiguous blocks and fold `i` trains on blocks
    /// `0..i` and validates on block `i`.
    KFold(usize),
    /// One split: the first `train_fraction` of rows train, the rest
    /// validate. Unordered data is shuffled first.
    Holdout { train_fraction: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Every combination of candidates.
    #[default]
    Cartesian,
    /// Fix γ first (others at their middle candidate), then C, then ε.
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GridSpec<F> {
    pub c: Vec<F>,
    pub gamma: Vec<F>,
    /// Empty for classification.
    #[serde(default)]
    pub epsilon: Vec<F>,
    pub metric: Metric,
    pub split: Split,
    #[serde(default)]
    pub mode: SearchMode,
}

pub const DEFAULT_C: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GAMMA: [f64; 6] = [1e-4, 3e-4, 1e-3, 1.4e-3, 3e-3, 1e-2];
/// Fractions of the label range.
pub const DEFAULT_EPSILON_FRACTIONS: [f64; 3] = [0.01, 0.05, 0.1];
pub const DEFAULT_CLASSIFICATION_FOLDS: usize = 5;

impl<F: Scalar> GridSpec<F> {
    pub fn default_classification() -> Self {
        GridSpec {
            c: DEFAULT_C.iter().map(|&v| F::lit(v)).collect(),
            gamma: DEFAULT_GAMMA.iter().map(|&v| F::lit(v)).collect(),
            epsilon: Vec::new(),
            metric: Metric::Accuracy,
            split: Split::KFold(DEFAULT_CLASSIFICATION_FOLDS),
            mode: SearchMode::Cartesian,
        }
    }

    pub fn default_regression(label_range: F, split: Split) -> Self {
        let range = if label_range > F::zero() {
            label_range
        } else {
            F::one()
        };
        GridSpec {
            c: DEFAULT_C.iter().map(|&v| F::lit(v)).collect(),
            gamma: DEFAULT_GAMMA.iter().map(|&v| F::lit(v)).collect(),
            epsilon: DEFAULT_EPSILON_FRACTIONS
                .iter()
                .map(|&v| F::lit(v) * range)
                .collect(),
            metric: Metric::Mse,
            split,
            mode: SearchMode::Cartesian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, &[F]); 2] = [("C", &self.c), ("gamma", &self.gamma)];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "empty {name} candidate list"
                )));
            }
        }
        for (name, list) in [
            ("C", &self.c),
            ("gamma", &self.gamma),
            ("epsilon", &self.epsilon),
        ] {
            if let Some(v) = list.iter().find(|v| !(**v > F::zero() && v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "{name} candidate {v} must be positive"
                )));
            }
        }
        match self.split {
            Split::KFold(k) if k < 2 => Err(Error::InvalidParameter(format!(
                "need at least 2 folds, got {k}"
            ))),
            Split::Holdout { train_fraction }
                if !(train_fraction > 0.0 && train_fraction < 1.0) =>
            {
                Err(Error::InvalidParameter(format!(
                    "holdout fraction {train_fraction} not in (0,1)"
                )))
            }
            _ => Ok(()),
        }
    }

    fn epsilons(&self) -> Vec<Option<F>> {
        if self.epsilon.is_empty() {
            vec![None]
        } else {
            self.epsilon.iter().copied().map(Some).collect()
        }
    }

    pub fn cells(&self) -> Vec<Params<F>> {
        let mut out = Vec::new();
        for &c in &self.c {
            for &gamma in &self.gamma {
                for epsilon in self.epsilons() {
                    out.push(Params { c, gamma, epsilon });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Params<F> {
    pub c: F,
    pub gamma: F,
    pub epsilon: Option<F>,
}

impl<F: Scalar> Params<F> {
    fn key(&self) -> (F, F, F) {
        (self.c, self.gamma, self.epsilon.unwrap_or_else(F::zero))
    }

    fn precedes(&self, other: &Self) -> bool {
        self.key().partial_cmp(&other.key()) == Some(std::cmp::Ordering::Less)
    }
}

/// A learner evaluated by cross-validation.
pub trait CvTask<F: Scalar>: Sync {
    fn len(&self) -> usize;

    fn metric(&self) -> Metric;

    /// Time-ordered rows use contiguous blocks and are never shuffled.
    fn ordered(&self) -> bool;

    /// Held-out metric of one fold, or `None` when the fold cannot be used.
    fn fold_score(&self, train: &[usize], test: &[usize], params: &Params<F>) -> Result<Option<F>>;
}

/// Train/validation index pairs.
pub fn folds(
    n: usize,
    split: Split,
    seed: u64,
    ordered: bool,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if !ordered {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    match split {
        Split::KFold(k) => {
            let blocks = if ordered { k + 1 } else { k };
            if k < 2 || blocks > n {
                return Err(Error::InvalidParameter(format!("{k} folds for {n} rows")));
            }
            let bounds: Vec<usize> = (0..=blocks).map(|b| b * n / blocks).collect();
            let block = |b: usize| idx[bounds[b]..bounds[b + 1]].to_vec();
            Ok(if ordered {
                (1..blocks)
                    .map(|i| (idx[..bounds[i]].to_vec(), block(i)))
                    .collect()
            } else {
                (0..k)
                    .map(|i| {
                        let mut train: Vec<usize> =
                            (0..k).filter(|&b| b != i).flat_map(block).collect();
                        train.sort_unstable();
                        let mut test = block(i);
                        test.sort_unstable();
                        (train, test)
                    })
                    .collect()
            })
        }
        Split::Holdout { train_fraction } => {
            let cut = (n as f64 * train_fraction).round() as usize;
            if cut == 0 || cut >= n {
                return Err(Error::InvalidParameter(format!(
                    "holdout fraction {train_fraction} leaves an empty side of {n} rows"
                )));
            }
            let mut train = idx[..cut].to_vec();
            let mut test = idx[cut..].to_vec();
            if !ordered {
                train.sort_unstable();
                test.sort_unstable();
            }
            Ok(vec![(train, test)])
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvScore<F> {
    pub mean: F,
    /// Score of each fold; `None` for skipped folds.
    pub per_fold: Vec<Option<F>>,
    pub warnings: Vec<String>,
}

/// Mean held-out metric over the folds of `split`.
pub fn kfold_score<F: Scalar, T: CvTask<F> + ?Sized>(
    task: &T,
    params: &Params<F>,
    split: Split,
    seed: u64,
) -> Result<CvScore<F>> {
    let folds = folds(task.len(), split, seed, task.ordered())?;
    let mut per_fold = Vec::with_capacity(folds.len());
    let mut warnings = Vec::new();
    for (i, (train, test)) in folds.iter().enumerate() {
        let score = task.fold_score(train, test, params)?;
        if score.is_none() {
            warnings.push(format!("fold {i} skipped"));
        }
        per_fold.push(score);
    }
    let used: Vec<F> = per_fold.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::AllFoldsSkipped);
    }
    Ok(CvScore {
        mean: used.iter().copied().sum::<F>() / F::from_count(used.len()),
        per_fold,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow<F> {
    pub params: Params<F>,
    /// `None` when training failed for this cell.
    pub score: Option<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult<F> {
    pub best: Params<F>,
    pub best_score: F,
    pub table: Vec<ScoreRow<F>>,
}

fn evaluate_cells<F: Scalar, T: CvTask<F> + ?Sized>(
    task: &T,
    cells: &[Params<F>],
    split: Split,
    seed: u64,
) -> Vec<ScoreRow<F>> {
    cells
        .par_iter()
        .map(|p| ScoreRow {
            params: *p,
            score: kfold_score(task, p, split, seed).ok().map(|s| s.mean),
        })
        .collect()
}

/// Best row: optimal metric, ties to the smallest (C, γ, ε).
pub fn best_row<F: Scalar>(table: &[ScoreRow<F>], metric: Metric) -> Option<(Params<F>, F)> {
    let mut best: Option<(Params<F>, F)> = None;
    for row in table {
        let Some(s) = row.score else { continue };
        best = match best {
            None => Some((row.params, s)),
            Some((bp, bs)) => {
                if metric.better(s, bs) || (s == bs && row.params.precedes(&bp)) {
                    Some((row.params, s))
                } else {
                    Some((bp, bs))
                }
            }
        };
    }
    best
}

pub fn grid_search<F: Scalar, T: CvTask<F> + ?Sized>(
    task: &T,
    grid: &GridSpec<F>,
    seed: u64,
) -> Result<GridResult<F>> {
    grid.validate()?;
    let table = match grid.mode {
        SearchMode::Cartesian => evaluate_cells(task, &grid.cells(), grid.split, seed),
        SearchMode::Sequential => {
            let mid = |v: &[F]| v[v.len() / 2];
            let mut fixed = Params {
                c: mid(&grid.c),
                gamma: mid(&grid.gamma),
                epsilon: (!grid.epsilon.is_empty()).then(|| mid(&grid.epsilon)),
            };
            let mut table: Vec<ScoreRow<F>> = Vec::new();
            let stages: [Box<dyn Fn(Params<F>) -> Vec<Params<F>>>; 3] = [
                Box::new(|p| {
                    grid.gamma
                        .iter()
                        .map(|&gamma| Params { gamma, ..p })
                        .collect()
                }),
                Box::new(|p| grid.c.iter().map(|&c| Params { c, ..p }).collect()),
                Box::new(|p| {
                    grid.epsilons()
                        .into_iter()
                        .map(|epsilon| Params { epsilon, ..p })
                        .collect()
                }),
            ];
            for stage in &stages {
                let cells: Vec<Params<F>> = stage(fixed)
                    .into_iter()
                    .filter(|p| !table.iter().any(|r| r.params == *p))
                    .collect();
                table.extend(evaluate_cells(task, &cells, grid.split, seed));
                let stage_rows: Vec<ScoreRow<F>> = stage(fixed)
                    .into_iter()
                    .filter_map(|p| table.iter().find(|r| r.params == p).cloned())
                    .collect();
                if let Some((p, _)) = best_row(&stage_rows, task.metric()) {
                    fixed = p;
                }
            }
            table
        }
    };
    let (best, best_score) = best_row(&table, task.metric()).ok_or(Error::AllCellsFailed)?;
    Ok(GridResult {
        best,
        best_score,
        table,
    })
}

/// Export `C,gamma,epsilon,metric`; failed cells carry `NaN`.
pub fn write_score_table<W: Write, F: Scalar>(out: W, table: &[ScoreRow<F>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["C", "gamma", "epsilon", "metric"])?;
    for row in table {
        let p = &row.params;
        w.write_record([
            p.c.to_string(),
            p.gamma.to_string(),
            p.epsilon.map(|e| e.to_string()).unwrap_or_default(),
            row.score
                .map_or_else(|| "NaN".to_owned(), |s| s.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_score_table<R: std::io::Read>(input: R) -> Result<Vec<ScoreRow<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad number {s:?} in score table")))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::InvalidInput("score table rows need 4 fields".into()));
        }
        let score = num(&rec[3])?;
        out.push(ScoreRow {
            params: Params {
                c: num(&rec[0])?,
                gamma: num(&rec[1])?,
                epsilon: if rec[2].is_empty() {
                    None
                } else {
                    Some(num(&rec[2])?)
                },
            },
            score: (!score.is_nan()).then_some(score),
        });
    }
    Ok(out)
}

/// Multi-class SVM accuracy as a cross-validation task.
pub struct SvcTask<'a, F> {
    pub data: &'a TrainingSet<F, ClassLabel>,
    pub tol: F,
}

impl<F: Scalar> CvTask<F> for SvcTask<'_, F> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn metric(&self) -> Metric {
        Metric::Accuracy
    }

    fn ordered(&self) -> bool {
        false
    }

    fn fold_score(&self, train: &[usize], test: &[usize], params: &Params<F>) -> Result<Option<F>> {
        let (x, y) = self.data.subset(train);
        if ClassLabel::ALL
            .iter()
            .any(|c| y.iter().filter(|&&l| l == *c).count() < 2)
        {
            return Ok(None);
        }
        let model = svc::train_multiclass(
            &TrainingSet::new(x, y)?,
            &SvcParams::new(params.c, Kernel::rbf(params.gamma)?).with_tol(self.tol),
        )?;
        let mut correct = 0usize;
        for &i in test {
            if model.predict(&self.data.x()[i])? == self.data.y()[i] {
                correct += 1;
            }
        }
        Ok(Some(F::from_count(correct) / F::from_count(test.len())))
    }
}

/// SVR mean squared error as a cross-validation task over time-ordered
/// samples.
pub struct SvrTask<'a, F> {
    pub samples: &'a [SvrSample],
    pub first_year: i32,
    pub tol: F,
}

impl<F: Scalar> CvTask<F> for SvrTask<'_, F> {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn metric(&self) -> Metric {
        Metric::Mse
    }

    fn ordered(&self) -> bool {
        true
    }

    fn fold_score(&self, train: &[usize], test: &[usize], params: &Params<F>) -> Result<Option<F>> {
        let epsilon = params.epsilon.ok_or_else(|| {
            Error::InvalidParameter("regression grid needs epsilon candidates".into())
        })?;
        let train_samples: Vec<SvrSample> = train.iter().map(|&i| self.samples[i]).collect();
        let model = svr::train(
            &train_samples,
            self.first_year,
            &SvrParams::new(params.c, params.gamma, epsilon).with_tol(self.tol),
        )?;
        let predicted: Vec<F> = test
            .iter()
            .map(|&i| model.predict(&self.samples[i].features))
            .collect();
        let actual: Vec<F> = test
            .iter()
            .map(|&i| F::lit(self.samples[i].label))
            .collect();
        svr::mse(&predicted, &actual).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffled_folds_partition_rows() {
        let f = folds(10, Split::KFold(3), 9, false).unwrap();
        assert_eq!(f.len(), 3);
        let mut all: Vec<usize> = f.iter().flat_map(|(_, t)| t.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for (train, test) in &f {
            assert_eq!(train.len() + test.len(), 10);
            assert!(train.iter().all(|i| !test.contains(i)));
        }
        assert_eq!(f, folds(10, Split::KFold(3), 9, false).unwrap());
    }

    #[test]
    fn ordered_folds_never_look_ahead() {
        let f = folds(12, Split::KFold(3), 0, true).unwrap();
        assert_eq!(f.len(), 3);
        for (train, test) in &f {
            assert!(train.iter().max().unwrap() < test.iter().min().unwrap());
        }
        assert_eq!(f[0], ((0..3).collect(), (3..6).collect()));
    }

    #[test]
    fn holdout_split() {
        let f = folds(
            22,
            Split::Holdout {
                train_fraction: 21.0 / 22.0,
            },
            0,
            true,
        )
        .unwrap();
        assert_eq!(f, vec![((0..21).collect(), vec![21])]);
        assert!(folds(
            3,
            Split::Holdout {
                train_fraction: 0.01
            },
            0,
            true
        )
        .is_err());
    }

    #[test]
    fn too_many_folds() {
        assert!(folds(3, Split::KFold(4), 0, false).is_err());
        assert!(folds(3, Split::KFold(3), 0, true).is_err());
    }

    #[test]
    fn grid_validation() {
        let mut g = GridSpec::<f64>::default_classification();
        assert!(g.validate().is_ok());
        assert_eq!(g.cells().len(), 24);
        g.gamma.push(-1.0);
        assert!(g.validate().is_err());
        g.gamma.clear();
        assert!(g.validate().is_err());
        let r = GridSpec::<f64>::default_regression(200.0, Split::KFold(3));
        assert_eq!(r.epsilon, vec![2.0, 10.0, 20.0]);
        assert_eq!(r.cells().len(), 72);
    }

    #[test]
    fn tie_break_prefers_smallest() {
        let row = |c: f64, gamma: f64, s: f64| ScoreRow {
            params: Params {
                c,
                gamma,
                epsilon: None,
            },
            score: Some(s),
        };
        let table = vec![
            row(10.0, 0.1, 0.9),
            row(1.0, 0.5, 0.9),
            row(1.0, 0.2, 0.9),
            row(0.1, 0.1, 0.5),
        ];
        let (p, s) = best_row(&table, Metric::Accuracy).unwrap();
        assert_eq!((p.c, p.gamma, s), (1.0, 0.2, 0.9));
        let (p, _) = best_row(&table, Metric::Mse).unwrap();
        assert_eq!(p.c, 0.1);
    }

    #[test]
    fn score_table_round_trip() {
        let table = vec![
            ScoreRow {
                params: Params {
                    c: 1.0,
                    gamma: 1.4e-3,
                    epsilon: Some(0.5),
                },
                score: Some(3.25),
            },
            ScoreRow {
                params: Params {
                    c: 10.0,
                    gamma: 1e-2,
                    epsilon: Some(0.5),
                },
                score: None,
            },
        ];
        let mut buf = Vec::new();
        write_score_table(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "C,gamma,epsilon,metric\n1,0.0014,0.5,3.25\n10,0.01,0.5,NaN\n"
        );
        assert_eq!(read_score_table(&buf[..]).unwrap(), table);
    }
}
