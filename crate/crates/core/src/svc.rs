//! Soft-margin kernel SVM and the three-class station classifier.
//!
//! The binary machine solves the usual dual
//! `max Σα − ½ ΣΣ α_i α_j y_i y_j K(x_i, x_j)` with `0 ≤ α ≤ C`,
//! `Σ α_i y_i = 0` through [`crate::smo`]. Three classes are handled one
//! against one: a model per class pair, majority vote at prediction time.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ingest::Profile;
use crate::kernels::Kernel;
use crate::scalar::Scalar;
use crate::smo::{Problem, SolverParams};

/// Station load class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ClassLabel {
    /// Flat load over the whole day.
    AlwaysLoaded = 1,
    /// Peak between 08:00 and 14:00.
    MorningPeak = 2,
    /// Load concentrated in the evening and night.
    EveningPeak = 3,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [
        ClassLabel::AlwaysLoaded,
        ClassLabel::MorningPeak,
        ClassLabel::EveningPeak,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

impl From<ClassLabel> for u8 {
    fn from(c: ClassLabel) -> u8 {
        c.id()
    }
}

impl TryFrom<u8> for ClassLabel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(ClassLabel::AlwaysLoaded),
            2 => Ok(ClassLabel::MorningPeak),
            3 => Ok(ClassLabel::EveningPeak),
            _ => Err(Error::InvalidInput(format!("class label {v} not in 1..=3"))),
        }
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| Error::InvalidInput(format!("bad class label {s:?}")))
            .and_then(ClassLabel::try_from)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Labeled feature vectors of equal dimension.
#[derive(Clone, Debug)]
pub struct TrainingSet<F, L> {
    x: Vec<Vec<F>>,
    y: Vec<L>,
}

impl<F: Scalar, L: Copy> TrainingSet<F, L> {
    pub fn new(x: Vec<Vec<F>>, y: Vec<L>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} vectors but {} labels",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidInput(
                "training set needs at least 2 rows".into(),
            ));
        }
        let d = x[0].len();
        for row in &x {
            check_dim(d, row.len())?;
        }
        Ok(TrainingSet { x, y })
    }

    pub fn x(&self) -> &[Vec<F>] {
        &self.x
    }

    pub fn y(&self) -> &[L] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> (Vec<Vec<F>>, Vec<L>) {
        (
            idx.iter().map(|&i| self.x[i].clone()).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct SvcParams<F> {
    pub c: F,
    pub kernel: Kernel<F>,
    pub tol: F,
    /// Cap on pair updates, in units of `m` (training rows). `None` means
    /// `10·m` sweeps, i.e. `10·m²` updates.
    pub max_passes: Option<usize>,
}

impl<F: Scalar> SvcParams<F> {
    pub fn new(c: F, kernel: Kernel<F>) -> Self {
        SvcParams {
            c,
            kernel,
            tol: F::lit(1e-3),
            max_passes: None,
        }
    }

    pub fn with_tol(mut self, tol: F) -> Self {
        self.tol = tol;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.c > F::zero() && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol > F::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        self.kernel.validate()
    }

    pub(crate) fn max_iter(&self, m: usize) -> usize {
        self.max_passes.unwrap_or(10 * m).saturating_mul(m).max(1)
    }
}

/// Two-class kernel machine. `dual_coefs[k] = α_k y_k` for each retained
/// support vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct BinaryModel<F> {
    pub support_vectors: Vec<Vec<F>>,
    pub dual_coefs: Vec<F>,
    pub bias: F,
    pub kernel: Kernel<F>,
    pub c: F,
}

/// Binary model plus solver diagnostics.
#[derive(Clone, Debug)]
pub struct BinaryFit<F> {
    pub model: BinaryModel<F>,
    /// α for every training row, in input order.
    pub alphas: Vec<F>,
    pub iterations: usize,
    pub violation: F,
    /// Dual objective `Σα − ½ αᵀQα` at the solution.
    pub dual_objective: F,
    /// Dual objective after each update, when requested.
    pub objective_trace: Vec<F>,
}

impl<F: Scalar> BinaryModel<F> {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[F]) -> Result<F> {
        if !self.support_vectors.is_empty() {
            check_dim(self.dim(), x.len())?;
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[F]) -> F {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &a)| a * self.kernel.eval_unchecked(sv, x))
            .sum::<F>()
            + self.bias
    }
}

/// Train a binary machine on `y ∈ {−1, +1}` (`true` is `+1`).
pub fn fit_binary<F: Scalar>(
    data: &TrainingSet<F, bool>,
    params: &SvcParams<F>,
    trace: bool,
) -> Result<BinaryFit<F>> {
    params.validate()?;
    let pos = data.y().iter().filter(|&&y| y).count();
    if pos == 0 || pos == data.len() {
        return Err(Error::SingleClass);
    }
    let m = data.len();
    let problem = Problem {
        signs: data.y().to_vec(),
        linear: vec![-F::one(); m],
        c: params.c,
        kernel: params.kernel,
        samples: data.x(),
    };
    let sol = problem.solve(&SolverParams {
        tol: params.tol,
        max_iter: params.max_iter(m),
        trace_objective: trace,
    })?;

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for ((x, &y), &a) in data.x().iter().zip(data.y()).zip(&sol.beta) {
        if a > F::zero() {
            support_vectors.push(x.clone());
            dual_coefs.push(if y { a } else { -a });
        }
    }
    Ok(BinaryFit {
        model: BinaryModel {
            support_vectors,
            dual_coefs,
            bias: sol.bias,
            kernel: params.kernel,
            c: params.c,
        },
        alphas: sol.beta,
        iterations: sol.iterations,
        violation: sol.violation,
        dual_objective: -sol.objective,
        objective_trace: sol.objective_trace.into_iter().map(|f| -f).collect(),
    })
}

pub fn train_binary<F: Scalar>(
    data: &TrainingSet<F, bool>,
    params: &SvcParams<F>,
) -> Result<BinaryModel<F>> {
    fit_binary(data, params, false).map(|f| f.model)
}

/// Class pairs in model order. The first class of a pair is the positive one.
pub const PAIRS: [(ClassLabel, ClassLabel); 3] = [
    (ClassLabel::AlwaysLoaded, ClassLabel::MorningPeak),
    (ClassLabel::AlwaysLoaded, ClassLabel::EveningPeak),
    (ClassLabel::MorningPeak, ClassLabel::EveningPeak),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MulticlassModel<F> {
    /// One model per entry of [`PAIRS`], same order.
    pub pairwise_models: Vec<BinaryModel<F>>,
    pub dim: usize,
}

pub fn train_multiclass<F: Scalar>(
    data: &TrainingSet<F, ClassLabel>,
    params: &SvcParams<F>,
) -> Result<MulticlassModel<F>> {
    params.validate()?;
    for class in ClassLabel::ALL {
        let count = data.y().iter().filter(|&&y| y == class).count();
        if count < 2 {
            return Err(Error::TooFewExamples {
                class: class.id(),
                count,
            });
        }
    }
    let pairwise_models = PAIRS
        .par_iter()
        .map(|&(a, b)| {
            let idx: Vec<usize> = (0..data.len())
                .filter(|&i| data.y()[i] == a || data.y()[i] == b)
                .collect();
            let (x, y) = data.subset(&idx);
            let pair = TrainingSet::new(x, y.into_iter().map(|l| l == a).collect())?;
            train_binary(&pair, params).map_err(|e| Error::Pair(a.id(), b.id(), Box::new(e)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassModel {
        pairwise_models,
        dim: data.dim(),
    })
}

impl<F: Scalar> MulticlassModel<F> {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.pairwise_models.len() != PAIRS.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} pairwise models, found {}",
                PAIRS.len(),
                self.pairwise_models.len()
            )));
        }
        for m in &self.pairwise_models {
            if m.support_vectors.len() != m.dual_coefs.len() {
                return Err(Error::ModelFormat(
                    "support vector / coefficient count mismatch".into(),
                ));
            }
            for sv in &m.support_vectors {
                check_dim(self.dim, sv.len())?;
            }
            m.kernel.validate()?;
        }
        Ok(())
    }

    /// Majority vote over the pairwise machines. Ties go to the label with
    /// the largest summed |decision| among its winning votes, then to the
    /// lowest label.
    pub fn predict(&self, x: &[F]) -> Result<ClassLabel> {
        check_dim(self.dim, x.len())?;
        let mut votes = [0usize; 3];
        let mut margin = [F::zero(); 3];
        for (model, &(a, b)) in self.pairwise_models.iter().zip(&PAIRS) {
            let f = model.decision_unchecked(x);
            let winner = if f > F::zero() { a } else { b };
            votes[winner.index()] += 1;
            margin[winner.index()] += f.abs();
        }
        let mut best = 0;
        for k in 1..3 {
            if votes[k] > votes[best] || (votes[k] == votes[best] && margin[k] > margin[best]) {
                best = k;
            }
        }
        Ok(ClassLabel::from_index(best))
    }

    /// Daily class of a profile; flat (degenerate) days are class 1.
    pub fn classify(&self, profile: &Profile<F>) -> Result<ClassLabel> {
        check_dim(self.dim, profile.values.len())?;
        if profile.degenerate {
            return Ok(ClassLabel::AlwaysLoaded);
        }
        self.predict(&profile.values)
    }
}

/// Table-I style scores.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Share of each true class predicted correctly; `None` when the class is
    /// absent from the set.
    pub per_class: [Option<f64>; 3],
    pub total: f64,
    /// `confusion[truth][predicted]`, indexed by class − 1.
    pub confusion: [[usize; 3]; 3],
}

impl Evaluation {
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ClassLabel, ClassLabel)>,
    {
        let mut confusion = [[0usize; 3]; 3];
        for (truth, pred) in pairs {
            confusion[truth.index()][pred.index()] += 1;
        }
        let n: usize = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::Empty("labeled evaluation set"));
        }
        let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
        let per_class = std::array::from_fn(|k| {
            let size: usize = confusion[k].iter().sum();
            (size > 0).then(|| confusion[k][k] as f64 / size as f64)
        });
        Ok(Evaluation {
            per_class,
            total: correct as f64 / n as f64,
            confusion,
        })
    }

    pub fn incorrect(&self) -> usize {
        let n: usize = self.confusion.iter().flatten().sum();
        n - (0..3).map(|k| self.confusion[k][k]).sum::<usize>()
    }
}

pub fn evaluate<F: Scalar>(
    model: &MulticlassModel<F>,
    labeled: &[(Profile<F>, ClassLabel)],
) -> Result<Evaluation> {
    let pairs = labeled
        .iter()
        .map(|(p, truth)| model.classify(p).map(|pred| (*truth, pred)))
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_pairs(pairs)
}
