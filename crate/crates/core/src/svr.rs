//! ε-support-vector regression of a station's load on calendar features.
//!
//! Each sample is a 10-minute interval described by (interval number,
//! weekday, ISO week, year index); the label is the raw distinct-user count.
//! Features are min-max scaled per component inside the model before the RBF
//! kernel is applied.

use std::collections::HashSet;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ingest::{LoadSeries, BINS_PER_DAY};
use crate::kernels::Kernel;
use crate::scalar::Scalar;
use crate::smo::{Problem, SolverParams};

pub const N_FEATURES: usize = 4;

/// Calendar description of one 10-minute interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector4 {
    /// Interval `k` covers `[10(k−1), 10k)` minutes after midnight, 1..=144.
    pub interval: u32,
    /// ISO weekday, 1 = Monday.
    pub weekday: u32,
    /// ISO week number, 1..=52 (week 53 folds onto 52).
    pub week: u32,
    /// 1-based year index relative to the first year of the data.
    pub year: u32,
}

impl FeatureVector4 {
    pub fn new(interval: u32, weekday: u32, week: u32, year: u32) -> Result<Self> {
        let f = FeatureVector4 {
            interval,
            weekday,
            week,
            year,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (1..=BINS_PER_DAY as u32).contains(&self.interval)
            && (1..=7).contains(&self.weekday)
            && (1..=52).contains(&self.week)
            && self.year >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "feature vector out of range: {self:?}"
            )))
        }
    }

    pub fn to_array(self) -> [f64; N_FEATURES] {
        [
            self.interval as f64,
            self.weekday as f64,
            self.week as f64,
            self.year as f64,
        ]
    }
}

/// Calendar fields of a day: (weekday, week, year index).
pub fn calendar(date: NaiveDate, first_year: i32) -> (u32, u32, u32) {
    let weekday = date.weekday().number_from_monday();
    let week = date.iso_week().week().min(52);
    let year = (date.year() - first_year + 1).max(1) as u32;
    (weekday, week, year)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrSample {
    pub features: FeatureVector4,
    pub label: f64,
}

/// One sample per (day, bin) of a single site's history.
///
/// `first_year` anchors the year index; `None` uses the earliest year
/// present.
pub fn build_features(series: &[LoadSeries], first_year: Option<i32>) -> Result<Vec<SvrSample>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let mut seen = HashSet::new();
    for s in series {
        if s.site_id != first.site_id {
            return Err(Error::InvalidInput(format!(
                "series mix sites {} and {}",
                first.site_id, s.site_id
            )));
        }
        if !seen.insert(s.date) {
            return Err(Error::DuplicateDay {
                site: s.site_id.clone(),
                date: s.date.to_string(),
            });
        }
    }
    let first_year =
        first_year.unwrap_or_else(|| series.iter().map(|s| s.date.year()).min().unwrap());
    let mut out = Vec::with_capacity(series.len() * BINS_PER_DAY);
    for s in series {
        let (weekday, week, year) = calendar(s.date, first_year);
        for (b, &count) in s.bins().iter().enumerate() {
            out.push(SvrSample {
                features: FeatureVector4 {
                    interval: b as u32 + 1,
                    weekday,
                    week,
                    year,
                },
                label: count as f64,
            });
        }
    }
    Ok(out)
}

/// Per-component affine map onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct FeatureScaling<F> {
    pub min: Vec<F>,
    /// Zero-width components are mapped to 0.
    pub width: Vec<F>,
}

impl<F: Scalar> FeatureScaling<F> {
    /// Scale each calendar feature by its domain (interval 1..=144, weekday
    /// 1..=7, week 1..=52, year 1..=`years`), so a day just after the
    /// training history still lands inside the unit cube.
    pub fn calendar(years: u32) -> Self {
        let lo = [1.0, 1.0, 1.0, 1.0];
        let hi = [BINS_PER_DAY as f64, 7.0, 52.0, years.max(1) as f64];
        FeatureScaling {
            min: lo.iter().map(|&v| F::lit(v)).collect(),
            width: lo.iter().zip(&hi).map(|(&l, &h)| F::lit(h - l)).collect(),
        }
    }

    pub fn apply(&self, x: &[f64; N_FEATURES]) -> Vec<F> {
        x.iter()
            .zip(self.min.iter().zip(&self.width))
            .map(|(&v, (&lo, &w))| {
                if w > F::zero() {
                    (F::lit(v) - lo) / w
                } else {
                    F::zero()
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SvrParams<F> {
    pub c: F,
    pub gamma: F,
    pub epsilon: F,
    pub tol: F,
    /// Cap on pair updates in units of `2m` variables; `None` means `10·m`.
    pub max_passes: Option<usize>,
}

impl<F: Scalar> SvrParams<F> {
    pub fn new(c: F, gamma: F, epsilon: F) -> Self {
        SvrParams {
            c,
            gamma,
            epsilon,
            tol: F::lit(1e-3),
            max_passes: None,
        }
    }

    pub fn with_tol(mut self, tol: F) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("C", self.c),
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
            ("tol", self.tol),
        ] {
            if !(v > F::zero() && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Trained regressor. `coefs[k] = α_k − α*_k` for each support vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SvrModel<F> {
    pub support_vectors: Vec<Vec<F>>,
    pub coefs: Vec<F>,
    pub bias: F,
    pub kernel: Kernel<F>,
    pub c: F,
    pub epsilon: F,
    pub scaling: FeatureScaling<F>,
    /// Calendar year that maps to year index 1.
    pub first_year: i32,
}

#[derive(Clone, Debug)]
pub struct SvrFit<F> {
    pub model: SvrModel<F>,
    /// `α_i − α*_i` for every training sample, in input order.
    pub coefs: Vec<F>,
    /// `α` and `α*` stacked, as seen by the solver.
    pub alphas: Vec<F>,
    pub iterations: usize,
    pub violation: F,
    /// `−½ΣΣ(α−α*)(α−α*)K − εΣ(α+α*) + Σ y(α−α*)`.
    pub dual_objective: F,
    pub objective_trace: Vec<F>,
}

/// Solve the ε-insensitive dual on already-scaled inputs.
pub fn fit_scaled<F: Scalar>(
    xs: &[Vec<F>],
    labels: &[F],
    params: &SvrParams<F>,
    trace: bool,
) -> Result<SvrFit<F>> {
    params.validate()?;
    if xs.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} inputs but {} labels",
            xs.len(),
            labels.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(
            "regression needs at least 2 samples".into(),
        ));
    }
    let d = xs[0].len();
    for x in xs {
        check_dim(d, x.len())?;
    }
    let m = xs.len();
    let kernel = Kernel::Rbf {
        gamma: params.gamma,
    };
    let mut signs = vec![true; m];
    signs.extend(std::iter::repeat_n(false, m));
    let mut linear: Vec<F> = labels.iter().map(|&y| params.epsilon - y).collect();
    linear.extend(labels.iter().map(|&y| params.epsilon + y));
    let problem = Problem {
        signs,
        linear,
        c: params.c,
        kernel,
        samples: xs,
    };
    let sol = problem.solve(&SolverParams {
        tol: params.tol,
        max_iter: params
            .max_passes
            .unwrap_or(10 * m)
            .saturating_mul(2 * m)
            .max(1),
        trace_objective: trace,
    })?;

    let coefs: Vec<F> = (0..m).map(|i| sol.beta[i] - sol.beta[m + i]).collect();
    let mut support_vectors = Vec::new();
    let mut sv_coefs = Vec::new();
    for (x, &c) in xs.iter().zip(&coefs) {
        if c != F::zero() {
            support_vectors.push(x.clone());
            sv_coefs.push(c);
        }
    }
    Ok(SvrFit {
        model: SvrModel {
            support_vectors,
            coefs: sv_coefs,
            bias: sol.bias,
            kernel,
            c: params.c,
            epsilon: params.epsilon,
            scaling: FeatureScaling {
                min: vec![F::zero(); d],
                width: vec![F::one(); d],
            },
            first_year: 0,
        },
        coefs,
        alphas: sol.beta,
        iterations: sol.iterations,
        violation: sol.violation,
        dual_objective: -sol.objective,
        objective_trace: sol.objective_trace.into_iter().map(|f| -f).collect(),
    })
}

/// Train on calendar samples; `first_year` is recorded so later predictions
/// use the same year index.
pub fn train<F: Scalar>(
    samples: &[SvrSample],
    first_year: i32,
    params: &SvrParams<F>,
) -> Result<SvrModel<F>> {
    for s in samples {
        s.features.validate()?;
        if !(s.label >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative load label {}",
                s.label
            )));
        }
    }
    let raw: Vec<[f64; N_FEATURES]> = samples.iter().map(|s| s.features.to_array()).collect();
    let years = samples.iter().map(|s| s.features.year).max().unwrap_or(1);
    let scaling = FeatureScaling::<F>::calendar(years);
    let xs: Vec<Vec<F>> = raw.iter().map(|x| scaling.apply(x)).collect();
    let labels: Vec<F> = samples.iter().map(|s| F::lit(s.label)).collect();
    let mut model = fit_scaled(&xs, &labels, params, false)?.model;
    model.scaling = scaling;
    model.first_year = first_year;
    Ok(model)
}

/// Train from one site's consecutive days.
pub fn train_series<F: Scalar>(
    series: &[LoadSeries],
    params: &SvrParams<F>,
) -> Result<SvrModel<F>> {
    let first_year = series
        .iter()
        .map(|s| s.date.year())
        .min()
        .ok_or(Error::Empty("series history"))?;
    let samples = build_features(series, Some(first_year))?;
    train(&samples, first_year, params)
}

impl<F: Scalar> SvrModel<F> {
    /// Raw prediction on a scaled input vector.
    pub fn predict_scaled(&self, x: &[F]) -> F {
        self.support_vectors
            .iter()
            .zip(&self.coefs)
            .map(|(sv, &c)| c * self.kernel.eval_unchecked(sv, x))
            .sum::<F>()
            + self.bias
    }

    pub fn predict(&self, x: &FeatureVector4) -> F {
        self.predict_scaled(&self.scaling.apply(&x.to_array()))
    }

    /// Forecast of a whole day, intervals 1..=144, clamped at zero.
    pub fn predict_day(&self, weekday: u32, week: u32, year: u32) -> Result<Vec<F>> {
        (1..=BINS_PER_DAY as u32)
            .map(|k| {
                let x = FeatureVector4::new(k, weekday, week, year)?;
                Ok(self.predict(&x).max(F::zero()))
            })
            .collect()
    }

    pub fn predict_date(&self, date: NaiveDate) -> Result<Vec<F>> {
        let (weekday, week, year) = calendar(date, self.first_year);
        self.predict_day(weekday, week, year)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_dim(N_FEATURES, self.scaling.min.len())?;
        check_dim(N_FEATURES, self.scaling.width.len())?;
        if self.support_vectors.len() != self.coefs.len() {
            return Err(Error::ModelFormat(
                "support vector / coefficient count mismatch".into(),
            ));
        }
        for sv in &self.support_vectors {
            check_dim(N_FEATURES, sv.len())?;
        }
        self.kernel.validate()
    }
}

pub fn mse<F: Scalar>(predicted: &[F], actual: &[F]) -> Result<F> {
    check_dim(actual.len(), predicted.len())?;
    if actual.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    let total: F = predicted
        .iter()
        .zip(actual)
        .map(|(&p, &a)| (p - a) * (p - a))
        .sum();
    Ok(total / F::from_count(actual.len()))
}

/// MSE after dividing both vectors by the range of `actual`; a constant
/// `actual` falls back to plain MSE.
pub fn normalized_mse<F: Scalar>(predicted: &[F], actual: &[F]) -> Result<F> {
    let raw = mse(predicted, actual)?;
    let lo = actual.iter().copied().fold(F::infinity(), F::min);
    let hi = actual.iter().copied().fold(F::neg_infinity(), F::max);
    let range = hi - lo;
    Ok(if range > F::zero() {
        raw / (range * range)
    } else {
        raw
    })
}

/// Write forecast rows `site_id,date,x1,predicted,actual`. The last column is
/// empty when no actual load is known.
pub fn write_predictions<W: Write, F: Scalar>(
    out: W,
    rows: &[(String, NaiveDate, Vec<F>, Option<Vec<u32>>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["site_id", "date", "x1", "predicted", "actual"])?;
    for (site, date, predicted, actual) in rows {
        for (k, p) in predicted.iter().enumerate() {
            let a = actual
                .as_ref()
                .map(|a| a[k].to_string())
                .unwrap_or_default();
            w.write_record([
                site.clone(),
                date.to_string(),
                (k + 1).to_string(),
                p.to_string(),
                a,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 1, 7).unwrap()
    }

    #[test]
    fn interval_numbering_and_calendar() {
        let mut bins = vec![0; BINS_PER_DAY];
        bins[60] = 4;
        let s = LoadSeries::new("s", monday(), bins).unwrap();
        let samples = build_features(&[s], None).unwrap();
        assert_eq!(samples.len(), 144);
        let hot = samples.iter().find(|s| s.label == 4.0).unwrap();
        assert_eq!(hot.features, FeatureVector4::new(61, 1, 2, 1).unwrap());
    }

    #[test]
    fn three_weeks_of_samples() {
        let series: Vec<LoadSeries> = (0..21)
            .map(|d| LoadSeries::new("s", monday() + chrono::Days::new(d), vec![1; 144]).unwrap())
            .collect();
        assert_eq!(build_features(&series, None).unwrap().len(), 21 * 144);
    }

    #[test]
    fn duplicate_day_rejected() {
        let s = LoadSeries::new("s", monday(), vec![1; 144]).unwrap();
        assert!(matches!(
            build_features(&[s.clone(), s], None),
            Err(Error::DuplicateDay { .. })
        ));
    }

    #[test]
    fn feature_ranges() {
        assert!(FeatureVector4::new(0, 1, 1, 1).is_err());
        assert!(FeatureVector4::new(145, 1, 1, 1).is_err());
        assert!(FeatureVector4::new(1, 8, 1, 1).is_err());
        assert!(FeatureVector4::new(1, 1, 53, 1).is_err());
        assert!(FeatureVector4::new(144, 7, 52, 3).is_ok());
        // 2015-12-31 is in ISO week 53.
        let d = NaiveDate::from_ymd_opt(2015, 12, 31).unwrap();
        assert_eq!(calendar(d, 2013), (4, 52, 3));
    }

    #[test]
    fn constant_labels_give_flat_model() {
        let samples: Vec<SvrSample> = (1..=30)
            .map(|k| SvrSample {
                features: FeatureVector4::new(k, 1 + k % 7, 3, 1).unwrap(),
                label: 7.0,
            })
            .collect();
        let model = train::<f64>(&samples, 2013, &SvrParams::new(10.0, 5.0, 0.1)).unwrap();
        assert!(model.support_vectors.is_empty());
        assert!((model.bias - 7.0).abs() < 1e-12);
        let day = model.predict_day(3, 10, 1).unwrap();
        assert!(day.iter().all(|&v| v == model.bias));
    }

    #[test]
    fn predict_day_clamps_negative() {
        let model = SvrModel::<f64> {
            support_vectors: vec![],
            coefs: vec![],
            bias: -2.5,
            kernel: Kernel::Rbf { gamma: 1.0 },
            c: 1.0,
            epsilon: 0.1,
            scaling: FeatureScaling {
                min: vec![0.0; 4],
                width: vec![1.0; 4],
            },
            first_year: 2013,
        };
        assert_eq!(
            model.predict(&FeatureVector4::new(1, 1, 1, 1).unwrap()),
            -2.5
        );
        assert_eq!(model.predict_day(1, 1, 1).unwrap(), vec![0.0; 144]);
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!(mse::<f64>(&[], &[]).is_err());
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        assert_eq!(
            normalized_mse(&[0.0, 2.0], &[0.0, 4.0]).unwrap(),
            2.0 / 16.0
        );
    }

    #[test]
    fn bad_parameters() {
        let xs = vec![vec![0.0], vec![1.0]];
        let y = vec![0.0, 1.0];
        assert!(fit_scaled(&xs, &y, &SvrParams::new(1.0, 0.0, 0.1), false).is_err());
        assert!(fit_scaled(&xs, &y, &SvrParams::new(1.0, 1.0, 0.0), false).is_err());
        assert!(fit_scaled(&xs[..1], &y[..1], &SvrParams::new(1.0, 1.0, 0.1), false).is_err());
    }

    #[test]
    fn prediction_export() {
        let mut buf = Vec::new();
        let rows = vec![(
            "s".to_owned(),
            monday(),
            vec![1.5f64, 2.0],
            Some(vec![1, 3]),
        )];
        write_predictions(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "site_id,date,x1,predicted,actual\ns,2013-01-07,1,1.5,1\ns,2013-01-07,2,2,3\n"
        );
    }
}
