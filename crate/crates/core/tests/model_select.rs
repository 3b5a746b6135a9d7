use cellplan::model_select::{
    best_row, folds, grid_search, kfold_score, read_score_table, write_score_table, CvTask,
    GridSpec, Metric, Params, SearchMode, Split, SvcTask, SvrTask, DEFAULT_GAMMA,
};
use cellplan::svc::{ClassLabel, TrainingSet};
use cellplan::svr::build_features;
use cellplan::synthgen::{default_start, gen_weekly, TemplateConfig, WORKWEEK_MAP};
use cellplan::Result;

/// Predicts the mean training label.
struct MeanTask(Vec<f64>);

impl CvTask<f64> for MeanTask {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn metric(&self) -> Metric {
        Metric::Mse
    }
    fn ordered(&self) -> bool {
        true
    }
    fn fold_score(&self, train: &[usize], test: &[usize], _: &Params<f64>) -> Result<Option<f64>> {
        let mean = train.iter().map(|&i| self.0[i]).sum::<f64>() / train.len() as f64;
        Ok(Some(
            test.iter()
                .map(|&i| (self.0[i] - mean).powi(2))
                .sum::<f64>()
                / test.len() as f64,
        ))
    }
}

fn params() -> Params<f64> {
    Params {
        c: 1.0,
        gamma: 1.0,
        epsilon: None,
    }
}

#[test]
fn three_fold_forward_mse_by_hand() {
    // Blocks [1,2] [3,4] [5,6] [7,8]; means 1.5, 2.5, 3.5 against the next block.
    let task = MeanTask((1..=8).map(f64::from).collect());
    let score = kfold_score(&task, &params(), Split::KFold(3), 0).unwrap();
    assert_eq!(score.per_fold, vec![Some(4.25), Some(9.25), Some(16.25)]);
    assert!((score.mean - 29.75 / 3.0).abs() < 1e-12);
}

#[test]
fn ordered_folds_never_train_on_the_future() {
    for k in 2..6 {
        for (train, test) in folds(50, Split::KFold(k), 9, true).unwrap() {
            assert!(train.iter().max() < test.iter().min());
        }
    }
}

#[test]
fn shuffled_folds_partition_the_rows() {
    let f = folds(23, Split::KFold(5), 4, false).unwrap();
    let mut tests: Vec<usize> = f.iter().flat_map(|(_, t)| t.clone()).collect();
    tests.sort_unstable();
    assert_eq!(tests, (0..23).collect::<Vec<_>>());
    assert_eq!(f, folds(23, Split::KFold(5), 4, false).unwrap());
}

/// Memorizes the training rows and answers with the wrong label otherwise.
struct Memorizer(Vec<u8>);

impl CvTask<f64> for Memorizer {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn metric(&self) -> Metric {
        Metric::Accuracy
    }
    fn ordered(&self) -> bool {
        false
    }
    fn fold_score(&self, train: &[usize], test: &[usize], _: &Params<f64>) -> Result<Option<f64>> {
        let correct = test.iter().filter(|i| train.contains(i)).count();
        Ok(Some(correct as f64 / test.len() as f64))
    }
}

#[test]
fn memorizer_scores_zero() {
    let s = kfold_score(&Memorizer(vec![0; 10]), &params(), Split::KFold(2), 1).unwrap();
    assert_eq!(s.mean, 0.0);
}

#[test]
fn separable_data_scores_one() {
    let x: Vec<Vec<f64>> = (0..18).map(|i| vec![(i % 3) as f64 * 10.0, 0.5]).collect();
    let y: Vec<ClassLabel> = (0..18).map(|i| ClassLabel::from_index(i % 3)).collect();
    let data = TrainingSet::new(x, y).unwrap();
    let task = SvcTask {
        data: &data,
        tol: 1e-3,
    };
    for k in [2, 3] {
        let s = kfold_score(
            &task,
            &Params {
                c: 10.0,
                gamma: 0.1,
                epsilon: None,
            },
            Split::KFold(k),
            2,
        )
        .unwrap();
        assert_eq!(s.mean, 1.0);
    }
}

#[test]
fn single_cell_grid() {
    let task = MeanTask(vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0]);
    let grid = GridSpec {
        c: vec![3.0],
        gamma: vec![0.5],
        epsilon: vec![0.1],
        metric: Metric::Mse,
        split: Split::KFold(2),
        mode: SearchMode::Cartesian,
    };
    let r = grid_search(&task, &grid, 0).unwrap();
    assert_eq!(r.table.len(), 1);
    assert_eq!(r.best, r.table[0].params);
    assert_eq!(Some(r.best_score), r.table[0].score);
}

fn weekly_samples(weeks: usize) -> Vec<cellplan::svr::SvrSample> {
    let days: Vec<_> = gen_weekly(
        "s",
        &WORKWEEK_MAP,
        &TemplateConfig::default(),
        default_start(),
        weeks,
        3,
    )
    .unwrap()
    .into_iter()
    .map(|(s, _)| s)
    .collect();
    build_features(&days, None).unwrap()
}

#[test]
fn gamma_curve_minimum_is_the_returned_gamma() {
    let samples = weekly_samples(1);
    let task = SvrTask {
        samples: &samples,
        first_year: 2013,
        tol: 1e-3,
    };
    let gammas = vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let grid = GridSpec {
        c: vec![10.0],
        gamma: gammas.clone(),
        epsilon: vec![4.0],
        metric: Metric::Mse,
        split: Split::KFold(2),
        mode: SearchMode::Cartesian,
    };
    let r = grid_search(&task, &grid, 0).unwrap();
    let mut buf = Vec::new();
    write_score_table(&mut buf, &r.table).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("C,gamma,epsilon,metric"));
    let exported = read_score_table(buf.as_slice()).unwrap();
    assert_eq!(exported.len(), gammas.len());

    // Re-evaluate every γ independently and scan for the minimum.
    let mut best = (f64::INFINITY, 0.0);
    for (row, &g) in exported.iter().zip(&gammas) {
        let p = Params {
            c: 10.0,
            gamma: g,
            epsilon: Some(4.0),
        };
        let again = kfold_score(&task, &p, Split::KFold(2), 0).unwrap().mean;
        assert_eq!(row.score, Some(again));
        if again < best.0 {
            best = (again, g);
        }
    }
    assert_eq!(r.best.gamma, best.1);
    assert_eq!(best_row(&exported, Metric::Mse).unwrap().0.gamma, best.1);
}

#[test]
fn best_cell_is_table_optimum_with_small_params_on_ties() {
    let task = MeanTask(vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
    let grid = GridSpec {
        c: vec![10.0, 1.0],
        gamma: vec![0.2, 0.1],
        epsilon: vec![],
        metric: Metric::Mse,
        split: Split::KFold(3),
        mode: SearchMode::Cartesian,
    };
    let r = grid_search(&task, &grid, 0).unwrap();
    assert_eq!((r.best.c, r.best.gamma), (1.0, 0.1));
    assert!(r.table.iter().all(|row| row.score.unwrap() >= r.best_score));
    assert_eq!(r, grid_search(&task, &grid, 0).unwrap());
}

#[test]
fn default_grid_contains_reference_gamma() {
    assert!(DEFAULT_GAMMA.contains(&1.4e-3));
    let g = GridSpec::<f64>::default_regression(100.0, Split::KFold(3));
    assert_eq!(g.epsilon, vec![1.0, 5.0, 10.0]);
    assert_eq!(g.cells().len(), 72);
}
