use cellplan::kmeans::{align, fit, KmeansRef};
use cellplan::ClassLabel;
use cellplan_testkit::{best_3_partition, best_alignment, same_partition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Three groups of `n` points around well-separated centres.
fn groups(seed: u64, n: usize, spread: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [[0.0, 0.0, 0.0], [6.0, 0.0, 1.0], [0.0, 7.0, -2.0]];
    let noise = Normal::new(0.0, spread).unwrap();
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (g, c) in centres.iter().enumerate() {
        for _ in 0..n {
            points.push(c.iter().map(|v| v + noise.sample(&mut rng)).collect());
            truth.push(g);
        }
    }
    (points, truth)
}

fn mean(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    (0..d)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / points.len() as f64)
        .collect()
}

#[test]
fn tight_groups_recover_their_means() {
    for seed in 0..10 {
        let (points, truth) = groups(seed, 10, 0.1);
        let f = fit(&points, seed).unwrap();
        assert!(same_partition(&f.assignments, &truth));
        for g in 0..3 {
            let members: Vec<Vec<f64>> = (0..30)
                .filter(|&i| truth[i] == g)
                .map(|i| points[i].clone())
                .collect();
            let c = &f.centroids[f.assignments[g * 10]];
            for (a, b) in c.iter().zip(mean(&members)) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn nine_point_subsample_matches_exhaustive_partition() {
    for seed in 0..10 {
        let (points, _) = groups(100 + seed, 10, 0.1);
        let sub: Vec<Vec<f64>> = [0, 4, 8, 10, 13, 17, 21, 25, 29]
            .iter()
            .map(|&i| points[i].clone())
            .collect();
        let f = fit(&sub, seed).unwrap();
        let (sse, best) = best_3_partition(&sub);
        assert!(same_partition(&f.assignments, &best));
        assert!((f.inertia() - sse).abs() <= 1e-9);
    }
}

#[test]
fn duplicated_data_keeps_centroids() {
    let (points, _) = groups(5, 8, 0.2);
    let mut doubled = points.clone();
    doubled.extend(points.iter().cloned());
    let mut a = fit(&points, 1).unwrap().centroids;
    let mut b = fit(&doubled, 1).unwrap().centroids;
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

fn majority(counts: &[[usize; 3]; 3]) -> [usize; 3] {
    let mut out = [0; 3];
    for k in 0..3 {
        let mut best = 0;
        for l in 0..3 {
            if counts[k][l] > counts[k][best] {
                best = l;
            }
        }
        out[k] = best;
    }
    out
}

#[test]
fn alignment_matches_permutation_enumeration() {
    let centroids = vec![vec![0.0], vec![10.0], vec![20.0]];
    let mut collisions = 0;
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut clusters = Vec::new();
        let mut labels = Vec::new();
        let mut labeled = Vec::new();
        let mut counts = [[0usize; 3]; 3];
        for k in 0..3 {
            for _ in 0..6 {
                let l = rng.random_range(0..3);
                clusters.push(k);
                labels.push(l);
                counts[k][l] += 1;
                labeled.push((vec![k as f64 * 10.0], ClassLabel::from_index(l)));
            }
        }
        let r = align(&centroids, &labeled).unwrap();
        let got: Vec<usize> = r.centroid_to_class.iter().map(|c| c.index()).collect();
        let m = majority(&counts);
        let bijective = m[0] != m[1] && m[1] != m[2] && m[0] != m[2];
        let want = if bijective {
            m
        } else {
            collisions += 1;
            best_alignment(&clusters, &labels)
        };
        assert_eq!(got, want.to_vec(), "seed {seed}");
    }
    assert!(collisions > 0);
}

#[test]
fn adversarial_two_two_two() {
    // Every cluster holds two of each label: all permutations tie.
    let centroids = vec![vec![0.0], vec![10.0], vec![20.0]];
    let labeled: Vec<(Vec<f64>, ClassLabel)> = (0..18)
        .map(|i| (vec![(i / 6) as f64 * 10.0], ClassLabel::from_index(i % 3)))
        .collect();
    let r = align(&centroids, &labeled).unwrap();
    assert_eq!(
        r.centroid_to_class,
        vec![
            ClassLabel::AlwaysLoaded,
            ClassLabel::MorningPeak,
            ClassLabel::EveningPeak
        ]
    );
}

#[test]
fn empty_cluster_is_an_error() {
    let centroids = vec![vec![0.0], vec![10.0], vec![20.0]];
    let labeled = vec![
        (vec![0.0], ClassLabel::AlwaysLoaded),
        (vec![9.0], ClassLabel::MorningPeak),
    ];
    assert!(matches!(
        align(&centroids, &labeled),
        Err(cellplan::Error::EmptyCluster(2))
    ));
}

#[test]
fn equidistant_goes_to_lower_class() {
    let r = KmeansRef {
        centroids: vec![vec![1.0], vec![-1.0], vec![5.0]],
        centroid_to_class: vec![
            ClassLabel::EveningPeak,
            ClassLabel::MorningPeak,
            ClassLabel::AlwaysLoaded,
        ],
    };
    assert_eq!(r.assign_vector(&[0.0]).unwrap(), ClassLabel::MorningPeak);
    assert_eq!(r.assign_vector(&[5.0]).unwrap(), ClassLabel::AlwaysLoaded);
    assert!(r.assign_vector(&[0.0, 1.0]).is_err());
}

proptest! {
    #[test]
    fn inertia_never_increases(seed in 0u64..10_000, n in 4usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let f = fit(&points, seed).unwrap();
        for w in f.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn assignment_invariant_under_coordinate_permutation(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = || -> Vec<f64> { (0..4).map(|_| rng.random_range(0.0..1.0)).collect() };
        let centroids = vec![v(), v(), v()];
        let q = v();
        let perm = [2, 0, 3, 1];
        let apply = |x: &Vec<f64>| -> Vec<f64> { perm.iter().map(|&i| x[i]).collect() };
        let classes = vec![ClassLabel::MorningPeak, ClassLabel::EveningPeak, ClassLabel::AlwaysLoaded];
        let a = KmeansRef { centroids: centroids.clone(), centroid_to_class: classes.clone() };
        let b = KmeansRef { centroids: centroids.iter().map(apply).collect(), centroid_to_class: classes };
        prop_assert_eq!(a.assign_vector(&q).unwrap(), b.assign_vector(&apply(&q)).unwrap());
    }
}
