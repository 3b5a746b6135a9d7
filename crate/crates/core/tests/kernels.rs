use cellplan::kernels::Kernel;
use cellplan_testkit::{min_eigenvalue_deflation, symmetric_eigenvalues};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

fn rows(g: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    g.outer_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn rbf_gram_is_psd() {
    for seed in 0..20 {
        let xs = random_points(seed, 10, 3);
        let g = rows(&Kernel::rbf(0.7).unwrap().gram(&xs).unwrap());
        let lowest = min_eigenvalue_deflation(&g);
        assert!(lowest >= -1e-8, "seed {seed}: {lowest}");
        assert!(symmetric_eigenvalues(&g)[0] >= -1e-8);
    }
}

#[test]
fn f32_gram_matches_f64() {
    let xs = random_points(9, 6, 4);
    let xs32: Vec<Vec<f32>> = xs
        .iter()
        .map(|x| x.iter().map(|&v| v as f32).collect())
        .collect();
    let g = Kernel::rbf(0.5).unwrap().gram(&xs).unwrap();
    let g32 = Kernel::rbf(0.5f32).unwrap().gram(&xs32).unwrap();
    for (a, b) in g.iter().zip(g32.iter()) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
}

proptest! {
    #[test]
    fn gram_symmetric_and_bounded(seed in 0u64..10_000, gamma in 0.01f64..5.0, n in 1usize..12) {
        let xs = random_points(seed, n, 2);
        let g = Kernel::rbf(gamma).unwrap().gram(&xs).unwrap();
        for i in 0..n {
            prop_assert_eq!(g[[i, i]], 1.0);
            for j in 0..n {
                prop_assert_eq!(g[[i, j]], g[[j, i]]);
                prop_assert!(g[[i, j]] > 0.0 && g[[i, j]] <= 1.0);
            }
        }
    }
}
