//! Two-step K-means classifier: Lloyd clustering of labeled training
//! profiles into three reference clusters, then nearest-centroid assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ingest::Profile;
use crate::scalar::{sq_dist, Scalar};
use crate::svc::{ClassLabel, Evaluation};

pub const K: usize = 3;
pub const MAX_ITER: usize = 300;

#[derive(Clone, Debug)]
pub struct KmeansFit<F> {
    pub centroids: Vec<Vec<F>>,
    /// Cluster of every input point after the last assignment step.
    pub assignments: Vec<usize>,
    /// Inertia after each assignment step, starting with the seeding.
    pub inertia_history: Vec<F>,
    pub iterations: usize,
}

impl<F: Scalar> KmeansFit<F> {
    pub fn inertia(&self) -> F {
        *self
            .inertia_history
            .last()
            .expect("at least one assignment")
    }
}

fn nearest<F: Scalar>(centroids: &[Vec<F>], x: &[F]) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Lloyd's algorithm with K = 3.
///
/// Seeding picks a random first centre, then repeatedly the point farthest
/// from the chosen centres (ties to the lowest index). Stops when assignments
/// no longer change or after [`MAX_ITER`] iterations. An emptied cluster is
/// reseeded at the point farthest from its assigned centroid.
pub fn fit<F: Scalar>(points: &[Vec<F>], seed: u64) -> Result<KmeansFit<F>> {
    let d = points.first().ok_or(Error::Empty("k-means input"))?.len();
    for p in points {
        check_dim(d, p.len())?;
    }
    let mut distinct: Vec<&Vec<F>> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
            if distinct.len() == K {
                break;
            }
        }
    }
    if distinct.len() < K {
        return Err(Error::TooFewDistinct {
            needed: K,
            found: distinct.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut min_d: Vec<F> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < K {
        let far = argmax(&min_d);
        centroids.push(points[far].clone());
        for (md, p) in min_d.iter_mut().zip(points) {
            *md = md.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut assignments = vec![usize::MAX; points.len()];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = F::zero();
        let mut dists = Vec::with_capacity(points.len());
        for (a, p) in assignments.iter_mut().zip(points) {
            let (k, dist) = nearest(&centroids, p);
            changed |= *a != k;
            *a = k;
            inertia += dist;
            dists.push(dist);
        }
        inertia_history.push(inertia);
        if !changed || iterations >= MAX_ITER {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![F::zero(); d]; K];
        let mut counts = [0usize; K];
        for (&k, p) in assignments.iter().zip(points) {
            counts[k] += 1;
            for (s, &v) in sums[k].iter_mut().zip(p) {
                *s += v;
            }
        }
        for k in 0..K {
            if counts[k] == 0 {
                let far = argmax(&dists);
                centroids[k] = points[far].clone();
                dists[far] = F::zero();
            } else {
                let n = F::from_count(counts[k]);
                centroids[k] = sums[k].iter().map(|&s| s / n).collect();
            }
        }
    }
    Ok(KmeansFit {
        centroids,
        assignments,
        inertia_history,
        iterations,
    })
}

fn argmax<F: Scalar>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Reference clusters named by class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct KmeansRef<F> {
    pub centroids: Vec<Vec<F>>,
    /// Class of each centroid; a permutation of {1, 2, 3}.
    pub centroid_to_class: Vec<ClassLabel>,
}

/// All assignments of classes to the three centroids, lexicographic.
const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Name centroids by the majority label of the training profiles closest to
/// them; when the majorities collide, take the permutation with the most
/// agreeing profiles (first in lexicographic order on ties).
pub fn align<F: Scalar>(
    centroids: &[Vec<F>],
    labeled: &[(Vec<F>, ClassLabel)],
) -> Result<KmeansRef<F>> {
    if centroids.len() != K {
        return Err(Error::InvalidInput(format!(
            "expected {K} centroids, got {}",
            centroids.len()
        )));
    }
    let d = centroids[0].len();
    let mut counts = [[0usize; 3]; K];
    for (x, label) in labeled {
        check_dim(d, x.len())?;
        let (k, _) = nearest(centroids, x);
        counts[k][label.index()] += 1;
    }
    if let Some(k) = (0..K).find(|&k| counts[k].iter().sum::<usize>() == 0) {
        return Err(Error::EmptyCluster(k));
    }
    let majority: Vec<usize> = counts
        .iter()
        .map(|c| {
            let mut best = 0;
            for l in 1..3 {
                if c[l] > c[best] {
                    best = l;
                }
            }
            best
        })
        .collect();
    let mut seen = [false; 3];
    let bijective = majority
        .iter()
        .all(|&l| !std::mem::replace(&mut seen[l], true));
    let mapping = if bijective {
        [majority[0], majority[1], majority[2]]
    } else {
        let score = |p: &[usize; 3]| (0..K).map(|k| counts[k][p[k]]).sum::<usize>();
        let mut best = PERMUTATIONS[0];
        for p in &PERMUTATIONS[1..] {
            if score(p) > score(&best) {
                best = *p;
            }
        }
        best
    };
    Ok(KmeansRef {
        centroids: centroids.to_vec(),
        centroid_to_class: mapping.iter().map(|&l| ClassLabel::from_index(l)).collect(),
    })
}

impl<F: Scalar> KmeansRef<F> {
    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    /// Class of the nearest centroid; equidistant centroids resolve to the
    /// lower class.
    pub fn assign_vector(&self, x: &[F]) -> Result<ClassLabel> {
        check_dim(self.dim(), x.len())?;
        let mut best: Option<(F, ClassLabel)> = None;
        for (c, &class) in self.centroids.iter().zip(&self.centroid_to_class) {
            let d = sq_dist(c, x);
            best = match best {
                Some((bd, bc)) if bd < d || (bd == d && bc < class) => Some((bd, bc)),
                _ => Some((d, class)),
            };
        }
        Ok(best.expect("three centroids").1)
    }

    pub fn assign(&self, profile: &Profile<F>) -> Result<ClassLabel> {
        self.assign_vector(&profile.values)
    }

    pub fn evaluate(&self, labeled: &[(Profile<F>, ClassLabel)]) -> Result<Evaluation> {
        let pairs = labeled
            .iter()
            .map(|(p, truth)| self.assign(p).map(|pred| (*truth, pred)))
            .collect::<Result<Vec<_>>>()?;
        Evaluation::from_pairs(pairs)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.centroids.len() != K || self.centroid_to_class.len() != K {
            return Err(Error::ModelFormat(format!(
                "k-means reference needs {K} centroids"
            )));
        }
        let d = self.dim();
        for c in &self.centroids {
            check_dim(d, c.len())?;
        }
        let mut seen = [false; 3];
        for c in &self.centroid_to_class {
            if std::mem::replace(&mut seen[c.index()], true) {
                return Err(Error::ModelFormat(
                    "centroid classes are not a bijection".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Fit on training profiles and name the clusters with their labels.
pub fn train<F: Scalar>(labeled: &[(Profile<F>, ClassLabel)], seed: u64) -> Result<KmeansRef<F>> {
    let points: Vec<Vec<F>> = labeled.iter().map(|(p, _)| p.values.clone()).collect();
    let fitted = fit(&points, seed)?;
    let pairs: Vec<(Vec<F>, ClassLabel)> = labeled
        .iter()
        .map(|(p, l)| (p.values.clone(), *l))
        .collect();
    align(&fitted.centroids, &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    #[test]
    fn three_points_are_their_own_centroids() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 5.0]];
        let f = fit(&pts, 7).unwrap();
        assert_eq!(f.inertia(), 0.0);
        let mut cs = f.centroids.clone();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(cs, want);
    }

    #[test]
    fn too_few_distinct_points() {
        let pts = vec![vec![1.0f64], vec![1.0], vec![2.0], vec![2.0]];
        assert!(matches!(
            fit(&pts, 0),
            Err(Error::TooFewDistinct {
                needed: 3,
                found: 2
            })
        ));
        assert!(fit::<f64>(&[], 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i * 37 % 11) as f64, (i * 13 % 7) as f64])
            .collect();
        let a = fit(&pts, 3).unwrap();
        let b = fit(&pts, 3).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.inertia_history, b.inertia_history);
    }

    #[test]
    fn duplicated_data_same_centroids() {
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![(i / 5) as f64 * 10.0 + (i % 5) as f64 * 0.1, 1.0])
            .collect();
        let twice: Vec<Vec<f64>> = pts.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
        let mut a = fit(&pts, 1).unwrap().centroids;
        let mut b = fit(&twice, 1).unwrap().centroids;
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    fn centroids() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]]
    }

    #[test]
    fn align_majority() {
        let mut labeled = Vec::new();
        for i in 0..10 {
            let wrong = i == 0;
            labeled.push((
                vec![0.1, 0.0],
                if wrong { EveningPeak } else { MorningPeak },
            ));
            labeled.push((vec![10.1, 0.0], EveningPeak));
            labeled.push((vec![0.0, 10.1], AlwaysLoaded));
        }
        let r = align(&centroids(), &labeled).unwrap();
        assert_eq!(
            r.centroid_to_class,
            vec![MorningPeak, EveningPeak, AlwaysLoaded]
        );
    }

    #[test]
    fn align_resolves_collisions_by_permutation() {
        // Centroids 0 and 1 both have majority class 1.
        let labeled = vec![
            (vec![0.0, 0.0], AlwaysLoaded),
            (vec![0.0, 0.0], AlwaysLoaded),
            (vec![0.0, 0.0], MorningPeak),
            (vec![10.0, 0.0], AlwaysLoaded),
            (vec![10.0, 0.0], AlwaysLoaded),
            (vec![10.0, 0.0], AlwaysLoaded),
            (vec![0.0, 10.0], EveningPeak),
        ];
        let r = align(&centroids(), &labeled).unwrap();
        // [2,1,3]: 1 + 3 + 1 = 5 agreements beats [1,2,3] (2 + 0 + 1).
        assert_eq!(
            r.centroid_to_class,
            vec![MorningPeak, AlwaysLoaded, EveningPeak]
        );
    }

    #[test]
    fn align_empty_cluster() {
        let labeled = vec![
            (vec![0.0, 0.0], AlwaysLoaded),
            (vec![10.0, 0.0], MorningPeak),
        ];
        assert!(matches!(
            align(&centroids(), &labeled),
            Err(Error::EmptyCluster(2))
        ));
    }

    #[test]
    fn assign_nearest_and_tie() {
        let r = KmeansRef {
            centroids: centroids(),
            centroid_to_class: vec![AlwaysLoaded, EveningPeak, MorningPeak],
        };
        assert_eq!(r.assign_vector(&[10.0, 0.0]).unwrap(), EveningPeak);
        // Equidistant from classes 3 (10,0) and 2 (0,10).
        assert_eq!(r.assign_vector(&[10.0, 10.0]).unwrap(), MorningPeak);
        assert!(r.assign_vector(&[1.0]).is_err());
    }
}
