//! Reference implementations used as test oracles.
//!
//! Everything here is deliberately slow and shares no code with the library:
//! plain `Vec<f64>`, brute force where the instance size allows it.

use std::collections::{BTreeMap, HashSet};

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

pub fn rbf_matrix(gamma: f64, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|a| xs.iter().map(|b| rbf(gamma, a, b)).collect())
        .collect()
}

/// Box-and-hyperplane constrained quadratic program
/// `min ½βᵀQβ + pᵀβ` s.t. `sᵀβ = 0`, `0 ≤ β ≤ c`.
pub struct BoxQp {
    pub q: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    pub c: f64,
}

impl BoxQp {
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let n = beta.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += beta[i] * self.q[i][j] * beta[j];
            }
        }
        0.5 * quad + self.p.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
    }

    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        (0..beta.len())
            .map(|i| self.q[i].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + self.p[i])
            .collect()
    }

    /// Euclidean projection onto the feasible set: `clip(v − λs, 0, c)` with
    /// λ found by bisection on the monotone map `λ ↦ sᵀclip(v − λs)`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let clip = |lambda: f64| -> Vec<f64> {
            v.iter()
                .zip(&self.s)
                .map(|(x, s)| (x - lambda * s).clamp(0.0, self.c))
                .collect()
        };
        let h = |lambda: f64| -> f64 { clip(lambda).iter().zip(&self.s).map(|(b, s)| b * s).sum() };
        let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + self.c + 1.0;
        let (mut lo, mut hi) = (-span, span);
        while hi - lo > 1e-15 * span {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clip(0.5 * (lo + hi))
    }

    /// Largest eigenvalue of `Q` by power iteration, used as the step bound.
    fn lipschitz(&self) -> f64 {
        let n = self.q.len();
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = self
                .q
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            lambda = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        lambda.max(1e-12)
    }

    /// Accelerated projected gradient descent; returns the minimizer.
    pub fn solve(&self, iterations: usize) -> Vec<f64> {
        let n = self.p.len();
        let step = 1.0 / (self.lipschitz() * 1.0001);
        let mut x = self.project(&vec![0.0; n]);
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..iterations {
            let g = self.gradient(&y);
            let z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let next = self.project(&z);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            // Restart the momentum whenever the objective goes up.
            if self.objective(&next) > self.objective(&x) {
                t = 1.0;
                y = x.clone();
                continue;
            }
            let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if moved < 1e-26 {
                return next;
            }
            y = next
                .iter()
                .zip(&x)
                .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
                .collect();
            x = next;
            t = t_next;
        }
        x
    }
}

/// Binary SVM dual as a minimization: `Q = yyᵀ∘K`, `p = −1`.
pub fn svc_qp(k: &[Vec<f64>], y: &[f64], c: f64) -> BoxQp {
    let n = y.len();
    BoxQp {
        q: (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
            .collect(),
        p: vec![-1.0; n],
        s: y.to_vec(),
        c,
    }
}

/// Maximum of `Σα − ½αᵀQα` over the feasible set, and its argmax.
pub fn svc_dual_optimum(k: &[Vec<f64>], y: &[f64], c: f64) -> (f64, Vec<f64>) {
    let qp = svc_qp(k, y, c);
    let alpha = qp.solve(20_000);
    (-qp.objective(&alpha), alpha)
}

/// ε-SVR dual over the stacked `(α, α*)`, as a minimization.
pub fn svr_qp(k: &[Vec<f64>], y: &[f64], c: f64, epsilon: f64) -> BoxQp {
    let m = y.len();
    let sign = |t: usize| if t < m { 1.0 } else { -1.0 };
    BoxQp {
        q: (0..2 * m)
            .map(|i| {
                (0..2 * m)
                    .map(|j| sign(i) * sign(j) * k[i % m][j % m])
                    .collect()
            })
            .collect(),
        p: (0..2 * m).map(|t| epsilon - sign(t) * y[t % m]).collect(),
        s: (0..2 * m).map(sign).collect(),
        c,
    }
}

/// Maximum of `−½(α−α*)ᵀK(α−α*) − εΣ(α+α*) + yᵀ(α−α*)`.
pub fn svr_dual_optimum(k: &[Vec<f64>], y: &[f64], c: f64, epsilon: f64) -> f64 {
    let qp = svr_qp(k, y, c, epsilon);
    let beta = qp.solve(20_000);
    -qp.objective(&beta)
}

/// Exhaustive search of the 4-variable binary dual on a lattice of the given
/// step. The last coordinate is fixed by the equality constraint.
pub fn svc_dual_grid4(k: &[Vec<f64>], y: &[f64], c: f64, step: f64) -> (f64, [f64; 4]) {
    assert_eq!(y.len(), 4);
    let qp = svc_qp(k, y, c);
    let steps = (c / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    for i in 0..=steps {
        for j in 0..=steps {
            for l in 0..=steps {
                let a = [i as f64 * step, j as f64 * step, l as f64 * step];
                let a3 = -y[3] * (y[0] * a[0] + y[1] * a[1] + y[2] * a[2]);
                if !(-1e-12..=c + 1e-12).contains(&a3) {
                    continue;
                }
                let alpha = [a[0], a[1], a[2], a3.clamp(0.0, c)];
                let value = -qp.objective(&alpha);
                if value > best.0 {
                    best = (value, alpha);
                }
            }
        }
    }
    best
}

/// Kernel expansion `Σ coef·k(sv, x) + bias`, summed naively.
pub fn kernel_expansion(gamma: f64, svs: &[Vec<f64>], coefs: &[f64], bias: f64, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..svs.len() {
        total += coefs[i] * rbf(gamma, &svs[i], x);
    }
    total + bias
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue by power iteration with Hotelling deflation: the
/// dominant pair is removed repeatedly until one eigenvalue remains.
pub fn min_eigenvalue_deflation(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut last = f64::INFINITY;
    for round in 0..n {
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i * 7 + round * 3) % 11) as f64)
            .collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = m
                .iter()
                .map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                lambda = 0.0;
                break;
            }
            lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
            v = w.into_iter().map(|x| x / norm).collect();
        }
        last = lambda;
        for i in 0..n {
            for j in 0..n {
                m[i][j] -= lambda * v[i] * v[j];
            }
        }
    }
    last
}

/// Lowest sum of squared distances over every assignment of the points to
/// three non-empty groups, and the group of each point in the best one.
pub fn best_3_partition(points: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = points.len();
    assert!((3..=12).contains(&n));
    let mut best = (f64::INFINITY, Vec::new());
    let mut labels = vec![0usize; n];
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % 3;
            c /= 3;
        }
        // Only canonical labelings: first appearance order 0, 1, 2.
        let mut next = 0;
        let mut canonical = true;
        for &l in &labels {
            if l > next {
                canonical = false;
                break;
            }
            if l == next {
                next += 1;
            }
        }
        if !canonical || next != 3 {
            continue;
        }
        let mut sse = 0.0;
        for g in 0..3 {
            let members: Vec<&Vec<f64>> = (0..n)
                .filter(|&i| labels[i] == g)
                .map(|i| &points[i])
                .collect();
            let d = members[0].len();
            let mean: Vec<f64> = (0..d)
                .map(|k| members.iter().map(|p| p[k]).sum::<f64>() / members.len() as f64)
                .collect();
            for p in members {
                sse += p
                    .iter()
                    .zip(&mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
        }
        if sse < best.0 {
            best = (sse, labels.clone());
        }
    }
    best
}

/// Whether two labelings describe the same grouping.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Class index for each cluster maximizing total agreement with `labels`.
/// Permutations are tried in lexicographic order; the first maximum wins.
pub fn best_alignment(clusters: &[usize], labels: &[usize]) -> [usize; 3] {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = (0, PERMS[0]);
    for (i, perm) in PERMS.iter().enumerate() {
        let agree = clusters
            .iter()
            .zip(labels)
            .filter(|(&c, &l)| perm[c] == l)
            .count();
        if i == 0 || agree > best.0 {
            best = (agree, *perm);
        }
    }
    best.1
}

/// One CDR event for the counting oracle; `time` is Unix seconds.
#[derive(Clone, Debug)]
pub struct Event {
    pub user: String,
    pub site: String,
    pub time: i64,
}

/// Distinct users per (site, day, 10-minute bin), with explicit sets. Days
/// are counted from the Unix epoch in UTC.
pub fn distinct_counts(events: &[Event]) -> BTreeMap<(String, i64), Vec<u32>> {
    let mut sets: BTreeMap<(String, i64), Vec<HashSet<String>>> = BTreeMap::new();
    for e in events {
        let day = e.time.div_euclid(86_400);
        let bin = (e.time.rem_euclid(86_400) / 600) as usize;
        let slots = sets
            .entry((e.site.clone(), day))
            .or_insert_with(|| vec![HashSet::new(); 144]);
        slots[bin].insert(e.user.clone());
    }
    sets.into_iter()
        .map(|(k, v)| (k, v.iter().map(|s| s.len() as u32).collect()))
        .collect()
}

/// Hour sums of a 144-bin day, one explicit loop per hour.
pub fn hourly_resum(bins: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    for h in 0..24 {
        let mut s = 0;
        for k in 0..6 {
            s += bins[h * 6 + k];
        }
        out.push(s);
    }
    out
}

/// Two-pass mean squared error.
pub fn naive_mse(predicted: &[f64], actual: &[f64]) -> f64 {
    let mut squares = Vec::with_capacity(actual.len());
    for i in 0..actual.len() {
        let d = predicted[i] - actual[i];
        squares.push(d * d);
    }
    let mut total = 0.0;
    for s in &squares {
        total += s;
    }
    total / squares.len() as f64
}

fn days_in_month(year: i64, month: i64) -> i64 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 0,
    }
}

fn digits(s: &str) -> Option<i64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Accepts `YYYY-MM-DDTHH:MM:SS` followed by `Z` or `±HH:MM`.
pub fn is_iso_instant(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 20
        || b[4] != b'-'
        || b[7] != b'-'
        || b[10] != b'T'
        || b[13] != b':'
        || b[16] != b':'
    {
        return false;
    }
    let field = |r: std::ops::Range<usize>| digits(&s[r]);
    let (Some(y), Some(mo), Some(d), Some(h), Some(mi), Some(se)) = (
        field(0..4),
        field(5..7),
        field(8..10),
        field(11..13),
        field(14..16),
        field(17..19),
    ) else {
        return false;
    };
    let zone = &s[19..];
    let zone_ok = zone == "Z"
        || (zone.len() == 6
            && (zone.starts_with('+') || zone.starts_with('-'))
            && &zone[3..4] == ":"
            && digits(&zone[1..3]).is_some_and(|v| v < 24)
            && digits(&zone[4..6]).is_some_and(|v| v < 60));
    (1..=12).contains(&mo)
        && d >= 1
        && d <= days_in_month(y, mo)
        && h < 24
        && mi < 60
        && se < 60
        && zone_ok
}

/// Counts CDR lines with 3 to 5 comma-separated fields, non-empty user and
/// site, and a timestamp valid for the given kind. Blank and `#` lines are
/// ignored.
pub fn count_well_formed(text: &str, epoch: bool) -> usize {
    let mut n = 0;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 || fields.len() > 5 || fields[0].is_empty() || fields[1].is_empty() {
            continue;
        }
        let ok = if epoch {
            digits(fields[2]).is_some()
        } else {
            is_iso_instant(fields[2])
        };
        if ok {
            n += 1;
        }
    }
    n
}
