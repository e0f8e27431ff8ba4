//! K-means with model selection, label propagation through a SOM, and
//! cluster-level summaries and tests.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::som::SomModel;
use crate::stats::{mean, sample_variance, student_t_two_sided_p};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel<T> {
    pub k: usize,
    pub centroids: Matrix<T>,
    pub labels: Vec<usize>,
    pub wss: T,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
    pub seed: u64,
    /// Total within-cluster sum of squares after each Lloyd update of the winning restart.
    pub wss_history: Vec<T>,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Scalar>(centroids: &Matrix<T>, v: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (j, c) in centroids.rows_iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Total within-cluster sum of squared distances to the given centroids.
pub fn within_ss<T: Scalar>(matrix: &Matrix<T>, labels: &[usize], centroids: &Matrix<T>) -> T {
    matrix.rows_iter().zip(labels).map(|(v, &l)| sq_dist(v, centroids.row(l))).sum()
}

fn plus_plus_init<T: Scalar, R: Rng>(matrix: &Matrix<T>, k: usize, rng: &mut R) -> Matrix<T> {
    let n = matrix.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<T> = matrix.rows_iter().map(|v| sq_dist(v, matrix.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: T = d2.iter().copied().sum();
        let next = if total > T::zero() {
            let target = T::lit(rng.random::<f64>()) * total;
            let mut acc = T::zero();
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > T::zero() {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, v) in matrix.rows_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(v, matrix.row(next)));
        }
    }
    matrix.select_rows(&chosen)
}

struct LloydRun<T> {
    centroids: Matrix<T>,
    labels: Vec<usize>,
    wss: T,
    iterations: usize,
    history: Vec<T>,
}

fn lloyd<T: Scalar>(matrix: &Matrix<T>, mut centroids: Matrix<T>, max_iter: usize) -> LloydRun<T> {
    let (n, d) = (matrix.nrows(), matrix.ncols());
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        let mut changed = false;
        for (i, v) in matrix.rows_iter().enumerate() {
            let (j, _) = nearest(&centroids, v);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        iterations += 1;
        let mut sums = Matrix::<T>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (v, &l) in matrix.rows_iter().zip(&labels) {
            counts[l] += 1;
            for (s, &x) in sums.row_mut(l).iter_mut().zip(v) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = T::from_usize_lossy(counts[j]);
                for (dst, &s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s / c;
                }
            }
        }
        // Re-seed empty clusters at the point farthest from its own centroid.
        for j in 0..k {
            if counts[j] == 0 {
                let (far, _) = matrix
                    .rows_iter()
                    .zip(&labels)
                    .enumerate()
                    .map(|(i, (v, &l))| (i, sq_dist(v, centroids.row(l))))
                    .fold((0, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
                let row = matrix.row(far).to_vec();
                centroids.row_mut(j).copy_from_slice(&row);
                counts[labels[far]] -= 1;
                labels[far] = j;
                counts[j] = 1;
            }
        }
        history.push(within_ss(matrix, &labels, &centroids));
    }
    let wss = within_ss(matrix, &labels, &centroids);
    LloydRun { centroids, labels, wss, iterations, history }
}

/// K-means with k-means++ seeding and `restarts` independent starts; the
/// lowest total within-cluster sum of squares wins (earliest on ties).
pub fn kmeans_with_restarts<T: Scalar>(
    matrix: &Matrix<T>,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<KMeansModel<T>> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidConfig { field: "k".into(), reason: "must be at least 1".into() });
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if matrix.has_missing() {
        return Err(Error::SchemaMismatch("k-means input contains missing values".into()));
    }
    let mut best: Option<LloydRun<T>> = None;
    for r in 0..restarts.max(1) {
        let mut rng = substream(seed, "kmeans", r as u64);
        let init = plus_plus_init(matrix, k, &mut rng);
        let run = lloyd(matrix, init, max_iter);
        if best.as_ref().is_none_or(|b| run.wss < b.wss) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    Ok(KMeansModel {
        k,
        centroids: run.centroids,
        labels: run.labels,
        wss: run.wss,
        iterations: run.iterations,
        seed,
        wss_history: run.history,
    })
}

/// [`kmeans_with_restarts`] with the default ten restarts.
pub fn kmeans<T: Scalar>(matrix: &Matrix<T>, k: usize, seed: u64, max_iter: usize) -> Result<KMeansModel<T>> {
    kmeans_with_restarts(matrix, k, seed, max_iter, DEFAULT_RESTARTS)
}

/// Largest drop `W_{k−1} − W_k` over `k ≥ 3` (the first drop is excluded);
/// `wss[0]` is `W_1`. Ties go to the smaller `k`.
pub fn elbow_select<T: Scalar>(wss: &[T]) -> Result<usize> {
    if wss.len() < 3 {
        return Err(Error::CurveTooShort(wss.len()));
    }
    let mut best_k = 3;
    let mut best_drop = wss[1] - wss[2];
    for k in 4..=wss.len() {
        let drop = wss[k - 2] - wss[k - 1];
        if drop > best_drop {
            best_drop = drop;
            best_k = k;
        }
    }
    Ok(best_k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve<T> {
    pub ks: Vec<usize>,
    pub wss_k: Vec<T>,
    pub gap_k: Vec<T>,
    pub sd_k: Vec<T>,
    /// Smallest `k` with `gap_k ≥ gap_{k+1} − sd_{k+1}`.
    pub selected_gap: usize,
    /// Elbow choice on `wss_k` (`None` when `kmax < 3`).
    pub selected_elbow: Option<usize>,
    /// `k` with the largest gap.
    pub max_gap: usize,
    /// First `k` whose gap exceeds both neighbours (`None` if the curve is monotone).
    pub first_local_max: Option<usize>,
    pub b: usize,
}

fn ln_floor<T: Scalar>(w: T) -> T {
    w.max(T::min_positive_value()).ln()
}

/// Gap statistic with uniform references over the data's bounding box.
pub fn gap_statistic<T: Scalar>(matrix: &Matrix<T>, kmax: usize, b: usize, seed: u64) -> Result<GapCurve<T>> {
    gap_statistic_with(matrix, kmax, b, seed, DEFAULT_RESTARTS)
}

pub fn gap_statistic_with<T: Scalar>(
    matrix: &Matrix<T>,
    kmax: usize,
    b: usize,
    seed: u64,
    restarts: usize,
) -> Result<GapCurve<T>> {
    if kmax < 2 {
        return Err(Error::InvalidConfig { field: "kmax".into(), reason: "must be at least 2".into() });
    }
    if b == 0 {
        return Err(Error::InvalidConfig { field: "b".into(), reason: "at least one reference draw is required".into() });
    }
    let (n, d) = (matrix.nrows(), matrix.ncols());
    if kmax > n {
        return Err(Error::KTooLarge { k: kmax, n });
    }
    let lo: Vec<T> = (0..d).map(|j| matrix.column(j).into_iter().fold(T::infinity(), T::min)).collect();
    let hi: Vec<T> = (0..d).map(|j| matrix.column(j).into_iter().fold(T::neg_infinity(), T::max)).collect();
    let references: Vec<Matrix<T>> = (0..b)
        .map(|r| {
            let mut rng = substream(seed, "gap-reference", r as u64);
            let data = (0..n * d)
                .map(|i| {
                    let j = i % d;
                    lo[j] + (hi[j] - lo[j]) * T::lit(rng.random::<f64>())
                })
                .collect();
            Matrix::from_row_major(n, d, data)
        })
        .collect();
    let bf = T::from_usize_lossy(b);
    let mut wss_k = Vec::with_capacity(kmax);
    let mut gap_k = Vec::with_capacity(kmax);
    let mut sd_k = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let w = kmeans_with_restarts(matrix, k, seed, DEFAULT_MAX_ITER, restarts)?.wss;
        let logs: Vec<T> = references
            .iter()
            .enumerate()
            .map(|(r, m)| {
                let s = crate::rng::derive_seed(seed, "gap-kmeans", (r * kmax + k) as u64);
                kmeans_with_restarts(m, k, s, DEFAULT_MAX_ITER, restarts).map(|fit| ln_floor(fit.wss))
            })
            .collect::<Result<_>>()?;
        let lbar = logs.iter().copied().sum::<T>() / bf;
        let var = logs.iter().map(|&l| (l - lbar) * (l - lbar)).sum::<T>() / bf;
        wss_k.push(w);
        gap_k.push(lbar - ln_floor(w));
        sd_k.push(var.sqrt() * (T::one() + T::one() / bf).sqrt());
    }
    let selected_gap = (0..kmax - 1).find(|&i| gap_k[i] >= gap_k[i + 1] - sd_k[i + 1]).map_or(kmax, |i| i + 1);
    let max_gap = (0..kmax).fold(0, |best, i| if gap_k[i] > gap_k[best] { i } else { best }) + 1;
    let first_local_max =
        (1..kmax.saturating_sub(1)).find(|&i| gap_k[i] > gap_k[i - 1] && gap_k[i] > gap_k[i + 1]).map(|i| i + 1);
    Ok(GapCurve {
        ks: (1..=kmax).collect(),
        selected_elbow: elbow_select(&wss_k).ok(),
        wss_k,
        gap_k,
        sd_k,
        selected_gap,
        max_gap,
        first_local_max,
        b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomClustering<T> {
    /// Cluster of every SOM node.
    pub node_labels: Vec<usize>,
    /// Cluster of every observation, inherited from its best-matching node.
    pub labels: Vec<usize>,
    pub kmeans: KMeansModel<T>,
}

/// K-means on the SOM codebook; observations inherit their node's cluster.
pub fn cluster_via_som<T: Scalar>(model: &SomModel<T>, k: usize, seed: u64) -> Result<SomClustering<T>> {
    let km = kmeans(&model.codebook, k, seed, DEFAULT_MAX_ITER)?;
    let labels = model.assignments.iter().map(|&node| km.labels[node]).collect();
    Ok(SomClustering { node_labels: km.labels.clone(), labels, kmeans: km })
}

/// Raw accounting variables to average per cluster, in absolute and per-worker form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVariables<'a, T> {
    pub names: &'a [String],
    pub absolute: &'a Matrix<T>,
    pub per_worker: &'a Matrix<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile<T> {
    pub sizes: Vec<usize>,
    pub tfp_means: Vec<T>,
    /// `k × S` mean component scores.
    pub score_means: Matrix<T>,
    pub raw_names: Vec<String>,
    pub raw_means: Option<Matrix<T>>,
    pub per_worker_means: Option<Matrix<T>>,
}

fn n_clusters(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&m| m + 1)
}

/// `k × p` per-cluster column means, skipping missing cells.
pub fn cluster_means<T: Scalar>(labels: &[usize], matrix: &Matrix<T>) -> Result<Matrix<T>> {
    if labels.len() != matrix.nrows() {
        return Err(Error::LengthMismatch(format!("{} labels for {} rows", labels.len(), matrix.nrows())));
    }
    let (k, p) = (n_clusters(labels), matrix.ncols());
    let mut sums = Matrix::<T>::zeros(k, p);
    let mut counts = Matrix::zeros(k, p);
    for (row, &l) in matrix.rows_iter().zip(labels) {
        for (j, &x) in row.iter().enumerate() {
            if !x.is_missing() {
                sums[(l, j)] += x;
                counts[(l, j)] += T::one();
            }
        }
    }
    let mut out = Matrix::zeros(k, p);
    for l in 0..k {
        for j in 0..p {
            out[(l, j)] = if counts[(l, j)] > T::zero() { sums[(l, j)] / counts[(l, j)] } else { T::nan() };
        }
    }
    Ok(out)
}

pub fn cluster_profiles<T: Scalar>(
    labels: &[usize],
    tfp_growth: &[T],
    scores: &Matrix<T>,
    raw: Option<&RawVariables<'_, T>>,
) -> Result<ClusterProfile<T>> {
    if tfp_growth.len() != labels.len() {
        return Err(Error::LengthMismatch(format!("{} labels, {} TFP values", labels.len(), tfp_growth.len())));
    }
    let k = n_clusters(labels);
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let tfp = cluster_means(labels, &Matrix::from_columns(&[tfp_growth]))?.column(0);
    let score_means = cluster_means(labels, scores)?;
    let (raw_names, raw_means, per_worker_means) = match raw {
        Some(r) => (
            r.names.to_vec(),
            Some(cluster_means(labels, r.absolute)?),
            Some(cluster_means(labels, r.per_worker)?),
        ),
        None => (Vec::new(), None, None),
    };
    Ok(ClusterProfile { sizes, tfp_means: tfp, score_means, raw_names, raw_means, per_worker_means })
}

/// Profile as CSV: one column per cluster, rows `N`, `ACF_res`, then one row
/// per score column.
pub fn profile_table_csv<T: Scalar>(profile: &ClusterProfile<T>, score_names: &[String], tfp_label: &str) -> String {
    let k = profile.sizes.len();
    let mut out = String::from("Variable");
    for c in 1..=k {
        out.push_str(&format!(",Cluster {c}"));
    }
    out.push('\n');
    out.push('N');
    for &s in &profile.sizes {
        out.push_str(&format!(",{s}"));
    }
    out.push('\n');
    let mut row = |name: &str, values: Vec<T>| {
        out.push_str(name);
        for v in values {
            out.push_str(&format!(",{:.4}", v.as_f64()));
        }
        out.push('\n');
    };
    row(tfp_label, profile.tfp_means.clone());
    for (j, name) in score_names.iter().enumerate() {
        row(name, profile.score_means.column(j));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest<T> {
    pub t: T,
    pub df: T,
    pub p_value: T,
}

/// Two-sided Welch t-test for a difference in means.
pub fn welch_test<T: Scalar>(a: &[T], b: &[T]) -> Option<WelchTest<T>> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (m1, m2) = (mean(a), mean(b));
    let (n1, n2) = (T::from_usize_lossy(a.len()), T::from_usize_lossy(b.len()));
    let (q1, q2) = (sample_variance(a) / n1, sample_variance(b) / n2);
    let se2 = q1 + q2;
    if se2 == T::zero() {
        let p = if m1 == m2 { T::one() } else { T::zero() };
        let t = if m1 == m2 { T::zero() } else { (m1 - m2).signum() * T::infinity() };
        return Some(WelchTest { t, df: n1 + n2 - T::lit(2.0), p_value: p });
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (q1 * q1 / (n1 - T::one()) + q2 * q2 / (n2 - T::one()));
    Some(WelchTest { t, df, p_value: student_t_two_sided_p(t, df) })
}

/// Symmetric matrix of pairwise Welch p-values between clusters; the
/// diagonal and pairs involving clusters with fewer than two members are NaN.
pub fn welch_matrix<T: Scalar>(labels: &[usize], tfp_growth: &[T]) -> Result<Matrix<T>> {
    if labels.len() != tfp_growth.len() {
        return Err(Error::LengthMismatch(format!("{} labels, {} TFP values", labels.len(), tfp_growth.len())));
    }
    let k = n_clusters(labels);
    let mut groups: Vec<Vec<T>> = vec![Vec::new(); k];
    for (&l, &v) in labels.iter().zip(tfp_growth) {
        groups[l].push(v);
    }
    let mut out = Matrix::filled(k, k, T::nan());
    for i in 0..k {
        for j in (i + 1)..k {
            if let Some(w) = welch_test(&groups[i], &groups[j]) {
                out[(i, j)] = w.p_value;
                out[(j, i)] = w.p_value;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    /// `counts[i][j]`: firms in cluster `i` before and `j` after.
    pub counts: Vec<Vec<usize>>,
    /// Firms present in only the first labeling.
    pub only_in_a: usize,
    /// Firms present in only the second labeling.
    pub only_in_b: usize,
}

/// Cross-tabulates two `(firm_id, cluster)` labelings over their shared firms.
pub fn transition_matrix(a: &[(String, usize)], b: &[(String, usize)]) -> TransitionMatrix {
    let ka = a.iter().map(|x| x.1 + 1).max().unwrap_or(0);
    let kb = b.iter().map(|x| x.1 + 1).max().unwrap_or(0);
    let lookup: HashMap<&str, usize> = b.iter().map(|(f, l)| (f.as_str(), *l)).collect();
    let mut counts = vec![vec![0; kb]; ka];
    let mut shared = 0;
    for (f, la) in a {
        if let Some(&lb) = lookup.get(f.as_str()) {
            counts[*la][lb] += 1;
            shared += 1;
        }
    }
    TransitionMatrix { counts, only_in_a: a.len() - shared, only_in_b: b.len() - shared }
}

/// Per cluster, the share of each category value, largest first (ties by name).
pub fn composition<T: Scalar>(labels: &[usize], category: &[String]) -> Result<Vec<Vec<(String, T)>>> {
    if labels.len() != category.len() {
        return Err(Error::LengthMismatch(format!("{} labels, {} categories", labels.len(), category.len())));
    }
    let k = n_clusters(labels);
    let mut tallies: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); k];
    for (&l, c) in labels.iter().zip(category) {
        *tallies[l].entry(c.as_str()).or_default() += 1;
    }
    Ok(tallies
        .into_iter()
        .map(|t| {
            let total = T::from_usize_lossy(t.values().sum());
            let mut shares: Vec<(String, usize)> = t.into_iter().map(|(c, n)| (c.to_string(), n)).collect();
            shares.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
            shares.into_iter().map(|(c, n)| (c, T::from_usize_lossy(n) / total)).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elbow_examples() {
        assert_eq!(elbow_select(&[100.0, 90.0, 40.0, 38.0, 37.0]).unwrap(), 3);
        assert_eq!(elbow_select(&[50.0, 40.0, 30.0, 20.0, 10.0]).unwrap(), 3);
        assert_eq!(elbow_select(&[100.0, 20.0, 19.0, 18.0]).unwrap(), 3);
        assert!(matches!(elbow_select(&[3.0, 1.0]), Err(Error::CurveTooShort(2))));
    }

    #[test]
    fn four_point_two_means() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]);
        let fit = kmeans(&m, 2, 1, 100).unwrap();
        assert!((fit.wss - 1.0_f64).abs() < 1e-12);
        let mut cs: Vec<(f64, f64)> = fit.centroids.rows_iter().map(|r| (r[0], r[1])).collect();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(cs, vec![(0.0, 0.5), (10.0, 0.5)]);
    }

    #[test]
    fn welch_textbook_pair() {
        // n = 10 each, means 5 and 6, both sd 1
        let base = [-1.5, -1.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.5];
        let ss: f64 = base.iter().map(|v| v * v).sum();
        let scale = (9.0 / ss).sqrt();
        let a: Vec<f64> = base.iter().map(|v| 5.0 + v * scale).collect();
        let b: Vec<f64> = base.iter().map(|v| 6.0 + v * scale).collect();
        let w = welch_test(&a, &b).unwrap();
        assert!((w.t + 5.0_f64.sqrt()).abs() < 1e-12);
        assert!((w.df - 18.0).abs() < 1e-10);
        assert!((w.p_value - 0.038).abs() < 5e-4, "{}", w.p_value);
    }

    #[test]
    fn composition_shares() {
        let labels = vec![0; 10];
        let cats: Vec<String> = ["A", "B", "A", "A", "B", "A", "B", "A", "B", "A"].iter().map(|s| s.to_string()).collect();
        let c = composition::<f64>(&labels, &cats).unwrap();
        assert_eq!(c[0], vec![("A".to_string(), 0.6), ("B".to_string(), 0.4)]);
    }
}
