//! Online self-organizing maps on a rectangular grid.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::rng::substream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Defaults to `max(rows, cols) / 2` (never below `radius_end`).
    pub radius_start: Option<f64>,
    pub radius_end: f64,
    pub seed: u64,
    pub topology: Topology,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self::new(5, 5, 0)
    }
}

impl SomConfig {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            epochs: 200,
            lr_start: 0.5,
            lr_end: 0.01,
            radius_start: None,
            radius_end: 0.5,
            seed,
            topology: Topology::Rectangular,
        }
    }

    pub fn nodes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn effective_radius_start(&self) -> f64 {
        self.radius_start.unwrap_or_else(|| (self.rows.max(self.cols) as f64 / 2.0).max(self.radius_end))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::InvalidConfig { field: field.into(), reason: reason.into() });
        if self.rows == 0 || self.cols == 0 {
            return bad("rows", "grid dimensions must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if !(self.lr_end > 0.0 && self.lr_start > self.lr_end) {
            return bad("lr_start", "learning rates need lr_start > lr_end > 0");
        }
        if !(self.radius_end > 0.0 && self.effective_radius_start() >= self.radius_end) {
            return bad("radius_start", "radii need radius_start >= radius_end > 0");
        }
        Ok(())
    }

    /// Learning rate and radius for `epoch`, linear between start and end.
    pub fn schedule(&self, epoch: usize) -> (f64, f64) {
        let t = if self.epochs > 1 { epoch as f64 / (self.epochs - 1) as f64 } else { 0.0 };
        let r0 = self.effective_radius_start();
        (self.lr_start * (1.0 - t) + self.lr_end * t, r0 * (1.0 - t) + self.radius_end * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomModel<T> {
    /// `(rows·cols) × d`; node `r·cols + c` sits at grid position `(r, c)`.
    pub codebook: Matrix<T>,
    pub assignments: Vec<usize>,
    pub config: SomConfig,
    pub input_dim: usize,
    pub initial_quantization_error: T,
    pub quantization_error: T,
}

impl<T: Scalar> SomModel<T> {
    pub fn grid_position(&self, node: usize) -> (usize, usize) {
        (node / self.config.cols, node % self.config.cols)
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Scalar>(codebook: &Matrix<T>, v: &[T]) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (k, w) in codebook.rows_iter().enumerate() {
        let d = sq_dist(w, v);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Mean Euclidean distance from each row of `matrix` to its nearest codebook vector.
pub fn quantization_error<T: Scalar>(codebook: &Matrix<T>, matrix: &Matrix<T>) -> T {
    let total: T = matrix.rows_iter().map(|v| sq_dist(codebook.row(nearest(codebook, v)), v).sqrt()).sum();
    total / T::from_usize_lossy(matrix.nrows().max(1))
}

/// Trains a map by online updates; bitwise deterministic for a given seed.
pub fn train_som<T: Scalar>(matrix: &Matrix<T>, config: &SomConfig) -> Result<SomModel<T>> {
    config.validate()?;
    let (n, d) = (matrix.nrows(), matrix.ncols());
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    if matrix.has_missing() {
        return Err(Error::SchemaMismatch("SOM input contains missing values".into()));
    }
    let nodes = config.nodes();
    let mut init_rng = substream(config.seed, "som-init", 0);
    let picks: Vec<usize> = if n >= nodes {
        index::sample(&mut init_rng, n, nodes).into_vec()
    } else {
        (0..nodes).map(|_| init_rng.random_range(0..n)).collect()
    };
    let mut codebook = matrix.select_rows(&picks);
    let initial_quantization_error = quantization_error(&codebook, matrix);

    let grid: Vec<(T, T)> =
        (0..nodes).map(|k| (T::from_usize_lossy(k / config.cols), T::from_usize_lossy(k % config.cols))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let (lr, radius) = config.schedule(epoch);
        let (lr, radius) = (T::lit(lr), T::lit(radius));
        let two_r2 = T::lit(2.0) * radius * radius;
        let mut rng = substream(config.seed, "som-shuffle", epoch as u64);
        order.shuffle(&mut rng);
        for &i in &order {
            let x = matrix.row(i);
            let bmu = nearest(&codebook, x);
            let (br, bc) = grid[bmu];
            for (k, &(gr, gc)) in grid.iter().enumerate() {
                let g2 = (gr - br) * (gr - br) + (gc - bc) * (gc - bc);
                if g2 > radius * radius {
                    continue;
                }
                let h = lr * (-g2 / two_r2).exp();
                for (w, &xv) in codebook.row_mut(k).iter_mut().zip(x) {
                    *w += h * (xv - *w);
                }
            }
        }
    }
    let assignments = matrix.rows_iter().map(|v| nearest(&codebook, v)).collect();
    let quantization_error = quantization_error(&codebook, matrix);
    Ok(SomModel { codebook, assignments, config: config.clone(), input_dim: d, initial_quantization_error, quantization_error })
}

/// Node nearest to `vector` (lowest index on ties).
pub fn best_matching_unit<T: Scalar>(model: &SomModel<T>, vector: &[T]) -> Result<usize> {
    if vector.len() != model.input_dim {
        return Err(Error::DimensionMismatch { expected: model.input_dim, got: vector.len() });
    }
    Ok(nearest(&model.codebook, vector))
}

/// Mean distance from each node's codebook vector to its 4-neighbours.
pub fn u_matrix<T: Scalar>(model: &SomModel<T>) -> Matrix<T> {
    let (rows, cols) = (model.config.rows, model.config.cols);
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let here = model.codebook.row(r * cols + c);
            let mut sum = T::zero();
            let mut count = 0;
            let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
            for (nr, nc) in neighbours {
                if nr < rows && nc < cols {
                    sum += sq_dist(here, model.codebook.row(nr * cols + nc)).sqrt();
                    count += 1;
                }
            }
            out[(r, c)] = if count > 0 { sum / T::from_usize_lossy(count) } else { T::zero() };
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPlanes<T> {
    /// One `rows × cols` grid per input dimension.
    pub planes: Vec<Matrix<T>>,
    /// Observations assigned to each node, `counts[r][c]`.
    pub counts: Vec<Vec<usize>>,
}

pub fn component_planes<T: Scalar>(model: &SomModel<T>) -> ComponentPlanes<T> {
    let (rows, cols) = (model.config.rows, model.config.cols);
    let planes = (0..model.input_dim)
        .map(|j| Matrix::from_row_major(rows, cols, model.codebook.column(j)))
        .collect();
    let mut counts = vec![vec![0; cols]; rows];
    for &a in &model.assignments {
        counts[a / cols][a % cols] += 1;
    }
    ComponentPlanes { planes, counts }
}

/// Grid with about `5·√n` nodes and aspect ratio `√(λ₁/λ₂)` from the two
/// leading eigenvalues of the data covariance; the longer side is `rows`.
pub fn suggest_grid<T: Scalar>(matrix: &Matrix<T>) -> (usize, usize) {
    let n = matrix.nrows();
    let nodes = (5.0 * (n as f64).sqrt()).round().max(1.0);
    let ratio = if matrix.ncols() >= 2 && n >= 2 {
        let mut centered = matrix.clone();
        centered.center_columns();
        let (vals, _) = symmetric_eigen(&centered.transpose().matmul(&centered));
        let (l1, l2) = (vals[0].as_f64(), vals[1].as_f64());
        if l2 > 0.0 {
            (l1 / l2).sqrt()
        } else {
            1.0
        }
    } else {
        1.0
    };
    let rows = (nodes * ratio).sqrt().round().max(1.0);
    let cols = (nodes / rows).round().max(1.0);
    (rows as usize, cols as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(codebook: Matrix<f64>, rows: usize, cols: usize) -> SomModel<f64> {
        let d = codebook.ncols();
        SomModel {
            codebook,
            assignments: vec![],
            config: SomConfig::new(rows, cols, 0),
            input_dim: d,
            initial_quantization_error: 0.0,
            quantization_error: 0.0,
        }
    }

    #[test]
    fn u_matrix_on_a_line() {
        let m = model_with(Matrix::from_rows(&[[0.0], [1.0], [5.0]]), 3, 1);
        assert_eq!(u_matrix(&m).column(0), vec![1.0, 2.5, 4.0]);
    }

    #[test]
    fn u_matrix_pair_and_constant() {
        let m = model_with(Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0]]), 2, 1);
        assert_eq!(u_matrix(&m).column(0), vec![3.0, 3.0]);
        let m = model_with(Matrix::filled(4, 2, 1.5), 2, 2);
        assert!(u_matrix(&m).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bmu_ties_and_exact_match() {
        let cb = Matrix::from_rows(&[[9.0], [9.0], [0.0], [9.0], [9.0], [3.0], [9.0], [2.0]]);
        let m = model_with(cb, 2, 4);
        assert_eq!(best_matching_unit(&m, &[3.0]).unwrap(), 5);
        // equidistant from nodes 2 (0.0) and 7 (2.0)
        assert_eq!(best_matching_unit(&m, &[1.0]).unwrap(), 2);
        assert!(matches!(best_matching_unit(&m, &[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn schedule_is_linear_and_decreasing() {
        let c = SomConfig { epochs: 5, ..SomConfig::new(4, 2, 0) };
        assert_eq!(c.schedule(0), (0.5, 2.0));
        assert_eq!(c.schedule(4), (0.01, 0.5));
        assert!(c.schedule(2).0 < c.schedule(1).0);
    }

    #[test]
    fn config_validation() {
        assert!(SomConfig { lr_end: 0.6, ..SomConfig::default() }.validate().is_err());
        assert!(SomConfig { rows: 0, ..SomConfig::default() }.validate().is_err());
        assert!(SomConfig::default().validate().is_ok());
    }
}
