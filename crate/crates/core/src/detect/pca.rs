//! PCA outlier score: squared projections onto the principal axes, each
//! whitened by its eigenvalue, summed over all components (a Mahalanobis
//! distance in the principal basis). No component truncation.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

use super::neighbors::check_dims;

const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PcaModel {
    mean: Array1<f64>,
    /// d x d, eigenvector columns sorted by descending eigenvalue.
    components: Array2<f64>,
    eigenvalues: Array1<f64>,
}

impl PcaModel {
    pub fn fit(x_train: ArrayView2<f64>) -> Result<Self> {
        let n = x_train.nrows();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "pca needs at least 2 training rows, got {n}"
            )));
        }
        let mean = x_train.mean_axis(Axis(0)).expect("non-empty");
        let d = x_train.ncols();
        // Sample covariance (ddof = 1).
        let mut cov = Array2::zeros((d, d));
        for row in x_train.rows() {
            let centered: Array1<f64> = &row - &mean;
            for i in 0..d {
                for j in i..d {
                    cov[[i, j]] += centered[i] * centered[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..d {
            for j in i..d {
                cov[[i, j]] /= denom;
                cov[[j, i]] = cov[[i, j]];
            }
        }
        let (eigenvalues, components) = sym_eigen(&cov)?;
        Ok(PcaModel { mean, components, eigenvalues })
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_dims(self.mean.len(), x.ncols())?;
        Ok(Array1::from_iter((0..x.nrows()).map(|i| {
            let centered: Array1<f64> = &x.row(i) - &self.mean;
            let proj = self.components.t().dot(&centered);
            proj.iter()
                .zip(self.eigenvalues.iter())
                .map(|(&p, &ev)| p * p / ev.max(EIGENVALUE_FLOOR))
                .sum::<f64>()
        })))
    }

    /// Fraction of total variance captured by the leading axis.
    pub fn leading_variance_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().map(|&v| v.max(0.0)).sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.eigenvalues[0].max(0.0) / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rank_one_data_concentrates_variance() {
        let x = array![
            [0.0, 0.0],
            [1.0, 2.0],
            [2.0, 4.0],
            [3.0, 6.0],
            [-1.0, -2.0]
        ];
        let m = PcaModel::fit(x.view()).unwrap();
        assert!(m.leading_variance_ratio() > 0.999_999, "{}", m.leading_variance_ratio());
    }

    #[test]
    fn needs_two_rows() {
        let x = array![[1.0, 2.0]];
        assert!(matches!(PcaModel::fit(x.view()), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn off_axis_point_scores_higher() {
        // Train hugs the x-axis; a point displaced in y is anomalous even at
        // the same radius.
        let x = array![
            [-2.0, 0.01],
            [-1.0, -0.02],
            [0.0, 0.015],
            [1.0, -0.01],
            [2.0, 0.005]
        ];
        let m = PcaModel::fit(x.view()).unwrap();
        let s = m.score(array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert!(s[1] > s[0]);
    }
}
