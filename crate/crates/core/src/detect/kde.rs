//! Gaussian kernel density estimate; score is the negative log density.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::squared_distance;

use super::neighbors::check_dims;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Scott's rule: n^(-1 / (d + 4)).
    Scott,
}

#[derive(Clone, Debug)]
pub struct KdeModel {
    train: Array2<f64>,
    bandwidth: f64,
}

impl KdeModel {
    pub fn fit(x_train: ArrayView2<f64>, bandwidth: Bandwidth) -> Result<Self> {
        if x_train.nrows() == 0 {
            return Err(Error::InsufficientData("kde needs at least 1 training row".into()));
        }
        let h = match bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Scott => {
                let n = x_train.nrows() as f64;
                let d = x_train.ncols() as f64;
                n.powf(-1.0 / (d + 4.0))
            }
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("kde bandwidth must be > 0, got {h}")));
        }
        Ok(KdeModel { train: x_train.to_owned(), bandwidth: h })
    }

    /// -log of the kernel density, including the Gaussian normalization
    /// constant, computed via log-sum-exp.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_dims(self.train.ncols(), x.ncols())?;
        let n = self.train.nrows() as f64;
        let d = self.train.ncols() as f64;
        let h = self.bandwidth;
        let log_norm = -(n.ln() + d * h.ln() + 0.5 * d * (2.0 * std::f64::consts::PI).ln());
        Ok(Array1::from_iter((0..x.nrows()).map(|i| {
            let exponents: Vec<f64> = self
                .train
                .rows()
                .into_iter()
                .map(|t| -squared_distance(t, x.row(i)) / (2.0 * h * h))
                .collect();
            let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
            -(log_norm + max + sum.ln())
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn single_point_unit_bandwidth() {
        // Density at the training point itself is 1/sqrt(2 pi), so the score
        // is 0.5 ln(2 pi).
        let train = array![[0.0]];
        let m = KdeModel::fit(train.view(), Bandwidth::Fixed(1.0)).unwrap();
        let s = m.score(array![[0.0]].view()).unwrap();
        assert_abs_diff_eq!(s[0], 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[0], 0.918_938_533_204_672_7, epsilon = 1e-9);
    }

    #[test]
    fn farther_points_score_higher() {
        let train = array![[0.0, 0.0], [0.2, 0.1], [-0.1, 0.05]];
        let m = KdeModel::fit(train.view(), Bandwidth::Fixed(1.0)).unwrap();
        let s = m.score(array![[0.0, 0.0], [5.0, 5.0]].view()).unwrap();
        assert!(s[1] > s[0]);
    }

    #[test]
    fn scott_rule_bandwidth() {
        let train = ndarray::Array2::<f64>::zeros((16, 4));
        let m = KdeModel::fit(train.view(), Bandwidth::Scott).unwrap();
        assert_abs_diff_eq!(m.bandwidth, 16f64.powf(-1.0 / 8.0), epsilon = 1e-15);
    }
}
