//! Per-feature z-score standardizer, fitted on train rows only.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    /// Population mean/std per feature; std floored at 1e-12 so constant
    /// features map to zero instead of NaN.
    pub fn fit(x_train: ArrayView2<f64>) -> Result<Self> {
        if x_train.nrows() == 0 {
            return Err(Error::EmptySelection("standardizer needs rows".into()));
        }
        let n = x_train.nrows() as f64;
        let mean = x_train.mean_axis(Axis(0)).expect("non-empty");
        let mut var = Array1::zeros(x_train.ncols());
        for row in x_train.rows() {
            for (v, (&xi, &mi)) in var.iter_mut().zip(row.iter().zip(mean.iter())) {
                *v += (xi - mi) * (xi - mi);
            }
        }
        let std = var.mapv(|v| (v / n).sqrt().max(1e-12));
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (v, (&m, &s)) in row.iter_mut().zip(self.mean.iter().zip(self.std.iter())) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn hand_example() {
        let x = array![[0.0], [2.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        assert_abs_diff_eq!(s.mean[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.std[0], 1.0, epsilon = 1e-15);
        let t = s.apply(x.view());
        assert_abs_diff_eq!(t[[0, 0]], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t[[1, 0]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let x = array![[3.0, 1.0], [3.0, 2.0], [3.0, 3.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        let t = s.apply(x.view());
        assert!(t.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transformed_train_mean_is_zero() {
        let x = array![[1.0, -4.0], [2.5, 0.5], [9.0, 2.0], [-3.0, 1.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        let t = s.apply(x.view());
        for j in 0..2 {
            let m: f64 = t.column(j).mean().unwrap();
            assert!(m.abs() < 1e-12);
        }
    }
}
