//! Brute-force k-nearest-neighbor machinery shared by KNN and LOF, plus the
//! two detectors themselves. Train sets here are at most a few thousand
//! rows, so exact O(n^2) distances beat any index.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::l2_distance;

/// Indices and distances of the `k` nearest rows of `train` to `query`,
/// ties broken by lower row index. `skip` excludes one train row (used when
/// the query is that row itself).
fn k_nearest(
    train: ArrayView2<f64>,
    query: ndarray::ArrayView1<f64>,
    k: usize,
    skip: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut dists: Vec<(usize, f64)> = (0..train.nrows())
        .filter(|&i| Some(i) != skip)
        .map(|i| (i, l2_distance(train.row(i), query)))
        .collect();
    dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    dists.truncate(k);
    dists
}

/// KNN detector state: the training rows. Score = distance to the k-th
/// nearest training point.
#[derive(Clone, Debug)]
pub struct KnnModel {
    pub k: usize,
    train: Array2<f64>,
}

impl KnnModel {
    pub fn fit(x_train: ArrayView2<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("knn needs k >= 1".into()));
        }
        if x_train.nrows() < k + 1 {
            return Err(Error::InsufficientData(format!(
                "knn with k={k} needs at least {} training rows, got {}",
                k + 1,
                x_train.nrows()
            )));
        }
        Ok(KnnModel { k, train: x_train.to_owned() })
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_dims(self.train.ncols(), x.ncols())?;
        Ok(Array1::from_iter((0..x.nrows()).map(|i| {
            k_nearest(self.train.view(), x.row(i), self.k, None)
                .last()
                .expect("k >= 1")
                .1
        })))
    }
}

/// Local outlier factor in novelty mode: neighborhoods, k-distances and
/// local reachability densities are all computed from the training set, and
/// test points are scored against them.
#[derive(Clone, Debug)]
pub struct LofModel {
    pub k: usize,
    train: Array2<f64>,
    k_dist: Vec<f64>,
    lrd: Vec<f64>,
}

const LRD_FLOOR: f64 = 1e-12;

impl LofModel {
    pub fn fit(x_train: ArrayView2<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("lof needs k >= 1".into()));
        }
        let n = x_train.nrows();
        if n < k + 1 {
            return Err(Error::InsufficientData(format!(
                "lof with k={k} needs at least {} training rows, got {n}",
                k + 1
            )));
        }
        let mut neighborhoods = Vec::with_capacity(n);
        let mut k_dist = Vec::with_capacity(n);
        for i in 0..n {
            let nn = k_nearest(x_train, x_train.row(i), k, Some(i));
            k_dist.push(nn.last().expect("k >= 1").1);
            neighborhoods.push(nn);
        }
        let lrd: Vec<f64> = neighborhoods
            .iter()
            .map(|nn| {
                let mean_reach = nn
                    .iter()
                    .map(|&(j, d)| d.max(k_dist[j]))
                    .sum::<f64>()
                    / nn.len() as f64;
                1.0 / mean_reach.max(LRD_FLOOR)
            })
            .collect();
        Ok(LofModel { k, train: x_train.to_owned(), k_dist, lrd })
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_dims(self.train.ncols(), x.ncols())?;
        Ok(Array1::from_iter((0..x.nrows()).map(|i| {
            let nn = k_nearest(self.train.view(), x.row(i), self.k, None);
            let mean_reach = nn
                .iter()
                .map(|&(j, d)| d.max(self.k_dist[j]))
                .sum::<f64>()
                / nn.len() as f64;
            let lrd_query = 1.0 / mean_reach.max(LRD_FLOOR);
            let mean_neighbor_lrd = nn.iter().map(|&(j, _)| self.lrd[j]).sum::<f64>() / nn.len() as f64;
            mean_neighbor_lrd / lrd_query
        })))
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!(
            "detector was fitted on {expected} features, queried with {got}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    #[test]
    fn knn_k1_hand_example() {
        let train = array![[0.0, 0.0], [1.0, 0.0]];
        let m = KnnModel::fit(train.view(), 1).unwrap();
        let s = m.score(array![[0.0, 3.0]].view()).unwrap();
        assert_abs_diff_eq!(s[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn knn_requires_k_plus_one_rows() {
        let train = Array2::<f64>::zeros((4, 2));
        assert!(matches!(
            KnnModel::fit(train.view(), 5),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn lof_flags_isolated_point() {
        let mut train = Vec::new();
        for i in 0..12 {
            let a = i as f64 * std::f64::consts::TAU / 12.0;
            train.push([a.cos() * 0.1, a.sin() * 0.1]);
        }
        let train = Array2::from_shape_fn((12, 2), |(i, j)| train[i][j]);
        let m = LofModel::fit(train.view(), 3).unwrap();
        let s = m.score(array![[0.0, 0.01], [4.0, 4.0]].view()).unwrap();
        assert!(s[1] > s[0], "outlier {} vs inlier {}", s[1], s[0]);
    }
}
