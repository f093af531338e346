//! Two-dimensional PCA projection for exporting records to external
//! plotting tools.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::tabular::EncodedMatrix;
use crate::{Error, Result};

/// Project rows onto the two leading principal axes. Axis signs are fixed
/// so the largest-magnitude loading is positive. With a single encoded
/// dimension the second coordinate is 0.
pub fn pca_2d(data: &EncodedMatrix) -> Result<Vec<[f64; 2]>> {
    let (n, d) = (data.nrows(), data.ncols());
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput("nothing to project".into()));
    }
    let mut mean = vec![0.0; d];
    for row in data.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| data.row(i)[j] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |k: usize| -> Vec<f64> {
        let Some(&col) = order.get(k) else {
            return vec![0.0; d];
        };
        let v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.into_iter().map(|x| -x).collect()
        } else {
            v
        }
    };
    let (a1, a2) = (axis(0), axis(1));
    Ok((0..n)
        .map(|i| {
            let row = centered.row(i);
            let dot = |a: &[f64]| row.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
            [dot(&a1), dot(&a2)]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Role;

    #[test]
    fn leading_axis_follows_spread() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.01 * ((i % 3) as f64)]).collect();
        let m = EncodedMatrix::from_rows(&rows, 2, Role::Unlabeled).unwrap();
        let p = pca_2d(&m).unwrap();
        assert!(p[19][0] > p[0][0]);
        let spread1 = p.iter().map(|x| x[0].abs()).fold(0.0, f64::max);
        let spread2 = p.iter().map(|x| x[1].abs()).fold(0.0, f64::max);
        assert!(spread1 > 100.0 * spread2);
    }

    #[test]
    fn one_dimensional_input() {
        let m = EncodedMatrix::from_scalars(&[1.0, 2.0, 3.0], Role::Unlabeled).unwrap();
        let p = pca_2d(&m).unwrap();
        assert_eq!(p[1], [0.0, 0.0]);
        assert_eq!(p[2][1], 0.0);
    }
}
