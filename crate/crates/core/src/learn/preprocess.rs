use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::measurement::{FeatureMatrix, FeatureVector};

/// Columns to zero mean and unit (population) variance. Constant columns
/// become all zeros.
pub fn standardize_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            col.fill(0.0);
        } else {
            col.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
    out
}

pub fn standardize(f: &FeatureMatrix) -> Result<FeatureMatrix> {
    if f.n_rows() < 2 {
        return Err(Error::InvalidInput("standardization needs at least two rows".into()));
    }
    let z = standardize_matrix(&f.to_matrix());
    let rows = f
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| FeatureVector {
            values: z.row(i).iter().copied().collect(),
            n_sites: r.n_sites,
            include_zzz: r.include_zzz,
        })
        .collect();
    FeatureMatrix::new(rows, f.grid.clone())
}

#[derive(Debug, Clone)]
pub struct Pca {
    /// `n_rows x k` scores of the centered data.
    pub projections: DMatrix<f64>,
    /// `n_cols x k` orthonormal principal axes.
    pub components: DMatrix<f64>,
    /// Variance along each axis, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Sum of all covariance eigenvalues.
    pub total_variance: f64,
}

impl Pca {
    pub fn explained_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| {
                if self.total_variance > 0.0 {
                    v / self.total_variance
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Principal components from the eigendecomposition of the sample covariance.
///
/// Each axis is signed so that its largest-magnitude loading is positive.
pub fn pca(x: &DMatrix<f64>, k: usize) -> Result<Pca> {
    let (n, d) = x.shape();
    if n < 2 || k == 0 || k > (n - 1).min(d) {
        return Err(Error::InvalidInput(format!(
            "cannot extract {k} components from a {n}x{d} matrix"
        )));
    }
    let means: Vec<f64> = x.column_iter().map(|c| c.sum() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = DMatrix::zeros(d, k);
    for (slot, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        components.set_column(slot, &v);
    }
    let explained_variance = order.iter().take(k).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total_variance = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    Ok(Pca {
        projections: &centered * &components,
        components,
        explained_variance,
        total_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_and_two_point_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 2.0, 1.0, 1.0]);
        let z = standardize_matrix(&x);
        assert_eq!(z.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        let two = standardize_matrix(&DMatrix::from_row_slice(2, 1, &[0.0, 2.0]));
        assert_eq!(two.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn collinear_points_have_one_component() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { i as f64 } else { 2.0 * i as f64 + 1.0 });
        let p = pca(&x, 2).unwrap();
        let ratio = p.explained_ratio();
        assert!((ratio[0] - 1.0).abs() < 1e-12);
        assert!(ratio[1].abs() < 1e-12);
    }

    #[test]
    fn rank_k_reconstruction_is_exact() {
        let x = DMatrix::from_fn(10, 4, |i, j| {
            let t = i as f64;
            [t, t * t, 3.0 * t - t * t, 1.0][j]
        });
        let p = pca(&x, 2).unwrap();
        let recon = &p.projections * p.components.transpose();
        let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
        let centered = DMatrix::from_fn(10, 4, |i, j| x[(i, j)] - means[j]);
        assert!((recon - centered).amax() < 1e-9);
    }

    #[test]
    fn too_many_components_rejected() {
        let x = DMatrix::from_element(3, 5, 1.0);
        assert!(pca(&x, 3).is_err());
        assert!(pca(&x, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn standardized_columns_have_unit_variance(
            data in proptest::collection::vec(-50.0f64..50.0, 30)
        ) {
            let x = DMatrix::from_row_slice(10, 3, &data);
            let z = standardize_matrix(&x);
            for col in z.column_iter() {
                let mean = col.mean();
                let var = col.iter().map(|v| v * v).sum::<f64>() / 10.0;
                prop_assert!(mean.abs() < 1e-12);
                prop_assert!(var == 0.0 || (var - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn components_are_orthonormal_and_sorted(
            data in proptest::collection::vec(-5.0f64..5.0, 48)
        ) {
            let x = DMatrix::from_row_slice(12, 4, &data);
            let p = pca(&x, 3).unwrap();
            let gram = p.components.transpose() * &p.components;
            prop_assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-10);
            prop_assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        }
    }
}
