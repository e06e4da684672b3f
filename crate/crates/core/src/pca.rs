//! Covariance PCA and first-component projection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Fitted covariance eigendecomposition.
///
/// Serialized as `{variables, column_means, eigenvalues, eigenvectors, pc1}`
/// where `eigenvectors[k]` is the unit vector paired with `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub variables: Vec<String>,
    pub column_means: Vec<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub pc1: Vec<f64>,
}

/// PC1 score of every region, in dataset row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub values: Vec<f64>,
    pub p_min: f64,
    pub p_max: f64,
}

impl Projection {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewRows { needed: 1, actual: 0 });
        }
        let (p_min, p_max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        Ok(Projection {
            values,
            p_min,
            p_max,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.p_max - self.p_min
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.p_max > self.p_min)
    }
}

/// Sample covariance (`1/(n-1)`) of the dataset columns, row-major.
pub fn covariance(d: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (d.n_rows(), d.n_vars());
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, actual: n });
    }
    let mut means = vec![0.0; m];
    for i in 0..n {
        for (mu, x) in means.iter_mut().zip(d.row(i)) {
            *mu += x;
        }
    }
    means.iter_mut().for_each(|mu| *mu /= n as f64);

    let mut cov = vec![0.0; m * m];
    let mut centered = vec![0.0; m];
    for i in 0..n {
        for ((c, x), mu) in centered.iter_mut().zip(d.row(i)).zip(&means) {
            *c = x - mu;
        }
        for p in 0..m {
            for q in p..m {
                cov[p * m + q] += centered[p] * centered[q];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for p in 0..m {
        for q in p..m {
            let c = cov[p * m + q] * scale;
            cov[p * m + q] = c;
            cov[q * m + p] = c;
        }
    }
    Ok((means, cov))
}

/// Fits the covariance eigendecomposition. Callers normally pass a
/// normalized dataset; raw units are accepted as-is.
pub fn fit_pca(d: &Dataset) -> Result<ProjectionModel> {
    let (means, cov) = covariance(d)?;
    let m = d.n_vars();
    let eig = symmetric_eigen(&cov, m)?;
    let eigenvectors: Vec<Vec<f64>> = (0..m).map(|k| eig.vector(k)).collect();
    Ok(ProjectionModel {
        variables: d.variable_names(),
        column_means: means,
        eigenvalues: eig.values,
        pc1: eigenvectors[0].clone(),
        eigenvectors,
    })
}

impl ProjectionModel {
    pub fn dim(&self) -> usize {
        self.pc1.len()
    }

    /// `pc1 · (row - column_means)`.
    #[inline]
    pub fn score(&self, row: &[f64]) -> f64 {
        row.iter()
            .zip(&self.column_means)
            .zip(&self.pc1)
            .map(|((x, mu), w)| w * (x - mu))
            .sum()
    }

    pub fn project_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(self.score(row))
    }

    pub fn explained_variance(&self) -> Result<Vec<f64>> {
        explained_variance(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ProjectionModel = serde_json::from_str(text)?;
        let m = model.variables.len();
        let consistent = model.column_means.len() == m
            && model.eigenvalues.len() == m
            && model.pc1.len() == m
            && model.eigenvectors.len() == m
            && model.eigenvectors.iter().all(|v| v.len() == m);
        if !consistent || m == 0 {
            return Err(Error::Malformed("projection model dimensions are inconsistent".into()));
        }
        Ok(model)
    }
}

/// Scores every row of `d` on the first component.
pub fn project_pc1(model: &ProjectionModel, d: &Dataset) -> Result<Projection> {
    if d.n_vars() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: d.n_vars(),
        });
    }
    if let Some(v) = d
        .variables()
        .iter()
        .zip(&model.variables)
        .find(|(spec, name)| &spec.name != *name)
    {
        return Err(Error::UnknownVariable(v.0.name.clone()));
    }
    let m = d.n_vars();
    let values: Vec<f64> = d
        .values()
        .par_chunks_exact(m)
        .with_min_len(1024)
        .map(|row| model.score(row))
        .collect();
    Projection::new(values)
}

/// Eigenvalue shares; tiny negative eigenvalues from rounding count as zero.
pub fn explained_variance(model: &ProjectionModel) -> Result<Vec<f64>> {
    let clipped: Vec<f64> = model.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(clipped.iter().map(|l| l / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Region, VariableSpec};

    pub(crate) fn points(rows: &[&[f64]]) -> Dataset {
        let m = rows[0].len();
        let regions = (0..rows.len())
            .map(|i| Region::new(format!("p{i}"), 0.0, 0.0))
            .collect();
        let vars = (0..m).map(|j| VariableSpec::continuous(format!("v{j}"))).collect();
        Dataset::new(regions, vars, rows.concat()).unwrap()
    }

    #[test]
    fn single_variable_pc1_is_unit() {
        let d = points(&[&[1.0], &[4.0], &[2.0], &[9.0]]);
        let m = fit_pca(&d).unwrap();
        assert_eq!(m.pc1, vec![1.0]);
        let xs = [1.0, 4.0, 2.0, 9.0];
        let mean = xs.iter().sum::<f64>() / 4.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        assert!((m.eigenvalues[0] - var).abs() < 1e-12);
        let p = project_pc1(&m, &d).unwrap();
        for (s, x) in p.values.iter().zip(xs) {
            assert!((s - (x - mean)).abs() < 1e-12);
        }
        assert_eq!(explained_variance(&m).unwrap(), vec![1.0]);
    }

    #[test]
    fn collinear_points_closed_form() {
        let d = points(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]);
        let m = fit_pca(&d).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.pc1[0] - r).abs() < 1e-12 && (m.pc1[1] - r).abs() < 1e-12);
        // covariance [[1,1],[1,1]] -> eigenvalues 2 and 0
        assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-12);
        let p = project_pc1(&m, &d).unwrap();
        let s2 = 2f64.sqrt();
        for (got, want) in p.values.iter().zip([-s2, 0.0, s2]) {
            assert!((got - want).abs() < 1e-12);
        }
        let ev = explained_variance(&m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && ev[1].abs() < 1e-12);
    }

    #[test]
    fn axis_aligned_pc1() {
        // var(x) = 1, var(y) = 0
        let d = points(&[&[0.0, 3.0], &[1.0, 3.0], &[2.0, 3.0]]);
        let m = fit_pca(&d).unwrap();
        assert_eq!(m.pc1, vec![1.0, 0.0]);
    }

    #[test]
    fn row_at_mean_scores_zero() {
        let d = points(&[&[0.0, 1.0], &[2.0, 5.0], &[4.0, 0.0]]);
        let m = fit_pca(&d).unwrap();
        assert_eq!(m.project_row(&m.column_means.clone()).unwrap(), 0.0);
        assert!(m.project_row(&[1.0]).is_err());
    }

    #[test]
    fn explained_variance_fractions() {
        let model = ProjectionModel {
            variables: vec!["a".into(), "b".into()],
            column_means: vec![0.0, 0.0],
            eigenvalues: vec![3.0, 1.0],
            eigenvectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            pc1: vec![1.0, 0.0],
        };
        assert_eq!(explained_variance(&model).unwrap(), vec![0.75, 0.25]);
        let zero = ProjectionModel {
            eigenvalues: vec![0.0, 0.0],
            ..model
        };
        assert!(matches!(explained_variance(&zero), Err(Error::ZeroVariance)));
    }

    #[test]
    fn too_few_rows() {
        let d = points(&[&[1.0, 2.0]]);
        assert!(matches!(fit_pca(&d), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn model_json_round_trip() {
        let d = points(&[&[0.0, 1.0], &[2.0, 5.0], &[4.0, 0.0]]);
        let m = fit_pca(&d).unwrap();
        let back = ProjectionModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(ProjectionModel::from_json(r#"{"variables":["a"],"column_means":[],"eigenvalues":[1],"eigenvectors":[[1]],"pc1":[1]}"#).is_err());
    }

    #[test]
    fn variable_mismatch_is_rejected() {
        let d = points(&[&[0.0, 1.0], &[2.0, 5.0], &[4.0, 0.0]]);
        let m = fit_pca(&d).unwrap();
        let other = points(&[&[0.0], &[1.0]]);
        assert!(project_pc1(&m, &other).is_err());
    }
}
