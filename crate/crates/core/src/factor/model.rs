use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::FeatureConfig;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::session::GazeDirection;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Off-diagonal tolerance of the correlation-matrix diagonalization.
pub const EIGEN_REL_TOL: f64 = 1e-12;

/// Correlation-matrix principal components with per-direction centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub format_version: u32,
    pub feature_config: FeatureConfig,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// All `p` correlation-matrix eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub retained_k: usize,
    /// `p x k` row-major, `V_k * Lambda_k^(-1/2)`.
    pub score_weights: Vec<f64>,
    pub centroids: BTreeMap<GazeDirection, Vec<f64>>,
    pub reject_tau: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Overrides the eigenvalue-above-one retention rule.
    pub k: Option<usize>,
    /// Overrides the fitted rejection threshold.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub direction: GazeDirection,
    pub mean_score: Vec<f64>,
    pub distances: BTreeMap<GazeDirection, f64>,
    pub min_distance: f64,
}

fn column_stats(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    x.column_iter()
        .map(|c| {
            let m = c.sum() / n;
            let ss: f64 = c.iter().map(|v| (v - m) * (v - m)).sum();
            (m, (ss / (n - 1.0)).sqrt())
        })
        .unzip()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// `(x - means) / stds` row-wise.
fn standardize(x: &DMatrix<f64>, means: &[f64], stds: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
        (x[(r, c)] - means[c]) / stds[c]
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pearson correlation matrix `Z^T Z / (n - 1)` of the columns of `x`, along
/// with the standardization statistics.
pub fn correlation_matrix(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let (means, stds) = column_stats(x);
    if let Some(j) = stds.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::ZeroVariance(format!("feature column {j}")));
    }
    let z = standardize(x, &means, &stds);
    let r = (z.transpose() * &z) / (x.nrows() as f64 - 1.0);
    Ok((r, means, stds))
}

/// Fits the factor model to labelled feature rows.
pub fn fit_factor_model(
    features: &DMatrix<f64>,
    labels: &[GazeDirection],
    feature_config: &FeatureConfig,
    opts: &FitOptions,
) -> Result<FactorModel> {
    let (n, p) = features.shape();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if n <= p {
        return Err(Error::Invalid(format!(
            "need more rows than features ({n} <= {p})"
        )));
    }
    if labels.iter().any(|d| !d.is_known()) {
        return Err(Error::Invalid(
            "training rows must carry a known direction".into(),
        ));
    }
    let mut counts: BTreeMap<GazeDirection, usize> = BTreeMap::new();
    for &d in labels {
        *counts.entry(d).or_default() += 1;
    }
    if let Some((d, &rows)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(Error::TooFewRows {
            direction: d.to_string(),
            rows,
        });
    }

    let (r, means, stds) = correlation_matrix(features)?;
    let eig = sym_eigen(&r, EIGEN_REL_TOL);
    let eigenvalues: Vec<f64> = eig.values.iter().copied().collect();
    let k = match opts.k {
        Some(k) if k == 0 || k > p => return Err(Error::ComponentOutOfRange { index: k, k: p }),
        Some(k) => k,
        None => eigenvalues.iter().filter(|&&l| l > 1.0).count(),
    };
    if k == 0 {
        return Err(Error::NoFactorsRetained(eigenvalues[0]));
    }
    if let Some(&l) = eigenvalues[..k].iter().find(|&&l| !(l > 1e-12)) {
        return Err(Error::RankDeficient(format!(
            "retained eigenvalue {l:e} is numerically zero"
        )));
    }
    let mut w = eig.vectors.columns(0, k).clone_owned();
    for (j, mut col) in w.column_iter_mut().enumerate() {
        col /= eigenvalues[j].sqrt();
    }

    let scores = standardize(features, &means, &stds) * &w;
    let mut centroids = BTreeMap::new();
    let mut tau_fit = 0.0f64;
    for &d in counts.keys() {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == d).collect();
        let c: Vec<f64> = (0..k)
            .map(|j| rows.iter().map(|&i| scores[(i, j)]).sum::<f64>() / rows.len() as f64)
            .collect();
        let dist: Vec<f64> = rows
            .iter()
            .map(|&i| euclid(&scores.row(i).iter().copied().collect::<Vec<_>>(), &c))
            .collect();
        let (m, s) = mean_std(&dist);
        tau_fit = tau_fit.max(m + 3.0 * s);
        centroids.insert(d, c);
    }
    let reject_tau = opts.tau.unwrap_or(tau_fit);
    if !(reject_tau > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rejection threshold {reject_tau} must be positive"
        )));
    }

    Ok(FactorModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_config: feature_config.clone(),
        means,
        stds,
        eigenvalues,
        retained_k: k,
        score_weights: w.transpose().as_slice().to_vec(),
        centroids,
        reject_tau,
    })
}

impl FactorModel {
    pub fn p(&self) -> usize {
        self.means.len()
    }

    /// `p x k` score weight matrix.
    pub fn weights(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.p(), self.retained_k, &self.score_weights)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        let k = self.retained_k;
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let dims = [
            (self.stds.len(), p),
            (self.eigenvalues.len(), p),
            (self.score_weights.len(), p * k),
            (self.feature_config.dim(), p),
        ];
        if let Some(&(found, expected)) = dims.iter().find(|(f, e)| f != e) {
            return Err(Error::DimensionMismatch { expected, found });
        }
        if k == 0 || k > p {
            return Err(Error::ComponentOutOfRange { index: k, k: p });
        }
        if let Some(c) = self.centroids.values().find(|c| c.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: c.len(),
            });
        }
        if self.stds.iter().any(|&s| !(s > 0.0)) || !(self.reject_tau > 0.0) {
            return Err(Error::Invalid("model holds a non-positive scale".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("model", e))?;
        fs::write(path, text + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let m: FactorModel = serde_json::from_str(&text)
            .map_err(|e| Error::json(format!("parsing {}", path.display()), e))?;
        m.validate()?;
        Ok(m)
    }
}

/// Standardized regression scores of `features` under `model`.
pub fn component_scores(model: &FactorModel, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if features.ncols() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            found: features.ncols(),
        });
    }
    Ok(standardize(features, &model.means, &model.stds) * model.weights())
}

/// Nearest centroid to the mean score, or `Unknown` beyond `reject_tau`.
pub fn classify_mean_score(model: &FactorModel, mean_score: Vec<f64>) -> ClassifyResult {
    let distances: BTreeMap<GazeDirection, f64> = model
        .centroids
        .iter()
        .map(|(&d, c)| (d, euclid(&mean_score, c)))
        .collect();
    let (best, min_distance) = distances
        .iter()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or((GazeDirection::Unknown, f64::INFINITY), |(&d, &v)| (d, v));
    let direction = if min_distance <= model.reject_tau {
        best
    } else {
        GazeDirection::Unknown
    };
    ClassifyResult {
        direction,
        mean_score,
        distances,
        min_distance,
    }
}

pub fn classify(model: &FactorModel, features: &DMatrix<f64>) -> Result<ClassifyResult> {
    if features.nrows() == 0 {
        return Err(Error::Invalid("no feature rows to classify".into()));
    }
    let s = component_scores(model, features)?;
    let mean: DVector<f64> = s.row_mean().transpose();
    Ok(classify_mean_score(model, mean.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_model(centroids: &[(GazeDirection, [f64; 2])], tau: f64) -> FactorModel {
        FactorModel {
            format_version: MODEL_FORMAT_VERSION,
            feature_config: FeatureConfig {
                bands_hz: vec![(1.0, 2.0), (2.0, 3.0)],
                ..FeatureConfig::default()
            },
            means: vec![0.0, 0.0],
            stds: vec![1.0, 1.0],
            eigenvalues: vec![1.0, 1.0],
            retained_k: 2,
            score_weights: vec![1.0, 0.0, 0.0, 1.0],
            centroids: centroids.iter().map(|(d, c)| (*d, c.to_vec())).collect(),
            reject_tau: tau,
        }
    }

    fn quadrant_model() -> FactorModel {
        use GazeDirection::*;
        toy_model(
            &[
                (TopLeft, [-1.0, 1.0]),
                (TopRight, [1.0, 1.0]),
                (BottomLeft, [-1.0, -1.0]),
                (BottomRight, [1.0, -1.0]),
            ],
            1.0,
        )
    }

    #[test]
    fn nearest_centroid() {
        let r = classify_mean_score(&quadrant_model(), vec![0.9, 1.1]);
        assert_eq!(r.direction, GazeDirection::TopRight);
        assert!((r.min_distance - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn far_point_rejected() {
        let r = classify_mean_score(&quadrant_model(), vec![10.0, 10.0]);
        assert_eq!(r.direction, GazeDirection::Unknown);
    }

    #[test]
    fn perfectly_correlated_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let col: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = DMatrix::from_fn(40, 2, |r, c| col[r] * (c + 1) as f64);
        let labels: Vec<_> = (0..40).map(|i| GazeDirection::QUADRANTS[i % 4]).collect();
        let cfg = FeatureConfig {
            bands_hz: vec![(1.0, 2.0), (2.0, 3.0)],
            ..FeatureConfig::default()
        };
        let m = fit_factor_model(&x, &labels, &cfg, &FitOptions::default()).unwrap();
        assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-12);
        assert_eq!(m.retained_k, 1);
    }

    #[test]
    fn zero_variance_column_named() {
        let x = DMatrix::from_fn(10, 2, |r, c| if c == 1 { 3.0 } else { r as f64 });
        let labels = vec![GazeDirection::TopLeft; 10];
        let cfg = FeatureConfig {
            bands_hz: vec![(1.0, 2.0), (2.0, 3.0)],
            ..FeatureConfig::default()
        };
        match fit_factor_model(&x, &labels, &cfg, &FitOptions::default()) {
            Err(Error::ZeroVariance(msg)) => assert!(msg.contains('1')),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_row_direction_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(10, 2, |_, _| rng.random_range(0.0..1.0));
        let mut labels = vec![GazeDirection::TopLeft; 10];
        labels[9] = GazeDirection::BottomRight;
        let cfg = FeatureConfig {
            bands_hz: vec![(1.0, 2.0), (2.0, 3.0)],
            ..FeatureConfig::default()
        };
        assert!(matches!(
            fit_factor_model(
                &x,
                &labels,
                &cfg,
                &FitOptions {
                    k: Some(1),
                    tau: None
                }
            ),
            Err(Error::TooFewRows { rows: 1, .. })
        ));
    }

    #[test]
    fn centering_and_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(60, 5, |_, _| rng.random_range(0.0..1.0));
        let labels: Vec<_> = (0..60).map(|i| GazeDirection::QUADRANTS[i % 4]).collect();
        let m = fit_factor_model(
            &x,
            &labels,
            &FeatureConfig::default(),
            &FitOptions {
                k: Some(2),
                tau: None,
            },
        )
        .unwrap();
        let at_mean = DMatrix::from_row_slice(1, 5, &m.means);
        assert!(component_scores(&m, &at_mean)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
        let row = x.rows(7, 1).clone_owned();
        let dup = DMatrix::from_fn(4, 5, |_, c| row[(0, c)]);
        let s = component_scores(&m, &dup).unwrap();
        for r in 1..4 {
            assert_eq!(s.row(r), s.row(0));
        }
        assert!(component_scores(&m, &DMatrix::zeros(1, 4)).is_err());
        assert!(classify(&m, &DMatrix::zeros(0, 5)).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        let m = quadrant_model();
        m.save(&p).unwrap();
        assert_eq!(FactorModel::load(&p).unwrap(), m);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"TopRight\""), "{text}");
    }
}
