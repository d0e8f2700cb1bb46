use serde::{Deserialize, Serialize};

use crate::dsp::SpectralFeatures;

pub const FEATURE_NAMES: [&str; 4] = ["a300", "a500", "a700", "a900"];

/// Per-feature affine map to zero mean and unit (population) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    #[serde(with = "crate::hexfloat::array4")]
    pub means: [f64; 4],
    #[serde(with = "crate::hexfloat::array4")]
    pub scales: [f64; 4],
}

impl Standardization {
    /// Fit on `rows`; zero-variance features get scale 1 and a warning.
    pub fn fit(rows: &[[f64; 4]]) -> (Self, Vec<String>) {
        let n = rows.len() as f64;
        let mut means = [0.0; 4];
        let mut scales = [1.0; 4];
        let mut warnings = Vec::new();
        for j in 0..4 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            means[j] = mean;
            if sd <= 1e-12 * mean.abs() || sd == 0.0 {
                warnings.push(format!(
                    "DegenerateData: feature {} has zero variance; scale set to 1",
                    FEATURE_NAMES[j]
                ));
            } else {
                scales[j] = sd;
            }
        }
        (Self { means, scales }, warnings)
    }

    pub fn apply(&self, x: &[f64; 4]) -> [f64; 4] {
        let mut z = [0.0; 4];
        for j in 0..4 {
            z[j] = (x[j] - self.means[j]) / self.scales[j];
        }
        z
    }

    pub fn apply_features(&self, x: &SpectralFeatures) -> [f64; 4] {
        self.apply(&x.to_array())
    }
}
