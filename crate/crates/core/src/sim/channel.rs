use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::dataset::RssSample;

/// Log-distance path loss with Gaussian shadowing:
/// `rss(d) = p0 - 10·n·log10(d) + N(0, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    /// Mean RSS at 1 m.
    pub p0_dbm: f64,
    pub n_exp: f64,
    pub sigma_dbm: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            p0_dbm: -60.0,
            n_exp: 2.0,
            sigma_dbm: 4.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.n_exp > 0.0 && self.n_exp.is_finite()) {
            return Err(SimError::ConfigInvalid(format!(
                "path-loss exponent {} must be positive",
                self.n_exp
            )));
        }
        if !(self.sigma_dbm >= 0.0 && self.sigma_dbm.is_finite()) {
            return Err(SimError::ConfigInvalid(format!(
                "sigma {} must be non-negative",
                self.sigma_dbm
            )));
        }
        if !self.p0_dbm.is_finite() {
            return Err(SimError::ConfigInvalid("p0 must be finite".into()));
        }
        Ok(())
    }

    /// Noise-free RSS at `d` meters.
    pub fn mean_rss(&self, d: f64) -> f64 {
        self.p0_dbm - 10.0 * self.n_exp * d.log10()
    }
}

/// One shadowed RSS draw. Always consumes exactly one normal variate.
pub fn rss_at<R: Rng + ?Sized>(
    model: &PathLossModel,
    d: f64,
    rng: &mut R,
) -> Result<f64, SimError> {
    if !(d > 0.0) {
        return Err(SimError::NonpositiveDistance(d));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(model.mean_rss(d) + model.sigma_dbm * z)
}

/// Least-squares fit of RSS against `log10(distance)`; sigma is the
/// population standard deviation of the residuals.
pub fn fit_path_loss(samples: &[RssSample]) -> Result<PathLossModel, SimError> {
    let first = samples.first().ok_or(SimError::DegenerateDistances)?;
    if samples.iter().all(|s| s.distance_m == first.distance_m) {
        return Err(SimError::DegenerateDistances);
    }
    if samples.iter().any(|s| !(s.distance_m > 0.0)) {
        return Err(SimError::NonpositiveDistance(
            samples
                .iter()
                .map(|s| s.distance_m)
                .find(|d| !(*d > 0.0))
                .unwrap_or(0.0),
        ));
    }
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.distance_m.log10()).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.rss_dbm).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for s in samples {
        let dx = s.distance_m.log10() - mean_x;
        sxx += dx * dx;
        sxy += dx * (s.rss_dbm - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = samples
        .iter()
        .map(|s| {
            let r = s.rss_dbm - (intercept + slope * s.distance_m.log10());
            r * r
        })
        .sum();
    let model = PathLossModel {
        p0_dbm: intercept,
        n_exp: -slope / 10.0,
        sigma_dbm: (ss_res / n).sqrt(),
    };
    if !(model.n_exp > 0.0) {
        return Err(SimError::NonPhysicalFit(model.n_exp));
    }
    Ok(model)
}
