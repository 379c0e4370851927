//! Choosing the number of clusters: run the pipeline at k = 1..k_max, record
//! the mean squared fitting error W_k at each k, and take the elbow of ln W_k
//! as measured by its second-order difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::par::try_par_map;
use crate::pipeline::{lbf_cluster, LbfConfig};
use crate::rng::derive_seed;

/// The elbow data: W_k for each candidate k, the second-order differences of
/// ln W_k at interior ks, and the chosen k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElbowCurve {
    /// k values 1..=k_max.
    pub ks: Vec<usize>,
    /// Mean squared distance to the fitted flats at each k.
    pub w: Vec<f64>,
    /// sod[i] = ln w[i] + ln w[i+2] - 2 ln w[i+1], i.e. the curvature at
    /// k = i+2 (interior ks only).
    pub sod: Vec<f64>,
    /// The interior k with maximal curvature, ties to the smallest k.
    pub k_opt: usize,
}

/// Runs the clustering pipeline once per k = 1..=k_max and returns the mean
/// squared distance of the data to the selected flats at each k. Each k gets
/// its own seed derived from `cfg_template.seed`, so the curve is reproducible
/// while the runs stay independent.
pub fn wk_curve(
    cloud: &PointCloud,
    d: usize,
    k_max: usize,
    cfg_template: &LbfConfig,
) -> Result<Vec<f64>> {
    if k_max < 3 {
        return Err(Error::InvalidConfig(
            "k_max must be at least 3 for an interior elbow".into(),
        ));
    }
    let n = cloud.len() as f64;
    try_par_map(k_max, |i| {
        let k = i + 1;
        let mut cfg = cfg_template.clone();
        cfg.d = d;
        cfg.k = k;
        cfg.seed = derive_seed(cfg_template.seed, "modelsel-k", k as u64);
        let result = lbf_cluster(cloud, &cfg)?;
        Ok(result.l2_energy / n)
    })
}

/// Locates the elbow of a W curve: clamps tiny values to 1e-12·W_1 (a perfect
/// fit has no logarithm), takes second-order differences of ln W, and returns
/// the interior k maximizing them.
pub fn sod_select(w: &[f64]) -> Result<ElbowCurve> {
    if w.len() < 3 {
        return Err(Error::InvalidConfig(
            "need at least 3 W values for an interior elbow".into(),
        ));
    }
    let floor = 1e-12 * w[0];
    let guarded: Vec<f64> = w.iter().map(|&v| v.max(floor)).collect();
    if guarded.iter().any(|&v| v <= 0.0) {
        return Err(Error::DegenerateEnergy);
    }
    let ln: Vec<f64> = guarded.iter().map(|v| v.ln()).collect();
    let sod: Vec<f64> = (1..ln.len() - 1)
        .map(|i| ln[i - 1] + ln[i + 1] - 2.0 * ln[i])
        .collect();
    let mut best = 0;
    for i in 1..sod.len() {
        if sod[i] > sod[best] {
            best = i;
        }
    }
    Ok(ElbowCurve {
        ks: (1..=w.len()).collect(),
        w: w.to_vec(),
        k_opt: best + 2,
        sod,
    })
}

/// Convenience composition: W curve then elbow selection.
pub fn select_model(
    cloud: &PointCloud,
    d: usize,
    k_max: usize,
    cfg_template: &LbfConfig,
) -> Result<ElbowCurve> {
    let w = wk_curve(cloud, d, k_max, cfg_template)?;
    sod_select(&w)
}
