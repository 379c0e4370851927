//! Synthetic union-of-flats data and evaluation metrics: draw random
//! subspaces (optionally angle-separated), sample noisy points from each,
//! sprinkle uniform outliers, and score predicted labelings against the truth.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FlatKind, PointCloud};
use crate::rng::derive_rng;

/// Ground-truth label marking an outlier.
pub const OUTLIER_LABEL: i64 = -1;

/// How "outlier fraction f" translates into a point count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierRule {
    /// round(f · inliers) outliers are appended.
    FractionOfInliers,
    /// round(f/(1−f) · inliers), making outliers a fraction f of the final set.
    FractionOfFinal,
}

/// Recipe for one synthetic data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Dimension of each subspace (one entry per subspace).
    pub dims: Vec<usize>,
    pub ambient: usize,
    pub samples_per_subspace: usize,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub kind: FlatKind,
    /// Reject subspace draws until every pair's smallest free principal angle
    /// reaches this bound.
    pub min_angle: Option<f64>,
    pub outlier_rule: OutlierRule,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(dims: Vec<usize>, ambient: usize, samples_per_subspace: usize) -> Self {
        SyntheticSpec {
            dims,
            ambient,
            samples_per_subspace,
            noise_sigma: 0.05,
            outlier_fraction: 0.0,
            kind: FlatKind::Affine,
            min_angle: None,
            outlier_rule: OutlierRule::FractionOfInliers,
            seed: 0,
        }
    }

    pub fn outlier_count(&self) -> usize {
        let inliers = (self.dims.len() * self.samples_per_subspace) as f64;
        let f = self.outlier_fraction;
        match self.outlier_rule {
            OutlierRule::FractionOfInliers => (f * inliers).round() as usize,
            OutlierRule::FractionOfFinal => (f / (1.0 - f) * inliers).round() as usize,
        }
    }
}

/// Generated points plus their ground truth and the recipe that made them.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub truth: Vec<i64>,
    pub spec: SyntheticSpec,
}

/// Principal angles between two subspaces given orthonormal basis matrices
/// (columns are directions), ascending. Computed from the singular values of
/// B1ᵀ·B2.
pub fn principal_angles(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Vec<f64> {
    let product = b1.transpose() * b2;
    let svd = product.svd(false, false);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|s| s.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

// Smallest principal angle that is free to be nonzero: when d1+d2 exceeds the
// ambient dimension the subspaces must share directions, forcing the first
// d1+d2−D angles to zero, so the constraint applies to the next one.
fn smallest_free_angle(b1: &DMatrix<f64>, b2: &DMatrix<f64>, ambient: usize) -> Option<f64> {
    let angles = principal_angles(b1, b2);
    let forced = (b1.ncols() + b2.ncols()).saturating_sub(ambient);
    angles.get(forced).copied()
}

fn unit_ball_point(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    let radius: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
    v * radius
}

const ANGLE_ATTEMPTS: usize = 10_000;

/// Draws the data set described by `spec`: K random subspaces (orthonormalized
/// Gaussian bases, offsets uniform in the unit ball for affine kind), points
/// uniform in each subspace's unit ball plus isotropic Gaussian noise, then
/// uniform outliers from the cube [−M, M]^D with M the largest inlier norm.
/// Inlier labels are the subspace indices in order; outliers carry −1.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledCloud> {
    let d_max = *spec
        .dims
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidConfig("need at least one subspace".into()))?;
    if d_max >= spec.ambient {
        return Err(Error::DimensionOutOfRange {
            d: d_max,
            ambient: spec.ambient,
        });
    }
    if !(0.0..1.0).contains(&spec.outlier_fraction) {
        return Err(Error::InvalidConfig(
            "outlier fraction must lie in [0, 1)".into(),
        ));
    }
    let mut rng = derive_rng(spec.seed, "generate", 0);
    let k = spec.dims.len();

    // subspace bases, re-drawn as a tuple until the angle constraint holds
    let mut bases: Vec<DMatrix<f64>> = Vec::new();
    let mut accepted = false;
    for _attempt in 0..ANGLE_ATTEMPTS {
        bases = spec
            .dims
            .iter()
            .map(|&d| {
                let gauss = DMatrix::from_fn(spec.ambient, d, |_, _| rng.sample(StandardNormal));
                gauss.qr().q()
            })
            .collect();
        let ok = match spec.min_angle {
            None => true,
            Some(bound) => {
                let mut all = true;
                'pairs: for i in 0..k {
                    for j in i + 1..k {
                        if let Some(angle) = smallest_free_angle(&bases[i], &bases[j], spec.ambient)
                        {
                            if angle < bound {
                                all = false;
                                break 'pairs;
                            }
                        }
                    }
                }
                all
            }
        };
        if ok {
            accepted = true;
            break;
        }
    }
    if !accepted {
        return Err(Error::AngleConstraintInfeasible {
            attempts: ANGLE_ATTEMPTS,
        });
    }

    let n_in = k * spec.samples_per_subspace;
    let mut points = DMatrix::zeros(n_in, spec.ambient);
    let mut truth = Vec::with_capacity(n_in);
    let mut row = 0;
    for (s, basis) in bases.iter().enumerate() {
        let offset = match spec.kind {
            FlatKind::Affine => unit_ball_point(spec.ambient, &mut rng),
            FlatKind::Linear => DVector::zeros(spec.ambient),
        };
        let d = spec.dims[s];
        for _ in 0..spec.samples_per_subspace {
            let coords = unit_ball_point(d, &mut rng);
            let mut p = &offset + basis * coords;
            for v in p.iter_mut() {
                *v += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
            points.row_mut(row).copy_from(&p.transpose());
            truth.push(s as i64);
            row += 1;
        }
    }

    let n_out = spec.outlier_count();
    let m = points.row_iter().map(|r| r.norm()).fold(0.0f64, f64::max);
    let mut all = points.resize_vertically(n_in + n_out, 0.0);
    for i in 0..n_out {
        for j in 0..spec.ambient {
            all[(n_in + i, j)] = rng.random_range(-m..=m);
        }
        truth.push(OUTLIER_LABEL);
    }

    Ok(LabeledCloud {
        cloud: PointCloud::with_labels(all, truth.clone())?,
        truth,
        spec: spec.clone(),
    })
}

// Minimum-cost perfect assignment on a square matrix (Kuhn–Munkres with
// potentials, O(n^3)); returns the column picked for each row.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[col] = row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        while j0 != 0 {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched[j] > 0 {
            assignment[matched[j] - 1] = j - 1;
        }
    }
    assignment
}

// Best achievable agreement between predicted and true labels under a
// one-to-one relabeling, from the confusion counts.
fn matched_agreement(confusion: &[Vec<usize>]) -> usize {
    let rows = confusion.len();
    let cols = confusion.first().map_or(0, |r| r.len());
    let n = rows.max(cols);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let agree = if i < rows && j < cols {
                        confusion[i][j]
                    } else {
                        0
                    };
                    -(agree as f64)
                })
                .collect()
        })
        .collect();
    let assignment = hungarian_min(&cost);
    (0..n)
        .map(|i| {
            let j = assignment[i];
            if i < rows && j < cols {
                confusion[i][j]
            } else {
                0
            }
        })
        .sum()
}

/// Percentage of inliers whose predicted cluster disagrees with the truth,
/// after the prediction's label names are matched to the true ones by the
/// agreement-maximizing one-to-one assignment. Points whose true label is
/// negative are outliers and are excluded entirely.
pub fn misclassification_rate(pred: &[usize], truth: &[i64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LabelCountMismatch {
            labels: truth.len(),
            points: pred.len(),
        });
    }
    let inliers: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] >= 0).collect();
    if inliers.is_empty() {
        return Err(Error::NoInliers);
    }
    let mut true_ids: Vec<i64> = inliers.iter().map(|&i| truth[i]).collect();
    true_ids.sort_unstable();
    true_ids.dedup();
    let mut pred_ids: Vec<usize> = inliers.iter().map(|&i| pred[i]).collect();
    pred_ids.sort_unstable();
    pred_ids.dedup();

    let t_index = |v: i64| true_ids.binary_search(&v).expect("id collected above");
    let p_index = |v: usize| pred_ids.binary_search(&v).expect("id collected above");
    let mut confusion = vec![vec![0usize; pred_ids.len()]; true_ids.len()];
    for &i in &inliers {
        confusion[t_index(truth[i])][p_index(pred[i])] += 1;
    }
    let correct = matched_agreement(&confusion);
    Ok(100.0 * (inliers.len() - correct) as f64 / inliers.len() as f64)
}
