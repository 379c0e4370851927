//! Neighborhood scale selection. For each seed point we grow k-nearest
//! neighborhoods and score each with beta2 — the least-squares d-flat fitting
//! error scaled by neighborhood size and radius — stopping at the first strict
//! local minimum of the score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_flat_with_rss, FlatKind, PointCloud};
use crate::neighbors::{order_by_distance, SortedPrefix};

/// Optional seed refinement: replace the seed by the centroid of its
/// `neighbors` nearest points, `iters` times, before sizing the neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeanShift {
    pub neighbors: usize,
    pub iters: usize,
}

impl Default for MeanShift {
    fn default() -> Self {
        MeanShift {
            neighbors: 10,
            iters: 5,
        }
    }
}

/// Parameters of the scale scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    /// First neighborhood size tried. `None` picks the smallest size with a
    /// generically nonzero residual: d+2 for affine fits, d+1 for linear.
    pub start_size: Option<usize>,
    /// Size increment between scales.
    pub step: usize,
    /// Seed refinement toward denser regions; off by default.
    pub mean_shift: Option<MeanShift>,
    /// Also accept the very first scale when beta2 rises immediately after it.
    pub allow_first_scale_min: bool,
    /// Largest neighborhood size examined (the cloud size when `None`).
    pub max_size: Option<usize>,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            start_size: None,
            step: 2,
            mean_shift: None,
            allow_first_scale_min: false,
            max_size: None,
        }
    }
}

impl ScaleConfig {
    pub fn resolved_start(&self, d: usize, kind: FlatKind) -> usize {
        self.start_size.unwrap_or(match kind {
            FlatKind::Affine => d + 2,
            FlatKind::Linear => d + 1,
        })
    }
}

/// The scan record for one seed: every size examined, its beta2 value, and
/// which size was kept.
#[derive(Debug, Clone)]
pub struct ScaleProfile {
    /// Seed location after any mean shifting.
    pub center: DVector<f64>,
    pub sizes: Vec<usize>,
    pub beta2_values: Vec<f64>,
    pub selected_index: usize,
    /// Cloud indices of the selected neighborhood, nearest first.
    pub neighbor_indices: Vec<usize>,
}

impl ScaleProfile {
    pub fn selected_size(&self) -> usize {
        self.sizes[self.selected_index]
    }
}

/// The scaled least-squares fitting error of a neighborhood: the square root
/// of RSS / (n * r_max^2), where RSS is the residual of the best d-flat fit
/// and r_max the farthest neighbor's distance from `center`. Lies in [0, 1];
/// a neighborhood of coincident points scores 0 by convention.
pub fn beta2(
    neighborhood: &nalgebra::DMatrix<f64>,
    center: &DVector<f64>,
    d: usize,
    kind: FlatKind,
) -> Result<f64> {
    let n = neighborhood.nrows();
    if n == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    let mut r2_max = 0.0f64;
    for row in neighborhood.row_iter() {
        let mut d2 = 0.0;
        for (a, b) in row.iter().zip(center.iter()) {
            let diff = a - b;
            d2 += diff * diff;
        }
        r2_max = r2_max.max(d2);
    }
    if r2_max == 0.0 {
        return Ok(0.0);
    }
    let (_, rss) = fit_flat_with_rss(neighborhood, d, kind)?;
    Ok((rss.max(0.0) / (n as f64 * r2_max)).sqrt().min(1.0))
}

/// Eigenvalues of the symmetric matrix in `a`, written to `d` in descending
/// order. Destroys `a` and uses `e` as scratch, so the scale scan can call it
/// once per neighborhood size without allocating: Householder reduction to
/// tridiagonal form followed by implicit QL with shifts, eigenvalues only.
fn symmetric_eigenvalues_in_place(a: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = a.nrows();
    debug_assert!(a.ncols() == n && d.len() == n && e.len() == n);
    if n == 0 {
        return;
    }
    // reduce to tridiagonal form (transforms not accumulated)
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..i {
                scale += a[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..i {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let mut f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                f = 0.0;
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in j + 1..i {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[(i, i)];
    }

    // implicit QL with shifts on the tridiagonal (d, e)
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                // the epsilon test above converges in a handful of sweeps;
                // bail out rather than spin if it somehow cannot
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut broke_early = false;
            let mut i = m;
            while i > l {
                let ii = i - 1;
                let f = s * e[ii];
                let b = c * e[ii];
                r = f.hypot(g);
                e[ii + 1] = r;
                if r == 0.0 {
                    d[ii + 1] -= p;
                    e[m] = 0.0;
                    broke_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[ii + 1] - p;
                let t = (d[ii] - g) * s + 2.0 * c * b;
                p = s * t;
                d[ii + 1] = g + p;
                g = c * t - b;
                i -= 1;
            }
            if broke_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_unstable_by(|p, q| q.total_cmp(p));
}

/// Moves `x` to the centroid of its `neighbors` nearest points, repeated
/// `iters` times. Zero iterations return `x` unchanged.
pub fn mean_shift_center(
    cloud: &PointCloud,
    x: &DVector<f64>,
    neighbors: usize,
    iters: usize,
) -> Result<DVector<f64>> {
    if cloud.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let l = neighbors.min(cloud.len());
    let mut current = x.clone();
    for _ in 0..iters {
        let order = order_by_distance(cloud, &current);
        let mut centroid = DVector::zeros(cloud.ambient_dim());
        for &i in &order[..l] {
            centroid += cloud.point(i);
        }
        current = centroid / l as f64;
    }
    Ok(current)
}

/// Grows neighborhoods of sizes S, S+T, S+2T, ... around `x` (mean-shifted
/// first when configured) and selects the scale at the first strict local
/// minimum of beta2: the size whose score is below both neighbors. With
/// `allow_first_scale_min`, a rise straight out of the first scale selects
/// that first scale. When the scan exhausts the data without a local minimum,
/// the globally minimal score wins.
///
/// The scan keeps a running scatter matrix of the neighborhood, so each new
/// scale costs one rank-update plus a D x D eigenvalue problem instead of a
/// fresh SVD: the residual behind beta2 is the tail eigenvalue mass of the
/// (centered, for affine fits) scatter.
pub fn select_neighborhood(
    cloud: &PointCloud,
    x: &DVector<f64>,
    d: usize,
    cfg: &ScaleConfig,
    kind: FlatKind,
) -> Result<ScaleProfile> {
    let n = cloud.len();
    let start = cfg.resolved_start(d, kind);
    if start > n {
        return Err(Error::StartSizeExceedsData { start, n });
    }
    if cfg.step == 0 {
        return Err(Error::InvalidConfig("scale step must be at least 1".into()));
    }
    let center = match cfg.mean_shift {
        Some(ms) => mean_shift_center(cloud, x, ms.neighbors, ms.iters)?,
        None => x.clone(),
    };
    let mut nearest = SortedPrefix::new(cloud, &center);
    let limit = cfg.max_size.map_or(n, |cap| cap.min(n));

    let dim = cloud.ambient_dim();
    let pts = cloud.points();
    let mut sum = DVector::<f64>::zeros(dim);
    let mut raw = DMatrix::<f64>::zeros(dim, dim); // upper triangle of sum x x^T
    let mut added = 0usize;
    let mut scatter = DMatrix::<f64>::zeros(dim, dim);
    let mut eig = vec![0.0f64; dim];
    let mut work = vec![0.0f64; dim];

    let mut sizes = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut selected = None;
    let mut size = start;
    while size <= limit {
        let keyed = nearest.prefix(size);
        while added < size {
            let row = pts.row(keyed[added].1);
            for a in 0..dim {
                let va = row[a];
                sum[a] += va;
                for b in a..dim {
                    raw[(a, b)] += va * row[b];
                }
            }
            added += 1;
        }
        let r2_max = keyed[size - 1].0;
        let beta = if r2_max == 0.0 {
            // coincident neighborhood scores 0 by convention
            0.0
        } else {
            let m = size as f64;
            for a in 0..dim {
                for b in a..dim {
                    let v = match kind {
                        FlatKind::Affine => raw[(a, b)] - sum[a] * sum[b] / m,
                        FlatKind::Linear => raw[(a, b)],
                    };
                    scatter[(a, b)] = v;
                    scatter[(b, a)] = v;
                }
            }
            symmetric_eigenvalues_in_place(&mut scatter, &mut eig, &mut work);
            let rss: f64 = eig.iter().skip(d).map(|l| l.max(0.0)).sum();
            (rss / (m * r2_max)).sqrt().min(1.0)
        };
        sizes.push(size);
        betas.push(beta);
        let k = betas.len() - 1;
        if cfg.allow_first_scale_min && k == 1 && betas[0] < betas[1] {
            selected = Some(0);
            break;
        }
        if k >= 2 && betas[k - 1] < betas[k - 2].min(betas[k]) {
            selected = Some(k - 1);
            break;
        }
        size += cfg.step;
    }
    if sizes.is_empty() {
        // max_size below the start size leaves nothing to examine
        return Err(Error::InvalidConfig(format!(
            "scale cap {limit} is below the start size {start}"
        )));
    }
    let selected_index = selected.unwrap_or_else(|| {
        let mut best = 0;
        for i in 1..betas.len() {
            if betas[i] < betas[best] {
                best = i;
            }
        }
        best
    });
    let neighbor_indices = nearest
        .prefix(sizes[selected_index])
        .iter()
        .map(|&(_, i)| i)
        .collect();
    Ok(ScaleProfile {
        center,
        neighbor_indices,
        sizes,
        beta2_values: betas,
        selected_index,
    })
}
