//! The clustering pipeline: sample seeds, size a neighborhood around each,
//! fit one candidate flat per seed, pick K of the candidates by greedy
//! ℓ1-energy descent, and assign every point to its nearest chosen flat.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{best_fit_flat, dists_to_flat, Flat, FlatKind, PointCloud};
use crate::par::{par_map, try_par_map};
use crate::rng::derive_rng;
use crate::scale::{select_neighborhood, ScaleConfig, ScaleProfile};

/// All tunables of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfConfig {
    /// Flat dimension.
    pub d: usize,
    /// Number of clusters.
    pub k: usize,
    /// Candidate flats sampled; `None` means 70·k.
    pub candidates: Option<usize>,
    /// Greedy replacement passes; `None` means 3·k.
    pub passes: Option<usize>,
    pub kind: FlatKind,
    pub scale: ScaleConfig,
    pub seed: u64,
    /// Keep the per-seed scale profiles in the result (memory for diagnostics).
    #[serde(default)]
    pub keep_profiles: bool,
}

impl LbfConfig {
    pub fn new(d: usize, k: usize) -> Self {
        LbfConfig {
            d,
            k,
            candidates: None,
            passes: None,
            kind: FlatKind::Affine,
            scale: ScaleConfig::default(),
            seed: 0,
            keep_profiles: false,
        }
    }

    pub fn effective_candidates(&self) -> usize {
        self.candidates.unwrap_or(70 * self.k)
    }

    pub fn effective_passes(&self) -> usize {
        self.passes.unwrap_or(3 * self.k)
    }
}

/// Output of a clustering run.
#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub flats: Vec<Flat>,
    /// Per-point index of the nearest flat, ties to the lowest index.
    pub labels: Vec<usize>,
    /// Per-point distance to the assigned flat.
    pub distances: Vec<f64>,
    /// Sum of the per-point distances.
    pub l1_energy: f64,
    /// Sum of the squared per-point distances.
    pub l2_energy: f64,
    pub elapsed_secs: f64,
    /// Scale scan per candidate seed, when requested.
    pub profiles: Option<Vec<ScaleProfile>>,
    /// Flats that ended up with no points assigned.
    pub empty_clusters: Vec<usize>,
}

/// Samples `C` seed points uniformly with replacement, sizes a neighborhood
/// around each, and fits one flat per seed.
pub fn generate_candidates(
    cloud: &PointCloud,
    cfg: &LbfConfig,
) -> Result<(Vec<Flat>, Vec<ScaleProfile>)> {
    let c = cfg.effective_candidates();
    if cfg.k >= c {
        return Err(Error::TooFewCandidates { c, k: cfg.k });
    }
    let n = cloud.len();
    let mut seed_rng = derive_rng(cfg.seed, "candidate-seeds", 0);
    let seeds: Vec<usize> = (0..c).map(|_| seed_rng.random_range(0..n)).collect();
    // seeds are drawn with replacement, and a repeated seed reproduces the
    // exact same scan and fit — do the work once per distinct seed
    let mut slot_of_seed: HashMap<usize, usize> = HashMap::new();
    let mut distinct: Vec<usize> = Vec::new();
    for &s in &seeds {
        slot_of_seed.entry(s).or_insert_with(|| {
            distinct.push(s);
            distinct.len() - 1
        });
    }
    let fitted = try_par_map(distinct.len(), |j| -> Result<(Flat, ScaleProfile)> {
        let x = cloud.point(distinct[j]);
        let profile = select_neighborhood(cloud, &x, cfg.d, &cfg.scale, cfg.kind)?;
        let neighborhood = cloud.gather(&profile.neighbor_indices);
        let flat = best_fit_flat(&neighborhood, cfg.d, cfg.kind)?;
        Ok((flat, profile))
    })?;
    Ok(seeds
        .iter()
        .map(|s| fitted[slot_of_seed[s]].clone())
        .unzip())
}

/// Sum over points of the distance to the nearest flat in the list.
pub fn l1_energy(cloud: &PointCloud, flats: &[Flat]) -> Result<f64> {
    if flats.is_empty() {
        return Err(Error::EmptyFlatList);
    }
    let per_flat: Vec<Vec<f64>> = flats
        .iter()
        .map(|f| dists_to_flat(cloud, f))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for i in 0..cloud.len() {
        let mut best = f64::INFINITY;
        for d in &per_flat {
            best = best.min(d[i]);
        }
        total += best;
    }
    Ok(total)
}

/// Greedy ℓ1 selection: starting from K random distinct candidates, each pass
/// targets one active slot and swaps in the inactive candidate that lowers the
/// total ℓ1 energy the most, if any lowers it strictly. Slots are visited in
/// random order, each exactly once per block of K passes, so p = 3K passes give
/// every slot three chances. Returns indices into `candidates`.
pub fn greedy_select_indices(
    cloud: &PointCloud,
    candidates: &[Flat],
    k: usize,
    p: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let c = candidates.len();
    if k >= c {
        return Err(Error::TooFewCandidates { c, k });
    }
    let n = cloud.len();
    // distance of every point to every candidate, candidate-major
    let dmat: Vec<Vec<f64>> = try_par_map(c, |j| dists_to_flat(cloud, &candidates[j]))?;

    let mut init_rng = derive_rng(seed, "greedy-init", 0);
    let mut active: Vec<usize> = rand::seq::index::sample(&mut init_rng, c, k).into_vec();
    let mut is_active = vec![false; c];
    for &a in &active {
        is_active[a] = true;
    }

    let mut pass_rng = derive_rng(seed, "greedy-pass", 0);
    let mut slot_block: Vec<usize> = Vec::new();
    for _pass in 0..p {
        if slot_block.is_empty() {
            slot_block = (0..k).collect();
            slot_block.shuffle(&mut pass_rng);
        }
        let slot = slot_block.pop().expect("block refilled above");

        // nearest-distance over the active set with the slot removed
        let mut dmin_others = vec![f64::INFINITY; n];
        for (s, &a) in active.iter().enumerate() {
            if s == slot {
                continue;
            }
            let col = &dmat[a];
            for i in 0..n {
                if col[i] < dmin_others[i] {
                    dmin_others[i] = col[i];
                }
            }
        }
        let current_col = &dmat[active[slot]];
        let current: f64 = (0..n).map(|i| dmin_others[i].min(current_col[i])).sum();

        // score every inactive candidate as the slot's replacement
        let scored: Vec<Option<(f64, usize)>> = par_map(c, |j| {
            if is_active[j] {
                return None;
            }
            let col = &dmat[j];
            let s: f64 = (0..n).map(|i| dmin_others[i].min(col[i])).sum();
            Some((s, j))
        });
        let best = scored
            .into_iter()
            .flatten()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((s_best, j_best)) = best {
            if s_best < current {
                is_active[active[slot]] = false;
                active[slot] = j_best;
                is_active[j_best] = true;
                debug_assert!(s_best <= current);
            }
        }
    }
    Ok(active)
}

/// As `greedy_select_indices`, returning the selected flats themselves.
pub fn greedy_select(
    cloud: &PointCloud,
    candidates: &[Flat],
    k: usize,
    p: usize,
    seed: u64,
) -> Result<Vec<Flat>> {
    let idx = greedy_select_indices(cloud, candidates, k, p, seed)?;
    Ok(idx.into_iter().map(|i| candidates[i].clone()).collect())
}

/// Nearest-flat assignment: per-point flat index and distance, distance ties
/// to the lowest flat index.
pub fn assign(cloud: &PointCloud, flats: &[Flat]) -> Result<(Vec<usize>, Vec<f64>)> {
    if flats.is_empty() {
        return Err(Error::EmptyFlatList);
    }
    let per_flat: Vec<Vec<f64>> = try_par_map(flats.len(), |j| dists_to_flat(cloud, &flats[j]))?;
    let n = cloud.len();
    let mut labels = vec![0usize; n];
    let mut distances = vec![0.0f64; n];
    for i in 0..n {
        let mut best = 0usize;
        let mut best_d = per_flat[0][i];
        for (j, col) in per_flat.iter().enumerate().skip(1) {
            if col[i] < best_d {
                best_d = col[i];
                best = j;
            }
        }
        labels[i] = best;
        distances[i] = best_d;
    }
    Ok((labels, distances))
}

/// The full pipeline: candidates, greedy selection, assignment. The final
/// flats come straight from the candidate pool — there is no refitting step.
pub fn lbf_cluster(cloud: &PointCloud, cfg: &LbfConfig) -> Result<ClusteringResult> {
    let started = Instant::now();
    let (candidates, profiles) = generate_candidates(cloud, cfg)?;
    let chosen =
        greedy_select_indices(cloud, &candidates, cfg.k, cfg.effective_passes(), cfg.seed)?;
    let flats: Vec<Flat> = chosen.iter().map(|&i| candidates[i].clone()).collect();
    let (labels, distances) = assign(cloud, &flats)?;
    let l1 = distances.iter().sum();
    let l2 = distances.iter().map(|d| d * d).sum();
    let mut counts = vec![0usize; cfg.k];
    for &l in &labels {
        counts[l] += 1;
    }
    let empty_clusters = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| i)
        .collect();
    Ok(ClusteringResult {
        flats,
        labels,
        distances,
        l1_energy: l1,
        l2_energy: l2,
        elapsed_secs: started.elapsed().as_secs_f64(),
        profiles: cfg.keep_profiles.then_some(profiles),
        empty_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn two_plane_cloud() -> PointCloud {
        // points on z=0 and z=1 planes in R^3
        let mut rows = Vec::new();
        for i in 0..30 {
            let t = i as f64 / 7.0;
            let u = (i as f64 * 0.37).sin();
            rows.extend_from_slice(&[t, u, 0.0]);
            rows.extend_from_slice(&[u, t, 1.0]);
        }
        PointCloud::new(DMatrix::from_row_slice(60, 3, &rows)).unwrap()
    }

    #[test]
    fn l1_energy_arithmetic() {
        let pts = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let cloud = PointCloud::new(pts).unwrap();
        let basis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let x_axis = Flat::new(basis, DVector::zeros(2), FlatKind::Linear).unwrap();
        assert_abs_diff_eq!(l1_energy(&cloud, &[x_axis]).unwrap(), 2.0, epsilon = 1e-14);
        assert!(matches!(l1_energy(&cloud, &[]), Err(Error::EmptyFlatList)));
    }

    #[test]
    fn assign_breaks_ties_low() {
        let pts = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        let cloud = PointCloud::new(pts).unwrap();
        let b1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let f1 = Flat::new(b1, DVector::zeros(2), FlatKind::Linear).unwrap();
        let f2 = Flat::new(b2, DVector::zeros(2), FlatKind::Linear).unwrap();
        let (labels, dists) = assign(&cloud, &[f1, f2]).unwrap();
        assert_eq!(labels, vec![0]);
        assert_abs_diff_eq!(dists[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cloud = two_plane_cloud();
        let mut cfg = LbfConfig::new(2, 2);
        cfg.seed = 11;
        let a = lbf_cluster(&cloud, &cfg).unwrap();
        let b = lbf_cluster(&cloud, &cfg).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.l1_energy, b.l1_energy);
        assert_eq!(a.l2_energy, b.l2_energy);
    }

    #[test]
    fn pipeline_separates_clean_planes() {
        let cloud = two_plane_cloud();
        let mut cfg = LbfConfig::new(2, 2);
        cfg.seed = 3;
        let result = lbf_cluster(&cloud, &cfg).unwrap();
        assert!(
            result.l1_energy < 1e-8,
            "planes are exactly fit: {}",
            result.l1_energy
        );
        // even indices sit on one plane, odd on the other
        let first = result.labels[0];
        let second = result.labels[1];
        assert_ne!(first, second);
        for (i, &l) in result.labels.iter().enumerate() {
            assert_eq!(l, if i % 2 == 0 { first } else { second });
        }
    }

    #[test]
    fn greedy_requires_spare_candidates() {
        let cloud = two_plane_cloud();
        let flat = best_fit_flat(cloud.points(), 2, FlatKind::Affine).unwrap();
        let candidates = vec![flat.clone(), flat];
        assert!(matches!(
            greedy_select_indices(&cloud, &candidates, 2, 3, 0),
            Err(Error::TooFewCandidates { .. })
        ));
    }

    #[test]
    fn config_defaults_multiply_k() {
        let cfg = LbfConfig::new(2, 4);
        assert_eq!(cfg.effective_candidates(), 280);
        assert_eq!(cfg.effective_passes(), 12);
    }
}
