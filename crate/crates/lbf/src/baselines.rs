//! K-flats baseline (Lloyd-style alternation) with three initializations:
//! random flats, farthest insertion with a fixed neighborhood size, and
//! farthest insertion with an adaptively chosen size.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{best_fit_flat, dists_to_flat, Flat, FlatKind, PointCloud};
use crate::neighbors::{k_nearest, order_by_distance};
use crate::par::try_par_map;
use crate::pipeline::{assign, ClusteringResult};
use crate::rng::{derive_rng, derive_seed};
use crate::scale::{beta2, ScaleConfig};

/// How the K initial flats are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitMethod {
    /// Flats through random data points with uniformly random orientations.
    Random,
    /// Farthest insertion, fitting each seed's m nearest neighbors.
    FarthestFixed(usize),
    /// Farthest insertion with a per-seed neighborhood size search (see
    /// `farthest_insertion_init`).
    FarthestAdaptive(ScaleConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFlatsConfig {
    pub d: usize,
    pub k: usize,
    pub kind: FlatKind,
    pub max_iters: usize,
    /// Relative ℓ2-energy change below which iteration stops.
    pub tol: f64,
    pub init: InitMethod,
}

impl KFlatsConfig {
    pub fn new(d: usize, k: usize) -> Self {
        KFlatsConfig {
            d,
            k,
            kind: FlatKind::Affine,
            max_iters: 100,
            tol: 1e-8,
            init: InitMethod::Random,
        }
    }
}

fn haar_basis(ambient: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(ambient, d, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    qr.q()
}

/// K flats through distinct random data points (affine) or the origin
/// (linear), each with a uniformly random orientation.
pub fn random_flats(
    cloud: &PointCloud,
    d: usize,
    k: usize,
    kind: FlatKind,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Flat>> {
    let ambient = cloud.ambient_dim();
    if d >= ambient {
        return Err(Error::DimensionOutOfRange { d, ambient });
    }
    let picks = rand::seq::index::sample(rng, cloud.len(), k.min(cloud.len())).into_vec();
    (0..k)
        .map(|i| {
            let offset = match kind {
                FlatKind::Affine => cloud.point(picks[i % picks.len()]),
                FlatKind::Linear => DVector::zeros(ambient),
            };
            Flat::new(haar_basis(ambient, d, rng), offset, kind)
        })
        .collect()
}

/// Per-seed neighborhood sizes examined by the adaptive initialization:
/// S, S+T, ... up to the cap, scoring each with beta2 and keeping the global
/// minimizer. Unlike the scan in `scale`, this searches the whole range
/// rather than stopping at the first local minimum — single flats fitted to
/// one neighborhood each need the best scale in the range, not the earliest
/// acceptable one.
fn adaptive_neighborhood(
    cloud: &PointCloud,
    x: &DVector<f64>,
    d: usize,
    cfg: &ScaleConfig,
    kind: FlatKind,
) -> Result<Vec<usize>> {
    let n = cloud.len();
    let start = cfg.resolved_start(d, kind);
    if start > n {
        return Err(Error::StartSizeExceedsData { start, n });
    }
    let limit = cfg.max_size.map_or(n, |cap| cap.min(n));
    let order = order_by_distance(cloud, x);
    let mut best: Option<(f64, usize)> = None;
    let mut size = start;
    while size <= limit {
        let b = beta2(&cloud.gather(&order[..size]), x, d, kind)?;
        if best.is_none_or(|(bb, _)| b < bb) {
            best = Some((b, size));
        }
        size += cfg.step;
    }
    let (_, chosen) = best.ok_or_else(|| {
        Error::InvalidConfig(format!("scale cap {limit} is below the start size {start}"))
    })?;
    Ok(order[..chosen].to_vec())
}

/// Geometric farthest insertion: fit a flat to the first seed's neighborhood,
/// then repeatedly seed at the data point farthest from all flats so far and
/// fit the next flat to its neighborhood, until K flats exist.
pub fn farthest_insertion_init(
    cloud: &PointCloud,
    d: usize,
    k: usize,
    neighborhood: &InitMethod,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Flat>> {
    let n = cloud.len();
    let kind = FlatKind::Affine;
    let mut seeds = vec![rng.random_range(0..n)];
    let mut flats: Vec<Flat> = Vec::with_capacity(k);
    loop {
        let x = cloud.point(*seeds.last().expect("seeded above"));
        let neighbor_idx = match neighborhood {
            InitMethod::FarthestFixed(m) => {
                if *m > n {
                    return Err(Error::StartSizeExceedsData { start: *m, n });
                }
                k_nearest(cloud, &x, *m)
            }
            InitMethod::FarthestAdaptive(cfg) => adaptive_neighborhood(cloud, &x, d, cfg, kind)?,
            InitMethod::Random => {
                return Err(Error::InvalidConfig(
                    "farthest insertion needs a neighborhood rule".into(),
                ))
            }
        };
        flats.push(best_fit_flat(&cloud.gather(&neighbor_idx), d, kind)?);
        if flats.len() == k {
            return Ok(flats);
        }
        // farthest point from everything fitted so far; skip already-used
        // seeds so the seed set stays distinct
        let per_flat: Vec<Vec<f64>> = flats
            .iter()
            .map(|f| dists_to_flat(cloud, f))
            .collect::<Result<_>>()?;
        let mut far: Option<(f64, usize)> = None;
        for i in 0..n {
            if seeds.contains(&i) {
                continue;
            }
            let mut dmin = f64::INFINITY;
            for col in &per_flat {
                dmin = dmin.min(col[i]);
            }
            if far.is_none_or(|(fd, _)| dmin > fd) {
                far = Some((dmin, i));
            }
        }
        let (_, next) =
            far.ok_or_else(|| Error::InvalidConfig("fewer points than clusters".into()))?;
        seeds.push(next);
    }
}

fn initial_flats(
    cloud: &PointCloud,
    cfg: &KFlatsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Flat>> {
    match &cfg.init {
        InitMethod::Random => random_flats(cloud, cfg.d, cfg.k, cfg.kind, rng),
        other => farthest_insertion_init(cloud, cfg.d, cfg.k, other, rng),
    }
}

/// Lloyd-style K-flats: alternate nearest-flat assignment and per-cluster
/// refitting until the relative ℓ2-energy change drops below `tol` or
/// `max_iters` passes. A flat that loses every point is reseeded at the point
/// currently farthest from all flats. Pass `init_flats` to skip the built-in
/// initialization.
pub fn kflats(
    cloud: &PointCloud,
    cfg: &KFlatsConfig,
    init_flats: Option<Vec<Flat>>,
    seed: u64,
) -> Result<ClusteringResult> {
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("need at least one cluster".into()));
    }
    let started = Instant::now();
    let mut rng = derive_rng(seed, "kflats", 0);
    let mut flats = match init_flats {
        Some(f) => f,
        None => initial_flats(cloud, cfg, &mut rng)?,
    };
    if flats.len() != cfg.k {
        return Err(Error::InvalidConfig(format!(
            "initialization produced {} flats for k={}",
            flats.len(),
            cfg.k
        )));
    }
    let n = cloud.len();
    let mut prev_energy: Option<f64> = None;
    for _iter in 0..cfg.max_iters {
        let (labels, distances) = assign(cloud, &flats)?;
        let energy: f64 = distances.iter().map(|d| d * d).sum();
        if let Some(prev) = prev_energy {
            debug_assert!(energy <= prev * (1.0 + 1e-9) + 1e-12);
            if prev > 0.0 && (prev - energy).abs() / prev < cfg.tol {
                break;
            }
            if prev == 0.0 {
                break;
            }
        }
        prev_energy = Some(energy);

        let mut new_flats = Vec::with_capacity(cfg.k);
        for c in 0..cfg.k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                // reseed at the point farthest from every current flat
                let far = distances
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("non-empty cloud");
                let offset = match cfg.kind {
                    FlatKind::Affine => cloud.point(far),
                    FlatKind::Linear => DVector::zeros(cloud.ambient_dim()),
                };
                new_flats.push(Flat::new(
                    haar_basis(cloud.ambient_dim(), cfg.d, &mut rng),
                    offset,
                    cfg.kind,
                )?);
            } else {
                new_flats.push(best_fit_flat(&cloud.gather(&members), cfg.d, cfg.kind)?);
            }
        }
        flats = new_flats;
    }
    let (labels, distances) = assign(cloud, &flats)?;
    let l1 = distances.iter().sum();
    let l2 = distances.iter().map(|d| d * d).sum();
    let mut counts = vec![0usize; cfg.k];
    for &l in &labels {
        counts[l] += 1;
    }
    Ok(ClusteringResult {
        flats,
        labels,
        distances,
        l1_energy: l1,
        l2_energy: l2,
        elapsed_secs: started.elapsed().as_secs_f64(),
        profiles: None,
        empty_clusters: counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// Runs `restarts` independent K-flats fits and keeps the one with the
/// smallest ℓ2 energy (ties to the earliest restart).
pub fn kflats_best_of(
    cloud: &PointCloud,
    cfg: &KFlatsConfig,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    if restarts == 0 {
        return Err(Error::InvalidConfig("need at least one restart".into()));
    }
    let runs = try_par_map(restarts, |r| {
        kflats(
            cloud,
            cfg,
            None,
            derive_seed(seed, "kflats-restart", r as u64),
        )
    })?;
    Ok(runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.l2_energy.total_cmp(&b.1.l2_energy).then(a.0.cmp(&b.0)))
        .map(|(_, run)| run)
        .expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_line_cloud() -> PointCloud {
        // three well-separated horizontal lines in R^2
        let mut rows = Vec::new();
        for c in 0..3 {
            for i in 0..20 {
                rows.push(i as f64 / 19.0);
                rows.push(c as f64 * 5.0);
            }
        }
        PointCloud::new(DMatrix::from_row_slice(60, 2, &rows)).unwrap()
    }

    #[test]
    fn true_init_converges_immediately() {
        let cloud = three_line_cloud();
        let mut cfg = KFlatsConfig::new(1, 3);
        cfg.init = InitMethod::FarthestFixed(10);
        let mut init = Vec::new();
        for c in 0..3 {
            let members: Vec<usize> = (20 * c..20 * (c + 1)).collect();
            init.push(best_fit_flat(&cloud.gather(&members), 1, FlatKind::Affine).unwrap());
        }
        let result = kflats(&cloud, &cfg, Some(init), 0).unwrap();
        assert!(result.l2_energy < 1e-18);
        assert_eq!(result.empty_clusters.len(), 0);
    }

    #[test]
    fn farthest_insertion_covers_separated_lines() {
        let cloud = three_line_cloud();
        for trial in 0..5 {
            let mut rng = derive_rng(trial, "test-init", 0);
            let flats =
                farthest_insertion_init(&cloud, 1, 3, &InitMethod::FarthestFixed(10), &mut rng)
                    .unwrap();
            // every line has one flat at distance ~0
            for c in 0..3 {
                let probe = cloud.point(20 * c + 5);
                let hit = flats
                    .iter()
                    .map(|f| crate::geometry::dist_to_flat(&probe, f).unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert!(hit < 1e-8, "line {c} uncovered on trial {trial}");
            }
        }
    }

    #[test]
    fn fixed_neighborhood_larger_than_cloud_errors() {
        let cloud = three_line_cloud();
        let mut rng = derive_rng(0, "test-init", 0);
        assert!(matches!(
            farthest_insertion_init(&cloud, 1, 2, &InitMethod::FarthestFixed(100), &mut rng),
            Err(Error::StartSizeExceedsData { .. })
        ));
    }

    #[test]
    fn best_of_restarts_recovers_lines() {
        let cloud = three_line_cloud();
        let cfg = KFlatsConfig::new(1, 3);
        let result = kflats_best_of(&cloud, &cfg, 10, 7).unwrap();
        assert!(result.l2_energy < 1e-12, "energy {}", result.l2_energy);
    }
}
