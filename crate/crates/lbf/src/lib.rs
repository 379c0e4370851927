//! Clustering data that lies near a union of low-dimensional flats.
//!
//! The core pipeline fits a flat to an adaptively sized neighborhood around
//! each of many random seed points, then greedily keeps the handful of
//! candidate flats that together minimize the total point-to-nearest-flat
//! distance. Supporting modules provide the neighborhood-size search,
//! model-order selection from the energy-vs-k elbow, classic K-flats
//! alternation as a baseline, synthetic data generation, and file I/O.

pub mod baselines;
pub mod data;
pub mod error;
pub mod geometry;
pub mod io;
pub mod modelsel;
pub mod neighbors;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod scale;

pub use baselines::{
    farthest_insertion_init, kflats, kflats_best_of, random_flats, InitMethod, KFlatsConfig,
};
pub use data::{
    generate, misclassification_rate, principal_angles, LabeledCloud, OutlierRule, SyntheticSpec,
    OUTLIER_LABEL,
};
pub use error::{Error, Result};
pub use geometry::{
    best_fit_flat, dist_to_flat, dists_to_flat, fit_flat_with_rss, project_to_flat, Flat, FlatKind,
    PointCloud,
};
pub use modelsel::{select_model, sod_select, wk_curve, ElbowCurve};
pub use pipeline::{lbf_cluster, ClusteringResult, LbfConfig};
pub use scale::{beta2, select_neighborhood, MeanShift, ScaleConfig, ScaleProfile};
