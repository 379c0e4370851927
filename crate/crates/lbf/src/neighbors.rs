//! Exact nearest-neighbor queries by brute force. Cloud sizes in this crate
//! stay in the low thousands, where a scan beats tree structures; ties are
//! broken by point index so every downstream selection is deterministic.

use nalgebra::DVector;

use crate::geometry::PointCloud;

fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn squared_distances(cloud: &PointCloud, x: &DVector<f64>) -> Vec<(f64, usize)> {
    let pts = cloud.points();
    let (n, dim) = (pts.nrows(), pts.ncols());
    let s = pts.as_slice(); // column-major
    let mut acc = vec![0.0f64; n];
    for a in 0..dim {
        let xa = x[a];
        let col = &s[a * n..(a + 1) * n];
        for (t, &v) in acc.iter_mut().zip(col) {
            let diff = v - xa;
            *t += diff * diff;
        }
    }
    acc.into_iter().enumerate().map(|(i, d2)| (d2, i)).collect()
}

/// Nearest-neighbor list sorted on demand: squared distances to the query are
/// computed up front, but only the prefix actually consumed gets sorted, a
/// doubling horizon at a time. Any prefix read is identical to the same
/// prefix of a full sort (ascending distance, ties by index) — the scale scan
/// usually stops after a few dozen neighbors, so most of the cloud never
/// needs ordering.
pub(crate) struct SortedPrefix {
    keyed: Vec<(f64, usize)>,
    sorted_upto: usize,
}

impl SortedPrefix {
    pub(crate) fn new(cloud: &PointCloud, x: &DVector<f64>) -> Self {
        SortedPrefix {
            keyed: squared_distances(cloud, x),
            sorted_upto: 0,
        }
    }

    /// The m nearest as (squared distance, index), ascending.
    pub(crate) fn prefix(&mut self, m: usize) -> &[(f64, usize)] {
        if m > self.sorted_upto {
            let n = self.keyed.len();
            let h = m.next_power_of_two().max(64).min(n);
            if h < n {
                self.keyed.select_nth_unstable_by(h, by_dist_then_index);
            }
            self.keyed[..h].sort_unstable_by(by_dist_then_index);
            self.sorted_upto = h;
        }
        &self.keyed[..m]
    }
}

/// Indices of all points sorted by squared distance to `x`, ties by index.
pub fn order_by_distance(cloud: &PointCloud, x: &DVector<f64>) -> Vec<usize> {
    let mut keyed = squared_distances(cloud, x);
    keyed.sort_unstable_by(by_dist_then_index);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// The k nearest points to `x` (all points when k exceeds the cloud).
pub fn k_nearest(cloud: &PointCloud, x: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut order = order_by_distance(cloud, x);
    order.truncate(k);
    order
}
