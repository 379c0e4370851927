//! Flats (affine or linear subspaces) as first-class values: least-squares
//! fitting by principal components, projections, and point-to-flat distances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a flat is affine (arbitrary offset) or linear (through the origin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlatKind {
    Affine,
    Linear,
}

/// A d-dimensional flat in R^D: an orthonormal basis of directions plus an
/// offset point. Linear flats always carry a zero offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Flat {
    basis: DMatrix<f64>, // D x d, orthonormal columns
    offset: DVector<f64>,
    kind: FlatKind,
}

impl Flat {
    /// Builds a flat from an orthonormal basis (D x d, columns are directions)
    /// and an offset. Rejects non-orthonormal bases and nonzero linear offsets.
    pub fn new(basis: DMatrix<f64>, offset: DVector<f64>, kind: FlatKind) -> Result<Self> {
        let (ambient, d) = (basis.nrows(), basis.ncols());
        if d >= ambient {
            return Err(Error::DimensionOutOfRange { d, ambient });
        }
        if offset.len() != ambient {
            return Err(Error::DimensionMismatch {
                point: offset.len(),
                ambient,
            });
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::identity(d, d)).amax();
        if dev > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "basis is not orthonormal (Gram deviation {dev:.2e})"
            )));
        }
        if kind == FlatKind::Linear && offset.amax() != 0.0 {
            return Err(Error::InvalidConfig(
                "linear flat must have zero offset".into(),
            ));
        }
        Ok(Flat {
            basis,
            offset,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn kind(&self) -> FlatKind {
        self.kind
    }
}

/// Points as an N x D matrix with optional ground-truth labels
/// (label -1 marks an outlier).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    labels: Option<Vec<i64>>,
}

impl PointCloud {
    /// Wraps a matrix of row-points, rejecting NaN and infinities.
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        for i in 0..points.nrows() {
            if points.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i });
            }
        }
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidConfig("point cloud must be non-empty".into()));
        }
        Ok(PointCloud {
            points,
            labels: None,
        })
    }

    pub fn with_labels(points: DMatrix<f64>, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != points.nrows() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                points: points.nrows(),
            });
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// The i-th point as an owned column vector.
    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<i64>>) -> Result<()> {
        if let Some(ref l) = labels {
            if l.len() != self.len() {
                return Err(Error::LabelCountMismatch {
                    labels: l.len(),
                    points: self.len(),
                });
            }
        }
        self.labels = labels;
        Ok(())
    }

    /// Gathers the given rows into a dense matrix (one row per index).
    pub fn gather(&self, indices: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(indices.len(), self.ambient_dim());
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from(&self.points.row(i));
        }
        out
    }
}

/// Least-squares flat fit plus the residual sum of squares it leaves behind.
/// The residual equals the sum of the squared singular values beyond the top d
/// of the (centered, for affine fits) data matrix.
pub fn fit_flat_with_rss(points: &DMatrix<f64>, d: usize, kind: FlatKind) -> Result<(Flat, f64)> {
    let n = points.nrows();
    let ambient = points.ncols();
    if n == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    if d >= ambient {
        return Err(Error::DimensionOutOfRange { d, ambient });
    }
    let (centered, offset) = match kind {
        FlatKind::Affine => {
            let mean = points.row_mean();
            let mut c = points.clone();
            for mut row in c.row_iter_mut() {
                row -= &mean;
            }
            (c, mean.transpose())
        }
        FlatKind::Linear => (points.clone(), DVector::zeros(ambient)),
    };
    let svd = centered.svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let singular = &svd.singular_values;

    let mut basis = DMatrix::zeros(ambient, d);
    let available = d.min(vt.nrows());
    for j in 0..available {
        basis.column_mut(j).copy_from(&vt.row(j).transpose());
    }
    if available < d {
        complete_basis(&mut basis, available);
    }
    let rss: f64 = singular.iter().skip(d).map(|s| s * s).sum();
    let flat = Flat {
        basis,
        offset,
        kind,
    };
    Ok((flat, rss))
}

/// The flat minimizing the sum of squared distances to `points` among all
/// d-flats of the given kind (principal directions; centroid offset for
/// affine fits, origin for linear ones).
pub fn best_fit_flat(points: &DMatrix<f64>, d: usize, kind: FlatKind) -> Result<Flat> {
    fit_flat_with_rss(points, d, kind).map(|(flat, _)| flat)
}

// Fills columns from `have` on with standard basis vectors orthonormalized
// against the columns already present. Used when the data has fewer
// independent directions than the requested dimension.
fn complete_basis(basis: &mut DMatrix<f64>, have: usize) {
    let ambient = basis.nrows();
    let d = basis.ncols();
    let mut filled = have;
    for axis in 0..ambient {
        if filled == d {
            break;
        }
        let mut v = DVector::zeros(ambient);
        v[axis] = 1.0;
        for j in 0..filled {
            let col = basis.column(j);
            let proj = col.dot(&v);
            v -= proj * DVector::from(col);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.column_mut(filled).copy_from(&(v / norm));
            filled += 1;
        }
    }
    debug_assert_eq!(filled, d, "could not complete an orthonormal basis");
}

/// Orthogonal projection of `x` onto the flat.
pub fn project_to_flat(x: &DVector<f64>, flat: &Flat) -> Result<DVector<f64>> {
    if x.len() != flat.ambient_dim() {
        return Err(Error::DimensionMismatch {
            point: x.len(),
            ambient: flat.ambient_dim(),
        });
    }
    let rel = x - &flat.offset;
    let coords = flat.basis.transpose() * &rel;
    Ok(&flat.offset + &flat.basis * coords)
}

/// Euclidean distance from `x` to its projection onto the flat.
pub fn dist_to_flat(x: &DVector<f64>, flat: &Flat) -> Result<f64> {
    let projected = project_to_flat(x, flat)?;
    Ok((x - projected).norm())
}

/// Distances from every point of the cloud to the flat, in row order.
/// Same residual formula as `dist_to_flat` — project, subtract, take norms —
/// but laid out as column-sliced passes over the whole cloud. This sits in
/// the inner loop of both clustering algorithms, so everything runs on
/// contiguous slices with three scratch buffers and no matrix temporaries.
pub fn dists_to_flat(cloud: &PointCloud, flat: &Flat) -> Result<Vec<f64>> {
    if cloud.ambient_dim() != flat.ambient_dim() {
        return Err(Error::DimensionMismatch {
            point: cloud.ambient_dim(),
            ambient: flat.ambient_dim(),
        });
    }
    let pts = cloud.points();
    let (n, dim) = (pts.nrows(), pts.ncols());
    let d = flat.dim();
    let s = pts.as_slice(); // column-major
    let b = flat.basis.as_slice(); // column j starts at j * dim
    let o = flat.offset.as_slice();

    // in-flat coordinates of every point, direction-major
    let mut coords = vec![0.0f64; n * d];
    for j in 0..d {
        let cj = &mut coords[j * n..(j + 1) * n];
        for a in 0..dim {
            let w = b[j * dim + a];
            let off = o[a];
            let col = &s[a * n..(a + 1) * n];
            for (ci, &x) in cj.iter_mut().zip(col) {
                *ci += w * (x - off);
            }
        }
    }
    // squared residual accumulated one ambient coordinate at a time
    let mut r2 = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    for a in 0..dim {
        let off = o[a];
        let col = &s[a * n..(a + 1) * n];
        for (vi, &x) in v.iter_mut().zip(col) {
            *vi = x - off;
        }
        for j in 0..d {
            let w = b[j * dim + a];
            let cj = &coords[j * n..(j + 1) * n];
            for (vi, &ci) in v.iter_mut().zip(cj) {
                *vi -= w * ci;
            }
        }
        for (acc, &vi) in r2.iter_mut().zip(v.iter()) {
            *acc += vi * vi;
        }
    }
    for x in &mut r2 {
        *x = x.sqrt();
    }
    Ok(r2)
}
