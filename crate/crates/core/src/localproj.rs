//! Cores and their local discrimination spaces.
//!
//! The core of observation `i` is the set of its `k` nearest neighbours from
//! its own class, `i` itself included. The core observations define a
//! location, a per-variable scale and an orthonormal basis of the affine
//! subspace they span. Every observation is then represented by its
//! coordinates in that subspace (the scores) together with its Euclidean
//! distance to it (the orthogonal distance, OD), which gives the
//! `k`-dimensional local discrimination space.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Scale entries below this are replaced by 1.
pub const ZERO_SCALE: f64 = 1e-12;
/// Singular values below this fraction of the largest one are dropped.
pub const RANK_TOL: f64 = 1e-10;
/// Relative residual a candidate must leave to count as rank increasing.
const GROWTH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreMode {
    /// Exactly the `k` nearest same-class observations.
    #[default]
    Strict,
    /// Grow by nearest same-class observations, skipping those that do not
    /// raise the affine rank, until rank `k - 1` is reached.
    RankAdjusted,
}

impl fmt::Display for CoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreMode::Strict => "strict",
            CoreMode::RankAdjusted => "rank_adjusted",
        })
    }
}

impl FromStr for CoreMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "strict" => Ok(CoreMode::Strict),
            "rank_adjusted" | "rank-adjusted" => Ok(CoreMode::RankAdjusted),
            other => Err(format!("unknown core mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    pub owner: usize,
    pub members: Vec<usize>,
    pub center: DVector<f64>,
    pub scale: DVector<f64>,
    /// p x r, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Length r, descending.
    pub singular_values: DVector<f64>,
}

/// Position of one observation relative to a core.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub scores: DVector<f64>,
    pub od: f64,
    /// Norm of the whitened scores; diagnostic only.
    pub sd: f64,
}

/// Every observation of a dataset projected onto one core.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSpace {
    /// n x r
    pub scores: DMatrix<f64>,
    pub od: DVector<f64>,
    pub sd: DVector<f64>,
}

impl LocalSpace {
    /// `[scores, od]`, the n x (r + 1) local discrimination space.
    pub fn representation(&self) -> DMatrix<f64> {
        let (n, r) = self.scores.shape();
        DMatrix::from_fn(n, r + 1, |i, j| if j < r { self.scores[(i, j)] } else { self.od[i] })
    }
}

fn sq_dist(ds: &LabeledDataset, i: usize, j: usize) -> f64 {
    let x = ds.features();
    (0..ds.p()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum()
}

/// Same-class observations of `i` ordered by distance, ties by row index.
fn class_neighbours(ds: &LabeledDataset, i: usize) -> Vec<usize> {
    let g = ds.label(i);
    let mut cand: Vec<(f64, usize)> = (0..ds.n())
        .filter(|&j| ds.label(j) == g)
        .map(|j| (if j == i { 0.0 } else { sq_dist(ds, i, j) }, j))
        .collect();
    cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Member indices of the core of observation `i`, nearest first.
pub fn knn_class_core(ds: &LabeledDataset, i: usize, k: usize, mode: CoreMode) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::ClassTooSmall { owner: i, size: 0, k });
    }
    let neighbours = class_neighbours(ds, i);
    if neighbours.len() < k {
        return Err(Error::ClassTooSmall {
            owner: i,
            size: neighbours.len(),
            k,
        });
    }
    match mode {
        CoreMode::Strict => Ok(neighbours[..k].to_vec()),
        CoreMode::RankAdjusted => grow_by_rank(ds, i, k, &neighbours),
    }
}

fn grow_by_rank(ds: &LabeledDataset, i: usize, k: usize, neighbours: &[usize]) -> Result<Vec<usize>> {
    let origin = ds.row(i);
    let mut members = vec![i];
    // orthonormal basis of the differences accepted so far
    let mut span: Vec<DVector<f64>> = Vec::with_capacity(k);
    for &j in neighbours.iter().filter(|&&j| j != i) {
        if members.len() == k {
            break;
        }
        let diff = ds.row(j) - &origin;
        let norm = diff.norm();
        if norm == 0.0 {
            continue;
        }
        let mut resid = diff;
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for q in &span {
                let c = q.dot(&resid);
                resid.axpy(-c, q, 1.0);
            }
        }
        let rn = resid.norm();
        if rn > GROWTH_TOL * norm {
            span.push(resid / rn);
            members.push(j);
        }
    }
    if members.len() < k {
        return Err(Error::ClassExhausted {
            owner: i,
            rank: members.len() - 1,
            needed: k - 1,
        });
    }
    Ok(members)
}

/// Mean and sample standard deviation of the member rows, with zero scales
/// replaced by 1.
pub fn core_center_scale(ds: &LabeledDataset, members: &[usize]) -> (DVector<f64>, DVector<f64>) {
    let p = ds.p();
    let m = members.len() as f64;
    let x = ds.features();
    let center = DVector::from_fn(p, |c, _| members.iter().map(|&j| x[(j, c)]).sum::<f64>() / m);
    let scale = DVector::from_fn(p, |c, _| {
        if members.len() < 2 {
            return 1.0;
        }
        let ss: f64 = members.iter().map(|&j| (x[(j, c)] - center[c]).powi(2)).sum();
        let sd = (ss / (m - 1.0)).sqrt();
        if sd < ZERO_SCALE {
            1.0
        } else {
            sd
        }
    });
    (center, scale)
}

/// Right singular vectors (as columns) and singular values of `m`, sorted
/// by decreasing singular value.
///
/// The SVD runs on the square triangular factor of a Householder QR of
/// `m^T`. Decomposing a wide, rank-deficient matrix directly can return
/// inaccurate vectors.
pub(crate) fn right_singular(m: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let qr = m.transpose().qr();
    let (q, r) = (qr.q(), qr.r());
    let svd = r.transpose().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let small = DMatrix::from_fn(v_t.ncols(), order.len(), |i, c| v_t[(order[c], i)]);
    (q * small, DVector::from_iterator(order.len(), order.iter().map(|&i| sv[i])))
}

/// Right singular vectors of the centred and scaled member rows.
///
/// Keeps the singular values above `RANK_TOL` times the largest. Fails
/// unless exactly `|members| - 1` directions survive.
pub fn core_basis(
    ds: &LabeledDataset,
    owner: usize,
    members: &[usize],
    center: &DVector<f64>,
    scale: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = ds.p();
    let needed = members.len() - 1;
    if needed == 0 {
        return Ok((DMatrix::zeros(p, 0), DVector::zeros(0)));
    }
    let x = ds.features();
    let m = DMatrix::from_fn(members.len(), p, |r, c| (x[(members[r], c)] - center[c]) / scale[c]);
    let (v, sv) = right_singular(m);
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..sv.len())
        .filter(|&i| largest > 0.0 && sv[i] > RANK_TOL * largest)
        .take(needed)
        .collect();
    if kept.len() < needed {
        return Err(Error::DegenerateCore {
            owner,
            rank: kept.len(),
            needed,
        });
    }
    let basis = DMatrix::from_fn(p, needed, |r, c| v[(r, kept[c])]);
    let singular_values = DVector::from_iterator(needed, kept.iter().map(|&i| sv[i]));
    Ok((basis, singular_values))
}

impl Core {
    pub fn build(ds: &LabeledDataset, owner: usize, k: usize, mode: CoreMode) -> Result<Core> {
        let members = knn_class_core(ds, owner, k, mode)?;
        let (center, scale) = core_center_scale(ds, &members);
        let (basis, singular_values) = core_basis(ds, owner, &members, &center, &scale)?;
        Ok(Core {
            owner,
            members,
            center,
            scale,
            basis,
            singular_values,
        })
    }

    /// Dimension of the core space.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.members.contains(&j)
    }

    /// `(x - center) / scale`, elementwise.
    pub fn standardize(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.center.iter().zip(self.scale.iter()))
                .map(|(v, (c, s))| (v - c) / s),
        )
    }

    /// Scores, orthogonal distance and whitened score distance of `x`.
    pub fn project(&self, x: &[f64]) -> Projection {
        let xt = self.standardize(x);
        let r = self.rank();
        let mut scores = DVector::zeros(r);
        for c in 0..r {
            scores[c] = self.basis.column(c).dot(&xt);
        }
        let mut resid = xt;
        for c in 0..r {
            resid.axpy(-scores[c], &self.basis.column(c), 1.0);
        }
        let od = resid.norm();
        let sd = scores
            .iter()
            .zip(self.singular_values.iter())
            .map(|(z, s)| (z / s).powi(2))
            .sum::<f64>()
            .sqrt();
        Projection { scores, od, sd }
    }

    /// Local discrimination coordinates `[scores, od]` of `x`.
    pub fn local_coordinates(&self, x: &[f64]) -> DVector<f64> {
        let pr = self.project(x);
        let r = self.rank();
        DVector::from_fn(r + 1, |i, _| if i < r { pr.scores[i] } else { pr.od })
    }

    /// Projects the rows of `rows_t`, a p x n matrix whose columns are observations.
    pub fn project_columns(&self, rows_t: &DMatrix<f64>) -> LocalSpace {
        let n = rows_t.ncols();
        let r = self.rank();
        let mut scores = DMatrix::zeros(n, r);
        let mut od = DVector::zeros(n);
        let mut sd = DVector::zeros(n);
        for j in 0..n {
            let pr = self.project(rows_t.column(j).as_slice());
            scores.row_mut(j).copy_from(&pr.scores.transpose());
            od[j] = pr.od;
            sd[j] = pr.sd;
        }
        LocalSpace { scores, od, sd }
    }
}

/// Projection of a single point onto `core`.
pub fn project_point(core: &Core, x: &[f64]) -> Projection {
    core.project(x)
}

/// Projects every row of `ds` onto `core`.
pub fn local_space(ds: &LabeledDataset, core: &Core) -> LocalSpace {
    core.project_columns(&ds.features().transpose())
}
