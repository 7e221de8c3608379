//! Query-point selection and neighborhood grouping.
//!
//! All searches are brute-force scans over squared distances. Ties are always
//! broken by the smaller point index, which keeps results independent of any
//! rigid motion applied to the cloud (up to floating-point ties).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg3;

/// Indices of the points grouped around one query point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborSet {
    pub query_index: usize,
    /// Sorted ascending; padding duplicates (if any) are appended at the end.
    pub indices: Vec<usize>,
    pub radius: f64,
    pub padded: bool,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn dist2(cloud: &PointCloud, a: usize, b: usize) -> f64 {
    let d = linalg3::sub(&cloud.point(a), &cloud.point(b));
    linalg3::dot(&d, &d)
}

fn check_index(cloud: &PointCloud, index: usize) -> Result<()> {
    if index >= cloud.len() {
        return Err(Error::BadIndex {
            index,
            len: cloud.len(),
        });
    }
    Ok(())
}

/// Greedy farthest point sampling starting from `start_index`.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, start_index: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if k < 1 || k > n {
        return Err(Error::BadCount {
            what: "farthest point sample size",
            count: k,
            min: 1,
            max: n,
        });
    }
    check_index(cloud, start_index)?;

    let mut selected = vec![false; n];
    let mut min_d2: Vec<f64> = (0..n).map(|j| dist2(cloud, start_index, j)).collect();
    let mut out = Vec::with_capacity(k);
    out.push(start_index);
    selected[start_index] = true;

    while out.len() < k {
        let mut best: Option<usize> = None;
        for j in 0..n {
            if selected[j] {
                continue;
            }
            match best {
                Some(b) if min_d2[j] <= min_d2[b] => {}
                _ => best = Some(j),
            }
        }
        let pick = best.expect("k <= n leaves an unselected point");
        selected[pick] = true;
        out.push(pick);
        for j in 0..n {
            let d = dist2(cloud, pick, j);
            if d < min_d2[j] {
                min_d2[j] = d;
            }
        }
    }
    Ok(out)
}

/// Ball query of radius `r` around `query_index`, truncated or padded to
/// exactly `max_n` entries.
///
/// When more than `max_n` points fall inside the ball the `max_n` nearest are
/// kept. When fewer, the nearest non-query member (or the query itself when
/// it is alone) is repeated.
pub fn radius_neighbors(cloud: &PointCloud, query_index: usize, r: f64, max_n: usize) -> Result<NeighborSet> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::BadRadius(r));
    }
    if max_n < 1 {
        return Err(Error::BadCount {
            what: "neighbors per query",
            count: max_n,
            min: 1,
            max: usize::MAX,
        });
    }
    check_index(cloud, query_index)?;
    let r2 = r * r;

    // (distance², index), nearest first
    let mut members: Vec<(f64, usize)> = (0..cloud.len())
        .map(|j| (dist2(cloud, query_index, j), j))
        .filter(|&(d, _)| d <= r2)
        .collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    members.truncate(max_n);

    let filler = members
        .iter()
        .find(|&&(_, j)| j != query_index)
        .map_or(query_index, |&(_, j)| j);

    let mut indices: Vec<usize> = members.iter().map(|&(_, j)| j).collect();
    indices.sort_unstable();
    let padded = indices.len() < max_n;
    indices.resize(max_n, filler);
    Ok(NeighborSet {
        query_index,
        indices,
        radius: r,
        padded,
    })
}

/// The `k` nearest points to `query_index`, including the query itself.
pub fn knn(cloud: &PointCloud, query_index: usize, k: usize) -> Result<NeighborSet> {
    let n = cloud.len();
    if k < 1 || k > n {
        return Err(Error::BadCount {
            what: "knn size",
            count: k,
            min: 1,
            max: n,
        });
    }
    check_index(cloud, query_index)?;
    let mut all: Vec<(f64, usize)> = (0..n).map(|j| (dist2(cloud, query_index, j), j)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    let radius = all.last().map_or(0.0, |&(d, _)| d.sqrt());
    let mut indices: Vec<usize> = all.into_iter().map(|(_, j)| j).collect();
    indices.sort_unstable();
    Ok(NeighborSet {
        query_index,
        indices,
        radius,
        padded: false,
    })
}
