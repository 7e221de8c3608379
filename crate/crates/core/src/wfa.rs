//! Weight-feature alignment.
//!
//! Every neighborhood gets a local PCA frame `V_i` and the first feature
//! layer's weight vectors get a PCA frame `U`. Both frames are oriented by a
//! first-octant rule, and the neighborhood is expressed in the layer's frame
//! through `R_i = U · P · V_iᵀ`, where `P` is an optional axis permutation.
//! Because `V_i` rotates with the input while `U` does not, the aligned
//! coordinates `R_i (p_j − p̄_i)` do not change under rigid motions of the
//! cloud.
//!
//! The orientation rule is undefined when a reference projection is zero and
//! PCA is not unique when eigenvalues tie. Such axes and frames are flagged
//! rather than silently resolved; a deterministic fallback (largest component
//! positive) still produces a usable frame, but that fallback is not
//! rotation-equivariant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrthogonalFrame, PointCloud};
use crate::linalg3::{self, Vec3};
use crate::neighbors::NeighborSet;

pub const DEFAULT_SIGN_TOL: f64 = 1e-6;
pub const DEFAULT_GAP_TOL: f64 = 1e-3;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Below this fraction of the neighborhood scale, `p_i − p̄_i` is treated as
/// zero and every local axis is flagged ambiguous.
const OFFSET_FLOOR: f64 = 1e-9;

/// Tolerances and wiring shared by every WFA operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfaConfig {
    pub sign_tol: f64,
    pub gap_tol: f64,
    pub rank_tol: f64,
    pub order: AxisOrder,
}

impl Default for WfaConfig {
    fn default() -> Self {
        Self {
            sign_tol: DEFAULT_SIGN_TOL,
            gap_tol: DEFAULT_GAP_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            order: AxisOrder::default(),
        }
    }
}

/// Which local axis is wired to each weight axis: `u_k ← v_{i, order[k]}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AxisOrder([usize; 3]);

impl Default for AxisOrder {
    fn default() -> Self {
        Self([0, 1, 2])
    }
}

impl AxisOrder {
    pub fn new(order: [usize; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for &k in &order {
            if k > 2 || seen[k] {
                return Err(Error::InvalidConfig(format!("{order:?} is not a permutation of 0..3")));
            }
            seen[k] = true;
        }
        Ok(Self(order))
    }

    /// Largest-to-smallest local axis mapped onto smallest-to-largest weight axis.
    pub fn reversed() -> Self {
        Self([2, 1, 0])
    }

    pub fn as_array(&self) -> [usize; 3] {
        self.0
    }

    /// All six orders; the identity first, then the reversed wiring.
    pub fn all() -> [AxisOrder; 6] {
        [
            Self([0, 1, 2]),
            Self([2, 1, 0]),
            Self([2, 0, 1]),
            Self([0, 2, 1]),
            Self([1, 0, 2]),
            Self([1, 2, 0]),
        ]
    }
}

impl fmt::Display for AxisOrder {
    /// One-based digits, e.g. `"321"` for the reversed order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0[0] + 1, self.0[1] + 1, self.0[2] + 1)
    }
}

impl FromStr for AxisOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<usize> = s
            .chars()
            .filter(|c| c.is_ascii_digit())
            .map(|c| c as usize - '0' as usize)
            .collect();
        if digits.len() != 3 || digits.iter().any(|&d| !(1..=3).contains(&d)) {
            return Err(Error::InvalidConfig(format!(
                "axis order {s:?}: expected a permutation of 1,2,3 such as \"123\" or \"v3,v2,v1\""
            )));
        }
        Self::new([digits[0] - 1, digits[1] - 1, digits[2] - 1])
    }
}

impl TryFrom<String> for AxisOrder {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AxisOrder> for String {
    fn from(o: AxisOrder) -> String {
        o.to_string()
    }
}

/// First linear layer: `d` weight columns `w_k ∈ R³` plus a bias per column.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    columns: Vec<Vec3>,
    bias: Vec<f64>,
}

impl LayerWeights {
    pub fn new(columns: Vec<Vec3>, bias: Vec<f64>) -> Result<Self> {
        if columns.len() < 3 {
            return Err(Error::ShapeMismatch(format!(
                "layer needs at least 3 weight columns, got {}",
                columns.len()
            )));
        }
        if bias.len() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "bias has {} entries for {} weight columns",
                bias.len(),
                columns.len()
            )));
        }
        if columns.iter().flatten().chain(&bias).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("layer weights"));
        }
        Ok(Self { columns, bias })
    }

    pub fn columns(&self) -> &[Vec3] {
        &self.columns
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// `w̄`
    pub fn barycenter(&self) -> Vec3 {
        mean(&self.columns)
    }

    /// `W̃`: columns `w_k − w̄`.
    pub fn centered(&self) -> Vec<Vec3> {
        let c = self.barycenter();
        self.columns.iter().map(|w| linalg3::sub(w, &c)).collect()
    }
}

fn mean(cols: &[Vec3]) -> Vec3 {
    let mut s = [0.0; 3];
    for c in cols {
        s = linalg3::add(&s, c);
    }
    linalg3::scale(&s, 1.0 / cols.len() as f64)
}

/// PCA frame of the weight vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightFrame {
    pub u: OrthogonalFrame,
    pub eigenvalues: [f64; 3],
    pub w_bar: Vec3,
    pub gap_ratios: [f64; 2],
    pub ambiguous_axes: [bool; 3],
}

impl WeightFrame {
    pub fn is_clean(&self, gap_tol: f64) -> bool {
        !self.ambiguous_axes.iter().any(|&a| a) && self.gap_ratios.iter().all(|&g| g >= gap_tol)
    }
}

/// PCA of `W̃ W̃ᵀ`, each axis signed so that `u_kᵀ(−w̄) ≥ 0`.
///
/// Returns [`Error::ZeroBarycenter`] carrying a fully flagged frame when
/// `‖w̄‖ < sign_tol`.
pub fn weight_frame(weights: &LayerWeights, sign_tol: f64, rank_tol: f64) -> Result<WeightFrame> {
    let w_bar = weights.barycenter();
    let centered = weights.centered();
    let eig = linalg3::sym_eig3(&linalg3::outer_accumulate(&centered))?;
    let rank_deficient = !(eig.eigenvalues[1] > rank_tol);
    let reference = linalg3::scale(&w_bar, -1.0);
    let bar_norm = linalg3::norm(&w_bar);
    let zero_bar = bar_norm < sign_tol;
    let (u, ambiguous_axes) = orient(&eig.eigenvectors, &reference, sign_tol * bar_norm, zero_bar || rank_deficient);
    let frame = WeightFrame {
        u,
        eigenvalues: eig.eigenvalues,
        w_bar,
        gap_ratios: eig.gap_ratios,
        ambiguous_axes,
    };
    if rank_deficient {
        return Err(Error::RankDeficientWeights {
            lambda2: eig.eigenvalues[1],
            rank_tol,
            frame: Box::new(frame),
        });
    }
    if zero_bar {
        return Err(Error::ZeroBarycenter {
            norm: bar_norm,
            frame: Box::new(frame),
        });
    }
    Ok(frame)
}

/// Like [`weight_frame`], but degenerate weights yield the flagged fallback
/// frame instead of an error.
pub fn weight_frame_or_fallback(weights: &LayerWeights, sign_tol: f64, rank_tol: f64) -> Result<WeightFrame> {
    match weight_frame(weights, sign_tol, rank_tol) {
        Err(Error::ZeroBarycenter { frame, .. }) | Err(Error::RankDeficientWeights { frame, .. }) => Ok(*frame),
        other => other,
    }
}

/// Signs each column so its projection on `reference` is non-negative.
/// Projections below `threshold` in magnitude (or every axis when
/// `all_ambiguous`) keep the eigensolver's canonical sign and are flagged.
fn orient(frame: &OrthogonalFrame, reference: &Vec3, threshold: f64, all_ambiguous: bool) -> (OrthogonalFrame, [bool; 3]) {
    let mut cols = [frame.column(0), frame.column(1), frame.column(2)];
    let mut flags = [false; 3];
    for k in 0..3 {
        let proj = linalg3::dot(&cols[k], reference);
        if all_ambiguous || proj.abs() < threshold || proj == 0.0 {
            flags[k] = true;
        } else if proj < 0.0 {
            cols[k] = linalg3::scale(&cols[k], -1.0);
        }
    }
    (
        OrthogonalFrame::from_matrix_unchecked(linalg3::from_columns(&cols[0], &cols[1], &cols[2])),
        flags,
    )
}

/// Local PCA frame of one neighborhood.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalFrame {
    pub v: OrthogonalFrame,
    pub eigenvalues: [f64; 3],
    pub barycenter: Vec3,
    pub gap_ratios: [f64; 2],
    pub degenerate: bool,
    pub ambiguous_axes: [bool; 3],
}

impl LocalFrame {
    /// Neither degenerate nor carrying an ambiguous axis: the frame is
    /// rotation-equivariant.
    pub fn is_clean(&self) -> bool {
        !self.degenerate && !self.ambiguous_axes.iter().any(|&a| a)
    }
}

/// PCA frame of the neighborhood (padding duplicates included), each axis
/// signed so that `v_kᵀ(p_i − p̄_i) ≥ 0`.
pub fn local_frame(cloud: &PointCloud, neighbors: &NeighborSet, sign_tol: f64, gap_tol: f64) -> Result<LocalFrame> {
    if neighbors.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: neighbors.len(),
        });
    }
    let pts: Vec<Vec3> = neighbors.indices.iter().map(|&j| cloud.point(j)).collect();
    let barycenter = mean(&pts);
    let centered: Vec<Vec3> = pts.iter().map(|p| linalg3::sub(p, &barycenter)).collect();
    let eig = linalg3::sym_eig3(&linalg3::outer_accumulate(&centered))?;

    let offset = linalg3::sub(&cloud.point(neighbors.query_index), &barycenter);
    let offset_norm = linalg3::norm(&offset);
    let spread = (eig.eigenvalues.iter().map(|l| l.max(0.0)).sum::<f64>() / pts.len() as f64).sqrt();
    let scale = spread + linalg3::norm(&barycenter);
    let negligible = offset_norm <= OFFSET_FLOOR * scale;
    let (v, ambiguous_axes) = orient(&eig.eigenvectors, &offset, sign_tol * offset_norm, negligible);

    Ok(LocalFrame {
        v,
        eigenvalues: eig.eigenvalues,
        barycenter,
        gap_ratios: eig.gap_ratios,
        degenerate: eig.gap_ratios.iter().any(|&g| g < gap_tol),
        ambiguous_axes,
    })
}

/// `R_i = Σ_k u_k v_{i,order[k]}ᵀ` (that is, `U · P · V_iᵀ`).
pub fn alignment_rotation(wf: &WeightFrame, lf: &LocalFrame, order: AxisOrder) -> OrthogonalFrame {
    let mut r = linalg3::ZERO;
    for k in 0..3 {
        let u = wf.u.column(k);
        let v = lf.v.column(order.0[k]);
        for a in 0..3 {
            for b in 0..3 {
                r[a][b] += u[a] * v[b];
            }
        }
    }
    OrthogonalFrame::from_matrix_unchecked(r)
}

/// A neighborhood expressed in the weight frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignedNeighborhood {
    pub r: OrthogonalFrame,
    /// Column `j` is `R_i (p_j − p̄_i)`.
    pub aligned: Vec<Vec3>,
    pub source: NeighborSet,
    pub frame: LocalFrame,
}

impl AlignedNeighborhood {
    pub fn is_clean(&self) -> bool {
        self.frame.is_clean()
    }
}

pub fn align_neighborhood(
    cloud: &PointCloud,
    neighbors: &NeighborSet,
    wf: &WeightFrame,
    cfg: &WfaConfig,
) -> Result<AlignedNeighborhood> {
    let frame = local_frame(cloud, neighbors, cfg.sign_tol, cfg.gap_tol)?;
    let r = alignment_rotation(wf, &frame, cfg.order);
    let aligned = neighbors
        .indices
        .iter()
        .map(|&j| r.apply(&linalg3::sub(&cloud.point(j), &frame.barycenter)))
        .collect();
    Ok(AlignedNeighborhood {
        r,
        aligned,
        source: neighbors.clone(),
        frame,
    })
}

/// Rotates normals into the frame `r`.
pub fn project_normals(normals: &[Vec3], r: &OrthogonalFrame) -> Vec<Vec3> {
    normals.iter().map(|n| r.apply(n)).collect()
}

/// `y = W̃ᵀ X' + b`. Returns one output vector (length `d`) per aligned point.
pub fn wfa_feature_layer(an: &AlignedNeighborhood, weights: &LayerWeights) -> Vec<Vec<f64>> {
    let centered = weights.centered();
    an.aligned
        .iter()
        .map(|x| {
            centered
                .iter()
                .zip(weights.bias())
                .map(|(w, b)| linalg3::dot(w, x) + b)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_rigid, Seed};
    use crate::linalg3::{matmul3, max_abs_diff, transpose, IDENTITY};
    use crate::neighbors::radius_neighbors;
    use crate::synthdata::{random_rotation, RotationMode};
    use rand::Rng;

    fn weights(cols: &[Vec3]) -> LayerWeights {
        LayerWeights::new(cols.to_vec(), vec![0.0; cols.len()]).unwrap()
    }

    fn random_weights(seed: u64, d: usize) -> LayerWeights {
        let mut rng = Seed(seed).rng();
        let cols = (0..d)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let bias = (0..d).map(|_| rng.random_range(-0.1..0.1)).collect();
        LayerWeights::new(cols, bias).unwrap()
    }

    fn frame_of(m: linalg3::Mat3) -> OrthogonalFrame {
        OrthogonalFrame::new(m, 1e-12).unwrap()
    }

    #[test]
    fn axis_order_parsing() {
        assert_eq!("123".parse::<AxisOrder>().unwrap(), AxisOrder::default());
        assert_eq!("v3,v2,v1".parse::<AxisOrder>().unwrap(), AxisOrder::reversed());
        assert!("112".parse::<AxisOrder>().is_err());
        assert!("1234".parse::<AxisOrder>().is_err());
        assert_eq!(AxisOrder::reversed().to_string(), "321");
        let mut all: Vec<String> = AxisOrder::all().iter().map(|o| o.to_string()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn weight_frame_axis_aligned_example() {
        let w = weights(&[
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, -2.0, 0.0],
            [0.0, 0.0, 3.0],
            [0.0, 0.0, -3.5],
        ]);
        let wf = weight_frame(&w, DEFAULT_SIGN_TOL, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(wf.w_bar, [0.0, 0.0, -1.0 / 12.0]);
        // hand-computed covariance: diag(2, 8, (37² + 41² + 4)/144)
        let want = [3054.0 / 144.0, 8.0, 2.0];
        for k in 0..3 {
            assert!((wf.eigenvalues[k] - want[k]).abs() < 1e-12);
        }
        assert!(max_abs_diff(wf.u.matrix(), &linalg3::from_columns(&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0])) < 1e-15);
        // u_1 is oriented by −w̄; u_2, u_3 are orthogonal to w̄
        assert_eq!(wf.ambiguous_axes, [false, true, true]);
    }

    #[test]
    fn weight_frame_rank_deficient() {
        let w = weights(&[[1.0, 1.0, 1.0]; 4]);
        assert!(matches!(
            weight_frame(&w, DEFAULT_SIGN_TOL, DEFAULT_RANK_TOL),
            Err(Error::RankDeficientWeights { .. })
        ));
    }

    #[test]
    fn weight_frame_zero_barycenter_is_fully_flagged() {
        let w = weights(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, -0.5]]);
        match weight_frame(&w, DEFAULT_SIGN_TOL, DEFAULT_RANK_TOL) {
            Err(Error::ZeroBarycenter { frame, .. }) => assert_eq!(frame.ambiguous_axes, [true; 3]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weight_frame_sign_rule_on_random_weights() {
        let mut unflagged = 0;
        for seed in 0..200 {
            let w = random_weights(seed, 16);
            let wf = weight_frame(&w, DEFAULT_SIGN_TOL, DEFAULT_RANK_TOL).unwrap();
            assert!(wf.u.orthogonality_error() < 1e-10);
            let neg_bar = linalg3::scale(&wf.w_bar, -1.0);
            for k in 0..3 {
                if !wf.ambiguous_axes[k] {
                    assert!(linalg3::dot(&wf.u.column(k), &neg_bar) >= 0.0);
                }
            }
            if !wf.ambiguous_axes.iter().any(|&a| a) {
                unflagged += 1;
            }
        }
        assert_eq!(unflagged, 200);
    }

    #[test]
    fn local_frame_singleton_is_degenerate() {
        let c = PointCloud::new(vec![[0.0; 3]]).unwrap();
        let ns = radius_neighbors(&c, 0, 1.0, 4).unwrap();
        let lf = local_frame(&c, &ns, DEFAULT_SIGN_TOL, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(lf.barycenter, [0.0; 3]);
        assert!(lf.degenerate);
        assert_eq!(lf.ambiguous_axes, [true; 3]);
        assert!(!lf.is_clean());
    }

    #[test]
    fn local_frame_too_few() {
        let c = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let ns = radius_neighbors(&c, 0, 2.0, 2).unwrap();
        assert!(matches!(
            local_frame(&c, &ns, DEFAULT_SIGN_TOL, DEFAULT_GAP_TOL),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn local_frame_seven_point_example() {
        let c = PointCloud::new(vec![
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 0.5, 0.0],
            [0.0, -0.5, 0.0],
            [0.0, 0.0, 0.1],
            [0.0, 0.0, -0.1],
        ])
        .unwrap();
        let ns = NeighborSet {
            query_index: 0,
            indices: (0..7).collect(),
            radius: 2.0,
            padded: false,
        };
        let lf = local_frame(&c, &ns, DEFAULT_SIGN_TOL, DEFAULT_GAP_TOL).unwrap();
        assert!((lf.barycenter[0] - 1.0 / 7.0).abs() < 1e-15);
        // covariance by hand: diag(140/49, 0.5, 0.02)
        let want = [140.0 / 49.0, 0.5, 0.02];
        for k in 0..3 {
            assert!((lf.eigenvalues[k] - want[k]).abs() < 1e-12);
        }
        assert!(max_abs_diff(lf.v.matrix(), &IDENTITY) < 1e-15);
        assert_eq!(lf.ambiguous_axes, [false, true, true]);
        assert!(!lf.degenerate);
    }

    #[test]
    fn alignment_rotation_examples() {
        let lf = |v: linalg3::Mat3| LocalFrame {
            v: frame_of(v),
            eigenvalues: [3.0, 2.0, 1.0],
            barycenter: [0.0; 3],
            gap_ratios: [0.3, 0.3],
            degenerate: false,
            ambiguous_axes: [false; 3],
        };
        let wf = WeightFrame {
            u: OrthogonalFrame::identity(),
            eigenvalues: [3.0, 2.0, 1.0],
            w_bar: [-1.0; 3],
            gap_ratios: [0.3, 0.3],
            ambiguous_axes: [false; 3],
        };
        let r = alignment_rotation(&wf, &lf(IDENTITY), AxisOrder::default());
        assert_eq!(*r.matrix(), IDENTITY);

        let rz = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let r = alignment_rotation(&wf, &lf(rz), AxisOrder::default());
        assert_eq!(*r.matrix(), transpose(&rz));

        // reversed wiring: u_1 ← v_3, u_3 ← v_1
        let r = alignment_rotation(&wf, &lf(IDENTITY), AxisOrder::reversed());
        assert_eq!(*r.matrix(), [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]);

        // lf.v = wf.u ⇒ identity, for an arbitrary frame
        let q = *random_rotation(Seed(8), RotationMode::Arbitrary).matrix();
        let wf2 = WeightFrame { u: frame_of(q), ..wf };
        let r = alignment_rotation(&wf2, &lf(q), AxisOrder::default());
        assert!(max_abs_diff(r.matrix(), &IDENTITY) < 1e-10);
    }

    #[test]
    fn project_normals_examples() {
        let n = vec![[0.0, 0.0, 1.0]];
        assert_eq!(project_normals(&n, &OrthogonalFrame::identity()), n);
        let rx = crate::geometry::Rotation3::about_x(std::f64::consts::FRAC_PI_2).as_frame();
        let out = project_normals(&n, &rx)[0];
        assert!(linalg3::norm(&linalg3::sub(&out, &[0.0, -1.0, 0.0])) < 1e-15);

        let mut rng = Seed(4).rng();
        for s in 0..100 {
            let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let v = linalg3::scale(&v, 1.0 / linalg3::norm(&v));
            let r = random_rotation(Seed(s), RotationMode::Arbitrary).as_frame();
            let out = project_normals(&[v], &r)[0];
            assert!((linalg3::norm(&out) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_layer_examples() {
        let w = LayerWeights::new(vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0], [-1.0, 1.0, 0.5]], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let an = |aligned: Vec<Vec3>| AlignedNeighborhood {
            r: OrthogonalFrame::identity(),
            source: NeighborSet { query_index: 0, indices: vec![0; aligned.len()], radius: 1.0, padded: false },
            aligned,
            frame: LocalFrame {
                v: OrthogonalFrame::identity(),
                eigenvalues: [0.0; 3],
                barycenter: [0.0; 3],
                gap_ratios: [0.0; 2],
                degenerate: true,
                ambiguous_axes: [true; 3],
            },
        };
        let y = wfa_feature_layer(&an(vec![[0.0; 3]; 2]), &w);
        assert_eq!(y, vec![w.bias().to_vec(); 2]);

        // direct substitution: w̄ = (0, 0.75, 0.875)
        let x = [0.5, -1.0, 2.0];
        let y = wfa_feature_layer(&an(vec![x]), &w);
        let wbar = [0.0, 0.75, 0.875];
        for k in 0..4 {
            let wt = linalg3::sub(&w.columns()[k], &wbar);
            assert!((y[0][k] - (linalg3::dot(&wt, &x) + w.bias()[k])).abs() < 1e-15);
        }

        // linearity in X'
        let base = wfa_feature_layer(&an(vec![x]), &w);
        let dbl = wfa_feature_layer(&an(vec![linalg3::scale(&x, 2.0)]), &w);
        for k in 0..4 {
            let b = w.bias()[k];
            assert!(((dbl[0][k] - b) - 2.0 * (base[0][k] - b)).abs() < 1e-12);
        }
    }

    fn asymmetric_cloud(seed: u64) -> PointCloud {
        let mut rng = Seed(seed).rng();
        let pts = (0..120)
            .map(|_| [rng.random_range(-1.0..1.0) * 1.0, rng.random_range(-1.0..1.0) * 0.6, rng.random_range(-1.0..1.0) * 0.3])
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn frames_are_equivariant_and_alignment_invariant() {
        let cfg = WfaConfig::default();
        let mut compared = 0;
        for seed in 0..30 {
            let c = asymmetric_cloud(seed);
            let wf = weight_frame(&random_weights(seed + 100, 12), cfg.sign_tol, cfg.rank_tol).unwrap();
            let q = random_rotation(Seed(seed + 7), RotationMode::Arbitrary);
            let t = [0.3, -2.0, 1.5];
            let m = apply_rigid(&c, &q, &t);
            for qi in [0usize, 10, 50, 99] {
                let ns = radius_neighbors(&c, qi, 0.7, 24).unwrap();
                let ns_m = radius_neighbors(&m, qi, 0.7, 24).unwrap();
                if ns != ns_m {
                    continue;
                }
                let a = align_neighborhood(&c, &ns, &wf, &cfg).unwrap();
                let b = align_neighborhood(&m, &ns_m, &wf, &cfg).unwrap();
                if !a.is_clean() || !b.is_clean() {
                    continue;
                }
                compared += 1;
                let qv = matmul3(q.matrix(), a.frame.v.matrix());
                assert!(max_abs_diff(&qv, b.frame.v.matrix()) < 1e-9);
                for (x, y) in a.aligned.iter().zip(&b.aligned) {
                    assert!(linalg3::norm(&linalg3::sub(x, y)) < 1e-9);
                }
                let w = random_weights(seed + 100, 12);
                let ya = wfa_feature_layer(&a, &w);
                let yb = wfa_feature_layer(&b, &w);
                for (ra, rb) in ya.iter().zip(&yb) {
                    for (p, q) in ra.iter().zip(rb) {
                        assert!((p - q).abs() < 1e-9);
                    }
                }
                // zero-mean aligned set, sign rule, orthogonality
                let s = a.aligned.iter().fold([0.0; 3], |acc, x| linalg3::add(&acc, x));
                assert!(linalg3::norm(&s) < 1e-9 * a.aligned.len() as f64);
                let off = linalg3::sub(&c.point(qi), &a.frame.barycenter);
                for k in 0..3 {
                    assert!(linalg3::dot(&a.frame.v.column(k), &off) >= -1e-9);
                }
                assert!(a.r.orthogonality_error() < 1e-10);
            }
        }
        assert!(compared > 60, "{compared}");
    }

    #[test]
    fn symmetric_neighborhood_with_identity_weight_frame() {
        // symmetric about its barycenter: aligned coordinates are V_iᵀ(p_j − p̄_i)
        let c = PointCloud::new(vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.2, 0.0],
            [-1.0, -0.2, 0.0],
            [0.1, 0.5, 0.05],
            [-0.1, -0.5, -0.05],
        ])
        .unwrap();
        let ns = NeighborSet { query_index: 1, indices: (0..5).collect(), radius: 2.0, padded: false };
        let wf = WeightFrame {
            u: OrthogonalFrame::identity(),
            eigenvalues: [3.0, 2.0, 1.0],
            w_bar: [-1.0; 3],
            gap_ratios: [0.3, 0.3],
            ambiguous_axes: [false; 3],
        };
        let an = align_neighborhood(&c, &ns, &wf, &WfaConfig::default()).unwrap();
        for (j, x) in an.aligned.iter().enumerate() {
            let want = linalg3::mat_t_vec(an.frame.v.matrix(), &linalg3::sub(&c.point(j), &an.frame.barycenter));
            assert!(linalg3::norm(&linalg3::sub(x, &want)) < 1e-15);
        }
    }
}
