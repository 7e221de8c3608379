//! Orthogonal Procrustes (Kabsch), nearest-neighbor correspondences,
//! rotation-only ICP, and a brute-force rotation search used as an oracle.
//!
//! Point sets are slices of 3-vectors, one per column of the 3×n matrix.
//! Nothing here centers its inputs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{OrthogonalFrame, PointCloud, Seed};
use crate::linalg3::{self, Mat3, Vec3};
use crate::neighbors::NeighborSet;
use crate::synthdata::{random_rotation_with, RotationMode};
use crate::wfa::{alignment_rotation, local_frame, weight_frame_or_fallback, LayerWeights, WfaConfig};

/// Samples per independently seeded chunk of the brute-force search.
const BRUTE_FORCE_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Handedness {
    /// Plain `V Uᵀ`; may be a reflection.
    #[default]
    AllowReflection,
    /// Flip the singular direction with the smallest singular value when
    /// needed so that `det r = +1`.
    Proper,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrespondenceMap {
    pub pi: Vec<usize>,
    /// Squared distance from each transformed source point to its match.
    pub distances: Vec<f64>,
}

impl CorrespondenceMap {
    pub fn cost(&self) -> f64 {
        self.distances.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub r: OrthogonalFrame,
    pub cost: f64,
    pub iterations: usize,
    /// Cost after each accepted step; ICP only, `history[0]` is the starting cost.
    pub history: Vec<f64>,
}

fn check_len(got: usize, needed: usize) -> Result<()> {
    if got < needed {
        return Err(Error::TooFewPoints { needed, got });
    }
    Ok(())
}

/// `Σ_k ‖target_k − r source_k‖²` for paired columns.
pub fn paired_cost(source: &[Vec3], target: &[Vec3], r: &Mat3) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, t)| {
            let d = linalg3::sub(t, &linalg3::mat_vec(r, s));
            linalg3::dot(&d, &d)
        })
        .sum()
}

/// Orthogonal `r` maximizing `tr(r · source · targetᵀ)` for paired columns.
pub fn kabsch(source: &[Vec3], target: &[Vec3]) -> Result<AlignmentResult> {
    kabsch_with(source, target, Handedness::AllowReflection)
}

pub fn kabsch_with(source: &[Vec3], target: &[Vec3], handedness: Handedness) -> Result<AlignmentResult> {
    check_len(source.len(), 3)?;
    if source.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "kabsch needs paired columns, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let mut h = linalg3::ZERO;
    for (s, t) in source.iter().zip(target) {
        for a in 0..3 {
            for b in 0..3 {
                h[a][b] += s[a] * t[b];
            }
        }
    }
    let svd = linalg3::svd3(&h)?;
    let u = svd.u.matrix();
    let mut v = *svd.v.matrix();
    let mut r = linalg3::matmul3(&v, &linalg3::transpose(u));
    if handedness == Handedness::Proper && linalg3::det3(&r) < 0.0 {
        for row in v.iter_mut() {
            row[2] = -row[2];
        }
        r = linalg3::matmul3(&v, &linalg3::transpose(u));
    }
    Ok(AlignmentResult {
        r: OrthogonalFrame::from_matrix_unchecked(r),
        cost: paired_cost(source, target, &r),
        iterations: 1,
        history: Vec::new(),
    })
}

/// For every source point `r·s_k`, the nearest target point (ties to the
/// smaller index).
pub fn nearest_correspondence(source: &[Vec3], target: &[Vec3], r: &OrthogonalFrame) -> CorrespondenceMap {
    let mut pi = Vec::with_capacity(source.len());
    let mut distances = Vec::with_capacity(source.len());
    for s in source {
        let x = r.apply(s);
        let mut best = (f64::INFINITY, 0usize);
        for (l, t) in target.iter().enumerate() {
            let d = linalg3::sub(t, &x);
            let d2 = linalg3::dot(&d, &d);
            if d2 < best.0 {
                best = (d2, l);
            }
        }
        pi.push(best.1);
        distances.push(best.0);
    }
    CorrespondenceMap { pi, distances }
}

/// `Σ_k min_l ‖target_l − r source_k‖²`.
pub fn nearest_cost(source: &[Vec3], target: &[Vec3], r: &OrthogonalFrame) -> f64 {
    nearest_correspondence(source, target, r).cost()
}

/// Point-to-point ICP over rotations only, started from the identity.
pub fn icp(source: &[Vec3], target: &[Vec3], max_iters: usize, cost_tol: f64) -> Result<AlignmentResult> {
    icp_from(source, target, &OrthogonalFrame::identity(), max_iters, cost_tol)
}

/// ICP started from `init`. A step is kept only if it does not raise the
/// cost; iteration stops once the relative improvement drops to `cost_tol`.
pub fn icp_from(
    source: &[Vec3],
    target: &[Vec3],
    init: &OrthogonalFrame,
    max_iters: usize,
    cost_tol: f64,
) -> Result<AlignmentResult> {
    check_len(source.len(), 3)?;
    check_len(target.len(), 3)?;
    let mut r = *init;
    let mut corr = nearest_correspondence(source, target, &r);
    let mut cost = corr.cost();
    let mut history = vec![cost];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let matched: Vec<Vec3> = corr.pi.iter().map(|&l| target[l]).collect();
        let step = kabsch(source, &matched)?;
        let next = nearest_correspondence(source, target, &step.r);
        let next_cost = next.cost();
        if next_cost > cost {
            break;
        }
        let improvement = cost - next_cost;
        r = step.r;
        corr = next;
        let prev = cost;
        cost = next_cost;
        history.push(cost);
        if improvement <= cost_tol * prev {
            break;
        }
    }
    Ok(AlignmentResult {
        r,
        cost,
        iterations,
        history,
    })
}

/// Best of the identity and `num_samples` Haar-random rotations under the
/// paired cost. Samples are drawn in fixed-size chunks, each from its own
/// derived stream, so the result depends only on the seed.
pub fn brute_force_best_rotation(source: &[Vec3], target: &[Vec3], num_samples: usize, seed: Seed) -> AlignmentResult {
    brute_force_by(num_samples, seed, |r| paired_cost(source, target, r))
}

fn brute_force_by(num_samples: usize, seed: Seed, cost_of: impl Fn(&Mat3) -> f64) -> AlignmentResult {
    let mut best_r = linalg3::IDENTITY;
    let mut best_cost = cost_of(&best_r);
    let mut drawn = 0;
    let mut chunk = 0u64;
    while drawn < num_samples {
        let mut rng = seed.derive(chunk).rng();
        let take = BRUTE_FORCE_CHUNK.min(num_samples - drawn);
        for _ in 0..take {
            let q = *random_rotation_with(&mut rng, RotationMode::Arbitrary).matrix();
            let c = cost_of(&q);
            if c < best_cost {
                best_cost = c;
                best_r = q;
            }
        }
        drawn += take;
        chunk += 1;
    }
    AlignmentResult {
        r: OrthogonalFrame::from_matrix_unchecked(best_r),
        cost: best_cost,
        iterations: num_samples,
        history: Vec::new(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimalityCheckConfig {
    pub wfa: WfaConfig,
    pub icp_max_iters: usize,
    pub icp_cost_tol: f64,
    pub brute_force_samples: usize,
    pub seed: Seed,
    /// Gap allowed (relative to the point-set scale) before the alignment
    /// is reported as not optimal.
    pub gap_tol: f64,
}

impl Default for OptimalityCheckConfig {
    fn default() -> Self {
        Self {
            wfa: WfaConfig::default(),
            icp_max_iters: 50,
            icp_cost_tol: 1e-12,
            brute_force_samples: 10_000,
            seed: Seed(0),
            gap_tol: 1e-9,
        }
    }
}

/// How close the WFA alignment comes to minimizing the nearest-neighbor
/// registration cost between a neighborhood and the centered weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub alignment: OrthogonalFrame,
    pub weight_axes_ambiguous: [bool; 3],
    pub local_frame_clean: bool,
    pub n_points: usize,
    pub n_weights: usize,
    pub objective_at_alignment: f64,
    pub objective_icp: f64,
    pub icp_rotation: OrthogonalFrame,
    pub icp_iterations: usize,
    pub objective_brute_force: f64,
    pub brute_force_samples: usize,
    pub best_objective: f64,
    /// `objective_at_alignment − best_objective`, never negative.
    pub gap: f64,
    /// `gap` divided by `Σ‖x_k‖² + n·max‖w̃_l‖²`.
    pub relative_gap: f64,
    pub within_tolerance: bool,
}

/// Compares the WFA rotation against ICP (started from it) and random search
/// on `J(R) = Σ_k min_l ‖w̃_l − R x_k‖²`, with `x_k` the neighborhood centered
/// on its barycenter.
///
/// Weights with a vanishing barycenter or rank-deficient spread are accepted;
/// their frame then uses the eigensolver's fallback signs.
pub fn check_alignment_optimality(
    cloud: &PointCloud,
    neighbors: &NeighborSet,
    weights: &LayerWeights,
    cfg: &OptimalityCheckConfig,
) -> Result<OptimalityReport> {
    let wf = weight_frame_or_fallback(weights, cfg.wfa.sign_tol, cfg.wfa.rank_tol)?;
    let lf = local_frame(cloud, neighbors, cfg.wfa.sign_tol, cfg.wfa.gap_tol)?;
    let r = alignment_rotation(&wf, &lf, cfg.wfa.order);

    let source: Vec<Vec3> = neighbors
        .indices
        .iter()
        .map(|&j| linalg3::sub(&cloud.point(j), &lf.barycenter))
        .collect();
    let target = weights.centered();

    let at_alignment = nearest_cost(&source, &target, &r);
    let refined = icp_from(&source, &target, &r, cfg.icp_max_iters, cfg.icp_cost_tol)?;
    let brute = brute_force_by(cfg.brute_force_samples, cfg.seed, |q| {
        nearest_cost(&source, &target, &OrthogonalFrame::from_matrix_unchecked(*q))
    });
    let best = at_alignment.min(refined.cost).min(brute.cost);
    let gap = (at_alignment - best).max(0.0);

    let source_scale: f64 = source.iter().map(|x| linalg3::dot(x, x)).sum();
    let target_scale = target.iter().map(|w| linalg3::dot(w, w)).fold(0.0, f64::max);
    let scale = source_scale + source.len() as f64 * target_scale;
    let relative_gap = if scale > 0.0 { gap / scale } else { 0.0 };

    Ok(OptimalityReport {
        alignment: r,
        weight_axes_ambiguous: wf.ambiguous_axes,
        local_frame_clean: lf.is_clean(),
        n_points: source.len(),
        n_weights: target.len(),
        objective_at_alignment: at_alignment,
        objective_icp: refined.cost,
        icp_rotation: refined.r,
        icp_iterations: refined.iterations,
        objective_brute_force: brute.cost,
        brute_force_samples: cfg.brute_force_samples,
        best_objective: best,
        gap,
        relative_gap,
        within_tolerance: gap <= cfg.gap_tol * scale.max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation3;
    use crate::linalg3::{matmul3, max_abs_diff, transpose, IDENTITY};
    use crate::neighbors::radius_neighbors;
    use crate::synthdata::random_rotation;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(seed: u64, n: usize, scales: Vec3) -> Vec<Vec3> {
        let mut rng = Seed(seed).rng();
        (0..n)
            .map(|_| {
                [
                    scales[0] * rng.random_range(-1.0..1.0),
                    scales[1] * rng.random_range(-1.0..1.0),
                    scales[2] * rng.random_range(-1.0..1.0),
                ]
            })
            .collect()
    }

    fn centered(pts: &[Vec3]) -> Vec<Vec3> {
        let mut c = [0.0; 3];
        for p in pts {
            c = linalg3::add(&c, p);
        }
        let c = linalg3::scale(&c, 1.0 / pts.len() as f64);
        pts.iter().map(|p| linalg3::sub(p, &c)).collect()
    }

    fn rotate(q: &Mat3, pts: &[Vec3]) -> Vec<Vec3> {
        pts.iter().map(|p| linalg3::mat_vec(q, p)).collect()
    }

    /// `tr(r · source · targetᵀ)`
    fn trace_objective(r: &Mat3, source: &[Vec3], target: &[Vec3]) -> f64 {
        source
            .iter()
            .zip(target)
            .map(|(s, t)| linalg3::dot(t, &linalg3::mat_vec(r, s)))
            .sum()
    }

    #[test]
    fn identical_sets_give_identity() {
        let x = centered(&random_points(1, 20, [1.0, 0.7, 0.4]));
        let res = kabsch(&x, &x).unwrap();
        assert!(max_abs_diff(res.r.matrix(), &IDENTITY) <= 1e-10);
        let scale: f64 = x.iter().map(|p| linalg3::dot(p, p)).sum();
        assert!(res.cost <= 1e-18 * scale.max(1.0));
    }

    #[test]
    fn recovers_known_rotation() {
        for seed in 0..50 {
            let x = centered(&random_points(seed, 15, [1.0, 1.0, 1.0]));
            let q = *random_rotation(Seed(seed + 100), RotationMode::Arbitrary).matrix();
            let res = kabsch(&x, &rotate(&q, &x)).unwrap();
            assert!(max_abs_diff(res.r.matrix(), &q) <= 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn planar_source_has_zero_residual() {
        for seed in 0..20 {
            let x = centered(&random_points(seed, 12, [1.0, 1.0, 0.0]));
            let q = *random_rotation(Seed(seed + 7), RotationMode::Arbitrary).matrix();
            let res = kabsch(&x, &rotate(&q, &x)).unwrap();
            assert!(res.cost <= 1e-16, "cost {}", res.cost);
            assert!(res.r.orthogonality_error() <= 1e-10);
        }
    }

    #[test]
    fn too_few_points() {
        let x = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(matches!(kabsch(&x, &x), Err(Error::TooFewPoints { .. })));
        assert!(matches!(icp(&x, &x, 5, 1e-9), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn reflection_flag() {
        // target is a mirror image: the plain solution is a reflection
        let x = centered(&random_points(4, 10, [1.0, 0.8, 0.6]));
        let mirror: Vec<Vec3> = x.iter().map(|p| [p[0], p[1], -p[2]]).collect();
        let free = kabsch(&x, &mirror).unwrap();
        assert!(free.r.det() < 0.0);
        assert!(free.cost <= 1e-20);
        let proper = kabsch_with(&x, &mirror, Handedness::Proper).unwrap();
        assert!((proper.r.det() - 1.0).abs() <= 1e-12);
        assert!(proper.cost >= free.cost);
    }

    #[test]
    fn left_equivariance() {
        for seed in 0..30 {
            let x = centered(&random_points(seed, 10, [1.0, 0.6, 0.3]));
            let y = centered(&random_points(seed + 999, 10, [1.0, 0.6, 0.3]));
            let q = *random_rotation(Seed(seed), RotationMode::Arbitrary).matrix();
            let base = kabsch(&x, &y).unwrap();
            let moved = kabsch(&x, &rotate(&q, &y)).unwrap();
            assert!(max_abs_diff(moved.r.matrix(), &matmul3(&q, base.r.matrix())) <= 1e-9);
        }
    }

    /// Exhaustive double loop.
    fn correspondence_oracle(source: &[Vec3], target: &[Vec3], r: &Mat3) -> Vec<usize> {
        let mut out = Vec::new();
        for s in source {
            let x = linalg3::mat_vec(r, s);
            let mut best = 0;
            for l in 1..target.len() {
                if linalg3::norm(&linalg3::sub(&target[l], &x)) < linalg3::norm(&linalg3::sub(&target[best], &x)) {
                    best = l;
                }
            }
            out.push(best);
        }
        out
    }

    #[test]
    fn correspondence_examples() {
        let x = random_points(3, 25, [1.0, 1.0, 1.0]);
        let q = random_rotation(Seed(3), RotationMode::Arbitrary);
        let y = rotate(q.matrix(), &x);
        let map = nearest_correspondence(&x, &y, &q.as_frame());
        assert_eq!(map.pi, (0..25).collect::<Vec<_>>());
        assert!(map.distances.iter().all(|&d| d <= 1e-28));

        let origin = vec![[0.0; 3]];
        let t = vec![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert_eq!(nearest_correspondence(&origin, &t, &OrthogonalFrame::identity()).pi, vec![1]);

        for seed in 0..20 {
            let s = random_points(seed, 30, [1.0, 1.0, 1.0]);
            let t = random_points(seed + 50, 40, [1.0, 1.0, 1.0]);
            let r = random_rotation(Seed(seed), RotationMode::Arbitrary);
            assert_eq!(
                nearest_correspondence(&s, &t, &r.as_frame()).pi,
                correspondence_oracle(&s, &t, r.matrix())
            );
        }
    }

    #[test]
    fn icp_identity_converges_immediately() {
        let x = centered(&random_points(8, 20, [1.0, 0.5, 0.25]));
        let res = icp(&x, &x, 20, 1e-12).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(max_abs_diff(res.r.matrix(), &IDENTITY) <= 1e-12);
    }

    #[test]
    fn icp_recovers_small_rotations() {
        let axes = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
        for seed in 0..20u64 {
            let x = centered(&random_points(seed, 40, [1.0, 0.6, 0.3]));
            let axis = linalg3::scale(&axes[seed as usize % 3], 1.0 / linalg3::norm(&axes[seed as usize % 3]));
            let angle = (5.0 + seed as f64) * std::f64::consts::PI / 180.0;
            let (s, c) = (angle / 2.0).sin_cos();
            let q = *Rotation3::from_quaternion([c, s * axis[0], s * axis[1], s * axis[2]]).matrix();
            let res = icp(&x, &rotate(&q, &x), 10, 1e-12).unwrap();
            assert!(res.iterations <= 10);
            assert!(max_abs_diff(res.r.matrix(), &q) <= 1e-6, "seed {seed}: {}", max_abs_diff(res.r.matrix(), &q));
        }
    }

    #[test]
    fn icp_cost_never_increases() {
        for seed in 0..100 {
            let x = centered(&random_points(seed, 25, [1.0, 0.7, 0.4]));
            let y = centered(&random_points(seed + 1000, 30, [1.0, 0.7, 0.4]));
            let res = icp(&x, &y, 30, 1e-10).unwrap();
            assert!(res.history.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {:?}", res.history);
            assert_eq!(*res.history.last().unwrap(), res.cost);
            assert!(res.cost >= 0.0);
            assert!(res.r.orthogonality_error() <= 1e-10);
        }
    }

    #[test]
    fn brute_force_basics() {
        let x = centered(&random_points(2, 10, [1.0, 1.0, 1.0]));
        let y = centered(&random_points(3, 10, [1.0, 1.0, 1.0]));
        let none = brute_force_best_rotation(&x, &y, 0, Seed(1));
        assert_eq!(*none.r.matrix(), IDENTITY);
        assert_eq!(none.cost, paired_cost(&x, &y, &IDENTITY));
        let a = brute_force_best_rotation(&x, &y, 5000, Seed(9));
        assert_eq!(a, brute_force_best_rotation(&x, &y, 5000, Seed(9)));
        assert!(a.cost <= none.cost);
        let k = kabsch(&x, &y).unwrap();
        assert!(k.cost <= a.cost + 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn kabsch_maximizes_trace(seed in 0u64..100_000) {
            let x = centered(&random_points(seed, 8, [1.0, 0.5, 0.2]));
            let y = centered(&random_points(seed ^ 0x55, 8, [1.0, 0.5, 0.2]));
            let best = kabsch(&x, &y).unwrap();
            let top = trace_objective(best.r.matrix(), &x, &y);
            let scale: f64 = x.iter().chain(&y).map(|p| linalg3::dot(p, p)).sum();
            let mut rng = Seed(seed).rng();
            for _ in 0..200 {
                let q = *random_rotation_with(&mut rng, RotationMode::Arbitrary).matrix();
                prop_assert!(top >= trace_objective(&q, &x, &y) - 1e-10 * scale);
                // improper orthogonal matrices too
                let m = matmul3(&q, &linalg3::diag(&[1.0, 1.0, -1.0]));
                prop_assert!(top >= trace_objective(&m, &x, &y) - 1e-10 * scale);
            }
        }

        #[test]
        fn kabsch_output_is_orthogonal(seed in 0u64..100_000) {
            let x = random_points(seed, 6, [1.0, 1.0, 1.0]);
            let y = random_points(seed + 1, 6, [2.0, 1.0, 0.5]);
            let r = kabsch(&x, &y).unwrap().r;
            prop_assert!(max_abs_diff(&matmul3(r.matrix(), &transpose(r.matrix())), &IDENTITY) <= 1e-10);
        }
    }

    fn neighborhood(seed: u64) -> (PointCloud, NeighborSet) {
        let pts = random_points(seed, 60, [1.0, 0.6, 0.3]);
        let cloud = PointCloud::new(pts).unwrap();
        let ns = radius_neighbors(&cloud, 0, 0.9, 12).unwrap();
        (cloud, ns)
    }

    fn check_cfg() -> OptimalityCheckConfig {
        OptimalityCheckConfig {
            brute_force_samples: 2000,
            ..Default::default()
        }
    }

    /// Weights `w_k = Q x_k − Q(p_i − p̄_i)`: the weight frame is exactly `Q`
    /// times the local frame, so the alignment registers them perfectly.
    fn constructed_weights(cloud: &PointCloud, ns: &NeighborSet, q: &Mat3) -> LayerWeights {
        let pts: Vec<Vec3> = ns.indices.iter().map(|&j| cloud.point(j)).collect();
        let xs = centered(&pts);
        let mut bar = [0.0; 3];
        for p in &pts {
            bar = linalg3::add(&bar, p);
        }
        let bar = linalg3::scale(&bar, 1.0 / pts.len() as f64);
        let c = linalg3::scale(&linalg3::mat_vec(q, &linalg3::sub(&cloud.point(ns.query_index), &bar)), -1.0);
        let cols: Vec<Vec3> = xs.iter().map(|x| linalg3::add(&linalg3::mat_vec(q, x), &c)).collect();
        let n = cols.len();
        LayerWeights::new(cols, vec![0.0; n]).unwrap()
    }

    #[test]
    fn constructed_weights_are_registered_exactly() {
        for seed in 0..10 {
            let (cloud, ns) = neighborhood(seed);
            let q = *random_rotation(Seed(seed + 40), RotationMode::Arbitrary).matrix();
            let w = constructed_weights(&cloud, &ns, &q);
            let rep = check_alignment_optimality(&cloud, &ns, &w, &check_cfg()).unwrap();
            assert!(rep.objective_at_alignment <= 1e-9, "{rep:?}");
            assert!(rep.gap <= 1e-9);
            assert!(rep.within_tolerance);
            assert!(max_abs_diff(rep.alignment.matrix(), &q) <= 1e-9);
        }
    }

    #[test]
    fn identity_case_recovers_identity() {
        let (cloud, ns) = neighborhood(11);
        let w = constructed_weights(&cloud, &ns, &IDENTITY);
        let rep = check_alignment_optimality(&cloud, &ns, &w, &check_cfg()).unwrap();
        assert!(max_abs_diff(rep.alignment.matrix(), &IDENTITY) <= 1e-9);
        assert!(rep.gap <= 1e-9);
    }

    #[test]
    fn zero_barycenter_weights_still_report() {
        // the centered neighborhood itself: w̄ = 0, so every weight axis is flagged
        let (cloud, ns) = neighborhood(12);
        let pts: Vec<Vec3> = ns.indices.iter().map(|&j| cloud.point(j)).collect();
        let cols = centered(&pts);
        let n = cols.len();
        let w = LayerWeights::new(cols, vec![0.0; n]).unwrap();
        let rep = check_alignment_optimality(&cloud, &ns, &w, &check_cfg()).unwrap();
        assert_eq!(rep.weight_axes_ambiguous, [true; 3]);
        assert!(rep.gap.is_finite() && rep.gap >= 0.0);
        assert!(rep.best_objective <= 1e-9);
    }

    #[test]
    fn random_weights_report_is_populated() {
        let (cloud, ns) = neighborhood(5);
        let cols = random_points(77, 16, [1.0, 1.0, 1.0]);
        let w = LayerWeights::new(cols, vec![0.0; 16]).unwrap();
        let rep = check_alignment_optimality(&cloud, &ns, &w, &check_cfg()).unwrap();
        assert!(rep.gap.is_finite() && rep.gap >= 0.0);
        assert!(rep.best_objective <= rep.objective_at_alignment);
        assert!(rep.objective_icp <= rep.objective_at_alignment);
        assert_eq!(rep.n_points, 12);
        assert_eq!(rep.n_weights, 16);
        assert_eq!(rep, check_alignment_optimality(&cloud, &ns, &w, &check_cfg()).unwrap());
    }
}
