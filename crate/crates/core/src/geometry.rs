//! Point clouds, rotations, orthogonal frames and seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg3::{self, Mat3, Vec3, IDENTITY};

pub type Point3 = [f64; 3];

/// Normals further than this from unit length are rejected; closer ones are
/// re-normalized.
pub const NORMAL_RENORMALIZE_TOL: f64 = 1e-3;

/// Ordered set of points with optional unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Self {
            points,
            normals: None,
        })
    }

    /// Builds a cloud with normals, re-normalizing any normal whose length is
    /// within [`NORMAL_RENORMALIZE_TOL`] of one.
    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vec3>) -> Result<Self> {
        let mut cloud = Self::new(points)?;
        if normals.len() != cloud.points.len() {
            return Err(Error::NormalCount {
                expected: cloud.points.len(),
                got: normals.len(),
            });
        }
        let mut fixed = Vec::with_capacity(normals.len());
        for (index, n) in normals.into_iter().enumerate() {
            let len = linalg3::norm(&n);
            if !len.is_finite() || (len - 1.0).abs() > NORMAL_RENORMALIZE_TOL {
                return Err(Error::BadNormal { index, norm: len });
            }
            fixed.push(if len == 1.0 { n } else { linalg3::scale(&n, 1.0 / len) });
        }
        cloud.normals = Some(fixed);
        Ok(cloud)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Point3 {
        self.points[index]
    }

    pub fn centroid(&self) -> Point3 {
        let mut c = [0.0; 3];
        for p in &self.points {
            c = linalg3::add(&c, p);
        }
        linalg3::scale(&c, 1.0 / self.points.len() as f64)
    }

    pub fn without_normals(&self) -> Self {
        Self {
            points: self.points.clone(),
            normals: None,
        }
    }
}

fn orthogonality_error(m: &Mat3) -> f64 {
    linalg3::max_abs_diff(&linalg3::matmul3(m, &linalg3::transpose(m)), &IDENTITY)
}

/// A proper rotation (`m mᵀ = I`, `det m = +1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation3(Mat3);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(IDENTITY)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Counter-clockwise rotation about +z.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Counter-clockwise rotation about +x.
    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    /// Rotation from a quaternion `(w, x, y, z)`; normalized first.
    pub(crate) fn from_quaternion(q: [f64; 4]) -> Self {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        let [w, x, y, z] = q.map(|c| c / n);
        Self([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// `self · other`
    pub fn compose(&self, other: &Rotation3) -> Rotation3 {
        Self(linalg3::matmul3(&self.0, &other.0))
    }

    pub fn transpose(&self) -> Rotation3 {
        Self(linalg3::transpose(&self.0))
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        linalg3::mat_vec(&self.0, v)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        ((linalg3::trace(&self.0) - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn as_frame(&self) -> OrthogonalFrame {
        OrthogonalFrame(self.0)
    }
}

/// Checks `m` against the rotation invariants within `tol`.
pub fn validate_rotation(m: &Mat3, tol: f64) -> Result<Rotation3> {
    let frame = OrthogonalFrame::new(*m, tol)?;
    let det = frame.det();
    if (det - 1.0).abs() <= tol {
        Ok(Rotation3(*m))
    } else {
        Err(Error::NotProper { det })
    }
}

/// An orthogonal 3×3 matrix whose columns are basis vectors. Reflections
/// (`det = -1`) are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalFrame(Mat3);

impl OrthogonalFrame {
    pub fn new(m: Mat3, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::BadTolerance(tol));
        }
        if !linalg3::is_finite(&m) {
            return Err(Error::NonFinite("frame matrix"));
        }
        let deviation = orthogonality_error(&m);
        if deviation > tol {
            return Err(Error::NotOrthogonal { deviation, tol });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(IDENTITY)
    }

    /// For matrices that are orthogonal by construction.
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn column(&self, k: usize) -> Vec3 {
        linalg3::column(&self.0, k)
    }

    pub fn det(&self) -> f64 {
        linalg3::det3(&self.0)
    }

    pub fn is_proper(&self) -> bool {
        self.det() > 0.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        linalg3::mat_vec(&self.0, v)
    }

    pub fn transpose(&self) -> Self {
        Self(linalg3::transpose(&self.0))
    }

    /// `max |m mᵀ - I|`
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.0)
    }
}

/// Applies `p ↦ r·p + t` to every point and `n ↦ r·n` to every normal.
pub fn apply_rigid(cloud: &PointCloud, r: &Rotation3, t: &Vec3) -> PointCloud {
    if *r.matrix() == IDENTITY && *t == [0.0; 3] {
        return cloud.clone();
    }
    let points = cloud
        .points
        .iter()
        .map(|p| linalg3::add(&r.apply(p), t))
        .collect();
    let normals = cloud
        .normals
        .as_ref()
        .map(|ns| ns.iter().map(|n| r.apply(n)).collect());
    PointCloud { points, normals }
}

/// 64-bit seed. Sub-streams are derived by mixing, so independent consumers
/// never share a random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Child seed for sub-stream `stream`.
    pub fn derive(self, stream: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(stream.wrapping_add(0x632b_e59b_d9b4_e019))))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{random_rotation, RotationMode};
    use proptest::prelude::*;
    use rand::Rng;

    fn rot_z90() -> Mat3 {
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
    }

    #[test]
    fn validate_rotation_cases() {
        assert_eq!(validate_rotation(&IDENTITY, 1e-10).unwrap(), Rotation3::identity());
        assert!(matches!(
            validate_rotation(&linalg3::diag(&[1.0, 1.0, -1.0]), 1e-10),
            Err(Error::NotProper { .. })
        ));
        assert!(validate_rotation(&rot_z90(), 1e-10).is_ok());
        assert!(matches!(
            validate_rotation(&linalg3::diag(&[1.0, 1.0, 1.1]), 1e-10),
            Err(Error::NotOrthogonal { .. })
        ));
        assert!(matches!(
            validate_rotation(&IDENTITY, 0.0),
            Err(Error::BadTolerance(_))
        ));
    }

    #[test]
    fn cloud_validation() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
        assert!(PointCloud::new(vec![[f64::INFINITY, 0.0, 0.0]]).is_err());
        let c = PointCloud::with_normals(vec![[0.0; 3]], vec![[0.0, 0.0, 1.0005]]).unwrap();
        assert!((linalg3::norm(&c.normals().unwrap()[0]) - 1.0).abs() < 1e-15);
        assert!(matches!(
            PointCloud::with_normals(vec![[0.0; 3]], vec![[0.0, 0.0, 1.01]]),
            Err(Error::BadNormal { .. })
        ));
        assert!(matches!(
            PointCloud::with_normals(vec![[0.0; 3]], vec![]),
            Err(Error::NormalCount { .. })
        ));
    }

    #[test]
    fn apply_rigid_examples() {
        let c = PointCloud::with_normals(
            vec![[1.0, 0.0, 0.0], [-0.0, 2.5, 3.0]],
            vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(apply_rigid(&c, &Rotation3::identity(), &[0.0; 3]), c);

        let r = validate_rotation(&rot_z90(), 1e-12).unwrap();
        let out = apply_rigid(&c, &r, &[0.0; 3]);
        assert_eq!(out.point(0), [0.0, 1.0, 0.0]);
        // normals ignore translation
        let out = apply_rigid(&c, &r, &[5.0, 5.0, 5.0]);
        assert_eq!(out.normals().unwrap()[1], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn apply_rigid_preserves_pairwise_distances() {
        let mut rng = Seed(5).rng();
        let pts: Vec<Point3> = (0..100)
            .map(|_| [rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3)])
            .collect();
        let c = PointCloud::new(pts).unwrap();
        let r = random_rotation(Seed(9), RotationMode::Arbitrary);
        let t = [rng.random_range(-10.0..10.0), 3.0, -7.0];
        let out = apply_rigid(&c, &r, &t);
        let mut worst = 0.0f64;
        for i in 0..c.len() {
            for j in 0..c.len() {
                let d0 = linalg3::norm(&linalg3::sub(&c.point(i), &c.point(j)));
                let d1 = linalg3::norm(&linalg3::sub(&out.point(i), &out.point(j)));
                worst = worst.max((d0 - d1).abs());
            }
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn seed_streams_differ() {
        let s = Seed(1);
        assert_ne!(s.derive(0), s.derive(1));
        assert_eq!(s.derive(4), Seed(1).derive(4));
    }

    proptest! {
        #[test]
        fn rigid_composition(seed_a in 0u64..1000, seed_b in 0u64..1000,
                             pts in prop::collection::vec(prop::array::uniform3(-100.0f64..100.0), 1..40)) {
            let c = PointCloud::new(pts).unwrap();
            let r1 = random_rotation(Seed(seed_a), RotationMode::Arbitrary);
            let r2 = random_rotation(Seed(seed_b), RotationMode::Arbitrary);
            let twice = apply_rigid(&apply_rigid(&c, &r1, &[0.0; 3]), &r2, &[0.0; 3]);
            let once = apply_rigid(&c, &r2.compose(&r1), &[0.0; 3]);
            for (a, b) in twice.points().iter().zip(once.points()) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-12 * 100.0);
                }
            }
        }

        #[test]
        fn rigid_distances(seed in 0u64..10_000, t in prop::array::uniform3(-10.0f64..10.0),
                           pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..30)) {
            let c = PointCloud::new(pts).unwrap();
            let r = random_rotation(Seed(seed), RotationMode::Arbitrary);
            let out = apply_rigid(&c, &r, &t);
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    let d0 = linalg3::norm(&linalg3::sub(&c.point(i), &c.point(j)));
                    let d1 = linalg3::norm(&linalg3::sub(&out.point(i), &out.point(j)));
                    prop_assert!((d0 - d1).abs() <= 1e-12);
                }
            }
        }
    }
}
