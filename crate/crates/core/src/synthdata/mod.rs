//! Synthetic labeled shapes, random rotations and point-cloud files.

mod io;

pub use io::{read_ply, read_ply_from, read_xyz, read_xyz_from, write_ply, write_ply_to, write_xyz, write_xyz_to};

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Rotation3, Seed};
use crate::linalg3::{self, Vec3};

pub const TORUS_MAJOR: f64 = 0.35;
pub const TORUS_MINOR: f64 = 0.15;
pub const SPHERE_RADIUS: f64 = 1.0;
pub const CUBE_HALF_EXTENT: f64 = 0.5;
/// Cylinder and cone: base radius 0.5, height 1, centered on the origin.
pub const ROUND_RADIUS: f64 = 0.5;
pub const ROUND_HALF_HEIGHT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Sphere,
    Cube,
    Cylinder,
    Cone,
    Torus,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Sphere,
        ShapeKind::Cube,
        ShapeKind::Cylinder,
        ShapeKind::Cone,
        ShapeKind::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cube => "cube",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Cone => "cone",
            ShapeKind::Torus => "torus",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown shape {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub with_normals: bool,
    pub seed: Seed,
}

/// Samples `spec.n_points` points uniformly (by area) on the shape surface,
/// optionally jittered along the analytic normal.
pub fn gen_shape(spec: &ShapeSpec) -> Result<PointCloud> {
    if spec.n_points < 8 {
        return Err(Error::BadCount {
            what: "points per shape",
            count: spec.n_points,
            min: 8,
            max: usize::MAX,
        });
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let mut rng = spec.seed.rng();
    let mut points = Vec::with_capacity(spec.n_points);
    let mut normals = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let (p, n) = match spec.kind {
            ShapeKind::Sphere => sample_sphere(&mut rng),
            ShapeKind::Cube => sample_cube(&mut rng),
            ShapeKind::Cylinder => sample_cylinder(&mut rng),
            ShapeKind::Cone => sample_cone(&mut rng),
            ShapeKind::Torus => sample_torus(&mut rng),
        };
        let p = if spec.noise_sigma > 0.0 {
            let e: f64 = rng.sample(StandardNormal);
            linalg3::add(&p, &linalg3::scale(&n, e * spec.noise_sigma))
        } else {
            p
        };
        points.push(p);
        normals.push(n);
    }
    if spec.with_normals {
        PointCloud::with_normals(points, normals)
    } else {
        PointCloud::new(points)
    }
}

fn unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

fn sample_sphere<R: Rng>(rng: &mut R) -> (Point3, Vec3) {
    loop {
        let v: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let len = linalg3::norm(&v);
        if len > 1e-12 {
            let n = linalg3::scale(&v, 1.0 / len);
            return (linalg3::scale(&n, SPHERE_RADIUS), n);
        }
    }
}

fn sample_cube<R: Rng>(rng: &mut R) -> (Point3, Vec3) {
    let face = rng.random_range(0..6usize);
    let axis = face / 2;
    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
    let mut p = [0.0; 3];
    let mut n = [0.0; 3];
    p[axis] = sign * CUBE_HALF_EXTENT;
    n[axis] = sign;
    p[(axis + 1) % 3] = (unit(rng) - 0.5) * 2.0 * CUBE_HALF_EXTENT;
    p[(axis + 2) % 3] = (unit(rng) - 0.5) * 2.0 * CUBE_HALF_EXTENT;
    (p, n)
}

fn disc<R: Rng>(rng: &mut R, radius: f64) -> (f64, f64) {
    let r = radius * unit(rng).sqrt();
    let phi = TAU * unit(rng);
    (r * phi.cos(), r * phi.sin())
}

fn sample_cylinder<R: Rng>(rng: &mut R) -> (Point3, Vec3) {
    let side = TAU * ROUND_RADIUS * 2.0 * ROUND_HALF_HEIGHT;
    let cap = PI * ROUND_RADIUS * ROUND_RADIUS;
    let pick = unit(rng) * (side + 2.0 * cap);
    if pick < side {
        let phi = TAU * unit(rng);
        let z = (unit(rng) * 2.0 - 1.0) * ROUND_HALF_HEIGHT;
        let (s, c) = phi.sin_cos();
        ([ROUND_RADIUS * c, ROUND_RADIUS * s, z], [c, s, 0.0])
    } else {
        let top = pick < side + cap;
        let (x, y) = disc(rng, ROUND_RADIUS);
        let sign = if top { 1.0 } else { -1.0 };
        ([x, y, sign * ROUND_HALF_HEIGHT], [0.0, 0.0, sign])
    }
}

/// Apex at `z = +h/2`, base disc at `z = −h/2`.
fn sample_cone<R: Rng>(rng: &mut R) -> (Point3, Vec3) {
    let height = 2.0 * ROUND_HALF_HEIGHT;
    let slant = ROUND_RADIUS.hypot(height);
    let lateral = PI * ROUND_RADIUS * slant;
    let base = PI * ROUND_RADIUS * ROUND_RADIUS;
    if unit(rng) * (lateral + base) < lateral {
        // area grows linearly with distance from the apex
        let s = unit(rng).sqrt();
        let phi = TAU * unit(rng);
        let (sn, cs) = phi.sin_cos();
        let rho = ROUND_RADIUS * s;
        let z = ROUND_HALF_HEIGHT - height * s;
        let n = linalg3::scale(&[height * cs, height * sn, ROUND_RADIUS], 1.0 / slant);
        ([rho * cs, rho * sn, z], n)
    } else {
        let (x, y) = disc(rng, ROUND_RADIUS);
        ([x, y, -ROUND_HALF_HEIGHT], [0.0, 0.0, -1.0])
    }
}

fn sample_torus<R: Rng>(rng: &mut R) -> (Point3, Vec3) {
    // tube angle density ∝ (R + r cos θ): rejection sampling
    let theta = loop {
        let t = TAU * unit(rng);
        if unit(rng) * (TORUS_MAJOR + TORUS_MINOR) <= TORUS_MAJOR + TORUS_MINOR * t.cos() {
            break t;
        }
    };
    let phi = TAU * unit(rng);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let ring = TORUS_MAJOR + TORUS_MINOR * ct;
    ([ring * cp, ring * sp, TORUS_MINOR * st], [ct * cp, ct * sp, st])
}

/// Residual of the analytic surface equation at `p` (zero on the surface).
pub fn surface_residual(kind: ShapeKind, p: &Point3) -> f64 {
    match kind {
        ShapeKind::Sphere => linalg3::norm(p) - SPHERE_RADIUS,
        ShapeKind::Cube => {
            let m = p.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            m - CUBE_HALF_EXTENT
        }
        ShapeKind::Cylinder => {
            let rho = p[0].hypot(p[1]);
            let side = (rho - ROUND_RADIUS).abs().max(0.0);
            let cap = (p[2].abs() - ROUND_HALF_HEIGHT).abs();
            if p[2].abs() < ROUND_HALF_HEIGHT - 1e-12 {
                side
            } else if rho < ROUND_RADIUS - 1e-12 {
                cap
            } else {
                side.min(cap)
            }
        }
        ShapeKind::Cone => {
            let rho = p[0].hypot(p[1]);
            let height = 2.0 * ROUND_HALF_HEIGHT;
            let lateral = rho - ROUND_RADIUS * (ROUND_HALF_HEIGHT - p[2]) / height;
            let base = p[2] + ROUND_HALF_HEIGHT;
            if base.abs() < 1e-12 && rho <= ROUND_RADIUS + 1e-12 {
                0.0
            } else {
                lateral
            }
        }
        ShapeKind::Torus => {
            let rho = p[0].hypot(p[1]);
            (rho - TORUS_MAJOR).hypot(p[2]) - TORUS_MINOR
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationMode {
    None,
    #[serde(rename = "z")]
    ZOnly,
    Arbitrary,
}

impl RotationMode {
    pub fn name(self) -> &'static str {
        match self {
            RotationMode::None => "none",
            RotationMode::ZOnly => "z",
            RotationMode::Arbitrary => "arbitrary",
        }
    }
}

impl fmt::Display for RotationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RotationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RotationMode::None),
            "z" | "z-only" | "z_only" => Ok(RotationMode::ZOnly),
            "arbitrary" | "ar" | "so3" => Ok(RotationMode::Arbitrary),
            _ => Err(Error::InvalidConfig(format!("unknown rotation mode {s:?}"))),
        }
    }
}

pub fn random_rotation(seed: Seed, mode: RotationMode) -> Rotation3 {
    random_rotation_with(&mut seed.rng(), mode)
}

/// `ZOnly`: uniform angle about +z. `Arbitrary`: Haar-uniform over SO(3) via
/// a uniformly distributed unit quaternion.
pub fn random_rotation_with<R: Rng>(rng: &mut R, mode: RotationMode) -> Rotation3 {
    match mode {
        RotationMode::None => Rotation3::identity(),
        RotationMode::ZOnly => Rotation3::about_z(TAU * unit(rng)),
        RotationMode::Arbitrary => {
            // Shoemake's subgroup algorithm
            let (u1, u2, u3) = (unit(rng), unit(rng), unit(rng));
            let a = (1.0 - u1).sqrt();
            let b = u1.sqrt();
            let (s2, c2) = (TAU * u2).sin_cos();
            let (s3, c3) = (TAU * u3).sin_cos();
            Rotation3::from_quaternion([b * c3, a * s2, a * c2, b * s3])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub cloud: PointCloud,
    pub label: usize,
    pub seed: Seed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    pub split: Split,
    pub per_class_counts: Vec<usize>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Shape parameters shared by every sample of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetTemplate {
    pub kinds: Vec<ShapeKind>,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub with_normals: bool,
}

impl Default for DatasetTemplate {
    fn default() -> Self {
        Self {
            kinds: ShapeKind::ALL.to_vec(),
            n_points: 512,
            noise_sigma: 0.01,
            with_normals: false,
        }
    }
}

/// Stratified train/test split. Every class contributes
/// `round(per_class * train_fraction)` training samples; each sample has its
/// own derived seed.
pub fn make_dataset(
    per_class: usize,
    template: &DatasetTemplate,
    train_fraction: f64,
    seed: Seed,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if per_class == 0 {
        return Err(Error::BadCount {
            what: "samples per class",
            count: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    if template.kinds.is_empty() {
        return Err(Error::InvalidConfig("dataset needs at least one shape kind".into()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidConfig(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let n_train = (per_class as f64 * train_fraction).round() as usize;
    let class_names: Vec<String> = template.kinds.iter().map(|k| k.name().to_string()).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, &kind) in template.kinds.iter().enumerate() {
        for i in 0..per_class {
            let sample_seed = seed.derive((label * per_class + i) as u64);
            let cloud = gen_shape(&ShapeSpec {
                kind,
                n_points: template.n_points,
                noise_sigma: template.noise_sigma,
                with_normals: template.with_normals,
                seed: sample_seed,
            })?;
            let sample = Sample {
                cloud,
                label,
                seed: sample_seed,
            };
            if i < n_train {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }
    let k = template.kinds.len();
    Ok((
        LabeledDataset {
            samples: train,
            class_names: class_names.clone(),
            split: Split::Train,
            per_class_counts: vec![n_train; k],
        },
        LabeledDataset {
            samples: test,
            class_names,
            split: Split::Test,
            per_class_counts: vec![per_class - n_train; k],
        },
    ))
}
