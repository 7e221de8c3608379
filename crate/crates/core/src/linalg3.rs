//! Dense 3×3 linear algebra.
//!
//! Matrices are row-major `[[f64; 3]; 3]`. Everything here is deterministic:
//! the same input always produces bit-identical output.

use crate::error::{Error, Result};
use crate::geometry::OrthogonalFrame;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
pub const ZERO: Mat3 = [[0.0; 3]; 3];

const MAX_SWEEPS: usize = 50;
const OFF_DIAGONAL_TOL: f64 = 1e-14;
const GAP_EPS: f64 = 1e-300;

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// `mᵀ v`
#[inline]
pub fn mat_t_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut t = ZERO;
    for (i, row) in m.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            t[j][i] = x;
        }
    }
    t
}

pub fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = ZERO;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn det3(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn column(m: &Mat3, k: usize) -> Vec3 {
    [m[0][k], m[1][k], m[2][k]]
}

pub fn from_columns(c0: &Vec3, c1: &Vec3, c2: &Vec3) -> Mat3 {
    [
        [c0[0], c1[0], c2[0]],
        [c0[1], c1[1], c2[1]],
        [c0[2], c1[2], c2[2]],
    ]
}

pub fn diag(d: &Vec3) -> Mat3 {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut d = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

pub fn trace(m: &Mat3) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

pub fn is_finite(m: &Mat3) -> bool {
    m.iter().flatten().all(|x| x.is_finite())
}

/// `Σ x xᵀ` over the given columns. Only the upper triangle is accumulated;
/// the lower triangle is copied, so the result is exactly symmetric.
pub fn outer_accumulate<'a, I>(columns: I) -> Mat3
where
    I: IntoIterator<Item = &'a Vec3>,
{
    let mut m = ZERO;
    for x in columns {
        for i in 0..3 {
            for j in i..3 {
                m[i][j] += x[i] * x[j];
            }
        }
    }
    m[1][0] = m[0][1];
    m[2][0] = m[0][2];
    m[2][1] = m[1][2];
    m
}

/// Symmetric eigendecomposition with descending eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition3 {
    pub eigenvalues: [f64; 3],
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: OrthogonalFrame,
    /// `(λ1−λ2)/max(λ1,ε)` and `(λ2−λ3)/max(λ1,ε)`.
    pub gap_ratios: [f64; 2],
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3×3 matrix.
///
/// The input is symmetrized by averaging with its transpose. Each eigenvector
/// is signed so that its largest-magnitude component is positive; callers
/// that need a different orientation rule re-sign the columns themselves.
pub fn sym_eig3(a: &Mat3) -> Result<EigenDecomposition3> {
    if !is_finite(a) {
        return Err(Error::NonFinite("sym_eig3 input"));
    }
    let mut m = ZERO;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    let fro = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = IDENTITY;

    if fro > 0.0 {
        let threshold = OFF_DIAGONAL_TOL * fro;
        for _ in 0..MAX_SWEEPS {
            let off = m[0][1].abs().max(m[0][2].abs()).max(m[1][2].abs());
            if off <= threshold {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                let mut j = IDENTITY;
                j[p][p] = c;
                j[q][q] = c;
                j[p][q] = s;
                j[q][p] = -s;
                m = matmul3(&matmul3(&transpose(&j), &m), &j);
                m[p][q] = 0.0;
                m[q][p] = 0.0;
                v = matmul3(&v, &j);
            }
        }
    }

    let mut order = [0usize, 1, 2];
    // stable: ties keep sweep order
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let eigenvalues = [m[order[0]][order[0]], m[order[1]][order[1]], m[order[2]][order[2]]];
    let cols: Vec<Vec3> = order
        .iter()
        .map(|&k| canonical_sign(column(&v, k)))
        .collect();
    let eigenvectors = OrthogonalFrame::from_matrix_unchecked(from_columns(&cols[0], &cols[1], &cols[2]));

    let denom = eigenvalues[0].max(GAP_EPS);
    let gap_ratios = [
        (eigenvalues[0] - eigenvalues[1]) / denom,
        (eigenvalues[1] - eigenvalues[2]) / denom,
    ];
    Ok(EigenDecomposition3 {
        eigenvalues,
        eigenvectors,
        gap_ratios,
    })
}

/// Flip `v` so its largest-magnitude component (first one on ties) is positive.
pub fn canonical_sign(v: Vec3) -> Vec3 {
    let mut k = 0;
    for i in 1..3 {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        scale(&v, -1.0)
    } else {
        v
    }
}

/// Singular value decomposition `a = u · diag(sigma) · vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Svd3 {
    pub u: OrthogonalFrame,
    /// Non-negative, descending.
    pub sigma: [f64; 3],
    pub v: OrthogonalFrame,
}

impl Svd3 {
    pub fn reconstruct(&self) -> Mat3 {
        matmul3(
            &matmul3(self.u.matrix(), &diag(&self.sigma)),
            &transpose(self.v.matrix()),
        )
    }
}

/// SVD via the eigendecomposition of `aᵀa`; left vectors are recovered from
/// `a·v_k` and completed by Gram–Schmidt / cross product where `a·v_k`
/// carries no usable direction.
pub fn svd3(a: &Mat3) -> Result<Svd3> {
    if !is_finite(a) {
        return Err(Error::NonFinite("svd3 input"));
    }
    let ata = matmul3(&transpose(a), a);
    let eig = sym_eig3(&ata)?;
    let vm = *eig.eigenvectors.matrix();
    let v: [Vec3; 3] = [column(&vm, 0), column(&vm, 1), column(&vm, 2)];
    let av: [Vec3; 3] = [mat_vec(a, &v[0]), mat_vec(a, &v[1]), mat_vec(a, &v[2])];

    let scale_ref = max_abs(a).max(f64::MIN_POSITIVE);
    let tiny = 1e-13 * scale_ref;

    let u0 = if norm(&av[0]) > tiny {
        scale(&av[0], 1.0 / norm(&av[0]))
    } else {
        [1.0, 0.0, 0.0]
    };
    let mut w = sub(&av[1], &scale(&u0, dot(&u0, &av[1])));
    if norm(&w) <= tiny {
        w = any_orthogonal(&u0);
    }
    let u1 = scale(&w, 1.0 / norm(&w));
    let mut u2 = cross(&u0, &u1);
    if dot(&u2, &av[2]) < 0.0 {
        u2 = scale(&u2, -1.0);
    }
    let u = [u0, u1, u2];

    let mut sigma = [0.0; 3];
    for k in 0..3 {
        sigma[k] = dot(&u[k], &av[k]).max(0.0);
    }
    if sigma[1] > sigma[0] {
        sigma[1] = sigma[0];
    }
    if sigma[2] > sigma[1] {
        sigma[2] = sigma[1];
    }
    Ok(Svd3 {
        u: OrthogonalFrame::from_matrix_unchecked(from_columns(&u0, &u1, &u2)),
        sigma,
        v: OrthogonalFrame::from_matrix_unchecked(vm),
    })
}

/// A unit vector orthogonal to the unit vector `a`.
fn any_orthogonal(a: &Vec3) -> Vec3 {
    let axis = if a[0].abs() <= a[1].abs() && a[0].abs() <= a[2].abs() {
        [1.0, 0.0, 0.0]
    } else if a[1].abs() <= a[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let c = cross(a, &axis);
    scale(&c, 1.0 / norm(&c))
}
