//! Minimal fixed-size linear algebra for 3-vectors and 3x3 matrices.
//!
//! The only nontrivial routine is the symmetric 3x3 eigen-decomposition
//! (cyclic Jacobi), which backs the proper-rotation fit used for
//! orientation estimation. Everything is f64 and allocation-free.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn column(m: &Mat3, j: usize) -> Vec3 {
    [m[0][j], m[1][j], m[2][j]]
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as the columns of the returned matrix. Off-diagonal mass
/// is annihilated down to ~1e-15 of the matrix scale, which keeps the
/// rotation fits built on top of this accurate to better than 1e-10.
pub fn sym_eigen3(m: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = *m;
    let mut v = MAT3_IDENTITY;

    let scale_ref: f64 = (0..3)
        .map(|i| (0..3).map(|j| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if scale_ref == 0.0 {
        return ([0.0; 3], v);
    }
    let tol = 1e-15 * scale_ref;

    for _sweep in 0..60 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off < tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq.abs() < tol * 1e-3 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            // A <- J^T A J for the (p,q) Givens rotation J.
            let app = a[p][p];
            let aqq = a[q][q];
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let r = 3 - p - q; // the remaining index
            let arp = a[r][p];
            let arq = a[r][q];
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];

            for i in 0..3 {
                let vip = v[i][p];
                let viq = v[i][q];
                v[i][p] = c * vip - s * viq;
                v[i][q] = s * vip + c * viq;
            }
        }
    }

    // Sort eigenpairs by descending eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let mut vecs = [[0.0; 3]; 3];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..3 {
            vecs[i][dst] = v[i][src];
        }
    }
    (vals, vecs)
}

/// Proper rotation R maximizing tr(R^T H) for a cross-covariance H.
///
/// This is the rotational Procrustes solution: the SVD of H with the
/// determinant sign folded into the smallest singular direction so that
/// det(R) = +1. The decomposition runs through `sym_eigen3` of H^T H;
/// left singular vectors are recovered by applying H and completed with a
/// cross product, which stays well-behaved for rank-2 (planar) inputs.
///
/// Fails with `RankDeficient` when the two largest singular values do not
/// clearly dominate (collinear or empty configurations).
pub fn fit_rotation(h: &Mat3) -> Result<Mat3> {
    let k = mat_mul(&transpose(h), h);
    let (lam, mut v) = sym_eigen3(&k);
    if lam[0] <= 0.0 || lam[1] <= lam[0] * 1e-24 {
        return Err(Error::RankDeficient);
    }
    // Make V a proper rotation so the cross-product completion below is
    // consistent for both factors.
    if det(&v) < 0.0 {
        for row in v.iter_mut() {
            row[2] = -row[2];
        }
    }
    let v1 = column(&v, 0);
    let v2 = column(&v, 1);
    let v3 = column(&v, 2);

    let u1 = {
        let w = mat_vec(h, v1);
        let n = norm(w);
        if n == 0.0 {
            return Err(Error::RankDeficient);
        }
        scale(w, 1.0 / n)
    };
    let u2 = {
        let w = mat_vec(h, v2);
        let w = sub(w, scale(u1, dot(w, u1)));
        let n = norm(w);
        if n <= lam[0].sqrt() * 1e-12 {
            return Err(Error::RankDeficient);
        }
        scale(w, 1.0 / n)
    };
    let u3 = cross(u1, u2);

    // R = U V^T with U = [u1 u2 u3]; both factors proper, so det(R) = +1.
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = u1[i] * v1[j] + u2[i] * v2[j] + u3[i] * v3[j];
        }
    }
    Ok(r)
}
