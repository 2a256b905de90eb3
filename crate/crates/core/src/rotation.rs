use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3, MAT3_IDENTITY};

/// Tolerance on R^T R = I and det(R) = 1 for accepting a matrix as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// A proper 3x3 rotation matrix (row-major).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct Rotation3(Mat3);

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3(MAT3_IDENTITY)
    }

    /// Validates orthonormality and positive determinant within [`ROTATION_TOL`].
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let defect = rotation_defect(&m);
        if !defect.is_finite() || defect > ROTATION_TOL {
            return Err(Error::NotARotation { defect });
        }
        Ok(Rotation3(m))
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = linalg::norm(axis);
        let (x, y, z) = if n > 0.0 {
            (axis[0] / n, axis[1] / n, axis[2] / n)
        } else {
            (1.0, 0.0, 0.0)
        };
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation3([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Uniformly distributed random rotation (via a normalized quaternion).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if n < 1e-12 {
                continue;
            }
            let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
            return Rotation3([
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
            ]);
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        linalg::mat_vec(&self.0, v)
    }

    /// Inverse rotation (the transpose).
    pub fn inverse(&self) -> Self {
        Rotation3(linalg::transpose(&self.0))
    }

    /// Composition `self * other` (apply `other` first).
    pub fn compose(&self, other: &Rotation3) -> Self {
        Rotation3(linalg::mat_mul(&self.0, &other.0))
    }

    /// Geodesic distance to `other` in radians, in [0, pi].
    ///
    /// Computed as atan2(sin, cos) from the relative rotation, which stays
    /// accurate near zero where the plain acos-of-trace formula loses half
    /// the significant digits.
    pub fn angle_to(&self, other: &Rotation3) -> f64 {
        let rel = linalg::mat_mul(&linalg::transpose(&self.0), &other.0);
        let cos = (rel[0][0] + rel[1][1] + rel[2][2] - 1.0) / 2.0;
        let sin = 0.5
            * ((rel[2][1] - rel[1][2]).powi(2)
                + (rel[0][2] - rel[2][0]).powi(2)
                + (rel[1][0] - rel[0][1]).powi(2))
            .sqrt();
        sin.atan2(cos)
    }

    /// Max-abs deviation from the identity matrix.
    pub fn deviation_from_identity(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - MAT3_IDENTITY[i][j]).abs());
            }
        }
        d
    }
}

fn rotation_defect(m: &Mat3) -> f64 {
    let rtr = linalg::mat_mul(&linalg::transpose(m), m);
    let mut defect: f64 = (linalg::det(m) - 1.0).abs();
    for i in 0..3 {
        for j in 0..3 {
            defect = defect.max((rtr[i][j] - MAT3_IDENTITY[i][j]).abs());
        }
    }
    defect
}

impl TryFrom<Mat3> for Rotation3 {
    type Error = Error;
    fn try_from(m: Mat3) -> Result<Self> {
        Rotation3::from_matrix(m)
    }
}

impl From<Rotation3> for Mat3 {
    fn from(r: Rotation3) -> Mat3 {
        r.0
    }
}
