use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::ImuSample;

/// Attitude estimate plus the filter's integral correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeEstimate {
    /// Body-to-world rotation, `(w, i, j, k)`.
    pub quaternion: Quaternion<f64>,
    pub phi_hat: f64,
    pub psi_hat: f64,
    /// Accumulated `ki * int(e)`; tends to minus the gyro bias.
    pub integral: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahonyGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for MahonyGains {
    fn default() -> Self {
        Self { kp: 1.0, ki: 0.1 }
    }
}

/// Roll and pitch of `q` for `R = R_y(psi) R_x(phi)`.
pub fn roll_pitch(q: &Quaternion<f64>) -> (f64, f64) {
    let r = UnitQuaternion::new_unchecked(*q).to_rotation_matrix();
    let m = r.matrix();
    let phi = m[(2, 1)].atan2(m[(2, 2)]);
    let psi = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    (phi, psi)
}

impl AttitudeEstimate {
    pub fn from_angles(phi: f64, psi: f64) -> Self {
        let q = UnitQuaternion::from_euler_angles(phi, psi, 0.0).into_inner();
        Self {
            quaternion: q,
            phi_hat: phi,
            psi_hat: psi,
            integral: [0.0; 3],
        }
    }

    /// Roll and pitch implied by a gravity reading alone.
    pub fn from_accel(accel: &[f64; 3]) -> Self {
        let [ax, ay, az] = *accel;
        let phi = (-ay).atan2(-az);
        let psi = ax.atan2(ay.hypot(az));
        Self::from_angles(phi, psi)
    }

    /// Estimated up direction in body coordinates.
    fn up_in_body(&self) -> Vector3<f64> {
        let q = UnitQuaternion::new_unchecked(self.quaternion);
        q.inverse_transform_vector(&Vector3::z())
    }

    pub fn body_rate_estimate(&self, gyro: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| gyro[i] + self.integral[i])
    }
}

/// One complementary-filter update.
///
/// The measured up direction `a = -accel / |accel|` is compared with the
/// estimate's `v = R^T z`; the error `e = a x v` corrects the gyro rate as
/// `omega + kp e + ki int(e)`. The quaternion is advanced by the exact
/// rotation of the corrected rate over `dt` and renormalized.
pub fn mahony_update(est: &AttitudeEstimate, s: &ImuSample, gains: &MahonyGains, dt: f64) -> AttitudeEstimate {
    let mut next = *est;
    let gyro = Vector3::from(s.gyro);
    let accel = Vector3::from(s.accel);
    let mut omega = gyro;
    let norm = accel.norm();
    if norm > 0.0 && norm.is_finite() {
        let a = -accel / norm;
        let e = a.cross(&est.up_in_body());
        if gains.ki > 0.0 {
            for i in 0..3 {
                next.integral[i] += gains.ki * e[i] * dt;
            }
        }
        omega += e * gains.kp + Vector3::from(next.integral);
    } else {
        omega += Vector3::from(next.integral);
    }
    let angle = omega.norm() * dt;
    let dq = if angle > 0.0 {
        let axis = omega / omega.norm();
        let (s, c) = (0.5 * angle).sin_cos();
        Quaternion::new(c, axis.x * s, axis.y * s, axis.z * s)
    } else {
        Quaternion::identity()
    };
    let q = est.quaternion * dq;
    next.quaternion = q / q.norm();
    (next.phi_hat, next.psi_hat) = roll_pitch(&next.quaternion);
    next
}
