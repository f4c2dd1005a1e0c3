use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::plant::PlantState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Body rates, rad/s.
    pub gyro: [f64; 3],
    /// Gravity expressed in the body frame, m/s². A level body reads
    /// `(0, 0, -g)`.
    pub accel: [f64; 3],
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuNoise {
    pub gyro_sigma: f64,
    pub accel_sigma: f64,
    pub gyro_bias: [f64; 3],
}

impl ImuNoise {
    pub const NONE: ImuNoise = ImuNoise {
        gyro_sigma: 0.0,
        accel_sigma: 0.0,
        gyro_bias: [0.0; 3],
    };
}

/// Body angular velocity for `R = R_y(psi) R_x(phi)`:
/// `(phi_dot, psi_dot cos phi, -psi_dot sin phi)`.
pub fn body_rates(x: &PlantState) -> [f64; 3] {
    let (s, c) = x.phi.sin_cos();
    [x.phi_dot, x.psi_dot * c, -x.psi_dot * s]
}

/// Gravity `(0, 0, -g)` rotated into the body frame.
pub fn gravity_in_body(phi: f64, psi: f64, g: f64) -> [f64; 3] {
    let (sp, cp) = phi.sin_cos();
    let (ss, cs) = psi.sin_cos();
    [g * ss, -g * cs * sp, -g * cs * cp]
}

/// One IMU reading of the true state with additive Gaussian noise and a
/// constant gyro bias.
pub fn imu_sense<R: Rng + ?Sized>(x: &PlantState, t: f64, gravity: f64, noise: &ImuNoise, rng: &mut R) -> ImuSample {
    let gyro_n = Normal::new(0.0, noise.gyro_sigma).expect("sigma >= 0");
    let accel_n = Normal::new(0.0, noise.accel_sigma).expect("sigma >= 0");
    let w = body_rates(x);
    let a = gravity_in_body(x.phi, x.psi, gravity);
    let gyro = std::array::from_fn(|i| w[i] + noise.gyro_bias[i] + gyro_n.sample(rng));
    let accel = std::array::from_fn(|i| a[i] + accel_n.sample(rng));
    ImuSample {
        gyro,
        accel,
        timestamp: t,
    }
}
