//! Simulated sensors and the estimators fed by them.

mod encoder;
mod imu;
mod mahony;

pub use encoder::{encoder_sense, encoder_velocity, encoder_velocity_at, EncoderStream, MedianFilter};
pub use imu::{body_rates, gravity_in_body, imu_sense, ImuNoise, ImuSample};
pub use mahony::{mahony_update, roll_pitch, AttitudeEstimate, MahonyGains};

/// Euler rates `(phi_dot, psi_dot)` from body rates at roll `phi`.
pub fn euler_rates(body: &[f64; 3], phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (body[0], body[1] * c - body[2] * s)
}
