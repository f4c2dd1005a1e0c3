//! LQR stabilizer, per-wheel PID velocity loops and their combination.

mod lyapunov;
mod pid;
mod riccati;

pub use lyapunov::solve_lyapunov;
pub use pid::{pid_step, PidState};
pub use riccati::{
    bass_gain, riccati_residual, solve_riccati, spectral_abscissa, uncontrollable_mode, unobservable_mode, LqrGain,
    LqrWeights, SynthesisError,
};

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::model::MotorParams;
use crate::plant::LinearizedSystem;

/// `u2 = -K x2`.
pub fn lqr_control(gain: &LqrGain, x2_hat: &[f64; 4]) -> [f64; 3] {
    let u = -(&gain.k * DVector::from_column_slice(x2_hat));
    [u[0], u[1], u[2]]
}

/// LQR synthesis on the stabilizing subsystem.
pub fn design_lqr(lin: &LinearizedSystem, w: &LqrWeights) -> Result<LqrGain, SynthesisError> {
    let a = DMatrix::from_column_slice(4, 4, lin.a2.as_slice());
    let b = DMatrix::from_column_slice(4, 3, lin.b2.as_slice());
    solve_riccati(&a, &b, w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    /// Wheel angular speed references, rad/s.
    pub wheel_speeds: [f64; 3],
    /// Stabilizing-state reference; always the centred pose.
    pub x2: [f64; 4],
    /// Set when the requested speed was outside the envelope.
    pub clamped: bool,
}

/// Straight-pipe references: every wheel turns at `V_d / R`.
pub fn trajectory_generator(v_d: f64, wheel_radius: f64, speed_limit: f64) -> Reference {
    let v = v_d.clamp(-speed_limit, speed_limit);
    Reference {
        wheel_speeds: [v / wheel_radius; 3],
        x2: [0.0; 4],
        clamped: v != v_d,
    }
}

/// Terminal voltage that produces wheel torque `torque` at wheel speed
/// `wheel_speed` in steady state: `R_m T / (n K_v) + K_v n omega`.
pub fn torque_to_voltage(torque: f64, wheel_speed: f64, m: &MotorParams) -> f64 {
    let kt = m.gear_ratio * m.back_emf_constant;
    m.terminal_resistance * torque / kt + kt * wheel_speed
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub u_lqr: [f64; 3],
    pub u_pid: [f64; 3],
    pub u_total: [f64; 3],
    pub saturated: [bool; 3],
    pub reference_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
}

/// Stabilizer plus velocity loops with per-wheel integrator state.
///
/// The velocity loops only see the part of the wheel-speed error that
/// corresponds to axial motion, and each channel's error is weighted by the
/// wheel's share of a torque split that produces pure axial force. Without
/// this the integrators would also accumulate roll and pitch motion and
/// hold the body away from the centred pose.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedController {
    pub gain: LqrGain,
    pub trim: [f64; 3],
    pub motor: MotorParams,
    pub wheel_radius: f64,
    pub speed_limit: f64,
    pub pids: [PidState; 3],
    /// First row of the inverse contact Jacobian: axial speed from rim
    /// speeds.
    pub drive_row: [f64; 3],
    /// Axial-force torque split, normalized to mean 1.
    pub drive_split: [f64; 3],
}

/// `(drive_row, drive_split)` for a contact Jacobian. The first row of
/// `J^-1` both recovers the axial speed and, read as wheel forces, gives
/// the generalized force `J^T f = (1, 0, 0)`.
pub fn drive_direction(jacobian: &Matrix3<f64>) -> Option<([f64; 3], [f64; 3])> {
    let inv = jacobian.try_inverse()?;
    let row = [inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]];
    let mean = row.iter().sum::<f64>() / 3.0;
    if !(mean.abs() > 1e-12) {
        return None;
    }
    Some((row, row.map(|r| r / mean)))
}

impl CombinedController {
    pub fn new(
        gain: LqrGain,
        trim: [f64; 3],
        motor: MotorParams,
        wheel_radius: f64,
        speed_limit: f64,
        pid: PidGains,
        jacobian: &Matrix3<f64>,
    ) -> Self {
        let p = PidState::new(pid.kp, pid.ki, pid.kd, motor.voltage_limit, pid.integral_limit);
        let (drive_row, drive_split) = drive_direction(jacobian).unwrap_or(([1.0 / 3.0; 3], [1.0; 3]));
        Self {
            gain,
            trim,
            motor,
            wheel_radius,
            speed_limit,
            pids: [p; 3],
            drive_row,
            drive_split,
        }
    }

    /// One control tick. The LQR torque `u0 - K x2` goes through the static
    /// motor map, the PID voltage is added and the sum clamped to the
    /// voltage limit. A channel that saturates keeps its previous integral.
    pub fn step(&mut self, x2_hat: &[f64; 4], wheel_speed_hat: &[f64; 3], v_d: f64, dt: f64) -> ControllerOutput {
        let reference = trajectory_generator(v_d, self.wheel_radius, self.speed_limit);
        let fb = lqr_control(&self.gain, x2_hat);
        let limit = self.motor.voltage_limit;
        let mut out = ControllerOutput {
            u_lqr: [0.0; 3],
            u_pid: [0.0; 3],
            u_total: [0.0; 3],
            saturated: [false; 3],
            reference_clamped: reference.clamped,
        };
        let axial_error: f64 = (0..3)
            .map(|i| self.drive_row[i] * (reference.wheel_speeds[i] - wheel_speed_hat[i]))
            .sum();
        for i in 0..3 {
            let torque = self.trim[i] + fb[i];
            out.u_lqr[i] = torque_to_voltage(torque, wheel_speed_hat[i], &self.motor);
            let error = self.drive_split[i] * axial_error;
            let (u_pid, mut next) = pid_step(&self.pids[i], error, dt);
            let raw = out.u_lqr[i] + u_pid;
            out.saturated[i] = !(raw.abs() <= limit);
            if out.saturated[i] {
                next.integral = self.pids[i].integral;
            }
            out.u_pid[i] = u_pid;
            out.u_total[i] = if raw.is_nan() { 0.0 } else { raw.clamp(-limit, limit) };
            self.pids[i] = next;
        }
        out
    }
}

/// Functional form of [`CombinedController::step`].
pub fn combined_step(
    ctl: &CombinedController,
    x2_hat: &[f64; 4],
    wheel_speed_hat: &[f64; 3],
    v_d: f64,
    dt: f64,
) -> (ControllerOutput, CombinedController) {
    let mut next = ctl.clone();
    let out = next.step(x2_hat, wheel_speed_hat, v_d, dt);
    (out, next)
}
