//! Physical truth for the closed-loop simulation.
//!
//! Generalized coordinates are `q = (s, phi, psi)`: axial travel, roll about
//! the pipe axis and pitch about the body's lateral axis. Three wheels sit on
//! a circle of radius `H` around the axis at azimuths 0°, 120° and 240°
//! (measured from the body's +z axis towards +y), each canted by a small
//! angle so that rolling also produces a circumferential force. Wheel `i`
//! rolls without slip when `R omega_i = J_i q_dot` with
//!
//! `J_i = [cos k_i, H sin k_i, H cos k_i cos g_i]`
//!
//! where `k_i` is the cant and `g_i` the azimuth. Contact forces act on the
//! body as `J^T F`.
//!
//! Orientation is `R = R_y(psi) R_x(phi)` (body to world, world z up). The
//! pipe axis is world x.

mod dynamics;
mod linearize;
mod motor;

pub use dynamics::{energy, plant_derivative, rolling_traction, Derivative};
pub use linearize::{f2, linearize, solve_trim, LinearizeError, LinearizedSystem};
pub use motor::{current_derivative, free_shaft_acceleration, motor_step, MotorStep};

use nalgebra::{Matrix3, SVector, Vector3};
use thiserror::Error;

use crate::model::{FrictionModel, MotorParams};

pub const STATE_DIM: usize = 15;
pub type StateVector = SVector<f64, STATE_DIM>;

/// Wheel azimuths around the pipe axis.
pub const WHEEL_AZIMUTHS: [f64; 3] = [0.0, 2.0 * std::f64::consts::FRAC_PI_3, 4.0 * std::f64::consts::FRAC_PI_3];
/// Cant direction of each wheel; the third wheel is canted the other way.
pub const CANT_SIGNS: [f64; 3] = [1.0, 1.0, -1.0];

/// Quadratic drag from the robot moving relative to the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragModel {
    pub coefficient: f64,
    /// Signed flow speed along the pipe axis.
    pub flow_velocity: f64,
}

/// `F_d = c |v_rel| v_rel` with `v_rel = flow - robot_v`. Positive force
/// pushes the robot towards +s.
pub fn drag_force(robot_v: f64, drag: &DragModel) -> f64 {
    let v_rel = drag.flow_velocity - robot_v;
    drag.coefficient * v_rel.abs() * v_rel
}

/// Everything the plant needs besides its state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub mass: f64,
    pub inertia_phi: f64,
    pub inertia_psi: f64,
    /// Centre of mass in body coordinates, relative to the pipe-axis point
    /// the body rotates about.
    pub com_offset: [f64; 3],
    /// Viscous damping on s, phi and psi.
    pub damping: [f64; 3],
    pub contact_radius: f64,
    pub wheel_radius: f64,
    pub wheel_cant: f64,
    pub gravity: f64,
    /// Pipe slope, positive when +s climbs.
    pub pipe_incline: f64,
    pub drag: DragModel,
    pub friction: FrictionModel,
    pub motor: MotorParams,
    /// Rim-speed mismatch (m/s) above which a wheel counts as slipping.
    pub rolling_tolerance: f64,
}

impl PlantModel {
    /// Contact Jacobian, one row per wheel.
    pub fn jacobian(&self) -> Matrix3<f64> {
        let h = self.contact_radius;
        let mut j = Matrix3::zeros();
        for i in 0..3 {
            let k = CANT_SIGNS[i] * self.wheel_cant;
            j[(i, 0)] = k.cos();
            j[(i, 1)] = h * k.sin();
            j[(i, 2)] = h * k.cos() * WHEEL_AZIMUTHS[i].cos();
        }
        j
    }

    pub fn mass_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.mass, self.inertia_phi, self.inertia_psi))
    }

    /// Drivetrain inertia seen at the wheel.
    pub fn wheel_inertia(&self) -> f64 {
        self.motor.reflected_inertia()
    }

    /// Wheel torque per ampere of motor current.
    pub fn torque_per_amp(&self) -> f64 {
        self.motor.gear_ratio * self.motor.back_emf_constant
    }

    pub fn without_gravity(&self) -> Self {
        Self {
            gravity: 0.0,
            ..self.clone()
        }
    }

    pub fn without_drag(&self) -> Self {
        Self {
            drag: DragModel {
                coefficient: 0.0,
                ..self.drag
            },
            ..self.clone()
        }
    }

    /// Internal RK4 steps per call to [`step`] of length `dt`. One step when
    /// the electrical time constant is long against `dt`; otherwise at
    /// least ten, and enough that each is at most half the time constant.
    pub fn substeps(&self, dt: f64) -> usize {
        let tau = self.motor.electrical_time_constant();
        if tau >= 10.0 * dt {
            1
        } else {
            10usize.max((2.0 * dt / tau).ceil() as usize)
        }
    }
}

/// Full simulation state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub s: f64,
    pub v: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub psi: f64,
    pub psi_dot: f64,
    pub wheel_speeds: [f64; 3],
    /// Accumulated wheel rotation, read by the encoders.
    pub wheel_angles: [f64; 3],
    pub motor_currents: [f64; 3],
}

impl PlantState {
    pub fn zero() -> Self {
        Self::from_vector(&StateVector::zeros())
    }

    /// State with wheel speeds matching the body motion under pure rolling.
    pub fn rolling(model: &PlantModel, s: f64, v: f64, x2: [f64; 4]) -> Self {
        let mut x = Self {
            s,
            v,
            phi: x2[0],
            phi_dot: x2[1],
            psi: x2[2],
            psi_dot: x2[3],
            ..Self::zero()
        };
        x.wheel_speeds = x.rolling_wheel_speeds(model);
        x
    }

    pub fn q(&self) -> Vector3<f64> {
        Vector3::new(self.s, self.phi, self.psi)
    }

    pub fn q_dot(&self) -> Vector3<f64> {
        Vector3::new(self.v, self.phi_dot, self.psi_dot)
    }

    pub fn x2(&self) -> [f64; 4] {
        [self.phi, self.phi_dot, self.psi, self.psi_dot]
    }

    pub fn rolling_wheel_speeds(&self, model: &PlantModel) -> [f64; 3] {
        let w = model.jacobian() * self.q_dot() / model.wheel_radius;
        [w[0], w[1], w[2]]
    }

    /// `R omega_i - J_i q_dot` for each wheel.
    pub fn slip_velocities(&self, model: &PlantModel) -> [f64; 3] {
        let ground = model.jacobian() * self.q_dot();
        std::array::from_fn(|i| model.wheel_radius * self.wheel_speeds[i] - ground[i])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x[0] = self.s;
        x[1] = self.v;
        x[2] = self.phi;
        x[3] = self.phi_dot;
        x[4] = self.psi;
        x[5] = self.psi_dot;
        for i in 0..3 {
            x[6 + i] = self.wheel_speeds[i];
            x[9 + i] = self.wheel_angles[i];
            x[12 + i] = self.motor_currents[i];
        }
        x
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            s: x[0],
            v: x[1],
            phi: x[2],
            phi_dot: x[3],
            psi: x[4],
            psi_dot: x[5],
            wheel_speeds: [x[6], x[7], x[8]],
            wheel_angles: [x[9], x[10], x[11]],
            motor_currents: [x[12], x[13], x[14]],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("plant diverged: non-finite state after step; last finite state {last_finite:?}")]
pub struct DivergenceError {
    pub last_finite: PlantState,
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: PlantState,
    /// Set when any wheel failed to roll during the step.
    pub slip: bool,
}

/// Wheel torques produced by the motor currents of `x`.
pub fn wheel_torques(x: &PlantState, model: &PlantModel) -> [f64; 3] {
    let k = model.torque_per_amp();
    x.motor_currents.map(|i| k * i)
}

/// Coupled electro-mechanical derivative with motor terminal voltages as
/// input.
pub fn coupled_derivative(x: &PlantState, voltages: &[f64; 3], model: &PlantModel) -> (StateVector, bool) {
    let d = plant_derivative(x, &wheel_torques(x, model), model);
    let mut dx = d.state.to_vector();
    for i in 0..3 {
        let shaft_speed = model.motor.gear_ratio * x.wheel_speeds[i];
        dx[12 + i] = current_derivative(x.motor_currents[i], shaft_speed, voltages[i], &model.motor);
    }
    (dx, d.slip)
}

/// Clamps commanded voltages to the motor limit.
pub fn saturate_voltages(u: &[f64; 3], limit: f64) -> [f64; 3] {
    u.map(|v| v.clamp(-limit, limit))
}

/// One RK4 step of length `h` with voltages held constant.
pub fn rk4(x: &PlantState, voltages: &[f64; 3], model: &PlantModel, h: f64) -> (PlantState, bool) {
    let x0 = x.to_vector();
    let eval = |v: &StateVector| coupled_derivative(&PlantState::from_vector(v), voltages, model);
    let (k1, s1) = eval(&x0);
    let (k2, s2) = eval(&(x0 + k1 * (0.5 * h)));
    let (k3, s3) = eval(&(x0 + k2 * (0.5 * h)));
    let (k4, s4) = eval(&(x0 + k3 * h));
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    (PlantState::from_vector(&x1), s1 || s2 || s3 || s4)
}

/// Advances the plant by `dt` with saturated voltages held constant, using
/// [`PlantModel::substeps`] RK4 steps.
pub fn step(x: &PlantState, voltages: &[f64; 3], model: &PlantModel, dt: f64) -> Result<StepOutcome, DivergenceError> {
    step_with_substeps(x, voltages, model, dt, model.substeps(dt))
}

pub fn step_with_substeps(
    x: &PlantState,
    voltages: &[f64; 3],
    model: &PlantModel,
    dt: f64,
    substeps: usize,
) -> Result<StepOutcome, DivergenceError> {
    let u = saturate_voltages(voltages, model.motor.voltage_limit);
    let h = dt / substeps as f64;
    let mut state = *x;
    let mut slip = false;
    for _ in 0..substeps {
        let (next, s) = rk4(&state, &u, model, h);
        if !next.is_finite() {
            return Err(DivergenceError { last_finite: state });
        }
        slip |= s;
        state = next;
    }
    Ok(StepOutcome { state, slip })
}
