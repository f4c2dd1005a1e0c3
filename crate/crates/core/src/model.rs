//! Shared robot description: arm geometry, gear-motor constants and wheel
//! friction. All values are SI.

use thiserror::Error;

/// Violated type invariant, reported by name.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid {ty}: {invariant}")]
pub struct ValidationError {
    pub ty: &'static str,
    pub invariant: String,
}

impl ValidationError {
    pub(crate) fn new(ty: &'static str, invariant: impl Into<String>) -> Self {
        Self {
            ty,
            invariant: invariant.into(),
        }
    }
}

fn require(ty: &'static str, ok: bool, invariant: &str) -> Result<(), ValidationError> {
    if ok {
        Ok(())
    } else {
        Err(ValidationError::new(ty, invariant))
    }
}

/// Arm and body dimensions of the robot.
///
/// `arm_length_a` runs from the arm pivot O to the spring anchor on the arm,
/// `pivot_offset_t` is the distance from O to the spring anchor on the body,
/// and `contact_arm_length` is the pivot-to-contact length that sets the
/// reachable pipe radius through `H = L sin(beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotGeometry {
    pub arm_length_a: f64,
    pub pivot_offset_t: f64,
    pub contact_arm_length: f64,
    pub wheel_radius: f64,
    pub robot_mass: f64,
    pub pipe_radius_min: f64,
    pub pipe_radius_max: f64,
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), ValidationError> {
        const T: &str = "RobotGeometry";
        let lengths = [
            self.arm_length_a,
            self.pivot_offset_t,
            self.contact_arm_length,
            self.wheel_radius,
            self.pipe_radius_min,
            self.pipe_radius_max,
        ];
        require(
            T,
            lengths.iter().all(|l| l.is_finite() && *l > 0.0),
            "all lengths > 0",
        )?;
        require(
            T,
            self.robot_mass.is_finite() && self.robot_mass > 0.0,
            "robot mass > 0",
        )?;
        require(
            T,
            self.pipe_radius_min < self.pipe_radius_max,
            "pipe_radius_min < pipe_radius_max",
        )?;
        require(
            T,
            self.pivot_offset_t < self.arm_length_a,
            "pivot_offset_t < arm_length_a",
        )
    }
}

/// Electrical and drivetrain constants of one gear-motor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    pub terminal_resistance: f64,
    pub terminal_inductance: f64,
    /// Back-EMF constant, equal to the torque constant in SI.
    pub back_emf_constant: f64,
    pub gear_ratio: f64,
    pub load_inertia: f64,
    pub rotor_inertia: f64,
    pub nominal_voltage: f64,
    pub rated_power: f64,
    pub voltage_limit: f64,
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let all = [
            self.terminal_resistance,
            self.terminal_inductance,
            self.back_emf_constant,
            self.gear_ratio,
            self.load_inertia,
            self.rotor_inertia,
            self.nominal_voltage,
            self.rated_power,
            self.voltage_limit,
        ];
        require(
            "MotorParams",
            all.iter().all(|v| v.is_finite() && *v > 0.0),
            "all motor constants > 0",
        )
    }

    /// Electrical time constant L/R.
    pub fn electrical_time_constant(&self) -> f64 {
        self.terminal_inductance / self.terminal_resistance
    }

    /// Drivetrain inertia seen at the gear output, `I_l + n^2 I_R`.
    pub fn reflected_inertia(&self) -> f64 {
        self.load_inertia + self.gear_ratio * self.gear_ratio * self.rotor_inertia
    }
}

/// Dry Coulomb contact between wheel and pipe wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionModel {
    pub mu_s: f64,
    pub normal_force: f64,
}

impl FrictionModel {
    pub fn validate(&self) -> Result<(), ValidationError> {
        const T: &str = "FrictionModel";
        require(T, self.mu_s > 0.0 && self.mu_s <= 2.0, "0 < mu_s <= 2")?;
        require(
            T,
            self.normal_force.is_finite() && self.normal_force > 0.0,
            "normal_force > 0",
        )
    }

    /// Largest traction a wheel transmits before slipping.
    pub fn max_traction(&self) -> f64 {
        self.mu_s * self.normal_force
    }
}
