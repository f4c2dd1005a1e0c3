//! Battery sizing by iterating operation duration against discharge time.
//!
//! An operation duration `h` fixes the minimum capacity `C = n P h / V_n`.
//! A battery of that capacity (capped by what physically fits in the
//! robot) is then discharged at the current the motors draw in the extreme
//! flow condition, which yields a new duration. The loop repeats until the
//! duration and the discharge time agree.

use crate::model::{MotorParams, ValidationError};

/// Discharge characteristics shared by a family of cells; the capacity is
/// chosen per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryModel {
    /// Capacity in A·h.
    pub capacity: f64,
    pub nominal_voltage: f64,
    /// `(current A, usable fraction)` pairs, current strictly increasing.
    pub discharge_curve: Vec<(f64, f64)>,
}

impl BatteryModel {
    pub fn validate(&self) -> Result<(), ValidationError> {
        const T: &str = "BatteryModel";
        if !(self.capacity > 0.0) {
            return Err(ValidationError::new(T, "capacity > 0"));
        }
        if self.discharge_curve.is_empty() {
            return Err(ValidationError::new(T, "discharge curve is non-empty"));
        }
        for w in self.discharge_curve.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(ValidationError::new(T, "discharge curve currents strictly increasing"));
            }
            if w[1].1 > w[0].1 {
                return Err(ValidationError::new(T, "usable fraction non-increasing with current"));
            }
        }
        if self
            .discharge_curve
            .iter()
            .any(|&(_, f)| !(f > 0.0 && f <= 1.0))
        {
            return Err(ValidationError::new(T, "usable fraction in (0, 1]"));
        }
        Ok(())
    }

    /// Ideal cell: the whole capacity is usable at any current.
    pub fn flat(capacity: f64, nominal_voltage: f64) -> Self {
        Self {
            capacity,
            nominal_voltage,
            discharge_curve: vec![(0.0, 1.0)],
        }
    }

    pub fn with_capacity(&self, capacity: f64) -> Self {
        Self {
            capacity,
            ..self.clone()
        }
    }

    /// Usable fraction at `current`, linearly interpolated and clamped to
    /// the curve's end values.
    pub fn usable_fraction(&self, current: f64) -> f64 {
        let curve = &self.discharge_curve;
        let first = curve[0];
        let last = curve[curve.len() - 1];
        if current <= first.0 {
            return first.1;
        }
        if current >= last.0 {
            return last.1;
        }
        let i = curve.partition_point(|&(c, _)| c <= current);
        let (c0, f0) = curve[i - 1];
        let (c1, f1) = curve[i];
        f0 + (f1 - f0) * (current - c0) / (c1 - c0)
    }
}

/// A battery family plus the largest capacity that fits the robot.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryFamily {
    pub template: BatteryModel,
    /// Largest capacity (A·h) the battery compartment accepts.
    pub max_capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPlan {
    /// Selected capacity, A·h.
    pub capacity: f64,
    /// Operation duration, hours.
    pub operation_hours: f64,
    /// Discharge time of the selected battery at the extreme draw, hours.
    pub discharge_hours: f64,
    /// Extreme-condition current draw of all motors, A.
    pub current_draw: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: f64,
}

pub const MAX_ITERATIONS: usize = 100;

/// Minimum capacity in A·h for `hours` of operation: `n P h / V_n`.
pub fn min_capacity(hours: f64, motors: &MotorParams, n_motors: usize) -> f64 {
    n_motors as f64 * motors.rated_power * hours / motors.nominal_voltage
}

/// Hours until `battery` is exhausted at a constant `current`.
pub fn discharge_time(battery: &BatteryModel, current: f64) -> f64 {
    battery.usable_fraction(current) * battery.capacity / current
}

/// Total current drawn when each of `n_motors` delivers
/// `peak_torque_per_wheel` at its gear output. Motor torque is
/// `K_v i`, and the gear divides the wheel torque by `n`.
pub fn extreme_current_draw(motors: &MotorParams, peak_torque_per_wheel: f64, n_motors: usize) -> f64 {
    let shaft_torque = peak_torque_per_wheel / motors.gear_ratio;
    n_motors as f64 * shaft_torque / motors.back_emf_constant
}

/// Per-wheel torque needed to push `total_traction` split evenly over
/// `n_wheels` wheels of radius `wheel_radius`.
pub fn wheel_torque_for_traction(total_traction: f64, n_wheels: usize, wheel_radius: f64) -> f64 {
    total_traction / n_wheels as f64 * wheel_radius
}

/// Damped fixed-point iteration `h <- (h + h_new) / 2` on the duration.
///
/// Each pass picks the smaller of the minimum capacity for `h` and the
/// family's size limit, and takes the discharge time at `current_draw` as
/// the new duration. Stops once `|h_new - h| <= tolerance` or after
/// [`MAX_ITERATIONS`].
pub fn size_battery(
    motors: &MotorParams,
    n_motors: usize,
    family: &BatteryFamily,
    current_draw: f64,
    h_initial: f64,
    tolerance: f64,
) -> PowerPlan {
    let select = |h: f64| min_capacity(h, motors, n_motors).min(family.max_capacity);
    let mut h = h_initial;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let capacity = select(h);
        let h_new = discharge_time(&family.template.with_capacity(capacity), current_draw);
        if (h_new - h).abs() <= tolerance || iterations >= MAX_ITERATIONS {
            return PowerPlan {
                capacity,
                operation_hours: h,
                discharge_hours: h_new,
                current_draw,
                iterations,
                converged: (h_new - h).abs() <= tolerance,
                tolerance,
            };
        }
        h = 0.5 * (h + h_new);
    }
}
