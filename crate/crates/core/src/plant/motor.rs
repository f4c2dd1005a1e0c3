//! Armature circuit of one gear-motor.

use crate::model::MotorParams;

/// `di/dt = (v - K_v shaft_speed - R_m i) / L_m`.
pub fn current_derivative(current: f64, shaft_speed: f64, voltage: f64, p: &MotorParams) -> f64 {
    (voltage - p.back_emf_constant * shaft_speed - p.terminal_resistance * current) / p.terminal_inductance
}

/// Shaft acceleration of an unloaded gear-motor, `n^2 T_m / (I_l + n^2 I_R)`.
pub fn free_shaft_acceleration(shaft_torque: f64, p: &MotorParams) -> f64 {
    p.gear_ratio * p.gear_ratio * shaft_torque / p.reflected_inertia()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorStep {
    pub current: f64,
    /// `K_v i` at the motor shaft.
    pub shaft_torque: f64,
    /// `n K_v i` after the gear.
    pub wheel_torque: f64,
}

/// One RK4 step of the armature current with the shaft speed held fixed.
pub fn motor_step(current: f64, shaft_speed: f64, voltage: f64, p: &MotorParams, dt: f64) -> MotorStep {
    let f = |i: f64| current_derivative(i, shaft_speed, voltage, p);
    let k1 = f(current);
    let k2 = f(current + 0.5 * dt * k1);
    let k3 = f(current + 0.5 * dt * k2);
    let k4 = f(current + dt * k3);
    let i = current + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    MotorStep {
        current: i,
        shaft_torque: p.back_emf_constant * i,
        wheel_torque: p.gear_ratio * p.back_emf_constant * i,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MotorParams {
        MotorParams {
            terminal_resistance: 2.0,
            terminal_inductance: 5e-4,
            back_emf_constant: 0.0069231,
            gear_ratio: 26.0,
            load_inertia: 2e-5,
            rotor_inertia: 8.5e-7,
            nominal_voltage: 12.0,
            rated_power: 20.0,
            voltage_limit: 12.0,
        }
    }

    #[test]
    fn back_emf_balance() {
        let p = params();
        let w = 150.0;
        assert_eq!(current_derivative(0.0, w, p.back_emf_constant * w, &p), 0.0);
    }

    #[test]
    fn steady_state_current() {
        let p = params();
        let (v, w) = (6.0, 100.0);
        let i_ss = (v - p.back_emf_constant * w) / p.terminal_resistance;
        assert!(current_derivative(i_ss, w, v, &p).abs() < 1e-9);
    }

    #[test]
    fn locked_rotor_rise_matches_first_order_solution() {
        let p = params();
        let tau = p.electrical_time_constant();
        let dt = tau / 100.0;
        let v = 5.0;
        let i_inf = v / p.terminal_resistance;
        let mut i = 0.0;
        let mut worst: f64 = 0.0;
        for k in 1..=800 {
            i = motor_step(i, 0.0, v, &p, dt).current;
            let exact = i_inf * (1.0 - (-(k as f64) * dt / tau).exp());
            worst = worst.max((i - exact).abs() / i_inf);
        }
        assert!(worst <= 1e-3, "relative error {worst}");
    }

    #[test]
    fn torque_chain() {
        let p = params();
        let s = motor_step(1.0, 0.0, p.terminal_resistance, &p, 1e-6);
        assert!((s.wheel_torque - p.gear_ratio * s.shaft_torque).abs() < 1e-15);
        let acc = free_shaft_acceleration(0.01, &p);
        assert!((acc - 676.0 * 0.01 / (2e-5 + 676.0 * 8.5e-7)).abs() < 1e-9);
    }
}
