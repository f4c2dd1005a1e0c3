use nalgebra::{Matrix3, Vector3};

use super::{drag_force, PlantModel, PlantState};

/// State derivative together with what happened at the contacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    /// Time derivative; the motor-current entries are zero here and are
    /// filled in by the electrical model.
    pub state: PlantState,
    /// Contact force along each wheel's rolling direction.
    pub traction: [f64; 3],
    pub rolling: [bool; 3],
    /// Any wheel slipping or asked for more than `mu_s F_N`.
    pub slip: bool,
}

/// Generalized forces from gravity, joint damping and drag.
fn applied_forces(x: &PlantState, m: &PlantModel) -> Vector3<f64> {
    let [xc, yc, zc] = m.com_offset;
    let (sp, cp) = x.phi.sin_cos();
    let (ss, cs) = x.psi.sin_cos();
    let mg = m.mass * m.gravity;
    let mg_axis = mg * m.pipe_incline.cos();
    let axial = -mg * m.pipe_incline.sin() + drag_force(x.v, &m.drag) - m.damping[0] * x.v;
    let roll = -mg_axis * (yc * cp - zc * sp) * cs - m.damping[1] * x.phi_dot;
    let pitch = mg_axis * (xc * cs + (yc * sp + zc * cp) * ss) - m.damping[2] * x.psi_dot;
    Vector3::new(axial, roll, pitch)
}

/// Solves the body acceleration with the wheels in `stick` rolling and the
/// others transmitting the fixed forces in `kinetic`.
fn solve(
    m: &PlantModel,
    q_forces: &Vector3<f64>,
    torques: &[f64; 3],
    stick: &[bool; 3],
    kinetic: &[f64; 3],
) -> (Vector3<f64>, [f64; 3]) {
    let j = m.jacobian();
    let r = m.wheel_radius;
    let iw = m.wheel_inertia();
    let mut lhs: Matrix3<f64> = m.mass_matrix();
    let mut rhs = *q_forces;
    for i in 0..3 {
        let row = j.row(i).transpose();
        if stick[i] {
            lhs += row * row.transpose() * (iw / (r * r));
            rhs += row * (torques[i] / r);
        } else {
            rhs += row * kinetic[i];
        }
    }
    let q_ddot = lhs.lu().solve(&rhs).unwrap_or_else(|| Vector3::repeat(f64::NAN));
    let traction = std::array::from_fn(|i| {
        if stick[i] {
            (torques[i] - iw * j.row(i).dot(&q_ddot.transpose()) / r) / r
        } else {
            kinetic[i]
        }
    });
    (q_ddot, traction)
}

/// Traction each wheel would need to keep all three rolling under
/// `torques`.
pub fn rolling_traction(x: &PlantState, torques: &[f64; 3], m: &PlantModel) -> [f64; 3] {
    solve(m, &applied_forces(x, m), torques, &[true; 3], &[0.0; 3]).1
}

/// Mechanical state derivative under wheel torques `torques`.
///
/// Wheels whose rim speed matches the ground roll; their traction follows
/// from the rolling constraint. A rolling wheel whose required traction
/// exceeds `mu_s F_N` is switched to sliding with the traction saturated at
/// that limit, and the remaining wheels are re-solved. Wheels already
/// sliding transmit `mu_s F_N` against their slip velocity.
pub fn plant_derivative(x: &PlantState, torques: &[f64; 3], m: &PlantModel) -> Derivative {
    let limit = m.friction.max_traction();
    let slip_v = x.slip_velocities(m);
    let mut stick = [true; 3];
    let mut kinetic = [0.0; 3];
    for i in 0..3 {
        if slip_v[i].abs() > m.rolling_tolerance {
            stick[i] = false;
            kinetic[i] = limit * slip_v[i].signum();
        }
    }
    let q_forces = applied_forces(x, m);
    let mut slip = stick.iter().any(|s| !s);
    let (mut q_ddot, mut traction) = solve(m, &q_forces, torques, &stick, &kinetic);
    for _ in 0..3 {
        let mut changed = false;
        for i in 0..3 {
            if stick[i] && traction[i].abs() > limit {
                stick[i] = false;
                kinetic[i] = limit * traction[i].signum();
                changed = true;
            }
        }
        if !changed {
            break;
        }
        slip = true;
        (q_ddot, traction) = solve(m, &q_forces, torques, &stick, &kinetic);
    }

    let j = m.jacobian();
    let r = m.wheel_radius;
    let iw = m.wheel_inertia();
    let wheel_acc = std::array::from_fn(|i| {
        if stick[i] {
            j.row(i).dot(&q_ddot.transpose()) / r
        } else {
            (torques[i] - r * traction[i]) / iw
        }
    });
    Derivative {
        state: PlantState {
            s: x.v,
            v: q_ddot[0],
            phi: x.phi_dot,
            phi_dot: q_ddot[1],
            psi: x.psi_dot,
            psi_dot: q_ddot[2],
            wheel_speeds: wheel_acc,
            wheel_angles: x.wheel_speeds,
            motor_currents: [0.0; 3],
        },
        traction,
        rolling: stick,
        slip,
    }
}

/// Mechanical plus magnetic energy, with potential energy measured from the
/// centred, level pose.
pub fn energy(x: &PlantState, m: &PlantModel) -> f64 {
    let qd = x.q_dot();
    let kinetic = 0.5 * qd.dot(&(m.mass_matrix() * qd))
        + 0.5 * m.wheel_inertia() * x.wheel_speeds.iter().map(|w| w * w).sum::<f64>();
    let [xc, yc, zc] = m.com_offset;
    let (sp, cp) = x.phi.sin_cos();
    let (ss, cs) = x.psi.sin_cos();
    let height = -xc * ss + (yc * sp + zc * cp) * cs;
    let mg = m.mass * m.gravity;
    let potential = mg * m.pipe_incline.cos() * height + mg * m.pipe_incline.sin() * x.s;
    let magnetic = 0.5 * m.motor.terminal_inductance * x.motor_currents.iter().map(|i| i * i).sum::<f64>();
    kinetic + potential + magnetic
}
