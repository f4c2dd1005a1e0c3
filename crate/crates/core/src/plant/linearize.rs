//! Trim and numerical linearization of the stabilizing subsystem
//! `x2 = (phi, phi_dot, psi, psi_dot)` about the centred pose.

use nalgebra::{Matrix2x3, Matrix2x4, Matrix3, Matrix4, Matrix4x3, Vector3};
use thiserror::Error;

use super::{plant_derivative, DragModel, PlantModel, PlantState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizeError {
    #[error("no equilibrium: trim residual {residual:e} after {iterations} Newton steps")]
    NoEquilibrium { residual: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub a2: Matrix4<f64>,
    pub b2: Matrix4x3<f64>,
    pub c2: Matrix2x4<f64>,
    pub d2: Matrix2x3<f64>,
    /// Wheel torques holding the body centred and at rest.
    pub trim: [f64; 3],
}

/// Stabilizing-state derivative at rest in s, with wheels rolling.
pub fn f2(model: &PlantModel, x2: &[f64; 4], u: &[f64; 3]) -> [f64; 4] {
    let d = plant_derivative(&PlantState::rolling(model, 0.0, 0.0, *x2), u, model).state;
    [d.phi, d.phi_dot, d.psi, d.psi_dot]
}

fn trim_residual(model: &PlantModel, u: &Vector3<f64>) -> Vector3<f64> {
    let d = plant_derivative(&PlantState::zero(), &[u[0], u[1], u[2]], model).state;
    Vector3::new(d.v, d.phi_dot, d.psi_dot)
}

fn still_water(model: &PlantModel) -> PlantModel {
    PlantModel {
        drag: DragModel {
            flow_velocity: 0.0,
            ..model.drag
        },
        ..model.clone()
    }
}

/// Damped Newton on `(v_dot, phi_ddot, psi_ddot) = 0` at the centred pose,
/// starting from zero torque on every wheel.
pub fn solve_trim(model: &PlantModel) -> Result<[f64; 3], LinearizeError> {
    const MAX_ITER: usize = 50;
    const TOL: f64 = 1e-12;
    let model = still_water(model);
    let mut u = Vector3::zeros();
    let mut r = trim_residual(&model, &u);
    for it in 0..MAX_ITER {
        if r.norm() <= TOL {
            return Ok([u[0], u[1], u[2]]);
        }
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let h = 1e-6 * u[k].abs().max(1.0);
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            jac.set_column(k, &((trim_residual(&model, &up) - trim_residual(&model, &dn)) / (2.0 * h)));
        }
        let Some(delta) = jac.lu().solve(&-r) else {
            return Err(LinearizeError::NoEquilibrium {
                residual: r.norm(),
                iterations: it,
            });
        };
        let mut lambda = 1.0;
        loop {
            let trial = u + delta * lambda;
            let rt = trim_residual(&model, &trial);
            if rt.norm() < r.norm() || lambda < 1e-6 {
                u = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r.norm() <= TOL {
        Ok([u[0], u[1], u[2]])
    } else {
        Err(LinearizeError::NoEquilibrium {
            residual: r.norm(),
            iterations: MAX_ITER,
        })
    }
}

/// Central-difference Jacobians of `f2` about `(0, u0)` in still water.
pub fn linearize(model: &PlantModel) -> Result<LinearizedSystem, LinearizeError> {
    let model = still_water(model);
    let trim = solve_trim(&model)?;
    let x0 = [0.0f64; 4];
    let mut a2 = Matrix4::zeros();
    for j in 0..4 {
        let h = 1e-6 * f64::max(1.0, x0[j].abs());
        let (mut xp, mut xm) = (x0, x0);
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f2(&model, &xp, &trim), f2(&model, &xm, &trim));
        for i in 0..4 {
            a2[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let mut b2 = Matrix4x3::zeros();
    for j in 0..3 {
        let h = 1e-6 * f64::max(1.0, trim[j].abs());
        let (mut up, mut um) = (trim, trim);
        up[j] += h;
        um[j] -= h;
        let (fp, fm) = (f2(&model, &x0, &up), f2(&model, &x0, &um));
        for i in 0..4 {
            b2[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let c2 = Matrix2x4::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    Ok(LinearizedSystem {
        a2,
        b2,
        c2,
        d2: Matrix2x3::zeros(),
        trim,
    })
}
