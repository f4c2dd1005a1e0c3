//! Wall-press spring sizing.
//!
//! Each arm pivots on the body at O. For a pipe radius `H` the arm settles at
//! the angle `theta` where the arm geometry angle
//! `beta(theta) = -theta + asin((t/a) cos theta) + pi/2` equals
//! `asin(H / L)`. The spring must then supply the moment that presses the
//! wheel with `F_N` while it transmits the traction `f_s`; dividing that
//! force by the spring extension `U(theta)` gives the stiffness needed at
//! that radius, and the design stiffness is the maximum over the pipe range.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::model::{FrictionModel, RobotGeometry};
use crate::roots::{bisect_secant, RootError};

pub const GRAVITY: f64 = 9.81;

/// Arm angles below this are excluded from the stiffness search: `G` is 0/0
/// at `theta = 0` because the spring is unstretched there.
pub const MIN_SEARCH_THETA: f64 = 1e-4;

/// Residual bound on the solved trigonometric equation, in radians.
pub const THETA_RESIDUAL_TOL: f64 = 1e-10;

const BRACKET_HI: f64 = FRAC_PI_2 - 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpringError {
    #[error("pipe radius {h} m is outside the arm reach (contact arm length {l} m)")]
    Infeasible { h: f64, l: f64 },
    #[error("no arm angle solves the geometry for H = {h} m: {source}")]
    NoRoot { h: f64, source: RootError },
    #[error("singular arm configuration at theta = {theta} rad (cos theta -> 0)")]
    Singular { theta: f64 },
    #[error("pipe radius {h} m outside the configured range [{min}, {max}] m")]
    OutOfRange { h: f64, min: f64, max: f64 },
    #[error("empty pipe-radius grid")]
    EmptyGrid,
    #[error("no grid point has theta >= {MIN_SEARCH_THETA} rad")]
    NoSearchablePoint,
}

/// Solved arm pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmConfiguration {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub spring_moment_arm: f64,
}

impl ArmConfiguration {
    pub fn at(theta: f64, geom: &RobotGeometry) -> Self {
        let alpha = alpha(theta, geom);
        Self {
            theta,
            alpha,
            beta: alpha + (FRAC_PI_2 - theta),
            spring_moment_arm: geom.pivot_offset_t * theta.cos(),
        }
    }
}

fn alpha(theta: f64, geom: &RobotGeometry) -> f64 {
    (geom.pivot_offset_t / geom.arm_length_a * theta.cos()).asin()
}

/// `beta(theta) = -theta + asin((t/a) cos theta) + pi/2`.
pub fn beta(theta: f64, geom: &RobotGeometry) -> f64 {
    -theta + alpha(theta, geom) + FRAC_PI_2
}

/// Arm angle for pipe radius `h`.
pub fn solve_theta(h: f64, geom: &RobotGeometry) -> Result<f64, SpringError> {
    let ratio = h / geom.contact_arm_length;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(SpringError::Infeasible {
            h,
            l: geom.contact_arm_length,
        });
    }
    let target = ratio.asin();
    let root = bisect_secant(|th| beta(th, geom) - target, 0.0, BRACKET_HI, 1e-13, 1e-12)
        .map_err(|source| SpringError::NoRoot { h, source })?;
    Ok(root.x)
}

/// Residual `|beta(theta) - asin(H/L)|` of a solved angle.
pub fn theta_residual(theta: f64, h: f64, geom: &RobotGeometry) -> f64 {
    (beta(theta, geom) - (h / geom.contact_arm_length).asin()).abs()
}

/// Spring force holding the arm at `theta` while the wheel presses with
/// `F_N` and transmits the signed traction `traction`:
///
/// `F = ((F_N - m g) a cos(theta + asin((t/a) cos theta)) - f_s H) / (t cos theta)`
///
/// with `H = L sin(beta(theta))`.
pub fn spring_force(
    theta: f64,
    geom: &RobotGeometry,
    fric: &FrictionModel,
    traction: f64,
) -> Result<f64, SpringError> {
    let cos_t = theta.cos();
    if !(theta < FRAC_PI_2) || cos_t <= 1e-12 {
        return Err(SpringError::Singular { theta });
    }
    let (a, t) = (geom.arm_length_a, geom.pivot_offset_t);
    let h = geom.contact_arm_length * beta(theta, geom).sin();
    let press = (fric.normal_force - geom.robot_mass * GRAVITY) * a * (theta + alpha(theta, geom)).cos();
    Ok((press - traction * h) / (t * cos_t))
}

/// Spring extension relative to the unloaded length at `theta = 0`:
/// `U = sqrt((t + a cos beta)^2 + (a sin beta)^2) (1 - cos theta)`.
pub fn spring_extension(theta: f64, geom: &RobotGeometry) -> f64 {
    let (a, t) = (geom.arm_length_a, geom.pivot_offset_t);
    let b = beta(theta, geom);
    let anchor = (t + a * b.cos()).hypot(a * b.sin());
    anchor * (1.0 - theta.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub h: f64,
    pub theta: f64,
    /// Required stiffness; `None` where `theta` is too small to divide by
    /// the extension.
    pub g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessResult {
    pub k_required: f64,
    pub theta_at_max: f64,
    pub h_at_max: f64,
    /// Whether the maximum sits on the first or last grid radius.
    pub max_at_endpoint: bool,
    /// Largest strict local maximum inside the grid, if the curve has one.
    pub interior_max: Option<CurvePoint>,
    pub curve: Vec<CurvePoint>,
}

/// Stiffness required at one arm angle. The wheel may have to push in
/// either direction along the pipe, so the traction is taken with the sign
/// that loads the spring more.
pub fn required_stiffness(
    theta: f64,
    geom: &RobotGeometry,
    fric: &FrictionModel,
    traction: f64,
) -> Result<f64, SpringError> {
    let f = spring_force(theta, geom, fric, -traction.abs())?;
    Ok(f / spring_extension(theta, geom))
}

/// Evaluates the required stiffness over `h_grid` and reports the maximum.
/// Ties go to the smallest `H`.
pub fn stiffness_curve(
    geom: &RobotGeometry,
    fric: &FrictionModel,
    traction: f64,
    h_grid: &[f64],
) -> Result<StiffnessResult, SpringError> {
    if h_grid.is_empty() {
        return Err(SpringError::EmptyGrid);
    }
    let span = (geom.pipe_radius_max - geom.pipe_radius_min) * 1e-12;
    let mut hs = h_grid.to_vec();
    hs.sort_by(f64::total_cmp);

    let mut curve = Vec::with_capacity(hs.len());
    for &h in &hs {
        if h < geom.pipe_radius_min - span || h > geom.pipe_radius_max + span {
            return Err(SpringError::OutOfRange {
                h,
                min: geom.pipe_radius_min,
                max: geom.pipe_radius_max,
            });
        }
        let theta = solve_theta(h, geom)?;
        let g = if theta >= MIN_SEARCH_THETA {
            Some(required_stiffness(theta, geom, fric, traction)?)
        } else {
            None
        };
        curve.push(CurvePoint { h, theta, g });
    }

    let mut best: Option<(usize, f64)> = None;
    for (i, p) in curve.iter().enumerate() {
        if let Some(g) = p.g {
            if best.map_or(true, |(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
    }
    let (imax, k_required) = best.ok_or(SpringError::NoSearchablePoint)?;

    let interior_max = (1..curve.len().saturating_sub(1))
        .filter_map(|i| {
            let (l, c, r) = (curve[i - 1].g?, curve[i].g?, curve[i + 1].g?);
            (c > l && c >= r).then_some(curve[i])
        })
        .fold(None, |acc: Option<CurvePoint>, p| match acc {
            Some(q) if q.g >= p.g => Some(q),
            _ => Some(p),
        });

    Ok(StiffnessResult {
        k_required,
        theta_at_max: curve[imax].theta,
        h_at_max: curve[imax].h,
        max_at_endpoint: imax == 0 || imax + 1 == curve.len(),
        interior_max,
        curve,
    })
}

/// Wheel press force a spring of stiffness `k` delivers at pipe radius `h`
/// while the wheel transmits `traction` in the less favourable direction.
pub fn normal_force_from_spring(k: f64, h: f64, geom: &RobotGeometry, traction: f64) -> Result<f64, SpringError> {
    let theta = solve_theta(h, geom)?;
    let cos_t = theta.cos();
    let lever = geom.arm_length_a * (theta + alpha(theta, geom)).cos();
    if cos_t <= 1e-12 || lever.abs() <= 1e-12 {
        return Err(SpringError::Singular { theta });
    }
    let spring_moment = k * spring_extension(theta, geom) * geom.pivot_offset_t * cos_t;
    Ok(geom.robot_mass * GRAVITY + (spring_moment - traction.abs() * h) / lever)
}

/// Uniform grid of `n` radii over the geometry's pipe range.
pub fn default_h_grid(geom: &RobotGeometry, n: usize) -> Vec<f64> {
    let (lo, hi) = (geom.pipe_radius_min, geom.pipe_radius_max);
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Pure rolling holds while the traction magnitude stays within the static
/// friction limit `mu_s F_N`.
pub fn check_pure_rolling(traction: f64, fric: &FrictionModel) -> bool {
    traction.abs() <= fric.max_traction()
}
