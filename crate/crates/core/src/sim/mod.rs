//! Closed-loop scenario runner.
//!
//! The controller runs on a fixed tick; between ticks the plant is advanced
//! at the scenario step with the last commands held. Sensors are sampled at
//! the tick, except the encoders, which see every plant step.

mod scenario;
mod telemetry;

pub use scenario::{ScenarioError, SimScenario, PRESETS};
pub use telemetry::{
    entry_time, export_csv, load_csv, read_csv, summarize, summarize_with, write_csv, RunSummary, TelemetryRecord,
    ANGLE_BAND_DEG, CSV_HEADER, VELOCITY_BAND,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::Config;
use crate::control::{design_lqr, CombinedController, LqrGain, SynthesisError};
use crate::estimation::{
    euler_rates, imu_sense, mahony_update, AttitudeEstimate, EncoderStream, MedianFilter,
};
use crate::spring::SpringError;
use crate::plant::{linearize, step, LinearizeError, LinearizedSystem, PlantModel, PlantState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("trim failed: {0}")]
    Trim(#[from] LinearizeError),
    #[error("LQR synthesis failed: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("spring sizing failed: {0}")]
    Spring(#[from] SpringError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    /// Tick time at which the plant produced a non-finite state.
    pub t: f64,
    pub last_finite: PlantState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub telemetry: Vec<TelemetryRecord>,
    pub summary: RunSummary,
    pub divergence: Option<Divergence>,
}

/// Everything fixed before the first tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub model: PlantModel,
    pub linearized: LinearizedSystem,
    pub gain: LqrGain,
}

pub fn design(cfg: &Config, scenario: &SimScenario) -> Result<Design, SimError> {
    let model = cfg.plant_model(scenario.flow_velocity)?;
    let linearized = linearize(&model)?;
    let gain = design_lqr(&linearized, &cfg.lqr_weights())?;
    Ok(Design {
        model,
        linearized,
        gain,
    })
}

pub fn run_scenario(scenario: &SimScenario, cfg: &Config) -> Result<SimRun, SimError> {
    scenario.validate()?;
    let d = design(cfg, scenario)?;
    Ok(run_with_design(scenario, cfg, &d))
}

pub fn run_with_design(scenario: &SimScenario, cfg: &Config, d: &Design) -> SimRun {
    let model = &d.model;
    let period = cfg.control.control_period;
    let substeps = ((period / scenario.dt).round() as usize).max(1);
    let n_ticks = (scenario.duration / period).round() as usize;
    let radius = model.wheel_radius;

    let mut ctl = CombinedController::new(
        d.gain.clone(),
        d.linearized.trim,
        model.motor,
        radius,
        cfg.control.wheel_speed_limit * radius,
        cfg.control.pid,
        &model.jacobian(),
    );
    let mut x = PlantState::rolling(
        model,
        0.0,
        0.0,
        [scenario.initial_phi, 0.0, scenario.initial_psi, 0.0],
    );
    // Motors start out holding the trim torque.
    x.motor_currents = d.linearized.trim.map(|tau| tau / model.torque_per_amp());
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut enc = EncoderStream::new(cfg.estimation.encoder_pulses);
    enc.observe(&x.wheel_angles, 0.0);
    let mut medians = [(); 3].map(|_| MedianFilter::new(cfg.estimation.median_window));
    let mut est: Option<AttitudeEstimate> = None;
    let mut slip = false;
    let mut telemetry = Vec::with_capacity(n_ticks + 1);
    let mut divergence = None;

    for k in 0..=n_ticks {
        let t = k as f64 * period;
        let imu = imu_sense(&x, t, model.gravity, &scenario.sensor_noise, &mut rng);
        let e = match est {
            None => AttitudeEstimate::from_accel(&imu.accel),
            Some(prev) => mahony_update(&prev, &imu, &cfg.estimation.mahony, period),
        };
        est = Some(e);
        let (phi_dot_hat, psi_dot_hat) = euler_rates(&e.body_rate_estimate(&imu.gyro), e.phi_hat);
        let x2_hat = [e.phi_hat, phi_dot_hat, e.psi_hat, psi_dot_hat];

        let rim = crate::estimation::encoder_velocity_at(&enc, radius, t);
        let v_hat: [f64; 3] = std::array::from_fn(|i| medians[i].push(rim[i].unwrap_or(0.0)));
        let w_hat = v_hat.map(|v| v / radius);
        let v_d = scenario.desired_velocity(t);
        let out = ctl.step(&x2_hat, &w_hat, v_d, period);

        telemetry.push(TelemetryRecord {
            t,
            s: x.s,
            v: x.v,
            phi: x.phi,
            phi_dot: x.phi_dot,
            psi: x.psi,
            psi_dot: x.psi_dot,
            phi_hat: e.phi_hat,
            psi_hat: e.psi_hat,
            v_hat,
            v_d,
            u_total: out.u_total,
            saturated: out.saturated.iter().any(|s| *s),
            slip,
        });
        if k == n_ticks {
            break;
        }

        slip = false;
        for j in 0..substeps {
            match step(&x, &out.u_total, model, scenario.dt) {
                Ok(o) => {
                    x = o.state;
                    slip |= o.slip;
                    enc.observe(&x.wheel_angles, t + (j + 1) as f64 * scenario.dt);
                }
                Err(err) => {
                    divergence = Some(Divergence {
                        t,
                        last_finite: err.last_finite,
                    });
                    break;
                }
            }
        }
        if divergence.is_some() {
            break;
        }
    }

    let summary = summarize(&telemetry);
    SimRun {
        telemetry,
        summary,
        divergence,
    }
}
