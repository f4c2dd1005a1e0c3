use thiserror::Error;

use crate::estimation::ImuNoise;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid scenario: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub name: String,
    pub duration: f64,
    /// Plant integration step.
    pub dt: f64,
    /// Piecewise-constant `(t_start, V_d)` pairs.
    pub profile: Vec<(f64, f64)>,
    pub initial_phi: f64,
    pub initial_psi: f64,
    pub flow_velocity: f64,
    pub sensor_noise: ImuNoise,
    pub seed: u64,
}

pub const PRESETS: [&str; 7] = [
    "iteration-1",
    "iteration-2",
    "iteration-3",
    "iteration-4",
    "sim-0.12",
    "sim-0.17",
    "sim-0.35",
];

impl SimScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ScenarioError::Invalid("duration > 0"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(ScenarioError::Invalid("dt in (0, 10 ms]"));
        }
        if self.profile.windows(2).any(|w| !(w[1].0 >= w[0].0)) {
            return Err(ScenarioError::Invalid("profile times non-decreasing"));
        }
        let finite = [self.initial_phi, self.initial_psi, self.flow_velocity]
            .iter()
            .chain(self.profile.iter().flat_map(|(t, v)| [t, v]))
            .all(|x| x.is_finite());
        if !finite {
            return Err(ScenarioError::Invalid("all values finite"));
        }
        Ok(())
    }

    /// Commanded speed at `t`: the value of the last profile entry that has
    /// started, zero before the first.
    pub fn desired_velocity(&self, t: f64) -> f64 {
        self.profile
            .iter()
            .take_while(|(t0, _)| *t0 <= t)
            .last()
            .map_or(0.0, |(_, v)| *v)
    }

    /// The last commanded speed, which the summary metrics refer to.
    pub fn final_velocity(&self) -> f64 {
        self.profile.last().map_or(0.0, |(_, v)| *v)
    }

    /// Named scenario library. Iterations start from the logged initial
    /// attitudes in still water; the `sim-*` runs start near level against
    /// an opposing flow.
    pub fn preset(name: &str, noise: ImuNoise) -> Result<Self, ScenarioError> {
        let deg = f64::to_radians;
        let (phi, psi, v, flow, duration) = match name {
            "iteration-1" => (deg(-4.0), deg(-3.0), 0.1, 0.0, 8.0),
            "iteration-2" => (deg(-14.0), deg(-11.0), 0.2, 0.0, 8.0),
            "iteration-3" => (deg(-9.0), deg(5.0), 0.3, 0.0, 8.0),
            "iteration-4" => (deg(-6.0), deg(-5.0), 0.35, 0.0, 10.0),
            "sim-0.12" => (deg(-2.0), deg(1.0), 0.12, -0.2, 10.0),
            "sim-0.17" => (deg(-2.0), deg(1.0), 0.17, -0.2, 10.0),
            "sim-0.35" => (deg(-2.0), deg(1.0), 0.35, -0.2, 10.0),
            _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            duration,
            dt: 1e-3,
            profile: vec![(0.0, v)],
            initial_phi: phi,
            initial_psi: psi,
            flow_velocity: flow,
            sensor_noise: noise,
            seed: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_lookup() {
        let mut s = SimScenario::preset("iteration-1", ImuNoise::NONE).unwrap();
        s.profile = vec![(0.0, 0.1), (2.0, 0.2), (2.0, 0.3)];
        assert_eq!(s.desired_velocity(1.99), 0.1);
        assert_eq!(s.desired_velocity(2.0), 0.3);
        s.profile = vec![(1.0, 0.1)];
        assert_eq!(s.desired_velocity(0.5), 0.0);
    }

    #[test]
    fn presets_are_valid() {
        for p in PRESETS {
            SimScenario::preset(p, ImuNoise::NONE).unwrap().validate().unwrap();
        }
        assert!(SimScenario::preset("nope", ImuNoise::NONE).is_err());
    }

    #[test]
    fn rejects_bad_step() {
        let mut s = SimScenario::preset("iteration-1", ImuNoise::NONE).unwrap();
        s.dt = 0.02;
        assert!(s.validate().is_err());
        s.dt = 1e-3;
        s.profile = vec![(1.0, 0.1), (0.5, 0.2)];
        assert!(s.validate().is_err());
    }
}
