//! TOML configuration with unit-suffixed quantities.
//!
//! Every quantity is either a string such as `"103 mm"` or `"4.5 inch"`, or a
//! bare number already in SI. Keys are checked against a fixed schema, and
//! every error names the `section.key` it came from.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

use crate::control::{LqrWeights, PidGains};
use crate::estimation::{ImuNoise, MahonyGains};
use crate::model::{FrictionModel, MotorParams, RobotGeometry, ValidationError};
use crate::plant::{DragModel, PlantModel};
use crate::power::{extreme_current_draw, size_battery, wheel_torque_for_traction, BatteryFamily, BatteryModel, PowerPlan};
use crate::sim::{ScenarioError, SimScenario};
use crate::spring::{default_h_grid, normal_force_from_spring, stiffness_curve, SpringError, StiffnessResult};
use crate::units::{Dimension, UnitValue};

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("config key `{key}`: {reason}")]
    Key { key: String, reason: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("config key `scenario`: {0}")]
    Scenario(#[from] ScenarioError),
}

fn key_err(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatterySettings {
    pub max_capacity: f64,
    pub motors: usize,
    /// Worst-case axial load shared by the motors, N.
    pub peak_drag: f64,
    pub initial_duration: f64,
    pub tolerance: f64,
}

/// Where the simulated wheel press force comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressForce {
    /// A spring of the required stiffness, evaluated at the plant's pipe
    /// radius with the design traction acting against it.
    Spring,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSettings {
    /// Pipe radius the simulated robot runs in.
    pub pipe_radius: f64,
    pub press_force: PressForce,
    pub inertia_phi: f64,
    pub inertia_psi: f64,
    pub com_offset: [f64; 3],
    pub damping: [f64; 3],
    pub wheel_cant: f64,
    pub gravity: f64,
    pub pipe_incline: f64,
    pub drag_coefficient: f64,
    pub rolling_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSettings {
    pub mahony: MahonyGains,
    pub encoder_pulses: u32,
    /// 1 disables the median filter.
    pub median_window: usize,
    pub noise: ImuNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSettings {
    pub q: [f64; 4],
    pub r: [f64; 3],
    pub pid: PidGains,
    pub control_period: f64,
    pub wheel_speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: RobotGeometry,
    pub motor: MotorParams,
    pub friction: FrictionModel,
    /// Design traction per wheel, N.
    pub traction: f64,
    pub spring_grid_points: usize,
    pub battery: BatterySettings,
    pub plant: PlantSettings,
    pub estimation: EstimationSettings,
    pub control: ControlSettings,
    pub scenario: SimScenario,
}

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str, keys: &[&str]) -> Result<Self, ConfigError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(key_err(name, "expected a table")),
        };
        if let Some(t) = table {
            let allowed: BTreeSet<&str> = keys.iter().copied().collect();
            if let Some(k) = t.keys().find(|k| !allowed.contains(k.as_str())) {
                return Err(key_err(&format!("{name}.{k}"), "unknown key"));
            }
        }
        Ok(Self { name, table })
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn raw(&self, key: &str) -> Result<&'a Value, ConfigError> {
        self.table
            .and_then(|t| t.get(key))
            .ok_or_else(|| key_err(&self.path(key), "missing"))
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn quantity(&self, key: &str, dim: Dimension) -> Result<f64, ConfigError> {
        quantity(self.raw(key)?, dim, &self.path(key))
    }

    fn number(&self, key: &str) -> Result<f64, ConfigError> {
        self.quantity(key, Dimension::Dimensionless)
    }

    fn integer(&self, key: &str) -> Result<i64, ConfigError> {
        self.raw(key)?
            .as_integer()
            .ok_or_else(|| key_err(&self.path(key), "expected an integer"))
    }

    fn count(&self, key: &str) -> Result<usize, ConfigError> {
        let n = self.integer(key)?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| key_err(&self.path(key), "expected a positive integer"))
    }

    fn array<const N: usize>(&self, key: &str, dim: Dimension) -> Result<[f64; N], ConfigError> {
        let path = self.path(key);
        let arr = self
            .raw(key)?
            .as_array()
            .ok_or_else(|| key_err(&path, format!("expected an array of {N}")))?;
        if arr.len() != N {
            return Err(key_err(&path, format!("expected {N} entries, got {}", arr.len())));
        }
        let mut out = [0.0; N];
        for (i, v) in arr.iter().enumerate() {
            out[i] = quantity(v, dim, &format!("{path}[{i}]"))?;
        }
        Ok(out)
    }
}

fn quantity(v: &Value, dim: Dimension, path: &str) -> Result<f64, ConfigError> {
    let x = match v {
        Value::Integer(i) => *i as f64,
        Value::Float(f) => *f,
        Value::String(s) => {
            let q: UnitValue = s.parse().map_err(|e| key_err(path, format!("{e}")))?;
            if q.unit.dimension() != dim {
                let dim = format!("{dim:?}").to_lowercase();
                return Err(key_err(path, format!("expected a {dim} quantity, got `{s}`")));
            }
            q.si()
        }
        _ => return Err(key_err(path, "expected a number or a quantity string")),
    };
    if !x.is_finite() {
        return Err(key_err(path, "not finite"));
    }
    Ok(x)
}

fn require(ok: bool, ty: &'static str, invariant: &str) -> Result<(), ValidationError> {
    if ok {
        Ok(())
    } else {
        Err(ValidationError {
            ty,
            invariant: invariant.to_string(),
        })
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        const SECTIONS: [&str; 9] = [
            "geometry",
            "motor",
            "friction",
            "spring",
            "battery",
            "plant",
            "estimation",
            "control",
            "scenario",
        ];
        if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(key_err(k, "unknown section"));
        }
        use Dimension as D;

        let g = Section::new(
            &root,
            "geometry",
            &[
                "arm_length",
                "pivot_offset",
                "contact_arm_length",
                "wheel_radius",
                "robot_mass",
                "pipe_radius_min",
                "pipe_radius_max",
            ],
        )?;
        let geometry = RobotGeometry {
            arm_length_a: g.quantity("arm_length", D::Length)?,
            pivot_offset_t: g.quantity("pivot_offset", D::Length)?,
            contact_arm_length: g.quantity("contact_arm_length", D::Length)?,
            wheel_radius: g.quantity("wheel_radius", D::Length)?,
            robot_mass: g.quantity("robot_mass", D::Mass)?,
            pipe_radius_min: g.quantity("pipe_radius_min", D::Length)?,
            pipe_radius_max: g.quantity("pipe_radius_max", D::Length)?,
        };

        let m = Section::new(
            &root,
            "motor",
            &[
                "terminal_resistance",
                "terminal_inductance",
                "back_emf_constant",
                "gear_ratio",
                "load_inertia",
                "rotor_inertia",
                "nominal_voltage",
                "rated_power",
                "voltage_limit",
            ],
        )?;
        let motor = MotorParams {
            terminal_resistance: m.quantity("terminal_resistance", D::Resistance)?,
            terminal_inductance: m.quantity("terminal_inductance", D::Inductance)?,
            back_emf_constant: m.quantity("back_emf_constant", D::BackEmf)?,
            gear_ratio: m.number("gear_ratio")?,
            load_inertia: m.quantity("load_inertia", D::Inertia)?,
            rotor_inertia: m.quantity("rotor_inertia", D::Inertia)?,
            nominal_voltage: m.quantity("nominal_voltage", D::Voltage)?,
            rated_power: m.quantity("rated_power", D::Power)?,
            voltage_limit: m.quantity("voltage_limit", D::Voltage)?,
        };

        let f = Section::new(&root, "friction", &["mu_s", "normal_force", "traction"])?;
        let friction = FrictionModel {
            mu_s: f.number("mu_s")?,
            normal_force: f.quantity("normal_force", D::Force)?,
        };
        let traction = f.quantity("traction", D::Force)?;

        let s = Section::new(&root, "spring", &["grid_points"])?;
        let spring_grid_points = s.count("grid_points")?;

        let b = Section::new(
            &root,
            "battery",
            &["max_capacity", "motors", "peak_drag", "initial_duration", "tolerance"],
        )?;
        let battery = BatterySettings {
            max_capacity: b.quantity("max_capacity", D::Charge)?,
            motors: b.count("motors")?,
            peak_drag: b.quantity("peak_drag", D::Force)?,
            initial_duration: b.quantity("initial_duration", D::Time)? / 3600.0,
            tolerance: b.quantity("tolerance", D::Time)? / 3600.0,
        };

        let p = Section::new(
            &root,
            "plant",
            &[
                "pipe_radius",
                "press_force",
                "inertia_phi",
                "inertia_psi",
                "com_offset",
                "damping_linear",
                "damping_phi",
                "damping_psi",
                "wheel_cant",
                "gravity",
                "pipe_incline",
                "drag_coefficient",
                "rolling_tolerance",
            ],
        )?;
        let plant = PlantSettings {
            pipe_radius: p.quantity("pipe_radius", D::Length)?,
            press_force: match p.raw("press_force")? {
                Value::String(s) if s.trim() == "spring" => PressForce::Spring,
                v => PressForce::Fixed(quantity(v, D::Force, "plant.press_force")?),
            },
            inertia_phi: p.quantity("inertia_phi", D::Inertia)?,
            inertia_psi: p.quantity("inertia_psi", D::Inertia)?,
            com_offset: p.array("com_offset", D::Length)?,
            damping: [
                p.quantity("damping_linear", D::LinearDamping)?,
                p.quantity("damping_phi", D::RotationalDamping)?,
                p.quantity("damping_psi", D::RotationalDamping)?,
            ],
            wheel_cant: p.quantity("wheel_cant", D::Angle)?,
            gravity: p.number("gravity")?,
            pipe_incline: p.quantity("pipe_incline", D::Angle)?,
            drag_coefficient: p.quantity("drag_coefficient", D::QuadraticDrag)?,
            rolling_tolerance: p.quantity("rolling_tolerance", D::Velocity)?,
        };

        let e = Section::new(
            &root,
            "estimation",
            &[
                "mahony_kp",
                "mahony_ki",
                "encoder_pulses",
                "median_window",
                "gyro_sigma",
                "accel_sigma",
                "gyro_bias",
            ],
        )?;
        let encoder_pulses = u32::try_from(e.count("encoder_pulses")?)
            .map_err(|_| key_err("estimation.encoder_pulses", "too large"))?;
        let estimation = EstimationSettings {
            mahony: MahonyGains {
                kp: e.number("mahony_kp")?,
                ki: e.number("mahony_ki")?,
            },
            encoder_pulses,
            median_window: e.count("median_window")?,
            noise: ImuNoise {
                gyro_sigma: e.quantity("gyro_sigma", D::AngularVelocity)?,
                accel_sigma: e.number("accel_sigma")?,
                gyro_bias: e.array("gyro_bias", D::AngularVelocity)?,
            },
        };

        let c = Section::new(
            &root,
            "control",
            &[
                "q",
                "r",
                "pid_kp",
                "pid_ki",
                "pid_kd",
                "integral_limit",
                "control_period",
                "wheel_speed_limit",
            ],
        )?;
        let control = ControlSettings {
            q: c.array("q", D::Dimensionless)?,
            r: c.array("r", D::Dimensionless)?,
            pid: PidGains {
                kp: c.number("pid_kp")?,
                ki: c.number("pid_ki")?,
                kd: c.number("pid_kd")?,
                integral_limit: c.number("integral_limit")?,
            },
            control_period: c.quantity("control_period", D::Time)?,
            wheel_speed_limit: c.quantity("wheel_speed_limit", D::AngularVelocity)?,
        };

        let scenario = parse_scenario(&root, estimation.noise)?;

        let cfg = Config {
            geometry,
            motor,
            friction,
            traction,
            spring_grid_points,
            battery,
            plant,
            estimation,
            control,
            scenario,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The shipped parameter set.
    pub fn default_config() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        self.motor.validate()?;
        self.friction.validate()?;
        require(
            self.traction >= 0.0 && self.traction <= self.friction.max_traction(),
            "FrictionModel",
            "0 <= traction <= mu_s * normal_force",
        )?;
        let p = &self.plant;
        require(
            p.pipe_radius >= self.geometry.pipe_radius_min && p.pipe_radius <= self.geometry.pipe_radius_max,
            "PlantSettings",
            "pipe_radius_min <= pipe_radius <= pipe_radius_max",
        )?;
        if let PressForce::Fixed(f) = p.press_force {
            require(f > 0.0, "PlantSettings", "press_force > 0")?;
        }
        require(
            p.inertia_phi > 0.0 && p.inertia_psi > 0.0,
            "PlantSettings",
            "body inertias > 0",
        )?;
        require(
            p.damping.iter().all(|d| *d >= 0.0) && p.drag_coefficient >= 0.0,
            "PlantSettings",
            "damping and drag coefficient >= 0",
        )?;
        require(
            p.gravity >= 0.0 && p.rolling_tolerance > 0.0,
            "PlantSettings",
            "gravity >= 0 and rolling_tolerance > 0",
        )?;
        let e = &self.estimation;
        require(
            e.mahony.kp >= 0.0 && e.mahony.ki >= 0.0,
            "EstimationSettings",
            "Mahony gains >= 0",
        )?;
        require(
            e.noise.gyro_sigma >= 0.0 && e.noise.accel_sigma >= 0.0,
            "EstimationSettings",
            "noise sigmas >= 0",
        )?;
        let c = &self.control;
        require(
            c.q.iter().all(|q| *q >= 0.0) && c.r.iter().all(|r| *r > 0.0),
            "ControlSettings",
            "q >= 0 and r > 0",
        )?;
        require(
            c.pid.kp >= 0.0 && c.pid.ki >= 0.0 && c.pid.kd >= 0.0 && c.pid.integral_limit > 0.0,
            "ControlSettings",
            "PID gains >= 0 and integral_limit > 0",
        )?;
        require(c.wheel_speed_limit > 0.0, "ControlSettings", "wheel_speed_limit > 0")?;
        self.scenario.validate()?;
        let ratio = c.control_period / self.scenario.dt;
        require(
            c.control_period > 0.0 && ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() <= 1e-9,
            "ControlSettings",
            "control_period is a whole multiple of the scenario dt",
        )?;
        Ok(())
    }

    /// Spring sizing over the configured pipe range.
    pub fn spring_design(&self) -> Result<StiffnessResult, SpringError> {
        let grid = default_h_grid(&self.geometry, self.spring_grid_points);
        stiffness_curve(&self.geometry, &self.friction, self.traction, &grid)
    }

    /// Wheel press force in the simulated pipe.
    pub fn press_force(&self) -> Result<f64, SpringError> {
        match self.plant.press_force {
            PressForce::Fixed(f) => Ok(f),
            PressForce::Spring => {
                let k = self.spring_design()?.k_required;
                normal_force_from_spring(k, self.plant.pipe_radius, &self.geometry, self.traction)
            }
        }
    }

    /// Plant for the configured pipe radius and the given flow speed.
    pub fn plant_model(&self, flow_velocity: f64) -> Result<PlantModel, SpringError> {
        let p = &self.plant;
        let friction = FrictionModel {
            normal_force: self.press_force()?,
            ..self.friction
        };
        Ok(PlantModel {
            mass: self.geometry.robot_mass,
            inertia_phi: p.inertia_phi,
            inertia_psi: p.inertia_psi,
            com_offset: p.com_offset,
            damping: p.damping,
            contact_radius: p.pipe_radius,
            wheel_radius: self.geometry.wheel_radius,
            wheel_cant: p.wheel_cant,
            gravity: p.gravity,
            pipe_incline: p.pipe_incline,
            drag: DragModel {
                coefficient: p.drag_coefficient,
                flow_velocity,
            },
            friction,
            motor: self.motor,
            rolling_tolerance: p.rolling_tolerance,
        })
    }

    pub fn lqr_weights(&self) -> LqrWeights {
        LqrWeights::diagonal(&self.control.q, &self.control.r)
    }

    pub fn battery_family(&self) -> BatteryFamily {
        BatteryFamily {
            template: BatteryModel::flat(self.battery.max_capacity, self.motor.nominal_voltage),
            max_capacity: self.battery.max_capacity,
        }
    }

    /// Current drawn by all motors while pushing against the peak drag.
    pub fn extreme_current(&self) -> f64 {
        let b = &self.battery;
        let tau = wheel_torque_for_traction(b.peak_drag, b.motors, self.geometry.wheel_radius);
        extreme_current_draw(&self.motor, tau, b.motors)
    }

    /// Battery sizing with the configured start and tolerance unless
    /// overridden.
    pub fn plan_battery(&self, h0: Option<f64>, tolerance: Option<f64>) -> PowerPlan {
        let b = &self.battery;
        size_battery(
            &self.motor,
            b.motors,
            &self.battery_family(),
            self.extreme_current(),
            h0.unwrap_or(b.initial_duration),
            tolerance.unwrap_or(b.tolerance),
        )
    }

    /// Replaces the scenario with the `[scenario]` table of a separate file.
    pub fn with_scenario_text(mut self, text: &str) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if let Some(k) = root.keys().find(|k| k.as_str() != "scenario") {
            return Err(key_err(k, "unknown section in scenario file"));
        }
        self.scenario = parse_scenario(&root, self.estimation.noise)?;
        self.validate()?;
        Ok(self)
    }
}

fn parse_scenario(root: &Table, noise: ImuNoise) -> Result<SimScenario, ConfigError> {
    use Dimension as D;
    let s = Section::new(
        root,
        "scenario",
        &[
            "preset",
            "duration",
            "dt",
            "velocity",
            "profile",
            "initial_phi",
            "initial_psi",
            "flow_velocity",
            "seed",
        ],
    )?;
    let preset = if s.has("preset") {
        s.raw("preset")?
            .as_str()
            .ok_or_else(|| key_err("scenario.preset", "expected a string"))?
    } else {
        "iteration-1"
    };
    let mut sc = SimScenario::preset(preset, noise)?;
    if s.has("duration") {
        sc.duration = s.quantity("duration", D::Time)?;
    }
    if s.has("dt") {
        sc.dt = s.quantity("dt", D::Time)?;
    }
    if s.has("initial_phi") {
        sc.initial_phi = s.quantity("initial_phi", D::Angle)?;
    }
    if s.has("initial_psi") {
        sc.initial_psi = s.quantity("initial_psi", D::Angle)?;
    }
    if s.has("flow_velocity") {
        sc.flow_velocity = s.quantity("flow_velocity", D::Velocity)?;
    }
    if s.has("seed") {
        sc.seed = u64::try_from(s.integer("seed")?).map_err(|_| key_err("scenario.seed", "expected a non-negative integer"))?;
    }
    match (s.has("velocity"), s.has("profile")) {
        (true, true) => return Err(key_err("scenario.profile", "give either velocity or profile, not both")),
        (true, false) => sc.profile = vec![(0.0, s.quantity("velocity", D::Velocity)?)],
        (false, true) => {
            let arr = s
                .raw("profile")?
                .as_array()
                .ok_or_else(|| key_err("scenario.profile", "expected an array of [t_start, V_d] pairs"))?;
            sc.profile = arr
                .iter()
                .enumerate()
                .map(|(i, pair)| {
                    let path = format!("scenario.profile[{i}]");
                    match pair.as_array().map(Vec::as_slice) {
                        Some([t, v]) => Ok((quantity(t, D::Time, &path)?, quantity(v, D::Velocity, &path)?)),
                        _ => Err(key_err(&path, "expected a [t_start, V_d] pair")),
                    }
                })
                .collect::<Result<_, _>>()?;
        }
        (false, false) => {}
    }
    Ok(sc)
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Config::parse(&text)
}
