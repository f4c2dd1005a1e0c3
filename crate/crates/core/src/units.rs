//! Unit-tagged quantities and conversion to SI.
//!
//! Config files mix millimetres, inches and degrees. Everything is converted
//! to SI (metres, radians, seconds, ...) at load time, and nothing past the
//! config boundary ever sees a non-SI value.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("cannot convert {from} to {to}: incompatible dimensions")]
    Incompatible { from: Unit, to: Unit },
    #[error("unknown unit `{0}`")]
    Unknown(String),
    #[error("malformed quantity `{0}`")]
    Malformed(String),
}

/// Physical dimension of a unit. Two units convert into each other only when
/// they share a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Dimensionless,
    Length,
    Mass,
    Time,
    Angle,
    AngularVelocity,
    Velocity,
    Force,
    Stiffness,
    Torque,
    Voltage,
    Current,
    Charge,
    Resistance,
    Inductance,
    Power,
    Inertia,
    BackEmf,
    LinearDamping,
    RotationalDamping,
    QuadraticDrag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    None,
    Meter,
    Millimeter,
    Centimeter,
    Inch,
    Kilogram,
    Gram,
    Second,
    Millisecond,
    Hour,
    Radian,
    Degree,
    RadPerSec,
    DegPerSec,
    Rpm,
    MeterPerSec,
    CentimeterPerSec,
    Newton,
    NewtonPerMeter,
    NewtonMeter,
    Volt,
    Ampere,
    AmpHour,
    Ohm,
    Henry,
    Millihenry,
    Watt,
    KgM2,
    GramCm2,
    VoltSecPerRad,
    NewtonSecPerMeter,
    NewtonMeterSecPerRad,
    NewtonSec2PerMeter2,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        use Dimension as D;
        match self {
            Unit::None => D::Dimensionless,
            Unit::Meter | Unit::Millimeter | Unit::Centimeter | Unit::Inch => D::Length,
            Unit::Kilogram | Unit::Gram => D::Mass,
            Unit::Second | Unit::Millisecond | Unit::Hour => D::Time,
            Unit::Radian | Unit::Degree => D::Angle,
            Unit::RadPerSec | Unit::DegPerSec | Unit::Rpm => D::AngularVelocity,
            Unit::MeterPerSec | Unit::CentimeterPerSec => D::Velocity,
            Unit::Newton => D::Force,
            Unit::NewtonPerMeter => D::Stiffness,
            Unit::NewtonMeter => D::Torque,
            Unit::Volt => D::Voltage,
            Unit::Ampere => D::Current,
            Unit::AmpHour => D::Charge,
            Unit::Ohm => D::Resistance,
            Unit::Henry | Unit::Millihenry => D::Inductance,
            Unit::Watt => D::Power,
            Unit::KgM2 | Unit::GramCm2 => D::Inertia,
            Unit::VoltSecPerRad => D::BackEmf,
            Unit::NewtonSecPerMeter => D::LinearDamping,
            Unit::NewtonMeterSecPerRad => D::RotationalDamping,
            Unit::NewtonSec2PerMeter2 => D::QuadraticDrag,
        }
    }

    /// Multiplier taking a magnitude in this unit to the SI unit of its
    /// dimension. Charge stays in A·h and durations in `Hour` convert to
    /// seconds.
    pub fn to_si_factor(self) -> f64 {
        match self {
            Unit::Millimeter => 1e-3,
            Unit::Centimeter => 1e-2,
            Unit::Inch => 0.0254,
            Unit::Gram => 1e-3,
            Unit::Millisecond => 1e-3,
            Unit::Hour => 3600.0,
            Unit::Degree => PI / 180.0,
            Unit::DegPerSec => PI / 180.0,
            Unit::Rpm => 2.0 * PI / 60.0,
            Unit::CentimeterPerSec => 1e-2,
            Unit::Millihenry => 1e-3,
            Unit::GramCm2 => 1e-7,
            _ => 1.0,
        }
    }

    fn si_divisor(self) -> Option<f64> {
        match self {
            Unit::Millimeter | Unit::Gram | Unit::Millisecond | Unit::Millihenry => Some(1e3),
            Unit::Centimeter | Unit::CentimeterPerSec => Some(1e2),
            Unit::GramCm2 => Some(1e7),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::None => "",
            Unit::Meter => "m",
            Unit::Millimeter => "mm",
            Unit::Centimeter => "cm",
            Unit::Inch => "inch",
            Unit::Kilogram => "kg",
            Unit::Gram => "g",
            Unit::Second => "s",
            Unit::Millisecond => "ms",
            Unit::Hour => "h",
            Unit::Radian => "rad",
            Unit::Degree => "deg",
            Unit::RadPerSec => "rad/s",
            Unit::DegPerSec => "deg/s",
            Unit::Rpm => "rpm",
            Unit::MeterPerSec => "m/s",
            Unit::CentimeterPerSec => "cm/s",
            Unit::Newton => "N",
            Unit::NewtonPerMeter => "N/m",
            Unit::NewtonMeter => "N*m",
            Unit::Volt => "V",
            Unit::Ampere => "A",
            Unit::AmpHour => "A*h",
            Unit::Ohm => "ohm",
            Unit::Henry => "H",
            Unit::Millihenry => "mH",
            Unit::Watt => "W",
            Unit::KgM2 => "kg*m^2",
            Unit::GramCm2 => "g*cm^2",
            Unit::VoltSecPerRad => "V*s/rad",
            Unit::NewtonSecPerMeter => "N*s/m",
            Unit::NewtonMeterSecPerRad => "N*m*s/rad",
            Unit::NewtonSec2PerMeter2 => "N*s^2/m^2",
        }
    }

    /// The SI unit sharing this unit's dimension.
    pub fn si(self) -> Unit {
        match self.dimension() {
            Dimension::Dimensionless => Unit::None,
            Dimension::Length => Unit::Meter,
            Dimension::Mass => Unit::Kilogram,
            Dimension::Time => Unit::Second,
            Dimension::Angle => Unit::Radian,
            Dimension::AngularVelocity => Unit::RadPerSec,
            Dimension::Velocity => Unit::MeterPerSec,
            Dimension::Force => Unit::Newton,
            Dimension::Stiffness => Unit::NewtonPerMeter,
            Dimension::Torque => Unit::NewtonMeter,
            Dimension::Voltage => Unit::Volt,
            Dimension::Current => Unit::Ampere,
            Dimension::Charge => Unit::AmpHour,
            Dimension::Resistance => Unit::Ohm,
            Dimension::Inductance => Unit::Henry,
            Dimension::Power => Unit::Watt,
            Dimension::Inertia => Unit::KgM2,
            Dimension::BackEmf => Unit::VoltSecPerRad,
            Dimension::LinearDamping => Unit::NewtonSecPerMeter,
            Dimension::RotationalDamping => Unit::NewtonMeterSecPerRad,
            Dimension::QuadraticDrag => Unit::NewtonSec2PerMeter2,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::None => f.write_str("(dimensionless)"),
            u => f.write_str(u.symbol()),
        }
    }
}

impl FromStr for Unit {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // Accept the middle dot and `.` as product separators: "A·h", "A.h".
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                '·' | '.' => '*',
                '²' => '2',
                c => c,
            })
            .collect::<String>()
            .replace("^", "");
        let unit = match norm.as_str() {
            "" | "1" | "-" => Unit::None,
            "m" => Unit::Meter,
            "mm" => Unit::Millimeter,
            "cm" => Unit::Centimeter,
            "in" | "inch" | "inches" => Unit::Inch,
            "kg" => Unit::Kilogram,
            "g" => Unit::Gram,
            "s" => Unit::Second,
            "ms" => Unit::Millisecond,
            "h" | "hr" | "hour" | "hours" => Unit::Hour,
            "rad" => Unit::Radian,
            "deg" | "°" => Unit::Degree,
            "rad/s" => Unit::RadPerSec,
            "deg/s" => Unit::DegPerSec,
            "rpm" => Unit::Rpm,
            "m/s" => Unit::MeterPerSec,
            "cm/s" => Unit::CentimeterPerSec,
            "N" => Unit::Newton,
            "N/m" => Unit::NewtonPerMeter,
            "N*m" | "Nm" => Unit::NewtonMeter,
            "V" => Unit::Volt,
            "A" => Unit::Ampere,
            "A*h" | "Ah" => Unit::AmpHour,
            "ohm" | "Ω" => Unit::Ohm,
            "H" => Unit::Henry,
            "mH" => Unit::Millihenry,
            "W" => Unit::Watt,
            "kg*m2" => Unit::KgM2,
            "g*cm2" => Unit::GramCm2,
            "V*s/rad" | "N*m/A" => Unit::VoltSecPerRad,
            "N*s/m" => Unit::NewtonSecPerMeter,
            "N*m*s/rad" => Unit::NewtonMeterSecPerRad,
            "N*s2/m2" => Unit::NewtonSec2PerMeter2,
            _ => return Err(UnitError::Unknown(s.trim().to_string())),
        };
        Ok(unit)
    }
}

/// A magnitude tagged with its unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitValue {
    pub magnitude: f64,
    pub unit: Unit,
}

impl UnitValue {
    pub fn new(magnitude: f64, unit: Unit) -> Self {
        Self { magnitude, unit }
    }

    pub fn to_si(self) -> UnitValue {
        UnitValue::new(to_si_magnitude(self.magnitude, self.unit), self.unit.si())
    }

    /// SI magnitude.
    pub fn si(self) -> f64 {
        self.to_si().magnitude
    }
}

impl FromStr for UnitValue {
    type Err = UnitError;

    /// Parses `"<number> <unit>"`, e.g. `"103 mm"`, `"4.5inch"`, `"15 A*h"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_digit()
                    || c == '.'
                    || c == '+'
                    || c == '-'
                    || ((c == 'e' || c == 'E') && i > 0 && s[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
            })
            .map(|(i, _)| i)
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let magnitude: f64 = num
            .trim()
            .parse()
            .map_err(|_| UnitError::Malformed(s.to_string()))?;
        Ok(UnitValue::new(magnitude, unit.parse()?))
    }
}

impl fmt::Display for UnitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.magnitude, self.unit.symbol())
    }
}

// Decimal submultiples divide by an exact power of ten so that "103 mm"
// lands on the same double as "0.103 m".
fn to_si_magnitude(x: f64, unit: Unit) -> f64 {
    match unit.si_divisor() {
        Some(d) => x / d,
        None => x * unit.to_si_factor(),
    }
}

/// Converts `v` into `target`, which must share its dimension.
pub fn convert_unit(v: UnitValue, target: Unit) -> Result<UnitValue, UnitError> {
    if v.unit.dimension() != target.dimension() {
        return Err(UnitError::Incompatible {
            from: v.unit,
            to: target,
        });
    }
    if v.unit == target {
        return Ok(v);
    }
    let si = to_si_magnitude(v.magnitude, v.unit);
    let magnitude = match target.si_divisor() {
        Some(d) => si * d,
        None => si / target.to_si_factor(),
    };
    Ok(UnitValue::new(magnitude, target))
}
