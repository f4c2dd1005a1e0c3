use std::io::{self, BufRead, Write};
use std::path::Path;

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub psi: f64,
    pub psi_dot: f64,
    pub phi_hat: f64,
    pub psi_hat: f64,
    /// Filtered rim-speed estimate per wheel.
    pub v_hat: [f64; 3],
    pub v_d: f64,
    pub u_total: [f64; 3],
    pub saturated: bool,
    /// Any wheel slipped since the previous tick.
    pub slip: bool,
}

/// Settle and rise times are `None` when the band is never held to the end
/// of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub settle_time_phi: Option<f64>,
    pub settle_time_psi: Option<f64>,
    pub velocity_rise_time: Option<f64>,
    /// Largest body angular rate after both angles settled, deg/s.
    pub max_rate_after_transient: Option<f64>,
    /// Largest `|angle|` after its settle time (whole run if unsettled), deg.
    pub final_band_phi: f64,
    pub final_band_psi: f64,
    pub any_slip: bool,
    pub any_saturation: bool,
}

pub const ANGLE_BAND_DEG: f64 = 2.0;
pub const VELOCITY_BAND: f64 = 0.05;

/// Time of the record after the last one failing `inside`; the first
/// record's time if none fails, `None` if the last one fails.
pub fn entry_time(tel: &[TelemetryRecord], inside: impl Fn(&TelemetryRecord) -> bool) -> Option<f64> {
    match tel.iter().rposition(|r| !inside(r)) {
        None => tel.first().map(|r| r.t),
        Some(i) => tel.get(i + 1).map(|r| r.t),
    }
}

pub fn summarize(tel: &[TelemetryRecord]) -> RunSummary {
    summarize_with(tel, ANGLE_BAND_DEG, VELOCITY_BAND)
}

pub fn summarize_with(tel: &[TelemetryRecord], band_deg: f64, velocity_band: f64) -> RunSummary {
    let band = band_deg.to_radians();
    let settle_phi = entry_time(tel, |r| r.phi.abs() <= band);
    let settle_psi = entry_time(tel, |r| r.psi.abs() <= band);
    let rise = entry_time(tel, |r| (r.v - r.v_d).abs() <= velocity_band * r.v_d.abs());
    let after = |t0: Option<f64>| tel.iter().filter(move |r| t0.is_none_or(|t0| r.t >= t0));
    let max_abs = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, x| m.max(x.abs()));
    let max_rate = match (settle_phi, settle_psi) {
        (Some(a), Some(b)) => {
            let t0 = a.max(b);
            Some(max_abs(&mut after(Some(t0)).flat_map(|r| [r.phi_dot, r.psi_dot])).to_degrees())
        }
        _ => None,
    };
    RunSummary {
        settle_time_phi: settle_phi,
        settle_time_psi: settle_psi,
        velocity_rise_time: rise,
        max_rate_after_transient: max_rate,
        final_band_phi: max_abs(&mut after(settle_phi).map(|r| r.phi)).to_degrees(),
        final_band_psi: max_abs(&mut after(settle_psi).map(|r| r.psi)).to_degrees(),
        any_slip: tel.iter().any(|r| r.slip),
        any_saturation: tel.iter().any(|r| r.saturated),
    }
}

pub const CSV_HEADER: &str =
    "t,s,v,phi,phi_dot,psi,psi_dot,phi_hat,psi_hat,v_hat_1,v_hat_2,v_hat_3,v_d,u_1,u_2,u_3,saturated,slip";

pub fn write_csv<W: Write>(tel: &[TelemetryRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in tel {
        let fields = [
            r.t, r.s, r.v, r.phi, r.phi_dot, r.psi, r.psi_dot, r.phi_hat, r.psi_hat, r.v_hat[0], r.v_hat[1],
            r.v_hat[2], r.v_d, r.u_total[0], r.u_total[1], r.u_total[2],
        ];
        for x in fields {
            write!(w, "{x:.8e},")?;
        }
        writeln!(w, "{},{}", r.saturated as u8, r.slip as u8)?;
    }
    w.flush()
}

/// Header line, then one record per tick with nine significant digits.
pub fn export_csv(tel: &[TelemetryRecord], path: impl AsRef<Path>) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(tel, io::BufWriter::new(file))
}

fn bad(line: usize, what: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {what}"))
}

pub fn read_csv<R: BufRead>(r: R) -> io::Result<Vec<TelemetryRecord>> {
    let mut lines = r.lines();
    if lines.next().transpose()?.as_deref() != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 18 {
            return Err(bad(n, format!("expected 18 fields, got {}", cols.len())));
        }
        let f: Vec<f64> = cols[..16]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| bad(n, e)))
            .collect::<io::Result<_>>()?;
        let flag = |c: &str| match c {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(n, format!("bad flag `{c}`"))),
        };
        out.push(TelemetryRecord {
            t: f[0],
            s: f[1],
            v: f[2],
            phi: f[3],
            phi_dot: f[4],
            psi: f[5],
            psi_dot: f[6],
            phi_hat: f[7],
            psi_hat: f[8],
            v_hat: [f[9], f[10], f[11]],
            v_d: f[12],
            u_total: [f[13], f[14], f[15]],
            saturated: flag(cols[16])?,
            slip: flag(cols[17])?,
        });
    }
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>) -> io::Result<Vec<TelemetryRecord>> {
    read_csv(io::BufReader::new(std::fs::File::open(path)?))
}
