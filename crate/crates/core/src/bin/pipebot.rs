use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, Dim, Matrix, RawStorage};

use pipebot::config::{load_config, Config, ConfigError};
use pipebot::control::{design_lqr, spectral_abscissa};
use pipebot::plant::linearize;
use pipebot::sim::{export_csv, run_scenario, ScenarioError, SimError, SimScenario, PRESETS};
use pipebot::spring::{default_h_grid, stiffness_curve};

const EXIT_FAILURE: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "pipebot", version, about = "In-pipe robot design and simulation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Required spring stiffness over the pipe radius range.
    CharacterizeSpring {
        /// Config file; the shipped defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of radii in the grid.
        #[arg(long)]
        grid: Option<usize>,
        /// Write H_m, theta_rad, G_N_per_m rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Battery capacity and operating time at the peak load.
    SizeBattery {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Starting duration guess, hours.
        #[arg(long)]
        h0: Option<f64>,
        /// Convergence tolerance, hours.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Trim, linearization and LQR gain for the stabilizing states.
    LqrDesign {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write every matrix entry as name,row,col,value.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Closed-loop run of a preset or a scenario file.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset name or path to a TOML file with a [scenario] table.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn other(e: impl Display) -> Failure {
    Failure::Other(e.to_string())
}

fn config(path: Option<&Path>) -> Result<Config, ConfigError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(Config::default_config()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CharacterizeSpring { config: c, grid, csv } => characterize_spring(c.as_deref(), grid, csv.as_deref()),
        Command::SizeBattery { config: c, h0, tol } => size_battery(c.as_deref(), h0, tol),
        Command::LqrDesign { config: c, csv } => lqr_design(c.as_deref(), csv.as_deref()),
        Command::Simulate {
            config: c,
            scenario,
            csv,
            seed,
        } => simulate(c.as_deref(), scenario.as_deref(), csv.as_deref(), seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn characterize_spring(path: Option<&Path>, grid: Option<usize>, csv: Option<&Path>) -> Result<u8, Failure> {
    let cfg = config(path)?;
    let n = grid.unwrap_or(cfg.spring_grid_points);
    if n < 2 {
        return Err(Failure::Config("--grid: expected at least 2 points".into()));
    }
    let res = stiffness_curve(&cfg.geometry, &cfg.friction, cfg.traction, &default_h_grid(&cfg.geometry, n))
        .map_err(other)?;
    if let Some(p) = csv {
        let mut w = std::io::BufWriter::new(std::fs::File::create(p).map_err(other)?);
        writeln!(w, "H_m,theta_rad,G_N_per_m").map_err(other)?;
        for pt in &res.curve {
            let g = pt.g.map_or(String::new(), |g| format!("{g:.9e}"));
            writeln!(w, "{:.9e},{:.9e},{g}", pt.h, pt.theta).map_err(other)?;
        }
        w.flush().map_err(other)?;
    }
    println!("grid_points  {n}");
    println!(
        "K_required   {:.6} N/m at H = {:.6} m ({:.4} inch), theta = {:.6} rad{}",
        res.k_required,
        res.h_at_max,
        res.h_at_max / 0.0254,
        res.theta_at_max,
        if res.max_at_endpoint { " [grid endpoint]" } else { "" }
    );
    Ok(0)
}

fn size_battery(path: Option<&Path>, h0: Option<f64>, tol: Option<f64>) -> Result<u8, Failure> {
    let cfg = config(path)?;
    if h0.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
        return Err(Failure::Config("--h0: expected a positive duration in hours".into()));
    }
    if tol.is_some_and(|t| !(t > 0.0)) {
        return Err(Failure::Config("--tol: expected a positive tolerance in hours".into()));
    }
    let plan = cfg.plan_battery(h0, tol);
    println!("current_draw  {:.6} A", plan.current_draw);
    println!("capacity      {:.6} A*h", plan.capacity);
    println!("duration      {:.6} h", plan.discharge_hours);
    println!("iterations    {}", plan.iterations);
    println!("converged     {}", plan.converged);
    Ok(if plan.converged { 0 } else { EXIT_FAILURE })
}

fn print_matrix<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(name: &str, m: &Matrix<f64, R, C, S>) {
    println!("{name} ({}x{})", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>15.8e}", m[(i, j)])).collect();
        println!("  {}", row.join(" "));
    }
}

fn lqr_design(path: Option<&Path>, csv: Option<&Path>) -> Result<u8, Failure> {
    let cfg = config(path)?;
    let model = cfg.plant_model(0.0).map_err(other)?;
    let lin = linearize(&model).map_err(other)?;
    let gain = design_lqr(&lin, &cfg.lqr_weights()).map_err(other)?;
    let a = DMatrix::from_column_slice(4, 4, lin.a2.as_slice());
    let b = DMatrix::from_column_slice(4, 3, lin.b2.as_slice());
    let closed = &a - &b * &gain.k;
    let eig = closed.clone().complex_eigenvalues();

    println!("# state (phi, phi_dot, psi, psi_dot), input wheel torques N*m");
    println!("trim  {:.8e} {:.8e} {:.8e}", lin.trim[0], lin.trim[1], lin.trim[2]);
    print_matrix("A2", &a);
    print_matrix("B2", &b);
    print_matrix("K", &gain.k);
    print_matrix("P", &gain.p);
    println!("residual  {:.3e}", gain.residual);
    println!("iterations  {}", gain.iterations);
    println!("closed_loop_eigenvalues");
    for l in eig.iter() {
        println!("  {:+.8e} {:+.8e}i", l.re, l.im);
    }
    println!("spectral_abscissa  {:.8e}", spectral_abscissa(&closed));

    if let Some(p) = csv {
        let mut w = std::io::BufWriter::new(std::fs::File::create(p).map_err(other)?);
        writeln!(w, "name,row,col,value").map_err(other)?;
        for (name, m) in [("A2", &a), ("B2", &b), ("K", &gain.k), ("P", &gain.p)] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    writeln!(w, "{name},{i},{j},{:.12e}", m[(i, j)]).map_err(other)?;
                }
            }
        }
        for (j, u) in lin.trim.iter().enumerate() {
            writeln!(w, "trim,0,{j},{u:.12e}").map_err(other)?;
        }
        w.flush().map_err(other)?;
    }
    Ok(0)
}

fn simulate(path: Option<&Path>, scenario: Option<&str>, csv: Option<&Path>, seed: Option<u64>) -> Result<u8, Failure> {
    let mut cfg = config(path)?;
    match scenario {
        None => {}
        Some(name) if PRESETS.contains(&name) => {
            cfg.scenario = SimScenario::preset(name, cfg.estimation.noise).map_err(ConfigError::from)?;
            cfg.validate()?;
        }
        Some(name) if !Path::new(name).exists() => {
            return Err(ConfigError::from(ScenarioError::UnknownPreset(name.to_string())).into());
        }
        Some(file) => {
            let text = std::fs::read_to_string(file).map_err(|source| ConfigError::Io {
                path: file.to_string(),
                source,
            })?;
            cfg = cfg.with_scenario_text(&text)?;
        }
    }
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    let run = run_scenario(&cfg.scenario, &cfg).map_err(|e| match e {
        SimError::Scenario(e) => Failure::from(ConfigError::from(e)),
        e => other(e),
    })?;
    if let Some(p) = csv {
        export_csv(&run.telemetry, p).map_err(other)?;
    }

    let s = &run.summary;
    let opt = |x: Option<f64>, unit: &str| x.map_or("not reached".to_string(), |v| format!("{v:.2} {unit}"));
    println!("scenario        {} (seed {})", cfg.scenario.name, cfg.scenario.seed);
    println!("ticks           {}", run.telemetry.len());
    println!("settle_phi      {}", opt(s.settle_time_phi, "s"));
    println!("settle_psi      {}", opt(s.settle_time_psi, "s"));
    println!("velocity_rise   {}", opt(s.velocity_rise_time, "s"));
    println!("max_rate        {}", opt(s.max_rate_after_transient, "deg/s"));
    println!("final_band      phi {:.3} deg, psi {:.3} deg", s.final_band_phi, s.final_band_psi);
    println!("slip            {}", s.any_slip);
    println!("saturation      {}", s.any_saturation);
    match run.divergence {
        Some(d) => {
            eprintln!("diverged at t = {:.3} s; telemetry kept up to that tick", d.t);
            Ok(EXIT_DIVERGED)
        }
        None => Ok(0),
    }
}
