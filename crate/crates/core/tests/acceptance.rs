//! Acceptance suite. Runs as a plain binary so every criterion prints its
//! verdict line even when it passes.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix4, Matrix4x3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pipebot::config::Config;
use pipebot::control::{riccati_residual, solve_riccati, spectral_abscissa, uncontrollable_mode, LqrWeights};
use pipebot::estimation::{imu_sense, mahony_update, AttitudeEstimate, ImuNoise, MahonyGains};
use pipebot::model::RobotGeometry;
use pipebot::plant::{drag_force, f2, linearize, step_with_substeps, DragModel, PlantModel, PlantState};
use pipebot::sim::{read_csv, run_scenario, summarize, write_csv, SimRun, SimScenario};
use pipebot::spring::{check_pure_rolling, GRAVITY};

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: &str, ok: bool, elapsed: Duration, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {id:<26} {:>8.3} s  {detail}", elapsed.as_secs_f64());
        if !ok {
            self.failures += 1;
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

// 1. Battery sizing: 15 A*h and 3.0 h within 1 %, at most 100 iterations,
// under a second.
fn battery(rep: &mut Report, cfg: &Config) {
    let (plan, dt) = timed(|| cfg.plan_battery(None, None));
    let ok = plan.converged
        && (plan.capacity - 15.0).abs() <= 0.01 * 15.0
        && (plan.discharge_hours - 3.0).abs() <= 0.01 * 3.0
        && plan.iterations <= 100
        && dt < Duration::from_secs(1);
    rep.record(
        "1 battery sizing",
        ok,
        dt,
        format!(
            "capacity {:.4} A*h, duration {:.4} h, {} iterations",
            plan.capacity, plan.discharge_hours, plan.iterations
        ),
    );
}

// 2. Drag calibration: 18 N at 1.2 m/s relative speed, 4.5 N at 0.6 m/s.
fn drag(rep: &mut Report, cfg: &Config) {
    let (vals, dt) = timed(|| {
        let d = DragModel {
            coefficient: cfg.plant.drag_coefficient,
            flow_velocity: 0.0,
        };
        (drag_force(-1.2, &d), drag_force(-0.6, &d))
    });
    let ok = vals.0 == 18.0 && (vals.1 - 4.5).abs() <= 1e-9;
    rep.record("2 drag calibration", ok, dt, format!("F(1.2) = {} N, F(0.6) = {} N", vals.0, vals.1));
}

/// Arm angle for radius `h` by plain bisection on the arm geometry.
fn oracle_theta(h: f64, g: &RobotGeometry) -> f64 {
    let beta = |th: f64| std::f64::consts::FRAC_PI_2 - th + (g.pivot_offset_t / g.arm_length_a * th.cos()).asin();
    let target = (h / g.contact_arm_length).asin();
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2 - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // beta falls with theta
        if beta(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Required stiffness written out from the arm statics: moment balance
/// about the pivot with the traction opposing the spring, divided by the
/// spring stretch.
fn oracle_stiffness(h: f64, g: &RobotGeometry, f_n: f64, f_s: f64) -> f64 {
    let th = oracle_theta(h, g);
    let (a, t) = (g.arm_length_a, g.pivot_offset_t);
    let alpha = (t / a * th.cos()).asin();
    let beta = std::f64::consts::FRAC_PI_2 - th + alpha;
    let lever_h = g.contact_arm_length * beta.sin();
    let force = ((f_n - g.robot_mass * GRAVITY) * a * (th + alpha).cos() + f_s * lever_h) / (t * th.cos());
    let anchor = ((t + a * beta.cos()).powi(2) + (a * beta.sin()).powi(2)).sqrt();
    force / (anchor * (1.0 - th.cos()))
}

// 3. Spring characterization against a 10^4-point brute-force grid.
fn spring(rep: &mut Report, cfg: &Config) -> f64 {
    let ((res, worst_residual), dt) = timed(|| {
        let res = cfg.spring_design().expect("spring design");
        let g = &cfg.geometry;
        let beta = |th: f64| std::f64::consts::FRAC_PI_2 - th + (g.pivot_offset_t / g.arm_length_a * th.cos()).asin();
        let worst = res
            .curve
            .iter()
            .map(|p| (beta(p.theta) - (p.h / g.contact_arm_length).asin()).abs())
            .fold(0.0, f64::max);
        (res, worst)
    });
    let g = &cfg.geometry;
    let n = 10_000;
    let brute = (0..n)
        .map(|i| g.pipe_radius_min + (g.pipe_radius_max - g.pipe_radius_min) * i as f64 / (n - 1) as f64)
        .filter(|&h| oracle_theta(h, g) >= 1e-4)
        .map(|h| oracle_stiffness(h, g, cfg.friction.normal_force, cfg.traction))
        .fold(f64::NEG_INFINITY, f64::max);
    let rel = (res.k_required - brute).abs() / brute;
    let ok = rel <= 0.005 && worst_residual <= 1e-10 && dt < Duration::from_secs(5);
    rep.record(
        "3 spring characterization",
        ok,
        dt,
        format!(
            "K {:.4} N/m vs brute force {:.4} N/m (rel {:.2e}), max residual {:.1e} rad",
            res.k_required, brute, rel, worst_residual
        ),
    );
    res.k_required
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

// 4. Riccati suite: scalar closed form and 100 random stabilizable systems.
fn riccati(rep: &mut Report) {
    let ((scalar_err, worst_res, worst_abscissa, solved), dt) = timed(|| {
        let (a, b, q, r) = (1.5f64, 0.7, 2.0, 0.3);
        let exact = r * (a + (a * a + b * b * q / r).sqrt()) / (b * b);
        let w = LqrWeights::diagonal(&[q], &[r]);
        let g = solve_riccati(&DMatrix::from_element(1, 1, a), &DMatrix::from_element(1, 1, b), &w).unwrap();
        let scalar_err = (g.p[(0, 0)] - exact).abs();

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mut worst_res, mut worst_abscissa, mut solved) = (0.0f64, f64::NEG_INFINITY, 0);
        while solved < 100 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=n);
            let a = random_matrix(&mut rng, n, n);
            let b = random_matrix(&mut rng, n, m);
            if uncontrollable_mode(&a, &b).is_some() {
                continue;
            }
            let w = LqrWeights {
                q: DMatrix::identity(n, n),
                r: DMatrix::identity(m, m),
            };
            let Ok(g) = solve_riccati(&a, &b, &w) else {
                worst_res = f64::INFINITY;
                solved += 1;
                continue;
            };
            worst_res = worst_res.max(riccati_residual(&a, &b, &w, &g.p).norm());
            worst_abscissa = worst_abscissa.max(spectral_abscissa(&(&a - &b * &g.k)));
            solved += 1;
        }
        (scalar_err, worst_res, worst_abscissa, solved)
    });
    let ok = scalar_err <= 1e-12 && worst_res <= 1e-9 && worst_abscissa < 0.0 && dt < Duration::from_secs(10);
    rep.record(
        "4 riccati suite",
        ok,
        dt,
        format!(
            "scalar error {scalar_err:.1e}, {solved} systems: max residual {worst_res:.1e}, max abscissa {worst_abscissa:.3}"
        ),
    );
}

/// Second route to the Jacobians: Richardson-extrapolated central
/// differences for the states, a wide secant for the inputs (the
/// accelerations are affine in the wheel torques).
fn second_jacobians(model: &PlantModel, trim: &[f64; 3]) -> (Matrix4<f64>, Matrix4x3<f64>) {
    let x0 = [0.0; 4];
    let central = |j: usize, h: f64| {
        let (mut xp, mut xm) = (x0, x0);
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f2(model, &xp, trim), f2(model, &xm, trim));
        std::array::from_fn::<f64, 4, _>(|i| (fp[i] - fm[i]) / (2.0 * h))
    };
    let mut a = Matrix4::zeros();
    for j in 0..4 {
        let h = 1e-3;
        let (d1, d2) = (central(j, h), central(j, h / 2.0));
        for i in 0..4 {
            a[(i, j)] = (4.0 * d2[i] - d1[i]) / 3.0;
        }
    }
    let mut b = Matrix4x3::zeros();
    let f0 = f2(model, &x0, trim);
    for j in 0..3 {
        let mut u = *trim;
        u[j] += 0.1;
        let f = f2(model, &x0, &u);
        for i in 0..4 {
            b[(i, j)] = (f[i] - f0[i]) / 0.1;
        }
    }
    (a, b)
}

// 5. Linearization: primary central differences against the second route.
fn linearization(rep: &mut Report, cfg: &Config) {
    let model = cfg.plant_model(0.0).unwrap();
    let ((lin, (a_ref, b_ref)), dt) = timed(|| {
        let lin = linearize(&model).expect("trim");
        let refs = second_jacobians(&model, &lin.trim);
        (lin, refs)
    });
    // Entries that vanish analytically are compared against a floor scaled
    // to the largest entry of the matrix.
    let worst = |x: &[f64], y: &[f64]| {
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).abs() / (q.abs().max(1e-6 * scale)))
            .fold(0.0f64, f64::max)
    };
    let ea = worst(lin.a2.as_slice(), a_ref.as_slice());
    let eb = worst(lin.b2.as_slice(), b_ref.as_slice());
    let ok = ea <= 1e-6 && eb <= 1e-6 && dt < Duration::from_secs(1);
    rep.record(
        "5 linearization",
        ok,
        dt,
        format!("max relative disagreement A2 {ea:.1e}, B2 {eb:.1e}"),
    );
}

struct Runs {
    iterations: Vec<SimRun>,
    fast: SimRun,
}

// 6. Stabilization envelope over the four iteration presets.
fn stabilization(rep: &mut Report, cfg: &Config) -> Runs {
    let ((runs, fast), dt) = timed(|| {
        let runs: Vec<SimRun> = (1..=4)
            .map(|i| {
                let sc = SimScenario::preset(&format!("iteration-{i}"), cfg.estimation.noise).unwrap();
                run_scenario(&sc, cfg).expect("iteration run")
            })
            .collect();
        let sc = SimScenario::preset("sim-0.35", cfg.estimation.noise).unwrap();
        (runs, run_scenario(&sc, cfg).expect("sim-0.35 run"))
    });
    let mut ok = dt < Duration::from_secs(30);
    let mut detail = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let s = &run.summary;
        let rise_limit = if i == 3 { 6.0 } else { 4.0 };
        let within = |t: Option<f64>, lim: f64| t.is_some_and(|t| t <= lim);
        let good = run.divergence.is_none()
            && within(s.settle_time_phi, 3.0)
            && within(s.settle_time_psi, 3.0)
            && within(s.velocity_rise_time, rise_limit);
        ok &= good;
        let f = |t: Option<f64>| t.map_or("-".into(), |t| format!("{t:.2}"));
        detail.push(format!(
            "it{}: {}/{}/{} s",
            i + 1,
            f(s.settle_time_phi),
            f(s.settle_time_psi),
            f(s.velocity_rise_time)
        ));
    }
    rep.record(
        "6 stabilization envelope",
        ok,
        dt,
        format!("settle phi/psi, rise: {}", detail.join(", ")),
    );
    Runs { iterations: runs, fast }
}

// 7. Rate envelope at 0.35 m/s after the settle time.
fn rate_envelope(rep: &mut Report, runs: &Runs) {
    let (rates, dt) = timed(|| {
        [&runs.iterations[3], &runs.fast].map(|r| (r.divergence.is_none(), r.summary.max_rate_after_transient))
    });
    let ok = rates.iter().all(|(fin, r)| *fin && r.is_some_and(|r| r <= 5.0));
    let f = |r: Option<f64>| r.map_or("unsettled".into(), |r| format!("{r:.2} deg/s"));
    rep.record(
        "7 rate envelope",
        ok,
        dt,
        format!("iteration-4 {}, sim-0.35 {}", f(rates[0].1), f(rates[1].1)),
    );
}

// 8. No slip anywhere when the press force comes from the sized spring.
fn pure_rolling(rep: &mut Report, cfg: &Config, k_required: f64, runs: &Runs) {
    let ((f_spring, design_ok, slips), dt) = timed(|| {
        let f_spring = cfg.press_force().unwrap();
        let design_ok = check_pure_rolling(cfg.traction, &cfg.friction);
        let slips = runs.iterations.iter().chain([&runs.fast]).filter(|r| r.summary.any_slip).count();
        (f_spring, design_ok, slips)
    });
    let ok = f_spring >= cfg.friction.normal_force && design_ok && slips == 0;
    rep.record(
        "8 pure rolling",
        ok,
        dt,
        format!(
            "K {k_required:.1} N/m presses {f_spring:.2} N >= {:.2} N, slipping runs {slips}/5",
            cfg.friction.normal_force
        ),
    );
}

// 9. Numerical hygiene: RK4 order, quaternion norm, byte-identical CSV.
fn hygiene(rep: &mut Report, cfg: &Config) {
    let ((order, drift, identical, reloaded), dt) = timed(|| {
        // Commands of a closed-loop second, replayed under zero-order hold.
        let mut sc = SimScenario::preset("iteration-2", ImuNoise::NONE).unwrap();
        sc.duration = 1.0;
        let run = run_scenario(&sc, cfg).unwrap();
        let model = cfg.plant_model(0.0).unwrap();
        let period = cfg.control.control_period;
        let lin = linearize(&model).unwrap();
        let mut x0 = PlantState::rolling(&model, 0.0, 0.0, [sc.initial_phi, 0.0, sc.initial_psi, 0.0]);
        x0.motor_currents = lin.trim.map(|tau| tau / model.torque_per_amp());
        let replay = |n: usize| {
            let mut x = x0;
            for r in &run.telemetry[..run.telemetry.len() - 1] {
                x = step_with_substeps(&x, &r.u_total, &model, period, n).unwrap().state;
            }
            x.to_vector()
        };
        let exact = replay(1280);
        let errs: Vec<f64> = [20, 40, 80].iter().map(|&n| (replay(n) - &exact).norm()).collect();
        let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = ImuNoise {
            gyro_sigma: 0.05,
            accel_sigma: 0.5,
            gyro_bias: [0.01, -0.02, 0.005],
        };
        let mut est = AttitudeEstimate::from_angles(0.1, -0.05);
        let mut drift = 0.0f64;
        let x = PlantState::rolling(&model, 0.0, 0.0, [0.05, 0.3, -0.02, -0.2]);
        for k in 0..1_000_000 {
            let s = imu_sense(&x, k as f64 * 1e-3, 9.81, &noise, &mut rng);
            est = mahony_update(&est, &s, &MahonyGains::default(), 1e-3);
            if k % 1000 == 999 {
                drift = drift.max((est.quaternion.norm() - 1.0).abs());
            }
        }
        drift = drift.max((est.quaternion.norm() - 1.0).abs());

        let sc = SimScenario::preset("sim-0.12", cfg.estimation.noise).unwrap();
        let csv = |run: &SimRun| {
            let mut buf = Vec::new();
            write_csv(&run.telemetry, &mut buf).unwrap();
            buf
        };
        let first = run_scenario(&sc, cfg).unwrap();
        let (a, b) = (csv(&first), csv(&run_scenario(&sc, cfg).unwrap()));
        let back = read_csv(a.as_slice()).unwrap();
        // Every stored value comes back rounded to nine significant digits.
        let (x, y) = (summarize(&back), &first.summary);
        let near = |p: Option<f64>, q: Option<f64>| match (p, q) {
            (Some(p), Some(q)) => (p - q).abs() <= 1e-8 * q.abs().max(1.0),
            (p, q) => p == q,
        };
        let reloaded = near(x.settle_time_phi, y.settle_time_phi)
            && near(x.settle_time_psi, y.settle_time_psi)
            && near(x.velocity_rise_time, y.velocity_rise_time)
            && near(x.max_rate_after_transient, y.max_rate_after_transient)
            && near(Some(x.final_band_phi), Some(y.final_band_phi))
            && near(Some(x.final_band_psi), Some(y.final_band_psi))
            && x.any_slip == y.any_slip
            && x.any_saturation == y.any_saturation;
        (order, drift, a == b, reloaded)
    });
    let ok = order >= 3.7 && drift <= 1e-9 && identical && reloaded;
    rep.record(
        "9 numerical hygiene",
        ok,
        dt,
        format!(
            "RK4 order {order:.2}, quaternion drift {drift:.1e}, identical CSV {identical}, reload summary {reloaded}"
        ),
    );
}

fn main() {
    let cfg = Config::default_config();
    let mut rep = Report { failures: 0 };
    battery(&mut rep, &cfg);
    drag(&mut rep, &cfg);
    let k = spring(&mut rep, &cfg);
    riccati(&mut rep);
    linearization(&mut rep, &cfg);
    let runs = stabilization(&mut rep, &cfg);
    rate_envelope(&mut rep, &runs);
    pure_rolling(&mut rep, &cfg, k, &runs);
    hygiene(&mut rep, &cfg);
    if rep.failures > 0 {
        println!("{} criteria failed", rep.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
