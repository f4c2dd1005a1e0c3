/// One PID channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub output_limit: f64,
    /// Bound on `|ki * integral|`.
    pub integral_limit: f64,
}

impl PidState {
    pub fn new(kp: f64, ki: f64, kd: f64, output_limit: f64, integral_limit: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral: 0.0,
            prev_error: None,
            output_limit,
            integral_limit,
        }
    }

    pub fn integral_term(&self) -> f64 {
        self.ki * self.integral
    }
}

/// `u = kp e + ki int(e) + kd de/dt`, with the integral clamped so that
/// `|ki int(e)| <= integral_limit` and the output clamped to
/// `output_limit`. The derivative term is zero on the first call.
pub fn pid_step(pid: &PidState, error: f64, dt: f64) -> (f64, PidState) {
    let mut next = *pid;
    next.integral += error * dt;
    if pid.ki != 0.0 {
        let bound = pid.integral_limit / pid.ki.abs();
        next.integral = next.integral.clamp(-bound, bound);
    }
    let derivative = pid.prev_error.map_or(0.0, |e0| (error - e0) / dt);
    next.prev_error = Some(error);
    let u = pid.kp * error + pid.ki * next.integral + pid.kd * derivative;
    (u.clamp(-pid.output_limit, pid.output_limit), next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quiet_at_zero_error() {
        let pid = PidState::new(8.0, 20.0, 0.05, 12.0, 6.0);
        assert_eq!(pid_step(&pid, 0.0, 0.01).0, 0.0);
    }

    #[test]
    fn proportional_only() {
        let pid = PidState::new(0.7, 0.0, 0.0, 12.0, 6.0);
        let mut s = pid;
        for e in [0.3, -1.2, 4.0, 0.0] {
            let (u, n) = pid_step(&s, e, 0.01);
            assert_eq!(u, 0.7 * e);
            s = n;
        }
    }

    #[test]
    fn integral_is_clamped() {
        let mut s = PidState::new(0.0, 2.0, 0.0, 100.0, 1.0);
        for _ in 0..1000 {
            s = pid_step(&s, 5.0, 0.01).1;
            assert!(s.integral_term().abs() <= 1.0 + 1e-15);
        }
        assert!((s.integral_term() - 1.0).abs() < 1e-12);
    }

    /// First-order plant `tau y' + y = u` discretized exactly under a
    /// zero-order hold, driven by the PI law written out by hand.
    fn oracle_settle_time(kp: f64, ki: f64, tau: f64, dt: f64) -> f64 {
        let a = (-dt / tau).exp();
        let (mut y, mut integ) = (0.0f64, 0.0f64);
        let mut last_out = 0.0;
        for k in 0..20_000 {
            let e = 1.0 - y;
            integ += e * dt;
            let u = kp * e + ki * integ;
            y = a * y + (1.0 - a) * u;
            if (y - 1.0).abs() > 0.02 {
                last_out = (k + 1) as f64 * dt;
            }
        }
        last_out
    }

    #[test]
    fn first_order_loop_settles_like_oracle() {
        let (kp, ki, tau, dt): (f64, f64, f64, f64) = (2.0, 3.0, 0.5, 0.01);
        let a = (-dt / tau).exp();
        let mut pid = PidState::new(kp, ki, 0.0, 1e9, 1e9);
        let mut y = 0.0f64;
        let mut last_out = 0.0;
        for k in 0..20_000 {
            let (u, next) = pid_step(&pid, 1.0 - y, dt);
            pid = next;
            y = a * y + (1.0 - a) * u;
            if (y - 1.0).abs() > 0.02 {
                last_out = (k + 1) as f64 * dt;
            }
        }
        let oracle = oracle_settle_time(kp, ki, tau, dt);
        assert!(oracle > 0.0);
        assert!((last_out - oracle).abs() <= 0.05 * oracle, "{last_out} vs {oracle}");
    }

    proptest! {
        #[test]
        fn zero_gains_give_zero(errors in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let mut s = PidState::new(0.0, 0.0, 0.0, 12.0, 6.0);
            for e in errors {
                let (u, n) = pid_step(&s, e, 0.01);
                prop_assert_eq!(u, 0.0);
                s = n;
            }
        }
    }
}
