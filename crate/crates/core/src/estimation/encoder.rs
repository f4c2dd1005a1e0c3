use std::collections::VecDeque;
use std::f64::consts::TAU;

use crate::plant::PlantState;

/// Pulse timing state of the three wheel encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStream {
    pub pulses_per_rev: u32,
    pub last_pulse_times: [Option<f64>; 3],
    /// Time between the two most recent pulses.
    pub periods: [Option<f64>; 3],
    /// Rotation sense of the most recent pulse, +1 or -1.
    pub directions: [f64; 3],
    pub pulse_counts: [u64; 3],
    last_sample: Option<(f64, [f64; 3])>,
}

impl EncoderStream {
    pub fn new(pulses_per_rev: u32) -> Self {
        assert!(pulses_per_rev >= 1, "at least one pulse per revolution");
        Self {
            pulses_per_rev,
            last_pulse_times: [None; 3],
            periods: [None; 3],
            directions: [1.0; 3],
            pulse_counts: [0; 3],
            last_sample: None,
        }
    }

    fn pitch(&self) -> f64 {
        TAU / self.pulses_per_rev as f64
    }

    /// A pulse against the previous direction re-crosses the same edge, so
    /// the interval says nothing about speed and the period is dropped.
    fn record_pulse(&mut self, i: usize, t: f64, direction: f64) {
        let reversed = self.pulse_counts[i] > 0 && direction != self.directions[i];
        self.periods[i] = match self.last_pulse_times[i] {
            Some(t0) if !reversed => Some(t - t0),
            _ => None,
        };
        self.last_pulse_times[i] = Some(t);
        self.directions[i] = direction;
        self.pulse_counts[i] += 1;
    }

    /// Feeds accumulated wheel angles sampled at time `t`. A pulse fires at
    /// every multiple of `2 pi / N` crossed since the previous sample; its
    /// time is interpolated linearly between the two samples.
    pub fn observe(&mut self, angles: &[f64; 3], t: f64) {
        let pitch = self.pitch();
        if let Some((t0, a0)) = self.last_sample {
            for i in 0..3 {
                let (from, to) = (a0[i], angles[i]);
                let (k0, k1) = ((from / pitch).floor() as i64, (to / pitch).floor() as i64);
                if k0 == k1 {
                    continue;
                }
                let dir = if k1 > k0 { 1.0 } else { -1.0 };
                let marks: Vec<i64> = if k1 > k0 {
                    (k0 + 1..=k1).collect()
                } else {
                    (k1 + 1..=k0).rev().collect()
                };
                for m in marks {
                    let frac = (m as f64 * pitch - from) / (to - from);
                    self.record_pulse(i, t0 + frac * (t - t0), dir);
                }
            }
        }
        self.last_sample = Some((t, *angles));
    }
}

/// Advances `stream` with the wheel angles of `x` at time `t`.
pub fn encoder_sense(x: &PlantState, stream: &EncoderStream, t: f64) -> EncoderStream {
    let mut next = stream.clone();
    next.observe(&x.wheel_angles, t);
    next
}

/// Rim speeds `2 pi R / (N T_c)` from the latest pulse interval; `None`
/// until a wheel has produced two pulses.
pub fn encoder_velocity(stream: &EncoderStream, wheel_radius: f64) -> [Option<f64>; 3] {
    let n = stream.pulses_per_rev as f64;
    std::array::from_fn(|i| stream.periods[i].map(|tc| stream.directions[i] * TAU * wheel_radius / (n * tc)))
}

/// Like [`encoder_velocity`], but the interval is stretched to the time
/// since the last pulse when that is longer, so a wheel that stops reads a
/// decaying speed instead of its last one.
pub fn encoder_velocity_at(stream: &EncoderStream, wheel_radius: f64, t: f64) -> [Option<f64>; 3] {
    let n = stream.pulses_per_rev as f64;
    std::array::from_fn(|i| {
        let tc = stream.periods[i]?;
        let since = t - stream.last_pulse_times[i]?;
        Some(stream.directions[i] * TAU * wheel_radius / (n * tc.max(since)))
    })
}

/// Running median over the last `window` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianFilter {
    window: usize,
    buf: VecDeque<f64>,
}

impl MedianFilter {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            buf: VecDeque::with_capacity(window.max(1)),
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
        let mut v: Vec<f64> = self.buf.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(stream: &mut EncoderStream, angle: impl Fn(f64) -> f64, t_end: f64, dt: f64) {
        let steps = (t_end / dt).round() as usize;
        for k in 0..=steps {
            let t = k as f64 * dt;
            let a = angle(t);
            stream.observe(&[a, a, a], t);
        }
    }

    #[test]
    fn eq_substitution() {
        let mut s = EncoderStream::new(100);
        s.periods = [Some(0.01); 3];
        let v = encoder_velocity(&s, 0.05);
        assert!((v[0].unwrap() - 0.314_159_265_358_979_3).abs() < 1e-12);
        s.periods = [Some(1e6); 3];
        assert!(encoder_velocity(&s, 0.05)[0].unwrap() < 1e-6);
    }

    #[test]
    fn stationary_wheel_never_pulses() {
        let mut s = EncoderStream::new(16);
        run(&mut s, |_| 0.3, 5.0, 1e-3);
        assert_eq!(s.pulse_counts, [0; 3]);
        assert_eq!(encoder_velocity(&s, 0.05), [None; 3]);
    }

    #[test]
    fn constant_speed_period() {
        let w = 3.7;
        let mut s = EncoderStream::new(16);
        run(&mut s, |t| w * t, 2.0, 1e-3);
        let expected = TAU / (16.0 * w);
        assert!((s.periods[0].unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_rim_speed_within_quantization_step() {
        let (r, n, v) = (0.05, 16, 0.2);
        let mut s = EncoderStream::new(n);
        let dt = 1e-3;
        run(&mut s, |t| v / r * t, 1.0, dt);
        let tc = s.periods[0].unwrap();
        let est = encoder_velocity(&s, r)[0].unwrap();
        let step = TAU * r / (n as f64 * tc * tc) * dt;
        assert!((est - v).abs() <= step, "{est} vs {v}");
    }

    #[test]
    fn accelerating_wheel_shortens_periods() {
        let mut s = EncoderStream::new(16);
        let mut periods = Vec::new();
        let dt = 1e-4;
        for k in 0..=30_000 {
            let t = k as f64 * dt;
            s.observe(&[2.0 * t * t; 3], t);
            if let Some(p) = s.periods[0] {
                if periods.last() != Some(&p) {
                    periods.push(p);
                }
            }
        }
        assert!(periods.len() > 10);
        assert!(periods.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn error_shrinks_with_resolution() {
        // Constant angular acceleration; the pulse-interval average lags the
        // instantaneous speed by about half an interval.
        let (r, alpha, t_end) = (0.05, 4.0, 2.0);
        let mut errors = Vec::new();
        for n in [16, 64, 256, 1024] {
            let mut s = EncoderStream::new(n);
            run(&mut s, |t| 0.5 * alpha * t * t, t_end, 1e-5);
            let est = encoder_velocity(&s, r)[0].unwrap();
            errors.push((est - alpha * t_end * r).abs());
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn reverse_rotation_reads_negative() {
        let mut s = EncoderStream::new(16);
        run(&mut s, |t| -2.0 * t, 1.0, 1e-3);
        assert!(encoder_velocity(&s, 0.05)[0].unwrap() < 0.0);
    }

    #[test]
    fn stretched_interval_after_stop() {
        let mut s = EncoderStream::new(16);
        run(&mut s, |t| if t < 1.0 { 5.0 * t } else { 5.0 }, 3.0, 1e-3);
        let v = encoder_velocity_at(&s, 0.05, 3.0)[0].unwrap();
        assert!(v < 0.5 * 5.0 * 0.05 * 0.1);
    }

    #[test]
    fn dithering_on_an_edge_reads_no_speed() {
        let mut s = EncoderStream::new(16);
        run(&mut s, |t| if (t * 1e3).round() as i64 % 2 == 0 { 1e-12 } else { -1e-12 }, 0.1, 1e-3);
        assert!(s.pulse_counts[0] > 50);
        assert_eq!(encoder_velocity(&s, 0.05), [None; 3]);
        run(&mut s, |t| 3.0 * (t - 0.1) + 0.1, 0.5, 1e-3);
        assert!(encoder_velocity(&s, 0.05)[0].unwrap() > 0.0);
    }

    #[test]
    fn median_rejects_spike() {
        let mut f = MedianFilter::new(5);
        let out: Vec<f64> = [1.0, 1.0, 9.0, 1.0, 1.0].iter().map(|&x| f.push(x)).collect();
        assert_eq!(out[4], 1.0);
        assert_eq!(out[2], 1.0);
        let mut off = MedianFilter::new(1);
        assert_eq!(off.push(9.0), 9.0);
    }
}
