//! Piecewise-analytic detuning schedules γ(t).
//!
//! A schedule describes the relative detuning of the well, ω(t) = (1 + γ(t)) ω₀,
//! as contiguous segments of analytic forms. Schedules are built through
//! [`ScheduleBuilder`], which tracks the running value of γ so that every
//! segment joint is continuous by construction (γ̇ may kink). γ = −1 turns the
//! well off entirely; values below −1 (an inverted well) are rejected.

use thiserror::Error;

/// Quadratic-coupling coefficient α(γ) = γ (1 + γ/2).
///
/// In the reference-mode ladder basis the quadratic Hamiltonian is
/// ħω₀[(a†a + ½) + (α/2)(a† + a)²], and (1 + γ)² = 1 + 2α.
#[inline]
pub fn alpha_of_gamma(gamma: f64) -> f64 {
    gamma * (1.0 + 0.5 * gamma)
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScheduleError {
    #[error("time {t} outside schedule domain [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("segment duration must be non-negative, got {0}")]
    NegativeDuration(f64),
    #[error("zero-duration segment may not jump from γ={from} to γ={to}")]
    ZeroDurationJump { from: f64, to: f64 },
    #[error("γ reaches {min_gamma} in segment {index}; the well would invert (γ < -1)")]
    BelowFloor { index: usize, min_gamma: f64 },
    #[error("γ value {0} is not finite")]
    NotFinite(f64),
}

/// A time-dependent detuning the quantum integrators can evolve under.
///
/// Implementors must be deterministic. `gamma` is only queried inside the
/// span; callers clamp rounding overshoot at the span edges.
pub trait GammaSource {
    /// Detuning at time `t` (same unit as `span`).
    fn gamma(&self, t: f64) -> f64;
    /// Domain of definition (start, end).
    fn span(&self) -> (f64, f64);
    /// Interior times where the analytic form changes; adaptive integrators
    /// restart at these to keep their error estimates valid.
    fn breakpoints(&self) -> Vec<f64>;
}

impl<T: GammaSource + ?Sized> GammaSource for &T {
    fn gamma(&self, t: f64) -> f64 {
        (**self).gamma(t)
    }
    fn span(&self) -> (f64, f64) {
        (**self).span()
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Form {
    /// γ = value.
    Constant { value: f64 },
    /// γ(τ) = from + (to − from) sin²(π τ / 2d): smooth half-oscillation
    /// between endpoints with γ̇ = 0 at both ends.
    Blend { from: f64, to: f64 },
    /// γ(τ) = offset + amplitude · sin(2π cycles τ/d + phase).
    Sinusoid { offset: f64, amplitude: f64, cycles: f64, phase: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    t_start: f64,
    t_end: f64,
    form: Form,
}

impl Segment {
    fn eval(&self, t: f64) -> f64 {
        let d = self.t_end - self.t_start;
        let tau = (t - self.t_start).clamp(0.0, d);
        match self.form {
            Form::Constant { value } => value,
            Form::Blend { from, to } => {
                let s = (0.5 * std::f64::consts::PI * tau / d).sin();
                from + (to - from) * s * s
            }
            Form::Sinusoid { offset, amplitude, cycles, phase } => {
                let k = 2.0 * std::f64::consts::PI * cycles / d;
                offset + amplitude * (k * tau + phase).sin()
            }
        }
    }

    fn end_value(&self) -> f64 {
        match self.form {
            Form::Constant { value } => value,
            Form::Blend { to, .. } => to,
            Form::Sinusoid { .. } => self.eval(self.t_end),
        }
    }

    /// Exact minimum of γ over the segment.
    fn min_value(&self) -> f64 {
        match self.form {
            Form::Constant { value } => value,
            Form::Blend { from, to } => from.min(to),
            Form::Sinusoid { offset, amplitude, cycles, phase } => {
                let d = self.t_end - self.t_start;
                let k = 2.0 * std::f64::consts::PI * cycles / d;
                let mut min = self.eval(self.t_start).min(self.eval(self.t_end));
                if k.abs() > 0.0 {
                    // Interior extrema at k τ + phase = π/2 + n π.
                    let half = std::f64::consts::FRAC_PI_2;
                    let n0 = ((k * 0.0 + phase - half) / std::f64::consts::PI).ceil() as i64;
                    let n1 = ((k * d + phase - half) / std::f64::consts::PI).floor() as i64;
                    for n in n0..=n1 {
                        let v = offset + amplitude * (half + n as f64 * std::f64::consts::PI).sin();
                        min = min.min(v);
                    }
                }
                min
            }
        }
    }
}

/// A contiguous, continuous detuning schedule on [0, total_duration].
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSchedule {
    start_gamma: f64,
    segments: Vec<Segment>,
}

impl GammaSchedule {
    pub fn builder(start_gamma: f64) -> ScheduleBuilder {
        ScheduleBuilder { start_gamma, current: start_gamma, t: 0.0, segments: Vec::new(), error: None }
    }

    /// Degenerate schedule of zero duration, γ(0) = start_gamma.
    pub fn trivial(start_gamma: f64) -> Result<Self, ScheduleError> {
        Self::builder(start_gamma).build()
    }

    /// A single constant segment.
    pub fn constant(value: f64, duration: f64) -> Result<Self, ScheduleError> {
        Self::builder(value).hold(duration).build()
    }

    /// Smooth ramp γ(t) = γ_final sin²(π t / 2 t_f).
    pub fn sin2_ramp(gamma_final: f64, t_f: f64) -> Result<Self, ScheduleError> {
        Self::builder(0.0).blend_to(gamma_final, t_f).build()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn start_gamma(&self) -> f64 {
        self.start_gamma
    }

    pub fn end_gamma(&self) -> f64 {
        self.segments.last().map_or(self.start_gamma, |s| s.end_value())
    }

    /// Detuning at `t`, rejecting times outside [0, total_duration].
    pub fn gamma_eval(&self, t: f64) -> Result<f64, ScheduleError> {
        let end = self.total_duration();
        if !t.is_finite() || t < 0.0 || t > end {
            return Err(ScheduleError::OutOfRange { t, end });
        }
        Ok(self.gamma(t))
    }
}

impl GammaSource for GammaSchedule {
    fn gamma(&self, t: f64) -> f64 {
        if self.segments.is_empty() {
            return self.start_gamma;
        }
        let t = t.clamp(0.0, self.total_duration());
        // First segment whose end lies at or beyond t; joints are continuous
        // so either neighbor agrees there.
        let idx = self.segments.partition_point(|s| s.t_end < t);
        self.segments[idx.min(self.segments.len() - 1)].eval(t)
    }

    fn span(&self) -> (f64, f64) {
        (0.0, self.total_duration())
    }

    fn breakpoints(&self) -> Vec<f64> {
        let n = self.segments.len();
        self.segments.iter().take(n.saturating_sub(1)).map(|s| s.t_end).collect()
    }
}

/// Appends segments while tracking the running γ so joints stay continuous.
#[derive(Debug, Clone)]
pub struct ScheduleBuilder {
    start_gamma: f64,
    current: f64,
    t: f64,
    segments: Vec<Segment>,
    error: Option<ScheduleError>,
}

impl ScheduleBuilder {
    fn push(&mut self, duration: f64, form: Form) {
        if self.error.is_some() {
            return;
        }
        if !(duration >= 0.0) {
            self.error = Some(ScheduleError::NegativeDuration(duration));
            return;
        }
        if duration == 0.0 {
            return;
        }
        let seg = Segment { t_start: self.t, t_end: self.t + duration, form };
        self.t = seg.t_end;
        self.current = seg.end_value();
        self.segments.push(seg);
    }

    /// Hold the current γ for `duration`.
    pub fn hold(mut self, duration: f64) -> Self {
        let value = self.current;
        self.push(duration, Form::Constant { value });
        self
    }

    /// Smooth sin²-profile blend from the current γ to `target`.
    pub fn blend_to(mut self, target: f64, duration: f64) -> Self {
        if self.error.is_none() && duration == 0.0 && (target - self.current).abs() > 1.0e-12 {
            self.error = Some(ScheduleError::ZeroDurationJump { from: self.current, to: target });
            return self;
        }
        let from = self.current;
        self.push(duration, Form::Blend { from, to: target });
        self
    }

    /// Sinusoidal wobble starting from the current γ with γ(0) continuity;
    /// the offset is chosen as current − amplitude·sin(phase).
    pub fn wobble(mut self, amplitude: f64, cycles: f64, phase: f64, duration: f64) -> Self {
        let offset = self.current - amplitude * phase.sin();
        self.push(duration, Form::Sinusoid { offset, amplitude, cycles, phase });
        self
    }

    /// The running γ value the next segment would start from.
    pub fn current_gamma(&self) -> f64 {
        self.current
    }

    pub fn build(self) -> Result<GammaSchedule, ScheduleError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        for (index, seg) in self.segments.iter().enumerate() {
            let min_gamma = seg.min_value();
            if !min_gamma.is_finite() {
                return Err(ScheduleError::NotFinite(min_gamma));
            }
            if min_gamma < -1.0 {
                return Err(ScheduleError::BelowFloor { index, min_gamma });
            }
        }
        if !self.start_gamma.is_finite() {
            return Err(ScheduleError::NotFinite(self.start_gamma));
        }
        Ok(GammaSchedule { start_gamma: self.start_gamma, segments: self.segments })
    }
}

/// A smooth random schedule assembled from blends, holds, and wobbles.
///
/// `uniform` supplies numbers in [0, 1); the schedule is a deterministic
/// function of that stream. |γ| stays within `max_abs_gamma` (≤ 1 enforced
/// against well inversion with a small safety margin).
pub fn random_smooth_schedule(
    duration: f64,
    max_abs_gamma: f64,
    mut uniform: impl FnMut() -> f64,
) -> Result<GammaSchedule, ScheduleError> {
    let hi = max_abs_gamma.min(1.0);
    let lo = -(max_abs_gamma.min(0.98));
    let n_pieces = 2 + (uniform() * 4.0) as usize;
    // Random positive piece durations normalized to the requested total.
    let mut weights: Vec<f64> = (0..n_pieces).map(|_| 0.2 + uniform()).collect();
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= duration / wsum;
    }
    let mut b = GammaSchedule::builder(0.0);
    for (i, w) in weights.iter().enumerate() {
        let kind = uniform();
        if kind < 0.5 || i + 1 == n_pieces {
            let target = lo + (hi - lo) * uniform();
            b = b.blend_to(target, *w);
        } else if kind < 0.7 {
            b = b.hold(*w);
        } else {
            let current = b.current_gamma();
            let headroom = (current - lo).min(hi - current).max(0.0);
            let amplitude = 0.9 * headroom * uniform();
            let cycles = 0.5 + 2.5 * uniform();
            b = b.wobble(amplitude, cycles, 0.0, *w);
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_values() {
        assert_eq!(alpha_of_gamma(0.0), 0.0);
        assert_eq!(alpha_of_gamma(1.0), 1.5);
        assert_eq!(alpha_of_gamma(-1.0), -0.5);
        // (1+γ)² = 1 + 2α for arbitrary γ.
        for i in 0..50 {
            let g = -1.0 + 0.07 * i as f64;
            let lhs = (1.0 + g) * (1.0 + g);
            let rhs = 1.0 + 2.0 * alpha_of_gamma(g);
            assert!((lhs - rhs).abs() < 1.0e-14 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn ramp_hits_endpoints() {
        let s = GammaSchedule::sin2_ramp(1.0, 0.5).unwrap();
        assert_eq!(s.gamma_eval(0.0).unwrap(), 0.0);
        assert!((s.gamma_eval(0.5).unwrap() - 1.0).abs() < 1.0e-15);
        assert!((s.gamma_eval(0.25).unwrap() - 0.5).abs() < 1.0e-15);
        assert_eq!(s.end_gamma(), 1.0);
    }

    #[test]
    fn release_and_catch_forms() {
        // Open the well smoothly to off (γ: 0 → −1), coast, close it again.
        let s = GammaSchedule::builder(0.0)
            .hold(3.0)
            .blend_to(-1.0, 0.5)
            .hold(0.7)
            .blend_to(0.0, 1.0)
            .build()
            .unwrap();
        assert_eq!(s.total_duration(), 5.2);
        // Release segment equals −sin²(π(t−t_p)/2 t_s1).
        let t = 3.2;
        let expect = -((std::f64::consts::PI * (t - 3.0) / (2.0 * 0.5)).sin()).powi(2);
        assert!((s.gamma_eval(t).unwrap() - expect).abs() < 1.0e-15);
        // Flight is fully off.
        assert_eq!(s.gamma_eval(3.8).unwrap(), -1.0);
        // Catch segment equals −cos²(π(t−t_off)/2 t_s3).
        let t = 4.9;
        let expect = -((std::f64::consts::PI * (t - 4.2) / (2.0 * 1.0)).cos()).powi(2);
        assert!((s.gamma_eval(t).unwrap() - expect).abs() < 1.0e-14);
        assert!((s.gamma_eval(5.2).unwrap()).abs() < 1.0e-15);
        assert_eq!(s.breakpoints(), vec![3.0, 3.5, 4.2]);
    }

    #[test]
    fn joints_are_continuous() {
        let s = GammaSchedule::builder(0.0)
            .blend_to(0.8, 1.0)
            .wobble(0.3, 1.75, 0.4, 2.0)
            .hold(0.5)
            .blend_to(-0.5, 1.0)
            .build()
            .unwrap();
        for &bp in &s.breakpoints() {
            let eps = 1.0e-9;
            let before = s.gamma_eval(bp - eps).unwrap();
            let after = s.gamma_eval(bp + eps).unwrap();
            assert!(
                (before - after).abs() < 1.0e-6,
                "jump at t={bp}: {before} vs {after}"
            );
        }
    }

    #[test]
    fn rejects_inverted_well_and_bad_durations() {
        assert!(matches!(
            GammaSchedule::builder(0.0).blend_to(-1.2, 1.0).build(),
            Err(ScheduleError::BelowFloor { .. })
        ));
        assert!(matches!(
            GammaSchedule::builder(0.0).hold(-1.0).build(),
            Err(ScheduleError::NegativeDuration(_))
        ));
        assert!(matches!(
            GammaSchedule::builder(0.0).blend_to(-1.0, 0.0).build(),
            Err(ScheduleError::ZeroDurationJump { .. })
        ));
        // Wobble dipping below −1 is caught by the exact segment minimum.
        assert!(matches!(
            GammaSchedule::builder(-0.8).wobble(0.5, 1.0, 0.0, 1.0).build(),
            Err(ScheduleError::BelowFloor { .. })
        ));
    }

    #[test]
    fn eval_domain() {
        let s = GammaSchedule::constant(0.5, 2.0).unwrap();
        assert!(matches!(s.gamma_eval(-0.1), Err(ScheduleError::OutOfRange { .. })));
        assert!(matches!(s.gamma_eval(2.1), Err(ScheduleError::OutOfRange { .. })));
        assert_eq!(s.gamma_eval(2.0).unwrap(), 0.5);
        let trivial = GammaSchedule::trivial(0.0).unwrap();
        assert_eq!(trivial.total_duration(), 0.0);
        assert_eq!(trivial.gamma_eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn random_schedules_stay_in_bounds() {
        // Low-discrepancy stand-in for an RNG keeps this test dependency-free.
        let mut x = 0.5_f64;
        let mut uniform = || {
            x = (x + 0.754_877_666_246_692_9) % 1.0;
            x
        };
        for _ in 0..40 {
            let s = random_smooth_schedule(10.0, 1.0, &mut uniform).unwrap();
            let end = s.total_duration();
            assert!((end - 10.0).abs() < 1.0e-9);
            for i in 0..=400 {
                let t = end * i as f64 / 400.0;
                let g = s.gamma_eval(t).unwrap();
                assert!(g >= -1.0 && g <= 1.0, "γ={g} out of bounds at t={t}");
            }
        }
    }
}
