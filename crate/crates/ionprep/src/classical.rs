//! Classical motion of one or two ions in the time-varying well.
//!
//! Positions are SI at the API and dimensionless inside (lengths in units of
//! the single-ion ground-state length, times in 1/ω₀). The well exerts
//! −m ω₀²(1+γ)²(c − c_f); two ions add their mutual Coulomb repulsion with no
//! quadratic expansion. During a catch the well centers track
//! c_{f,j} = c_j − η ċ_j, which turns the well force into pure viscous
//! damping −m ω₀²(1+γ)² η ċ_j and brings the ions to rest wherever they are.

use thiserror::Error;

use crate::ode::{self, OdeError, OdeOptions};
use crate::schedule::{GammaSchedule, GammaSource, ScheduleError};
use crate::units::PhysicalParams;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("ion separation {separation:.3e} m fell below {floor:.1e} m at t = {t:.4e} s")]
    IonsTooClose { t: f64, separation: f64, floor: f64 },
    #[error("free-flight search failed: {reason}")]
    SearchFailure { reason: String },
    #[error("sample times must be ascending and within [0, {end:.4e}], got {t:.4e}")]
    BadSampleTime { t: f64, end: f64 },
    #[error("schedule construction failed: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// Moving-well catch: from `activation` onward each well center tracks
/// c_{f,j}(t) = c_j(t) − η ċ_j(t); before that the wells sit at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatchLaw {
    /// Damping time constant η, s.
    pub eta: f64,
    /// Time the tracking law switches on, s.
    pub activation: f64,
}

/// Where the single-ion well center sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenterLaw {
    Static { center: f64 },
    Catch(CatchLaw),
}

#[derive(Debug, Clone, Copy)]
pub struct ClassicalOptions {
    pub ode: OdeOptions,
    /// Two ions closer than this abort the run, m.
    pub separation_floor: f64,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self { ode: OdeOptions::tol(1.0e-10, 1.0e-12), separation_floor: 1.0e-9 }
    }
}

/// Sampled classical solution; one inner vector per ion, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub well_centers: Vec<Vec<f64>>,
    /// Relative well strength 1 + γ(t) at each sample.
    pub well_strength: Vec<f64>,
}

impl ClassicalTrajectory {
    pub fn ions(&self) -> usize {
        self.positions.len()
    }

    /// Position and velocity of each ion at the last sample.
    pub fn final_state(&self) -> Vec<(f64, f64)> {
        (0..self.ions())
            .map(|i| {
                let k = self.times.len() - 1;
                (self.positions[i][k], self.velocities[i][k])
            })
            .collect()
    }
}

fn check_times(times: &[f64], end: f64) -> Result<(), ClassicalError> {
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev) || t > end * (1.0 + 1.0e-12) + f64::EPSILON {
            return Err(ClassicalError::BadSampleTime { t, end });
        }
        prev = t;
    }
    Ok(())
}

fn breakpoint_spans(schedule: &GammaSchedule, extra: Option<f64>, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = schedule
        .breakpoints()
        .into_iter()
        .chain(extra)
        .filter(|&c| c > a && c < b)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut spans = Vec::with_capacity(cuts.len() + 1);
    let mut prev = a;
    for c in cuts {
        spans.push((prev, c));
        prev = c;
    }
    spans.push((prev, b));
    spans
}

/// One ion in a schedule-driven well.
///
/// `initial` is (position, velocity) in SI; samples are taken at `times`.
pub fn integrate_single(
    params: &PhysicalParams,
    schedule: &GammaSchedule,
    law: &CenterLaw,
    initial: (f64, f64),
    times: &[f64],
    opts: &ClassicalOptions,
) -> Result<ClassicalTrajectory, ClassicalError> {
    let end = schedule.total_duration();
    check_times(times, end)?;
    let frame = params.frame();
    let omega0 = params.omega0;
    let eta_dim = |law: &CenterLaw| match law {
        CenterLaw::Static { .. } => 0.0,
        CenterLaw::Catch(c) => omega0 * c.eta,
    };
    let (center_dim, activation) = match law {
        CenterLaw::Static { center } => (frame.length_from_si(*center), f64::INFINITY),
        CenterLaw::Catch(c) => (0.0, c.activation),
    };
    let eta = eta_dim(law);
    let act_s = if activation.is_finite() { omega0 * activation } else { f64::INFINITY };

    let mut y = [frame.length_from_si(initial.0), frame.velocity_from_si(initial.1)];
    let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let g = schedule.gamma(s / omega0);
        let k = (1.0 + g) * (1.0 + g);
        dy[0] = y[1];
        dy[1] = if s >= act_s { -k * eta * y[1] } else { -k * (y[0] - center_dim) };
    };

    let mut out = TrajectoryAccum::new(1, times.len());
    let mut prev = times.first().copied().unwrap_or(0.0);
    let record = |out: &mut TrajectoryAccum, t: f64, y: &[f64]| {
        let gamma = schedule.gamma(t);
        let pos = frame.length_to_si(y[0]);
        let vel = frame.velocity_to_si(y[1]);
        let center = match law {
            CenterLaw::Static { center } => *center,
            CenterLaw::Catch(c) => {
                if t < c.activation {
                    0.0
                } else {
                    pos - c.eta * vel
                }
            }
        };
        out.push(t, &[pos], &[vel], &[center], 1.0 + gamma);
    };
    if let Some(&t0) = times.first() {
        record(&mut out, t0, &y);
    }
    for &t in times.iter().skip(1) {
        for (a, b) in breakpoint_spans(schedule, law_activation(law), prev, t) {
            ode::solve(&mut rhs, omega0 * a, omega0 * b, &mut y, &opts.ode)?;
        }
        record(&mut out, t, &y);
        prev = t;
    }
    Ok(out.finish())
}

fn law_activation(law: &CenterLaw) -> Option<f64> {
    match law {
        CenterLaw::Static { .. } => None,
        CenterLaw::Catch(c) => Some(c.activation),
    }
}

/// Two like ions sharing the well, starting from rest at the equilibrium
/// positions ±d (d from [`PhysicalParams::two_ion_half_separation`]); the
/// Coulomb repulsion is kept exact.
pub fn integrate_two_ion(
    params: &PhysicalParams,
    schedule: &GammaSchedule,
    catch: &CatchLaw,
    times: &[f64],
    opts: &ClassicalOptions,
) -> Result<ClassicalTrajectory, ClassicalError> {
    let end = schedule.total_duration();
    check_times(times, end)?;
    let frame = params.frame();
    let omega0 = params.omega0;
    let length = frame.length;
    let kappa = params.coulomb_coupling()
        / (params.mass * omega0 * omega0 * length * length * length);
    let xi_eq = (0.25 * kappa).cbrt();
    let eta = omega0 * catch.eta;
    let act_s = omega0 * catch.activation;
    let floor_dim = opts.separation_floor / length;

    let mut y = [xi_eq, 0.0, -xi_eq, 0.0];
    let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let g = schedule.gamma(s / omega0);
        let k = (1.0 + g) * (1.0 + g);
        let sep = y[0] - y[2];
        let coulomb = kappa / (sep * sep);
        dy[0] = y[1];
        dy[2] = y[3];
        if s >= act_s {
            dy[1] = -k * eta * y[1] + coulomb;
            dy[3] = -k * eta * y[3] - coulomb;
        } else {
            dy[1] = -k * y[0] + coulomb;
            dy[3] = -k * y[2] - coulomb;
        }
    };

    let mut too_close: Option<(f64, f64)> = None;
    let mut out = TrajectoryAccum::new(2, times.len());
    let record = |out: &mut TrajectoryAccum, t: f64, y: &[f64]| {
        let gamma = schedule.gamma(t);
        let pos = [frame.length_to_si(y[0]), frame.length_to_si(y[2])];
        let vel = [frame.velocity_to_si(y[1]), frame.velocity_to_si(y[3])];
        let centers = if t < catch.activation {
            [0.0, 0.0]
        } else {
            [pos[0] - catch.eta * vel[0], pos[1] - catch.eta * vel[1]]
        };
        out.push(t, &pos, &vel, &centers, 1.0 + gamma);
    };
    if let Some(&t0) = times.first() {
        record(&mut out, t0, &y);
    }
    let mut prev = times.first().copied().unwrap_or(0.0);
    for &t in times.iter().skip(1) {
        for (a, b) in breakpoint_spans(schedule, Some(catch.activation), prev, t) {
            let res = ode::solve_observed(
                &mut rhs,
                omega0 * a,
                omega0 * b,
                &mut y,
                &opts.ode,
                &mut |s, y| {
                    let sep = y[0] - y[2];
                    if sep < floor_dim {
                        too_close = Some((s / omega0, sep * length));
                        false
                    } else {
                        true
                    }
                },
            );
            match res {
                Ok(_) => {}
                Err(OdeError::Halted { t }) => {
                    let (t, separation) = too_close.unwrap_or((t / omega0, f64::NAN));
                    return Err(ClassicalError::IonsTooClose {
                        t,
                        separation,
                        floor: opts.separation_floor,
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        record(&mut out, t, &y);
        prev = t;
    }
    Ok(out.finish())
}

/// The hold → release → free flight → catch schedule of a separation run.
pub fn release_catch_schedule(
    hold: f64,
    release: f64,
    flight: f64,
    catch_ramp: f64,
) -> Result<GammaSchedule, ScheduleError> {
    GammaSchedule::builder(0.0)
        .hold(hold)
        .blend_to(-1.0, release)
        .hold(flight)
        .blend_to(0.0, catch_ramp)
        .build()
}

/// Find the free-flight duration t_f2 such that the two ions end
/// `target_separation` apart after the catch.
///
/// The final separation grows monotonically with the flight time, so the
/// root is bracketed by doubling and then bisected until the bracket
/// shrinks below `rel_tol` (relative, on the duration).
pub fn find_free_flight_duration(
    params: &PhysicalParams,
    hold: f64,
    release: f64,
    catch_ramp: f64,
    eta: f64,
    target_separation: f64,
    rel_tol: f64,
    opts: &ClassicalOptions,
) -> Result<f64, ClassicalError> {
    let tol = rel_tol.max(1.0e-12);
    if release == 0.0 && catch_ramp == 0.0 {
        // The well never opens; the ions stay at the equilibrium separation.
        let sep0 = 2.0 * params.two_ion_half_separation();
        if (sep0 - target_separation).abs() <= tol * target_separation {
            return Ok(0.0);
        }
        return Err(ClassicalError::SearchFailure {
            reason: format!(
                "zero-duration release and catch cannot move the ions off {sep0:.4e} m"
            ),
        });
    }

    let sep_for = |flight: f64| -> Result<f64, ClassicalError> {
        let schedule = release_catch_schedule(hold, release, flight, catch_ramp)?;
        let end = schedule.total_duration();
        let catch = CatchLaw { eta, activation: hold + release + flight };
        let traj = integrate_two_ion(params, &schedule, &catch, &[0.0, end], opts)?;
        let fin = traj.final_state();
        Ok(fin[0].0 - fin[1].0)
    };

    let sep0 = sep_for(0.0)?;
    if (sep0 - target_separation).abs() <= tol * target_separation {
        return Ok(0.0);
    }
    if sep0 > target_separation {
        return Err(ClassicalError::SearchFailure {
            reason: format!(
                "target {target_separation:.4e} m below the {sep0:.4e} m reached with no flight"
            ),
        });
    }

    let period = 2.0 * std::f64::consts::PI / params.omega0;
    let mut hi = 0.25 * period;
    let mut lo = 0.0;
    let mut grew = 0;
    while sep_for(hi)? < target_separation {
        lo = hi;
        hi *= 2.0;
        grew += 1;
        if grew > 24 {
            return Err(ClassicalError::SearchFailure {
                reason: format!("separation target {target_separation:.4e} m not reached after {hi:.3e} s of flight"),
            });
        }
    }
    while hi - lo > tol.max(1.0e-14) * hi {
        let mid = 0.5 * (lo + hi);
        if sep_for(mid)? < target_separation {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

struct TrajectoryAccum {
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    well_centers: Vec<Vec<f64>>,
    well_strength: Vec<f64>,
}

impl TrajectoryAccum {
    fn new(ions: usize, capacity: usize) -> Self {
        Self {
            times: Vec::with_capacity(capacity),
            positions: vec![Vec::with_capacity(capacity); ions],
            velocities: vec![Vec::with_capacity(capacity); ions],
            well_centers: vec![Vec::with_capacity(capacity); ions],
            well_strength: Vec::with_capacity(capacity),
        }
    }

    fn push(&mut self, t: f64, pos: &[f64], vel: &[f64], centers: &[f64], strength: f64) {
        self.times.push(t);
        for (i, &p) in pos.iter().enumerate() {
            self.positions[i].push(p);
        }
        for (i, &v) in vel.iter().enumerate() {
            self.velocities[i].push(v);
        }
        for (i, &c) in centers.iter().enumerate() {
            self.well_centers[i].push(c);
        }
        self.well_strength.push(strength);
    }

    fn finish(self) -> ClassicalTrajectory {
        ClassicalTrajectory {
            times: self.times,
            positions: self.positions,
            velocities: self.velocities,
            well_centers: self.well_centers,
            well_strength: self.well_strength,
        }
    }
}
