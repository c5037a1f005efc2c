//! The two named experiments: a frequency change of a single-ion well and a
//! same-species two-ion separation.
//!
//! Both follow the same pattern — evolve the Bogoliubov pair along the well
//! schedule, solve for the preparation squeeze that makes the mode land in
//! the final well's ground state, and convert that squeeze into a parametric
//! drive. The separation additionally reduces the two-ion problem to
//! center-of-mass and stretch modes: the COM mode sees the bare well
//! schedule, while the stretch mode sees the well curvature plus the
//! quadratic Coulomb term evaluated along the classical half-separation
//! (reference frequency √3·ω₀).

use thiserror::Error;

use crate::classical::{self, CatchLaw, ClassicalError, ClassicalOptions, ClassicalTrajectory};
use crate::fock::{self, FockError, FockState};
use crate::ode::{self, OdeError, OdeOptions};
use crate::schedule::{alpha_of_gamma, GammaSchedule, GammaSource, ScheduleError};
use crate::su11::{
    self, compose, drive_from_squeeze, freq_change_target, phonon_number, solve_preparation,
    Bogoliubov, ParametricDrive, PreparationOrder, PreparationSqueeze, Su11Error,
};
use crate::units::PhysicalParams;

/// Wave-packet extent / well half-separation above which the quadratic
/// Coulomb expansion of the stretch mode is no longer trustworthy.
pub const QUADRATIC_COULOMB_LIMIT: f64 = 0.05;

/// Residual the preparation solver must achieve on the composed transform.
pub const PREPARATION_RESIDUAL_LIMIT: f64 = 1.0e-9;

const SQRT3: f64 = 1.732_050_807_568_877_3;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol input: {0}")]
    BadInput(String),
    #[error("{mode} preparation residual {residual:.3e} exceeds {limit:.1e}")]
    PreparationResidual { mode: &'static str, residual: f64, limit: f64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Su11(#[from] Su11Error),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Integration(#[from] OdeError),
}

/// Pair-evolution tolerances used throughout the protocol layer.
pub const PAIR_TOL: OdeOptions =
    OdeOptions { rtol: 1.0e-12, atol: 1.0e-13, h_init: None, max_steps: 50_000_000 };

/// Tolerances for the joint classical + pair transport system.
pub const JOINT_TOL: OdeOptions =
    OdeOptions { rtol: 1.0e-11, atol: 1.0e-13, h_init: None, max_steps: 50_000_000 };

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 || b <= a {
        return vec![a];
    }
    // Endpoint exact so downstream comparisons against b hold bitwise.
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Effective stretch-mode detuning: the well curvature plus the quadratic
/// Coulomb term at half-separation `c_s`,
///
/// γ_s = √((1+γ)² + 2 (c_s0/c_s)³) − 1,
///
/// with `c_s0` the equilibrium half-separation (where γ=0 gives √3 − 1).
pub fn gamma_stretch(gamma: f64, c_s: f64, c_s0: f64) -> Result<f64, ProtocolError> {
    if !(c_s > 0.0) {
        return Err(ProtocolError::BadInput(format!("half-separation must be positive, got {c_s}")));
    }
    if !(c_s0 > 0.0) {
        return Err(ProtocolError::BadInput(format!(
            "equilibrium half-separation must be positive, got {c_s0}"
        )));
    }
    let w = 1.0 + gamma;
    let ratio = c_s0 / c_s;
    Ok((w * w + 2.0 * ratio * ratio * ratio).sqrt() - 1.0)
}

// ---------------------------------------------------------------------------
// Frequency change
// ---------------------------------------------------------------------------

/// Occupation history of a single mode under a sin² frequency ramp.
#[derive(Debug, Clone)]
pub struct FrequencyChangeReport {
    pub omega0: f64,
    pub gamma_final: f64,
    pub duration: f64,
    pub times: Vec<f64>,
    /// ⟨n⟩ measured against the initial ω₀ well.
    pub n_initial_basis: Vec<f64>,
    /// ⟨n⟩ measured against the final ω₀(1+γ_f) well.
    pub n_final_basis: Vec<f64>,
    pub preparation: Option<PreparationSqueeze>,
    pub final_transform: Bogoliubov,
}

impl FrequencyChangeReport {
    pub fn final_n_initial(&self) -> f64 {
        *self.n_initial_basis.last().unwrap()
    }

    pub fn final_n_final(&self) -> f64 {
        *self.n_final_basis.last().unwrap()
    }
}

/// Ramp the well from ω₀ to ω₀(1+γ_final) over `duration` via
/// γ(t) = γ_final·sin²(πt/2·duration), optionally with the solved
/// preparation squeeze.
///
/// With `PreparationOrder::Before` the squeeze acts on the vacuum at t = 0
/// and the trailing Euler rotation is a pure phase, so the reported series
/// uses the ideal squeeze S(r_p, θ_m). With `After` the correction follows
/// the ramp; a bare squeeze would leave a frame rotation behind, so the
/// final sample applies the full preparation transform instead.
///
/// `duration = 0` is the sudden jump: the well changes instantly and the
/// report holds a single sample.
pub fn run_frequency_change(
    omega0: f64,
    gamma_final: f64,
    duration: f64,
    preparation: Option<PreparationOrder>,
    samples: usize,
) -> Result<FrequencyChangeReport, ProtocolError> {
    if !(omega0 > 0.0) {
        return Err(ProtocolError::BadInput(format!("omega0 must be positive, got {omega0}")));
    }
    if !(gamma_final > -1.0) {
        return Err(ProtocolError::BadInput(format!(
            "final well must stay confining: gamma_final = {gamma_final}"
        )));
    }
    if !(duration >= 0.0) {
        return Err(ProtocolError::BadInput(format!("duration must be ≥ 0, got {duration}")));
    }

    let (times, ramp) = if duration > 0.0 {
        let schedule = GammaSchedule::sin2_ramp(gamma_final, duration)?;
        let times = linspace(0.0, duration, samples.max(2));
        let ramp = su11::evolve_sampled(&Bogoliubov::identity(), &schedule, omega0, &times, &PAIR_TOL)?;
        (times, ramp)
    } else {
        (vec![0.0], vec![Bogoliubov::identity()])
    };
    let u_s = *ramp.last().unwrap();

    let prep = match preparation {
        Some(order) => {
            let target = freq_change_target(gamma_final)?;
            Some((order, solve_preparation(&u_s, &target, order)?))
        }
        None => None,
    };

    let series: Vec<Bogoliubov> = match &prep {
        Some((PreparationOrder::Before, p)) => {
            let squeeze = p.squeeze_only();
            ramp.iter().map(|u| compose(&squeeze, u)).collect()
        }
        Some((PreparationOrder::After, p)) => {
            let mut s: Vec<Bogoliubov> = ramp.clone();
            let last = s.last_mut().unwrap();
            *last = compose(last, &p.transform());
            s
        }
        None => ramp,
    };

    let mut n_initial = Vec::with_capacity(series.len());
    let mut n_final = Vec::with_capacity(series.len());
    for b in &series {
        n_initial.push(phonon_number(b, 0.0)?);
        n_final.push(phonon_number(b, gamma_final)?);
    }

    Ok(FrequencyChangeReport {
        omega0,
        gamma_final,
        duration,
        times,
        n_initial_basis: n_initial,
        n_final_basis: n_final,
        preparation: prep.map(|(_, p)| p),
        final_transform: *series.last().unwrap(),
    })
}

// ---------------------------------------------------------------------------
// Separation: planning
// ---------------------------------------------------------------------------

/// Stage durations of the separation protocol. `flight` left `None` is
/// solved for by bisection against the target separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationTimings {
    /// Squeezing stage t_p (wells static).
    pub hold: f64,
    /// Release ramp t_s1 (γ: 0 → −1).
    pub release: f64,
    /// Free flight t_s2.
    pub flight: Option<f64>,
    /// Catch ramp t_s3 (γ: −1 → 0 with tracking wells).
    pub catch_ramp: f64,
    /// Catch tracking constant η.
    pub eta: f64,
}

/// Solved drive and transport data for one mode.
#[derive(Debug, Clone, Copy)]
pub struct ModePlan {
    /// Reference frequency of this mode's frame, rad/s.
    pub omega_ref: f64,
    pub r_p: f64,
    pub theta_m: f64,
    pub drive: ParametricDrive,
    /// Bogoliubov propagator of the transport stage [t_p, t_f].
    pub transport: Bogoliubov,
    /// Final-basis detuning in this mode's reference frame.
    pub final_gamma: f64,
}

#[derive(Debug, Clone)]
pub struct SeparationPlan {
    pub omega0: f64,
    pub hold: f64,
    pub release: f64,
    pub flight: f64,
    pub catch_ramp: f64,
    pub eta: f64,
    pub total_duration: f64,
    pub target_separation: f64,
    /// Full γ(t) over [0, t_f].
    pub schedule: GammaSchedule,
    /// The post-hold portion of the schedule, re-based to start at 0.
    pub transport_schedule: GammaSchedule,
    pub catch: CatchLaw,
    pub com: ModePlan,
    pub stretch: ModePlan,
    pub equilibrium_half_separation: f64,
    pub planned_final_separation: f64,
}

struct TransportSample {
    t: f64,
    xi: [f64; 2],
    u: [f64; 2],
    com: Bogoliubov,
    stretch: Bogoliubov,
}

struct Transport {
    samples: Vec<TransportSample>,
    validity_peak: f64,
}

fn pair_from(y: &[f64]) -> Bogoliubov {
    Bogoliubov {
        mu: num_complex::Complex64::new(y[0], y[1]),
        nu: num_complex::Complex64::new(y[2], y[3]),
    }
}

fn pair_into(b: &Bogoliubov, y: &mut [f64]) {
    y[0] = b.mu.re;
    y[1] = b.mu.im;
    y[2] = b.nu.re;
    y[3] = b.nu.im;
}

/// dμ/ds, dν/ds for one Bogoliubov pair at detuning parameter `alpha`, with
/// the clock running `rate` times faster than s.
fn pair_block(alpha: f64, rate: f64, y: &[f64], dy: &mut [f64]) {
    let w = 1.0 + alpha;
    dy[0] = rate * (w * y[1] - alpha * y[3]);
    dy[1] = rate * (-w * y[0] - alpha * y[2]);
    dy[2] = rate * (w * y[3] - alpha * y[1]);
    dy[3] = rate * (-w * y[2] - alpha * y[0]);
}

/// Integrate the coupled classical + COM-pair + stretch-pair system over
/// [t_start, t_end], starting from the classical two-ion equilibrium at
/// rest. `sample_times` must be ascending, lie in (t_start, t_end], and end
/// with t_end.
fn integrate_transport(
    params: &PhysicalParams,
    schedule: &GammaSchedule,
    catch: &CatchLaw,
    t_start: f64,
    t_end: f64,
    com0: &Bogoliubov,
    stretch0: &Bogoliubov,
    sample_times: &[f64],
) -> Result<Transport, ProtocolError> {
    debug_assert!(sample_times.last() == Some(&t_end) && t_end > t_start);
    let frame = params.frame();
    let omega0 = params.omega0;
    let length = frame.length;
    let kappa =
        params.coulomb_coupling() / (params.mass * omega0 * omega0 * length * length * length);
    let xi_eq = (0.25 * kappa).cbrt();
    let eta = omega0 * catch.eta;
    let act_s = omega0 * catch.activation;
    let floor_dim = 1.0e-9 / length;
    // Stretch-mode ground-state length (mass 2m, frequency √3ω₀), in well units.
    let x0_stretch = (params.hbar / (4.0 * params.mass * SQRT3 * omega0)).sqrt() / length;

    let mut y = [0.0; 12];
    y[0] = xi_eq;
    y[2] = -xi_eq;
    pair_into(com0, &mut y[4..8]);
    pair_into(stretch0, &mut y[8..12]);

    let mut validity_peak: f64 = 0.0;
    let mut too_close: Option<(f64, f64)> = None;

    let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let gamma = schedule.gamma(s / omega0);
        let w = 1.0 + gamma;
        let k = w * w;
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
        pair_block(alpha_of_gamma(gamma), 1.0, &y[4..8], &mut dy[4..8]);
        let ratio = 2.0 * xi_eq / sep;
        let gamma_s = (k + 2.0 * ratio * ratio * ratio).sqrt() - 1.0;
        let gamma_tilde = (1.0 + gamma_s) / SQRT3 - 1.0;
        pair_block(alpha_of_gamma(gamma_tilde), SQRT3, &y[8..12], &mut dy[8..12]);
    };

    let validity_of = |y: &[f64; 12]| -> f64 {
        let extent = x0_stretch * ((y[8] + y[10]).powi(2) + (y[9] - y[11]).powi(2)).sqrt();
        extent / (0.5 * (y[0] - y[2]))
    };

    let mut cuts: Vec<f64> = schedule
        .breakpoints()
        .into_iter()
        .chain(std::iter::once(catch.activation))
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut samples = Vec::with_capacity(sample_times.len());
    let mut prev = t_start;
    for &t in sample_times {
        let spans: Vec<(f64, f64)> = {
            let inner: Vec<f64> = cuts.iter().copied().filter(|&c| c > prev && c < t).collect();
            let mut spans = Vec::with_capacity(inner.len() + 1);
            let mut a = prev;
            for c in inner {
                spans.push((a, c));
                a = c;
            }
            spans.push((a, t));
            spans
        };
        for (a, b) in spans {
            let res = ode::solve_observed(
                &mut rhs,
                omega0 * a,
                omega0 * b,
                &mut y,
                &JOINT_TOL,
                &mut |s, state| {
                    let sep = state[0] - state[2];
                    if sep < floor_dim {
                        too_close = Some((s / omega0, sep * length));
                        return false;
                    }
                    let mut buf = [0.0; 12];
                    buf.copy_from_slice(state);
                    let ratio = validity_of(&buf);
                    if ratio > validity_peak {
                        validity_peak = ratio;
                    }
                    true
                },
            );
            match res {
                Ok(_) => {}
                Err(OdeError::Halted { t: ts }) => {
                    let (tc, separation) = too_close.unwrap_or((ts / omega0, f64::NAN));
                    return Err(ClassicalError::IonsTooClose {
                        t: tc,
                        separation,
                        floor: 1.0e-9,
                    }
                    .into());
                }
                Err(e) => return Err(e.into()),
            }
        }
        let ratio = validity_of(&y);
        if ratio > validity_peak {
            validity_peak = ratio;
        }
        samples.push(TransportSample {
            t,
            xi: [y[0], y[2]],
            u: [y[1], y[3]],
            com: pair_from(&y[4..8]),
            stretch: pair_from(&y[8..12]),
        });
        prev = t;
    }
    Ok(Transport { samples, validity_peak })
}

fn zero_drive(omega_ref: f64) -> ParametricDrive {
    ParametricDrive { g: 0.0, theta_i: 0.0, t_p: 0.0, omega_ref }
}

/// Solve the separation protocol: resolve the free-flight duration, evolve
/// both mode transforms along the transport stage, solve each mode's
/// preparation squeeze against its final-basis target, and convert the
/// squeezes into parametric drives (COM at ω₀, stretch at √3ω₀).
pub fn plan_separation(
    params: &PhysicalParams,
    timings: &SeparationTimings,
    target_separation: f64,
) -> Result<SeparationPlan, ProtocolError> {
    for (name, v) in [
        ("hold", timings.hold),
        ("release", timings.release),
        ("catch_ramp", timings.catch_ramp),
        ("eta", timings.eta),
    ] {
        if !(v >= 0.0) {
            return Err(ProtocolError::BadInput(format!("{name} must be ≥ 0, got {v}")));
        }
    }
    if !(target_separation > 0.0) {
        return Err(ProtocolError::BadInput(format!(
            "target separation must be positive, got {target_separation}"
        )));
    }

    let copts = ClassicalOptions::default();
    let flight = match timings.flight {
        Some(f) if f >= 0.0 => f,
        Some(f) => {
            return Err(ProtocolError::BadInput(format!("flight must be ≥ 0, got {f}")));
        }
        None => classical::find_free_flight_duration(
            params,
            timings.hold,
            timings.release,
            timings.catch_ramp,
            timings.eta,
            target_separation,
            1.0e-9,
            &copts,
        )?,
    };

    let moving = timings.release > 0.0 || flight > 0.0 || timings.catch_ramp > 0.0;
    if moving && !(timings.release > 0.0 && timings.catch_ramp > 0.0) {
        return Err(ProtocolError::BadInput(
            "release and catch ramps must both be positive unless the plan is fully degenerate"
                .into(),
        ));
    }

    let (schedule, transport_schedule) = if moving {
        (
            classical::release_catch_schedule(timings.hold, timings.release, flight, timings.catch_ramp)?,
            classical::release_catch_schedule(0.0, timings.release, flight, timings.catch_ramp)?,
        )
    } else {
        (
            GammaSchedule::constant(0.0, timings.hold)?,
            GammaSchedule::constant(0.0, 0.0)?,
        )
    };
    let t_f = schedule.total_duration();
    let catch = CatchLaw { eta: timings.eta, activation: timings.hold + timings.release + flight };
    let d_eq = params.two_ion_half_separation();
    let identity = Bogoliubov::identity();

    let (com_transport, stretch_transport, final_sep) = if t_f > timings.hold {
        let transport = integrate_transport(
            params,
            &schedule,
            &catch,
            timings.hold,
            t_f,
            &identity,
            &identity,
            &[t_f],
        )?;
        let fin = transport.samples.last().unwrap();
        let length = params.frame().length;
        (fin.com, fin.stretch, (fin.xi[0] - fin.xi[1]) * length)
    } else {
        (identity, identity, 2.0 * d_eq)
    };

    let gamma_f = schedule.end_gamma();
    let gamma_s_f = gamma_stretch(gamma_f, 0.5 * final_sep, d_eq)?;
    let gamma_tilde_f = (1.0 + gamma_s_f) / SQRT3 - 1.0;

    let com = solve_mode_plan(
        "COM",
        params.omega0,
        &com_transport,
        gamma_f,
        timings.hold,
    )?;
    let stretch = solve_mode_plan(
        "stretch",
        SQRT3 * params.omega0,
        &stretch_transport,
        gamma_tilde_f,
        timings.hold,
    )?;

    Ok(SeparationPlan {
        omega0: params.omega0,
        hold: timings.hold,
        release: timings.release,
        flight,
        catch_ramp: timings.catch_ramp,
        eta: timings.eta,
        total_duration: t_f,
        target_separation,
        schedule,
        transport_schedule,
        catch,
        com,
        stretch,
        equilibrium_half_separation: d_eq,
        planned_final_separation: final_sep,
    })
}

fn solve_mode_plan(
    mode: &'static str,
    omega_ref: f64,
    transport: &Bogoliubov,
    final_gamma: f64,
    hold: f64,
) -> Result<ModePlan, ProtocolError> {
    let target = freq_change_target(final_gamma)?;
    let prep = solve_preparation(transport, &target, PreparationOrder::Before)?;
    let residual = phonon_number(&compose(&prep.squeeze_only(), transport), final_gamma)?;
    if residual.abs() > PREPARATION_RESIDUAL_LIMIT {
        return Err(ProtocolError::PreparationResidual {
            mode,
            residual,
            limit: PREPARATION_RESIDUAL_LIMIT,
        });
    }
    let drive = if hold > 0.0 {
        drive_from_squeeze(prep.r_p, prep.theta_m, hold, omega_ref)?
    } else if prep.r_p < 1.0e-12 {
        zero_drive(omega_ref)
    } else {
        return Err(ProtocolError::BadInput(format!(
            "{mode} preparation needs r_p = {:.3}, but the hold stage has zero duration",
            prep.r_p
        )));
    };
    Ok(ModePlan {
        omega_ref,
        r_p: prep.r_p,
        theta_m: prep.theta_m,
        drive,
        transport: *transport,
        final_gamma,
    })
}

// ---------------------------------------------------------------------------
// Separation: running
// ---------------------------------------------------------------------------

/// Phonon time series for the separation run, all in fixed measurement
/// bases: the COM mode against ω₀, the stretch mode against both √3ω₀ and
/// ω₀.
#[derive(Debug, Clone)]
pub struct ModeReport {
    pub times: Vec<f64>,
    pub phonons_com_omega0: Vec<f64>,
    pub phonons_str_sqrt3: Vec<f64>,
    pub phonons_str_omega0: Vec<f64>,
}

/// Final occupations. The `*_total` numbers add the classical catch residual
/// (coherent displacement of the final classical state from its frozen-well
/// equilibrium) to the quantum series endpoint; `quantum_*` are the
/// Bogoliubov parts alone, measured in the true final basis of each mode.
#[derive(Debug, Clone, Copy)]
pub struct FinalPhonons {
    pub com_omega0_total: f64,
    pub str_omega0_total: f64,
    pub str_sqrt3_total: f64,
    pub quantum_com: f64,
    pub quantum_stretch: f64,
    pub classical_com_omega0: f64,
    pub classical_str_omega0: f64,
    pub classical_str_sqrt3: f64,
}

#[derive(Debug, Clone)]
pub struct SeparationOutcome {
    pub trajectory: ClassicalTrajectory,
    pub report: ModeReport,
    pub final_separation: f64,
    pub finals: FinalPhonons,
    /// Peak of wave-packet extent / half-separation over the run.
    pub validity_peak: f64,
    /// True when the quadratic-Coulomb expansion stayed within its limit.
    pub quadratic_coulomb_valid: bool,
    /// Final stretch-basis detuning (√3ω₀ frame).
    pub final_stretch_gamma: f64,
}

/// Execute a separation plan: parametric drives during the hold stage
/// (lab-frame RWA transforms), then the joint classical + quantum transport
/// through release, flight, and catch.
pub fn run_separation(
    params: &PhysicalParams,
    plan: &SeparationPlan,
    samples: usize,
) -> Result<SeparationOutcome, ProtocolError> {
    if (params.omega0 - plan.omega0).abs() > 1.0e-9 * plan.omega0 {
        return Err(ProtocolError::BadInput(format!(
            "plan was made for omega0 = {}, run asked for {}",
            plan.omega0, params.omega0
        )));
    }
    let t_f = plan.total_duration;
    let t_p = plan.hold;
    let times = linspace(0.0, t_f, samples.max(2));
    let frame = params.frame();
    let d_eq = plan.equilibrium_half_separation;
    let x0_stretch = (params.hbar / (4.0 * params.mass * SQRT3 * params.omega0)).sqrt();

    let mut traj_times = Vec::with_capacity(times.len());
    let mut positions = vec![Vec::with_capacity(times.len()), Vec::with_capacity(times.len())];
    let mut velocities = positions.clone();
    let mut centers = positions.clone();
    let mut strength = Vec::with_capacity(times.len());
    let mut com_series = Vec::with_capacity(times.len());
    let mut stretch_series = Vec::with_capacity(times.len());
    let mut validity_peak: f64 = 0.0;

    for &t in times.iter().filter(|&&t| t <= t_p) {
        traj_times.push(t);
        positions[0].push(d_eq);
        positions[1].push(-d_eq);
        velocities[0].push(0.0);
        velocities[1].push(0.0);
        centers[0].push(0.0);
        centers[1].push(0.0);
        strength.push(1.0 + plan.schedule.gamma(t));
        let com = plan.com.drive.rwa_transform(t);
        let stretch = plan.stretch.drive.rwa_transform(t);
        let extent = x0_stretch * (stretch.mu + stretch.nu.conj()).norm();
        validity_peak = validity_peak.max(extent / d_eq);
        com_series.push(com);
        stretch_series.push(stretch);
    }

    let post: Vec<f64> = times.iter().copied().filter(|&t| t > t_p).collect();
    if !post.is_empty() {
        let com0 = plan.com.drive.rwa_transform(t_p);
        let stretch0 = plan.stretch.drive.rwa_transform(t_p);
        let transport = integrate_transport(
            params,
            &plan.schedule,
            &plan.catch,
            t_p,
            t_f,
            &com0,
            &stretch0,
            &post,
        )?;
        validity_peak = validity_peak.max(transport.validity_peak);
        for s in &transport.samples {
            traj_times.push(s.t);
            let pos = [frame.length_to_si(s.xi[0]), frame.length_to_si(s.xi[1])];
            let vel = [frame.velocity_to_si(s.u[0]), frame.velocity_to_si(s.u[1])];
            for i in 0..2 {
                positions[i].push(pos[i]);
                velocities[i].push(vel[i]);
                centers[i].push(if s.t < plan.catch.activation {
                    0.0
                } else {
                    pos[i] - plan.eta * vel[i]
                });
            }
            strength.push(1.0 + plan.schedule.gamma(s.t));
            com_series.push(s.com);
            stretch_series.push(s.stretch);
        }
    }

    let trajectory = ClassicalTrajectory {
        times: traj_times.clone(),
        positions,
        velocities,
        well_centers: centers,
        well_strength: strength,
    };

    let gamma_omega0_in_sqrt3 = 1.0 / SQRT3 - 1.0;
    let mut phonons_com = Vec::with_capacity(com_series.len());
    let mut phonons_str_sqrt3 = Vec::with_capacity(com_series.len());
    let mut phonons_str_omega0 = Vec::with_capacity(com_series.len());
    for (c, s) in com_series.iter().zip(&stretch_series) {
        phonons_com.push(phonon_number(c, 0.0)?);
        phonons_str_sqrt3.push(phonon_number(s, 0.0)?);
        phonons_str_omega0.push(phonon_number(s, gamma_omega0_in_sqrt3)?);
    }

    let k = traj_times.len() - 1;
    let fin_pos = [trajectory.positions[0][k], trajectory.positions[1][k]];
    let fin_vel = [trajectory.velocities[0][k], trajectory.velocities[1][k]];
    let fin_centers = [trajectory.well_centers[0][k], trajectory.well_centers[1][k]];
    let final_separation = fin_pos[0] - fin_pos[1];

    let gamma_f = plan.schedule.end_gamma();
    let gamma_s_f = gamma_stretch(gamma_f, 0.5 * final_separation, d_eq)?;
    let final_stretch_gamma = (1.0 + gamma_s_f) / SQRT3 - 1.0;
    let quantum_com = phonon_number(com_series.last().unwrap(), gamma_f)?;
    let quantum_stretch = phonon_number(stretch_series.last().unwrap(), final_stretch_gamma)?;

    let residual = classical_residuals(params, &fin_pos, &fin_vel, &fin_centers);
    let finals = FinalPhonons {
        com_omega0_total: phonons_com[k] + residual.com_omega0,
        str_omega0_total: phonons_str_omega0[k] + residual.str_omega0,
        str_sqrt3_total: phonons_str_sqrt3[k] + residual.str_sqrt3,
        quantum_com,
        quantum_stretch,
        classical_com_omega0: residual.com_omega0,
        classical_str_omega0: residual.str_omega0,
        classical_str_sqrt3: residual.str_sqrt3,
    };

    Ok(SeparationOutcome {
        trajectory,
        report: ModeReport {
            times: traj_times,
            phonons_com_omega0: phonons_com,
            phonons_str_sqrt3,
            phonons_str_omega0,
        },
        final_separation,
        finals,
        validity_peak,
        quadratic_coulomb_valid: validity_peak <= QUADRATIC_COULOMB_LIMIT,
        final_stretch_gamma,
    })
}

struct ClassicalResiduals {
    com_omega0: f64,
    str_omega0: f64,
    str_sqrt3: f64,
}

/// Coherent occupation left in each mode by the classical end state: the
/// displacement of (q, q̇) from the static equilibrium of the frozen wells
/// (Coulomb included), counted as |α|² = (Mω/2ħ)δq² + (M/2ħω)δq̇² with
/// M = 2m for both modes.
fn classical_residuals(
    params: &PhysicalParams,
    pos: &[f64; 2],
    vel: &[f64; 2],
    centers: &[f64; 2],
) -> ClassicalResiduals {
    let m = params.mass;
    let w0 = params.omega0;
    let hbar = params.hbar;
    let ke2 = params.coulomb_coupling();

    let q_com = 0.5 * (pos[0] + pos[1]);
    let v_com = 0.5 * (vel[0] + vel[1]);
    let c_com = 0.5 * (centers[0] + centers[1]);
    let dq_com = q_com - c_com;
    let n_com = |omega: f64| (m / hbar) * (omega * dq_com * dq_com + v_com * v_com / omega);

    let q_str = 0.5 * (pos[0] - pos[1]);
    let v_str = 0.5 * (vel[0] - vel[1]);
    let c_str = 0.5 * (centers[0] - centers[1]);
    // Static equilibrium of the stretch coordinate in the frozen wells:
    // ω₀²(q − c) = ke²/(4 m q²), solved by Newton from the final state.
    let mut q_eq = q_str;
    for _ in 0..60 {
        let f = w0 * w0 * (q_eq - c_str) - ke2 / (4.0 * m * q_eq * q_eq);
        let fp = w0 * w0 + ke2 / (2.0 * m * q_eq * q_eq * q_eq);
        let step = f / fp;
        q_eq -= step;
        if step.abs() < 1.0e-16 * q_eq.abs() {
            break;
        }
    }
    let dq_str = q_str - q_eq;
    let n_str = |omega: f64| (m / hbar) * (omega * dq_str * dq_str + v_str * v_str / omega);

    ClassicalResiduals {
        com_omega0: n_com(w0),
        str_omega0: n_str(w0),
        str_sqrt3: n_str(SQRT3 * w0),
    }
}

// ---------------------------------------------------------------------------
// Fock-oracle cross-checks
// ---------------------------------------------------------------------------

/// Final occupation of the frequency-change protocol from both engines:
/// the Bogoliubov pair and a truncated number-basis integration.
pub fn crosscheck_frequency_change(
    omega0: f64,
    gamma_final: f64,
    duration: f64,
    preparation: Option<PreparationOrder>,
    dim: usize,
) -> Result<(f64, f64), ProtocolError> {
    if matches!(preparation, Some(PreparationOrder::After)) {
        return Err(ProtocolError::BadInput(
            "the Fock cross-check models the squeeze pulse before the ramp only".into(),
        ));
    }
    let report = run_frequency_change(omega0, gamma_final, duration, preparation, 2)?;
    let opts = OdeOptions::tol(1.0e-11, 1.0e-13);
    let state0 = match &report.preparation {
        Some(p) => fock::squeezed_vacuum(dim, p.r_p, p.theta_m)?,
        None => FockState::vacuum(dim)?,
    };
    let final_state = if duration > 0.0 {
        let schedule = GammaSchedule::sin2_ramp(gamma_final, duration)?;
        fock::evolve_schedule(&state0, &schedule, omega0, &opts)?
    } else {
        state0
    };
    Ok((report.final_n_final(), final_state.phonon_in_basis(gamma_final)?))
}

/// Quantum-only final occupations of a separation plan from both engines.
#[derive(Debug, Clone, Copy)]
pub struct SeparationCrosscheck {
    pub com_pair: f64,
    pub com_fock: f64,
    pub stretch_pair: f64,
    pub stretch_fock: f64,
}

/// Re-run the quantum part of a separation plan in the truncated number
/// basis: the COM mode directly under the transport schedule, the stretch
/// mode by integrating the number-basis state jointly with the classical
/// trajectory (its detuning depends on the live half-separation).
pub fn crosscheck_separation(
    params: &PhysicalParams,
    plan: &SeparationPlan,
    dim: usize,
) -> Result<SeparationCrosscheck, ProtocolError> {
    let outcome = run_separation(params, plan, 2)?;
    let opts = OdeOptions::tol(1.0e-11, 1.0e-13);

    // COM: the schedule alone drives the mode; evolve the squeezed start
    // through the re-based transport schedule.
    let com0 = fock::squeezed_vacuum(dim, plan.com.r_p, plan.com.theta_m)?;
    let com_fock_state = if plan.total_duration > plan.hold {
        fock::evolve_schedule(&com0, &plan.transport_schedule, params.omega0, &opts)?
    } else {
        com0
    };
    let com_fock = com_fock_state.phonon_in_basis(plan.schedule.end_gamma())?;

    // Stretch: joint classical + number-basis integration in s = ω₀t.
    let stretch0 = fock::squeezed_vacuum(dim, plan.stretch.r_p, plan.stretch.theta_m)?;
    let stretch_fock_state = if plan.total_duration > plan.hold {
        evolve_stretch_fock(params, plan, &stretch0, &opts)?
    } else {
        stretch0
    };
    let stretch_fock = stretch_fock_state.phonon_in_basis(outcome.final_stretch_gamma)?;

    Ok(SeparationCrosscheck {
        com_pair: outcome.finals.quantum_com,
        com_fock,
        stretch_pair: outcome.finals.quantum_stretch,
        stretch_fock,
    })
}

fn evolve_stretch_fock(
    params: &PhysicalParams,
    plan: &SeparationPlan,
    state: &FockState,
    opts: &OdeOptions,
) -> Result<FockState, ProtocolError> {
    let dim = state.dim();
    let frame = params.frame();
    let omega0 = params.omega0;
    let length = frame.length;
    let kappa =
        params.coulomb_coupling() / (params.mass * omega0 * omega0 * length * length * length);
    let xi_eq = (0.25 * kappa).cbrt();
    let eta = omega0 * plan.catch.eta;
    let act_s = omega0 * plan.catch.activation;
    let schedule = &plan.schedule;

    let mut y = vec![0.0; 4 + 2 * dim];
    y[0] = xi_eq;
    y[2] = -xi_eq;
    y[4..].copy_from_slice(&fock::split_state(&state.amps));

    let mut hx = vec![0.0; dim];
    let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let gamma = schedule.gamma(s / omega0);
        let w = 1.0 + gamma;
        let k = w * w;
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
        let ratio = 2.0 * xi_eq / sep;
        let gamma_s = (k + 2.0 * ratio * ratio * ratio).sqrt() - 1.0;
        let gamma_tilde = (1.0 + gamma_s) / SQRT3 - 1.0;
        let beta = 0.5 * alpha_of_gamma(gamma_tilde);
        let (u, v) = y[4..].split_at(dim);
        let (du, dv) = dy[4..].split_at_mut(dim);
        fock::apply_quadratic(beta, v, &mut hx);
        for i in 0..dim {
            du[i] = SQRT3 * hx[i];
        }
        fock::apply_quadratic(beta, u, &mut hx);
        for i in 0..dim {
            dv[i] = -SQRT3 * hx[i];
        }
    };

    let mut worst: Option<(f64, f64)> = None;
    let mut cuts: Vec<f64> = schedule
        .breakpoints()
        .into_iter()
        .chain(std::iter::once(plan.catch.activation))
        .filter(|&c| c > plan.hold && c < plan.total_duration)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts.push(plan.total_duration);
    let mut prev = plan.hold;
    for cut in cuts {
        let res = ode::solve_observed(
            &mut rhs,
            omega0 * prev,
            omega0 * cut,
            &mut y,
            opts,
            &mut |s, state| {
                let tail = fock::tail_mass_split(&state[4..4 + dim], &state[4 + dim..]);
                if tail > 1.0e-8 {
                    worst = Some((s / omega0, tail));
                    false
                } else {
                    true
                }
            },
        );
        match res {
            Ok(_) => {}
            Err(OdeError::Halted { t }) => {
                let (t, tail) = worst.unwrap_or((t / omega0, f64::NAN));
                return Err(FockError::UnderTruncated { t, tail, limit: 1.0e-8 }.into());
            }
            Err(e) => return Err(e.into()),
        }
        prev = cut;
    }
    Ok(fock::join_state(y.split_off(4), dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ATOMIC_MASS, ELEMENTARY_CHARGE};

    fn beryllium_1mhz() -> PhysicalParams {
        PhysicalParams::new(
            9.012_183_1 * ATOMIC_MASS,
            ELEMENTARY_CHARGE,
            2.0 * std::f64::consts::PI * 1.0e6,
        )
        .unwrap()
    }

    fn fig3_timings() -> SeparationTimings {
        SeparationTimings {
            hold: 3.0e-6,
            release: 5.0e-7,
            flight: None,
            catch_ramp: 1.0e-6,
            eta: 5.0e-7,
        }
    }

    #[test]
    fn stretch_detuning_reference_values() {
        let d = 4.0e-6;
        assert!((gamma_stretch(0.0, d, d).unwrap() - (3.0_f64.sqrt() - 1.0)).abs() < 1.0e-12);
        assert!((gamma_stretch(-1.0, d, d).unwrap() - (2.0_f64.sqrt() - 1.0)).abs() < 1.0e-12);
        assert!(gamma_stretch(0.0, 1.0e6 * d, d).unwrap().abs() < 1.0e-12);
        assert!(gamma_stretch(0.2, 1.0e6 * d, d).unwrap() - 0.2 < 1.0e-12);
        assert!(gamma_stretch(0.0, -1.0, d).is_err());
    }

    #[test]
    fn frequency_change_lands_in_target_ground_state() {
        let omega0 = 2.0 * std::f64::consts::PI * 1.0e6;
        let report = run_frequency_change(
            omega0,
            1.0,
            5.0e-7,
            Some(PreparationOrder::Before),
            41,
        )
        .unwrap();
        assert!(report.final_n_final() < 1.0e-9, "n = {}", report.final_n_final());
        // Mid-protocol both curves are visibly nonzero.
        let mid = report.times.len() / 2;
        assert!(report.n_initial_basis[mid] > 1.0e-3);
        assert!(report.n_final_basis[mid] > 1.0e-3);
        // The prepared start already carries the squeeze occupation.
        let r_p = report.preparation.as_ref().unwrap().r_p;
        assert!((report.n_initial_basis[0] - r_p.sinh().powi(2)).abs() < 1.0e-9);
    }

    #[test]
    fn after_order_preparation_also_closes() {
        let omega0 = 2.0 * std::f64::consts::PI * 1.0e6;
        let report =
            run_frequency_change(omega0, 1.0, 5.0e-7, Some(PreparationOrder::After), 11).unwrap();
        assert!(report.final_n_final() < 1.0e-9, "n = {}", report.final_n_final());
        // Before the pulse the series is the bare ramp.
        assert!(report.n_initial_basis[0].abs() < 1.0e-12);
    }

    #[test]
    fn sudden_jump_limits() {
        let omega0 = 2.0 * std::f64::consts::PI * 1.0e6;
        let bare = run_frequency_change(omega0, 1.0, 0.0, None, 5).unwrap();
        assert!((bare.final_n_final() - 0.125).abs() < 1.0e-12);
        let prepared =
            run_frequency_change(omega0, 1.0, 0.0, Some(PreparationOrder::Before), 5).unwrap();
        assert!(prepared.final_n_final() < 1.0e-12);
    }

    #[test]
    fn slow_ramp_is_quasi_adiabatic() {
        let omega0 = 2.0 * std::f64::consts::PI * 1.0e6;
        let report = run_frequency_change(omega0, 1.0, 50.0 / omega0, None, 5).unwrap();
        assert!(report.final_n_final() < 0.01, "n = {}", report.final_n_final());
    }

    #[test]
    fn degenerate_plan_has_identity_drives() {
        let p = beryllium_1mhz();
        let timings = SeparationTimings {
            hold: 3.0e-6,
            release: 0.0,
            flight: Some(0.0),
            catch_ramp: 0.0,
            eta: 5.0e-7,
        };
        let target = 2.0 * p.two_ion_half_separation();
        let plan = plan_separation(&p, &timings, target).unwrap();
        assert!(plan.com.r_p < 1.0e-12);
        assert!(plan.stretch.r_p < 1.0e-12);
        assert_eq!(plan.com.drive.g, 0.0);
        assert_eq!(plan.stretch.drive.g, 0.0);

        let outcome = run_separation(&p, &plan, 9).unwrap();
        for k in 0..outcome.report.times.len() {
            assert!(outcome.report.phonons_com_omega0[k].abs() < 1.0e-12);
            assert!(outcome.report.phonons_str_sqrt3[k].abs() < 1.0e-12);
            assert!(
                (outcome.trajectory.positions[0][k] - p.two_ion_half_separation()).abs()
                    < 1.0e-12 * p.two_ion_half_separation()
            );
        }
        assert!(outcome.finals.com_omega0_total.abs() < 1.0e-12);
        assert!(outcome.finals.str_sqrt3_total.abs() < 1.0e-12);
    }

    #[test]
    fn separation_plan_recovers_reported_drive_scales() {
        let p = beryllium_1mhz();
        let timings = SeparationTimings { flight: Some(6.7e-7), ..fig3_timings() };
        let plan = plan_separation(&p, &timings, 1.0e-4).unwrap();
        let g_c_hz = plan.com.drive.g / (2.0 * std::f64::consts::PI);
        let g_s_hz = plan.stretch.drive.g / (2.0 * std::f64::consts::PI);
        assert!((g_c_hz - 92.6e3).abs() < 0.05 * 92.6e3, "g_c/2π = {g_c_hz}");
        assert!((g_s_hz - 69.2e3).abs() < 0.05 * 69.2e3, "g_s/2π = {g_s_hz}");
        assert!((plan.com.drive.g * plan.hold - plan.com.r_p).abs() < 1.0e-10 * plan.com.r_p);
    }

    #[test]
    fn separation_run_delivers_quantum_ground_state() {
        let p = beryllium_1mhz();
        let plan = plan_separation(&p, &fig3_timings(), 1.0e-4).unwrap();
        let outcome = run_separation(&p, &plan, 101).unwrap();
        assert!((outcome.final_separation - 1.0e-4).abs() < 1.0e-6 * 1.0e-4);
        assert!(outcome.finals.quantum_com < 1.0e-9, "com {}", outcome.finals.quantum_com);
        assert!(outcome.finals.quantum_stretch < 1.0e-9, "str {}", outcome.finals.quantum_stretch);
        // At the end of the hold the stretch mode carries the full squeeze.
        let k_hold = outcome
            .report
            .times
            .iter()
            .rposition(|&t| t <= plan.hold)
            .unwrap();
        let expect = (plan.stretch.drive.g * outcome.report.times[k_hold]).sinh().powi(2);
        assert!(
            (outcome.report.phonons_str_sqrt3[k_hold] - expect).abs() < 1.0e-9,
            "hold occupation {} vs {expect}",
            outcome.report.phonons_str_sqrt3[k_hold]
        );
        assert!(outcome.quadratic_coulomb_valid, "validity peak {}", outcome.validity_peak);
        // Series never meaningfully negative.
        for v in outcome
            .report
            .phonons_com_omega0
            .iter()
            .chain(&outcome.report.phonons_str_sqrt3)
            .chain(&outcome.report.phonons_str_omega0)
        {
            assert!(*v >= -1.0e-12);
        }
    }

    #[test]
    fn separation_is_scale_invariant() {
        let base = beryllium_1mhz();
        let plan1 = plan_separation(
            &base,
            &SeparationTimings {
                hold: 1.0e-6,
                release: 4.0e-7,
                flight: None,
                catch_ramp: 8.0e-7,
                eta: 4.0e-7,
            },
            6.0e-5,
        )
        .unwrap();
        let out1 = run_separation(&base, &plan1, 33).unwrap();

        let half = PhysicalParams::new(base.mass, base.charge, 0.5 * base.omega0).unwrap();
        let scale_len = half.two_ion_half_separation() / base.two_ion_half_separation();
        let plan2 = plan_separation(
            &half,
            &SeparationTimings {
                hold: 2.0e-6,
                release: 8.0e-7,
                flight: None,
                catch_ramp: 1.6e-6,
                eta: 8.0e-7,
            },
            6.0e-5 * scale_len,
        )
        .unwrap();
        let out2 = run_separation(&half, &plan2, 33).unwrap();

        assert!((plan2.flight - 2.0 * plan1.flight).abs() < 1.0e-6 * plan2.flight);
        for k in 0..out1.report.times.len() {
            assert!(
                (out1.report.phonons_str_sqrt3[k] - out2.report.phonons_str_sqrt3[k]).abs()
                    < 1.0e-6,
                "sample {k}: {} vs {}",
                out1.report.phonons_str_sqrt3[k],
                out2.report.phonons_str_sqrt3[k]
            );
            assert!(
                (out1.report.phonons_com_omega0[k] - out2.report.phonons_com_omega0[k]).abs()
                    < 1.0e-6
            );
        }
    }

    #[test]
    fn fock_agrees_with_pair_engine_on_frequency_change() {
        let omega0 = 2.0 * std::f64::consts::PI * 1.0e6;
        let (pair, fock) =
            crosscheck_frequency_change(omega0, 0.6, 8.0e-7, None, 64).unwrap();
        assert!((pair - fock).abs() < 1.0e-8, "pair {pair} vs fock {fock}");
        let (pair_p, fock_p) = crosscheck_frequency_change(
            omega0,
            1.0,
            5.0e-7,
            Some(PreparationOrder::Before),
            96,
        )
        .unwrap();
        assert!((pair_p - fock_p).abs() < 1.0e-8, "pair {pair_p} vs fock {fock_p}");
    }

    #[test]
    fn fock_agrees_with_pair_engine_on_separation() {
        let p = beryllium_1mhz();
        // A light plan: short ramps and a near target keep the stretch
        // mode's reference-basis squeeze — and so the truncated basis —
        // small. Wide separations need far more levels than this.
        let plan = plan_separation(
            &p,
            &SeparationTimings {
                hold: 1.0e-6,
                release: 2.0e-7,
                flight: None,
                catch_ramp: 4.0e-7,
                eta: 3.0e-7,
            },
            3.2e-5,
        )
        .unwrap();
        let check = crosscheck_separation(&p, &plan, 512).unwrap();
        assert!(
            (check.com_pair - check.com_fock).abs() < 1.0e-6,
            "com: {} vs {}",
            check.com_pair,
            check.com_fock
        );
        assert!(
            (check.stretch_pair - check.stretch_fock).abs() < 1.0e-6,
            "stretch: {} vs {}",
            check.stretch_pair,
            check.stretch_fock
        );
    }
}
