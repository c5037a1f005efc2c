//! Protocol execution: compute every artifact in memory, then write the
//! output directory in one pass so a failed run leaves nothing behind.

use std::f64::consts::TAU;
use std::fs;

use ionprep::fock::{self, FockError, FockState};
use ionprep::ode::OdeOptions;
use ionprep::protocols::{
    self, FrequencyChangeReport, ModePlan, ProtocolError, SeparationOutcome, SeparationPlan,
    SeparationTimings, JOINT_TOL, PAIR_TOL, PREPARATION_RESIDUAL_LIMIT, QUADRATIC_COULOMB_LIMIT,
};
use ionprep::schedule::random_smooth_schedule;
use ionprep::su11::{self, phonon_number};
use ionprep::{GammaSchedule, PreparationOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Order, Protocol, RunConfig};

/// Truncated-basis sizes for the optional `--with-oracle` cross-checks. The
/// sweep uses a smaller basis because it re-runs the check per grid point.
const ORACLE_DIM_FREQ_CHANGE: usize = 256;
const ORACLE_DIM_SEPARATION: usize = 512;
const ORACLE_DIM_SWEEP: usize = 192;

/// Tolerances of the number-basis oracle integrations.
const ORACLE_TOL: (f64, f64) = (1.0e-11, 1.0e-13);

pub enum CliError {
    Io(String),
    Config(String),
    Physics(String),
    Truncation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Truncation(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Config(m) | CliError::Physics(m) | CliError::Truncation(m) => m,
        }
    }
}

/// Physics-domain failures keep the originating module's message; an
/// under-truncated number basis gets its own exit code so callers can retry
/// with a larger basis.
fn physics(e: ProtocolError) -> CliError {
    match e {
        ProtocolError::Fock(f) => fock_error(f),
        other => CliError::Physics(other.to_string()),
    }
}

fn fock_error(e: FockError) -> CliError {
    match e {
        FockError::UnderTruncated { .. } => CliError::Truncation(e.to_string()),
        other => CliError::Physics(other.to_string()),
    }
}

struct Artifact {
    name: &'static str,
    contents: String,
}

pub fn execute(cfg: &RunConfig, verbose: u8) -> Result<(), CliError> {
    let artifacts = match cfg.protocol {
        Protocol::FreqChange => freq_change(cfg, verbose)?,
        Protocol::Separation => separation(cfg, verbose)?,
        Protocol::SweepFreqChange => sweep_freq_change(cfg, verbose)?,
        Protocol::OracleCrosscheck => oracle_crosscheck(cfg, verbose)?,
    };
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    for a in &artifacts {
        let path = dir.join(a.name);
        fs::write(&path, &a.contents)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        if verbose > 0 {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

#[derive(Serialize)]
struct Summary<'a, R: Serialize> {
    config: &'a RunConfig,
    result: R,
}

fn summary_toml<R: Serialize>(cfg: &RunConfig, result: R) -> Result<String, CliError> {
    toml::to_string_pretty(&Summary { config: cfg, result })
        .map_err(|e| CliError::Io(format!("serializing summary: {e}")))
}

#[derive(Serialize)]
struct ToleranceSummary {
    pair_rtol: f64,
    pair_atol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint_rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint_atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preparation_residual_limit: Option<f64>,
}

fn tolerances(joint: bool, oracle: bool, preparation_limit: bool) -> ToleranceSummary {
    ToleranceSummary {
        pair_rtol: PAIR_TOL.rtol,
        pair_atol: PAIR_TOL.atol,
        joint_rtol: joint.then_some(JOINT_TOL.rtol),
        joint_atol: joint.then_some(JOINT_TOL.atol),
        oracle_rtol: oracle.then_some(ORACLE_TOL.0),
        oracle_atol: oracle.then_some(ORACLE_TOL.1),
        preparation_residual_limit: preparation_limit.then_some(PREPARATION_RESIDUAL_LIMIT),
    }
}

// ---------------------------------------------------------------------------
// freq_change
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PreparationSummary {
    order: Order,
    r_p: f64,
    theta_m_rad: f64,
}

#[derive(Serialize)]
struct TransformSummary {
    mu_re: f64,
    mu_im: f64,
    nu_re: f64,
    nu_im: f64,
}

#[derive(Serialize)]
struct PairOracleSummary {
    dim: usize,
    n_pair: f64,
    n_fock: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct FreqChangeResult {
    omega0_rad_s: f64,
    omega0_hz: f64,
    final_frequency_rad_s: f64,
    final_frequency_hz: f64,
    gamma_final: f64,
    duration_s: f64,
    final_n_initial_basis: f64,
    final_n_final_basis: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    preparation: Option<PreparationSummary>,
    final_transform: TransformSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<PairOracleSummary>,
    tolerances: ToleranceSummary,
}

fn preparation_order(with_preparation: bool, order: Option<Order>) -> Option<PreparationOrder> {
    with_preparation.then(|| order.unwrap_or(Order::Before).into())
}

fn freq_change(cfg: &RunConfig, verbose: u8) -> Result<Vec<Artifact>, CliError> {
    let omega0 = cfg.physical.params().map_err(|e| CliError::Physics(e.to_string()))?.omega0;
    let fc = cfg.freq_change.as_ref().expect("validated");
    let order = preparation_order(fc.with_preparation, fc.order);
    let report =
        protocols::run_frequency_change(omega0, fc.gamma_final, fc.duration_s, order, cfg.output.sample_points)
            .map_err(physics)?;
    if verbose > 0 {
        eprintln!(
            "freq change: gamma_final = {}, duration = {} s, final <n> (final basis) = {:.3e}",
            fc.gamma_final,
            fc.duration_s,
            report.final_n_final()
        );
    }

    let oracle = if cfg.with_oracle {
        let (n_pair, n_fock) = protocols::crosscheck_frequency_change(
            omega0,
            fc.gamma_final,
            fc.duration_s,
            order,
            ORACLE_DIM_FREQ_CHANGE,
        )
        .map_err(physics)?;
        if verbose > 0 {
            eprintln!("oracle: pair {n_pair:.9e} vs number basis {n_fock:.9e}");
        }
        Some(PairOracleSummary {
            dim: ORACLE_DIM_FREQ_CHANGE,
            n_pair,
            n_fock,
            abs_diff: (n_pair - n_fock).abs(),
        })
    } else {
        None
    };

    let mut csv = String::from("time_us,n_initial_basis,n_final_basis\n");
    for (i, &t) in report.times.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{}\n",
            num(t * 1.0e6),
            num(report.n_initial_basis[i]),
            num(report.n_final_basis[i])
        ));
    }

    let used_order = fc.with_preparation.then(|| fc.order.unwrap_or(Order::Before));
    let result = freq_change_result(&report, used_order, oracle);
    Ok(vec![
        Artifact { name: "timeseries.csv", contents: csv },
        Artifact { name: "summary.toml", contents: summary_toml(cfg, result)? },
    ])
}

fn freq_change_result(
    report: &FrequencyChangeReport,
    used_order: Option<Order>,
    oracle: Option<PairOracleSummary>,
) -> FreqChangeResult {
    let omega_f = report.omega0 * (1.0 + report.gamma_final);
    let with_oracle = oracle.is_some();
    FreqChangeResult {
        omega0_rad_s: report.omega0,
        omega0_hz: report.omega0 / TAU,
        final_frequency_rad_s: omega_f,
        final_frequency_hz: omega_f / TAU,
        gamma_final: report.gamma_final,
        duration_s: report.duration,
        final_n_initial_basis: report.final_n_initial(),
        final_n_final_basis: report.final_n_final(),
        preparation: report.preparation.as_ref().map(|p| PreparationSummary {
            order: used_order.unwrap_or(Order::Before),
            r_p: p.r_p,
            theta_m_rad: p.theta_m,
        }),
        final_transform: TransformSummary {
            mu_re: report.final_transform.mu.re,
            mu_im: report.final_transform.mu.im,
            nu_re: report.final_transform.nu.re,
            nu_im: report.final_transform.nu.im,
        },
        oracle,
        tolerances: tolerances(false, with_oracle, false),
    }
}

// ---------------------------------------------------------------------------
// separation
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DriveSummary {
    g_rad_s: f64,
    g_hz: f64,
    theta_i_rad: f64,
    t_p_s: f64,
    omega_ref_rad_s: f64,
    omega_ref_hz: f64,
    r_p: f64,
    theta_m_rad: f64,
    final_gamma: f64,
}

fn drive_summary(mode: &ModePlan) -> DriveSummary {
    DriveSummary {
        g_rad_s: mode.drive.g,
        g_hz: mode.drive.g / TAU,
        theta_i_rad: mode.drive.theta_i,
        t_p_s: mode.drive.t_p,
        omega_ref_rad_s: mode.omega_ref,
        omega_ref_hz: mode.omega_ref / TAU,
        r_p: mode.r_p,
        theta_m_rad: mode.theta_m,
        final_gamma: mode.final_gamma,
    }
}

#[derive(Serialize)]
struct TimingsSummary {
    hold_s: f64,
    release_s: f64,
    flight_s: f64,
    catch_ramp_s: f64,
    eta_s: f64,
    total_duration_s: f64,
}

#[derive(Serialize)]
struct FinalsSummary {
    final_separation_m: f64,
    n_com_omega0_total: f64,
    n_str_omega0_total: f64,
    n_str_sqrt3omega0_total: f64,
    quantum_com: f64,
    quantum_stretch: f64,
    classical_com_omega0: f64,
    classical_str_omega0: f64,
    classical_str_sqrt3omega0: f64,
}

#[derive(Serialize)]
struct ValiditySummary {
    wavepacket_extent_peak_ratio: f64,
    quadratic_coulomb_limit: f64,
    quadratic_coulomb_valid: bool,
}

#[derive(Serialize)]
struct SeparationOracleSummary {
    dim: usize,
    com_pair: f64,
    com_fock: f64,
    com_abs_diff: f64,
    stretch_pair: f64,
    stretch_fock: f64,
    stretch_abs_diff: f64,
}

#[derive(Serialize)]
struct SeparationResult {
    omega0_rad_s: f64,
    omega0_hz: f64,
    timings: TimingsSummary,
    equilibrium_half_separation_m: f64,
    target_separation_m: f64,
    planned_final_separation_m: f64,
    final_stretch_gamma: f64,
    com_drive: DriveSummary,
    stretch_drive: DriveSummary,
    finals: FinalsSummary,
    validity: ValiditySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<SeparationOracleSummary>,
    tolerances: ToleranceSummary,
}

fn separation(cfg: &RunConfig, verbose: u8) -> Result<Vec<Artifact>, CliError> {
    let params = cfg.physical.params().map_err(|e| CliError::Physics(e.to_string()))?;
    let sc = cfg.separation.as_ref().expect("validated");
    let timings = SeparationTimings {
        hold: sc.hold_s,
        release: sc.release_s,
        flight: sc.flight_s,
        catch_ramp: sc.catch_ramp_s,
        eta: sc.eta_s,
    };
    let plan =
        protocols::plan_separation(&params, &timings, sc.target_separation_m).map_err(physics)?;
    if verbose > 0 {
        eprintln!(
            "plan: flight = {:.6e} s, total = {:.6e} s, drives g/2pi = {:.3} kHz (com) / {:.3} kHz (stretch)",
            plan.flight,
            plan.total_duration,
            plan.com.drive.g / TAU * 1.0e-3,
            plan.stretch.drive.g / TAU * 1.0e-3,
        );
    }
    let outcome =
        protocols::run_separation(&params, &plan, cfg.output.sample_points).map_err(physics)?;
    if verbose > 0 {
        eprintln!(
            "run: final separation = {:.6e} m, quantum <n> = {:.3e} (com) / {:.3e} (stretch)",
            outcome.final_separation, outcome.finals.quantum_com, outcome.finals.quantum_stretch,
        );
    }

    let oracle = if cfg.with_oracle {
        let x = protocols::crosscheck_separation(&params, &plan, ORACLE_DIM_SEPARATION)
            .map_err(physics)?;
        if verbose > 0 {
            eprintln!(
                "oracle: com {:.9e} vs {:.9e}, stretch {:.9e} vs {:.9e}",
                x.com_pair, x.com_fock, x.stretch_pair, x.stretch_fock,
            );
        }
        Some(SeparationOracleSummary {
            dim: ORACLE_DIM_SEPARATION,
            com_pair: x.com_pair,
            com_fock: x.com_fock,
            com_abs_diff: (x.com_pair - x.com_fock).abs(),
            stretch_pair: x.stretch_pair,
            stretch_fock: x.stretch_fock,
            stretch_abs_diff: (x.stretch_pair - x.stretch_fock).abs(),
        })
    } else {
        None
    };

    let csv = separation_csv(&outcome);
    let result = separation_result(&plan, &outcome, oracle);
    Ok(vec![
        Artifact { name: "timeseries.csv", contents: csv },
        Artifact { name: "summary.toml", contents: summary_toml(cfg, result)? },
    ])
}

fn separation_csv(outcome: &SeparationOutcome) -> String {
    let traj = &outcome.trajectory;
    let rep = &outcome.report;
    let mut csv = String::from(
        "time_us,pos_ion1_um,pos_ion2_um,well_center1_um,well_center2_um,\
         well_strength,n_com_omega0,n_str_sqrt3omega0,n_str_omega0\n",
    );
    for (i, &t) in traj.times.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            num(t * 1.0e6),
            num(traj.positions[0][i] * 1.0e6),
            num(traj.positions[1][i] * 1.0e6),
            num(traj.well_centers[0][i] * 1.0e6),
            num(traj.well_centers[1][i] * 1.0e6),
            num(traj.well_strength[i]),
            num(rep.phonons_com_omega0[i]),
            num(rep.phonons_str_sqrt3[i]),
            num(rep.phonons_str_omega0[i]),
        ));
    }
    csv
}

fn separation_result(
    plan: &SeparationPlan,
    outcome: &SeparationOutcome,
    oracle: Option<SeparationOracleSummary>,
) -> SeparationResult {
    let with_oracle = oracle.is_some();
    SeparationResult {
        omega0_rad_s: plan.omega0,
        omega0_hz: plan.omega0 / TAU,
        timings: TimingsSummary {
            hold_s: plan.hold,
            release_s: plan.release,
            flight_s: plan.flight,
            catch_ramp_s: plan.catch_ramp,
            eta_s: plan.eta,
            total_duration_s: plan.total_duration,
        },
        equilibrium_half_separation_m: plan.equilibrium_half_separation,
        target_separation_m: plan.target_separation,
        planned_final_separation_m: plan.planned_final_separation,
        final_stretch_gamma: outcome.final_stretch_gamma,
        com_drive: drive_summary(&plan.com),
        stretch_drive: drive_summary(&plan.stretch),
        finals: FinalsSummary {
            final_separation_m: outcome.final_separation,
            n_com_omega0_total: outcome.finals.com_omega0_total,
            n_str_omega0_total: outcome.finals.str_omega0_total,
            n_str_sqrt3omega0_total: outcome.finals.str_sqrt3_total,
            quantum_com: outcome.finals.quantum_com,
            quantum_stretch: outcome.finals.quantum_stretch,
            classical_com_omega0: outcome.finals.classical_com_omega0,
            classical_str_omega0: outcome.finals.classical_str_omega0,
            classical_str_sqrt3omega0: outcome.finals.classical_str_sqrt3,
        },
        validity: ValiditySummary {
            wavepacket_extent_peak_ratio: outcome.validity_peak,
            quadratic_coulomb_limit: QUADRATIC_COULOMB_LIMIT,
            quadratic_coulomb_valid: outcome.quadratic_coulomb_valid,
        },
        oracle,
        tolerances: tolerances(true, with_oracle, true),
    }
}

// ---------------------------------------------------------------------------
// sweep_freq_change
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepResult {
    omega0_rad_s: f64,
    omega0_hz: f64,
    gamma_final: f64,
    points: usize,
    t_f_min_s: f64,
    t_f_max_s: f64,
    log_spacing: bool,
    with_preparation: bool,
    first_final_n: f64,
    last_final_n: f64,
    min_final_n: f64,
    max_final_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    monotone_decreasing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<SweepOracleSummary>,
    tolerances: ToleranceSummary,
}

#[derive(Serialize)]
struct SweepOracleSummary {
    dim: usize,
    worst_abs_diff: f64,
}

fn sweep_grid(min: f64, max: f64, points: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(CliError::Config("sweep needs points >= 1".into()));
    }
    if !(min >= 0.0) || !(max >= min) {
        return Err(CliError::Config(format!(
            "sweep range must satisfy 0 <= t_f_min <= t_f_max, got [{min}, {max}]"
        )));
    }
    if log && !(min > 0.0) {
        return Err(CliError::Config("log-spaced sweep needs t_f_min > 0".into()));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let n = points as f64 - 1.0;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                max
            } else if log {
                (min.ln() + (max.ln() - min.ln()) * i as f64 / n).exp()
            } else {
                min + (max - min) * i as f64 / n
            }
        })
        .collect())
}

fn sweep_freq_change(cfg: &RunConfig, verbose: u8) -> Result<Vec<Artifact>, CliError> {
    let omega0 = cfg.physical.params().map_err(|e| CliError::Physics(e.to_string()))?.omega0;
    let sw = cfg.sweep_freq_change.as_ref().expect("validated");
    let grid = sweep_grid(sw.t_f_min_s, sw.t_f_max_s, sw.points, sw.log_spacing)?;
    let order = preparation_order(sw.with_preparation, sw.order);

    // One row per grid point, computed in parallel; collect preserves the
    // grid order, so the artifacts are deterministic.
    let rows: Vec<(f64, f64, f64, Option<f64>)> = grid
        .par_iter()
        .map(|&t_f| {
            let report = protocols::run_frequency_change(omega0, sw.gamma_final, t_f, order, 2)
                .map_err(physics)?;
            let oracle_diff = if cfg.with_oracle {
                let (n_pair, n_fock) = protocols::crosscheck_frequency_change(
                    omega0,
                    sw.gamma_final,
                    t_f,
                    order,
                    ORACLE_DIM_SWEEP,
                )
                .map_err(physics)?;
                Some((n_pair - n_fock).abs())
            } else {
                None
            };
            Ok((t_f, report.final_n_initial(), report.final_n_final(), oracle_diff))
        })
        .collect::<Result<_, CliError>>()?;
    if verbose > 0 {
        eprintln!("sweep: {} points in [{:.3e}, {:.3e}] s", rows.len(), sw.t_f_min_s, sw.t_f_max_s);
    }

    let mut csv = String::from(match cfg.with_oracle {
        true => "t_f_us,final_n_initial_basis,final_n_final_basis,oracle_abs_diff\n",
        false => "t_f_us,final_n_initial_basis,final_n_final_basis\n",
    });
    for &(t_f, n_init, n_final, diff) in &rows {
        match diff {
            Some(d) => csv.push_str(&format!(
                "{},{},{},{}\n",
                num(t_f * 1.0e6),
                num(n_init),
                num(n_final),
                num(d)
            )),
            None => {
                csv.push_str(&format!("{},{},{}\n", num(t_f * 1.0e6), num(n_init), num(n_final)))
            }
        }
    }

    let finals: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let monotone = sw
        .check_monotone
        .then(|| finals.windows(2).all(|w| w[1] <= w[0]));
    let oracle = cfg.with_oracle.then(|| SweepOracleSummary {
        dim: ORACLE_DIM_SWEEP,
        worst_abs_diff: rows.iter().filter_map(|r| r.3).fold(0.0, f64::max),
    });
    let result = SweepResult {
        omega0_rad_s: omega0,
        omega0_hz: omega0 / TAU,
        gamma_final: sw.gamma_final,
        points: rows.len(),
        t_f_min_s: sw.t_f_min_s,
        t_f_max_s: sw.t_f_max_s,
        log_spacing: sw.log_spacing,
        with_preparation: sw.with_preparation,
        first_final_n: finals[0],
        last_final_n: *finals.last().unwrap(),
        min_final_n: finals.iter().copied().fold(f64::INFINITY, f64::min),
        max_final_n: finals.iter().copied().fold(0.0, f64::max),
        monotone_decreasing: monotone,
        oracle,
        tolerances: tolerances(false, cfg.with_oracle, false),
    };
    Ok(vec![
        Artifact { name: "sweep.csv", contents: csv },
        Artifact { name: "summary.toml", contents: summary_toml(cfg, result)? },
    ])
}

// ---------------------------------------------------------------------------
// oracle_crosscheck
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct OracleCrosscheckResult {
    cases: usize,
    dim: usize,
    seed: u64,
    max_abs_gamma: f64,
    max_duration_cycles: f64,
    worst_abs_diff: f64,
    tolerance: f64,
    within_tolerance: bool,
    tolerances: ToleranceSummary,
}

struct OracleCase {
    duration: f64,
    schedule: GammaSchedule,
    basis: f64,
}

fn oracle_crosscheck(cfg: &RunConfig, verbose: u8) -> Result<Vec<Artifact>, CliError> {
    let omega0 = cfg.physical.params().map_err(|e| CliError::Physics(e.to_string()))?.omega0;
    let oc = cfg.oracle_crosscheck.as_ref().expect("validated");
    if oc.cases == 0 {
        return Err(CliError::Config("oracle_crosscheck needs cases >= 1".into()));
    }
    if !(oc.max_duration_cycles > 0.0) || !(oc.max_abs_gamma > 0.0) {
        return Err(CliError::Config(
            "oracle_crosscheck needs positive max_duration_cycles and max_abs_gamma".into(),
        ));
    }
    let seed = cfg.seed.unwrap_or(0x1095);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Draw every random input up front so the case list does not depend on
    // evaluation order, then evaluate the cases in parallel.
    let cases: Vec<OracleCase> = (0..oc.cases)
        .map(|_| {
            let duration = (0.2 + 0.8 * rng.gen::<f64>()) * oc.max_duration_cycles / omega0;
            let schedule = {
                let mut draw = || rng.gen::<f64>();
                random_smooth_schedule(duration, oc.max_abs_gamma, &mut draw)
            }
            .map_err(|e| CliError::Physics(e.to_string()))?;
            let basis = -0.9 + 1.9 * rng.gen::<f64>();
            Ok(OracleCase { duration, schedule, basis })
        })
        .collect::<Result<_, CliError>>()?;

    let fock_tol = OdeOptions::tol(ORACLE_TOL.0, ORACLE_TOL.1);
    let results: Vec<[(f64, f64, f64); 2]> = cases
        .par_iter()
        .map(|case| {
            let b = su11::evolve(&case.schedule, omega0, &PAIR_TOL)
                .map_err(|e| CliError::Physics(e.to_string()))?;
            let state = FockState::vacuum(oc.dim).map_err(fock_error)?;
            let state =
                fock::evolve_schedule(&state, &case.schedule, omega0, &fock_tol).map_err(fock_error)?;
            let mut out = [(0.0, 0.0, 0.0); 2];
            for (k, &gamma) in [0.0, case.basis].iter().enumerate() {
                let n_pair =
                    phonon_number(&b, gamma).map_err(|e| CliError::Physics(e.to_string()))?;
                let n_fock = state.phonon_in_basis(gamma).map_err(fock_error)?;
                out[k] = (gamma, n_pair, n_fock);
            }
            Ok(out)
        })
        .collect::<Result<_, CliError>>()?;

    let mut csv = String::from("case,duration_us,basis_gamma,n_pair,n_fock,abs_diff\n");
    let mut worst: f64 = 0.0;
    for (i, (case, rows)) in cases.iter().zip(&results).enumerate() {
        for &(gamma, n_pair, n_fock) in rows {
            let diff = (n_pair - n_fock).abs();
            worst = worst.max(diff);
            csv.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                num(case.duration * 1.0e6),
                num(gamma),
                num(n_pair),
                num(n_fock),
                num(diff)
            ));
        }
        if verbose > 1 {
            eprintln!("case {i}: duration {:.3e} s", case.duration);
        }
    }
    if verbose > 0 {
        eprintln!("oracle crosscheck: worst |dn| = {worst:.3e} over {} cases", cases.len());
    }

    let result = OracleCrosscheckResult {
        cases: oc.cases,
        dim: oc.dim,
        seed,
        max_abs_gamma: oc.max_abs_gamma,
        max_duration_cycles: oc.max_duration_cycles,
        worst_abs_diff: worst,
        tolerance: oc.tolerance,
        within_tolerance: worst <= oc.tolerance,
        tolerances: tolerances(false, true, false),
    };
    Ok(vec![
        Artifact { name: "oracle.csv", contents: csv },
        Artifact { name: "summary.toml", contents: summary_toml(cfg, result)? },
    ])
}
