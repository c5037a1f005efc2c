//! Bogoliubov (two-photon) dynamics of a single mode in a harmonic well with
//! time-varying curvature.
//!
//! In the ladder basis of the reference well ω₀ the quadratic Hamiltonian
//! ħω₀[(a†a + ½) + (α/2)(a† + a)²], α = γ(1 + γ/2), generates SU(1,1) group
//! elements: the Heisenberg-picture annihilation operator stays of the form
//! a_H(t) = μ(t) a + ν(t) a†   with |μ|² − |ν|² = 1.
//!
//! The pair (μ, ν) carries everything needed here: phonon numbers in any
//! detuned basis, the rotation–squeeze–rotation (Euler) decomposition, and
//! the preparation squeeze that makes a schedule end in the target well's
//! ground state.

use num_complex::Complex64;
use thiserror::Error;

use crate::ode::{self, OdeError, OdeOptions};
use crate::schedule::{alpha_of_gamma, GammaSource};

#[derive(Debug, Error, PartialEq)]
pub enum Su11Error {
    #[error("measurement basis requires γ > -1, got γ = {0}")]
    InvalidBasis(f64),
    #[error("transform is not symplectic: |μ|² - |ν|² - 1 = {defect}")]
    NotSymplectic { defect: f64 },
    #[error("drive duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("squeeze amplitude must be non-negative, got {0}")]
    NegativeSqueeze(f64),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// Wrap an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * std::f64::consts::PI);
    if y > std::f64::consts::PI {
        y - 2.0 * std::f64::consts::PI
    } else {
        y
    }
}

/// The pair (μ, ν) of a_H = μ a + ν a† in the reference-mode basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bogoliubov {
    pub mu: Complex64,
    pub nu: Complex64,
}

impl Bogoliubov {
    pub fn identity() -> Self {
        Self { mu: Complex64::new(1.0, 0.0), nu: Complex64::new(0.0, 0.0) }
    }

    /// Pair of the squeeze S(r) = exp[(r/2)(a†² − a²)]: S† a S = a cosh r + a† sinh r.
    pub fn squeeze(r: f64) -> Self {
        Self { mu: Complex64::new(r.cosh(), 0.0), nu: Complex64::new(r.sinh(), 0.0) }
    }

    /// Pair of S(r, θ) = exp[(r/2)(e^{iθ} a†² − e^{−iθ} a²)].
    pub fn phased_squeeze(r: f64, theta: f64) -> Self {
        Self {
            mu: Complex64::new(r.cosh(), 0.0),
            nu: Complex64::from_polar(r.sinh(), theta),
        }
    }

    /// Pair of the phase-space rotation e^{iθ K₃}, K₃ = (a†a + ½)/2.
    ///
    /// Free evolution for a time T at frequency ω is `rotation(-2 ω T)`.
    pub fn rotation(theta: f64) -> Self {
        Self { mu: Complex64::from_polar(1.0, 0.5 * theta), nu: Complex64::new(0.0, 0.0) }
    }

    /// Pair of the inverse transformation.
    pub fn inverse(&self) -> Self {
        Self { mu: self.mu.conj(), nu: -self.nu }
    }

    /// |μ|² − |ν|² − 1; zero for exact group elements.
    pub fn symplectic_defect(&self) -> f64 {
        self.mu.norm_sqr() - self.nu.norm_sqr() - 1.0
    }

    /// Mode occupation ⟨a†a⟩ = |ν|² and anomalous moment ⟨a²⟩ = μν on the
    /// state U|0⟩ of the reference vacuum.
    pub fn vacuum_moments(&self) -> (f64, Complex64) {
        (self.nu.norm_sqr(), self.mu * self.nu)
    }

    /// Equality up to the shared unit phase that a global ladder-basis phase
    /// convention would introduce; μ's phase is rotated to the representative.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        let rot = |b: &Self| {
            if b.mu.norm() == 0.0 {
                (b.mu, b.nu)
            } else {
                let ph = b.mu.conj() / b.mu.norm();
                (b.mu * ph, b.nu * ph)
            }
        };
        let (m1, n1) = rot(self);
        let (m2, n2) = rot(other);
        (m1 - m2).norm() <= tol && (n1 - n2).norm() <= tol
    }
}

/// Composition: the transform of "apply `first`, then `second`".
///
/// In matrix form M = [[μ, ν], [ν̄, μ̄]] this is M₂ · M₁.
pub fn compose(first: &Bogoliubov, second: &Bogoliubov) -> Bogoliubov {
    Bogoliubov {
        mu: second.mu * first.mu + second.nu * first.nu.conj(),
        nu: second.mu * first.nu + second.nu * first.mu.conj(),
    }
}

/// Euler (rotation–squeeze–rotation) angles of a group element:
/// U = e^{iθ_a K₃} · e^{2 i r K₂} · e^{iθ_b K₃}, with r ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub theta_a: f64,
    pub r: f64,
    pub theta_b: f64,
}

/// Decompose a symplectic pair into Euler angles.
///
/// r = arccosh|μ|, θ_a = arg μ + arg ν, θ_b = arg μ − arg ν (arg ν := 0 when
/// ν = 0). Angles lie in [−2π, 2π]; `recompose` inverts exactly.
pub fn euler_decompose(b: &Bogoliubov) -> Result<EulerAngles, Su11Error> {
    let defect = b.symplectic_defect();
    if !(defect.abs() < 1.0e-6) {
        return Err(Su11Error::NotSymplectic { defect });
    }
    let r = b.mu.norm().max(1.0).acosh();
    let phi_mu = b.mu.arg();
    let phi_nu = if b.nu.norm() == 0.0 { 0.0 } else { b.nu.arg() };
    Ok(EulerAngles { theta_a: phi_mu + phi_nu, r, theta_b: phi_mu - phi_nu })
}

pub fn recompose(angles: &EulerAngles) -> Bogoliubov {
    let EulerAngles { theta_a, r, theta_b } = *angles;
    Bogoliubov {
        mu: Complex64::from_polar(r.cosh(), 0.5 * (theta_a + theta_b)),
        nu: Complex64::from_polar(r.sinh(), 0.5 * (theta_a - theta_b)),
    }
}

/// Evolve the pair under a detuning schedule, starting from `initial`.
///
/// Times in `source` are in the unit set by `omega_ref` (pass 1 for
/// dimensionless schedules, the SI ω₀ for schedules in seconds). Integration
/// restarts at schedule breakpoints so the error estimate never straddles a
/// derivative kink.
pub fn evolve_between(
    initial: &Bogoliubov,
    source: &impl GammaSource,
    omega_ref: f64,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<Bogoliubov, Su11Error> {
    let mut y = [initial.mu.re, initial.mu.im, initial.nu.re, initial.nu.im];
    let mut rhs = pair_rhs(source, omega_ref);
    for (a, b) in split_at_breakpoints(source, t0, t1) {
        ode::solve(&mut rhs, omega_ref * a, omega_ref * b, &mut y, opts)?;
    }
    Ok(Bogoliubov {
        mu: Complex64::new(y[0], y[1]),
        nu: Complex64::new(y[2], y[3]),
    })
}

/// Evolve over the full span of the schedule from the identity.
pub fn evolve(
    source: &impl GammaSource,
    omega_ref: f64,
    opts: &OdeOptions,
) -> Result<Bogoliubov, Su11Error> {
    let (t0, t1) = source.span();
    evolve_between(&Bogoliubov::identity(), source, omega_ref, t0, t1, opts)
}

/// Evolve from `times[0]`, returning the pair at each requested time.
pub fn evolve_sampled(
    initial: &Bogoliubov,
    source: &impl GammaSource,
    omega_ref: f64,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Bogoliubov>, Su11Error> {
    let mut out = Vec::with_capacity(times.len());
    let mut b = *initial;
    if let Some((&first, rest)) = times.split_first() {
        out.push(b);
        let mut prev = first;
        for &t in rest {
            b = evolve_between(&b, source, omega_ref, prev, t, opts)?;
            out.push(b);
            prev = t;
        }
    }
    Ok(out)
}

fn pair_rhs<'a>(
    source: &'a impl GammaSource,
    omega_ref: f64,
) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    // dμ/ds = −i[(1+α)μ + α ν̄], dν/ds = −i[(1+α)ν + α μ̄], s = ω_ref t.
    move |s: f64, y: &[f64], dy: &mut [f64]| {
        let alpha = alpha_of_gamma(source.gamma(s / omega_ref));
        let w = 1.0 + alpha;
        let (mre, mim, nre, nim) = (y[0], y[1], y[2], y[3]);
        dy[0] = w * mim - alpha * nim;
        dy[1] = -w * mre - alpha * nre;
        dy[2] = w * nim - alpha * mim;
        dy[3] = -w * nre - alpha * mre;
    }
}

fn split_at_breakpoints(
    source: &impl GammaSource,
    t0: f64,
    t1: f64,
) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = source
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t0 && b < t1)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut spans = Vec::with_capacity(cuts.len() + 1);
    let mut prev = t0;
    for c in cuts {
        spans.push((prev, c));
        prev = c;
    }
    spans.push((prev, t1));
    spans
}

/// Target transform whose vacuum is the ground state of the (1 + γ_f) ω₀
/// well: a pure squeeze with r_c = −½ ln(1 + γ_f).
pub fn freq_change_target(gamma_final: f64) -> Result<Bogoliubov, Su11Error> {
    if !(gamma_final > -1.0) {
        return Err(Su11Error::InvalidBasis(gamma_final));
    }
    Ok(Bogoliubov::squeeze(-0.5 * (1.0 + gamma_final).ln()))
}

/// Which side of the schedule the preparation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreparationOrder {
    /// U_total = U_s · U_p (preparation precedes the schedule).
    Before,
    /// U_total = U_p · U_s (preparation follows the schedule).
    After,
}

/// The preparation transform U_p solving U_s U_p = U_c (order `Before`) or
/// U_p U_s = U_c (order `After`).
///
/// `r_p` and `theta_m` describe the phased squeeze S(r_p, θ_m); for order
/// `Before` the residual Euler rotation acts on the vacuum as a pure phase,
/// so S(r_p, θ_m)|0⟩ realizes U_p|0⟩ exactly. The full group element is kept
/// in [`PreparationSqueeze::transform`] so either order can be verified
/// without re-deriving the discarded rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationSqueeze {
    pub r_p: f64,
    pub theta_m: f64,
    transform: Bogoliubov,
}

impl PreparationSqueeze {
    /// The ideal phased squeeze S(r_p, θ_m).
    pub fn squeeze_only(&self) -> Bogoliubov {
        Bogoliubov::phased_squeeze(self.r_p, self.theta_m)
    }

    /// The exact preparation group element (squeeze and frame rotation).
    pub fn transform(&self) -> Bogoliubov {
        self.transform
    }
}

/// Solve for the preparation squeeze given the schedule transform `u_s` and
/// the target `u_c`.
pub fn solve_preparation(
    u_s: &Bogoliubov,
    u_c: &Bogoliubov,
    order: PreparationOrder,
) -> Result<PreparationSqueeze, Su11Error> {
    let u_p = match order {
        PreparationOrder::Before => compose(u_c, &u_s.inverse()),
        PreparationOrder::After => compose(&u_s.inverse(), u_c),
    };
    let angles = euler_decompose(&u_p)?;
    Ok(PreparationSqueeze { r_p: angles.r, theta_m: angles.theta_a, transform: u_p })
}

/// Parametric drive realizing a phased squeeze: well modulation
/// ω(t)² = ω²[1 + (4g/ω) sin(2ωt − θ_I)] applied for t_p at mode frequency ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricDrive {
    /// Squeeze rate, rad/s.
    pub g: f64,
    /// Drive phase, in (−π, π].
    pub theta_i: f64,
    /// Drive duration, s.
    pub t_p: f64,
    /// Mode frequency the drive is referenced to, rad/s.
    pub omega_ref: f64,
}

impl ParametricDrive {
    /// The squeeze (r, θ_m) this drive realizes on the vacuum at t = t_p,
    /// in the frame conventions of [`solve_preparation`].
    pub fn equivalent_squeeze(&self) -> (f64, f64) {
        (self.g * self.t_p, wrap_angle(self.theta_i - 2.0 * self.omega_ref * self.t_p))
    }

    /// Lab-frame transform at time t ∈ [0, t_p] within the rotating-wave
    /// approximation: U(t) = R(t) · S(g t, θ_I) with R(t) = e^{−iωt(a†a+½)}.
    pub fn rwa_transform(&self, t: f64) -> Bogoliubov {
        compose(
            &Bogoliubov::phased_squeeze(self.g * t, self.theta_i),
            &Bogoliubov::rotation(-2.0 * self.omega_ref * t),
        )
    }
}

/// Convert a solved preparation squeeze into drive parameters:
/// g = r_p / t_p and θ_I = 2 ω t_p + θ_m (wrapped to (−π, π]).
pub fn drive_from_squeeze(
    r_p: f64,
    theta_m: f64,
    t_p: f64,
    omega_ref: f64,
) -> Result<ParametricDrive, Su11Error> {
    if !(t_p > 0.0) {
        return Err(Su11Error::NonPositiveDuration(t_p));
    }
    if !(r_p >= 0.0) {
        return Err(Su11Error::NegativeSqueeze(r_p));
    }
    Ok(ParametricDrive {
        g: r_p / t_p,
        theta_i: wrap_angle(2.0 * omega_ref * t_p + theta_m),
        t_p,
        omega_ref,
    })
}

/// Phonon number of U|0⟩ measured in the eigenbasis of the well detuned by
/// `gamma` from the reference:
///
/// ⟨n_γ⟩ = (1+γ)⁻¹ [⟨a†a⟩ + ½ + (γ/2)(1+γ/2)⟨(a†+a)²⟩] − ½,
///
/// with the moments taken on the reference vacuum through (μ, ν). Exact
/// zero (up to rounding) when U maps the vacuum onto that well's ground
/// state; `gamma` must exceed −1.
pub fn phonon_number(b: &Bogoliubov, gamma: f64) -> Result<f64, Su11Error> {
    if !(gamma > -1.0) {
        return Err(Su11Error::InvalidBasis(gamma));
    }
    let (n, a2) = b.vacuum_moments();
    let x2 = 2.0 * a2.re + 2.0 * n + 1.0; // ⟨(a†+a)²⟩
    let beta = 0.5 * alpha_of_gamma(gamma);
    Ok((n + 0.5 + beta * x2) / (1.0 + gamma) - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::GammaSchedule;

    const TOL: OdeOptions = OdeOptions {
        rtol: 1.0e-12,
        atol: 1.0e-13,
        h_init: None,
        max_steps: 50_000_000,
    };

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn elementary_factors_are_symplectic() {
        for b in [
            Bogoliubov::identity(),
            Bogoliubov::squeeze(0.7),
            Bogoliubov::squeeze(-1.3),
            Bogoliubov::phased_squeeze(0.9, 2.1),
            Bogoliubov::rotation(1.234),
        ] {
            assert!(b.symplectic_defect().abs() < 1.0e-15);
            let round = compose(&b, &b.inverse());
            assert!((round.mu - Complex64::new(1.0, 0.0)).norm() < 1.0e-15);
            assert!(round.nu.norm() < 1.0e-15);
        }
    }

    #[test]
    fn composition_matches_operator_order() {
        // Rotation then squeeze: U = S·R, so μ = cosh r e^{iθ/2},
        // ν = sinh r e^{−iθ/2}.
        let r = 0.6;
        let theta = 0.8;
        let b = compose(&Bogoliubov::rotation(theta), &Bogoliubov::squeeze(r));
        assert!((b.mu - Complex64::from_polar(r.cosh(), 0.5 * theta)).norm() < 1.0e-15);
        assert!((b.nu - Complex64::from_polar(r.sinh(), -0.5 * theta)).norm() < 1.0e-15);
        // Two squeezes along the same axis add their amplitudes.
        let twice = compose(&Bogoliubov::squeeze(0.3), &Bogoliubov::squeeze(0.45));
        assert!((twice.mu.re - 0.75_f64.cosh()).abs() < 1.0e-15);
        assert!((twice.nu.re - 0.75_f64.sinh()).abs() < 1.0e-15);
    }

    #[test]
    fn free_evolution_is_a_rotation() {
        let schedule = GammaSchedule::constant(0.0, 7.3).unwrap();
        let b = evolve(&schedule, 1.0, &TOL).unwrap();
        // a_H(T) = a e^{−iT} at the reference frequency.
        assert!((b.mu - Complex64::from_polar(1.0, -7.3)).norm() < 1.0e-11);
        assert!(b.nu.norm() < 1.0e-12);
        // Defect accumulates at the integrator tolerance, not machine eps.
        assert!(b.symplectic_defect().abs() < 1.0e-11);
    }

    #[test]
    fn constant_detuning_closed_form() {
        // For constant γ the well has frequency Ω = (1+γ)ω₀ and
        //   μ = cos Ωt − (i/2)(q + 1/q) sin Ωt,
        //   ν = −(i/2)(q − 1/q) sin Ωt,      q = Ω/ω₀.
        let gamma = 1.0;
        let q = 1.0 + gamma;
        for &s in &[0.3, std::f64::consts::FRAC_PI_4, 2.0] {
            let schedule = GammaSchedule::constant(gamma, s).unwrap();
            let b = evolve(&schedule, 1.0, &TOL).unwrap();
            let (sin, cos) = (q * s).sin_cos();
            let mu = Complex64::new(cos, -0.5 * (q + 1.0 / q) * sin);
            let nu = Complex64::new(0.0, -0.5 * (q - 1.0 / q) * sin);
            assert!((b.mu - mu).norm() < 1.0e-10, "s = {s}");
            assert!((b.nu - nu).norm() < 1.0e-10, "s = {s}");
        }
        // Quarter period of the doubled well: ⟨n⟩ = 9/16 in the old basis.
        let schedule = GammaSchedule::constant(1.0, std::f64::consts::FRAC_PI_4).unwrap();
        let b = evolve(&schedule, 1.0, &TOL).unwrap();
        assert_close(phonon_number(&b, 0.0).unwrap(), 9.0 / 16.0, 1.0e-10);
    }

    #[test]
    fn evolution_in_si_time_units() {
        // Same physics expressed with schedules in seconds.
        let omega0 = 2.0 * std::f64::consts::PI * 1.0e6;
        let t = 7.3 / omega0;
        let schedule = GammaSchedule::constant(0.0, t).unwrap();
        let b = evolve(&schedule, omega0, &TOL).unwrap();
        assert!((b.mu - Complex64::from_polar(1.0, -7.3)).norm() < 1.0e-11);
    }

    #[test]
    fn euler_round_trip() {
        let cases = [
            Bogoliubov::identity(),
            Bogoliubov::squeeze(1.1),
            Bogoliubov::squeeze(-0.4),
            Bogoliubov::phased_squeeze(0.8, -2.9),
            Bogoliubov::rotation(2.2),
            compose(
                &compose(&Bogoliubov::rotation(0.7), &Bogoliubov::squeeze(1.5)),
                &Bogoliubov::rotation(-2.4),
            ),
        ];
        for b in cases {
            let angles = euler_decompose(&b).unwrap();
            assert!(angles.r >= 0.0);
            assert!(angles.theta_a.abs() <= 2.0 * std::f64::consts::PI + 1.0e-12);
            assert!(angles.theta_b.abs() <= 2.0 * std::f64::consts::PI + 1.0e-12);
            let back = recompose(&angles);
            assert!((back.mu - b.mu).norm() < 1.0e-12);
            assert!((back.nu - b.nu).norm() < 1.0e-12);
        }
    }

    #[test]
    fn negative_squeeze_decomposes_with_pi_phases() {
        let angles = euler_decompose(&Bogoliubov::squeeze(-0.9)).unwrap();
        assert_close(angles.r, 0.9, 1.0e-14);
        assert_close(angles.theta_a, std::f64::consts::PI, 1.0e-14);
        assert_close(angles.theta_b, -std::f64::consts::PI, 1.0e-14);
    }

    #[test]
    fn target_transform_reaches_detuned_ground_state() {
        let b = freq_change_target(1.0).unwrap();
        // r_c = −½ ln 2 for a frequency doubling.
        assert_close(b.mu.re.acosh(), 0.5 * (2.0_f64).ln(), 1.0e-14);
        assert!(b.nu.re < 0.0);
        for gamma in [-0.5, 0.1, 1.0, 2.0, 3.0_f64.sqrt() - 1.0] {
            let t = freq_change_target(gamma).unwrap();
            assert!(phonon_number(&t, gamma).unwrap().abs() < 1.0e-14, "γ = {gamma}");
        }
        assert!(matches!(freq_change_target(-1.0), Err(Su11Error::InvalidBasis(_))));
    }

    #[test]
    fn phonon_number_reference_values() {
        let id = Bogoliubov::identity();
        assert_close(phonon_number(&id, 0.0).unwrap(), 0.0, 1.0e-15);
        // Vacuum measured in the doubled-frequency basis.
        assert_close(phonon_number(&id, 1.0).unwrap(), 0.125, 1.0e-15);
        // Squeezed vacuum in its own basis.
        for r in [0.3, 1.0, 1.8] {
            assert_close(
                phonon_number(&Bogoliubov::squeeze(r), 0.0).unwrap(),
                r.sinh().powi(2),
                1.0e-12,
            );
        }
        assert!(matches!(phonon_number(&id, -1.0), Err(Su11Error::InvalidBasis(_))));
    }

    #[test]
    fn preparation_for_identity_schedule_is_target_squeeze() {
        let u_c = freq_change_target(1.0).unwrap();
        let prep =
            solve_preparation(&Bogoliubov::identity(), &u_c, PreparationOrder::Before).unwrap();
        assert_close(prep.r_p, 0.5 * (2.0_f64).ln(), 1.0e-14);
        assert_close(prep.theta_m, std::f64::consts::PI, 1.0e-13);
        // The squeeze alone reproduces the target on the vacuum.
        let n = phonon_number(&prep.squeeze_only(), 1.0).unwrap();
        assert!(n.abs() < 1.0e-13);
    }

    #[test]
    fn preparation_closes_the_loop_for_both_orders() {
        let schedule = GammaSchedule::builder(0.0)
            .blend_to(0.9, 2.0)
            .wobble(0.2, 1.3, 0.0, 3.0)
            .blend_to(0.5, 1.5)
            .build()
            .unwrap();
        let gamma_f = schedule.end_gamma();
        let u_s = evolve(&schedule, 1.0, &TOL).unwrap();
        let u_c = freq_change_target(gamma_f).unwrap();

        let before = solve_preparation(&u_s, &u_c, PreparationOrder::Before).unwrap();
        let total = compose(&before.squeeze_only(), &u_s);
        assert!(phonon_number(&total, gamma_f).unwrap() < 1.0e-9);

        let after = solve_preparation(&u_s, &u_c, PreparationOrder::After).unwrap();
        let total = compose(&u_s, &after.transform());
        assert!(phonon_number(&total, gamma_f).unwrap() < 1.0e-9);
        assert!(before.r_p >= 0.0 && after.r_p >= 0.0);
    }

    #[test]
    fn drive_conversion_round_trip() {
        let omega = 2.0 * std::f64::consts::PI * 1.0e6;
        let (r_p, theta_m, t_p) = (1.3, 0.77, 3.0e-6);
        let drive = drive_from_squeeze(r_p, theta_m, t_p, omega).unwrap();
        assert_close(drive.g, r_p / t_p, 1.0e-9);
        assert!(drive.theta_i > -std::f64::consts::PI && drive.theta_i <= std::f64::consts::PI);
        let (r_back, theta_back) = drive.equivalent_squeeze();
        assert_close(r_back, r_p, 1.0e-12);
        assert_close(wrap_angle(theta_back - theta_m), 0.0, 1.0e-9);
        assert!(matches!(
            drive_from_squeeze(1.0, 0.0, 0.0, omega),
            Err(Su11Error::NonPositiveDuration(_))
        ));
    }

    #[test]
    fn rwa_drive_realizes_the_squeeze_after_free_rotation() {
        // R(t_p) S(g t_p, θ_I) = S(g t_p, θ_I − 2ωt_p) R(t_p) as group
        // elements: driving through the hold equals squeezing first and
        // letting the frame rotate.
        let omega = 1.0;
        let drive = drive_from_squeeze(0.9, -1.1, 5.0, omega).unwrap();
        let lhs = drive.rwa_transform(drive.t_p);
        let (r, theta_m) = drive.equivalent_squeeze();
        let rhs = compose(
            &Bogoliubov::rotation(-2.0 * omega * drive.t_p),
            &Bogoliubov::phased_squeeze(r, theta_m),
        );
        assert!((lhs.mu - rhs.mu).norm() < 1.0e-12);
        assert!((lhs.nu - rhs.nu).norm() < 1.0e-12);
    }

    #[test]
    fn phase_canonical_comparison() {
        let b = Bogoliubov::phased_squeeze(0.8, 0.3);
        let ph = Complex64::from_polar(1.0, 1.9);
        let rotated = Bogoliubov { mu: b.mu * ph, nu: b.nu * ph };
        assert!(b.approx_eq_up_to_phase(&rotated, 1.0e-12));
        assert!(!b.approx_eq_up_to_phase(&Bogoliubov::phased_squeeze(0.81, 0.3), 1.0e-3));
    }
}
