//! Expected survival time `η = ∫₀^∞ (1 − ρ_{N+1,N+1}(t)) dt` by three routes.
//!
//! * [`est_linear_solve`]: removing the drain population from the generator
//!   leaves an autonomous system `ẋ = A x`; then `η = Σ_k x_kk` with
//!   `A x = −x(0)`, the `s → 0` limit of the Laplace-domain populations.
//! * [`est_resolvent_limit`]: evaluates `Σ_k ŷ_kk(s)` from `(s − G) ŷ = ρ₀` at
//!   a few small `s` and extrapolates to zero.
//! * [`est_time_domain`]: integrates the propagated drain population.
//!
//! A survival time diverges when part of the initial state sits in a
//! non-decaying mode of `A` (a dark state). That is certified by the overlap
//! of the initial state with the left null space of `A`, not by singularity
//! alone: a stationary mode that the source never reaches leaves `η` finite.

use nalgebra::SVD;

use crate::dynamics::{SurvivalSampler, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::linalg::extrapolate_to_zero;
use crate::liouvillian::{vectorize, DensityMatrix, Generator};
use crate::{CMatrix, CVector, C64};

/// Relative singular-value cut below which `A` has a stationary mode.
pub const SINGULAR_RTOL: f64 = 1e-10;
/// Initial-state weight on stationary modes above which `η` is divergent.
pub const TRAPPED_TOL: f64 = 1e-8;
/// Fitted resolvent exponent within this distance of −1 certifies a pole.
pub const POLE_EXPONENT_TOL: f64 = 0.1;
pub const DEFAULT_S_VALUES: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Est {
    Finite(f64),
    Divergent,
}

impl Est {
    pub fn finite(self) -> Option<f64> {
        match self {
            Est::Finite(x) => Some(x),
            Est::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, Est::Divergent)
    }

    /// As a float, with `+∞` for divergence.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstMethod {
    TimeDomain,
    LinearSolve,
    ResolventLimit,
}

impl EstMethod {
    pub const ALL: [EstMethod; 3] = [
        EstMethod::TimeDomain,
        EstMethod::LinearSolve,
        EstMethod::ResolventLimit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstMethod::TimeDomain => "time",
            EstMethod::LinearSolve => "solve",
            EstMethod::ResolventLimit => "resolvent",
        }
    }

    /// Runs the method with its default settings.
    pub fn run(self, g: &Generator, rho0: &DensityMatrix) -> Result<EstValue> {
        match self {
            EstMethod::LinearSolve => est_linear_solve(g, rho0),
            EstMethod::ResolventLimit => est_resolvent_limit(g, rho0, &DEFAULT_S_VALUES),
            EstMethod::TimeDomain => {
                est_time_domain_adaptive(g, rho0, AUTO_HORIZON_START, AUTO_HORIZON_MAX, AUTO_TOL)
            }
        }
    }
}

impl std::str::FromStr for EstMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(EstMethod::TimeDomain),
            "solve" => Ok(EstMethod::LinearSolve),
            "resolvent" => Ok(EstMethod::ResolventLimit),
            other => Err(Error::param(
                "method",
                format!("`{other}` is not one of time|solve|resolvent|all"),
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Solve: relative residual. Resolvent: size of the extrapolation
    /// correction. Time domain: tail estimate beyond the horizon.
    pub residual: f64,
    /// Ratio of extreme singular values of the restricted generator (solve only).
    pub condition: Option<f64>,
    pub horizon: Option<f64>,
    /// Number of stationary modes of the restricted generator.
    pub stationary_modes: usize,
    /// Norm of the initial state's projection onto those modes.
    pub trapped_weight: f64,
    pub pole_exponent: Option<f64>,
    /// Integrand `1 − ρ_drain` at the horizon when the integral did not converge.
    pub plateau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstValue {
    pub value: Est,
    pub method: EstMethod,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

/// Number of coordinates kept after dropping the drain population, which is
/// always the last vector index.
fn restricted_len(g: &Generator) -> usize {
    let full = g.dim() * g.dim();
    debug_assert_eq!(g.drain_coordinate(), full - 1);
    full - 1
}

/// Sum of the populations `x_kk` for `k = 0..=N` of a (possibly restricted) vector.
fn survival_trace(x: &CVector, dim: usize) -> C64 {
    (0..dim - 1).map(|k| x[k * dim + k]).sum()
}

fn check_state(g: &Generator, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: rho0.dim(),
        });
    }
    Ok(())
}

pub fn est_linear_solve(g: &Generator, rho0: &DensityMatrix) -> Result<EstValue> {
    check_state(g, rho0)?;
    let m = restricted_len(g);
    let a: CMatrix = g.matrix.view((0, 0), (m, m)).into_owned();
    let b: CVector = -vectorize(rho0).rows(0, m).into_owned();
    let b_norm = b.norm();

    let svd = SVD::new(a.clone(), true, true);
    let sigma = &svd.singular_values;
    let s_max = sigma[0];
    let s_min = sigma[m - 1];
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    let u = svd.u.as_ref().expect("requested U");
    let v = svd.v_t.as_ref().expect("requested Vᵀ").adjoint();
    let rank = sigma.iter().filter(|&&s| s >= SINGULAR_RTOL * s_max).count();
    let kernel = m - rank;

    let mut diagnostics = Diagnostics {
        condition: Some(condition),
        stationary_modes: kernel,
        ..Diagnostics::default()
    };

    let x = if kernel == 0 {
        a.clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("LU breakdown on restricted generator".into()))?
    } else {
        let u0 = u.columns(rank, kernel);
        let v0 = v.columns(rank, kernel);
        let trapped = (u0.adjoint() * &b).norm() / b_norm;
        diagnostics.trapped_weight = trapped;
        if trapped > TRAPPED_TOL {
            return Ok(EstValue {
                value: Est::Divergent,
                method: EstMethod::LinearSolve,
                converged: true,
                diagnostics,
            });
        }
        // Consistent singular system: the physical solution lies in range(A),
        // so remove the kernel component along range(A) from the
        // minimum-norm solution. Requires a semisimple zero eigenvalue.
        let mut x_mn = CVector::zeros(m);
        for i in 0..rank {
            let coeff = u.column(i).dotc(&b) / C64::from(sigma[i]);
            x_mn += v.column(i) * coeff;
        }
        let coupling = u0.adjoint() * v0;
        let correction = coupling.lu().solve(&(u0.adjoint() * &x_mn)).ok_or_else(|| {
            Error::Numerical("defective stationary subspace (zero eigenvalue not semisimple)".into())
        })?;
        x_mn - v0 * correction
    };

    diagnostics.residual = (&a * &x - &b).norm() / b_norm;
    let eta = survival_trace(&x, g.dim());
    if !eta.re.is_finite() {
        return Err(Error::Numerical("non-finite survival time".into()));
    }
    Ok(EstValue {
        value: Est::Finite(eta.re),
        method: EstMethod::LinearSolve,
        converged: true,
        diagnostics,
    })
}

/// Laplace-domain survival sum `Σ_k ŷ_kk(s)` at a single `s > 0`.
pub fn laplace_survival(g: &Generator, rho0: &DensityMatrix, s: f64) -> Result<f64> {
    check_state(g, rho0)?;
    let n = g.matrix.nrows();
    let shifted = CMatrix::identity(n, n) * C64::from(s) - &g.matrix;
    let y = shifted
        .lu()
        .solve(&vectorize(rho0))
        .ok_or_else(|| Error::Numerical(format!("resolvent singular at s = {s:e}")))?;
    Ok(survival_trace(&y, g.dim()).re)
}

/// Evaluates the Laplace-domain survival sum at each `s` (strictly
/// decreasing, positive) and extrapolates polynomially to `s = 0`. The local
/// log–log slope between the two smallest `s` is reported as the pole
/// exponent; a slope near −1 certifies divergence.
pub fn est_resolvent_limit(
    g: &Generator,
    rho0: &DensityMatrix,
    s_values: &[f64],
) -> Result<EstValue> {
    if s_values.is_empty() {
        return Err(Error::param("s_values", "empty"));
    }
    if s_values.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::param("s_values", "must be positive and finite"));
    }
    if s_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("s_values", "must be strictly decreasing"));
    }
    let sums = s_values
        .iter()
        .map(|&s| laplace_survival(g, rho0, s))
        .collect::<Result<Vec<_>>>()?;

    let n = sums.len();
    if n == 1 {
        return Ok(EstValue {
            value: Est::Finite(sums[0]),
            method: EstMethod::ResolventLimit,
            converged: false,
            diagnostics: Diagnostics::default(),
        });
    }

    let exponent = (sums[n - 1] / sums[n - 2]).ln() / (s_values[n - 1] / s_values[n - 2]).ln();
    let mut diagnostics = Diagnostics {
        pole_exponent: Some(exponent),
        ..Diagnostics::default()
    };
    if (exponent + 1.0).abs() <= POLE_EXPONENT_TOL {
        // Weight of the 1/s pole, i.e. the population that never drains.
        diagnostics.trapped_weight = sums[n - 1] * s_values[n - 1];
        return Ok(EstValue {
            value: Est::Divergent,
            method: EstMethod::ResolventLimit,
            converged: true,
            diagnostics,
        });
    }
    let limit = extrapolate_to_zero(s_values, &sums);
    diagnostics.residual = (limit - sums[n - 1]).abs();
    Ok(EstValue {
        value: Est::Finite(limit),
        method: EstMethod::ResolventLimit,
        converged: exponent.abs() < POLE_EXPONENT_TOL && limit.is_finite(),
        diagnostics,
    })
}

/// Survival probabilities below this are treated as round-off.
const NOISE_FLOOR: f64 = 1e-12;

/// Composite Simpson integral over uniform samples (even number of intervals).
fn simpson(samples: &[f64], dt: f64) -> f64 {
    let n = samples.len() - 1;
    debug_assert!(n % 2 == 0);
    let inner: f64 = samples[1..n]
        .iter()
        .enumerate()
        .map(|(i, &y)| if i % 2 == 0 { 4.0 * y } else { 2.0 * y })
        .sum();
    dt / 3.0 * (samples[0] + inner + samples[n])
}

/// Exponential tail `∫_T^∞` estimated from the decay of the integrand's
/// envelope over the final tenth of the horizon. Infinite when the envelope
/// does not decay. An envelope already at round-off level counts as zero.
fn tail_estimate(samples: &[f64], dt: f64) -> f64 {
    let window = (samples.len() / 10).max(4);
    let tail = &samples[samples.len() - window..];
    let half = window / 2;
    let env = |s: &[f64]| s.iter().fold(0.0f64, |m, &y| m.max(y.abs()));
    let (early, late) = (env(&tail[..half]), env(&tail[half..]));
    if late < NOISE_FLOOR {
        return 0.0;
    }
    if late <= 0.0 || early <= late {
        return f64::INFINITY;
    }
    let rate = (early / late).ln() / (half as f64 * dt);
    late / rate
}

fn check_time_args(horizon: f64, tol: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", "must be positive and finite"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    Ok(())
}

/// Even number of steps of length at most [`DEFAULT_DT`] covering `horizon`.
fn grid_steps(horizon: f64) -> usize {
    let steps = (horizon / DEFAULT_DT).ceil() as usize;
    (steps + steps % 2).max(2)
}

fn time_domain_value(samples: &[f64], dt: f64, tol: f64) -> EstValue {
    let integral = simpson(samples, dt);
    let tail = tail_estimate(samples, dt);
    let end = *samples.last().expect("non-empty");
    let converged = end < tol && tail < tol * integral.max(f64::MIN_POSITIVE);
    let diagnostics = Diagnostics {
        residual: tail,
        horizon: Some((samples.len() - 1) as f64 * dt),
        plateau: (!converged).then_some(end),
        ..Diagnostics::default()
    };
    let value = if converged { integral + tail } else { integral };
    EstValue {
        value: Est::Finite(value),
        method: EstMethod::TimeDomain,
        converged,
        diagnostics,
    }
}

/// `∫₀^T (1 − ρ_drain) dt` by Simpson's rule on the propagated grid, plus a
/// tail estimate. Converged when the integrand at `T` is below `tol` and the
/// tail is below `tol·η`; otherwise the value is the bare integral, a lower
/// bound because the integrand is nonnegative.
pub fn est_time_domain(
    g: &Generator,
    rho0: &DensityMatrix,
    horizon: f64,
    tol: f64,
) -> Result<EstValue> {
    check_state(g, rho0)?;
    check_time_args(horizon, tol)?;
    let steps = grid_steps(horizon);
    let dt = horizon / steps as f64;
    let mut sampler = SurvivalSampler::new(g, rho0, dt)?;
    let mut samples = vec![sampler.current()];
    sampler.extend(&mut samples, steps)?;
    Ok(time_domain_value(&samples, dt, tol))
}

pub const AUTO_HORIZON_START: f64 = 50.0;
pub const AUTO_HORIZON_MAX: f64 = 6400.0;
pub const AUTO_TOL: f64 = 1e-8;

/// Doubles the horizon from `start` until [`est_time_domain`] converges or
/// `max` is reached. Each doubling continues the same trajectory.
pub fn est_time_domain_adaptive(
    g: &Generator,
    rho0: &DensityMatrix,
    start: f64,
    max: f64,
    tol: f64,
) -> Result<EstValue> {
    check_state(g, rho0)?;
    check_time_args(start, tol)?;
    check_time_args(max, tol)?;
    let mut steps = grid_steps(start);
    let dt = start / steps as f64;
    let max_steps = grid_steps(max / dt * DEFAULT_DT).max(steps);
    let mut sampler = SurvivalSampler::new(g, rho0, dt)?;
    let mut samples = vec![sampler.current()];
    loop {
        let missing = steps + 1 - samples.len();
        sampler.extend(&mut samples, missing)?;
        let est = time_domain_value(&samples, dt, tol);
        if est.converged || steps >= max_steps {
            return Ok(est);
        }
        steps = (steps * 2).min(max_steps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::assemble_generator;
    use crate::network::{symmetric_trimer, MixingParams};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn trimer_gen(alpha: f64, lambda: f64, gamma_src: f64, phi: Option<f64>) -> Generator {
        let (spec, src, drain) = symmetric_trimer(gamma_src, 1.0);
        let src = phi.map_or(src.clone(), |p| src.with_correlation(p));
        assemble_generator(&spec, &src, &drain, &MixingParams::new(alpha, lambda).unwrap()).unwrap()
    }

    fn rho0() -> DensityMatrix {
        DensityMatrix::source_initial(3)
    }

    #[test]
    fn solve_incoherent_endpoint() {
        let est = est_linear_solve(&trimer_gen(1.0, 1.0, 0.5, None), &rho0()).unwrap();
        assert_relative_eq!(est.value.finite().unwrap(), 6.0, max_relative = 1e-12);
        assert!(est.converged);
        assert!(est.diagnostics.residual < 1e-12);
    }

    #[test]
    fn solve_intermediate_alpha() {
        // 1/Γ + f(0.5)/g(0.5) = 2 + 14.25/3.25
        let est = est_linear_solve(&trimer_gen(0.5, 1.0, 0.5, None), &rho0()).unwrap();
        assert_relative_eq!(est.value.finite().unwrap(), 2.0 + 14.25 / 3.25, max_relative = 1e-12);
    }

    #[test]
    fn solve_certifies_dark_state_divergence() {
        for phi in [None, Some(PI / 2.0), Some(PI)] {
            let est = est_linear_solve(&trimer_gen(0.0, 1.0, 0.5, phi), &rho0()).unwrap();
            assert!(est.value.is_divergent(), "{phi:?}");
            assert!(est.converged);
            assert!(est.diagnostics.stationary_modes >= 1);
            assert!(est.diagnostics.trapped_weight > 1e-3);
        }
    }

    #[test]
    fn unreachable_dark_state_stays_finite() {
        let est = est_linear_solve(&trimer_gen(0.0, 1.0, 0.5, Some(0.0)), &rho0()).unwrap();
        assert!(est.diagnostics.stationary_modes >= 1);
        assert!(est.diagnostics.trapped_weight < 1e-12);
        let eta = est.value.finite().unwrap();
        let td = est_time_domain(&trimer_gen(0.0, 1.0, 0.5, Some(0.0)), &rho0(), 200.0, 1e-9).unwrap();
        assert!(td.converged, "{eta} {td:?}");
        assert_relative_eq!(eta, td.value.finite().unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn resolvent_agrees_with_solve() {
        for (alpha, phi) in [(0.5, None), (0.3, Some(0.0)), (0.8, Some(2.0))] {
            let g = trimer_gen(alpha, 1.0, 0.5, phi);
            let solve = est_linear_solve(&g, &rho0()).unwrap().value.finite().unwrap();
            let res = est_resolvent_limit(&g, &rho0(), &DEFAULT_S_VALUES).unwrap();
            assert!(res.converged);
            assert_relative_eq!(res.value.finite().unwrap(), solve, max_relative = 1e-6);
        }
    }

    #[test]
    fn resolvent_pole_when_coherent() {
        let g = trimer_gen(0.0, 1.0, 0.5, None);
        let s = [1e-2, 1e-3, 1e-4];
        let sums: Vec<f64> = s.iter().map(|&x| laplace_survival(&g, &rho0(), x).unwrap()).collect();
        // c/s scaling: s·Σ(s) approaches a constant.
        assert_relative_eq!(sums[2] * s[2], sums[1] * s[1], max_relative = 0.02);
        let res = est_resolvent_limit(&g, &rho0(), &s).unwrap();
        assert!(res.value.is_divergent());
        assert!((res.diagnostics.pole_exponent.unwrap() + 1.0).abs() < 0.1);
    }

    #[test]
    fn resolvent_single_point_and_bad_input() {
        let g = trimer_gen(0.5, 1.0, 0.5, None);
        let single = est_resolvent_limit(&g, &rho0(), &[1.0]).unwrap();
        assert!(!single.converged);
        assert_relative_eq!(
            single.value.finite().unwrap(),
            laplace_survival(&g, &rho0(), 1.0).unwrap()
        );
        assert!(est_resolvent_limit(&g, &rho0(), &[1e-3, 1e-2]).is_err());
        assert!(est_resolvent_limit(&g, &rho0(), &[1e-2, 1e-2]).is_err());
        assert!(est_resolvent_limit(&g, &rho0(), &[]).is_err());
        assert!(est_resolvent_limit(&g, &rho0(), &[-1.0]).is_err());
    }

    #[test]
    fn time_domain_agrees_with_solve() {
        let g = trimer_gen(0.5, 1.0, 0.5, Some(1.0));
        let solve = est_linear_solve(&g, &rho0()).unwrap().value.finite().unwrap();
        let td = est_time_domain_adaptive(&g, &rho0(), 50.0, 6400.0, 1e-8).unwrap();
        assert!(td.converged);
        assert_relative_eq!(td.value.finite().unwrap(), solve, max_relative = 1e-4);
    }

    #[test]
    fn time_domain_plateau_for_dark_state() {
        let g = trimer_gen(0.0, 1.0, 0.5, Some(PI));
        let td = est_time_domain(&g, &rho0(), 100.0, 1e-6).unwrap();
        assert!(!td.converged);
        // The whole excitation ends in |D⟩, so the integrand stays at 1.
        assert_relative_eq!(td.diagnostics.plateau.unwrap(), 1.0, epsilon = 1e-9);
        assert!(td.value.finite().unwrap() <= 100.0 + 1e-9);
    }

    #[test]
    fn time_domain_fast_source_classical_limit() {
        let g = trimer_gen(1.0, 0.0, 1e3, None);
        let td = est_time_domain_adaptive(&g, &rho0(), 50.0, 800.0, 1e-8).unwrap();
        assert_relative_eq!(td.value.finite().unwrap(), 4.0 + 1e-3, max_relative = 0.01);
    }

    #[test]
    fn bad_time_domain_args() {
        let g = trimer_gen(0.5, 1.0, 0.5, None);
        assert!(est_time_domain(&g, &rho0(), 0.0, 1e-6).is_err());
        assert!(est_time_domain(&g, &rho0(), 10.0, 0.0).is_err());
        assert!(est_linear_solve(&g, &DensityMatrix::source_initial(2)).is_err());
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let dt = 0.25;
        let samples: Vec<f64> = (0..=8).map(|i| (i as f64 * dt).powi(3)).collect();
        assert_relative_eq!(simpson(&samples, dt), 2f64.powi(4) / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("solve".parse::<EstMethod>().unwrap(), EstMethod::LinearSolve);
        assert!("euler".parse::<EstMethod>().is_err());
    }
}
