//! Exact survival times for the symmetric V-shaped trimer
//! (`E = 1`, `V₁₃ = V₂₃ = 1`, `V₁₂ = 0`, `γ = 1`, `Λ = 1`).
//!
//! With source rate `Γ`, dephasing `λ` and mixing `α`:
//!
//! ```text
//! η_I  = 1/Γ + f(α)/g(α)
//! η_II = 1/Γ + (f(α) − h(α)·cos φ)/g(α)
//! f = 4 + α(17+13λ) + 2α²(λ(λ−8)−19) + 3α³(11+λ(9+2λ))
//! g = 4α(2+λ) − α²(15+7λ) + α³(11+λ(9+2λ))
//! h = 4(1−α)²
//! ```
//!
//! The test suites check these against the simulator.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormValue {
    Finite(f64),
    /// `α → 0⁺` limit of a `0/0` expression. The exact `α = 0` dynamics
    /// differ from this when `λ > 0`.
    OneSidedLimit(f64),
    Divergent,
}

impl ClosedFormValue {
    pub fn value(self) -> Option<f64> {
        match self {
            ClosedFormValue::Finite(x) | ClosedFormValue::OneSidedLimit(x) => Some(x),
            ClosedFormValue::Divergent => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// Which reading of the closed-form crossover `α_c` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaCVariant {
    /// `(2 + λ³)` under the square root, as typeset.
    AsPrinted,
    /// `(2 + λ)³` under the square root.
    CubedSum,
}

pub fn f_g_h(alpha: f64, lambda: f64) -> (f64, f64, f64) {
    let a = alpha;
    let l = lambda;
    let cubic = 11.0 + l * (9.0 + 2.0 * l);
    let f = 4.0 + a * (17.0 + 13.0 * l) + 2.0 * a * a * (l * (l - 8.0) - 19.0) + 3.0 * a.powi(3) * cubic;
    let g = 4.0 * a * (2.0 + l) - a * a * (15.0 + 7.0 * l) + a.powi(3) * cubic;
    let h = 4.0 * (1.0 - a).powi(2);
    (f, g, h)
}

fn check_rate(gamma_src: f64) -> Result<()> {
    if gamma_src > 0.0 && gamma_src.is_finite() {
        Ok(())
    } else {
        Err(Error::param("Gamma", "closed form needs Gamma > 0"))
    }
}

/// Independent (uncorrelated) source.
pub fn eta_i(alpha: f64, lambda: f64, gamma_src: f64) -> Result<ClosedFormValue> {
    check_rate(gamma_src)?;
    let (f, g, _) = f_g_h(alpha, lambda);
    Ok(ratio(f, g, gamma_src, lambda))
}

/// Correlated source with phase `φ`.
pub fn eta_ii(alpha: f64, lambda: f64, gamma_src: f64, phi: f64) -> Result<ClosedFormValue> {
    check_rate(gamma_src)?;
    let (f, g, h) = f_g_h(alpha, lambda);
    Ok(ratio(f - h * phi.cos(), g, gamma_src, lambda))
}

fn ratio(num: f64, den: f64, gamma_src: f64, lambda: f64) -> ClosedFormValue {
    if den == 0.0 {
        if num == 0.0 {
            ClosedFormValue::OneSidedLimit(eta_ii_zero_limit(lambda, gamma_src))
        } else {
            ClosedFormValue::Divergent
        }
    } else {
        ClosedFormValue::Finite(1.0 / gamma_src + num / den)
    }
}

/// `lim_{α→0⁺} η_II` at `φ = 0`: `1/Γ + (25+13λ)/(8+4λ)`.
pub fn eta_ii_zero_limit(lambda: f64, gamma_src: f64) -> f64 {
    1.0 / gamma_src + (25.0 + 13.0 * lambda) / (8.0 + 4.0 * lambda)
}

/// `(4/(3+2λ))·(√(X/(11+9λ+2λ²)) − ¼)` with `X` chosen by `variant`.
pub fn alpha_c_formula(lambda: f64, variant: AlphaCVariant) -> f64 {
    let x = match variant {
        AlphaCVariant::AsPrinted => 2.0 + lambda.powi(3),
        AlphaCVariant::CubedSum => (2.0 + lambda).powi(3),
    };
    4.0 / (3.0 + 2.0 * lambda) * ((x / (11.0 + 9.0 * lambda + 2.0 * lambda * lambda)).sqrt() - 0.25)
}

const GOLDEN_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 1000;

/// Location of the maximum of `η_II(α; φ = 0)` on `(0, 1)`: a coarse scan
/// brackets it, golden-section search refines it. `Γ` only shifts `η` by a
/// constant, so the result does not depend on it.
pub fn alpha_c_numeric(lambda: f64, gamma_src: f64) -> Result<f64> {
    check_rate(gamma_src)?;
    let objective = |a: f64| {
        let (f, g, h) = f_g_h(a, lambda);
        (f - h) / g
    };
    let step = 1.0 / SCAN_POINTS as f64;
    let best = (1..SCAN_POINTS)
        .map(|i| i as f64 * step)
        .max_by(|&x, &y| objective(x).total_cmp(&objective(y)))
        .expect("non-empty scan");
    let (mut lo, mut hi) = ((best - step).max(step * 1e-3), (best + step).min(1.0));

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while hi - lo > GOLDEN_TOL {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = objective(d);
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_values() {
        let (f, g, h) = f_g_h(1.0, 1.0);
        assert_relative_eq!(f, 48.0, epsilon = 1e-12);
        assert_relative_eq!(g, 12.0, epsilon = 1e-12);
        assert_eq!(h, 0.0);
        for lambda in [0.0, 2.0, 9.0] {
            assert_eq!(f_g_h(0.0, lambda), (4.0, 0.0, 4.0));
        }
        let (f, g, h) = f_g_h(0.5, 1.0);
        assert_relative_eq!(f, 14.25, epsilon = 1e-12);
        assert_relative_eq!(g, 3.25, epsilon = 1e-12);
        assert_relative_eq!(h, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn survival_times() {
        assert_relative_eq!(eta_i(1.0, 5.0, 0.5).unwrap().as_f64(), 6.0, epsilon = 1e-12);
        assert_relative_eq!(
            eta_ii(0.5, 1.0, 0.5, 0.0).unwrap().as_f64(),
            2.0 + 13.25 / 3.25,
            epsilon = 1e-12
        );
        for alpha in [0.01, 0.3, 0.99] {
            assert_relative_eq!(
                eta_ii(alpha, 1.0, 0.5, PI / 2.0).unwrap().as_f64(),
                eta_i(alpha, 1.0, 0.5).unwrap().as_f64(),
                max_relative = 1e-14
            );
        }
        assert_eq!(eta_i(0.0, 1.0, 0.5).unwrap(), ClosedFormValue::Divergent);
        assert_eq!(eta_ii(0.0, 1.0, 0.5, PI).unwrap(), ClosedFormValue::Divergent);
        assert!(eta_i(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_alpha_correlated_is_one_sided_limit() {
        assert_eq!(
            eta_ii(0.0, 1.0, 0.5, 0.0).unwrap(),
            ClosedFormValue::OneSidedLimit(2.0 + 38.0 / 12.0)
        );
        assert_relative_eq!(eta_ii_zero_limit(1.0, 0.5), 5.166666666666667, epsilon = 1e-12);
        assert_relative_eq!(eta_ii_zero_limit(0.0, 0.5), 5.125, epsilon = 1e-12);
    }

    #[test]
    fn zero_limit_matches_lhopital() {
        // Derivatives at α = 0 by central differences of the polynomials.
        for lambda in [0.0, 1.0, 2.0] {
            let eps = 1e-6;
            let d = |k: usize| {
                let pick = |a: f64| {
                    let (f, g, h) = f_g_h(a, lambda);
                    [f, g, h][k]
                };
                (pick(eps) - pick(-eps)) / (2.0 * eps)
            };
            let (df, dg, dh) = (d(0), d(1), d(2));
            assert_relative_eq!(dh, -8.0, epsilon = 1e-6);
            assert_relative_eq!(
                (df - dh) / dg,
                (25.0 + 13.0 * lambda) / (8.0 + 4.0 * lambda),
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn alpha_c_readings() {
        let printed = alpha_c_formula(1.0, AlphaCVariant::AsPrinted);
        assert!((printed - 0.0954).abs() < 1e-4, "{printed}");
        let cubed = alpha_c_formula(1.0, AlphaCVariant::CubedSum);
        assert!((cubed - 0.686).abs() < 1e-3, "{cubed}");
        let at_zero = alpha_c_formula(0.0, AlphaCVariant::CubedSum);
        assert_relative_eq!(at_zero, 4.0 / 3.0 * ((8.0f64 / 11.0).sqrt() - 0.25), epsilon = 1e-15);
        assert!((at_zero - 0.8038).abs() < 1e-4);
        // The as-printed reading is not monotone in λ.
        let seq: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&l| alpha_c_formula(l, AlphaCVariant::AsPrinted))
            .collect();
        assert!(seq[0] > seq[1] && seq[2] > seq[1]);
    }

    #[test]
    fn numeric_alpha_c() {
        let eta0 = |a: f64| eta_ii(a, 0.0, 0.5, 0.0).unwrap().as_f64();
        assert!(eta0(0.80) > eta0(0.75) && eta0(0.80) > eta0(0.85));
        let a0 = alpha_c_numeric(0.0, 0.5).unwrap();
        assert!((a0 - 0.80).abs() < 0.01, "{a0}");

        let eta1 = |a: f64| eta_ii(a, 1.0, 0.5, 0.0).unwrap().as_f64();
        assert!(eta1(0.7) > eta1(0.5) && eta1(0.7) > eta1(0.9));
        let a1 = alpha_c_numeric(1.0, 0.5).unwrap();
        assert!(a1 > 0.5 && a1 < 0.9);

        let a2 = alpha_c_numeric(2.0, 0.5).unwrap();
        assert!(a0 > a1 && a1 > a2);
        assert_relative_eq!(alpha_c_numeric(1.0, 7.0).unwrap(), a1, epsilon = 1e-8);
    }

    #[test]
    fn h_over_g_decreasing() {
        for lambda in [0.0, 1.0, 5.0] {
            let ratio = |a: f64| {
                let (_, g, h) = f_g_h(a, lambda);
                h / g
            };
            let grid: Vec<f64> = (0..=95).map(|i| 0.05 + i as f64 * 0.01).collect();
            for w in grid.windows(2) {
                assert!(ratio(w[1]) < ratio(w[0]), "λ={lambda} α={}", w[1]);
            }
        }
    }
}
