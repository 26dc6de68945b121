//! Convex surrogate losses and confidence-set calibration thresholds.
//!
//! A loss `φ` turns the K one-vs-rest margins `Z_k f_k(x)` with
//! `Z_k = ±1` into the surrogate objective minimized by [`crate::erm`]. A
//! score `f` thresholded at `-δ*` reproduces the oracle set at level
//! `g = G⁻¹(β)` exactly when
//!
//! ```text
//! g = φ'(δ*) / (φ'(δ*) + φ'(-δ*)),   φ'(δ*) < 0,  φ'(-δ*) < 0.
//! ```
//!
//! Solving the ratio for each shipped loss gives
//!
//! | loss     | φ(x)            | δ*(g)              |
//! |----------|-----------------|--------------------|
//! | boosting | e^{-x}          | ½·ln((1-g)/g)      |
//! | logistic | ln(1 + e^{-x})  | ln((1-g)/g)        |
//! | squared  | (x - 1)²        | 1 - 2g             |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bracket used by the numeric threshold solver.
pub const ROOT_BRACKET: (f64, f64) = (-50.0, 50.0);
const ROOT_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Boosting,
    Logistic,
    Squared,
}

impl Loss {
    pub const ALL: [Loss; 3] = [Loss::Boosting, Loss::Logistic, Loss::Squared];

    pub fn name(self) -> &'static str {
        match self {
            Loss::Boosting => "boosting",
            Loss::Logistic => "logistic",
            Loss::Squared => "squared",
        }
    }

    /// φ(x). The boosting loss saturates at `f64::MAX` instead of overflowing.
    pub fn value(self, x: f64) -> f64 {
        match self {
            Loss::Boosting => saturate((-x).exp()),
            Loss::Logistic => {
                if x >= 0.0 {
                    (-x).exp().ln_1p()
                } else {
                    -x + x.exp().ln_1p()
                }
            }
            Loss::Squared => (x - 1.0) * (x - 1.0),
        }
    }

    /// φ'(x).
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Loss::Boosting => -saturate((-x).exp()),
            Loss::Logistic => {
                if x >= 0.0 {
                    let e = (-x).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + x.exp())
                }
            }
            Loss::Squared => 2.0 * (x - 1.0),
        }
    }

    /// `(φ(x), φ'(x))` sharing one exponential.
    pub fn value_and_derivative(self, x: f64) -> (f64, f64) {
        match self {
            Loss::Boosting => {
                let e = saturate((-x).exp());
                (e, -e)
            }
            Loss::Logistic => {
                let e = (-x.abs()).exp();
                if x >= 0.0 {
                    (e.ln_1p(), -e / (1.0 + e))
                } else {
                    (-x + e.ln_1p(), -1.0 / (1.0 + e))
                }
            }
            Loss::Squared => ((x - 1.0) * (x - 1.0), 2.0 * (x - 1.0)),
        }
    }

    /// φ''(x), used for the convexity constant.
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Loss::Boosting => saturate((-x).exp()),
            Loss::Logistic => {
                let s = 1.0 / (1.0 + (-x.abs()).exp());
                s * (1.0 - s)
            }
            Loss::Squared => 2.0,
        }
    }

    /// Lipschitz constant of φ on `[-bound, bound]`.
    pub fn lipschitz_bound(self, bound: f64) -> f64 {
        match self {
            Loss::Boosting => saturate(bound.exp()),
            Loss::Logistic => 1.0 / (1.0 + (-bound).exp()),
            Loss::Squared => 2.0 * (bound + 1.0),
        }
    }

    /// Supremum of φ'' on `[-bound, bound]`.
    pub fn curvature_bound(self, bound: f64) -> f64 {
        match self {
            Loss::Boosting => saturate(bound.exp()),
            Loss::Logistic => 0.25,
            Loss::Squared => 2.0,
        }
    }

    /// `c₁` such that the surrogate risk has modulus of convexity at least
    /// `c₁ ε²` over scores in `[-bound, bound]`: `min φ'' / 8`.
    pub fn convexity_modulus_constant(self, bound: f64) -> f64 {
        let min_curvature = match self {
            Loss::Boosting => self.second_derivative(bound),
            Loss::Logistic => self.second_derivative(bound),
            Loss::Squared => 2.0,
        };
        min_curvature / 8.0
    }

    /// Exponent `s` of the excess-risk transfer condition; 2 for every shipped loss.
    pub fn transfer_exponent(self) -> f64 {
        2.0
    }

    /// φ'(δ) / (φ'(δ) + φ'(-δ)).
    pub fn calibration_ratio(self, delta: f64) -> f64 {
        let (a, b) = (self.derivative(delta), self.derivative(-delta));
        a / (a + b)
    }

    fn admissible(self, delta: f64) -> bool {
        self.derivative(delta) < 0.0 && self.derivative(-delta) < 0.0
    }

    fn closed_form_delta(self, g: f64) -> f64 {
        match self {
            Loss::Boosting => 0.5 * ((1.0 - g) / g).ln(),
            Loss::Logistic => ((1.0 - g) / g).ln(),
            Loss::Squared => 1.0 - 2.0 * g,
        }
    }
}

fn saturate(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boosting" => Ok(Loss::Boosting),
            "logistic" => Ok(Loss::Logistic),
            "squared" => Ok(Loss::Squared),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// δ* and the level `g` it calibrates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationThreshold {
    pub delta_star: f64,
    pub g_level: f64,
}

fn check_level(g: f64) -> Result<()> {
    if g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(Error::NoAdmissibleThreshold(g))
    }
}

/// δ* solving the calibration ratio for `g_level`, by closed form.
pub fn calibrated_threshold(loss: Loss, g_level: f64) -> Result<CalibrationThreshold> {
    check_level(g_level)?;
    let delta_star = loss.closed_form_delta(g_level);
    if !delta_star.is_finite() || !loss.admissible(delta_star) {
        return Err(Error::NoAdmissibleThreshold(g_level));
    }
    Ok(CalibrationThreshold { delta_star, g_level })
}

/// Same as [`calibrated_threshold`] but by bisection on [`ROOT_BRACKET`],
/// relying only on φ' and the monotone decrease of the ratio in δ.
pub fn calibrated_threshold_numeric(loss: Loss, g_level: f64) -> Result<CalibrationThreshold> {
    check_level(g_level)?;
    let (mut lo, mut hi) = ROOT_BRACKET;
    if loss == Loss::Squared {
        // both derivatives are negative only on (-1, 1)
        lo = lo.max(-1.0);
        hi = hi.min(1.0);
    }
    let excess = |d: f64| loss.calibration_ratio(d) - g_level;
    if excess(lo) < 0.0 || excess(hi) > 0.0 {
        return Err(Error::NoAdmissibleThreshold(g_level));
    }
    for _ in 0..ROOT_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta_star = 0.5 * (lo + hi);
    if !loss.admissible(delta_star) {
        return Err(Error::NoAdmissibleThreshold(g_level));
    }
    Ok(CalibrationThreshold { delta_star, g_level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fused_value_and_derivative_match() {
        for loss in Loss::ALL {
            for i in -400..=400 {
                let x = i as f64 * 0.05;
                assert_eq!(loss.value_and_derivative(x), (loss.value(x), loss.derivative(x)), "{loss} at {x}");
            }
        }
    }

    #[test]
    fn values_at_reference_points() {
        assert_abs_diff_eq!(Loss::Logistic.value(0.0), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(Loss::Boosting.value(0.0), 1.0);
        assert_eq!(Loss::Squared.value(1.0), 0.0);
        assert_eq!(Loss::Boosting.derivative(0.0), -1.0);
        assert_eq!(Loss::Squared.derivative(0.0), -2.0);
        assert_eq!(Loss::Logistic.derivative(0.0), -0.5);
    }

    #[test]
    fn extreme_arguments_stay_finite() {
        for loss in Loss::ALL {
            for x in [-1e6, -800.0, -50.0, 50.0, 800.0, 1e6] {
                assert!(loss.value(x).is_finite(), "{loss} {x}");
                assert!(loss.derivative(x).is_finite(), "{loss} {x}");
            }
        }
        assert_eq!(Loss::Boosting.value(-1000.0), f64::MAX);
        assert_abs_diff_eq!(Loss::Logistic.value(-1000.0), 1000.0, epsilon = 1e-9);
    }

    #[test]
    fn midpoint_convexity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for loss in Loss::ALL {
            for _ in 0..10_000 {
                let x: f64 = rng.random_range(-10.0..10.0);
                let y: f64 = rng.random_range(-10.0..10.0);
                let lhs = loss.value(0.5 * (x + y));
                let rhs = 0.5 * (loss.value(x) + loss.value(y));
                assert!(lhs <= rhs + 1e-12, "{loss} at {x}, {y}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-5;
        for loss in Loss::ALL {
            for i in 0..=400 {
                let x = -10.0 + 0.05 * i as f64;
                let fd = (loss.value(x + h) - loss.value(x - h)) / (2.0 * h);
                let d = loss.derivative(x);
                assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{loss} at {x}: {d} vs {fd}");
                let fd2 = (loss.derivative(x + h) - loss.derivative(x - h)) / (2.0 * h);
                let d2 = loss.second_derivative(x);
                assert!((d2 - fd2).abs() <= 1e-6 * (1.0 + d2.abs()), "{loss} φ'' at {x}");
            }
        }
    }

    #[test]
    fn threshold_examples() {
        assert_abs_diff_eq!(calibrated_threshold(Loss::Logistic, 0.5).unwrap().delta_star, 0.0);
        assert_abs_diff_eq!(calibrated_threshold(Loss::Boosting, 0.5).unwrap().delta_star, 0.0);
        assert_abs_diff_eq!(calibrated_threshold(Loss::Squared, 0.25).unwrap().delta_star, 0.5);
    }

    #[test]
    fn threshold_round_trip_and_agreement() {
        for loss in Loss::ALL {
            for i in 1..=98 {
                let g = 0.01 * i as f64;
                let closed = calibrated_threshold(loss, g).unwrap();
                let numeric = calibrated_threshold_numeric(loss, g).unwrap();
                let d = closed.delta_star;
                assert!(loss.derivative(d) < 0.0 && loss.derivative(-d) < 0.0);
                assert!((loss.calibration_ratio(d) - g).abs() <= 1e-10, "{loss} g={g}");
                assert!((d - numeric.delta_star).abs() <= 1e-10, "{loss} g={g}: {d} vs {}", numeric.delta_star);
            }
        }
    }

    #[test]
    fn threshold_rejects_inadmissible_levels() {
        for loss in Loss::ALL {
            for g in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
                assert!(calibrated_threshold(loss, g).is_err());
                assert!(calibrated_threshold_numeric(loss, g).is_err());
            }
        }
        // δ* = ½ ln(1e60) ≈ 69 lies outside the bisection bracket
        assert!(calibrated_threshold_numeric(Loss::Boosting, 1e-60).is_err());
        assert!(calibrated_threshold(Loss::Boosting, 1e-60).is_ok());
    }

    #[test]
    fn metadata() {
        assert!(Loss::Logistic.lipschitz_bound(5.0) < 1.0);
        assert_abs_diff_eq!(Loss::Boosting.lipschitz_bound(5.0), 5f64.exp());
        assert_eq!(Loss::Squared.lipschitz_bound(5.0), 12.0);
        for loss in Loss::ALL {
            assert!(loss.convexity_modulus_constant(5.0) > 0.0);
            assert_eq!(loss.transfer_exponent(), 2.0);
            assert_eq!(loss.name().parse::<Loss>().unwrap(), loss);
        }
        assert!("hinge".parse::<Loss>().is_err());
    }
}
