//! Radial α-profiles.
//!
//! Every profile is an immutable value that evaluates α(r) and its first two
//! derivatives in closed form. The quartic families used for the realistic
//! boundary regime are stored with their coefficients already evaluated, so a
//! scan over an auxiliary parameter just builds a new value per sample.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quartic coefficients (c0, c2, c3, c4) of the field-reversal profile.
pub const FIG1_COEFFS: [f64; 4] = [1.0, -26.09, 53.64, -28.22];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Cos,
    Sin,
}

/// One harmonic `amplitude * kind(2πkr)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub kind: TrigKind,
    pub k: u32,
    pub amplitude: f64,
}

impl FourierTerm {
    pub fn cos(k: u32, amplitude: f64) -> Self {
        Self { kind: TrigKind::Cos, k, amplitude }
    }

    pub fn sin(k: u32, amplitude: f64) -> Self {
        Self { kind: TrigKind::Sin, k, amplitude }
    }

    fn wavenumber(&self) -> f64 {
        2.0 * PI * self.k as f64
    }

    fn derivative(&self, r: f64, order: u8) -> f64 {
        let q = self.wavenumber();
        let (s, c) = (q * r).sin_cos();
        let a = self.amplitude;
        match (self.kind, order) {
            (TrigKind::Cos, 0) => a * c,
            (TrigKind::Cos, 1) => -a * q * s,
            (TrigKind::Cos, _) => -a * q * q * c,
            (TrigKind::Sin, 0) => a * s,
            (TrigKind::Sin, 1) => a * q * c,
            (TrigKind::Sin, _) => -a * q * q * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlphaProfile {
    Constant {
        alpha0: f64,
    },
    /// α(r) = C·(c0 + c2 r² + c3 r³ + c4 r⁴)
    Quartic {
        #[serde(rename = "C")]
        scale: f64,
        coeffs: [f64; 4],
    },
    /// α(r) = α₀ + Σ amplitude·kind(2πkr)
    Fourier {
        alpha0: f64,
        #[serde(default)]
        terms: Vec<FourierTerm>,
    },
    /// α(x) = 2a / cosh(a(x − x0))
    Soliton { a: f64, x0: f64 },
}

impl AlphaProfile {
    pub fn constant(alpha0: f64) -> Self {
        AlphaProfile::Constant { alpha0 }
    }

    pub fn quartic(scale: f64, coeffs: [f64; 4]) -> Self {
        AlphaProfile::Quartic { scale, coeffs }
    }

    /// The field-reversal quartic scaled by `scale`.
    pub fn fig1(scale: f64) -> Self {
        Self::quartic(scale, FIG1_COEFFS)
    }

    /// The ζ-dependent quartic family hosting the triple point, materialized
    /// at one value of ζ.
    pub fn fig2(zeta: f64, scale: f64) -> Self {
        Self::quartic(
            scale,
            [
                -(21.465 + 2.467 * zeta),
                426.412 + 167.928 * zeta,
                -(806.729 + 436.289 * zeta),
                392.276 + 272.991 * zeta,
            ],
        )
    }

    pub fn fourier(alpha0: f64, terms: Vec<FourierTerm>) -> Self {
        AlphaProfile::Fourier { alpha0, terms }
    }

    pub fn soliton(a: f64, x0: f64) -> Self {
        AlphaProfile::Soliton { a, x0 }
    }

    /// Soliton in the rescaled coordinate x = a·r with a = 1.
    pub fn unit_soliton(x0: f64) -> Self {
        Self::soliton(1.0, x0)
    }

    /// Upper end of the radial domain; `None` for profiles defined on the
    /// whole half-line.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            AlphaProfile::Quartic { .. } | AlphaProfile::Fourier { .. } => Some(1.0),
            AlphaProfile::Constant { .. } | AlphaProfile::Soliton { .. } => None,
        }
    }

    pub fn is_soliton(&self) -> bool {
        matches!(self, AlphaProfile::Soliton { .. })
    }

    /// Rejects non-finite parameters and out-of-range soliton or harmonic data.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be finite")))
            }
        };
        match self {
            AlphaProfile::Constant { alpha0 } => finite(*alpha0, "alpha0"),
            AlphaProfile::Quartic { scale, coeffs } => {
                finite(*scale, "C")?;
                coeffs.iter().try_for_each(|c| finite(*c, "quartic coefficient"))
            }
            AlphaProfile::Fourier { alpha0, terms } => {
                finite(*alpha0, "alpha0")?;
                for t in terms {
                    finite(t.amplitude, "amplitude")?;
                    if t.k == 0 {
                        return Err(Error::invalid("harmonic index k must be positive"));
                    }
                }
                Ok(())
            }
            AlphaProfile::Soliton { a, x0 } => {
                finite(*a, "a")?;
                finite(*x0, "x0")?;
                if *a <= 0.0 || *x0 <= 0.0 {
                    return Err(Error::invalid("soliton needs a > 0 and x0 > 0"));
                }
                Ok(())
            }
        }
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if !r.is_finite() {
            return Err(Error::NonFinite("profile argument"));
        }
        let upper = self.upper_bound().unwrap_or(f64::INFINITY);
        // Half-grid points may land a rounding error past r = 1.
        if r < 0.0 || r > upper * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::Domain { r, upper });
        }
        Ok(())
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        Ok(self.eval_unchecked(r, 0))
    }

    /// Analytic first (`order == 1`) or second (`order == 2`) derivative.
    pub fn evaluate_derivative(&self, r: f64, order: u8) -> Result<f64> {
        if !(1..=2).contains(&order) {
            return Err(Error::invalid(format!("derivative order {order} not supported")));
        }
        self.check_domain(r)?;
        Ok(self.eval_unchecked(r, order))
    }

    fn eval_unchecked(&self, r: f64, order: u8) -> f64 {
        match self {
            AlphaProfile::Constant { alpha0 } => {
                if order == 0 {
                    *alpha0
                } else {
                    0.0
                }
            }
            AlphaProfile::Quartic { scale, coeffs: [c0, c2, c3, c4] } => {
                let r2 = r * r;
                scale
                    * match order {
                        0 => c0 + r2 * (c2 + r * (c3 + r * c4)),
                        1 => r * (2.0 * c2 + r * (3.0 * c3 + 4.0 * c4 * r)),
                        _ => 2.0 * c2 + r * (6.0 * c3 + 12.0 * c4 * r),
                    }
            }
            AlphaProfile::Fourier { alpha0, terms } => {
                let base = if order == 0 { *alpha0 } else { 0.0 };
                base + terms.iter().map(|t| t.derivative(r, order)).sum::<f64>()
            }
            AlphaProfile::Soliton { a, x0 } => {
                let z = a * (r - x0);
                let sech = 1.0 / z.cosh();
                match order {
                    0 => 2.0 * a * sech,
                    1 => -2.0 * a * a * sech * z.tanh(),
                    _ => 2.0 * a * a * a * sech * (1.0 - 2.0 * sech * sech),
                }
            }
        }
    }
}

/// Largest |α'' + α³/2 − a²α| over the sample points.
pub fn constraint_residual(profile: &AlphaProfile, samples: &[f64], a: f64) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &r in samples {
        let alpha = profile.evaluate(r)?;
        let alpha2 = profile.evaluate_derivative(r, 2)?;
        let res = alpha2 + 0.5 * alpha.powi(3) - a * a * alpha;
        worst = worst.max(res.abs());
    }
    Ok(worst)
}
