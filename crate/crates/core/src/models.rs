//! Reservoir models: spectral densities and the real correlation functions
//! Φ(t), Ψ(t) that drive every rate formula.
//!
//! All frequencies are measured relative to the system transition frequency
//! (rotating frame), so only detunings enter. Times are dimensionless in
//! units of the reference rate (1/γ₀ for the Jaynes-Cummings variants,
//! 1/Ω₀ for the band-gap model).

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One of the built-in reservoir models, or a tabulated correlation function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelSpec<T> {
    /// Damped Jaynes-Cummings model on resonance: Lorentzian spectral
    /// density of width λ centered on the atomic transition.
    ResonantJc { gamma0: T, lambda: T },
    /// Damped Jaynes-Cummings model with the cavity detuned by Δ.
    DetunedJc { gamma0: T, lambda: T, delta: T },
    /// Photonic band gap: a broad background Lorentzian minus a narrow
    /// gap Lorentzian, both centered on the transition.
    BandGap {
        omega0: T,
        gamma1: T,
        gamma2: T,
        w1: T,
        w2: T,
    },
    /// Tabulated Φ, Ψ on a uniform time grid with step `step`; values are
    /// linearly interpolated, extrapolation is an error.
    Custom { step: T, phi: Vec<T>, psi: Vec<T> },
}

impl<T: Real> ModelSpec<T> {
    pub fn resonant_jc(gamma0: T, lambda: T) -> Self {
        Self::ResonantJc { gamma0, lambda }
    }

    pub fn detuned_jc(gamma0: T, lambda: T, delta: T) -> Self {
        Self::DetunedJc {
            gamma0,
            lambda,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidModel(msg.into()));
        match self {
            Self::ResonantJc { gamma0, lambda } => {
                if *gamma0 <= T::zero() || *lambda <= T::zero() {
                    return bad("resonant_jc requires gamma0 > 0 and lambda > 0");
                }
            }
            Self::DetunedJc { gamma0, lambda, .. } => {
                if *gamma0 <= T::zero() || *lambda <= T::zero() {
                    return bad("detuned_jc requires gamma0 > 0 and lambda > 0");
                }
            }
            Self::BandGap {
                omega0,
                gamma1,
                gamma2,
                w1,
                w2,
            } => {
                if *omega0 <= T::zero() || *gamma1 <= T::zero() || *gamma2 <= T::zero() {
                    return bad("band_gap requires omega0, gamma1, gamma2 > 0");
                }
                if *w1 < T::zero() || *w2 < T::zero() {
                    return bad("band_gap requires w1, w2 >= 0");
                }
            }
            Self::Custom { step, phi, psi } => {
                if *step <= T::zero() {
                    return bad("custom table requires step > 0");
                }
                if phi.len() != psi.len() || phi.len() < 2 {
                    return bad("custom table needs phi and psi of equal length >= 2");
                }
            }
        }
        Ok(())
    }

    /// Short identifier used in CSV exports and file names.
    pub fn id(&self) -> &'static str {
        match self {
            Self::ResonantJc { .. } => "resonant_jc",
            Self::DetunedJc { .. } => "detuned_jc",
            Self::BandGap { .. } => "band_gap",
            Self::Custom { .. } => "custom",
        }
    }

    /// Human-readable time unit for CSV header comments.
    pub fn time_unit(&self) -> &'static str {
        match self {
            Self::BandGap { .. } => "1/Omega0",
            _ => "1/gamma0",
        }
    }

    /// Spectral density J at frequency offset `nu = ω − ω_S` from the
    /// system transition. Not defined for tabulated models.
    pub fn spectral_density(&self, nu: T) -> Result<T> {
        let two_pi = T::of(2.0) * T::PI();
        match self {
            Self::ResonantJc { gamma0, lambda } => {
                Ok(*gamma0 * *lambda * *lambda / (two_pi * (nu * nu + *lambda * *lambda)))
            }
            Self::DetunedJc {
                gamma0,
                lambda,
                delta,
            } => {
                // J peaks at ω = ω_S − Δ, i.e. nu = −Δ.
                let x = nu + *delta;
                Ok(*gamma0 * *lambda * *lambda / (two_pi * (x * x + *lambda * *lambda)))
            }
            Self::BandGap {
                omega0,
                gamma1,
                gamma2,
                w1,
                w2,
            } => {
                let quarter = T::of(0.25);
                let bg = *w1 * *gamma1 / (nu * nu + quarter * *gamma1 * *gamma1);
                let gap = *w2 * *gamma2 / (nu * nu + quarter * *gamma2 * *gamma2);
                Ok(*omega0 * *omega0 * (bg - gap) / two_pi)
            }
            Self::Custom { .. } => Err(Error::UnsupportedVariant(
                "custom models carry no spectral density",
            )),
        }
    }

    /// Correlation functions (Φ(t), Ψ(t)), the rotating-frame real and
    /// imaginary parts (×2) of the reservoir two-time correlation.
    pub fn correlation(&self, t: T) -> Result<(T, T)> {
        if t < T::zero() {
            return Err(Error::NegativeTime(t.to_f64_lossy()));
        }
        match self {
            Self::ResonantJc { gamma0, lambda } => {
                Ok((*gamma0 * *lambda * (-*lambda * t).exp(), T::zero()))
            }
            Self::DetunedJc {
                gamma0,
                lambda,
                delta,
            } => {
                let env = *gamma0 * *lambda * (-*lambda * t).exp();
                Ok((env * (*delta * t).cos(), env * (*delta * t).sin()))
            }
            Self::BandGap {
                omega0,
                gamma1,
                gamma2,
                w1,
                w2,
            } => {
                let half = T::of(0.5);
                let phi = T::of(2.0)
                    * *omega0
                    * *omega0
                    * (*w1 * (-half * *gamma1 * t).exp() - *w2 * (-half * *gamma2 * t).exp());
                Ok((phi, T::zero()))
            }
            Self::Custom { step, phi, psi } => {
                let x = (t / *step).to_f64_lossy();
                let k = x.floor() as usize;
                if k + 1 >= phi.len() {
                    // allow the exact grid end
                    if k + 1 == phi.len() && (x - k as f64).abs() < 1e-9 {
                        return Ok((phi[k], psi[k]));
                    }
                    return Err(Error::OutOfTable(t.to_f64_lossy()));
                }
                let w = T::of(x - k as f64);
                let lerp = |tab: &[T]| tab[k] + (tab[k + 1] - tab[k]) * w;
                Ok((lerp(phi), lerp(psi)))
            }
        }
    }

    /// Pole decomposition of the kernel f(t) = ½(Φ(t) + iΨ(t)) as
    /// Σ_k w_k e^{−μ_k t}; one pseudomode per term. Not available for
    /// tabulated models.
    pub fn pseudomodes(&self) -> Result<Vec<Pseudomode<T>>> {
        let half = T::of(0.5);
        match self {
            Self::ResonantJc { gamma0, lambda } => Ok(vec![Pseudomode {
                weight: Complex::new(half * *gamma0 * *lambda, T::zero()),
                rate: Complex::new(*lambda, T::zero()),
            }]),
            Self::DetunedJc {
                gamma0,
                lambda,
                delta,
            } => Ok(vec![Pseudomode {
                weight: Complex::new(half * *gamma0 * *lambda, T::zero()),
                rate: Complex::new(*lambda, -*delta),
            }]),
            Self::BandGap {
                omega0,
                gamma1,
                gamma2,
                w1,
                w2,
            } => {
                let o2 = *omega0 * *omega0;
                Ok(vec![
                    Pseudomode {
                        weight: Complex::new(o2 * *w1, T::zero()),
                        rate: Complex::new(half * *gamma1, T::zero()),
                    },
                    Pseudomode {
                        weight: Complex::new(-(o2 * *w2), T::zero()),
                        rate: Complex::new(half * *gamma2, T::zero()),
                    },
                ])
            }
            Self::Custom { .. } => Err(Error::UnsupportedVariant(
                "custom models carry no pole decomposition",
            )),
        }
    }

    /// Last time at which a tabulated model is defined; `None` for built-ins.
    pub fn table_end(&self) -> Option<T> {
        match self {
            Self::Custom { step, phi, .. } => Some(*step * T::of((phi.len() - 1) as f64)),
            _ => None,
        }
    }
}

/// One exponential term w·e^{−μt} of the memory kernel, Re μ > 0.
#[derive(Clone, Copy, Debug)]
pub struct Pseudomode<T> {
    pub weight: Complex<T>,
    pub rate: Complex<T>,
}
