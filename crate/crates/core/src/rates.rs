//! Time-dependent decay rate γ(t) and energy shift S(t) under every
//! approximation scheme: Markov, TCL2, TCL4, the second-order generalized
//! (memory-kernel) master equation, and the exact rate.
//!
//! Closed forms exist for the resonant and detuned Jaynes-Cummings models;
//! the band-gap and tabulated models fall back to a generic iterated
//! trapezoidal quadrature of the fourth-order integrals. Negative rates are
//! ordinary values here and are never clamped.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::models::ModelSpec;
use crate::scalar::Real;

/// Decay rate (may be negative) and Lamb shift at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePair<T> {
    pub gamma: T,
    pub shift: T,
}

impl<T: Real> RatePair<T> {
    pub fn zero() -> Self {
        Self {
            gamma: T::zero(),
            shift: T::zero(),
        }
    }
}

/// Approximation scheme for (γ(t), S(t)).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Exact,
    Tcl2,
    Tcl4,
    Markov,
    GmeBorn,
}

impl RateMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Tcl2 => "tcl2",
            Self::Tcl4 => "tcl4",
            Self::Markov => "markov",
            Self::GmeBorn => "gme_born",
        }
    }
}

/// Threshold below which the oscillating amplitude factor counts as zero
/// and the exact rate as divergent.
pub const AMPLITUDE_EPS: f64 = 1e-12;

/// Stricter amplitude floor used by rate providers that feed propagation:
/// γ(t) ~ 2/|t₀ − t| near an amplitude zero, so a fixed-step integrator must
/// stop while the rate is still moderate.
pub const PROPAGATION_AMPLITUDE_FLOOR: f64 = 1e-2;

/// Markovian rate and Lamb shift: γ_M = ∫₀^∞ Φ, S_M = ∫₀^∞ Ψ.
pub fn markov_rate<T: Real>(m: &ModelSpec<T>) -> Result<RatePair<T>> {
    match m {
        ModelSpec::ResonantJc { gamma0, .. } => Ok(RatePair {
            gamma: *gamma0,
            shift: T::zero(),
        }),
        ModelSpec::DetunedJc {
            gamma0,
            lambda,
            delta,
        } => {
            let s2 = *lambda * *lambda + *delta * *delta;
            Ok(RatePair {
                gamma: *gamma0 * *lambda * *lambda / s2,
                shift: *gamma0 * *lambda * *delta / s2,
            })
        }
        ModelSpec::BandGap {
            omega0,
            gamma1,
            gamma2,
            w1,
            w2,
        } => Ok(RatePair {
            gamma: T::of(4.0) * *omega0 * *omega0 * (*w1 / *gamma1 - *w2 / *gamma2),
            shift: T::zero(),
        }),
        ModelSpec::Custom { step, phi, psi } => {
            let end = phi.len() - 1;
            let tail = phi[end].abs().max(psi[end].abs());
            if tail > T::of(1e-12) {
                return Err(Error::UndecayedTable(tail.to_f64_lossy()));
            }
            Ok(RatePair {
                gamma: trapezoid_full(phi, *step),
                shift: trapezoid_full(psi, *step),
            })
        }
    }
}

/// Second-order TCL rate: γ⁽²⁾(t) = ∫₀ᵗ Φ, S⁽²⁾(t) = ∫₀ᵗ Ψ.
pub fn tcl2_rate<T: Real>(m: &ModelSpec<T>, t: T) -> Result<RatePair<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    match m {
        ModelSpec::ResonantJc { gamma0, lambda } => Ok(RatePair {
            gamma: *gamma0 * (T::one() - (-*lambda * t).exp()),
            shift: T::zero(),
        }),
        ModelSpec::DetunedJc {
            gamma0,
            lambda,
            delta,
        } => {
            let (l, d) = (*lambda, *delta);
            let s2 = l * l + d * d;
            let e = (-l * t).exp();
            let (c, s) = ((d * t).cos(), (d * t).sin());
            Ok(RatePair {
                gamma: *gamma0 * l * (l - e * (l * c - d * s)) / s2,
                shift: *gamma0 * l * (d - e * (d * c + l * s)) / s2,
            })
        }
        ModelSpec::BandGap {
            omega0,
            gamma1,
            gamma2,
            w1,
            w2,
        } => {
            let half = T::of(0.5);
            let g = T::of(4.0)
                * *omega0
                * *omega0
                * (*w1 * (T::one() - (-half * *gamma1 * t).exp()) / *gamma1
                    - *w2 * (T::one() - (-half * *gamma2 * t).exp()) / *gamma2);
            Ok(RatePair {
                gamma: g,
                shift: T::zero(),
            })
        }
        ModelSpec::Custom { step, phi, psi } => Ok(RatePair {
            gamma: trapezoid_prefix(phi, *step, t)?,
            shift: trapezoid_prefix(psi, *step, t)?,
        }),
    }
}

/// Fourth-order TCL rate and shift. Closed forms for the Jaynes-Cummings
/// variants; generic quadrature with grid refinement otherwise.
pub fn tcl4_rate<T: Real>(m: &ModelSpec<T>, t: T) -> Result<RatePair<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    match m {
        ModelSpec::ResonantJc { gamma0, lambda } => Ok(RatePair {
            gamma: resonant_tcl4_gamma(*gamma0, *lambda, t),
            shift: T::zero(),
        }),
        ModelSpec::DetunedJc {
            gamma0,
            lambda,
            delta,
        } => Ok(detuned_tcl4(*gamma0, *lambda, *delta, t)),
        _ => tcl4_quadrature_refined(m, t),
    }
}

fn resonant_tcl4_gamma<T: Real>(gamma0: T, lambda: T, t: T) -> T {
    // γ₀{1 − e^{−λt} + (γ₀/λ)[sinh(λt) − λt]e^{−λt}}, written with
    // sinh(λt)e^{−λt} = (1 − e^{−2λt})/2 to avoid overflow.
    let e = (-lambda * t).exp();
    let half = T::of(0.5);
    gamma0
        * (T::one() - e
            + gamma0 / lambda * (half * (T::one() - e * e) - lambda * t * e))
}

fn detuned_tcl4<T: Real>(gamma0: T, l: T, d: T, t: T) -> RatePair<T> {
    // Closed forms for the detuned model; all ratios in Δ are multiplied
    // through so Δ = 0 is regular and reduces to the resonant expressions.
    let s2 = l * l + d * d;
    let e = (-l * t).exp();
    let e2 = e * e;
    let (cdt, sdt) = ((d * t).cos(), (d * t).sin());
    let (c2dt, s2dt) = ((T::of(2.0) * d * t).cos(), (T::of(2.0) * d * t).sin());
    let one = T::one();
    let two = T::of(2.0);
    let four = T::of(4.0);
    let pre2 = gamma0 * gamma0 / (two * s2 * s2 * s2);

    // γ⁽⁴⁾, second-order prefactor γ₀²λ⁵/(2(λ²+Δ²)³) with δ = Δ/λ
    let delta_r = d / l;
    let d2 = delta_r * delta_r;
    let g_first = gamma0 * l * (l - e * (l * cdt - d * sdt)) / s2;
    let g_brace = (one - T::of(3.0) * d2) * (one - e2 * c2dt)
        - two * (one - d2 * d2) * l * t * e * cdt
        + four * (one + d2) * d * t * e * sdt
        + delta_r * (T::of(3.0) - d2) * e2 * s2dt;
    let l5 = l * l * l * l * l;
    let gamma = g_first + pre2 * l5 * g_brace;

    // S⁽⁴⁾, with the Δ³ prefactor distributed into the braces
    let s_first = gamma0 * l * (d - e * (d * cdt + l * sdt)) / s2;
    let d3 = d * d * d;
    let s_brace = (d3 - T::of(3.0) * l * l * d) * (one - e2 * c2dt)
        - two * (d * d * d * d - l * l * l * l) * t * e * sdt
        + four * l * d * s2 * t * e * cdt
        - l * (T::of(3.0) * d * d - l * l) * e2 * s2dt;
    let shift = s_first - pre2 * l * l * s_brace;

    RatePair { gamma, shift }
}

/// Exact rate from the survival amplitude: γ = −2Re(ċ₁/c₁), S = −2Im(ċ₁/c₁).
///
/// The resonant model uses its closed form; the other built-ins integrate
/// the pseudomode ODE up to `t`. Errors with [`Error::RateDivergence`] when
/// the amplitude has (numerically) vanished.
pub fn exact_rate<T: Real>(m: &ModelSpec<T>, t: T) -> Result<RatePair<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    match m {
        ModelSpec::ResonantJc { gamma0, lambda } => {
            resonant_exact_rate(*gamma0, *lambda, t, T::of(AMPLITUDE_EPS))
        }
        ModelSpec::Custom { .. } => Err(Error::UnsupportedVariant(
            "exact rate needs a pole decomposition; custom tables have none",
        )),
        _ => {
            if t == T::zero() {
                return Ok(RatePair::zero());
            }
            let sub = (t.to_f64_lossy() / 1e-3).ceil().max(1.0) as usize;
            let grid = TimeGrid::new(t / T::of(sub as f64), sub + 1);
            let series =
                crate::oracle::amplitude_exact(m, Complex::new(T::one(), T::zero()), &grid)?;
            let c1 = series.c1[sub];
            let c1dot = series.c1_dot[sub];
            if c1.norm() <= T::of(AMPLITUDE_EPS) {
                return Err(Error::RateDivergence(t.to_f64_lossy()));
            }
            let ratio = c1dot / c1;
            Ok(RatePair {
                gamma: -T::of(2.0) * ratio.re,
                shift: -T::of(2.0) * ratio.im,
            })
        }
    }
}

fn resonant_exact_rate<T: Real>(
    gamma0: T,
    lambda: T,
    t: T,
    eps_osc: T,
) -> Result<RatePair<T>> {
    // γ(t) = 2γ₀λ sinh(dt/2) / (d cosh(dt/2) + λ sinh(dt/2)),
    // d = √(λ² − 2γ₀λ), evaluated with complex d so the oscillating
    // strong-coupling branch needs no special casing. The removable d → 0
    // singularity is handled through u = sinh(dt/2)/d.
    //
    // Only the oscillating factor q = cosh + (λ/d)sinh can vanish (it does
    // so exactly at the amplitude zeros in strong coupling); the smooth
    // envelope e^{−λt/2} never does, so the divergence test is on |q|
    // relative to its natural O(1) scale.
    let half = T::of(0.5);
    let d = Complex::new(lambda * lambda - T::of(2.0) * gamma0 * lambda, T::zero()).sqrt();
    let (c, u) = cosh_sinh_ratio(d, half * t);
    let denom = c + Complex::new(lambda, T::zero()) * u;
    if denom.norm() <= eps_osc {
        return Err(Error::RateDivergence(t.to_f64_lossy()));
    }
    let g = Complex::new(T::of(2.0) * gamma0 * lambda, T::zero()) * u / denom;
    Ok(RatePair {
        gamma: g.re,
        shift: T::zero(),
    })
}

/// Rate of the second-order generalized (Born) master equation; resonant
/// model only.
pub fn gme_rate<T: Real>(m: &ModelSpec<T>, t: T) -> Result<RatePair<T>> {
    gme_rate_eps(m, t, T::of(AMPLITUDE_EPS))
}

fn gme_rate_eps<T: Real>(m: &ModelSpec<T>, t: T, eps_osc: T) -> Result<RatePair<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    let ModelSpec::ResonantJc { gamma0, lambda } = m else {
        return Err(Error::UnsupportedVariant(
            "the second-order memory-kernel solution exists only on resonance",
        ));
    };
    let half = T::of(0.5);
    let dp = Complex::new(
        *lambda * *lambda - T::of(4.0) * *gamma0 * *lambda,
        T::zero(),
    )
    .sqrt();
    let (c, u) = cosh_sinh_ratio(dp, half * t);
    let denom = c + Complex::new(*lambda, T::zero()) * u;
    if denom.norm() <= eps_osc {
        return Err(Error::GmePopulationZero(t.to_f64_lossy()));
    }
    let g = Complex::new(T::of(2.0) * *gamma0 * *lambda, T::zero()) * u / denom;
    Ok(RatePair {
        gamma: g.re,
        shift: T::zero(),
    })
}

/// (cosh(d·x)·e^{−Re(d)·x}, (sinh(d·x)/d)·e^{−Re(d)·x}) for x ≥ 0, with the
/// d → 0 limit built in. The damping factor keeps every intermediate bounded
/// for arbitrarily large x; ratios of the two outputs are unaffected by it.
pub(crate) fn cosh_sinh_ratio<T: Real>(d: Complex<T>, x: T) -> (Complex<T>, Complex<T>) {
    let dx = d * Complex::new(x, T::zero());
    if dx.norm() < T::of(1e-6) {
        // scale factor ≈ 1; series: cosh(z) ≈ 1 + z²/2, sinh(z)/d ≈ x(1 + z²/6)
        let z2 = dx * dx;
        let one = Complex::new(T::one(), T::zero());
        let c = one + z2 * Complex::new(T::of(0.5), T::zero());
        let u = Complex::new(x, T::zero()) * (one + z2 / Complex::new(T::of(6.0), T::zero()));
        (c, u)
    } else {
        let sigma = Complex::new(d.re * x, T::zero());
        let half = Complex::new(T::of(0.5), T::zero());
        // both exponents have non-positive real part (Re d ≥ 0 off sqrt)
        let ep = (dx - sigma).exp();
        let em = (-dx - sigma).exp();
        ((ep + em) * half, (ep - em) * half / d)
    }
}

// ---------------------------------------------------------------------------
// Generic fourth-order quadrature
// ---------------------------------------------------------------------------

/// Generic iterated-trapezoid evaluation of the fourth-order rate integrals
/// on a uniform `n`-interval grid over `[0, t]`. This is the independent
/// route cross-checking the closed forms; `O(n²)` per call.
pub fn tcl4_quadrature<T: Real>(m: &ModelSpec<T>, t: T, n: usize) -> Result<RatePair<T>> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    if t == T::zero() {
        return Ok(RatePair::zero());
    }
    let h = t / T::of(n as f64);
    let mut phi = Vec::with_capacity(n + 1);
    let mut psi = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (p, q) = m.correlation(h * T::of(k as f64))?;
        phi.push(p);
        psi.push(q);
    }
    let has_psi = psi.iter().any(|&x| x != T::zero());

    // cumulative trapezoid: c[k] = ∫₀^{kh}
    let cum = |f: &[T]| -> Vec<T> {
        let mut c = Vec::with_capacity(f.len());
        let mut acc = T::zero();
        c.push(acc);
        let half = T::of(0.5);
        for k in 1..f.len() {
            acc += half * h * (f[k - 1] + f[k]);
            c.push(acc);
        }
        c
    };
    let cphi = cum(&phi);
    let cpsi = cum(&psi);

    let gamma2 = cphi[n];
    let shift2 = cpsi[n];

    // Double sums over (t₁ = i·h, t₂ = j·h), j ≤ i. Two integrand shapes:
    //   type I : f(t−t₂)·∫₀^{t₂} g(t₁−t₃) dt₃ = f[n−j]·(cg[i] − cg[i−j])
    //   type II: g(t₁−t₂)·∫₀^{t₂} f(t−t₃) dt₃ = g[i−j]·(cf[n] − cf[n−j])
    let half = T::of(0.5);
    let mut i_pp = T::zero(); // type I  (Φ, Φ)
    let mut i_ss = T::zero(); // type I  (Ψ, Ψ)
    let mut i_sp = T::zero(); // type I  (Ψ, Φ)
    let mut i_ps = T::zero(); // type I  (Φ, Ψ)
    let mut ii_pp = T::zero();
    let mut ii_ss = T::zero();
    let mut ii_sp = T::zero();
    let mut ii_ps = T::zero();

    for i in 1..=n {
        let wi = if i == n { half * h } else { h };
        let mut r_pp = T::zero();
        let mut r_ss = T::zero();
        let mut r_sp = T::zero();
        let mut r_ps = T::zero();
        let mut r2_pp = T::zero();
        let mut r2_ss = T::zero();
        let mut r2_sp = T::zero();
        let mut r2_ps = T::zero();
        for j in 1..=i {
            // inner trapezoid weight on [0, t_i]; the j = 0 term vanishes
            let wj = if j == i { half * h } else { h };
            let dcphi = cphi[i] - cphi[i - j];
            let fcphi = cphi[n] - cphi[n - j];
            r_pp += wj * phi[n - j] * dcphi;
            r2_pp += wj * phi[i - j] * fcphi;
            if has_psi {
                let dcpsi = cpsi[i] - cpsi[i - j];
                let fcpsi = cpsi[n] - cpsi[n - j];
                r_ss += wj * psi[n - j] * dcpsi;
                r_sp += wj * psi[n - j] * dcphi;
                r_ps += wj * phi[n - j] * dcpsi;
                r2_ss += wj * psi[i - j] * fcpsi;
                r2_sp += wj * phi[i - j] * fcpsi;
                r2_ps += wj * psi[i - j] * fcphi;
            }
        }
        i_pp += wi * r_pp;
        ii_pp += wi * r2_pp;
        if has_psi {
            i_ss += wi * r_ss;
            i_sp += wi * r_sp;
            i_ps += wi * r_ps;
            ii_ss += wi * r2_ss;
            ii_sp += wi * r2_sp;
            ii_ps += wi * r2_ps;
        }
    }

    // γ⁽⁴⁾ = γ⁽²⁾ + ½[ΦΦ − ΨΨ + ΦΦ′ − ΨΨ′]; the sign is fixed by the
    // second-order Riccati expansion of the exact rate, which both the
    // resonant and the detuned closed forms reproduce.
    let gamma4 = gamma2 + half * (i_pp - i_ss + ii_pp - ii_ss);
    // S⁽⁴⁾ = S⁽²⁾ + ½[ΨΦ + ΦΨ + ΨΦ′ + ΦΨ′]
    // type II bookkeeping: f is the kernel evaluated at (t − t₃).
    let shift4 = shift2 + half * (i_sp + i_ps + ii_ps + ii_sp);

    Ok(RatePair {
        gamma: gamma4,
        shift: shift4,
    })
}

/// Refinement cap for [`tcl4_quadrature_refined`]. The iterated trapezoid
/// converges as (t/n)², so long horizons (t ≈ 10) need the full cap.
pub const QUAD_MAX_N: usize = 4096;

/// Doubles the quadrature grid until two successive refinements agree to
/// 10⁻³ relative, starting at n = 64; errors if the cap is reached first.
pub fn tcl4_quadrature_refined<T: Real>(m: &ModelSpec<T>, t: T) -> Result<RatePair<T>> {
    if t == T::zero() {
        return Ok(RatePair::zero());
    }
    let (phi0, _) = m.correlation(T::zero())?;
    let floor = T::of(1e-9) * phi0.abs().max(T::one());
    let mut n = 64;
    let mut prev = tcl4_quadrature(m, t, n)?;
    loop {
        n *= 2;
        let next = tcl4_quadrature(m, t, n)?;
        let scale = next.gamma.abs().max(next.shift.abs()).max(floor);
        let diff = (next.gamma - prev.gamma)
            .abs()
            .max((next.shift - prev.shift).abs());
        if diff <= T::of(1e-3) * scale {
            return Ok(next);
        }
        if n >= QUAD_MAX_N {
            return Err(Error::QuadratureNonConvergence(
                (diff / scale).to_f64_lossy(),
            ));
        }
        prev = next;
    }
}

// ---------------------------------------------------------------------------
// Rate tables and providers
// ---------------------------------------------------------------------------

/// Sampled (γ, S) on a uniform grid; possibly truncated where the method
/// ceases to exist (exact/GME rates in strong coupling).
#[derive(Clone, Debug)]
pub struct RateTable<T> {
    pub grid: TimeGrid<T>,
    pub method: RateMethod,
    pub model_id: &'static str,
    /// One pair per grid point actually evaluated; may be shorter than the
    /// grid when truncated.
    pub pairs: Vec<RatePair<T>>,
    /// Set when evaluation stopped before the end of the grid, to the first
    /// time that could not be evaluated.
    pub truncated_at: Option<T>,
}

impl<T: Real> RateTable<T> {
    /// Build the table point by point; divergence truncates rather than
    /// failing when at least one point was evaluated.
    pub fn build(m: &ModelSpec<T>, method: RateMethod, grid: TimeGrid<T>) -> Result<Self> {
        m.validate()?;
        let f = rate_provider(m, method, grid.t_end())?;
        let mut pairs = Vec::with_capacity(grid.len);
        let mut truncated_at = None;
        for t in grid.times() {
            match f(t) {
                Ok(p) => pairs.push(p),
                Err(Error::RateDivergence(tt)) | Err(Error::GmePopulationZero(tt)) => {
                    truncated_at = Some(T::of(tt));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if pairs.is_empty() {
            return Err(Error::RateDivergence(0.0));
        }
        Ok(Self {
            grid,
            method,
            model_id: m.id(),
            pairs,
            truncated_at,
        })
    }
}

/// A reentrant rate evaluator; cheap to clone and share across workers.
pub type RateFn<T> = Arc<dyn Fn(T) -> Result<RatePair<T>> + Send + Sync>;

/// Build an evaluator for (γ(t), S(t)) valid on `[0, t_max]`.
///
/// Closed-form cases evaluate directly. The exact rate of the detuned and
/// band-gap models integrates the pseudomode ODE once and interpolates, as
/// does the quadrature-backed fourth-order rate of the band-gap and custom
/// models.
pub fn rate_provider<T: Real>(
    m: &ModelSpec<T>,
    method: RateMethod,
    t_max: T,
) -> Result<RateFn<T>> {
    m.validate()?;
    let model = m.clone();
    match method {
        RateMethod::Markov => {
            let pair = markov_rate(m)?;
            Ok(Arc::new(move |_t| Ok(pair)))
        }
        RateMethod::Tcl2 => Ok(Arc::new(move |t| tcl2_rate(&model, t))),
        RateMethod::Tcl4 => match m {
            ModelSpec::ResonantJc { .. } | ModelSpec::DetunedJc { .. } => {
                Ok(Arc::new(move |t| tcl4_rate(&model, t)))
            }
            _ => {
                let step = T::of(0.02);
                let end = match m.table_end() {
                    Some(e) => e.min(t_max),
                    None => t_max,
                };
                let grid = TimeGrid::span(step, end + step);
                let mut pairs = Vec::with_capacity(grid.len);
                for t in grid.times() {
                    pairs.push(tcl4_quadrature_refined(&model, t.min(end))?);
                }
                Ok(interpolated(grid, pairs, None))
            }
        },
        RateMethod::GmeBorn => {
            // same policy as the exact rate: stop while the rate is still
            // moderate rather than on top of the population zero
            Ok(Arc::new(move |t| {
                gme_rate_eps(&model, t, T::of(PROPAGATION_AMPLITUDE_FLOOR))
            }))
        }
        RateMethod::Exact => match m {
            ModelSpec::ResonantJc { gamma0, lambda } => {
                // For propagation, refuse times close to the amplitude zero
                // earlier than the pointwise 10⁻¹² threshold: rates of order
                // 1/|c₁| would wreck any fixed-step integrator long before
                // the amplitude reaches 10⁻¹².
                let (g0, l) = (*gamma0, *lambda);
                Ok(Arc::new(move |t| {
                    resonant_exact_rate(g0, l, t, T::of(PROPAGATION_AMPLITUDE_FLOOR))
                }))
            }
            ModelSpec::Custom { .. } => Err(Error::UnsupportedVariant(
                "exact rate needs a pole decomposition; custom tables have none",
            )),
            _ => {
                // one fine integration pass, then interpolation
                let step = T::of(5e-4);
                let grid = TimeGrid::span(step, t_max + step);
                let series = crate::oracle::amplitude_exact(
                    &model,
                    Complex::new(T::one(), T::zero()),
                    &grid,
                )?;
                let mut pairs = Vec::with_capacity(grid.len);
                let mut truncated = None;
                for k in 0..grid.len {
                    let c1 = series.c1[k];
                    if c1.norm() <= T::of(AMPLITUDE_EPS) {
                        truncated = Some(grid.t(k));
                        break;
                    }
                    let ratio = series.c1_dot[k] / c1;
                    pairs.push(RatePair {
                        gamma: -T::of(2.0) * ratio.re,
                        shift: -T::of(2.0) * ratio.im,
                    });
                }
                Ok(interpolated(grid, pairs, truncated))
            }
        },
    }
}

fn interpolated<T: Real>(
    grid: TimeGrid<T>,
    pairs: Vec<RatePair<T>>,
    truncated: Option<T>,
) -> RateFn<T> {
    Arc::new(move |t| {
        if t < T::zero() {
            return Err(Error::NegativeTime(t.to_f64_lossy()));
        }
        let x = (t / grid.step).to_f64_lossy();
        let k = x.floor() as usize;
        if k + 1 >= pairs.len() {
            if k + 1 == pairs.len() && (x - k as f64) < 1e-9 {
                return Ok(pairs[k]);
            }
            return match truncated {
                Some(tt) => Err(Error::RateDivergence(tt.to_f64_lossy())),
                None => Err(Error::OutOfTable(t.to_f64_lossy())),
            };
        }
        let w = T::of(x - k as f64);
        Ok(RatePair {
            gamma: pairs[k].gamma + (pairs[k + 1].gamma - pairs[k].gamma) * w,
            shift: pairs[k].shift + (pairs[k + 1].shift - pairs[k].shift) * w,
        })
    })
}

fn trapezoid_full<T: Real>(f: &[T], h: T) -> T {
    let half = T::of(0.5);
    let mut acc = T::zero();
    for k in 1..f.len() {
        acc += half * h * (f[k - 1] + f[k]);
    }
    acc
}

/// ∫₀ᵗ of a tabulated function with linear interpolation of the last cell.
fn trapezoid_prefix<T: Real>(f: &[T], h: T, t: T) -> Result<T> {
    if t < T::zero() {
        return Err(Error::NegativeTime(t.to_f64_lossy()));
    }
    let x = (t / h).to_f64_lossy();
    let k = x.floor() as usize;
    if k >= f.len() || (k + 1 == f.len() && x - k as f64 > 1e-9) {
        return Err(Error::OutOfTable(t.to_f64_lossy()));
    }
    let half = T::of(0.5);
    let mut acc = T::zero();
    for j in 1..=k.min(f.len() - 1) {
        acc += half * h * (f[j - 1] + f[j]);
    }
    let frac = T::of(x - k as f64);
    if frac > T::zero() && k + 1 < f.len() {
        let fe = f[k] + (f[k + 1] - f[k]) * frac;
        acc += half * (frac * h) * (f[k] + fe);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tabulated(gamma0: f64, lambda: f64, step: f64, t_end: f64) -> ModelSpec<f64> {
        let n = (t_end / step).round() as usize;
        let phi: Vec<f64> = (0..=n)
            .map(|k| gamma0 * lambda * (-lambda * step * k as f64).exp())
            .collect();
        let psi = vec![0.0; n + 1];
        ModelSpec::Custom { step, phi, psi }
    }

    #[test]
    fn markov_closed_values() {
        let p = markov_rate(&ModelSpec::resonant_jc(1.0, 5.0)).unwrap();
        assert_eq!(p.gamma, 1.0);
        assert_eq!(p.shift, 0.0);

        // Δ = 8λ: γ_M = γ₀λ²/(λ² + Δ²) = γ₀/65, S_M = 8γ₀/65
        let p = markov_rate(&ModelSpec::detuned_jc(1.0, 0.3, 2.4)).unwrap();
        assert_relative_eq!(p.gamma, 1.0 / 65.0, max_relative = 1e-14);
        assert_relative_eq!(p.shift, 8.0 / 65.0, max_relative = 1e-14);

        // 4Ω₀²(W₁/Γ₁ − W₂/Γ₂) = 4(1.1/10 − 0.1/1) = 0.04
        let p = markov_rate(&ModelSpec::BandGap {
            omega0: 1.0,
            gamma1: 10.0,
            gamma2: 1.0,
            w1: 1.1,
            w2: 0.1,
        })
        .unwrap();
        assert_relative_eq!(p.gamma, 0.04, max_relative = 1e-12);
    }

    #[test]
    fn markov_custom_table_matches_closed_form() {
        let m = tabulated(0.7, 2.0, 1e-3, 20.0);
        let p = markov_rate(&m).unwrap();
        assert_relative_eq!(p.gamma, 0.7, max_relative = 1e-6);
        assert_eq!(p.shift, 0.0);
    }

    #[test]
    fn markov_rejects_undecayed_table() {
        let m = tabulated(0.7, 2.0, 1e-3, 1.0); // e^{-2} tail, far from zero
        assert!(matches!(markov_rate(&m), Err(Error::UndecayedTable(_))));
    }

    #[test]
    fn tcl2_closed_form_matches_correlation_quadrature() {
        // independent route: trapezoid of the tabulated memory kernel
        for m in [
            ModelSpec::resonant_jc(1.0, 5.0),
            ModelSpec::detuned_jc(1.0, 0.3, 2.4),
            ModelSpec::BandGap {
                omega0: 1.0,
                gamma1: 10.0,
                gamma2: 1.0,
                w1: 1.1,
                w2: 0.1,
            },
        ] {
            let t = 1.3f64;
            let h = 1e-4f64;
            let n = (t / h).round() as usize;
            let (mut gq, mut sq) = (0.0f64, 0.0f64);
            let (mut pp, mut sp) = m.correlation(0.0).unwrap();
            for k in 1..=n {
                let (p, s) = m.correlation(h * k as f64).unwrap();
                gq += 0.5 * h * (pp + p);
                sq += 0.5 * h * (sp + s);
                (pp, sp) = (p, s);
            }
            let pair = tcl2_rate(&m, t).unwrap();
            assert_relative_eq!(pair.gamma, gq, max_relative = 1e-6);
            assert!((pair.shift - sq).abs() <= 1e-6 * gq.abs().max(sq.abs()));
        }
    }

    #[test]
    fn tcl2_custom_table_matches_closed_form() {
        let m = tabulated(0.7, 2.0, 1e-3, 10.0);
        let reference = ModelSpec::resonant_jc(0.7, 2.0);
        for t in [0.0, 0.37, 1.5, 4.0] {
            let a = tcl2_rate(&m, t).unwrap();
            let b = tcl2_rate(&reference, t).unwrap();
            assert!((a.gamma - b.gamma).abs() <= 1e-6, "t = {t}");
        }
        assert!(matches!(
            tcl2_rate(&m, 10.5),
            Err(Error::OutOfTable(_))
        ));
    }

    #[test]
    fn tcl4_closed_forms_match_quadrature() {
        // the generic double-integral quadrature is the independent oracle
        // for the closed forms (and vice versa for the band-gap fallback)
        let cases: [(ModelSpec<f64>, f64); 4] = [
            (ModelSpec::resonant_jc(1.0, 5.0), 0.8),
            (ModelSpec::resonant_jc(1.0, 5.0), 3.0),
            (ModelSpec::detuned_jc(1.0, 0.3, 2.4), 1.1),
            (ModelSpec::detuned_jc(1.0, 0.3, 2.4), 5.0),
        ];
        for (m, t) in cases {
            let closed = tcl4_rate(&m, t).unwrap();
            let quad = tcl4_quadrature(&m, t, 2048).unwrap();
            let scale = closed.gamma.abs().max(closed.shift.abs());
            assert!(
                (closed.gamma - quad.gamma).abs() <= 2e-3 * scale,
                "gamma: {} vs {} for {m:?} at t = {t}",
                closed.gamma,
                quad.gamma
            );
            assert!(
                (closed.shift - quad.shift).abs() <= 2e-3 * scale,
                "shift: {} vs {} for {m:?} at t = {t}",
                closed.shift,
                quad.shift
            );
        }
    }

    #[test]
    fn detuned_tcl4_reduces_to_resonant() {
        for t in [0.1, 0.9, 4.0] {
            let d = tcl4_rate(&ModelSpec::detuned_jc(1.0f64, 5.0, 0.0), t).unwrap();
            let r = tcl4_rate(&ModelSpec::resonant_jc(1.0, 5.0), t).unwrap();
            assert_relative_eq!(d.gamma, r.gamma, max_relative = 1e-12);
            assert!(d.shift.abs() < 1e-14);
        }
    }

    #[test]
    fn resonant_rates_small_time_taylor() {
        // all schemes start as γ(t) ≈ γ₀λt for t ≪ 1/λ
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        let t = 1e-4;
        for pair in [
            tcl2_rate(&m, t).unwrap(),
            tcl4_rate(&m, t).unwrap(),
            exact_rate(&m, t).unwrap(),
            gme_rate(&m, t).unwrap(),
        ] {
            assert_relative_eq!(pair.gamma, 5.0 * t, max_relative = 1e-3);
        }
    }

    #[test]
    fn order_consistency_in_coupling_resonant() {
        // TCL2 error against the exact rate scales as γ₀², TCL4 as γ₀³
        let (lambda, t) = (1.0, 2.0);
        let errs = |g0: f64| {
            let m = ModelSpec::resonant_jc(g0, lambda);
            let ex = exact_rate(&m, t).unwrap().gamma;
            let e2 = (tcl2_rate(&m, t).unwrap().gamma - ex).abs();
            let e4 = (tcl4_rate(&m, t).unwrap().gamma - ex).abs();
            (e2, e4)
        };
        let (a2, a4) = errs(1e-2);
        let (b2, b4) = errs(1e-3);
        let r2 = a2 / b2;
        let r4 = a4 / b4;
        assert!((80.0..125.0).contains(&r2), "TCL2 ratio {r2}");
        assert!((700.0..1400.0).contains(&r4), "TCL4 ratio {r4}");
    }

    #[test]
    fn order_consistency_in_coupling_detuned() {
        let (lambda, delta, t) = (0.3, 2.4, 1.5);
        let errs = |g0: f64| {
            let m = ModelSpec::detuned_jc(g0, lambda, delta);
            let ex = exact_rate(&m, t).unwrap();
            let p2 = tcl2_rate(&m, t).unwrap();
            let p4 = tcl4_rate(&m, t).unwrap();
            let e2 = (p2.gamma - ex.gamma).abs().max((p2.shift - ex.shift).abs());
            let e4 = (p4.gamma - ex.gamma).abs().max((p4.shift - ex.shift).abs());
            (e2, e4)
        };
        let (a2, a4) = errs(0.1);
        let (b2, b4) = errs(0.01);
        let r2 = a2 / b2;
        let r4 = a4 / b4;
        assert!((80.0..125.0).contains(&r2), "TCL2 ratio {r2}");
        assert!((700.0..1400.0).contains(&r4), "TCL4 ratio {r4}");
    }

    #[test]
    fn asymptotic_rate_hierarchy_moderate_coupling() {
        // λ = 5γ₀, t → ∞: Markov < TCL4 < exact < memory-kernel rate
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        let t = 30.0;
        let markov = markov_rate(&m).unwrap().gamma;
        let tcl4 = tcl4_rate(&m, t).unwrap().gamma;
        let exact = exact_rate(&m, t).unwrap().gamma;
        let gme = gme_rate(&m, t).unwrap().gamma;
        assert_relative_eq!(markov, 1.0, max_relative = 1e-14);
        assert_relative_eq!(tcl4, 1.1, max_relative = 1e-9);
        assert_relative_eq!(exact, 10.0 / (5.0 + 15.0f64.sqrt()), max_relative = 1e-9);
        assert_relative_eq!(gme, 10.0 / (5.0 + 5.0f64.sqrt()), max_relative = 1e-9);
        assert!(markov < tcl4 && tcl4 < exact && exact < gme);
    }

    #[test]
    fn exact_rate_diverges_at_amplitude_zero() {
        // strong coupling λ = 0.2γ₀: the amplitude crosses zero near
        // t₀ = (2/d̂)(π − arctan(d̂/λ)) ≈ 6.31 and the rate blows up there
        let m = ModelSpec::resonant_jc(1.0, 0.2);
        let t0 = crate::oracle::zero_crossing_time(&m).unwrap().unwrap();
        assert_relative_eq!(t0, 6.30849, max_relative = 1e-5);
        // finite but already huge just before the zero
        let g = exact_rate(&m, t0 - 1e-6).unwrap().gamma;
        assert!(g > 1e4, "rate near zero crossing: {g}");
        // the propagation provider refuses earlier, at a moderate rate
        let f = rate_provider(&m, RateMethod::Exact, 10.0).unwrap();
        let table = RateTable::build(&m, RateMethod::Exact, TimeGrid::span(1e-3, 10.0)).unwrap();
        let tt = table.truncated_at.expect("table should truncate");
        assert!(tt < t0 && tt > t0 - 0.5, "truncated at {tt}, t0 = {t0}");
        assert!(f(t0).is_err());
        // weak coupling never truncates
        let weak =
            RateTable::build(&ModelSpec::resonant_jc(1.0, 5.0), RateMethod::Exact,
                TimeGrid::span(1e-2, 10.0))
            .unwrap();
        assert!(weak.truncated_at.is_none());
        assert_eq!(weak.pairs.len(), weak.grid.len);
    }

    #[test]
    fn gme_population_zero_in_strong_coupling() {
        // λ = 0.2γ₀: the memory-kernel population vanishes near t ≈ 4.12,
        // well before the exact amplitude does
        let m = ModelSpec::resonant_jc(1.0, 0.2);
        let dhat = (4.0 * 0.2 - 0.04f64).sqrt();
        let tt0 = 2.0 / dhat * (std::f64::consts::PI - (dhat / 0.2).atan());
        let table = RateTable::build(&m, RateMethod::GmeBorn, TimeGrid::span(1e-3, 10.0)).unwrap();
        let tt = table.truncated_at.expect("gme table should truncate");
        assert!(
            tt < tt0 && tt > tt0 - 0.1,
            "truncated at {tt}, expected just before {tt0}"
        );
        assert!(matches!(
            gme_rate(&m, tt0 + 0.5),
            Err(Error::GmePopulationZero(_)) | Ok(_)
        ));
        // not defined off resonance
        assert!(matches!(
            gme_rate(&ModelSpec::detuned_jc(1.0, 0.3, 2.4), 1.0),
            Err(Error::UnsupportedVariant(_))
        ));
    }

    #[test]
    fn band_gap_tcl4_provider_interpolates_quadrature() {
        let m: ModelSpec<f64> = ModelSpec::BandGap {
            omega0: 1.0,
            gamma1: 10.0,
            gamma2: 1.0,
            w1: 1.1,
            w2: 0.1,
        };
        let f = rate_provider(&m, RateMethod::Tcl4, 2.0).unwrap();
        for t in [0.13, 0.77, 1.9] {
            let direct = tcl4_quadrature_refined(&m, t).unwrap();
            let interp = f(t).unwrap();
            let scale = direct.gamma.abs().max(1e-12);
            assert!(
                (interp.gamma - direct.gamma).abs() <= 5e-3 * scale,
                "t = {t}: {} vs {}",
                interp.gamma,
                direct.gamma
            );
        }
    }

    #[test]
    fn exact_provider_detuned_matches_pointwise() {
        let m: ModelSpec<f64> = ModelSpec::detuned_jc(1.0, 0.3, 2.4);
        let f = rate_provider(&m, RateMethod::Exact, 5.0).unwrap();
        for t in [0.4, 2.1, 4.9] {
            let a = f(t).unwrap();
            let b = exact_rate(&m, t).unwrap();
            let scale = b.gamma.abs().max(b.shift.abs()).max(1e-9);
            assert!((a.gamma - b.gamma).abs() <= 1e-5 * scale, "gamma at t = {t}");
            assert!((a.shift - b.shift).abs() <= 1e-5 * scale, "shift at t = {t}");
        }
    }

    #[test]
    fn negative_time_is_rejected_everywhere() {
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        assert!(matches!(tcl2_rate(&m, -0.1), Err(Error::NegativeTime(_))));
        assert!(matches!(tcl4_rate(&m, -0.1), Err(Error::NegativeTime(_))));
        assert!(matches!(exact_rate(&m, -0.1), Err(Error::NegativeTime(_))));
        assert!(matches!(gme_rate(&m, -0.1), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn detuned_tcl4_goes_negative_at_large_detuning() {
        // Δ = 8λ: the fourth-order rate oscillates through zero
        let m = ModelSpec::detuned_jc(1.0, 0.3, 2.4);
        let f = rate_provider(&m, RateMethod::Tcl4, 10.0).unwrap();
        let mut min = f64::MAX;
        for k in 0..=2000 {
            min = min.min(f(k as f64 * 5e-3).unwrap().gamma);
        }
        assert!(min < 0.0, "minimum tcl4 rate {min} should be negative");
    }
}
