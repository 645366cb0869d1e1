//! Exact and reference analytic solutions: the survival amplitude c₁(t)
//! (closed form on resonance, pseudomode ODE otherwise), populations under
//! each approximation scheme, coherences, and the strong-coupling
//! zero-crossing time t₀.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hilbert::COperator;
use crate::mastereq::DensitySeries;
use crate::models::ModelSpec;
use crate::rates::{self, cosh_sinh_ratio, RateMethod};
use crate::scalar::Real;

/// Survival amplitude c₁ and its time derivative on a uniform grid.
#[derive(Clone, Debug)]
pub struct AmplitudeSeries<T> {
    pub model: ModelSpec<T>,
    pub grid: TimeGrid<T>,
    pub c1: Vec<Complex<T>>,
    pub c1_dot: Vec<Complex<T>>,
}

/// Pole decomposition of the memory kernel f(t) = ½(Φ + iΨ) = Σ w_k e^{−μ_k t}.
#[derive(Clone, Debug)]
pub struct PseudomodeSystem<T> {
    pub pole_amplitudes: Vec<Complex<T>>,
    pub pole_rates: Vec<Complex<T>>,
}

impl<T: Real> PseudomodeSystem<T> {
    pub fn of_model(m: &ModelSpec<T>) -> Result<Self> {
        let modes = m.pseudomodes()?;
        Ok(Self {
            pole_amplitudes: modes.iter().map(|p| p.weight).collect(),
            pole_rates: modes.iter().map(|p| p.rate).collect(),
        })
    }

    /// Σ_k w_k e^{−μ_k t}
    pub fn kernel(&self, t: T) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (w, mu) in self.pole_amplitudes.iter().zip(&self.pole_rates) {
            acc += *w * (-*mu * Complex::new(t, T::zero())).exp();
        }
        acc
    }

    /// Max deviation of the reconstructed kernel from ½(Φ + iΨ) at the
    /// sampled times.
    pub fn kernel_residual(&self, m: &ModelSpec<T>, times: &[T]) -> Result<T> {
        let half = T::of(0.5);
        let mut worst = T::zero();
        for &t in times {
            let (phi, psi) = m.correlation(t)?;
            let diff = self.kernel(t) - Complex::new(half * phi, half * psi);
            worst = worst.max(diff.norm());
        }
        Ok(worst)
    }
}

/// Maximum inner RK4 substep used when integrating the pseudomode ODE.
const PSEUDOMODE_SUBSTEP: f64 = 1e-3;

/// Exact survival amplitude on `grid`. Resonant model: closed form
/// c₁(t) = c₁(0)e^{−λt/2}(cosh(dt/2) + (λ/d)sinh(dt/2)), d = √(λ² − 2γ₀λ),
/// evaluated with complex d so strong coupling needs no branch. Other
/// built-ins: RK4 on ċ₁ = −Σ w_k z_k, ż_k = −μ_k z_k + c₁.
pub fn amplitude_exact<T: Real>(
    m: &ModelSpec<T>,
    c1_0: Complex<T>,
    grid: &TimeGrid<T>,
) -> Result<AmplitudeSeries<T>> {
    m.validate()?;
    match m {
        ModelSpec::ResonantJc { gamma0, lambda } => {
            let half = T::of(0.5);
            let d = Complex::new(
                *lambda * *lambda - T::of(2.0) * *gamma0 * *lambda,
                T::zero(),
            )
            .sqrt();
            let mut c1 = Vec::with_capacity(grid.len);
            let mut c1_dot = Vec::with_capacity(grid.len);
            for t in grid.times() {
                // cosh_sinh_ratio carries a factor e^{−Re(d)·t/2}; fold it
                // into the envelope (Re d < λ, so the product still decays)
                let env = Complex::new((-half * (*lambda - d.re) * t).exp(), T::zero());
                let (c, u) = cosh_sinh_ratio(d, half * t);
                let q = c + u * Complex::new(*lambda, T::zero());
                c1.push(c1_0 * env * q);
                // ċ₁ = −c₁(0) e^{−λt/2} γ₀λ · sinh(dt/2)/d
                c1_dot.push(-c1_0 * env * u * Complex::new(*gamma0 * *lambda, T::zero()));
            }
            Ok(AmplitudeSeries {
                model: m.clone(),
                grid: *grid,
                c1,
                c1_dot,
            })
        }
        ModelSpec::Custom { .. } => Err(Error::UnsupportedVariant(
            "custom models carry no pole decomposition",
        )),
        _ => pseudomode_amplitude(m, c1_0, grid),
    }
}

fn pseudomode_amplitude<T: Real>(
    m: &ModelSpec<T>,
    c1_0: Complex<T>,
    grid: &TimeGrid<T>,
) -> Result<AmplitudeSeries<T>> {
    let sys = PseudomodeSystem::of_model(m)?;
    let k = sys.pole_rates.len();
    let zero = Complex::new(T::zero(), T::zero());

    // state y = (c₁, z₁, …, z_K)
    let deriv = |y: &[Complex<T>], dy: &mut [Complex<T>]| {
        let mut s = zero;
        for (w, z) in sys.pole_amplitudes.iter().zip(&y[1..]) {
            s += *w * *z;
        }
        dy[0] = -s;
        for (i, mu) in sys.pole_rates.iter().enumerate() {
            dy[1 + i] = -*mu * y[1 + i] + y[0];
        }
    };

    let sub = (grid.step.to_f64_lossy() / PSEUDOMODE_SUBSTEP).ceil().max(1.0) as usize;
    let h = grid.step / T::of(sub as f64);
    let h_c = Complex::new(h, T::zero());
    let half = Complex::new(T::of(0.5), T::zero());
    let sixth = Complex::new(T::of(1.0 / 6.0), T::zero());
    let two = Complex::new(T::of(2.0), T::zero());

    let mut y = vec![zero; k + 1];
    y[0] = c1_0;
    let mut k1 = vec![zero; k + 1];
    let mut k2 = vec![zero; k + 1];
    let mut k3 = vec![zero; k + 1];
    let mut k4 = vec![zero; k + 1];
    let mut tmp = vec![zero; k + 1];

    let mut c1 = Vec::with_capacity(grid.len);
    let mut c1_dot = Vec::with_capacity(grid.len);
    let record = |y: &[Complex<T>],
                  scratch: &mut [Complex<T>],
                  c1: &mut Vec<Complex<T>>,
                  c1_dot: &mut Vec<Complex<T>>| {
        deriv(y, scratch);
        c1.push(y[0]);
        c1_dot.push(scratch[0]);
    };
    record(&y, &mut k1, &mut c1, &mut c1_dot);

    for _ in 1..grid.len {
        for _ in 0..sub {
            deriv(&y, &mut k1);
            for i in 0..=k {
                tmp[i] = y[i] + half * h_c * k1[i];
            }
            deriv(&tmp, &mut k2);
            for i in 0..=k {
                tmp[i] = y[i] + half * h_c * k2[i];
            }
            deriv(&tmp, &mut k3);
            for i in 0..=k {
                tmp[i] = y[i] + h_c * k3[i];
            }
            deriv(&tmp, &mut k4);
            for i in 0..=k {
                y[i] += h_c * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
        }
        record(&y, &mut k1, &mut c1, &mut c1_dot);
    }

    Ok(AmplitudeSeries {
        model: m.clone(),
        grid: *grid,
        c1,
        c1_dot,
    })
}

/// Excited-state population ρ₁₁(t) on `grid` under the chosen scheme.
pub fn population<T: Real>(
    m: &ModelSpec<T>,
    method: RateMethod,
    rho11_0: T,
    grid: &TimeGrid<T>,
) -> Result<Vec<T>> {
    if rho11_0 < T::zero() || rho11_0 > T::one() {
        return Err(Error::InvalidDensity(format!(
            "initial population {} outside [0, 1]",
            rho11_0.to_f64_lossy()
        )));
    }
    m.validate()?;
    match method {
        RateMethod::Exact => {
            let one = Complex::new(T::one(), T::zero());
            let series = amplitude_exact(m, one, grid)?;
            Ok(series.c1.iter().map(|c| rho11_0 * c.norm_sqr()).collect())
        }
        RateMethod::Markov => {
            let gm = rates::markov_rate(m)?.gamma;
            Ok(grid.times().map(|t| rho11_0 * (-gm * t).exp()).collect())
        }
        RateMethod::GmeBorn => {
            let ModelSpec::ResonantJc { gamma0, lambda } = m else {
                return Err(Error::UnsupportedVariant(
                    "the second-order memory-kernel solution exists only on resonance",
                ));
            };
            // ρ̃₁₁(t) = ρ₁₁(0) e^{−λt/2}[cosh(d′t/2) + (λ/d′)sinh(d′t/2)],
            // d′ = √(λ² − 4γ₀λ); a single power, so it can go negative.
            let half = T::of(0.5);
            let dp = Complex::new(
                *lambda * *lambda - T::of(4.0) * *gamma0 * *lambda,
                T::zero(),
            )
            .sqrt();
            Ok(grid
                .times()
                .map(|t| {
                    let (c, u) = cosh_sinh_ratio(dp, half * t);
                    let q = c + u * Complex::new(*lambda, T::zero());
                    // compensate the e^{−Re(d′)t/2} scaling of the helper
                    rho11_0 * (-half * (*lambda - dp.re) * t).exp() * q.re
                })
                .collect())
        }
        RateMethod::Tcl2 | RateMethod::Tcl4 => {
            let f = rates::rate_provider(m, method, grid.t_end())?;
            let half = T::of(0.5);
            let mut out = Vec::with_capacity(grid.len);
            let mut acc = T::zero();
            let mut prev = f(T::zero())?.gamma;
            out.push(rho11_0);
            for k in 1..grid.len {
                let g = f(grid.t(k))?.gamma;
                acc += half * grid.step * (prev + g);
                prev = g;
                out.push(rho11_0 * (-acc).exp());
            }
            Ok(out)
        }
    }
}

/// Off-diagonal element ρ₁₀(t) = c₁(t)·conj(c₀) for a fixed ground amplitude.
pub fn coherence<T: Real>(c0: Complex<T>, series: &AmplitudeSeries<T>) -> Result<Vec<Complex<T>>> {
    let total = c0.norm_sqr() + series.c1[0].norm_sqr();
    if total > T::one() + T::of(1e-12) {
        return Err(Error::InvalidDensity(format!(
            "|c0|^2 + |c1(0)|^2 = {} exceeds 1",
            total.to_f64_lossy()
        )));
    }
    Ok(series.c1.iter().map(|c| *c * c0.conj()).collect())
}

/// First zero t₀ of the resonant amplitude: for γ₀ > λ/2,
/// t₀ = (2/d̂)(π − arctan(d̂/λ)) with d̂ = √(2γ₀λ − λ²); `None` otherwise.
pub fn zero_crossing_time<T: Real>(m: &ModelSpec<T>) -> Result<Option<T>> {
    let ModelSpec::ResonantJc { gamma0, lambda } = m else {
        return Err(Error::UnsupportedVariant(
            "zero-crossing time is defined for the resonant model only",
        ));
    };
    let disc = T::of(2.0) * *gamma0 * *lambda - *lambda * *lambda;
    if disc <= T::zero() {
        return Ok(None);
    }
    let dhat = disc.sqrt();
    Ok(Some(
        T::of(2.0) / dhat * (T::PI() - (dhat / *lambda).atan()),
    ))
}

/// Full exact 2×2 density matrix assembled from (ρ₁₁(0), ρ₁₀(0)):
/// ρ₁₁(t) = ρ₁₁(0)|q(t)|², ρ₁₀(t) = ρ₁₀(0)q(t), q = c₁(t)/c₁(0).
pub fn exact_density<T: Real>(
    m: &ModelSpec<T>,
    rho11_0: T,
    rho10_0: Complex<T>,
    grid: &TimeGrid<T>,
) -> Result<DensitySeries<T>> {
    if rho11_0 < T::zero() || rho11_0 > T::one() {
        return Err(Error::InvalidDensity(format!(
            "initial population {} outside [0, 1]",
            rho11_0.to_f64_lossy()
        )));
    }
    let one = Complex::new(T::one(), T::zero());
    let series = amplitude_exact(m, one, grid)?;
    let mut rho = Vec::with_capacity(grid.len);
    for q in &series.c1 {
        let p11 = rho11_0 * q.norm_sqr();
        let r10 = rho10_0 * *q;
        let mut op = COperator::zeros(2);
        op.set(0, 0, Complex::new(T::one() - p11, T::zero()));
        op.set(1, 1, Complex::new(p11, T::zero()));
        op.set(1, 0, r10);
        op.set(0, 1, r10.conj());
        rho.push(op);
    }
    Ok(DensitySeries {
        grid: *grid,
        rho,
        truncated_at: None,
    })
}

/// Max residual of the defining amplitude equation
/// ċ₁(t) = −∫₀ᵗ f(t−s) c₁(s) ds, relative to max|ċ₁| on the grid.
/// The memory integral is evaluated by trapezoid on the series grid.
pub fn amplitude_residual<T: Real>(series: &AmplitudeSeries<T>) -> Result<T> {
    let sys = PseudomodeSystem::of_model(&series.model)?;
    let n = series.grid.len;
    let h = series.grid.step;
    let half = T::of(0.5);
    // f(t_j) for all lags once
    let f: Vec<Complex<T>> = (0..n).map(|j| sys.kernel(series.grid.t(j))).collect();
    let scale = series
        .c1_dot
        .iter()
        .map(|c| c.norm())
        .fold(T::zero(), T::max)
        .max(T::of(1e-300));
    let mut worst = T::zero();
    for i in 1..n {
        let mut integral = Complex::new(T::zero(), T::zero());
        for j in 0..=i {
            let w = if j == 0 || j == i { half * h } else { h };
            integral += f[i - j] * series.c1[j] * Complex::new(w, T::zero());
        }
        let res = (series.c1_dot[i] + integral).norm();
        worst = worst.max(res);
    }
    Ok(worst / scale)
}
