//! Deterministic propagation of general time-local master equations
//! ∂ρ/∂t = A(t)ρ + ρB†(t) + Σᵢ Cᵢ(t)ρDᵢ†(t), covering the Lindblad special
//! case and the two-level TCL generators built from the rate module.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hilbert::{sigma_minus, COperator};
use crate::models::ModelSpec;
use crate::rates::{rate_provider, RateMethod};
use crate::scalar::Real;

/// Time-dependent operator coefficient.
pub type OpFn<T> = Arc<dyn Fn(T) -> Result<COperator<T>> + Send + Sync>;

/// Time-dependent scalar coefficient (rate or frequency).
pub type ScalarFn<T> = Arc<dyn Fn(T) -> Result<T> + Send + Sync>;

/// Generator of a time-local master equation in the general form
/// A(t)ρ + ρB†(t) + Σᵢ Cᵢ(t)ρDᵢ†(t).
#[derive(Clone)]
pub struct TimeLocalGenerator<T> {
    pub dim: usize,
    pub a: OpFn<T>,
    pub b: OpFn<T>,
    pub channels: Vec<(OpFn<T>, OpFn<T>)>,
    /// When set, propagation asserts A(t) + B†(t) + Σᵢ Dᵢ†(t)Cᵢ(t) = 0 at
    /// sampled times.
    pub trace_certificate: bool,
}

/// All generator coefficients evaluated at one time.
#[derive(Clone, Debug)]
pub struct GeneratorEval<T> {
    pub a: COperator<T>,
    pub b: COperator<T>,
    pub channels: Vec<(COperator<T>, COperator<T>)>,
}

impl<T: Real> TimeLocalGenerator<T> {
    pub fn new(dim: usize, a: OpFn<T>, b: OpFn<T>, channels: Vec<(OpFn<T>, OpFn<T>)>) -> Self {
        Self {
            dim,
            a,
            b,
            channels,
            trace_certificate: false,
        }
    }

    /// Generator that evolves nothing; useful as a base case.
    pub fn zero(dim: usize) -> Self {
        let z: OpFn<T> = Arc::new(move |_t| Ok(COperator::zeros(dim)));
        Self::new(dim, z.clone(), z, Vec::new())
    }

    pub fn with_trace_certificate(mut self) -> Self {
        self.trace_certificate = true;
        self
    }

    /// Evaluate every coefficient at time `t`.
    pub fn eval(&self, t: T) -> Result<GeneratorEval<T>> {
        let a = (self.a)(t)?;
        let b = (self.b)(t)?;
        if a.dim() != self.dim || b.dim() != self.dim {
            return Err(Error::DimensionMismatch(a.dim(), self.dim));
        }
        let mut channels = Vec::with_capacity(self.channels.len());
        for (c, d) in &self.channels {
            let c = c(t)?;
            let d = d(t)?;
            if c.dim() != self.dim || d.dim() != self.dim {
                return Err(Error::DimensionMismatch(c.dim(), self.dim));
            }
            channels.push((c, d));
        }
        let eval = GeneratorEval { a, b, channels };
        if self.trace_certificate {
            let defect = eval.trace_defect();
            if defect > T::of(1e-9) {
                return Err(Error::InvalidModel(format!(
                    "trace certificate violated at t = {}: defect {}",
                    t.to_f64_lossy(),
                    defect.to_f64_lossy()
                )));
            }
        }
        Ok(eval)
    }
}

impl<T: Real> GeneratorEval<T> {
    /// ‖A + B† + Σᵢ Dᵢ†Cᵢ‖_max; zero iff the generator preserves the trace.
    pub fn trace_defect(&self) -> T {
        let mut s = self.a.add(&self.b.adjoint());
        for (c, d) in &self.channels {
            s = s.add(&d.adjoint().matmul(c));
        }
        s.max_abs()
    }

    /// A ρ + ρ B† + Σᵢ Cᵢ ρ Dᵢ†
    pub fn apply(&self, rho: &COperator<T>) -> COperator<T> {
        let mut out = self.a.matmul(rho);
        out = out.add(&rho.matmul(&self.b.adjoint()));
        for (c, d) in &self.channels {
            out = out.add(&c.matmul(rho).matmul(&d.adjoint()));
        }
        out
    }
}

/// Density matrices sampled on a uniform grid. `rho` may be shorter than the
/// grid when propagation stopped at a rate divergence; `truncated_at` then
/// holds the first unreachable time.
#[derive(Clone, Debug)]
pub struct DensitySeries<T> {
    pub grid: TimeGrid<T>,
    pub rho: Vec<COperator<T>>,
    pub truncated_at: Option<T>,
}

impl<T: Real> DensitySeries<T> {
    /// Entry (i, j) over time.
    pub fn component(&self, i: usize, j: usize) -> Vec<Complex<T>> {
        self.rho.iter().map(|r| r.get(i, j)).collect()
    }

    /// Excited-state population ρ₁₁ over time (two-level systems).
    pub fn population(&self) -> Vec<T> {
        self.rho.iter().map(|r| r.get(1, 1).re).collect()
    }
}

/// Default evaluation horizon for rate tables behind TCL generators.
pub const DEFAULT_HORIZON: f64 = 10.0;

/// Two-level TCL generator from the model's rates:
/// A(t) = B(t) = −(iS(t)/2)σ⁺σ⁻ − (γ(t)/2)σ⁺σ⁻, one channel with
/// C(t) = sign(γ(t))√|γ(t)| σ⁻ and D(t) = √|γ(t)| σ⁻ (sign(0) := +1).
pub fn tcl_generator<T: Real>(
    m: &ModelSpec<T>,
    method: RateMethod,
) -> Result<TimeLocalGenerator<T>> {
    tcl_generator_with_horizon(m, method, T::of(DEFAULT_HORIZON))
}

/// As [`tcl_generator`], with an explicit horizon for table-backed rates.
pub fn tcl_generator_with_horizon<T: Real>(
    m: &ModelSpec<T>,
    method: RateMethod,
    t_max: T,
) -> Result<TimeLocalGenerator<T>> {
    if method == RateMethod::GmeBorn {
        return Err(Error::UnsupportedVariant(
            "the memory-kernel equation is not time-local; no TCL generator exists",
        ));
    }
    let rates = rate_provider(m, method, t_max)?;
    let sm = sigma_minus::<T>();
    let proj = crate::hilbert::excited_projector::<T>();

    let r = rates.clone();
    let p = proj.clone();
    let a: OpFn<T> = Arc::new(move |t| {
        let pair = r(t)?;
        let half = T::of(0.5);
        // −(iS/2 + γ/2)σ⁺σ⁻
        Ok(p.scaled(Complex::new(-half * pair.gamma, -half * pair.shift)))
    });
    let b = a.clone();

    let r = rates.clone();
    let s = sm.clone();
    let c: OpFn<T> = Arc::new(move |t| {
        let g = r(t)?.gamma;
        let root = g.abs().sqrt();
        let signed = if g < T::zero() { -root } else { root };
        Ok(s.scaled(Complex::new(signed, T::zero())))
    });
    let d: OpFn<T> = Arc::new(move |t| {
        let g = rates(t)?.gamma;
        Ok(sm.scaled(Complex::new(g.abs().sqrt(), T::zero())))
    });

    Ok(TimeLocalGenerator::new(2, a, b, vec![(c, d)]).with_trace_certificate())
}

/// Lindblad generator: A(t) = B(t) = −iH − ½Σₖ[γₖ(t) + iSₖ(t)]Lₖ†Lₖ and
/// Cₖ(t) = Dₖ(t) = √γₖ(t) Lₖ. Negative rates are rejected at evaluation.
pub fn lindblad_generator<T: Real>(
    h: COperator<T>,
    channels: Vec<(COperator<T>, ScalarFn<T>, ScalarFn<T>)>,
) -> TimeLocalGenerator<T> {
    let dim = h.dim();
    let ldl: Vec<COperator<T>> = channels
        .iter()
        .map(|(l, _, _)| l.adjoint().matmul(l))
        .collect();
    let coeffs: Vec<(ScalarFn<T>, ScalarFn<T>)> = channels
        .iter()
        .map(|(_, g, s)| (g.clone(), s.clone()))
        .collect();

    let minus_ih = h.scaled(Complex::new(T::zero(), -T::one()));
    let ldl_a = ldl;
    let coeffs_a = coeffs.clone();
    let a: OpFn<T> = Arc::new(move |t| {
        let mut op = minus_ih.clone();
        let half = T::of(0.5);
        for (ll, (gf, sf)) in ldl_a.iter().zip(&coeffs_a) {
            let g = gf(t)?;
            if g < T::zero() {
                return Err(Error::NegativeRate {
                    t: t.to_f64_lossy(),
                    gamma: g.to_f64_lossy(),
                });
            }
            let s = sf(t)?;
            op.scaled_add(Complex::new(-half * g, -half * s), ll);
        }
        Ok(op)
    });
    let b = a.clone();

    let mut ops = Vec::with_capacity(channels.len());
    for (l, gf, _) in channels {
        let lc = l.clone();
        let g = gf.clone();
        let c: OpFn<T> = Arc::new(move |t| {
            let gamma = g(t)?;
            if gamma < T::zero() {
                return Err(Error::NegativeRate {
                    t: t.to_f64_lossy(),
                    gamma: gamma.to_f64_lossy(),
                });
            }
            Ok(lc.scaled(Complex::new(gamma.sqrt(), T::zero())))
        });
        ops.push((c.clone(), c));
    }
    TimeLocalGenerator::new(dim, a, b, ops)
}

/// Check that `rho0` is a density matrix: Hermitian, unit trace, positive
/// semidefinite, all to 10⁻⁹.
pub fn check_density<T: Real>(rho0: &COperator<T>) -> Result<()> {
    let tol = T::of(1e-9);
    if rho0.hermiticity_defect() > tol {
        return Err(Error::InvalidDensity("not Hermitian".into()));
    }
    let tr = rho0.trace();
    if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidDensity(format!(
            "trace = {} + {}i, expected 1",
            tr.re.to_f64_lossy(),
            tr.im.to_f64_lossy()
        )));
    }
    let eigs = rho0.hermitian_eigenvalues();
    if eigs.iter().any(|&e| e < -tol) {
        return Err(Error::InvalidDensity("negative eigenvalue".into()));
    }
    Ok(())
}

/// Classical RK4 on the matrix ODE with the generator evaluated at substage
/// times. A rate divergence mid-run truncates the series (partial result,
/// `truncated_at` set) rather than failing.
pub fn propagate<T: Real>(
    g: &TimeLocalGenerator<T>,
    rho0: &COperator<T>,
    grid: &TimeGrid<T>,
) -> Result<DensitySeries<T>> {
    check_density(rho0)?;
    if rho0.dim() != g.dim {
        return Err(Error::DimensionMismatch(rho0.dim(), g.dim));
    }
    let h = grid.step;
    let half = T::of(0.5);
    let sixth = Complex::new(T::of(1.0 / 6.0), T::zero());
    let two = Complex::new(T::of(2.0), T::zero());
    let hc = Complex::new(h, T::zero());

    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(grid.len);
    out.push(rho.clone());
    let mut truncated_at = None;

    'steps: for k in 1..grid.len {
        let t = grid.t(k - 1);
        // evaluate coefficients at the three substage times
        let mut evals = [None, None, None];
        for (slot, tt) in [(0, t), (1, t + half * h), (2, t + h)] {
            match g.eval(tt) {
                Ok(e) => evals[slot] = Some(e),
                Err(Error::RateDivergence(td)) | Err(Error::GmePopulationZero(td)) => {
                    truncated_at = Some(T::of(td));
                    break 'steps;
                }
                Err(e) => return Err(e),
            }
        }
        let (e0, e1, e2) = (
            evals[0].take().unwrap(),
            evals[1].take().unwrap(),
            evals[2].take().unwrap(),
        );

        let k1 = e0.apply(&rho);
        let mut tmp = rho.clone();
        tmp.scaled_add(hc * Complex::new(half, T::zero()), &k1);
        let k2 = e1.apply(&tmp);
        tmp = rho.clone();
        tmp.scaled_add(hc * Complex::new(half, T::zero()), &k2);
        let k3 = e1.apply(&tmp);
        tmp = rho.clone();
        tmp.scaled_add(hc, &k3);
        let k4 = e2.apply(&tmp);

        let mut incr = k1;
        incr.scaled_add(two, &k2);
        incr.scaled_add(two, &k3);
        incr.scaled_add(Complex::new(T::one(), T::zero()), &k4);
        rho.scaled_add(hc * sixth, &incr);

        if rho.max_abs() > T::of(1e6) {
            return Err(Error::StepInstability(grid.t(k).to_f64_lossy()));
        }
        out.push(rho.clone());
    }

    Ok(DensitySeries {
        grid: *grid,
        rho: out,
        truncated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn pure_excited() -> COperator<f64> {
        let mut r = COperator::zeros(2);
        r.set(1, 1, Complex::new(1.0, 0.0));
        r
    }

    fn density(p11: f64, r10: Complex<f64>) -> COperator<f64> {
        let mut r = COperator::zeros(2);
        r.set(0, 0, Complex::new(1.0 - p11, 0.0));
        r.set(1, 1, Complex::new(p11, 0.0));
        r.set(1, 0, r10);
        r.set(0, 1, r10.conj());
        r
    }

    #[test]
    fn markov_decay_matches_exponential() {
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        let g = tcl_generator(&m, RateMethod::Markov).unwrap();
        let grid = TimeGrid::span(1e-3, 5.0);
        let ds = propagate(&g, &pure_excited(), &grid).unwrap();
        let pops = ds.population();
        let sup = grid
            .times()
            .zip(&pops)
            .map(|(t, p)| (p - (-t).exp()).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 1e-8, "sup error {sup}");
    }

    #[test]
    fn zero_generator_is_identity_evolution() {
        let g = TimeLocalGenerator::<f64>::zero(2);
        let rho0 = density(0.3, Complex::new(0.1, -0.2));
        let grid = TimeGrid::span(1e-2, 1.0);
        let ds = propagate(&g, &rho0, &grid).unwrap();
        for r in &ds.rho {
            assert!(r.add(&rho0.scaled(Complex::new(-1.0, 0.0))).max_abs() < 1e-15);
        }
    }

    #[test]
    fn tcl4_population_matches_oracle() {
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        let g = tcl_generator(&m, RateMethod::Tcl4).unwrap();
        let grid = TimeGrid::span(1e-3, 10.0);
        let ds = propagate(&g, &pure_excited(), &grid).unwrap();
        let reference = oracle::population(&m, RateMethod::Tcl4, 1.0, &grid).unwrap();
        let sup = ds
            .population()
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 1e-6, "sup deviation {sup}");
    }

    #[test]
    fn trace_and_hermiticity_preserved_with_negative_rates() {
        // detuned TCL4 has intervals of γ < 0; the TCL form still preserves
        // trace and Hermiticity
        let m = ModelSpec::detuned_jc(1.0, 0.3, 2.4);
        let g = tcl_generator(&m, RateMethod::Tcl4).unwrap();
        let grid = TimeGrid::span(1e-3, 10.0);
        let rho0 = density(0.6, Complex::new(0.3, 0.1));
        let ds = propagate(&g, &rho0, &grid).unwrap();
        assert!(ds.truncated_at.is_none());
        for r in &ds.rho {
            assert!((r.trace().re - 1.0).abs() <= 1e-6);
            assert!(r.trace().im.abs() <= 1e-9);
            assert!(r.hermiticity_defect() <= 1e-9);
        }
    }

    #[test]
    fn exact_generator_preserves_positivity() {
        let m = ModelSpec::detuned_jc(1.0, 0.3, 2.4);
        let g = tcl_generator(&m, RateMethod::Exact).unwrap();
        let grid = TimeGrid::span(1e-3, 10.0);
        let rho0 = density(0.5, Complex::new(0.5, 0.0)); // pure superposition
        let ds = propagate(&g, &rho0, &grid).unwrap();
        for r in &ds.rho {
            for e in r.hermitian_eigenvalues() {
                assert!(e >= -1e-8, "eigenvalue {e}");
            }
        }
    }

    #[test]
    fn exact_propagation_truncates_at_divergence() {
        // strong coupling: the exact generator ceases to exist at t₀
        let m = ModelSpec::resonant_jc(5.0, 1.0);
        let t0 = oracle::zero_crossing_time(&m).unwrap().unwrap();
        let g = tcl_generator(&m, RateMethod::Exact).unwrap();
        let grid = TimeGrid::span(1e-3, 2.0 * t0);
        let ds = propagate(&g, &pure_excited(), &grid).unwrap();
        let td = ds.truncated_at.expect("series should be truncated");
        assert!(ds.rho.len() < grid.len);
        assert!((td - t0).abs() < 0.05, "truncation at {td}, t0 = {t0}");
    }

    #[test]
    fn rk4_order_check() {
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        // time-dependent rates so the substage evaluation matters
        let g = tcl_generator(&m, RateMethod::Tcl2).unwrap();
        let err = |dt: f64| {
            let grid = TimeGrid::span(dt, 2.0);
            let ds = propagate(&g, &pure_excited(), &grid).unwrap();
            let reference = oracle::population(&m, RateMethod::Tcl2, 1.0, &TimeGrid::span(1e-5, 2.0)).unwrap();
            // compare at t = 2 only, against a much finer reference
            (ds.population().last().unwrap() - reference.last().unwrap()).abs()
        };
        let e1 = err(4e-2);
        let e2 = err(2e-2);
        let factor = e1 / e2;
        assert!(
            (10.0..24.0).contains(&factor),
            "halving dt gave factor {factor} (e1 = {e1}, e2 = {e2})"
        );
    }

    #[test]
    fn coherence_matches_oracle() {
        let m = ModelSpec::resonant_jc(1.0, 5.0);
        let g = tcl_generator(&m, RateMethod::Exact).unwrap();
        let grid = TimeGrid::span(1e-3, 5.0);
        let rho0 = density(0.5, Complex::new(0.5, 0.0));
        let ds = propagate(&g, &rho0, &grid).unwrap();
        // pure state (|0> + |1>)/sqrt(2) realizes rho11(0) = rho10(0) = 1/2
        let amp = Complex::new(0.5f64.sqrt(), 0.0);
        let series = oracle::amplitude_exact(&m, amp, &grid).unwrap();
        let coh = oracle::coherence(amp, &series).unwrap();
        let sup = ds
            .component(1, 0)
            .iter()
            .zip(&coh)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(sup <= 1e-6, "sup deviation {sup}");
    }

    #[test]
    fn lindblad_generator_coefficients() {
        let gamma0 = 0.7;
        let s0 = 0.3;
        let gf: ScalarFn<f64> = Arc::new(move |_| Ok(gamma0));
        let sf: ScalarFn<f64> = Arc::new(move |_| Ok(s0));
        let g = lindblad_generator(
            COperator::zeros(2),
            vec![(sigma_minus(), gf, sf)],
        );
        let e = g.eval(0.0).unwrap();
        // A = −(γ₀/2)σ⁺σ⁻ − i(s₀/2)σ⁺σ⁻
        assert_relative_eq!(e.a.get(1, 1).re, -gamma0 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(e.a.get(1, 1).im, -s0 / 2.0, max_relative = 1e-15);
        assert_eq!(e.a.get(0, 0), Complex::new(0.0, 0.0));
        assert_relative_eq!(
            e.channels[0].0.get(0, 1).re,
            gamma0.sqrt(),
            max_relative = 1e-15
        );
        assert!(e.trace_defect() <= 1e-12, "trace defect {}", e.trace_defect());
    }

    #[test]
    fn lindblad_rejects_negative_rate() {
        let gf: ScalarFn<f64> = Arc::new(|_| Ok(-0.1));
        let sf: ScalarFn<f64> = Arc::new(|_| Ok(0.0));
        let g = lindblad_generator(COperator::zeros(2), vec![(sigma_minus(), gf, sf)]);
        assert!(matches!(
            g.eval(1.0),
            Err(Error::NegativeRate { .. })
        ));
    }

    #[test]
    fn lindblad_pure_hamiltonian_is_unitary() {
        // H = σ⁺σ⁻ (an energy splitting), no channels
        let h = crate::hilbert::excited_projector::<f64>();
        let g = lindblad_generator(h, vec![]);
        let grid = TimeGrid::span(1e-3, 3.0);
        let rho0 = density(0.5, Complex::new(0.5, 0.0));
        let ds = propagate(&g, &rho0, &grid).unwrap();
        for r in &ds.rho {
            assert_relative_eq!(r.get(1, 1).re, 0.5, max_relative = 1e-9);
            assert_relative_eq!(r.get(1, 0).norm(), 0.5, max_relative = 1e-9);
        }
        // phase rotates: at t = π the coherence has flipped sign
        let k = grid.index_of(std::f64::consts::PI).unwrap_or(grid.len - 1);
        assert!(ds.rho[k].get(1, 0).re < -0.49 || k == grid.len - 1);
    }

    #[test]
    fn tcl_channel_sign_convention() {
        // at a time where γ⁽⁴⁾ < 0, C = −√|γ|σ⁻ while D = +√|γ|σ⁻
        let m = ModelSpec::detuned_jc(1.0, 0.3, 2.4);
        let g = tcl_generator(&m, RateMethod::Tcl4).unwrap();
        let f = rate_provider(&m, RateMethod::Tcl4, 10.0).unwrap();
        let mut t_neg = None;
        for k in 1..4000 {
            let t = k as f64 * 2.5e-3;
            if f(t).unwrap().gamma < 0.0 {
                t_neg = Some(t);
                break;
            }
        }
        let t = t_neg.expect("detuned TCL4 rate should go negative");
        let e = g.eval(t).unwrap();
        let c01 = e.channels[0].0.get(0, 1);
        let d01 = e.channels[0].1.get(0, 1);
        assert!(c01.re < 0.0 && d01.re > 0.0);
        assert_relative_eq!(-c01.re, d01.re, max_relative = 1e-15);
        // γ(0) = 0 ⇒ channel operators vanish at t = 0
        let e0 = g.eval(0.0).unwrap();
        assert_eq!(e0.channels[0].0.max_abs(), 0.0);
    }
}
