//! Parallel ensemble execution, density-matrix estimation from trajectories,
//! and statistical error quantification.
//!
//! Accumulation runs over a fixed pairwise-summation tree keyed by
//! trajectory index, so results are bit-identical for any worker count.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::hilbert::COperator;
use crate::mastereq::{check_density, DensitySeries, TimeLocalGenerator};
use crate::scalar::Real;
use crate::unravel::{
    run_trajectory, trajectory_rng, GeneratorTable, TrajectoryConfig, Unraveling,
};

/// Monte Carlo estimate of ρ(t) with per-entry standard errors.
#[derive(Clone, Debug)]
pub struct EnsembleEstimate<T> {
    pub grid: TimeGrid<T>,
    /// Mean of the outer products at each output time.
    pub rho_hat: Vec<COperator<T>>,
    /// Standard errors per matrix entry: the real part of entry (i, j)
    /// carries the SE of Re ρ̂ᵢⱼ, the imaginary part the SE of Im ρ̂ᵢⱼ.
    pub se: Vec<COperator<T>>,
    pub n_traj: u64,
    /// Mean number of jumps per trajectory.
    pub mean_jumps: T,
}

impl<T: Real> EnsembleEstimate<T> {
    /// ρ̂₁₁(t) (two-level systems).
    pub fn population(&self) -> Vec<T> {
        self.rho_hat.iter().map(|r| r.get(1, 1).re).collect()
    }

    pub fn population_se(&self) -> Vec<T> {
        self.se.iter().map(|r| r.get(1, 1).re).collect()
    }
}

const LEAF: u64 = 64;

struct Ctx<'a, T> {
    table: &'a GeneratorTable<T>,
    cfg: &'a TrajectoryConfig<T>,
    output: &'a TimeGrid<T>,
    mode: Unraveling,
    /// (cumulative weight, flat initial state) — one entry per eigenvector
    /// of ρ(0) with nonnegligible weight.
    initials: Vec<(T, Vec<Complex<T>>)>,
    dim: usize,
}

struct Acc<T> {
    sum: Vec<Complex<T>>,
    sumsq_re: Vec<T>,
    sumsq_im: Vec<T>,
    jumps: u64,
    n: u64,
}

impl<T: Real> Acc<T> {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![Complex::new(T::zero(), T::zero()); len],
            sumsq_re: vec![T::zero(); len],
            sumsq_im: vec![T::zero(); len],
            jumps: 0,
            n: 0,
        }
    }

    fn merge(&mut self, other: Acc<T>) {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq_re.iter_mut().zip(other.sumsq_re) {
            *a += b;
        }
        for (a, b) in self.sumsq_im.iter_mut().zip(other.sumsq_im) {
            *a += b;
        }
        self.jumps += other.jumps;
        self.n += other.n;
    }
}

fn initial_options<T: Real>(
    rho0: &COperator<T>,
    mode: Unraveling,
) -> Result<Vec<(T, Vec<Complex<T>>)>> {
    let (vals, vecs) = rho0.hermitian_eigen();
    let mut opts = Vec::new();
    let mut total = T::zero();
    for (p, v) in vals.iter().zip(&vecs) {
        if *p <= T::of(1e-12) {
            continue;
        }
        let flat: Vec<Complex<T>> = match mode {
            Unraveling::Lindblad => v.entries().to_vec(),
            Unraveling::Doubled => v
                .entries()
                .iter()
                .chain(v.entries())
                .copied()
                .collect(),
        };
        total += *p;
        opts.push((total, flat));
    }
    if opts.is_empty() {
        return Err(Error::InvalidDensity("initial state has no weight".into()));
    }
    Ok(opts)
}

fn run_one<T: Real>(index: u64, ctx: &Ctx<'_, T>, acc: &mut Acc<T>) -> Result<()> {
    let mut rng = trajectory_rng(ctx.cfg.seed, index);
    let initial: &[Complex<T>] = if ctx.initials.len() == 1 {
        &ctx.initials[0].1
    } else {
        let total = ctx.initials.last().unwrap().0;
        let u = T::of(rng.gen::<f64>()) * total;
        let mut chosen = &ctx.initials[ctx.initials.len() - 1].1;
        for (cum, flat) in &ctx.initials {
            if u < *cum {
                chosen = flat;
                break;
            }
        }
        chosen
    };
    let mut cfg = *ctx.cfg;
    cfg.trajectory_index = index;
    let dim = ctx.dim;
    let mode = ctx.mode;
    let jumps = run_trajectory(initial, ctx.table, &cfg, ctx.output, &mut rng, |k, x| {
        let base = k * dim * dim;
        match mode {
            Unraveling::Doubled => {
                // raw outer product |φ⟩⟨ψ|, no reweighting
                for a in 0..dim {
                    for b in 0..dim {
                        let v = x[a] * x[dim + b].conj();
                        let slot = base + a * dim + b;
                        acc.sum[slot] += v;
                        acc.sumsq_re[slot] += v.re * v.re;
                        acc.sumsq_im[slot] += v.im * v.im;
                    }
                }
            }
            Unraveling::Lindblad => {
                // normalized projector |ψ⟩⟨ψ|/‖ψ‖²
                let n2: T = x.iter().map(|z| z.norm_sqr()).sum();
                for a in 0..dim {
                    for b in 0..dim {
                        let v = x[a] * x[b].conj() / n2;
                        let slot = base + a * dim + b;
                        acc.sum[slot] += v;
                        acc.sumsq_re[slot] += v.re * v.re;
                        acc.sumsq_im[slot] += v.im * v.im;
                    }
                }
            }
        }
    })?;
    acc.jumps += jumps.len() as u64;
    acc.n += 1;
    Ok(())
}

fn reduce<T: Real>(lo: u64, hi: u64, ctx: &Ctx<'_, T>) -> Result<Acc<T>> {
    if hi - lo <= LEAF {
        let mut acc = Acc::new(ctx.output.len * ctx.dim * ctx.dim);
        for index in lo..hi {
            run_one(index, ctx, &mut acc)?;
        }
        Ok(acc)
    } else {
        let mid = lo + (hi - lo) / 2;
        let (a, b) = rayon::join(|| reduce(lo, mid, ctx), || reduce(mid, hi, ctx));
        let mut a = a?;
        a.merge(b?);
        Ok(a)
    }
}

/// Run `n_traj` trajectories of the chosen unraveling and estimate ρ(t) on
/// `output`. Pure initial states map to θ(0) = (χ, χ); mixed states are
/// sampled from the eigendecomposition of ρ(0).
pub fn run_ensemble<T: Real>(
    g: &TimeLocalGenerator<T>,
    mode: Unraveling,
    rho0: &COperator<T>,
    n_traj: u64,
    cfg: &TrajectoryConfig<T>,
    output: &TimeGrid<T>,
) -> Result<EnsembleEstimate<T>> {
    if n_traj < 2 {
        return Err(Error::ConfigRejected(
            "an ensemble needs at least two trajectories".into(),
        ));
    }
    check_density(rho0)?;
    if rho0.dim() != g.dim {
        return Err(Error::DimensionMismatch(rho0.dim(), g.dim));
    }
    let table = GeneratorTable::build(g, cfg.dt, output.t_end())?;
    cfg.validate(&table)?;
    let ctx = Ctx {
        table: &table,
        cfg,
        output,
        mode,
        initials: initial_options(rho0, mode)?,
        dim: g.dim,
    };
    let acc = reduce(0, n_traj, &ctx)?;

    let dim = g.dim;
    let n = T::of(acc.n as f64);
    let nm1 = T::of((acc.n - 1) as f64);
    let mut rho_hat = Vec::with_capacity(output.len);
    let mut se = Vec::with_capacity(output.len);
    for k in 0..output.len {
        let mut mean = COperator::zeros(dim);
        let mut err = COperator::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                let slot = k * dim * dim + a * dim + b;
                let m = acc.sum[slot] / Complex::new(n, T::zero());
                mean.set(a, b, m);
                let var_re = ((acc.sumsq_re[slot] / n - m.re * m.re) * n / nm1).max(T::zero());
                let var_im = ((acc.sumsq_im[slot] / n - m.im * m.im) * n / nm1).max(T::zero());
                err.set(a, b, Complex::new((var_re / n).sqrt(), (var_im / n).sqrt()));
            }
        }
        rho_hat.push(mean);
        se.push(err);
    }

    Ok(EnsembleEstimate {
        grid: *output,
        rho_hat,
        se,
        n_traj: acc.n,
        mean_jumps: T::of(acc.jumps as f64) / n,
    })
}

/// Deviations of an ensemble estimate from a deterministic reference.
#[derive(Clone, Debug)]
pub struct ErrorReport<T> {
    /// Max deviation over entry components, per output time.
    pub per_time_deviation: Vec<T>,
    pub sup_deviation: T,
    /// z-score (deviation / SE) for every (time, entry, component).
    pub z_scores: Vec<T>,
    pub max_z: T,
}

impl<T: Real> ErrorReport<T> {
    /// Fraction of z-scores with |z| ≤ bound.
    pub fn fraction_z_within(&self, bound: T) -> T {
        if self.z_scores.is_empty() {
            return T::one();
        }
        let inside = self.z_scores.iter().filter(|z| z.abs() <= bound).count();
        T::of(inside as f64) / T::of(self.z_scores.len() as f64)
    }
}

/// Compare an ensemble estimate against a deterministic series on the same
/// grid.
pub fn estimate_error<T: Real>(
    e: &EnsembleEstimate<T>,
    reference: &DensitySeries<T>,
) -> Result<ErrorReport<T>> {
    let step_rel = ((e.grid.step - reference.grid.step) / e.grid.step).abs();
    if step_rel > T::of(1e-9) || reference.rho.len() != e.rho_hat.len() {
        return Err(Error::GridMismatch(format!(
            "estimate has {} points at step {}, reference {} at step {}",
            e.rho_hat.len(),
            e.grid.step.to_f64_lossy(),
            reference.rho.len(),
            reference.grid.step.to_f64_lossy()
        )));
    }
    let dim = e.rho_hat[0].dim();
    let mut per_time = Vec::with_capacity(e.rho_hat.len());
    let mut z_scores = Vec::new();
    let mut sup = T::zero();
    let mut max_z = T::zero();
    for (k, (hat, rf)) in e.rho_hat.iter().zip(&reference.rho).enumerate() {
        let mut worst = T::zero();
        for a in 0..dim {
            for b in 0..dim {
                let dv = hat.get(a, b) - rf.get(a, b);
                let s = e.se[k].get(a, b);
                for (dev, sig) in [(dv.re.abs(), s.re), (dv.im.abs(), s.im)] {
                    worst = worst.max(dev);
                    let z = if sig > T::zero() {
                        dev / sig
                    } else if dev <= T::of(1e-12) {
                        T::zero()
                    } else {
                        T::infinity()
                    };
                    z_scores.push(z);
                    max_z = max_z.max(z);
                }
            }
        }
        sup = sup.max(worst);
        per_time.push(worst);
    }
    Ok(ErrorReport {
        per_time_deviation: per_time,
        sup_deviation: sup,
        z_scores,
        max_z,
    })
}
