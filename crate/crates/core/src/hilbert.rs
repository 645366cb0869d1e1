//! Finite-dimensional complex linear algebra and the doubled-space state
//! representation.
//!
//! Everything here is dense and immutable after construction; the paper
//! models all have dim = 2 but the engine is dimension-agnostic. In-place
//! variants (`*_into`) exist for the trajectory hot loop.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A complex state vector of fixed dimension `dim ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CVector<T> {
    entries: Vec<Complex<T>>,
}

impl<T: Real> CVector<T> {
    pub fn new(entries: Vec<Complex<T>>) -> Self {
        assert!(!entries.is_empty(), "state vector needs dim >= 1");
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![Complex::new(T::zero(), T::zero()); dim])
    }

    /// Basis vector |k⟩.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[k] = Complex::new(T::one(), T::zero());
        v
    }

    pub fn from_reals(entries: &[T]) -> Self {
        Self::new(entries.iter().map(|&x| Complex::new(x, T::zero())).collect())
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.entries
    }

    pub fn norm_sq(&self) -> T {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Inner product ⟨self, other⟩, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
    }

    pub fn scale(&mut self, c: Complex<T>) {
        for z in &mut self.entries {
            *z *= c;
        }
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        let mut v = self.clone();
        v.scale(c);
        v
    }
}

/// A square complex matrix acting on [`CVector`]s, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct COperator<T> {
    dim: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Real> COperator<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            entries: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.entries[k * dim + k] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex<T>]]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self {
            dim,
            entries: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex<T>) {
        self.entries[i * self.dim + j] = z;
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim)
            .map(|k| self.get(k, k))
            .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.get(j, i).conj());
            }
        }
        m
    }

    pub fn apply(&self, v: &CVector<T>) -> Result<CVector<T>> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, v.dim()));
        }
        let mut out = CVector::zeros(self.dim);
        self.apply_into(v.entries(), out.entries_mut());
        Ok(out)
    }

    /// `out = self · v`, no allocation. Dimensions are the caller's problem.
    pub fn apply_into(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.dim;
        for (row, o) in self.entries.chunks_exact(n).zip(out.iter_mut()) {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (a, x) in row.iter().zip(v) {
                acc += *a * *x;
            }
            *o = acc;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    let z = m.get(i, j) + a * other.get(k, j);
                    m.set(i, j, z);
                }
            }
        }
        m
    }

    pub fn scale(&mut self, c: Complex<T>) {
        for z in &mut self.entries {
            *z *= c;
        }
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        let mut m = self.clone();
        m.scale(c);
        m
    }

    /// `self += c · other`.
    pub fn scaled_add(&mut self, c: Complex<T>, other: &Self) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += c * *b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = self.clone();
        m.scaled_add(Complex::new(T::one(), T::zero()), other);
        m
    }

    pub fn max_abs(&self) -> T {
        self.entries
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }

    /// Largest entry of `self − self†`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations,
    /// ascending. Intended for the small matrices that occur here.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let (vals, _) = self.hermitian_eigen();
        vals
    }

    /// Eigenvalues (ascending) and matching orthonormal eigenvectors of a
    /// Hermitian matrix.
    pub fn hermitian_eigen(&self) -> (Vec<T>, Vec<CVector<T>>) {
        let n = self.dim;
        let mut a = self.clone();
        let mut vecs = Self::identity(n);
        let tol = T::of(1e-14);
        let scale = self.max_abs().max(T::one());
        for _sweep in 0..60 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).norm());
                }
            }
            if off <= tol * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.norm() <= tol * scale {
                        continue;
                    }
                    // Unitary 2x2 rotation annihilating (p, q).
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    let abs = apq.norm();
                    let phase = apq / Complex::new(abs, T::zero());
                    let theta = (T::of(2.0) * abs).atan2(aqq - app) / T::of(2.0);
                    let c = theta.cos();
                    let s = theta.sin();
                    let cs = Complex::new(c, T::zero());
                    let sp = phase * s;
                    // columns: new_p = c·p − conj(phase)·s·q ; new_q = phase·s·p + c·q
                    for i in 0..n {
                        let aip = a.get(i, p);
                        let aiq = a.get(i, q);
                        a.set(i, p, aip * cs - aiq * sp.conj());
                        a.set(i, q, aip * sp + aiq * cs);
                        let vip = vecs.get(i, p);
                        let viq = vecs.get(i, q);
                        vecs.set(i, p, vip * cs - viq * sp.conj());
                        vecs.set(i, q, vip * sp + viq * cs);
                    }
                    for j in 0..n {
                        let apj = a.get(p, j);
                        let aqj = a.get(q, j);
                        a.set(p, j, apj * cs.conj() - aqj * sp);
                        a.set(q, j, apj * sp.conj() + aqj * cs);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<T> = (0..n).map(|k| a.get(k, k).re).collect();
        order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
        let vals = order.iter().map(|&k| diag[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| CVector::new((0..n).map(|i| vecs.get(i, k)).collect()))
            .collect();
        (vals, vectors)
    }
}

/// Pair θ = (φ, ψ) of state vectors of equal dimension; an element of the
/// doubled Hilbert space ℋ ⊕ ℋ.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubledState<T> {
    phi: CVector<T>,
    psi: CVector<T>,
}

impl<T: Real> DoubledState<T> {
    pub fn new(phi: CVector<T>, psi: CVector<T>) -> Result<Self> {
        if phi.dim() != psi.dim() {
            return Err(Error::DimensionMismatch(phi.dim(), psi.dim()));
        }
        Ok(Self { phi, psi })
    }

    /// θ = (χ, χ), the doubled image of a pure state.
    pub fn pure(chi: CVector<T>) -> Self {
        Self {
            phi: chi.clone(),
            psi: chi,
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn phi(&self) -> &CVector<T> {
        &self.phi
    }

    pub fn psi(&self) -> &CVector<T> {
        &self.psi
    }

    /// ‖θ‖² = ‖φ‖² + ‖ψ‖².
    pub fn norm_sq(&self) -> T {
        self.phi.norm_sq() + self.psi.norm_sq()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }
}

/// |φ⟩⟨ψ| with entries φ_a · conj(ψ_b).
pub fn outer_product<T: Real>(phi: &CVector<T>, psi: &CVector<T>) -> Result<COperator<T>> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimensionMismatch(phi.dim(), psi.dim()));
    }
    let n = phi.dim();
    let mut m = COperator::zeros(n);
    for a in 0..n {
        for b in 0..n {
            m.set(a, b, phi.entries()[a] * psi.entries()[b].conj());
        }
    }
    Ok(m)
}

/// Apply the block-diagonal operator diag(Fblock, Gblock) to θ:
/// returns (Fblock·φ, Gblock·ψ).
pub fn doubled_apply<T: Real>(
    fblock: &COperator<T>,
    gblock: &COperator<T>,
    theta: &DoubledState<T>,
) -> Result<DoubledState<T>> {
    if fblock.dim() != theta.dim() || gblock.dim() != theta.dim() {
        return Err(Error::DimensionMismatch(fblock.dim(), theta.dim()));
    }
    DoubledState::new(fblock.apply(theta.phi())?, gblock.apply(theta.psi())?)
}

/// σ⁻ = |0⟩⟨1| in the basis (ground, excited).
pub fn sigma_minus<T: Real>() -> COperator<T> {
    let mut m = COperator::zeros(2);
    m.set(0, 1, Complex::new(T::one(), T::zero()));
    m
}

/// σ⁺ = |1⟩⟨0|.
pub fn sigma_plus<T: Real>() -> COperator<T> {
    let mut m = COperator::zeros(2);
    m.set(1, 0, Complex::new(T::one(), T::zero()));
    m
}

/// σ⁺σ⁻ = |1⟩⟨1|, the excited-state projector.
pub fn excited_projector<T: Real>() -> COperator<T> {
    let mut m = COperator::zeros(2);
    m.set(1, 1, Complex::new(T::one(), T::zero()));
    m
}
