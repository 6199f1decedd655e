//! Figures of merit: Uhlmann fidelity between states, pure-channel fidelity,
//! success probability, and the trace-distance bound.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, CMatrix, CVector, Unitary};

/// Admission tolerances for density matrices.
const HERMITICITY_TOL: f64 = 1e-10;
const EIGENVALUE_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

/// A positive semidefinite, unit-trace complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Admit a matrix after checking Hermiticity (1e-10), positivity
    /// (eigenvalues ≥ −1e-10), and unit trace (±1e-10).
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(&m, "density matrix")?;
        let adj = m.adjoint();
        let herm_dev = (&m - &adj).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian: deviation {herm_dev:.3e}"
            )));
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let eigen = SymmetricEigen::new(m.clone());
        if let Some(min) = eigen
            .eigenvalues
            .iter()
            .cloned()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
        {
            if min < -EIGENVALUE_TOL {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(DensityMatrix { m })
    }

    /// Rank-one state |v⟩⟨v| of a (normalized) vector.
    pub fn from_pure(v: &CVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let u = v / Complex64::new(norm, 0.0);
        let n = u.len();
        let m = CMatrix::from_fn(n, n, |i, j| u[i] * u[j].conj());
        Ok(DensityMatrix { m })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidState("dimension 0".into()));
        }
        let m = CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
        Ok(DensityMatrix { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.m * &self.m)).re
    }

    /// Hermitian square root, clipping small negative eigenvalues at zero.
    fn sqrt(&self) -> CMatrix {
        hermitian_sqrt(&self.m)
    }
}

fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eigen = SymmetricEigen::new(herm);
    let mut acc = CMatrix::zeros(n, n);
    for (k, &lambda) in eigen.eigenvalues.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        if root == 0.0 {
            continue;
        }
        let v = eigen.eigenvectors.column(k);
        for i in 0..n {
            for j in 0..n {
                acc[(i, j)] += Complex64::new(root, 0.0) * v[i] * v[j].conj();
            }
        }
    }
    acc
}

/// Uhlmann-Jozsa fidelity `F(ρ,σ) = (Tr √(√ρ σ √ρ))²` of two states.
///
/// Symmetric in its arguments and equal to 1 iff the states coincide.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity of {}x{} vs {}x{} states",
            rho.dim(),
            rho.dim(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    let s = rho.sqrt();
    let inner = &s * sigma.matrix() * &s;
    let herm = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let eigen = SymmetricEigen::new(herm);
    let tr: f64 = eigen
        .eigenvalues
        .iter()
        .map(|&lambda| lambda.max(0.0).sqrt())
        .sum();
    Ok((tr * tr).min(1.0 + 1e-9))
}

/// Fidelity of an implemented transform against a target gate:
/// `|Tr(T̃†T)|² / (Tr(T̃†T̃)·Tr(T†T))`.
///
/// Invariant under rescaling `T̃ → αe^{iβ}T̃`; the denominator is computed,
/// never assumed equal to d.
pub fn pure_fidelity(t_eff: &CMatrix, target: &Unitary) -> Result<f64> {
    let d = target.dim();
    if t_eff.nrows() != d || t_eff.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "effective transform is {}x{}, target is {d}x{d}",
            t_eff.nrows(),
            t_eff.ncols()
        )));
    }
    let eff_power = t_eff.norm_squared(); // Tr(T̃†T̃)
    if eff_power == 0.0 {
        return Err(Error::UndefinedFidelity(
            "effective transform is identically zero".into(),
        ));
    }
    let target_power = target.matrix().norm_squared();
    let overlap = trace(&t_eff.ad_mul(target.matrix()));
    Ok(overlap.norm_sqr() / (eff_power * target_power))
}

/// Success probability `Tr(T̃†T̃)/Tr(T†T)`: the fraction of amplitude kept
/// inside the target output ports.
pub fn success_probability(t_eff: &CMatrix, target: &Unitary) -> Result<f64> {
    let d = target.dim();
    if t_eff.nrows() != d || t_eff.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "effective transform is {}x{}, target is {d}x{d}",
            t_eff.nrows(),
            t_eff.ncols()
        )));
    }
    Ok(t_eff.norm_squared() / target.matrix().norm_squared())
}

/// Upper bound on trace distance, `√(1 − F)`.
pub fn trace_distance_bound(fidelity: f64) -> Result<f64> {
    if !(-1e-9..=1.0 + 1e-9).contains(&fidelity) {
        return Err(Error::Domain(format!(
            "fidelity {fidelity} outside [0, 1]"
        )));
    }
    Ok((1.0 - fidelity.clamp(0.0, 1.0)).sqrt())
}
