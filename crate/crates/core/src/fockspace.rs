//! Truncated Fock-space states: coherent and cat states, the displacement
//! operator, and photon-number statistics.
//!
//! Every operator is a dense `dim × dim` complex matrix in the number basis
//! `|0⟩ … |dim − 1⟩`. State constructors report how much probability falls
//! outside the truncation so callers can decide whether `dim` is adequate.

use std::ops::Deref;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numeric::ln_factorials;

/// Largest tolerated `|ρ_mn − ρ*_nm|` for a density matrix.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Negative diagonal entries down to this magnitude are treated as round-off
/// and clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// A value together with the probability lost to Fock truncation while
/// producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated<T> {
    pub state: T,
    pub loss: f64,
}

impl<T> Truncated<T> {
    pub fn into_inner(self) -> T {
        self.state
    }
}

impl<T> Deref for Truncated<T> {
    type Target = T;

    fn deref(&self) -> &T {
        &self.state
    }
}

/// Pure-state amplitudes in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Array1<C64>,
}

impl FockVector {
    pub fn new(amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if amplitudes
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::UnphysicalState("non-finite amplitude".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Density operator in the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: Array2<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking it is square, finite and Hermitian.
    pub fn new(elements: Array2<C64>) -> Result<Self> {
        let (rows, cols) = elements.dim();
        if rows == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if rows != cols {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: cols,
            });
        }
        if elements
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::UnphysicalState("non-finite matrix element".into()));
        }
        let rho = Self { elements };
        let defect = rho.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(Error::UnphysicalState(format!(
                "not Hermitian: max |ρ_mn − ρ*_nm| = {defect:e}"
            )));
        }
        Ok(rho)
    }

    /// Hermitian part of `elements`; used after products that are Hermitian
    /// only up to round-off.
    pub(crate) fn from_hermitian_part(elements: Array2<C64>) -> Self {
        let adjoint = elements.t().mapv(|c| c.conj());
        Self {
            elements: (elements + adjoint).mapv(|c| c * 0.5),
        }
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(0, dim)
    }

    /// Number-state projector `|n⟩⟨n|`.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if n >= dim {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: dim,
            });
        }
        let mut elements = Array2::zeros((dim, dim));
        elements[[n, n]] = C64::new(1.0, 0.0);
        Ok(Self { elements })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &FockVector) -> Self {
        let a = psi.amplitudes();
        let dim = a.len();
        let elements = Array2::from_shape_fn((dim, dim), |(m, n)| a[m] * a[n].conj());
        Self::from_hermitian_part(elements)
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &Array2<C64> {
        &self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.diag().iter().map(|c| c.re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for m in 0..dim {
            for n in m..dim {
                let d = (self.elements[[m, n]] - self.elements[[n, m]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .elements
            .iter()
            .zip(other.elements.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Smallest `s` such that every diagonal entry `ρ_nn` with `n ≥ s` is at
    /// most `tol`.
    pub fn support(&self, tol: f64) -> usize {
        self.elements
            .diag()
            .iter()
            .rposition(|c| c.re.abs() > tol)
            .map_or(0, |n| n + 1)
    }

    /// Zero-padded copy in a larger truncation.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        if dim == self.dim() {
            return Ok(self.clone());
        }
        let mut elements = Array2::zeros((dim, dim));
        let d = self.dim();
        elements.slice_mut(s![..d, ..d]).assign(&self.elements);
        Ok(Self { elements })
    }

    /// Upper-left `dim × dim` block.
    pub fn restrict(&self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if dim > self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(Self {
            elements: self.elements.slice(s![..dim, ..dim]).to_owned(),
        })
    }

    /// Index bound beyond which every row and column is exactly zero.
    fn nonzero_extent(&self) -> usize {
        let dim = self.dim();
        let zero = C64::new(0.0, 0.0);
        (0..dim)
            .rev()
            .find(|&k| {
                self.elements.row(k).iter().any(|&c| c != zero)
                    || self.elements.column(k).iter().any(|&c| c != zero)
            })
            .map_or(0, |k| k + 1)
    }
}

/// Photon-number distribution `P_m = ⟨m|ρ|m⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
}

impl PhotonDistribution {
    /// Validates entries: finite, not below `−CLAMP_TOL`, total at most
    /// `1 + 1e−9`. Tiny negatives are clamped to zero.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_floor(probs, CLAMP_TOL, true)
    }

    /// Distribution estimated from noisy data. Negative estimates down to
    /// `−floor` are kept as they are so that the estimate stays unbiased;
    /// anything below is rejected.
    pub fn estimated(probs: Vec<f64>, floor: f64) -> Result<Self> {
        if floor <= CLAMP_TOL {
            return Self::new(probs);
        }
        Self::with_floor(probs, floor, false)
    }

    fn with_floor(mut probs: Vec<f64>, floor: f64, clamp: bool) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        for (m, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::UnphysicalState(format!("P_{m} is not finite")));
            }
            if *p < -floor {
                return Err(Error::UnphysicalState(format!("P_{m} = {p:e} is negative")));
            }
            if clamp && *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-9 + floor * probs.len() as f64 {
            return Err(Error::UnphysicalState(format!(
                "total probability {total} exceeds 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let mut probs = vec![0.0; dim];
        probs[0] = 1.0;
        Ok(Self { probs })
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum()
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Magnitudes `e^{−|α|²/2} |α|^n / √n!` evaluated in the log domain.
fn coherent_magnitudes(abs_alpha: f64, ln_fact: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let x = abs_alpha * abs_alpha;
    let ln_abs = abs_alpha.ln();
    ln_fact.iter().enumerate().map(move |(n, lf)| {
        if abs_alpha == 0.0 {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-0.5 * x + n as f64 * ln_abs - 0.5 * lf).exp()
        }
    })
}

/// Coherent state `|α⟩` truncated to `dim` levels; `loss = 1 − Σ|c_n|²`.
pub fn coherent_vector(alpha: C64, dim: usize) -> Result<Truncated<FockVector>> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let ln_fact = ln_factorials(dim);
    let theta = alpha.arg();
    let amplitudes: Array1<C64> = coherent_magnitudes(alpha.norm(), &ln_fact)
        .enumerate()
        .map(|(n, mag)| C64::from_polar(mag, n as f64 * theta))
        .collect();
    let psi = FockVector::new(amplitudes)?;
    let loss = (1.0 - psi.norm_sqr()).max(0.0);
    Ok(Truncated { state: psi, loss })
}

/// `|α⟩⟨α|`.
pub fn coherent_density(alpha: C64, dim: usize) -> Result<Truncated<DensityMatrix>> {
    let psi = coherent_vector(alpha, dim)?;
    Ok(Truncated {
        loss: psi.loss,
        state: DensityMatrix::from_pure(&psi),
    })
}

/// Two-component cat state
/// `N[|α⟩⟨α| + |−α⟩⟨−α| + e^{iφ}|α⟩⟨−α| + e^{−iφ}|−α⟩⟨α|]`
/// with `N = 1/(2 + 2e^{−2|α|²} cos φ)`.
pub fn cat_density(alpha: C64, phi: f64, dim: usize) -> Result<Truncated<DensityMatrix>> {
    let denom = 2.0 + 2.0 * (-2.0 * alpha.norm_sqr()).exp() * phi.cos();
    if denom <= 1e-15 {
        return Err(Error::DegenerateState(denom));
    }
    let plus = coherent_vector(alpha, dim)?;
    let minus = coherent_vector(-alpha, dim)?;
    // |ψ⟩ = |α⟩ + e^{−iφ}|−α⟩ gives N|ψ⟩⟨ψ| = the four-term operator above.
    let phase = C64::from_polar(1.0, -phi);
    let amplitudes = plus.amplitudes() + &minus.amplitudes().mapv(|c| c * phase);
    let scale = (1.0 / denom).sqrt();
    let psi = FockVector::new(amplitudes.mapv(|c| c * scale))?;
    let rho = DensityMatrix::from_pure(&psi);
    let loss = (1.0 - rho.trace()).max(0.0);
    Ok(Truncated { state: rho, loss })
}

/// Matrix of `D(β) = exp(β a† − β* a)` in the truncated number basis.
///
/// Elements come from the closed form
/// `⟨m|D|n⟩ = √(n!/m!) β^{m−n} e^{−|β|²/2} L_n^{(m−n)}(|β|²)` (m ≥ n), evaluated
/// through a three-term recurrence on the normalized products
/// `E_j = √(j!/(j+k)!) |β|^k e^{−|β|²/2} L_j^{(k)}(|β|²)` so that no factorial
/// or Laguerre value is ever formed on its own. Every entry is exact for the
/// infinite-dimensional operator; only the unitarity of the truncated block
/// suffers near the edge.
pub fn displacement_matrix(beta: C64, dim: usize) -> Result<Array2<C64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut d = Array2::<C64>::zeros((dim, dim));
    if beta == C64::new(0.0, 0.0) {
        d.diag_mut().fill(C64::new(1.0, 0.0));
        return Ok(d);
    }
    let x = beta.norm_sqr();
    let theta = beta.arg();
    let ln_fact = ln_factorials(dim);
    let e0: Vec<f64> = coherent_magnitudes(beta.norm(), &ln_fact).collect();
    let mut row = vec![0.0_f64; dim];
    for k in 0..dim {
        let len = dim - k;
        let kf = k as f64;
        row[0] = e0[k];
        if len > 1 {
            row[1] = (1.0 + kf - x) * row[0] / (1.0 + kf).sqrt();
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            row[j + 1] = ((2.0 * jf + 1.0 + kf - x) * row[j]
                - (jf * (jf + kf)).sqrt() * row[j - 1])
                / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
        }
        let below = C64::from_polar(1.0, kf * theta);
        let above = if k % 2 == 0 {
            below.conj()
        } else {
            -below.conj()
        };
        for j in 0..len {
            d[[j + k, j]] = below * row[j];
            if k > 0 {
                d[[j, j + k]] = above * row[j];
            }
        }
    }
    Ok(d)
}

/// Extra Fock levels kept above a state's support when displacing it by β:
/// `ceil(4|β|² + 8)`.
pub fn displacement_margin(beta: C64) -> usize {
    (4.0 * beta.norm_sqr() + 8.0).ceil() as usize
}

/// `D†(β) ρ D(β)`, i.e. the state whose parity gives the Wigner function of
/// `ρ` at `β`. `loss` is the trace that left the truncation.
pub fn displace(rho: &DensityMatrix, beta: C64) -> Result<Truncated<DensityMatrix>> {
    let dim = rho.dim();
    if beta == C64::new(0.0, 0.0) {
        return Ok(Truncated {
            state: rho.clone(),
            loss: 0.0,
        });
    }
    let d = displacement_matrix(beta, dim)?;
    // Rows/columns of ρ beyond its nonzero extent contribute nothing.
    let ext = rho.nonzero_extent().max(1);
    let d_top = d.slice(s![..ext, ..]);
    let rho_top = rho.elements().slice(s![..ext, ..ext]);
    let half = rho_top.dot(&d_top);
    let d_top_adj = d_top.t().mapv(|c| c.conj());
    let full = d_top_adj.dot(&half);
    let out = DensityMatrix::from_hermitian_part(full);
    let loss = (rho.trace() - out.trace()).max(0.0);
    Ok(Truncated { state: out, loss })
}

/// Diagonal of `ρ` as a photon-number distribution; negative entries down to
/// `−1e−12` are clamped to zero, anything lower is an error.
pub fn number_distribution(rho: &DensityMatrix) -> Result<PhotonDistribution> {
    PhotonDistribution::new(rho.elements().diag().iter().map(|c| c.re).collect())
}
