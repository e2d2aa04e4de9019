//! s-parametrized quasiprobabilities from photon statistics.
//!
//! The value at a phase point β is a weighted sum over the photon-number
//! distribution of the field displaced by β:
//! `F(β; s) = −2/(π(s − 1)) Σ_m χ(s; t)^m P_m(t)` with
//! `χ(s; t) = 1 + 2e^{γt}/(s − 1)`. Feeding it statistics taken after a decay
//! of `γt` returns the value of the undecayed field, because the weight
//! absorbs the binomial thinning exactly. At `s = 0` this is the Wigner
//! function, at `s = −1` the Husimi Q function.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockspace::{
    displace, displacement_margin, number_distribution, DensityMatrix, PhotonDistribution,
    Truncated,
};
use crate::numeric::CompensatedSum;

/// Default limit on the series tail bound `|χ|^m P_m` at the cutoff.
pub const MAX_TAIL: f64 = 1e-6;

/// Diagonal entries below this are treated as outside a state's support when
/// padding the truncation for a displacement.
pub const SUPPORT_TOL: f64 = 1e-20;

/// The per-photon weight `χ(s; t)` of the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesWeight {
    pub s: f64,
    pub gamma_t: f64,
    pub value: f64,
}

impl SeriesWeight {
    /// Overall factor `−2/(π(s − 1))`, equal to `2/π` for the Wigner function.
    pub fn prefactor(&self) -> f64 {
        -2.0 / (PI * (self.s - 1.0))
    }
}

/// `χ(s; t) = 1 + 2e^{γt}/(s − 1)`. Orders `s > 0` are rejected because the
/// weights then grow without bound even at `t = 0`.
pub fn series_weight(s: f64, gamma_t: f64) -> Result<SeriesWeight> {
    if !s.is_finite() || s > 0.0 {
        return Err(invalid(
            "s",
            format!("must be finite and at most 0, got {s}"),
        ));
    }
    if !(gamma_t.is_finite() && gamma_t >= 0.0) {
        return Err(invalid(
            "gamma_t",
            format!("must be non-negative and finite, got {gamma_t}"),
        ));
    }
    let value = if s == 0.0 {
        1.0 - 2.0 * gamma_t.exp()
    } else {
        1.0 + 2.0 * gamma_t.exp() / (s - 1.0)
    };
    Ok(SeriesWeight { s, gamma_t, value })
}

/// A series value with the size of its last retained terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// `max |χ|^m |P_m|` over the last two indices. Two are needed because
    /// parity-symmetric states populate every other level only.
    pub tail_bound: f64,
}

/// Quasiprobability of order `s` at the phase point whose displaced field,
/// after a decay of `gamma_t`, has statistics `p`. Fails when the tail bound
/// exceeds [`MAX_TAIL`].
pub fn quasiprob_point(p: &PhotonDistribution, s: f64, gamma_t: f64) -> Result<SeriesValue> {
    quasiprob_point_with_limit(p, s, gamma_t, MAX_TAIL)
}

/// [`quasiprob_point`] with a caller-chosen tail limit. Estimated statistics
/// carry a noise floor that no cutoff removes, so the probe path passes
/// `f64::INFINITY` and inspects the bound itself.
pub fn quasiprob_point_with_limit(
    p: &PhotonDistribution,
    s: f64,
    gamma_t: f64,
    limit: f64,
) -> Result<SeriesValue> {
    let weight = series_weight(s, gamma_t)?;
    let chi = weight.value;
    let probs = p.probs();
    let mut sum = CompensatedSum::new();
    let mut power = 1.0_f64;
    let mut tail_bound = 0.0_f64;
    let last = probs.len() - 1;
    for (m, &pm) in probs.iter().enumerate() {
        let term = power * pm;
        sum.add(term);
        if m + 1 >= last {
            tail_bound = tail_bound.max(term.abs());
        }
        power *= chi;
    }
    if tail_bound.is_nan() || tail_bound > limit {
        return Err(Error::TruncationUnsafe {
            bound: tail_bound,
            limit,
        });
    }
    Ok(SeriesValue {
        value: weight.prefactor() * sum.value(),
        tail_bound,
    })
}

/// Trace a padded displacement may lose before the padding is enlarged.
pub const PAD_LOSS: f64 = 1e-14;

/// Largest truncation the automatic padding will try.
pub const MAX_PAD_DIM: usize = 4096;

/// First truncation tried when displacing `rho` by `beta`: its support plus
/// [`displacement_margin`], and never less than `rho.dim()`.
pub fn padded_dim(rho: &DensityMatrix, beta: C64) -> usize {
    rho.dim()
        .max(rho.support(SUPPORT_TOL) + displacement_margin(beta))
}

/// Runs `attempt` on truncations starting at [`padded_dim`] and growing by
/// [`displacement_margin`] until it reports a loss of at most [`PAD_LOSS`],
/// or until the loss stops falling because it has reached round-off. The
/// margin alone is too thin for sharply peaked states such as the vacuum.
pub fn with_padding<T>(
    rho: &DensityMatrix,
    beta: C64,
    mut attempt: impl FnMut(usize) -> Result<Truncated<T>>,
) -> Result<Truncated<T>> {
    let step = displacement_margin(beta);
    let mut dim = padded_dim(rho, beta);
    let mut previous = f64::INFINITY;
    loop {
        let out = attempt(dim)?;
        if out.loss <= PAD_LOSS || out.loss > 0.5 * previous {
            return Ok(out);
        }
        if dim + step > MAX_PAD_DIM {
            return Err(Error::InsufficientTruncation {
                loss: out.loss,
                limit: PAD_LOSS,
                dim,
            });
        }
        previous = out.loss;
        dim += step;
    }
}

/// `D†(β) ρ D(β)` in a truncation padded until the displacement loses no
/// more than [`PAD_LOSS`].
pub fn displace_padded(rho: &DensityMatrix, beta: C64) -> Result<Truncated<DensityMatrix>> {
    with_padding(rho, beta, |dim| displace(&rho.embed(dim)?, beta))
}

/// Quasiprobability of order `s` of `rho0` at `beta` straight from the
/// displaced parity, with no decay involved.
pub fn quasiprob_direct(rho0: &DensityMatrix, beta: C64, s: f64) -> Result<f64> {
    let displaced = displace_padded(rho0, beta)?;
    let p = number_distribution(&displaced)?;
    Ok(quasiprob_point(&p, s, 0.0)?.value)
}

/// Wigner function of `rho0` at `beta` from its displaced parity.
pub fn wigner_direct(rho0: &DensityMatrix, beta: C64) -> Result<f64> {
    quasiprob_direct(rho0, beta, 0.0)
}

/// Rectangular phase-space grid; `x` is the real part, `y` the imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl GridAxes {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(invalid("axes", "each axis needs at least one point"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(invalid("axes", "coordinates must be finite"));
        }
        Ok(Self { x, y })
    }

    /// `lo, lo + step, …` up to `hi` inclusive, with the point count rounded
    /// to the nearest integer so that `hi` is hit when the range divides.
    pub fn uniform_axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
        if !(step.is_finite() && step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(invalid(
                "axis",
                format!("bad range [{lo}, {hi}] with step {step}"),
            ));
        }
        let n = ((hi - lo) / step).round() as usize + 1;
        Ok((0..n).map(|i| lo + i as f64 * step).collect())
    }

    /// Square grid `[lo, hi]²` with the same spacing on both axes.
    pub fn square(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let axis = Self::uniform_axis(lo, hi, step)?;
        Self::new(axis.clone(), axis)
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Phase point of row-major index `k` (rows run along `y`).
    pub fn point(&self, k: usize) -> C64 {
        let nx = self.x.len();
        C64::new(self.x[k % nx], self.y[k / nx])
    }

    /// Area of one cell, taken from the first spacing of each axis; a
    /// single-point axis counts as unit width.
    pub fn cell_area(&self) -> f64 {
        let spacing = |a: &[f64]| if a.len() > 1 { a[1] - a[0] } else { 1.0 };
        spacing(&self.x) * spacing(&self.y)
    }
}

/// Provenance of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub gamma: f64,
    pub t_d: f64,
    pub t_meas: f64,
    pub dim: usize,
    pub probe: bool,
    pub seed: Option<u64>,
}

/// A grid point whose evaluation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub index: usize,
    pub beta: C64,
    pub error: Error,
}

/// Quasiprobability values on a grid, row-major with `y` as the row index.
/// Failed points hold NaN and are listed in `failures`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiprobGrid {
    pub axes: GridAxes,
    pub values: Vec<f64>,
    pub s: f64,
    pub meta: GridMeta,
    pub failures: Vec<PointFailure>,
}

impl QuasiprobGrid {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.axes.x.len() + ix]
    }

    /// Riemann sum of the values times the cell area.
    pub fn normalization(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
            * self.axes.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest pointwise `|a − b|`; NaN if the grids differ in shape or any
    /// compared value is NaN.
    pub fn max_abs_diff(&self, other: &QuasiprobGrid) -> f64 {
        if self.axes != other.axes {
            return f64::NAN;
        }
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| {
                let d = (a - b).abs();
                if d.is_nan() || acc.is_nan() {
                    f64::NAN
                } else {
                    acc.max(d)
                }
            })
    }
}

/// Evaluates `f(index, β)` at every grid point in parallel. Each point is
/// independent and results are placed by index, so the output does not
/// depend on the number of threads.
pub fn grid_eval<F>(axes: &GridAxes, s: f64, meta: GridMeta, f: F) -> QuasiprobGrid
where
    F: Fn(usize, C64) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = (0..axes.len())
        .into_par_iter()
        .map(|k| f(k, axes.point(k)))
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(error) => {
                values.push(f64::NAN);
                failures.push(PointFailure {
                    index,
                    beta: axes.point(index),
                    error,
                });
            }
        }
    }
    QuasiprobGrid {
        axes: axes.clone(),
        values,
        s,
        meta,
        failures,
    }
}

/// Grid of [`quasiprob_direct`] values of `rho0`, the undecayed reference.
pub fn direct_grid(rho0: &DensityMatrix, axes: &GridAxes, s: f64) -> QuasiprobGrid {
    let meta = GridMeta {
        gamma: 0.0,
        t_d: 0.0,
        t_meas: 0.0,
        dim: rho0.dim(),
        probe: false,
        seed: None,
    };
    grid_eval(axes, s, meta, |_, beta| quasiprob_direct(rho0, beta, s))
}
