//! Simulated cascade three-level atom probing the cavity field.
//!
//! An atom crossing the cavity for a time τ exchanges photon pairs with the
//! field, so its population inversion is a cosine series in the photon
//! statistics with frequencies `2λ√((n+1)(n+2)) ≈ (2n + 3)λ`. The odd
//! harmonics `cos((2n + 3)λτ)` are orthogonal on `[0, π/λ]`, which lets the
//! statistics be read back from a sampled inversion trace.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockspace::PhotonDistribution;
use crate::numeric::CompensatedSum;

/// Atomic response used to generate inversion traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeModel {
    /// `Σ P_n cos((2n + 3)λτ)`, the response the inversion assumes.
    #[default]
    Simplified,
    /// Detuned two-photon Rabi response, see [`inversion_exact`].
    Exact,
}

/// Quadrature rule for the Fourier inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Composite trapezoid. Exact for the odd harmonics below the aliasing
    /// limit on the uniform grid over `[0, π/λ]`.
    #[default]
    Trapezoid,
    /// Composite Simpson, closed with a 3/8 panel for an odd interval count.
    Simpson,
}

fn default_samples() -> usize {
    256
}

/// Probe atom and measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Atom-field coupling λ.
    pub lambda: f64,
    /// Detuning Δ from two-photon resonance.
    #[serde(default)]
    pub delta: f64,
    /// Stark-shift coefficient.
    #[serde(default)]
    pub stark: f64,
    /// Number of interaction times on `[0, π/λ]`, endpoints included.
    #[serde(default = "default_samples")]
    pub tau_samples: usize,
    /// Standard deviation of the additive Gaussian noise on each sample.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Highest photon number recovered. `None` uses the upstream truncation
    /// plus 8, capped by the sampling limit.
    #[serde(default)]
    pub m_max: Option<usize>,
    /// If set, also caps the cutoff so that the noise propagated into the
    /// weighted series has at most this standard deviation.
    #[serde(default)]
    pub noise_budget: Option<f64>,
    #[serde(default)]
    pub model: ProbeModel,
    #[serde(default)]
    pub quadrature: Quadrature,
}

impl ProbeConfig {
    /// Noise-free resonant probe with coupling `lambda`.
    pub fn new(lambda: f64, tau_samples: usize) -> Self {
        Self {
            lambda,
            delta: 0.0,
            stark: 0.0,
            tau_samples,
            noise_sigma: 0.0,
            seed: 0,
            m_max: None,
            noise_budget: None,
            model: ProbeModel::Simplified,
            quadrature: Quadrature::Trapezoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid(
                "lambda",
                format!("must be positive and finite, got {}", self.lambda),
            ));
        }
        if !self.delta.is_finite() || !self.stark.is_finite() {
            return Err(invalid(
                "delta",
                "detuning and Stark coefficient must be finite",
            ));
        }
        if self.tau_samples < 2 {
            return Err(invalid(
                "tau_samples",
                format!("need at least 2, got {}", self.tau_samples),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(
                "noise_sigma",
                format!("must be non-negative, got {}", self.noise_sigma),
            ));
        }
        if let Some(b) = self.noise_budget {
            if !(b.is_finite() && b > 0.0) {
                return Err(invalid(
                    "noise_budget",
                    format!("must be positive, got {b}"),
                ));
            }
        }
        Ok(())
    }

    /// Longest interaction time `π/λ`.
    pub fn tau_max(&self) -> f64 {
        PI / self.lambda
    }

    /// Uniform interaction times on `[0, π/λ]`.
    pub fn taus(&self) -> Vec<f64> {
        let n = self.tau_samples;
        let h = self.tau_max() / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.tau_max()
                } else {
                    i as f64 * h
                }
            })
            .collect()
    }

    /// Highest recoverable photon number: `m_max < tau_samples / 2`.
    pub fn nyquist_limit(&self) -> usize {
        (self.tau_samples - 1) / 2
    }
}

/// Sampled population inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionTrace {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

/// Resonant approximation `W(τ) = Σ P_n cos((2n + 3)λτ)`.
pub fn inversion_simplified(p: &PhotonDistribution, lambda: f64, tau: f64) -> f64 {
    p.probs()
        .iter()
        .enumerate()
        .map(|(n, pn)| pn * ((2 * n + 3) as f64 * lambda * tau).cos())
        .collect::<CompensatedSum>()
        .value()
}

/// Two-photon Rabi response with detuning and Stark shift:
/// `W(τ) = Σ P_n [Γ_n²/δ_n² + (Ω_n²/δ_n²) cos(2δ_n τ)]` with
/// `Γ_n = (Δ + χ_s(n + 1))/2`, `Ω_n² = λ²(n + 1)(n + 2)`, `δ_n² = Γ_n² + Ω_n²`,
/// all in frequency units. At `Δ = χ_s = 0` every term is
/// `cos(2λτ√((n + 1)(n + 2)))`.
pub fn inversion_exact(p: &PhotonDistribution, cfg: &ProbeConfig, tau: f64) -> Result<f64> {
    let mut sum = CompensatedSum::new();
    for (n, &pn) in p.probs().iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let k = (n + 1) as f64;
        let g = 0.5 * (cfg.delta + cfg.stark * k);
        let omega2 = cfg.lambda * cfg.lambda * k * (k + 1.0);
        let delta2 = g * g + omega2;
        if delta2.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::DegenerateRabi(n));
        }
        let delta = delta2.sqrt();
        sum.add(pn * (g * g + omega2 * (2.0 * delta * tau).cos()) / delta2);
    }
    Ok(sum.value())
}

/// Cosine table `cos((2n + 3)λτ_i)` shared by trace synthesis and inversion.
#[derive(Debug, Clone)]
pub struct ProbeKernel {
    cfg: ProbeConfig,
    taus: Vec<f64>,
    /// Row `n` holds the harmonic `2n + 3` on the τ grid.
    table: Array2<f64>,
    weights: Vec<f64>,
}

impl ProbeKernel {
    /// Kernel covering photon numbers `0..rows`.
    pub fn new(cfg: &ProbeConfig, rows: usize) -> Result<Self> {
        cfg.validate()?;
        let taus = cfg.taus();
        let lambda = cfg.lambda;
        let table = Array2::from_shape_fn((rows, taus.len()), |(n, i)| {
            ((2 * n + 3) as f64 * lambda * taus[i]).cos()
        });
        let weights = quadrature_weights(cfg.quadrature, taus.len(), cfg.tau_max());
        Ok(Self {
            cfg: cfg.clone(),
            taus,
            table,
            weights,
        })
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.cfg
    }

    pub fn rows(&self) -> usize {
        self.table.nrows()
    }

    /// Noise-free inversion trace of `p`.
    pub fn clean_trace(&self, p: &PhotonDistribution) -> Result<InversionTrace> {
        let values = match self.cfg.model {
            ProbeModel::Simplified => {
                let probs = p.probs();
                let rows = self.rows().min(probs.len());
                let lambda = self.cfg.lambda;
                self.taus
                    .iter()
                    .enumerate()
                    .map(|(i, &tau)| {
                        let mut sum = CompensatedSum::new();
                        for (pn, c) in probs[..rows].iter().zip(self.table.column(i)) {
                            sum.add(pn * c);
                        }
                        for (n, pn) in probs.iter().enumerate().skip(rows) {
                            sum.add(pn * ((2 * n + 3) as f64 * lambda * tau).cos());
                        }
                        sum.value()
                    })
                    .collect()
            }
            ProbeModel::Exact => self
                .taus
                .iter()
                .map(|&tau| inversion_exact(p, &self.cfg, tau))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(InversionTrace {
            taus: self.taus.clone(),
            values,
        })
    }

    /// `clean` plus Gaussian noise of the configured σ drawn from substream
    /// `index` of `seed`.
    pub fn add_noise(&self, clean: &InversionTrace, seed: u64, index: u64) -> InversionTrace {
        let mut values = clean.values.clone();
        let sigma = self.cfg.noise_sigma;
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index);
            let normal =
                Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative");
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        InversionTrace {
            taus: clean.taus.clone(),
            values,
        }
    }

    /// Inversion trace of `p` with the configured noise and seed, using
    /// substream `index`.
    pub fn trace(&self, p: &PhotonDistribution, index: u64) -> Result<InversionTrace> {
        Ok(self.add_noise(&self.clean_trace(p)?, self.cfg.seed, index))
    }

    /// Statistics `P_0 … P_{m_max}` from a trace on this kernel's τ grid:
    /// `P_m = (2λ/π) ∫ W(τ) cos((2m + 3)λτ) dτ`. Negative estimates down to
    /// `floor` are kept so that noisy estimates remain unbiased.
    pub fn invert(
        &self,
        trace: &InversionTrace,
        m_max: usize,
        floor: f64,
    ) -> Result<PhotonDistribution> {
        if trace.values.len() != self.taus.len() {
            return Err(Error::DimensionMismatch {
                expected: self.taus.len(),
                found: trace.values.len(),
            });
        }
        if m_max > self.cfg.nyquist_limit() {
            return Err(Error::SamplingTooCoarse {
                m_max,
                samples: self.taus.len(),
            });
        }
        if m_max >= self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                found: m_max + 1,
            });
        }
        let scale = 2.0 * self.cfg.lambda / PI;
        let probs = (0..=m_max)
            .map(|m| {
                let row = self.table.row(m);
                scale
                    * trace
                        .values
                        .iter()
                        .zip(row.iter())
                        .zip(&self.weights)
                        .map(|((w, c), q)| w * c * q)
                        .collect::<CompensatedSum>()
                        .value()
            })
            .collect();
        PhotonDistribution::estimated(probs, floor)
    }
}

fn quadrature_weights(rule: Quadrature, n: usize, length: f64) -> Vec<f64> {
    let h = length / (n - 1) as f64;
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    match rule {
        Quadrature::Trapezoid => {
            w.iter_mut().for_each(|x| *x = h);
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
        }
        Quadrature::Simpson if intervals < 2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        Quadrature::Simpson => {
            // Simpson panels over an even number of intervals, then a 3/8
            // panel over the last three when the count is odd.
            let simpson_end = if intervals.is_multiple_of(2) {
                intervals
            } else {
                intervals - 3
            };
            for k in (0..simpson_end).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            if simpson_end < intervals {
                let k = simpson_end;
                w[k] += 3.0 * h / 8.0;
                w[k + 1] += 9.0 * h / 8.0;
                w[k + 2] += 9.0 * h / 8.0;
                w[k + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w
}

/// Trace of `p` sampled on `cfg`'s τ grid with noise substream `index`.
pub fn sample_trace(
    p: &PhotonDistribution,
    cfg: &ProbeConfig,
    index: u64,
) -> Result<InversionTrace> {
    ProbeKernel::new(cfg, p.dim())?.trace(p, index)
}

/// Negative estimates down to this are accepted as noise: ten standard
/// deviations of one recovered `P_m`, or round-off when noise-free.
pub fn estimate_floor(cfg: &ProbeConfig) -> f64 {
    10.0 * estimate_noise(cfg)
}

/// Recovers `P_0 … P_{m_max}` from a noise-free trace on `[0, π/λ]` with the
/// trapezoid rule. Fails when `m_max ≥ samples/2`.
pub fn invert_trace(
    trace: &InversionTrace,
    lambda: f64,
    m_max: usize,
) -> Result<PhotonDistribution> {
    let mut cfg = ProbeConfig::new(lambda, trace.taus.len());
    cfg.validate()?;
    if m_max > cfg.nyquist_limit() {
        return Err(Error::SamplingTooCoarse {
            m_max,
            samples: trace.taus.len(),
        });
    }
    cfg.m_max = Some(m_max);
    ProbeKernel::new(&cfg, m_max + 1)?.invert(trace, m_max, 0.0)
}

/// Standard deviation of one recovered `P_m` for white noise of `sigma`
/// under the trapezoid rule: `σ √(2/(N − 1))`.
pub fn estimate_noise(cfg: &ProbeConfig) -> f64 {
    cfg.noise_sigma * (2.0 / (cfg.tau_samples - 1) as f64).sqrt()
}

/// Cutoff used for a state truncated at `upstream_dim` under weight `chi`:
/// the configured `m_max` or `upstream_dim + 8`, then capped by the sampling
/// limit and, if a noise budget is set, by the largest `M` for which
/// `(2/π) σ_P √(Σ_{m≤M} χ^{2m})` stays within it.
pub fn cutoff(cfg: &ProbeConfig, upstream_dim: usize, chi: f64, prefactor: f64) -> usize {
    let mut m_max = cfg
        .m_max
        .unwrap_or(upstream_dim + 8)
        .min(cfg.nyquist_limit());
    if let Some(budget) = cfg.noise_budget {
        let sigma_p = estimate_noise(cfg);
        if sigma_p > 0.0 {
            let mut acc = 0.0_f64;
            let mut power = 1.0;
            for m in 0..=m_max {
                acc += power;
                if prefactor.abs() * sigma_p * acc.sqrt() > budget {
                    m_max = m.saturating_sub(1);
                    break;
                }
                power *= chi * chi;
            }
        }
    }
    m_max
}
