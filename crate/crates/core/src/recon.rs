//! End-to-end reconstruction of the initial field's quasiprobability.
//!
//! For each phase point β a drive pulse displaces the prepared field by β
//! while it decays, the field decays further for `t_meas`, and its photon
//! statistics are either read off exactly or estimated through the simulated
//! atomic probe. The decay-corrected series then returns the value of the
//! field as prepared.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    damp, damp_diagonal, drive_and_decay, drive_factor, DecayParams, DriveParams,
};
use crate::error::{invalid, Error, Result};
use crate::fockspace::{
    cat_density, coherent_density, number_distribution, DensityMatrix, PhotonDistribution,
};
use crate::probe::{cutoff, estimate_floor, InversionTrace, ProbeConfig, ProbeKernel};
use crate::quasiprob::{
    grid_eval, quasiprob_point, quasiprob_point_with_limit, series_weight, with_padding, GridAxes,
    GridMeta, QuasiprobGrid, SeriesWeight,
};

/// Largest truncation loss accepted when preparing the initial state.
pub const MAX_PREP_LOSS: f64 = 1e-6;

/// Smallest coupling-to-decay ratio accepted on the probe path.
pub const MIN_COUPLING_RATIO: f64 = 100.0;

/// State prepared in the cavity before the drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `N(|α⟩ + |−α⟩ + e^{iφ}|α⟩⟨−α| …)`, α given as `[re, im]`.
    Cat {
        alpha: [f64; 2],
        phi: f64,
    },
    Coherent {
        alpha: [f64; 2],
    },
    Fock {
        n: usize,
    },
}

impl InitialState {
    /// Density matrix in a truncation of `dim`; fails if more than
    /// [`MAX_PREP_LOSS`] of the state lies beyond it.
    pub fn density(&self, dim: usize) -> Result<DensityMatrix> {
        let prepared = match *self {
            InitialState::Cat { alpha, phi } => {
                cat_density(C64::new(alpha[0], alpha[1]), phi, dim)?
            }
            InitialState::Coherent { alpha } => {
                coherent_density(C64::new(alpha[0], alpha[1]), dim)?
            }
            InitialState::Fock { n } => return DensityMatrix::fock(n, dim),
        };
        if prepared.loss > MAX_PREP_LOSS {
            return Err(Error::InsufficientTruncation {
                loss: prepared.loss,
                limit: MAX_PREP_LOSS,
                dim,
            });
        }
        Ok(prepared.into_inner())
    }
}

/// How the decayed photon statistics are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    /// Exact diagonal of the decayed state.
    #[default]
    Analytic,
    /// Simulated probe atom followed by Fourier inversion.
    Probe,
}

/// Everything needed to reconstruct a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconPlan {
    pub state: InitialState,
    pub gamma: f64,
    /// Drive duration.
    pub t_d: f64,
    /// Free decay between the end of the drive and the measurement.
    pub t_meas: f64,
    pub axes: GridAxes,
    /// Order of the quasiprobability, `s ≤ 0`.
    pub s: f64,
    pub path: Path,
    pub probe: ProbeConfig,
    /// Truncation the initial state is prepared in.
    pub dim: usize,
}

impl ReconPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid(
                "gamma",
                format!("must be positive and finite, got {}", self.gamma),
            ));
        }
        if !(self.t_d.is_finite() && self.t_d > 0.0) {
            return Err(invalid(
                "t_d",
                format!("must be positive and finite, got {}", self.t_d),
            ));
        }
        if !(self.t_meas.is_finite() && self.t_meas >= 0.0) {
            return Err(invalid(
                "t_meas",
                format!("must be non-negative and finite, got {}", self.t_meas),
            ));
        }
        if self.dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        series_weight(self.s, 0.0)?;
        GridAxes::new(self.axes.x.clone(), self.axes.y.clone())?;
        if self.path == Path::Probe {
            self.probe.validate()?;
            let ratio = self.probe.lambda / self.gamma;
            if ratio < MIN_COUPLING_RATIO {
                return Err(invalid(
                    "lambda",
                    format!("probe needs lambda/gamma >= {MIN_COUPLING_RATIO}, got {ratio}"),
                ));
            }
        }
        Ok(())
    }

    /// `γ(t_d + t_meas)`, the decay between displacement and measurement.
    pub fn gamma_t(&self) -> f64 {
        self.gamma * (self.t_d + self.t_meas)
    }

    fn meta(&self) -> GridMeta {
        GridMeta {
            gamma: self.gamma,
            t_d: self.t_d,
            t_meas: self.t_meas,
            dim: self.dim,
            probe: self.path == Path::Probe,
            seed: (self.path == Path::Probe).then_some(self.probe.seed),
        }
    }
}

/// Drive amplitude whose pulse of length `t_d` displaces the field by
/// `beta_target`: `α = γβ / (2(1 − e^{γ t_d/2}))`.
pub fn drive_for_target(beta_target: C64, gamma: f64, t_d: f64) -> Result<C64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(
            "gamma",
            format!("must be positive and finite, got {gamma}"),
        ));
    }
    if !(t_d.is_finite() && t_d > 0.0) {
        return Err(invalid(
            "t_d",
            format!("no finite drive reaches a target in time {t_d}"),
        ));
    }
    Ok(beta_target / drive_factor(gamma, t_d))
}

/// A plan bound to a prepared state, ready to evaluate points.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    plan: ReconPlan,
    rho0: DensityMatrix,
    weight: SeriesWeight,
    kernel: Option<ProbeKernel>,
}

impl Reconstructor {
    pub fn new(plan: &ReconPlan) -> Result<Self> {
        plan.validate()?;
        let rho0 = plan.state.density(plan.dim)?;
        Self::with_state(plan, rho0)
    }

    /// Reconstructs `rho0` instead of the plan's initial state.
    pub fn with_state(plan: &ReconPlan, rho0: DensityMatrix) -> Result<Self> {
        plan.validate()?;
        let weight = series_weight(plan.s, plan.gamma_t())?;
        let kernel = match plan.path {
            Path::Analytic => None,
            Path::Probe => Some(ProbeKernel::new(
                &plan.probe,
                plan.probe.nyquist_limit() + 1,
            )?),
        };
        Ok(Self {
            plan: plan.clone(),
            rho0,
            weight,
            kernel,
        })
    }

    pub fn plan(&self) -> &ReconPlan {
        &self.plan
    }

    pub fn initial_state(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn weight(&self) -> SeriesWeight {
        self.weight
    }

    pub fn kernel(&self) -> Option<&ProbeKernel> {
        self.kernel.as_ref()
    }

    /// Exact photon statistics at measurement time for phase point `beta`.
    /// The drive aims at `−β` because it acts as `D(β_eff) ρ D†(β_eff)`
    /// while the parity of `D†(β) ρ D(β)` gives the value at β.
    pub fn measured_distribution(&self, beta: C64) -> Result<PhotonDistribution> {
        let plan = &self.plan;
        let alpha = drive_for_target(-beta, plan.gamma, plan.t_d)?;
        let drive = DriveParams {
            alpha,
            t_d: plan.t_d,
        };
        let driven = with_padding(&self.rho0, beta, |dim| {
            drive_and_decay(&self.rho0.embed(dim)?, drive, plan.gamma)
        })?;
        let p = number_distribution(&driven)?;
        Ok(damp_diagonal(
            &p,
            DecayParams::new(plan.gamma, plan.t_meas)?,
        ))
    }

    fn probe_kernel(&self) -> Result<&ProbeKernel> {
        self.kernel
            .as_ref()
            .ok_or_else(|| invalid("path", "plan does not use the probe"))
    }

    /// Cutoff the probe inversion uses for statistics of length `dim`.
    pub fn probe_cutoff(&self, dim: usize) -> usize {
        cutoff(
            &self.plan.probe,
            dim,
            self.weight.value,
            self.weight.prefactor(),
        )
    }

    /// Probe estimate of `p` from a noise-free trace, with noise from
    /// substream `index` of `seed`.
    pub fn estimate_from_clean(
        &self,
        clean: &InversionTrace,
        dim: usize,
        seed: u64,
        index: u64,
    ) -> Result<PhotonDistribution> {
        let kernel = self.probe_kernel()?;
        let trace = kernel.add_noise(clean, seed, index);
        kernel.invert(
            &trace,
            self.probe_cutoff(dim),
            estimate_floor(&self.plan.probe),
        )
    }

    /// Probe estimate of `p` with the plan's seed and substream `index`.
    pub fn estimate_distribution(
        &self,
        p: &PhotonDistribution,
        index: u64,
    ) -> Result<PhotonDistribution> {
        let clean = self.probe_kernel()?.clean_trace(p)?;
        self.estimate_from_clean(&clean, p.dim(), self.plan.probe.seed, index)
    }

    /// Decay-corrected series on statistics taken at measurement time. Noisy
    /// estimates skip the tail check because their noise floor does not decay.
    pub fn series(&self, p: &PhotonDistribution, noisy: bool) -> Result<f64> {
        let (s, gt) = (self.plan.s, self.plan.gamma_t());
        let v = if noisy {
            quasiprob_point_with_limit(p, s, gt, f64::INFINITY)?
        } else {
            quasiprob_point(p, s, gt)?
        };
        Ok(v.value)
    }

    /// Reconstructed value at `beta`; `index` selects the noise substream.
    pub fn point(&self, index: u64, beta: C64) -> Result<f64> {
        let p = self.measured_distribution(beta)?;
        match self.plan.path {
            Path::Analytic => self.series(&p, false),
            Path::Probe => {
                let est = self.estimate_distribution(&p, index)?;
                self.series(&est, self.plan.probe.noise_sigma > 0.0)
            }
        }
    }

    /// Noisy probe trace recorded at `beta`.
    pub fn point_trace(&self, index: u64, beta: C64) -> Result<InversionTrace> {
        self.probe_kernel()?
            .trace(&self.measured_distribution(beta)?, index)
    }

    /// Grid over the plan's axes. Point `k` uses noise substream
    /// `stream_offset + k`.
    pub fn grid(&self, stream_offset: u64) -> QuasiprobGrid {
        grid_eval(&self.plan.axes, self.plan.s, self.plan.meta(), |k, beta| {
            self.point(stream_offset + k as u64, beta)
        })
    }
}

/// Value reconstructed at a single phase point.
pub fn reconstruct_point(plan: &ReconPlan, beta: C64) -> Result<f64> {
    Reconstructor::new(plan)?.point(0, beta)
}

/// Reconstructed grid over the plan's axes. Failed points are NaN and listed
/// in the grid's failures.
pub fn reconstruct_grid(plan: &ReconPlan) -> Result<QuasiprobGrid> {
    Ok(Reconstructor::new(plan)?.grid(0))
}

/// Grid reconstructed after the prepared state decayed freely for `delay`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub delay: f64,
    pub grid: QuasiprobGrid,
}

/// Reconstructions with the drive applied `delay` after preparation, one per
/// delay. Each shows the partially decayed state `damp(ρ0, delay)`.
pub fn snapshot_series(plan: &ReconPlan, delays: &[f64]) -> Result<Vec<Snapshot>> {
    if delays.is_empty() {
        return Err(invalid("delays", "at least one delay is required"));
    }
    if delays.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(invalid("delays", "delays must be finite and non-negative"));
    }
    if delays.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("delays", "delays must be sorted"));
    }
    plan.validate()?;
    let rho0 = plan.state.density(plan.dim)?;
    let points = plan.axes.len() as u64;
    delays
        .iter()
        .enumerate()
        .map(|(j, &delay)| {
            let rho = damp(&rho0, DecayParams::new(plan.gamma, delay)?);
            let grid = Reconstructor::with_state(plan, rho)?.grid(j as u64 * points);
            Ok(Snapshot { delay, grid })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::channel::effective_drive_amplitude;
    use crate::quasiprob::{direct_grid, wigner_direct};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn plan(state: InitialState, path: Path) -> ReconPlan {
        ReconPlan {
            state,
            gamma: 1.0,
            t_d: 0.01,
            t_meas: 0.1,
            axes: GridAxes::square(-1.0, 1.0, 1.0).unwrap(),
            s: 0.0,
            path,
            probe: ProbeConfig::new(200.0, 256),
            dim: 48,
        }
    }

    fn cat() -> InitialState {
        InitialState::Cat {
            alpha: [2.0, 0.0],
            phi: 0.0,
        }
    }

    #[test]
    fn drive_inverse_round_trips() {
        assert_eq!(
            drive_for_target(c(0.0, 0.0), 1.0, 0.01).unwrap(),
            c(0.0, 0.0)
        );
        let beta = c(0.0, 2.0);
        let alpha = drive_for_target(beta, 1.0, 0.01).unwrap();
        let back = effective_drive_amplitude(DriveParams { alpha, t_d: 0.01 }, 1.0).unwrap();
        assert!((back - beta).norm() < 1e-12);
        let tiny = drive_for_target(beta, 1.0, 1e-10).unwrap();
        assert!((tiny + beta / 1e-10).norm() < 1e-9 * tiny.norm());
        assert!(drive_for_target(beta, 1.0, 0.0).is_err());
        assert!(drive_for_target(beta, 0.0, 0.1).is_err());
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(cat(), Path::Probe);
        assert!(p.validate().is_ok());
        p.probe.lambda = 50.0;
        assert!(p.validate().is_err());
        let mut p = plan(cat(), Path::Analytic);
        p.t_d = 0.0;
        assert!(p.validate().is_err());
        let mut p = plan(cat(), Path::Analytic);
        p.s = 0.5;
        assert!(p.validate().is_err());
        let mut p = plan(cat(), Path::Analytic);
        p.dim = 8;
        assert!(matches!(
            Reconstructor::new(&p),
            Err(Error::InsufficientTruncation { .. })
        ));
    }

    #[test]
    fn vacuum_reconstruction_is_gaussian() {
        let p = plan(InitialState::Fock { n: 0 }, Path::Analytic);
        for beta in [c(0.0, 0.0), c(0.5, -0.3), c(-1.2, 0.8)] {
            let w = reconstruct_point(&p, beta).unwrap();
            assert!(
                (w - 2.0 / PI * (-2.0 * beta.norm_sqr()).exp()).abs() < 1e-12,
                "{beta}: {w}"
            );
        }
    }

    #[test]
    fn coherent_state_is_found_at_its_amplitude() {
        let p = plan(InitialState::Coherent { alpha: [1.0, 0.5] }, Path::Analytic);
        let peak = reconstruct_point(&p, c(1.0, 0.5)).unwrap();
        assert!((peak - 2.0 / PI).abs() < 1e-12);
        let mirror = reconstruct_point(&p, c(-1.0, -0.5)).unwrap();
        assert!((mirror - 2.0 / PI * (-10.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn cat_origin_and_time_invariance() {
        let mut p = plan(cat(), Path::Analytic);
        let w0 = reconstruct_point(&p, c(0.0, 0.0)).unwrap();
        assert!((w0 - 2.0 / PI).abs() < 1e-9);
        let beta = c(0.4, 0.35);
        let rho = p.state.density(p.dim).unwrap();
        let truth = wigner_direct(&rho, beta).unwrap();
        for tm in [0.0, 0.05, 0.1, 0.2] {
            p.t_meas = tm;
            let w = reconstruct_point(&p, beta).unwrap();
            assert!((w - truth).abs() < 1e-10, "t_meas {tm}: {w} vs {truth}");
        }
    }

    #[test]
    fn q_function_reconstruction() {
        let mut p = plan(cat(), Path::Analytic);
        p.s = -1.0;
        let rho = p.state.density(p.dim).unwrap();
        let g = reconstruct_grid(&p).unwrap();
        let direct = direct_grid(&rho, &p.axes, -1.0);
        assert!(g.max_abs_diff(&direct) < 1e-10);
    }

    #[test]
    fn probe_path_without_noise_matches_analytic() {
        let p = plan(cat(), Path::Probe);
        let beta = c(0.0, 2.0);
        let a = reconstruct_point(&plan(cat(), Path::Analytic), beta).unwrap();
        let b = reconstruct_point(&p, beta).unwrap();
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn noisy_grids_are_reproducible() {
        let mut p = plan(cat(), Path::Probe);
        p.probe.noise_sigma = 0.01;
        p.probe.noise_budget = Some(0.05);
        p.probe.seed = 11;
        let a = reconstruct_grid(&p).unwrap();
        let b = reconstruct_grid(&p).unwrap();
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert_eq!(a.values, b.values);
        p.probe.seed = 12;
        assert_ne!(a.values, reconstruct_grid(&p).unwrap().values);
    }

    #[test]
    fn snapshots_follow_the_decayed_state() {
        let mut p = plan(cat(), Path::Analytic);
        p.axes = GridAxes::new(vec![0.0], vec![0.0, 0.4]).unwrap();
        let shots = snapshot_series(&p, &[0.0, 0.1]).unwrap();
        let rho0 = p.state.density(p.dim).unwrap();
        assert_eq!(shots[0].grid.values, reconstruct_grid(&p).unwrap().values);
        for s in &shots {
            let rho = damp(&rho0, DecayParams::new(1.0, s.delay).unwrap());
            let direct = direct_grid(&rho, &p.axes, 0.0);
            assert!(s.grid.max_abs_diff(&direct) < 1e-10);
        }
        assert!(snapshot_series(&p, &[]).is_err());
        assert!(snapshot_series(&p, &[0.2, 0.1]).is_err());
    }
}
