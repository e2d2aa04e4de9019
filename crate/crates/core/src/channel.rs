//! Zero-temperature cavity dissipation.
//!
//! The decay of a free cavity mode at rate `γ` is the amplitude-damping
//! channel with survival probability `e^{−γt}`, applied here in closed form.
//! A coherent drive acting while the field decays factorizes into a single
//! displacement followed by free decay, see [`drive_and_decay`]. The
//! fourth-order Runge–Kutta integrator in [`integrate_master`] solves the same
//! master equation directly and exists only to cross-check those maps.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::fockspace::{
    displace, displacement_margin, DensityMatrix, PhotonDistribution, Truncated,
};

/// Largest trace the displacement inside [`drive_and_decay`] may push out of
/// the truncation.
pub const MAX_DRIVE_LOSS: f64 = 1e-6;

/// Below this `γ t_d` the effective amplitude uses its Taylor series.
const SMALL_DECAY: f64 = 1e-8;

/// Free decay at rate `gamma` for a duration `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    gamma: f64,
    t: f64,
}

impl DecayParams {
    pub fn new(gamma: f64, t: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(
                "gamma",
                format!("must be positive and finite, got {gamma}"),
            ));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid(
                "t",
                format!("must be non-negative and finite, got {t}"),
            ));
        }
        Ok(Self { gamma, t })
    }

    /// Decay measured directly by the dimensionless exponent `γt`.
    pub fn from_gamma_t(gamma_t: f64) -> Result<Self> {
        Self::new(1.0, gamma_t)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma * self.t
    }

    /// Loss probability `q = 1 − e^{−γt}`.
    pub fn q(&self) -> f64 {
        -(-self.gamma_t()).exp_m1()
    }
}

/// Classical drive of amplitude `alpha` (rate units) switched on for `t_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub alpha: C64,
    pub t_d: f64,
}

/// Displacement amplitude equivalent to driving for `t_d` while decaying:
/// `β = 2α (1 − e^{γ t_d/2}) / γ`.
///
/// The drive produces `e^{L t_d} D(β) ρ D†(β)`, so β is antiparallel to `α`
/// and the phase-space point probed by the decayed parity is `−β`.
pub fn effective_drive_amplitude(drive: DriveParams, gamma: f64) -> Result<C64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(
            "gamma",
            format!("must be positive and finite, got {gamma}"),
        ));
    }
    if !(drive.t_d.is_finite() && drive.t_d >= 0.0) {
        return Err(invalid(
            "t_d",
            format!("must be non-negative and finite, got {}", drive.t_d),
        ));
    }
    Ok(drive.alpha * drive_factor(gamma, drive.t_d))
}

/// `β/α = 2(1 − e^{γ t_d/2})/γ`, by its Taylor series for tiny `γ t_d`.
pub(crate) fn drive_factor(gamma: f64, t_d: f64) -> f64 {
    let x = gamma * t_d;
    if x < SMALL_DECAY {
        -t_d * (1.0 + x / 4.0 + x * x / 24.0)
    } else {
        -2.0 * (x / 2.0).exp_m1() / gamma
    }
}

/// Coefficients `c_k = e^{−(m+n)γt/2} q^k √(C(m+k,k) C(n+k,k))` for
/// `k = 0..len`, built by a running product so no binomial is ever formed.
fn damping_coefficients(m: usize, n: usize, len: usize, gamma_t: f64, q: f64, out: &mut Vec<f64>) {
    out.clear();
    if len == 0 {
        return;
    }
    let mut c = (-((m + n) as f64) * gamma_t * 0.5).exp();
    out.push(c);
    for k in 0..len - 1 {
        let a = (m + k + 1) as f64;
        let b = (n + k + 1) as f64;
        c *= q * (a * b).sqrt() / (k + 1) as f64;
        out.push(c);
    }
}

/// Photon statistics after free decay:
/// `P_m(t) = Σ_{n≥m} C(n,m) e^{−mγt} (1 − e^{−γt})^{n−m} P_n(0)`.
pub fn damp_diagonal(p0: &PhotonDistribution, decay: DecayParams) -> PhotonDistribution {
    let dim = p0.dim();
    let probs = p0.probs();
    let (gt, q) = (decay.gamma_t(), decay.q());
    let mut coeffs = Vec::with_capacity(dim);
    let out = (0..dim)
        .map(|m| {
            damping_coefficients(m, m, dim - m, gt, q, &mut coeffs);
            coeffs
                .iter()
                .zip(&probs[m..])
                .map(|(c, p)| c * p)
                .sum::<f64>()
        })
        .collect();
    // Each output is a convex combination of non-negative inputs.
    PhotonDistribution::new(out).expect("damping preserves non-negativity")
}

/// Full density matrix after free decay:
/// `ρ_mn(t) = e^{−(m+n)γt/2} Σ_k √(C(m+k,k) C(n+k,k)) q^k ρ_{m+k,n+k}(0)`.
///
/// The diagonal is computed exactly as in [`damp_diagonal`].
pub fn damp(rho0: &DensityMatrix, decay: DecayParams) -> DensityMatrix {
    let dim = rho0.dim();
    let src = rho0.elements();
    if decay.gamma_t() == 0.0 {
        return rho0.clone();
    }
    let (gt, q) = (decay.gamma_t(), decay.q());
    let mut out = Array2::<C64>::zeros((dim, dim));
    let mut coeffs = Vec::with_capacity(dim);
    for m in 0..dim {
        for n in m..dim {
            damping_coefficients(m, n, dim - n, gt, q, &mut coeffs);
            let mut acc = C64::new(0.0, 0.0);
            for (k, c) in coeffs.iter().enumerate() {
                acc += src[[m + k, n + k]] * *c;
            }
            out[[m, n]] = acc;
            out[[n, m]] = acc.conj();
        }
        out[[m, m]].im = 0.0;
    }
    DensityMatrix::from_hermitian_part(out)
}

/// Drive with `drive.alpha` for `drive.t_d` while decaying at `gamma`:
/// `ρ(t_d) = e^{L t_d} D(β) ρ0 D†(β)` with β from
/// [`effective_drive_amplitude`].
///
/// Decay feeds coherences downward, so the displaced state is built with
/// [`displacement_margin`] extra levels and cut back to `rho0.dim()` only
/// after damping. `loss` is the trace left above `rho0.dim()`; more than
/// [`MAX_DRIVE_LOSS`] is an error.
pub fn drive_and_decay(
    rho0: &DensityMatrix,
    drive: DriveParams,
    gamma: f64,
) -> Result<Truncated<DensityMatrix>> {
    let beta = effective_drive_amplitude(drive, gamma)?;
    let decay = DecayParams::new(gamma, drive.t_d)?;
    let dim = rho0.dim();
    let padded = rho0.embed(dim + displacement_margin(beta))?;
    let displaced = displace(&padded, -beta)?;
    let state = damp(&displaced, decay).restrict(dim)?;
    let loss = (rho0.trace() - state.trace()).max(0.0);
    if loss > MAX_DRIVE_LOSS {
        return Err(Error::InsufficientTruncation {
            loss,
            limit: MAX_DRIVE_LOSS,
            dim,
        });
    }
    Ok(Truncated { state, loss })
}

/// Result of a direct master-equation integration.
#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub state: DensityMatrix,
    /// `|tr ρ(t) − tr ρ(0)|`.
    pub trace_drift: f64,
    /// Set when `γ t / steps` exceeds 0.05.
    pub step_warning: Option<String>,
}

/// Right-hand side of the driven, damped master equation in the interaction
/// picture with `H_d = iħ(α* a − α a†)`:
/// `dρ/dt = [α* a − α a†, ρ] + γ(a ρ a† − ½{a†a, ρ})`.
fn master_rhs(rho: &Array2<C64>, alpha: C64, gamma: f64, sq: &[f64], out: &mut Array2<C64>) {
    let dim = rho.nrows();
    let ac = alpha.conj();
    let zero = C64::new(0.0, 0.0);
    for m in 0..dim {
        for n in 0..dim {
            let a_rho = if m + 1 < dim {
                rho[[m + 1, n]] * sq[m + 1]
            } else {
                zero
            };
            let rho_a = if n > 0 { rho[[m, n - 1]] * sq[n] } else { zero };
            let ad_rho = if m > 0 { rho[[m - 1, n]] * sq[m] } else { zero };
            let rho_ad = if n + 1 < dim {
                rho[[m, n + 1]] * sq[n + 1]
            } else {
                zero
            };
            let jump = if m + 1 < dim && n + 1 < dim {
                rho[[m + 1, n + 1]] * (sq[m + 1] * sq[n + 1])
            } else {
                zero
            };
            out[[m, n]] = ac * (a_rho - rho_a) - alpha * (ad_rho - rho_ad)
                + (jump - rho[[m, n]] * (0.5 * (m + n) as f64)) * gamma;
        }
    }
}

/// Classical RK4 integration of the driven master equation over `[0, t]`.
/// Oracle only; the pipeline uses the closed-form maps.
pub fn integrate_master(
    rho0: &DensityMatrix,
    alpha: C64,
    gamma: f64,
    t: f64,
    steps: usize,
) -> Result<MasterSolution> {
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(invalid(
            "gamma",
            format!("must be non-negative and finite, got {gamma}"),
        ));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(
            "t",
            format!("must be non-negative and finite, got {t}"),
        ));
    }
    let dim = rho0.dim();
    let step_ratio = gamma * t / steps as f64;
    let step_warning = (step_ratio > 0.05)
        .then(|| format!("γ·t/steps = {step_ratio} exceeds 0.05; RK4 result may be inaccurate"));
    let h = t / steps as f64;
    let sq: Vec<f64> = (0..dim).map(|k| (k as f64).sqrt()).collect();

    let mut rho = rho0.elements().clone();
    let mut k1 = Array2::<C64>::zeros((dim, dim));
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for _ in 0..steps {
        master_rhs(&rho, alpha, gamma, &sq, &mut k1);
        tmp.zip_mut_with(&rho, |t, r| *t = *r);
        tmp.scaled_add(C64::new(0.5 * h, 0.0), &k1);
        master_rhs(&tmp, alpha, gamma, &sq, &mut k2);
        tmp.zip_mut_with(&rho, |t, r| *t = *r);
        tmp.scaled_add(C64::new(0.5 * h, 0.0), &k2);
        master_rhs(&tmp, alpha, gamma, &sq, &mut k3);
        tmp.zip_mut_with(&rho, |t, r| *t = *r);
        tmp.scaled_add(C64::new(h, 0.0), &k3);
        master_rhs(&tmp, alpha, gamma, &sq, &mut k4);
        let w = h / 6.0;
        ndarray::Zip::from(&mut rho)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|r, a, b, c, d| *r += (*a + (*b + *c) * 2.0 + *d) * w);
    }
    let state = DensityMatrix::from_hermitian_part(rho);
    let trace_drift = (state.trace() - rho0.trace()).abs();
    Ok(MasterSolution {
        state,
        trace_drift,
        step_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{cat_density, coherent_density, number_distribution};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn poisson(mean: f64, dim: usize) -> Vec<f64> {
        let mut p = vec![0.0; dim];
        p[0] = (-mean).exp();
        for n in 1..dim {
            p[n] = p[n - 1] * mean / n as f64;
        }
        p
    }

    #[test]
    fn effective_amplitude_values() {
        let zero = effective_drive_amplitude(
            DriveParams {
                alpha: c(3.0, 1.0),
                t_d: 0.0,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(zero, c(0.0, 0.0));

        let beta = effective_drive_amplitude(
            DriveParams {
                alpha: c(1.0, 0.0),
                t_d: 0.2,
            },
            1.0,
        )
        .unwrap();
        assert!((beta.re - 2.0 * (1.0 - 0.1_f64.exp())).abs() < 1e-15);
        assert!((beta.re + 0.210_342).abs() < 1e-6);

        // γ t_d → 0: β → −α t_d
        let tiny = effective_drive_amplitude(
            DriveParams {
                alpha: c(0.0, 2.0),
                t_d: 1e-3,
            },
            1e-7,
        )
        .unwrap();
        assert!((tiny - c(0.0, -2e-3)).norm() < 1e-10 * 2e-3);

        // both branches agree around the switch
        for &x in &[0.99e-8, 1.01e-8] {
            let b = effective_drive_amplitude(
                DriveParams {
                    alpha: c(1.0, 0.0),
                    t_d: x,
                },
                1.0,
            )
            .unwrap();
            assert!((b.re + x * (1.0 + x / 4.0)).abs() < 1e-22);
        }
        assert!(effective_drive_amplitude(
            DriveParams {
                alpha: c(1.0, 0.0),
                t_d: 1.0
            },
            0.0
        )
        .is_err());
        assert!(effective_drive_amplitude(
            DriveParams {
                alpha: c(1.0, 0.0),
                t_d: 1.0
            },
            -1.0
        )
        .is_err());
    }

    #[test]
    fn decay_params_validation() {
        assert!(DecayParams::new(0.0, 1.0).is_err());
        assert!(DecayParams::new(1.0, -1.0).is_err());
        assert!(DecayParams::new(f64::NAN, 1.0).is_err());
        let d = DecayParams::new(2.0, 0.25).unwrap();
        assert_eq!(d.gamma_t(), 0.5);
        assert!((d.q() - (1.0 - (-0.5_f64).exp())).abs() < 1e-16);
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let vac = PhotonDistribution::vacuum(10).unwrap();
        for &gt in &[0.0, 0.3, 5.0] {
            let out = damp_diagonal(&vac, DecayParams::from_gamma_t(gt).unwrap());
            assert_eq!(out, vac);
        }
    }

    #[test]
    fn single_photon_halves_at_ln2() {
        let p = PhotonDistribution::new(vec![0.0, 1.0, 0.0]).unwrap();
        let out = damp_diagonal(&p, DecayParams::from_gamma_t(2f64.ln()).unwrap());
        assert!((out.probs()[0] - 0.5).abs() < 1e-15);
        assert!((out.probs()[1] - 0.5).abs() < 1e-15);
        assert_eq!(out.probs()[2], 0.0);
    }

    #[test]
    fn poisson_stays_poisson() {
        let dim = 64;
        for &gt in &[0.05, 0.3, 1.7] {
            let p0 = PhotonDistribution::new(poisson(4.0, dim)).unwrap();
            let out = damp_diagonal(&p0, DecayParams::from_gamma_t(gt).unwrap());
            for (a, b) in out.probs().iter().zip(poisson(4.0 * (-gt).exp(), dim)) {
                assert!((a - b).abs() < 1e-12, "γt {gt}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn damp_matches_diagonal_formula_exactly() {
        let cat = cat_density(c(1.5, 0.5), 0.3, 30).unwrap().into_inner();
        let decay = DecayParams::from_gamma_t(0.4).unwrap();
        let full = damp(&cat, decay);
        let diag = damp_diagonal(&number_distribution(&cat).unwrap(), decay);
        for (m, p) in diag.probs().iter().enumerate() {
            assert_eq!(full.elements()[[m, m]].re, *p);
        }
        assert!((full.trace() - cat.trace()).abs() < 1e-12);
        assert_eq!(full.hermiticity_defect(), 0.0);
        assert_eq!(damp(&cat, DecayParams::from_gamma_t(0.0).unwrap()), cat);
    }

    #[test]
    fn coherent_state_is_a_pointer_state() {
        let rho = coherent_density(c(2.0, 0.0), 48).unwrap().into_inner();
        let out = damp(&rho, DecayParams::from_gamma_t(0.3).unwrap());
        let expected = coherent_density(c(2.0 * (-0.15_f64).exp(), 0.0), 48).unwrap();
        assert!(out.frobenius_distance(&expected).unwrap() < 1e-10);
    }

    #[test]
    fn cat_coherences_decay_faster_than_populations() {
        let cat = cat_density(c(2.0, 0.0), 0.0, 32).unwrap().into_inner();
        let decay = DecayParams::from_gamma_t(0.1).unwrap();
        let out = damp(&cat, decay);
        let energy = |r: &DensityMatrix| number_distribution(r).unwrap().mean();
        let coherence_ratio = out.elements()[[0, 4]].norm() / cat.elements()[[0, 4]].norm();
        let energy_ratio = energy(&out) / energy(&cat);
        assert!(
            coherence_ratio < energy_ratio,
            "{coherence_ratio} vs {energy_ratio}"
        );

        let oracle = integrate_master(&cat, c(0.0, 0.0), 1.0, 0.1, 1000).unwrap();
        assert!(out.frobenius_distance(&oracle.state).unwrap() < 1e-8);
    }

    #[test]
    fn integrator_decays_single_photon() {
        let one = DensityMatrix::fock(1, 4).unwrap();
        let sol = integrate_master(&one, c(0.0, 0.0), 1.0, 2f64.ln(), 2000).unwrap();
        assert!((sol.state.elements()[[0, 0]].re - 0.5).abs() < 1e-7);
        assert!((sol.state.elements()[[1, 1]].re - 0.5).abs() < 1e-7);
        assert!(sol.trace_drift < 1e-8);
        assert!(sol.step_warning.is_none());

        let vac = DensityMatrix::vacuum(6).unwrap();
        let sol = integrate_master(&vac, c(0.0, 0.0), 1.0, 3.0, 10).unwrap();
        assert_eq!(sol.state, vac);
        assert!(sol.step_warning.is_some());
        assert!(integrate_master(&vac, c(0.0, 0.0), 1.0, 3.0, 0).is_err());
    }

    #[test]
    fn integrator_confirms_effective_displacement() {
        // Driving the vacuum: the field ends at amplitude β e^{−γt/2}, i.e.
        // D(β) acting before the decay, with β = 2α(1 − e^{γt/2})/γ.
        let dim = 16;
        let vac = DensityMatrix::vacuum(dim).unwrap();
        let sol = integrate_master(&vac, c(1.0, 0.0), 1.0, 0.2, 2000).unwrap();
        let beta = effective_drive_amplitude(
            DriveParams {
                alpha: c(1.0, 0.0),
                t_d: 0.2,
            },
            1.0,
        )
        .unwrap();
        assert!((beta.re + 0.210_342).abs() < 1e-6);
        let predicted = damp(
            &coherent_density(beta, dim).unwrap(),
            DecayParams::new(1.0, 0.2).unwrap(),
        );
        assert!(sol.state.frobenius_distance(&predicted).unwrap() < 1e-6);
        let final_amp = coherent_density(beta * (-0.1_f64).exp(), dim).unwrap();
        assert!(sol.state.frobenius_distance(&final_amp).unwrap() < 1e-6);
        // the opposite sign is far away
        let wrong = coherent_density(-beta * (-0.1_f64).exp(), dim).unwrap();
        assert!(sol.state.frobenius_distance(&wrong).unwrap() > 0.1);
    }

    #[test]
    fn drive_and_decay_limits() {
        let cat = cat_density(c(2.0, 0.0), 0.0, 32).unwrap().into_inner();
        let still = drive_and_decay(
            &cat,
            DriveParams {
                alpha: c(0.0, 0.0),
                t_d: 0.3,
            },
            1.0,
        )
        .unwrap();
        let damped = damp(&cat, DecayParams::new(1.0, 0.3).unwrap());
        assert!(still.frobenius_distance(&damped).unwrap() < 1e-15);

        let none = drive_and_decay(
            &cat,
            DriveParams {
                alpha: c(5.0, 1.0),
                t_d: 0.0,
            },
            1.0,
        )
        .unwrap();
        assert!(none.frobenius_distance(&cat).unwrap() < 1e-15);
    }

    #[test]
    fn drive_and_decay_rejects_overflowing_displacement() {
        let cat = cat_density(c(2.0, 0.0), 0.0, 20).unwrap().into_inner();
        let err = drive_and_decay(
            &cat,
            DriveParams {
                alpha: c(200.0, 0.0),
                t_d: 0.05,
            },
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientTruncation { .. }));
    }

    #[test]
    fn drive_and_decay_matches_integrator_on_a_cat() {
        // The integrator's truncated generator reflects population at the top
        // level, so it runs with headroom and is compared on the 24-level block.
        let cat = cat_density(c(2.0, 0.0), 0.0, 24).unwrap().into_inner();
        let drive = DriveParams {
            alpha: c(10.0, 0.0),
            t_d: 0.05,
        };
        let fast = drive_and_decay(&cat, drive, 1.0).unwrap();
        let slow =
            integrate_master(&cat.embed(32).unwrap(), drive.alpha, 1.0, drive.t_d, 5000).unwrap();
        let dist = fast
            .frobenius_distance(&slow.state.restrict(24).unwrap())
            .unwrap();
        assert!(dist < 1e-6, "frobenius {dist}");
    }
}
