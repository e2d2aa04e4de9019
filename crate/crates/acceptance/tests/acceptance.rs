//! Acceptance suite: one line per criterion with the measured figure and the
//! tolerance it is held to. Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use cavity_wigner::channel::{
    damp, damp_diagonal, drive_and_decay, integrate_master, DecayParams, DriveParams,
};
use cavity_wigner::fockspace::{
    cat_density, coherent_vector, displacement_margin, DensityMatrix, PhotonDistribution,
};
use cavity_wigner::numeric::CompensatedSum;
use cavity_wigner::probe::{invert_trace, sample_trace, InversionTrace, ProbeConfig, ProbeKernel};
use cavity_wigner::quasiprob::{
    direct_grid, series_weight, wigner_direct, GridAxes, QuasiprobGrid,
};
use cavity_wigner::recon::{InitialState, Path, ReconPlan, Reconstructor};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, outcome: &Outcome) {
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{verdict}] {name}: {}", outcome.detail);
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

fn cat_plan(t_meas: f64) -> ReconPlan {
    ReconPlan {
        state: InitialState::Cat {
            alpha: [2.0, 0.0],
            phi: 0.0,
        },
        gamma: 1.0,
        t_d: 0.01,
        t_meas,
        axes: GridAxes::square(-3.5, 3.5, 0.25).unwrap(),
        s: 0.0,
        path: Path::Analytic,
        probe: ProbeConfig::new(1000.0, 256),
        dim: 64,
    }
}

fn noisy_plan(seed: u64) -> ReconPlan {
    let mut plan = cat_plan(0.1);
    plan.path = Path::Probe;
    plan.probe.noise_sigma = 0.01;
    plan.probe.noise_budget = Some(NOISE_BUDGET);
    plan.probe.seed = seed;
    plan
}

/// Standard deviation allowed for the noise carried into each reconstructed
/// value, fixed before looking at any outcome.
const NOISE_BUDGET: f64 = 0.02;

fn grid_bits(g: &QuasiprobGrid) -> Vec<u64> {
    g.values.iter().map(|v| v.to_bits()).collect()
}

fn cat_reference() -> (DensityMatrix, QuasiprobGrid) {
    let plan = cat_plan(0.1);
    let rho0 = plan.state.density(plan.dim).unwrap();
    let reference = direct_grid(&rho0, &plan.axes, 0.0);
    assert!(reference.failures.is_empty(), "{:?}", reference.failures);
    (rho0, reference)
}

fn criterion_1(reference: &QuasiprobGrid) -> (Outcome, QuasiprobGrid) {
    let plan = cat_plan(0.1);
    let start = Instant::now();
    let grid = single_threaded(|| Reconstructor::new(&plan).unwrap().grid(0));
    let secs = start.elapsed().as_secs_f64();
    let err = grid.max_abs_diff(reference);
    let pass = grid.failures.is_empty() && err <= 1e-9 && secs < 60.0;
    let detail = format!(
        "max |W_rec - W_direct| = {err:.3e} (tol 1e-9) over {} points, {} failures, single-threaded {secs:.1} s (target < 60 s)",
        grid.values.len(),
        grid.failures.len()
    );
    (Outcome { pass, detail }, grid)
}

fn criterion_2(at_01: &QuasiprobGrid) -> Outcome {
    let g05 = Reconstructor::new(&cat_plan(0.05)).unwrap().grid(0);
    let g20 = Reconstructor::new(&cat_plan(0.2)).unwrap().grid(0);
    let mut spread = 0.0_f64;
    for k in 0..at_01.values.len() {
        let vals = [g05.values[k], at_01.values[k], g20.values[k]];
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
    }
    let failures = g05.failures.len() + g20.failures.len();
    Outcome {
        pass: failures == 0 && spread <= 1e-9,
        detail: format!("max pointwise spread over gamma*t_meas in {{0.05, 0.1, 0.2}} = {spread:.3e} (tol 1e-9)"),
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    let mut worst_case = (0, 0.0);
    let mut over = 0;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=64);
        let gt: f64 = rng.gen_range(0.0..=0.5);
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let p0 = PhotonDistribution::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let pt = damp_diagonal(&p0, DecayParams::from_gamma_t(gt).unwrap());
        let chi = series_weight(0.0, gt).unwrap().value;
        let mut lhs = CompensatedSum::new();
        let mut power = 1.0;
        for p in pt.probs() {
            lhs.add(power * p);
            power *= chi;
        }
        let rhs: CompensatedSum = p0
            .probs()
            .iter()
            .enumerate()
            .map(|(n, p)| if n % 2 == 0 { *p } else { -p })
            .collect();
        let err = (lhs.value() - rhs.value()).abs();
        if err > 1e-10 {
            over += 1;
        }
        if err > worst {
            worst = err;
            worst_case = (dim, gt);
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!(
            "max |sum chi^m P_m(t) - sum (-1)^n P_n(0)| = {worst:.3e} (tol 1e-10) at dim {} gamma*t {:.3}; {over}/1000 cases above tol",
            worst_case.0, worst_case.1
        ),
    }
}

fn criterion_4() -> Outcome {
    let dim = 24;
    let rho0 = cat_density(C64::new(2.0, 0.0), 0.0, dim)
        .unwrap()
        .into_inner();
    let alpha = C64::new(10.0, 0.0);
    let drive = DriveParams { alpha, t_d: 0.05 };
    let closed = drive_and_decay(&rho0, drive, 1.0).unwrap();
    // The integrator cuts the ladder operators at its own truncation, so it
    // runs with headroom and is compared on the 24-level block.
    let headroom = dim + displacement_margin(C64::new(0.0, 0.5));
    let oracle = integrate_master(&rho0.embed(headroom).unwrap(), alpha, 1.0, 0.05, 5000).unwrap();
    let dist = closed
        .frobenius_distance(&oracle.state.restrict(dim).unwrap())
        .unwrap();
    let literal = integrate_master(&rho0, alpha, 1.0, 0.05, 5000).unwrap();
    let literal_dist = closed.frobenius_distance(&literal.state).unwrap();
    Outcome {
        pass: dist <= 1e-6,
        detail: format!(
            "Frobenius distance = {dist:.3e} (tol 1e-6) with integrator at dim {headroom} restricted to {dim}; same-dim integrator gives {literal_dist:.3e}, trace drift {:.1e}",
            oracle.trace_drift
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut probs = vec![0.0; 64];
    probs[0] = (-4.0_f64).exp();
    for n in 1..64 {
        probs[n] = probs[n - 1] * 4.0 / n as f64;
    }
    let truth = PhotonDistribution::new(probs).unwrap();
    let cfg = ProbeConfig::new(1.0, 1024);
    let back = invert_trace(&sample_trace(&truth, &cfg, 0).unwrap(), 1.0, 24).unwrap();
    let round_trip = (0..=24)
        .map(|m| (back.probs()[m] - truth.probs()[m]).abs())
        .fold(0.0, f64::max);

    let cfg = ProbeConfig::new(1.0, 2048);
    let kernel = ProbeKernel::new(&cfg, 33).unwrap();
    let mut ortho = 0.0_f64;
    for n in 0..=32 {
        let values = cfg
            .taus()
            .iter()
            .map(|t| ((2 * n + 3) as f64 * t).cos())
            .collect();
        let trace = InversionTrace {
            taus: cfg.taus(),
            values,
        };
        let row = kernel.invert(&trace, 32, f64::INFINITY).unwrap();
        for (m, v) in row.probs().iter().enumerate() {
            ortho = ortho.max((v - if m == n { 1.0 } else { 0.0 }).abs());
        }
    }
    Outcome {
        pass: round_trip <= 1e-5 && ortho <= 1e-8,
        detail: format!(
            "Poisson(4) round trip max error = {round_trip:.3e} (tol 1e-5); orthogonality max deviation = {ortho:.3e} (tol 1e-8)"
        ),
    }
}

fn criterion_6(reference: &QuasiprobGrid) -> (Outcome, QuasiprobGrid) {
    let seeds = 100;
    let base = Reconstructor::new(&noisy_plan(0)).unwrap();
    let kernel = base.kernel().unwrap();
    let axes = &base.plan().axes;
    // Noise-free statistics and traces do not depend on the seed.
    let clean: Vec<(InversionTrace, usize)> = {
        use rayon::prelude::*;
        (0..axes.len())
            .into_par_iter()
            .map(|k| {
                let p = base.measured_distribution(axes.point(k)).unwrap();
                (kernel.clean_trace(&p).unwrap(), p.dim())
            })
            .collect()
    };
    let mut errors = vec![Vec::with_capacity(seeds); axes.len()];
    let mut negative_seeds = 0;
    let mut mins = Vec::with_capacity(seeds);
    let mut failures = 0;
    let mut cutoffs = std::collections::BTreeSet::new();
    for seed in 0..seeds as u64 {
        let mut grid_min = f64::INFINITY;
        for (k, (trace, dim)) in clean.iter().enumerate() {
            cutoffs.insert(base.probe_cutoff(*dim));
            let value = base
                .estimate_from_clean(trace, *dim, seed, k as u64)
                .and_then(|est| base.series(&est, true));
            match value {
                Ok(v) => {
                    errors[k].push((v - reference.values[k]).abs());
                    grid_min = grid_min.min(v);
                }
                Err(_) => {
                    failures += 1;
                    errors[k].push(f64::INFINITY);
                }
            }
        }
        if grid_min < -0.1 {
            negative_seeds += 1;
        }
        mins.push(grid_min);
    }
    let mut worst_p95 = 0.0_f64;
    let mut worst_point = 0;
    for (k, e) in errors.iter_mut().enumerate() {
        e.sort_by(f64::total_cmp);
        let p95 = e[(0.95 * seeds as f64).ceil() as usize - 1];
        if p95 > worst_p95 {
            worst_p95 = p95;
            worst_point = k;
        }
    }
    let target = axes.x.iter().position(|&x| x == 0.0).unwrap()
        + axes.x.len() * axes.y.iter().position(|&y| y == 2.0).unwrap();
    let p95_at_target = errors[target][(0.95 * seeds as f64).ceil() as usize - 1];
    mins.sort_by(f64::total_cmp);
    let pass = failures == 0 && worst_p95 <= 0.05 && negative_seeds == seeds;
    let detail = format!(
        "worst per-point 95th-percentile error = {worst_p95:.3e} at beta = {} (tol 0.05); at beta = (0,2): {p95_at_target:.3e}; grid min < -0.1 in {negative_seeds}/{seeds} seeds (median min {:.3}); cutoffs {:?}; {failures} point failures",
        axes.point(worst_point),
        mins[seeds / 2],
        cutoffs
    );
    let one = Reconstructor::new(&noisy_plan(0)).unwrap().grid(0);
    (Outcome { pass, detail }, one)
}

fn criterion_7(rho0: &DensityMatrix) -> Outcome {
    let mut plan = cat_plan(0.1);
    plan.s = -1.0;
    plan.axes = GridAxes::square(-2.0, 2.0, 2.0).unwrap();
    let grid = Reconstructor::new(&plan).unwrap().grid(0);
    let big = rho0.embed(128).unwrap();
    let mut worst = 0.0_f64;
    for k in 0..plan.axes.len() {
        let beta = plan.axes.point(k);
        let v = coherent_vector(beta, 128).unwrap();
        let a = v.amplitudes();
        let mut overlap = C64::new(0.0, 0.0);
        for m in 0..128 {
            for n in 0..128 {
                overlap += a[m].conj() * big.elements()[[m, n]] * a[n];
            }
        }
        worst = worst.max((grid.values[k] - overlap.re / PI).abs());
    }
    Outcome {
        pass: grid.failures.is_empty() && worst <= 1e-9,
        detail: format!(
            "max |F(beta; -1) - <beta|rho|beta>/pi| = {worst:.3e} (tol 1e-9) on 9 points"
        ),
    }
}

fn criterion_8(rho0: &DensityMatrix) -> Outcome {
    let decayed = damp(rho0, DecayParams::from_gamma_t(0.1).unwrap());
    let fringe_peak = |rho: &DensityMatrix| {
        (0..=100)
            .map(|i| wigner_direct(rho, C64::new(0.0, -0.5 + 0.01 * i as f64)).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let ratio = fringe_peak(&decayed) / fringe_peak(rho0);
    let expected = (-8.0 * (1.0 - (-0.1_f64).exp())).exp();
    Outcome {
        pass: (ratio - expected).abs() <= 0.01,
        detail: format!(
            "central fringe ratio at gamma*t = 0.1: {ratio:.4} vs {expected:.4} (tol 0.01)"
        ),
    }
}

fn criterion_9(analytic: &QuasiprobGrid, noisy: &QuasiprobGrid) -> Outcome {
    let mut identical = true;
    let mut runs = Vec::new();
    for threads in [1, 4, 8] {
        let a = with_threads(threads, || {
            Reconstructor::new(&cat_plan(0.1)).unwrap().grid(0)
        });
        let b = with_threads(threads, || {
            Reconstructor::new(&noisy_plan(0)).unwrap().grid(0)
        });
        let same = grid_bits(&a) == grid_bits(analytic) && grid_bits(&b) == grid_bits(noisy);
        identical &= same;
        runs.push(format!(
            "{threads}:{}",
            if same { "identical" } else { "DIFFERENT" }
        ));
    }
    Outcome {
        pass: identical,
        detail: format!(
            "criterion 1 and 6 grids bitwise across thread counts [{}]",
            runs.join(", ")
        ),
    }
}

fn main() {
    let (rho0, reference) = cat_reference();
    let mut all = true;
    let mut record = |id: usize, name: &str, outcome: Outcome| {
        report(id, name, &outcome);
        all &= outcome.pass;
    };
    let (o1, analytic) = criterion_1(&reference);
    record(1, "cat reconstruction vs direct Wigner", o1);
    record(2, "measurement-time invariance", criterion_2(&analytic));
    record(3, "telescoping identity", criterion_3());
    record(4, "drive factorization vs master equation", criterion_4());
    record(5, "probe round trip and orthogonality", criterion_5());
    let (o6, noisy) = criterion_6(&reference);
    record(6, "noisy probe reconstruction", o6);
    record(7, "s = -1 equals Q function", criterion_7(&rho0));
    record(
        8,
        "decoherence of the unweighted fringe",
        criterion_8(&rho0),
    );
    record(
        9,
        "determinism across thread counts",
        criterion_9(&analytic, &noisy),
    );
    if !all {
        std::process::exit(1);
    }
}
