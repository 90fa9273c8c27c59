//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kdiff_core::analytic::{
    argmin_k, canonical_moments, colored_optimal_loss, compute_moments, optimal_loss,
    optimal_loss_poly, DimensionPair, Spectrum,
};
use kdiff_core::geometry::{random_orthonormal_basis, sample_noise, DataSource, ManifoldBasis};
use kdiff_core::kdiff::{
    draw_batch, gradient_check, per_sample_losses, train, KParam, LossMode, Optimizer, ToyNetwork,
    TrainConfig, TrainingBatch, DEFAULT_CLAMP_FLOOR,
};
use kdiff_core::lindyn::{decompose, run_gradient_flow, FlowConfig, LinearModel};
use kdiff_core::rng::{stream, StreamRng};
use kdiff_core::sampler::{
    integrate, run_sampler, DirectVelocity, KDiffField, SampleRun, Solver, VelocityField,
};
use kdiff_core::schedule::{LossTargetSpec, Objective, TargetSpec, TimeMeasure};
use kdiff_core::Matrix;
use kdiff_lab::parallel::par_monte_carlo_loss;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rng(purpose: &str) -> StreamRng {
    stream(20_260_101, purpose)
}

fn basis(big: usize, small: usize, seed: u64) -> ManifoldBasis {
    random_orthonormal_basis(big, small, &mut stream(seed, "acceptance.basis")).unwrap()
}

fn k_objective(k: f64) -> Objective {
    Objective::flow_matching(TargetSpec::k_target(k).unwrap())
}

fn closed_form_argmin() -> Outcome {
    let mut r = rng("acceptance.argmin");
    let mut pairs = vec![(1, 1), (1, 512), (512, 512), (10, 100)];
    while pairs.len() < 50 {
        let big = r.random_range(1..=512usize);
        pairs.push((r.random_range(1..=big), big));
    }
    let mut worst = 0.0f64;
    for (small, big) in pairs {
        let dims = DimensionPair::new(big, small).unwrap();
        let k = argmin_k(|k| optimal_loss_poly(k, dims), 1e-10);
        worst = worst.max((k - big as f64 / (big + small) as f64).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("50 pairs, max |argmin - D/(D+d)| = {worst:.2e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng("acceptance.oracle");
    let ks = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut configs = vec![(2usize, 1usize, 0.5f64)];
    while configs.len() < 20 {
        let big = r.random_range(2..=32usize);
        let small = r.random_range(1..=big);
        configs.push((big, small, ks[r.random_range(0..ks.len())]));
    }
    let mut worst_z = 0.0f64;
    let mut anchor = String::new();
    let mut passed = true;
    for (i, &(big, small, k)) in configs.iter().enumerate() {
        let b = basis(big, small, 100 + i as u64);
        let obj = k_objective(k);
        let m = compute_moments(&obj, 64).unwrap();
        let theory = optimal_loss(&m, b.dims()).unwrap().total;
        let model = LinearModel::equilibrium(&b, &m).unwrap();
        let mc = par_monte_carlo_loss(
            &model,
            &DataSource::Manifold(b),
            &obj,
            1_000_000,
            7 + i as u64,
        )
        .unwrap();
        let z = (mc.estimate - theory).abs() / mc.std_error;
        worst_z = worst_z.max(z);
        passed &= z <= 3.0;
        if i == 0 {
            passed &= (theory - 0.28125).abs() <= 1e-12;
            anchor = format!(
                "D=2 d=1 k=0.5: theory {theory:.6}, MC {:.6} +- {:.1e}",
                mc.estimate, mc.std_error
            );
        }
    }
    outcome(
        passed,
        format!("20 configs x 1e6 samples, max |MC - theory|/SE = {worst_z:.2}; {anchor}"),
    )
}

fn contraction_ratios(dists: &[f64], factor: f64) -> f64 {
    dists
        .windows(2)
        .filter(|w| w[0] > 1e-6)
        .map(|w| (w[1] / w[0] - factor).abs())
        .fold(0.0, f64::max)
}

fn flow_convergence() -> Outcome {
    let b = basis(16, 4, 3);
    let obj = k_objective(1.0);
    let cfg = FlowConfig::exact(0.5, 200);
    let traj = run_gradient_flow(&LinearModel::zeros(16), &b, &obj, &cfg).unwrap();
    let target = b.projector() * 0.75;
    let err = (traj.model.weight() - &target).norm();
    let par: Vec<f64> = traj.records.iter().map(|r| r.dist_par).collect();
    let dev_par = contraction_ratios(&par, 1.0 - 0.5 * 2.0 / 3.0);

    // The perpendicular mode starts at zero from W = 0, so its rate is
    // measured from a random start.
    let w0 = sample_noise(16, 16, &mut stream(3, "acceptance.w0"));
    let traj_r = run_gradient_flow(&LinearModel::new(w0).unwrap(), &b, &obj, &cfg).unwrap();
    let perp: Vec<f64> = traj_r.records.iter().map(|r| r.dist_perp).collect();
    let par_r: Vec<f64> = traj_r.records.iter().map(|r| r.dist_par).collect();
    let dev_perp = contraction_ratios(&perp, 1.0 - 0.5 / 3.0);
    let dev_par = dev_par.max(contraction_ratios(&par_r, 1.0 - 0.5 * 2.0 / 3.0));
    outcome(
        err < 1e-6 && dev_par <= 1e-9 && dev_perp <= 1e-9,
        format!(
            "||W - 0.75 PP^T|| = {err:.2e}, max ratio error par {dev_par:.1e} perp {dev_perp:.1e}"
        ),
    )
}

fn mode_decoupling() -> Outcome {
    let b = basis(12, 3, 4);
    let w0 = sample_noise(12, 12, &mut stream(4, "acceptance.w0"));
    let model = LinearModel::new(w0).unwrap();
    let psi = |_: f64| -0.5;
    let run = |phi: fn(f64) -> f64| {
        let obj = Objective::flow_matching(TargetSpec::custom(phi, psi));
        run_gradient_flow(&model, &b, &obj, &FlowConfig::exact(0.4, 300)).unwrap()
    };
    let a = run(|_| 0.5);
    let c = run(|t| 0.9 - 0.3 * t);
    let same_records = a
        .records
        .iter()
        .zip(&c.records)
        .all(|(x, y)| x.dist_perp.to_bits() == y.dist_perp.to_bits());
    let same_final = a
        .modes
        .perpendicular
        .iter()
        .zip(c.modes.perpendicular.iter())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    let par_differs = a.modes.parallel != c.modes.parallel;
    let split = decompose(&a.model, &b).unwrap();
    let consistent = (split.perpendicular - &a.modes.perpendicular).amax() < 1e-12;
    outcome(
        same_records && same_final && par_differs && consistent,
        format!(
            "{} steps, perpendicular bitwise equal: {}, parallel differs: {par_differs}",
            a.records.len() - 1,
            same_records && same_final
        ),
    )
}

fn flagship_run(big: usize, small: usize, seed: u64) -> f64 {
    let b = basis(big, small, seed);
    let mut net = ToyNetwork::pure_linear_zeros(big);
    let mut kparam = KParam::constant(0.5, true).unwrap();
    let cfg = TrainConfig {
        optimizer: Optimizer::Adam {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
        },
        batch: 256,
        steps: 20_000,
        seed,
        log_every: 1000,
        ..TrainConfig::default()
    };
    let history = train(&mut net, &mut kparam, &DataSource::Manifold(b), &cfg).unwrap();
    history.final_k.representative()
}

fn flagship() -> Outcome {
    let target = 16.0 / 17.0;
    let ks: Vec<f64> = [1, 2, 3].iter().map(|&s| flagship_run(64, 4, s)).collect();
    let dense = flagship_run(8, 8, 1);
    let passed = ks.iter().all(|k| (k - target).abs() <= 0.03) && (dense - 0.5).abs() <= 0.03;
    outcome(
        passed,
        format!(
            "D=64 d=4 final k = {:.4}, {:.4}, {:.4} (16/17 = {target:.4}); D=d=8 final k = {dense:.4}",
            ks[0], ks[1], ks[2]
        ),
    )
}

fn kappa_identity() -> Outcome {
    let mut r = rng("acceptance.kappa");
    let dim = 4;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = 1000;
        let x = sample_noise(dim, n, &mut r);
        let noise = sample_noise(dim, n, &mut r);
        let t: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        // k in [0.1, 0.9] keeps k(1-t) + (1-k)t above 0.1, clear of the clamp.
        let k: Vec<f64> = (0..n).map(|_| r.random_range(0.1..0.9)).collect();
        let u_hat = sample_noise(dim, n, &mut r);
        let batch = TrainingBatch { x, noise, t };
        let ul = per_sample_losses(
            LossMode::ULoss,
            &batch,
            &k,
            &u_hat,
            DEFAULT_CLAMP_FLOOR,
            false,
        );
        let vl = per_sample_losses(
            LossMode::VLossAlg1,
            &batch,
            &k,
            &u_hat,
            DEFAULT_CLAMP_FLOOR,
            false,
        );
        for j in 0..n {
            let den = k[j] * (1.0 - batch.t[j]) + (1.0 - k[j]) * batch.t[j];
            let kappa = 1.0 / den;
            let err = (vl.per_sample[j] - kappa * kappa * ul.per_sample[j]).abs()
                / vl.per_sample[j].abs().max(1.0);
            worst = worst.max(err);
        }
    }
    let v_obj = Objective::flow_matching(TargetSpec::V).with_loss(LossTargetSpec::V);
    let kappa_dev = (0..=1000)
        .map(|i| (v_obj.kappa(i as f64 / 1000.0).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-10 && kappa_dev == 0.0,
        format!(
            "1e4 samples, max rel error {worst:.1e}; V/V kappa max |kappa - 1| = {kappa_dev:.1e}"
        ),
    )
}

fn random_instance(seed: u64) -> (ToyNetwork, KParam, TrainingBatch) {
    let mut r = stream(seed, "acceptance.gradcheck");
    let dim = r.random_range(1..=8);
    let hidden = r.random_range(1..=16);
    let batch = r.random_range(1..=4);
    let net = if r.random::<bool>() {
        ToyNetwork::two_layer(dim, hidden, &mut r).unwrap()
    } else {
        let w = Matrix::from_fn(dim, dim, |_, _| r.random_range(-1.0..1.0));
        ToyNetwork::pure_linear(&w).unwrap()
    };
    let k = if r.random::<bool>() {
        let logits = (0..r.random_range(2..=6))
            .map(|_| r.random_range(-3.0..3.0))
            .collect();
        KParam::binned_logits(logits, true).unwrap()
    } else {
        KParam::constant_logit(r.random_range(-3.0..3.0), true)
    };
    let x = sample_noise(dim, batch, &mut r);
    let b = draw_batch(x, &TimeMeasure::uniform(), &mut r);
    (net, k, b)
}

fn gradient_contract() -> Outcome {
    let mut worst = 0.0f64;
    let mut entries = 0;
    for seed in 0..100u64 {
        let (net, k, batch) = random_instance(seed);
        let mode = if seed % 2 == 0 {
            LossMode::ULoss
        } else {
            LossMode::VLossAlg1
        };
        let g = gradient_check(&net, &k, &batch, mode, DEFAULT_CLAMP_FLOOR, 1e-4, 1e-3).unwrap();
        worst = worst.max(g.max_rel_error);
        entries += g.checked;
    }
    outcome(
        worst <= 1e-5,
        format!("100 instances, {entries} entries, max relative error {worst:.2e}"),
    )
}

fn colored_consistency() -> Outcome {
    let mut r = rng("acceptance.colored");
    let mut worst_k = 0.0f64;
    for _ in 0..10 {
        let dim = r.random_range(1..=16usize);
        let lambdas: Vec<f64> = (0..dim).map(|_| r.random_range(0.0..3.0)).collect();
        let s = Spectrum::new(lambdas).unwrap();
        let k = argmin_k(
            |k| {
                let m = compute_moments(&k_objective(k), 64).unwrap();
                colored_optimal_loss(&s, &m).unwrap().total
            },
            1e-10,
        );
        let expect = dim as f64 / (dim as f64 + s.trace());
        worst_k = worst_k.max((k - expect).abs());
    }
    let mut worst_binary = 0.0f64;
    for (big, small) in [(3, 1), (8, 8), (16, 5)] {
        let dims = DimensionPair::new(big, small).unwrap();
        for i in 0..=10 {
            let m = canonical_moments(i as f64 / 10.0).unwrap();
            let a = colored_optimal_loss(&Spectrum::binary(dims), &m)
                .unwrap()
                .total;
            let b = optimal_loss(&m, dims).unwrap().total;
            worst_binary = worst_binary.max((a - b).abs());
        }
    }
    outcome(
        worst_k <= 1e-6 && worst_binary <= 1e-10,
        format!(
            "10 spectra, max |argmin - D/(D+TrS)| = {worst_k:.2e}; binary vs decomposition {worst_binary:.1e}"
        ),
    )
}

fn convergence_ratio<F: VelocityField>(field: &F, solver: Solver, z0: &Matrix) -> f64 {
    let run = |steps| {
        integrate(
            field,
            &SampleRun::uniform(steps, solver).unwrap(),
            z0.clone(),
        )
        .unwrap()
    };
    let (a, b, c) = (run(16), run(32), run(64));
    (&a - &b).norm() / (&b - &c).norm()
}

fn sampler_orders() -> Outcome {
    let b = basis(6, 2, 9);
    let optimal = |k: f64| {
        let m = canonical_moments(k).unwrap();
        ToyNetwork::pure_linear(LinearModel::equilibrium(&b, &m).unwrap().weight()).unwrap()
    };
    let net = optimal(0.3);
    let kparam = KParam::constant(0.3, false).unwrap();
    let field = KDiffField {
        net: &net,
        kparam: &kparam,
        clamp_floor: DEFAULT_CLAMP_FLOOR,
    };
    let z0 = sample_noise(6, 8, &mut stream(9, "acceptance.z0"));
    let euler = convergence_ratio(&field, Solver::Euler, &z0);
    let heun = convergence_ratio(&field, Solver::Heun, &z0);

    let net_u = optimal(0.5);
    let net_v = ToyNetwork::pure_linear(&(net_u.linear_weight().unwrap() * 2.0)).unwrap();
    let half = KParam::constant(0.5, false).unwrap();
    let kfield = KDiffField {
        net: &net_u,
        kparam: &half,
        clamp_floor: DEFAULT_CLAMP_FLOOR,
    };
    let vfield = DirectVelocity { net: &net_v };
    let mut bitwise = true;
    for solver in [Solver::Euler, Solver::Heun] {
        let run = SampleRun::uniform(50, solver).unwrap();
        let a = run_sampler(&run, &kfield, 6, 64, &mut stream(9, "acceptance.sample")).unwrap();
        let c = run_sampler(&run, &vfield, 6, 64, &mut stream(9, "acceptance.sample")).unwrap();
        bitwise &= a
            .iter()
            .zip(c.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits());
    }
    outcome(
        (1.7..=2.3).contains(&euler) && (3.5..=4.5).contains(&heun) && bitwise,
        format!("Euler ratio {euler:.3}, Heun ratio {heun:.3}, k=0.5 bitwise: {bitwise}"),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("closed-form optimal k", 1, closed_form_argmin),
        ("Monte Carlo loss at equilibrium", 60, oracle_equivalence),
        ("gradient-flow convergence", 1, flow_convergence),
        ("mode decoupling", 1, mode_decoupling),
        ("learned k reproduces D/(D+d)", 300, flagship),
        ("kappa identity", 1, kappa_identity),
        ("gradient contract", 10, gradient_contract),
        ("colored-data consistency", 5, colored_consistency),
        ("sampler orders", 5, sampler_orders),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*budget);
        let passed = out.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "{} {}. {name}: {} [{:.2} s, budget {budget} s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
        );
    }
    if failures == 0 {
        println!("all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("{failures} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
