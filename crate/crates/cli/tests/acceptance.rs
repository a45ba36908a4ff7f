//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p paramprobe-cli --test acceptance`. Exits nonzero if
//! any criterion fails.

use std::process::Command;
use std::time::Instant;

use paramprobe::acrt::{acrt_loss_direct, corrupted_metric, train, OptimizerKind};
use paramprobe::batch::{Batch, Targets};
use paramprobe::corruption::sample_feasible;
use paramprobe::indicator::{
    brute_force_indicator, estimate_indicator_gradient, estimate_indicator_montecarlo,
    estimate_indicator_montecarlo_with, eta_cdf, hutchinson_trace, ks_statistic, sample_eta, EtaDistribution,
    McOptions, OracleMode,
};
use paramprobe::model::{probe_batch, ActivationKind, Architecture, LossSpec, Normalization, QuadraticProbe};
use paramprobe::quad::tanh_sinh;
use paramprobe::scan::{ConstraintTemplate, ScanConfig};
use paramprobe::*;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn l2() -> NormOrder {
    NormOrder::Finite(2.0)
}

/// Tanh MLP trained briefly on two-moons.
fn smooth_mlp(hidden: usize, seed: u64) -> (Network, FlatParams, Dataset) {
    let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 1000, seed)).unwrap();
    let spec = ModelSpec::mlp(vec![2, hidden, hidden, 2], ActivationKind::Tanh, seed);
    let (net, _) = build_model(&spec).unwrap();
    let out = train(&spec, &data, &AcrtConfig::baseline(0.1, 30, 32, seed), None).unwrap();
    (net, out.params, data)
}

fn c1_closed_form() -> Verdict {
    let mut rng = RngState::new(101);
    let mut worst = f64::NEG_INFINITY;
    let mut configs = 0;
    for k in [4usize, 16, 64] {
        for n in [1, k.div_ceil(2), k] {
            for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
                let c = CorruptionConstraint::full(NormOrder::new(p).unwrap(), 0.7, n, k).unwrap();
                let v = rng.gaussian_vec(k);
                let best = solve_constrained_max(&v, &c).unwrap();
                for _ in 0..10_000 {
                    let a = sample_feasible(&c, &mut rng);
                    worst = worst.max(a.dot_dense(&v) - best.linear_value);
                }
                configs += 1;
            }
        }
    }
    verdict(worst <= 1e-9, format!("{configs} configs x 1e4 points, max excess {worst:.3e}"))
}

fn c2_exact_taylor() -> Verdict {
    let model = QuadraticProbe::isotropic(2);
    let params = FlatParams::ungrouped(vec![3.0, 4.0]).unwrap();
    let batch = probe_batch();
    let c = CorruptionConstraint::full(l2(), 0.1, 2, 2).unwrap();
    let grad = estimate_indicator_gradient(&model, &params, &batch, &c).unwrap();
    let oracle = brute_force_indicator(&model, &params, &batch, &c, OracleMode::Grid { resolution: 720 }).unwrap();
    let ratio = oracle.max_delta / grad.delta_loss;
    let pass = (grad.delta_loss - 0.505).abs() < 1e-5 && (oracle.max_delta - 0.505).abs() < 1e-5 && (ratio - 1.0).abs() < 1e-4;
    verdict(pass, format!("grad dL {:.9}, oracle {:.9}, ratio {ratio:.9}", grad.delta_loss, oracle.max_delta))
}

fn c3_eta_distribution() -> Verdict {
    let mut rng = RngState::new(303);
    let mut worst_ks = 0.0f64;
    for k in [2usize, 3, 10, 100] {
        let mut s = sample_eta(k, 100_000, &mut rng).unwrap();
        worst_ks = worst_ks.max(ks_statistic(&mut s, |x| eta_cdf(x, k).unwrap()));
    }
    let mut worst_mass = 0.0f64;
    for k in [2usize, 3, 4, 5, 10, 50, 100, 250, 500, 1000] {
        let d = EtaDistribution::new(k).unwrap();
        let mass = tanh_sinh(|x| d.density(x).unwrap().value(), 0.0, 1.0, 1e-12).unwrap().value;
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    let d3 = EtaDistribution::new(3).unwrap();
    let flat = (0..=1000).map(|i| (d3.density(i as f64 / 1000.0).unwrap().value() - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        worst_ks < 0.01 && worst_mass < 1e-6 && flat < 1e-9,
        format!("max KS {worst_ks:.4}, max |mass-1| {worst_mass:.2e}, k=3 max |p-1| {flat:.2e}"),
    )
}

fn c4_expectation() -> Verdict {
    let eps = 0.1;
    let model = QuadraticProbe::isotropic(2);
    let params = FlatParams::ungrouped(vec![3.0, 4.0]).unwrap();
    let c = CorruptionConstraint::full(l2(), eps, 2, 2).unwrap();
    let q = estimate_indicator_montecarlo(&model, &params, &probe_batch(), &c, 100_000, &mut RngState::new(404)).unwrap();
    let z = (q.mean_delta - eps * eps / 2.0).abs() / q.std_error;

    let (net, params, data) = smooth_mlp(16, 1);
    let k = params.len();
    let eps = 1e-2;
    let trace = hutchinson_trace(&net, &params, &data.train, 400, &mut RngState::new(405)).unwrap();
    let c = CorruptionConstraint::full(l2(), eps, k, k).unwrap();
    let opts = McOptions { jobs: 4, antithetic: true };
    let mc = estimate_indicator_montecarlo_with(&net, &params, &data.train, &c, 4000, &mut RngState::new(406), opts).unwrap();
    let predicted = trace.trace * eps * eps / (2.0 * k as f64);
    let rel = (mc.mean_delta / predicted - 1.0).abs();
    verdict(
        z < 3.0 && rel < 0.25,
        format!("quadratic |mean-eps^2/2| = {z:.2} SE; MLP k={k} mean {:.4e} vs trace {predicted:.4e} (rel {rel:.3})", mc.mean_delta),
    )
}

fn c5_random_gap() -> Verdict {
    let (net, params, data) = smooth_mlp(64, 2);
    let k = params.len();
    let c = CorruptionConstraint::full(l2(), 5e-4, k, k).unwrap();
    let grad = estimate_indicator_gradient(&net, &params, &data.train, &c).unwrap();
    let mc = estimate_indicator_montecarlo(&net, &params, &data.train, &c, 1000, &mut RngState::new(505)).unwrap();
    let alpha = mc.alpha(0.95).unwrap();
    let ratio = grad.delta_loss / alpha;
    verdict(k >= 1000 && ratio >= 20.0, format!("k={k}, grad dL {:.4e}, alpha(0.95) {alpha:.4e}, ratio {ratio:.1}", grad.delta_loss))
}

fn c6_convergence() -> Verdict {
    let (net, params, data) = smooth_mlp(16, 1);
    let g = eval_grad(&net, params.values(), &data.train).unwrap().grad;
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &j| g[j].abs().total_cmp(&g[i].abs()));
    let mut mask = vec![order[0], order[1]];
    mask.sort_unstable();
    let mut devs = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let c = CorruptionConstraint::new(l2(), eps, 2, mask.clone()).unwrap();
        let grad = estimate_indicator_gradient(&net, &params, &data.train, &c).unwrap();
        let oracle = brute_force_indicator(&net, &params, &data.train, &c, OracleMode::Grid { resolution: 360 }).unwrap();
        devs.push((oracle.max_delta / grad.delta_loss - 1.0).abs());
    }
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = devs.iter().map(|d| format!("{d:.2e}")).collect();
    verdict(decreasing && devs[3] < 0.05, format!("|oracle/grad - 1| at eps 1e-1..1e-4: {}", shown.join(", ")))
}

fn c7_acrt_efficacy() -> Verdict {
    let eval_eps = [0.2, 0.5, 1.0];
    let mut pass = true;
    let mut lines = Vec::new();
    for kind in [DatasetKind::TwoMoons, DatasetKind::Spiral] {
        let mut clean = [0.0; 2];
        let mut corrupted = [[0.0; 2]; 3];
        for seed in 0..5u64 {
            let data = load_dataset(&DatasetSource::synthetic(kind, 1000, seed)).unwrap();
            let spec = ModelSpec::mlp(vec![2, 32, 32, data.classes.unwrap()], ActivationKind::Relu, seed);
            let (net, _) = build_model(&spec).unwrap();
            let mut base = AcrtConfig::baseline(0.01, 200, 32, seed);
            base.optimizer = OptimizerKind::AdamLite;
            let robust = base.direct(0.5, 0.3);
            for (j, cfg) in [&base, &robust].into_iter().enumerate() {
                let params = train(&spec, &data, cfg, None).unwrap().params;
                clean[j] += corrupted_metric(&net, &params, &data, l2(), 0.0, Split::Eval).unwrap() / 5.0;
                for (i, &e) in eval_eps.iter().enumerate() {
                    corrupted[i][j] += corrupted_metric(&net, &params, &data, l2(), e, Split::Eval).unwrap() / 5.0;
                }
            }
        }
        pass &= clean[1] >= clean[0] - 0.01 && corrupted.iter().all(|m| m[1] > m[0]);
        let cells: Vec<String> = eval_eps.iter().zip(&corrupted).map(|(e, m)| format!("eps {e}: {:.3}/{:.3}", m[0], m[1])).collect();
        lines.push(format!("{kind:?} clean {:.3}/{:.3}, {}", clean[0], clean[1], cells.join(", ")));
    }
    verdict(pass, format!("baseline/acrt mean accuracy; {}", lines.join("; ")))
}

fn c8_first_order_equivalence() -> Verdict {
    let (net, params, data) = smooth_mlp(16, 1);
    let k = params.len();
    let alpha = 0.5;
    let mut slopes = Vec::new();
    for p in [NormOrder::Finite(1.0), l2(), NormOrder::Infinity] {
        let pts: Vec<(f64, f64)> = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&eps| {
                let c = CorruptionConstraint::full(p, eps, k, k).unwrap();
                let s = acrt_loss_direct(&net, params.values(), &data.train, alpha, &c).unwrap();
                let residual = (s.objective - (s.clean_loss + alpha * s.first_order.unwrap())).abs();
                (eps.ln(), residual.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        slopes.push((p, sxy / sxx));
    }
    let pass = slopes.iter().all(|(_, s)| *s >= 1.8);
    let shown: Vec<String> = slopes.iter().map(|(p, s)| format!("p={p}: {s:.3}")).collect();
    verdict(pass, format!("log-log slope over eps 1e-5..1e-1: {}", shown.join(", ")))
}

fn zoo_case(arch: &str, seed: u64) -> (Network, Vec<f64>, Batch) {
    let mut rng = RngState::new(seed.wrapping_mul(7919) + 9);
    let rows = 6;
    let base = |sizes: Vec<usize>, act| ModelSpec::mlp(sizes, act, seed);
    let (spec, inputs, targets) = match arch {
        "mlp-tanh" => (base(vec![3, 5, 4, 3], ActivationKind::Tanh), vec![rows, 3], Targets::Classes((0..rows).map(|i| i % 3).collect())),
        "mlp-relu" => (base(vec![3, 5, 4, 3], ActivationKind::Relu), vec![rows, 3], Targets::Classes((0..rows).map(|i| i % 3).collect())),
        "mlp-softplus-norm" => (
            base(vec![3, 5, 4, 2], ActivationKind::Softplus).with_normalization(Normalization::PerLayerScaleBias),
            vec![rows, 3],
            Targets::Classes((0..rows).map(|i| i % 2).collect()),
        ),
        "mlp-mse" => {
            let values = Tensor::new(vec![rows, 2], rng.gaussian_vec(rows * 2)).unwrap();
            (ModelSpec { loss: LossSpec::Mse, ..base(vec![3, 6, 2], ActivationKind::Tanh) }, vec![rows, 3], Targets::Values(values))
        }
        "convnet-small" => (
            ModelSpec { architecture: Architecture::ConvnetSmall, ..base(vec![2, 3, 3], ActivationKind::Tanh) },
            vec![rows, 2, 4, 4],
            Targets::Classes((0..rows).map(|i| i % 3).collect()),
        ),
        "linear-softmax" => (
            ModelSpec { architecture: Architecture::LinearSoftmax, ..base(vec![4, 3], ActivationKind::Tanh) },
            vec![rows, 4],
            Targets::Classes((0..rows).map(|i| i % 3).collect()),
        ),
        other => panic!("unknown zoo case {other}"),
    };
    let (net, params) = build_model(&spec).unwrap();
    let len = inputs.iter().product();
    let batch = Batch::new(Tensor::new(inputs, rng.gaussian_vec(len)).unwrap(), targets).unwrap();
    // Move off the initialization so biases and scales are not all at their defaults.
    let values: Vec<f64> = params.values().iter().map(|v| v + 0.3 * rng.gaussian()).collect();
    (net, values, batch)
}

fn c9_engine() -> Verdict {
    let archs = ["mlp-tanh", "mlp-relu", "mlp-softplus-norm", "mlp-mse", "convnet-small", "linear-softmax"];
    let mut worst = (0.0f64, "", 0u64);
    for arch in archs {
        for seed in 0..20 {
            let (net, w, batch) = zoo_case(arch, seed);
            let exact = eval_grad(&net, &w, &batch).unwrap().grad;
            let fd = finite_diff_grad(&net, &w, &batch, 1e-6).unwrap();
            let err = max_relative_error(&exact, &fd, 1e-6);
            if err > worst.0 {
                worst = (err, arch, seed);
            }
        }
    }
    verdict(worst.0 < 1e-3, format!("{} models x 20 seeds, max rel error {:.2e} ({} seed {})", archs.len(), worst.0, worst.1, worst.2))
}

fn c10_plumbing() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let data = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 300, 10)).unwrap();
    let spec = ModelSpec::mlp(vec![2, 8, 8, 2], ActivationKind::Tanh, 10);
    let (net, _) = build_model(&spec).unwrap();
    let params = train(&spec, &data, &AcrtConfig::baseline(0.1, 5, 32, 10), None).unwrap().params;
    let path = dir.path().join("m.ck");
    save_checkpoint(&path, &spec, &params).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let bits = |p: &FlatParams| p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let round_trip = bits(&back.params) == bits(&params) && back.header.model_spec == spec;

    let before = bits(&params);
    let cfg = ScanConfig {
        axis: GroupAxis::Kind,
        eps_list: vec![1e-2, 1e-1, 1.0],
        template: ConstraintTemplate { p: l2(), n: None },
        grad_split: Split::Train,
    };
    scan(&net, &params, &data, &cfg).unwrap();
    let isolated = bits(&params) == before;

    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_probe"))
            .current_dir(dir.path())
            .env_remove("PROBE_SEED")
            .args(["scan", "--seed", "11", "--checkpoint", "m.ck", "--points", "300", "--eps", "0.01,0.1,1"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let first = run();
    let deterministic = !first.is_empty() && first == run();
    verdict(
        round_trip && isolated && deterministic,
        format!("checkpoint round-trip {round_trip}, scan isolation {isolated}, CLI byte-identical {deterministic}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form optimality", c1_closed_form),
        ("exact Taylor case", c2_exact_taylor),
        ("eta distribution", c3_eta_distribution),
        ("random-corruption expectation", c4_expectation),
        ("random-vs-gradient gap", c5_random_gap),
        ("gradient estimate convergence", c6_convergence),
        ("robust training efficacy", c7_acrt_efficacy),
        ("first-order equivalence", c8_first_order_equivalence),
        ("engine correctness", c9_engine),
        ("plumbing", c10_plumbing),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "{} criterion {:>2} [{name}] {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
