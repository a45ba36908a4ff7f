use paramprobe::model::ActivationKind;
use paramprobe::*;
use proptest::prelude::*;

fn fixed_batch(rows: usize, d: usize, classes: usize) -> Batch {
    let mut rng = RngState::new(4242);
    let x = Tensor::new(vec![rows, d], rng.gaussian_vec(rows * d)).unwrap();
    Batch::new(x, Targets::Classes((0..rows).map(|i| (i * 7) % classes).collect())).unwrap()
}

/// Straight-line forward pass of a tanh MLP with softmax cross-entropy,
/// reading weights `[fan_in, fan_out]` row-major followed by the bias.
fn reference_loss(sizes: &[usize], w: &[f64], batch: &Batch) -> f64 {
    let classes = batch.classes().unwrap();
    let mut total = 0.0;
    for (r, &t) in classes.iter().enumerate() {
        let mut h = batch.inputs.row(r).to_vec();
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (fi, fo) = (sizes[l], sizes[l + 1]);
            let weight = &w[off..off + fi * fo];
            let bias = &w[off + fi * fo..off + fi * fo + fo];
            off += fi * fo + fo;
            let mut z = vec![0.0; fo];
            for p in 0..fi {
                for j in 0..fo {
                    z[j] += h[p] * weight[p * fo + j];
                }
            }
            for j in 0..fo {
                z[j] += bias[j];
            }
            if l + 2 < sizes.len() {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            h = z;
        }
        let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s = h.iter().fold(0.0, |acc, v| acc + (v - max).exp());
        total += max + s.ln() - h[t];
    }
    total / classes.len() as f64
}

#[test]
fn forward_matches_independent_implementation_exactly() {
    let sizes = [4, 6, 5, 3];
    let (net, params) = build_model(&ModelSpec::mlp(sizes.to_vec(), ActivationKind::Tanh, 42)).unwrap();
    let batch = fixed_batch(9, 4, 3);
    let engine = eval_loss(&net, params.values(), &batch).unwrap();
    assert_eq!(engine.to_bits(), reference_loss(&sizes, params.values(), &batch).to_bits());
}

#[test]
fn gradient_matches_central_differences_seed_42() {
    let (net, params) = build_model(&ModelSpec::mlp(vec![4, 6, 5, 3], ActivationKind::Tanh, 42)).unwrap();
    let batch = fixed_batch(9, 4, 3);
    let exact = eval_grad(&net, params.values(), &batch).unwrap().grad;
    let fd = finite_diff_grad(&net, params.values(), &batch, 1e-3).unwrap();
    let err = max_relative_error(&exact, &fd, 1e-6);
    assert!(err < 1e-3, "max relative error {err}");
    // and the other way round: differences of the exact gradient recover the loss change
    let step: Vec<f64> = exact.iter().map(|g| 1e-4 * g).collect();
    let moved: Vec<f64> = params.values().iter().zip(&step).map(|(w, s)| w + s).collect();
    let dl = eval_loss(&net, &moved, &batch).unwrap() - eval_loss(&net, params.values(), &batch).unwrap();
    let predicted: f64 = exact.iter().zip(&step).map(|(g, s)| g * s).sum();
    assert!((dl / predicted - 1.0).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_check_on_random_mlps(seed in 0u64..10_000, hidden in 1usize..6, softplus in any::<bool>()) {
        let act = if softplus { ActivationKind::Softplus } else { ActivationKind::Tanh };
        let (net, params) = build_model(&ModelSpec::mlp(vec![3, hidden, 2], act, seed)).unwrap();
        let batch = fixed_batch(5, 3, 2);
        let exact = eval_grad(&net, params.values(), &batch).unwrap().grad;
        let fd = finite_diff_grad(&net, params.values(), &batch, 1e-5).unwrap();
        prop_assert!(max_relative_error(&exact, &fd, 1e-6) < 1e-4);
    }
}
