use forge_core::regularization::catalog;
use forge_core::wpinn::{Perturbed, Source, TestSpace, WeakForm};
use forge_core::{jet_forward, measure, Activation, BoxDomain, Family, Forge, MeasurementSpec, MlpNetwork, MultiIndex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_from(seed: u64, act: Activation, dims: &[usize]) -> MlpNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        weights.push((0..w[0] * w[1]).map(|_| rng.random_range(-1.0..1.0)).collect());
        biases.push((0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect());
    }
    MlpNetwork::new(act, dims.to_vec(), weights, biases).unwrap()
}

fn smooth_act() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Tanh), Just(Activation::Sigmoid), Just(Activation::Softplus)]
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=3, prop::collection::vec(1usize..=5, 1..=3)).prop_map(|(d, hidden)| {
        let mut v = vec![d];
        v.extend(hidden);
        v.push(1);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_gradient_matches_central_differences(seed in any::<u64>(), act in smooth_act(), dims in dims(), t in -1.0f64..1.0) {
        let net = net_from(seed, act, &dims);
        let x: Vec<f64> = (0..dims[0]).map(|i| t * (i as f64 + 1.0) / dims[0] as f64).collect();
        let jet = jet_forward(&net, &x, 1, 1e-9).unwrap();
        for (i, g) in jet.gradient().iter().enumerate() {
            let h = 1e-5;
            let mut p = x.clone();
            p[i] += h;
            let up = net.forward(&p).unwrap();
            p[i] -= 2.0 * h;
            let down = net.forward(&p).unwrap();
            let fd = (up - down) / (2.0 * h);
            prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0));
        }
        prop_assert!((jet.value() - net.forward(&x).unwrap()).abs() <= 1e-14);
    }

    #[test]
    fn pure_second_derivative_matches_differences(seed in any::<u64>(), act in smooth_act(), z in -1.0f64..1.0) {
        let net = net_from(seed, act, &[1, 4, 3, 1]);
        let jet = jet_forward(&net, &[z], 2, 1e-9).unwrap();
        let h = 1e-4;
        let f = |x: f64| net.forward(&[x]).unwrap();
        let fd = (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h);
        let d2 = jet.get(&MultiIndex(vec![2])).unwrap();
        prop_assert!((fd - d2).abs() <= 1e-4 * d2.abs().max(1.0));
    }

    #[test]
    fn measurement_is_linear_and_combination_is_exact(
        s1 in any::<u64>(), s2 in any::<u64>(), act in smooth_act(), dims in dims(),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let u = net_from(s1, act, &dims);
        let v = net_from(s2, act, &dims);
        let w = MlpNetwork::linear_combine(&[&u, &v], &[a, b]).unwrap();
        let d = dims[0];
        let points: Vec<Vec<f64>> = (0..3).map(|k| (0..d).map(|i| 0.3 * k as f64 - 0.2 * i as f64).collect()).collect();
        let spec = MeasurementSpec::pointwise(BoxDomain::symmetric(d, 1.0), &points, 2).unwrap();
        let (mu, mv, mw) = (measure(&u, &spec).unwrap(), measure(&v, &spec).unwrap(), measure(&w, &spec).unwrap());
        for k in 0..mw.values.len() {
            let expect = a * mu.values[k] + b * mv.values[k];
            prop_assert!((mw.values[k] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
        for p in &points {
            let expect = a * u.forward(p).unwrap() + b * v.forward(p).unwrap();
            prop_assert!((w.forward(p).unwrap() - expect).abs() <= 1e-14 * (1.0 + expect.abs()) * 4.0);
        }
    }

    #[test]
    fn regularizers_vanish_at_zero_and_are_nonnegative(dim in 1usize..=2, t in prop::collection::vec(-5.0f64..5.0, 6)) {
        for reg in catalog(1e-3) {
            let len = reg.tuple_len(dim);
            prop_assert_eq!(reg.eval(&vec![0.0; len], dim, 0), 0.0, "{}", reg.name());
            let tuple: Vec<f64> = t.iter().cycle().take(len).cloned().collect();
            prop_assert!(reg.eval(&tuple, dim, 0) >= 0.0, "{}", reg.name());
        }
    }

    #[test]
    fn weak_form_is_linear_in_the_trial(s1 in any::<u64>(), s2 in any::<u64>(), lambda in -100.0f64..100.0, n in 1usize..8) {
        let space = TestSpace::uniform(1.0, n, 8).unwrap();
        let form = WeakForm::poisson(Source::Zero);
        let u = net_from(s1, Activation::Tanh, &[1, 5, 1]);
        let phi = net_from(s2, Activation::Tanh, &[1, 5, 1]);
        let combined = form.apply(&Perturbed { base: &u, phi: &phi, lambda }, &space).unwrap();
        let (tu, tp) = (form.apply(&u, &space).unwrap(), form.apply(&phi, &space).unwrap());
        for i in 0..n {
            let expect = tu[i] + lambda * tp[i];
            prop_assert!((combined[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn relu_null_direction_vanishes_on_nodes(
        raw in prop::collection::btree_set(1u32..40, 1..6), wit in 1u32..40,
    ) {
        prop_assume!(!raw.contains(&wit));
        let nodes: Vec<Vec<f64>> = raw.iter().map(|&k| vec![k as f64 / 40.0]).collect();
        let z0 = vec![wit as f64 / 40.0];
        let spec = MeasurementSpec::values(BoxDomain::unit(1), &nodes).unwrap();
        let phi = Forge::new(Family::Relu, 3).null_direction(&spec, &z0).unwrap();
        for x in &nodes {
            prop_assert!(phi.forward(x).unwrap().abs() <= 1e-12);
        }
        prop_assert!((phi.forward(&z0).unwrap() - 1.0).abs() <= 1e-12);
    }
}
