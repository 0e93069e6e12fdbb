use dual_align::diagnostics::{discriminator_accuracy, RunStatus, RunTrace, TraceRow, ClassifyParams};
use dual_align::kernels::{build_gram, KernelSpec};
use dual_align::matchers::{apply, backprop_params, MatcherParams};
use dual_align::objectives::dual::project_balanced;
use dual_align::objectives::{
    dual_distance, mmd_distance, primal_distance, DualState, MmdNormalization, PrimalDiscriminator,
};
use dual_align::optimizers::{run_dual_alignment, BalanceMode, DualSettings, OptimizerConfig};
use dual_align::pointset::{generate, make_labeled_union, Domain, GeneratorSpec, PointSet};
use proptest::prelude::*;

fn points(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
}

fn set(p: Vec<Vec<f64>>, tag: Domain) -> PointSet {
    PointSet::new(p, tag).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>(), n in 1usize..50) {
        let spec = GeneratorSpec::gaussian_blob(vec![1.0, -1.0], vec![vec![2.0, 0.3], vec![0.3, 1.0]], n, seed);
        prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn balanced_projection_lands_in_the_constraint_set(
        alpha in prop::collection::vec(-1.0..2.0f64, 2..20),
        split in 1usize..19,
    ) {
        let na = split.min(alpha.len() - 1);
        let mut s = DualState::uniform(alpha.len(), 1.0).with_alpha(alpha);
        project_balanced(&mut s, na);
        prop_assert!(s.balance_gap(na).abs() < 1e-9);
        prop_assert!(s.alpha.iter().all(|a| (s.clamp_eps..=1.0 - s.clamp_eps).contains(a)));
    }

    #[test]
    fn weak_duality(
        a in points(5, 2), b in points(6, 2),
        raw in prop::collection::vec(0.05..0.95f64, 11),
        w in prop::collection::vec(-2.0..2.0f64, 2), bias in -2.0..2.0f64,
        lambda in 0.1..10.0f64,
    ) {
        // Any balanced alpha bounds the primal objective of any discriminator from above.
        let c = make_labeled_union(&set(a, Domain::SourceA), &set(b, Domain::TargetB)).unwrap();
        let mut s = DualState::uniform(11, lambda).with_alpha(raw);
        project_balanced(&mut s, 5);
        let dual = dual_distance(&s, &build_gram(&KernelSpec::Linear, &c)).unwrap();
        let primal = primal_distance(&PrimalDiscriminator { w, b: bias, lambda }, &c).unwrap();
        prop_assert!(dual >= primal - 1e-9, "dual {} < primal {}", dual, primal);
    }

    #[test]
    fn mmd_is_symmetric_and_nonnegative(a in points(4, 3), b in points(7, 3), bw in 0.3..4.0f64) {
        let (a, b) = (set(a, Domain::SourceA), set(b, Domain::TargetB));
        for k in [KernelSpec::Linear, KernelSpec::gaussian(bw).unwrap()] {
            let ab = mmd_distance(&k, &a, &b, MmdNormalization::Standard).unwrap();
            let ba = mmd_distance(&k, &b, &a, MmdNormalization::Standard).unwrap();
            prop_assert!(ab >= -1e-12);
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn backprop_is_linear_in_the_point_gradients(
        b in points(5, 2), g1 in points(5, 2), g2 in points(5, 2), s in -3.0..3.0f64, affine in any::<bool>(),
    ) {
        let b = set(b, Domain::TargetB);
        let theta = if affine { MatcherParams::affine_identity(2) } else { MatcherParams::free_points(5, 2) };
        let combo: Vec<Vec<f64>> = g1.iter().zip(&g2).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect()).collect();
        let lhs = backprop_params(&theta, &b, &combo).unwrap().to_flat();
        let r1 = backprop_params(&theta, &b, &g1).unwrap().to_flat();
        let r2 = backprop_params(&theta, &b, &g2).unwrap().to_flat();
        for (l, (x, y)) in lhs.iter().zip(r1.iter().zip(&r2)) {
            prop_assert!((l - (x + s * y)).abs() < 1e-9);
        }
        prop_assert_eq!(apply(&theta, &b).unwrap(), b);
    }

    #[test]
    fn accuracy_is_a_fraction(a in points(4, 2), b in points(5, 2), w in prop::collection::vec(-2.0..2.0f64, 2), bias in -1.0..1.0f64) {
        let c = make_labeled_union(&set(a, Domain::SourceA), &set(b, Domain::TargetB)).unwrap();
        let acc = discriminator_accuracy(&PrimalDiscriminator { w, b: bias, lambda: 1.0 }, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        let zero = discriminator_accuracy(&PrimalDiscriminator::zeros(2, 1.0), &c).unwrap();
        prop_assert_eq!(zero, 0.5);
    }

    #[test]
    fn trailing_nans_never_converge(values in prop::collection::vec(-1.0..1.0f64, 20..40), nans in 1usize..5) {
        let mut t = RunTrace::default();
        for (i, v) in values.iter().enumerate() {
            t.push(TraceRow { iteration: i, objective: *v, disc_accuracy: 0.5, mean_gap: 1.0, cov_gap: 1.0 });
        }
        for k in 0..nans {
            t.push(TraceRow { iteration: values.len() + k, objective: f64::NAN, disc_accuracy: 0.5, mean_gap: 1.0, cov_gap: 1.0 });
        }
        let p = ClassifyParams::default();
        prop_assert_eq!(p.classify(&t), RunStatus::Diverged);
        prop_assert_eq!(p.classify(&t), p.classify(&t));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exact_projection_runs_never_end_above_their_start(seed in 0u64..1000) {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let a = generate(&GeneratorSpec::gaussian_blob(vec![-2.0, 0.0], eye.clone(), 40, seed)).unwrap();
        let b = generate(&GeneratorSpec::gaussian_blob(vec![2.0, 0.0], vec![vec![2.0, 0.6], vec![0.6, 0.5]], 40, seed + 1))
            .unwrap()
            .with_tag(Domain::TargetB);
        let cfg = OptimizerConfig { iterations: 500, seed, ..Default::default() };
        let settings = DualSettings { balance: BalanceMode::ExactProjection, ..Default::default() };
        for kernel in [KernelSpec::Linear, KernelSpec::gaussian(2.0).unwrap()] {
            let run = run_dual_alignment(&a, &b, &MatcherParams::affine_identity(2), &kernel, &cfg, &settings).unwrap();
            let obj = &run.trace.objective;
            prop_assert!(obj.last().unwrap() <= &obj[0], "{:?}: {} -> {}", kernel, obj[0], obj.last().unwrap());
            let lr = run.stable_lr.unwrap();
            prop_assert!(lr > 0.0 && lr <= 1.0);
        }
    }

    #[test]
    fn traces_keep_their_shape(seed in 0u64..1000, batch in prop::option::of(5usize..30)) {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let a = generate(&GeneratorSpec::gaussian_blob(vec![0.0, 0.0], eye.clone(), 30, seed)).unwrap();
        let b = generate(&GeneratorSpec::gaussian_blob(vec![1.0, 1.0], eye, 30, seed + 1)).unwrap().with_tag(Domain::TargetB);
        let cfg = OptimizerConfig { iterations: 100, batch_size: batch, seed, ..Default::default() };
        let run = run_dual_alignment(&a, &b, &MatcherParams::free_points(30, 2), &KernelSpec::Linear, &cfg, &DualSettings::default()).unwrap();
        let t = &run.trace;
        prop_assert_eq!(t.len(), 11);
        for col in [&t.objective, &t.disc_accuracy, &t.mean_gap, &t.cov_gap] {
            prop_assert_eq!(col.len(), t.iterations.len());
        }
        prop_assert!(t.mean_gap.iter().chain(&t.cov_gap).all(|g| *g >= 0.0));
        prop_assert!(t.disc_accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
    }
}
