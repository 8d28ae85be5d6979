mod common;

use altproj::dynamics::{
    check_ergodic, half_step, primal_kernel, run, AlternatingChainSpec, ChainState,
};
use altproj::instances::{
    potts_instance, random_instance, random_instance_with_joint, PottsInstance,
};
use altproj::measures::{check_disintegration, marginal, Axis, JointMeasure};
use altproj::projections::{project_s1, project_s2};
use altproj::verify::{emit_trace, random_full_support_start, verify_all, VerifyOptions};
use common::{brute_force_burn_in, enumerate_potts, Kernels};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_spec() -> impl Strategy<Value = AlternatingChainSpec<f64>> {
    (
        1usize..6,
        1usize..6,
        prop_oneof![Just(1.0), 0.3f64..1.0],
        any::<u64>(),
    )
        .prop_map(|(nx, ny, d, seed)| random_instance::<f64>(nx, ny, d, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_specs_satisfy_invariants(spec in arb_spec()) {
        prop_assert!(check_disintegration(spec.es(), spec.kernel_y_given_x()) <= 1e-10);
        prop_assert!(check_disintegration(spec.es(), spec.kernel_x_given_y()) <= 1e-10);
        prop_assert!(check_ergodic(&primal_kernel(&spec).unwrap()).is_ergodic());
        let cap = 2 * (spec.nx().pow(2) + spec.ny().pow(2));
        let reference = brute_force_burn_in(&Kernels::of(&spec), spec.support().mask(), cap);
        prop_assert_eq!(reference, Some(spec.burn_in()));
    }

    #[test]
    fn generation_is_deterministic(nx in 1usize..5, ny in 1usize..5, seed in any::<u64>()) {
        let a = random_instance_with_joint::<f64>(nx, ny, 0.6, seed).unwrap();
        let b = random_instance_with_joint::<f64>(nx, ny, 0.6, seed).unwrap();
        prop_assert_eq!(a.spec, b.spec);
        prop_assert_eq!(a.joint, b.joint);
    }

    #[test]
    fn es_is_a_fixed_point(spec in arb_spec()) {
        let states = run(&spec, spec.es(), 4).unwrap();
        for s in &states {
            prop_assert!(s.pi.max_abs_diff(spec.es()) <= 1e-12);
        }
    }

    #[test]
    fn half_steps_are_idempotent_projections(spec in arb_spec(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_full_support_start::<f64, _>(spec.support(), &mut rng);
        let s1 = project_s1(&pi, spec.kernel_y_given_x()).unwrap();
        let s2 = project_s2(&pi, spec.kernel_x_given_y()).unwrap();
        prop_assert!(project_s1(&s1, spec.kernel_y_given_x()).unwrap().max_abs_diff(&s1) <= 1e-15);
        prop_assert!(project_s2(&s2, spec.kernel_x_given_y()).unwrap().max_abs_diff(&s2) <= 1e-15);
        let mx = marginal(&pi, Axis::X).unwrap();
        let m1 = marginal(&s1, Axis::X).unwrap();
        for (a, b) in mx.weights().iter().zip(m1.weights()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
        let even = half_step(&ChainState { t: 0, pi: pi.clone() }, &spec).unwrap();
        let odd = half_step(&ChainState { t: 1, pi }, &spec).unwrap();
        prop_assert_eq!(even.pi, s1);
        prop_assert_eq!(odd.pi, s2);
    }

    #[test]
    fn joint_divergence_decays_from_any_dirac(spec in arb_spec(), pick in any::<prop::sample::Index>()) {
        let pairs: Vec<_> = spec.support().pairs().collect();
        let (x, y) = pairs[pick.index(pairs.len())];
        let pi0 = JointMeasure::dirac(spec.support().clone(), x, y).unwrap();
        let trace = emit_trace(&spec, &pi0, 40).unwrap();
        for w in trace.rows.windows(2).skip(spec.burn_in()) {
            prop_assert!(w[1].d_joint <= w[0].d_joint + 1e-12);
        }
        for r in &trace.rows {
            prop_assert!(r.d_joint.is_finite());
            prop_assert!(r.d_mu <= r.d_joint + 1e-12 && r.d_nu <= r.d_joint + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_report_on_a_valid_spec_passes(spec in arb_spec(), seed in any::<u64>()) {
        let (x, y) = spec.support().pairs().last().unwrap();
        let pi0 = JointMeasure::dirac(spec.support().clone(), x, y).unwrap();
        let report = verify_all(&spec, &pi0, 30, 4, seed, &VerifyOptions::default()).unwrap();
        prop_assert!(report.passed(), "{}", report.summary());
    }

    #[test]
    fn potts_marginal_is_gibbs(beta in 0.05f64..3.0, q in 2usize..4, shape in 0usize..3) {
        let (v, edges) = match shape {
            0 => (2, vec![(0, 1)]),
            1 => (3, vec![(0, 1), (1, 2)]),
            _ => (3, vec![(0, 1), (1, 2), (0, 2)]),
        };
        let inst = PottsInstance::new(v, edges.clone(), q, beta).unwrap();
        let ps = potts_instance::<f64>(&inst, 200_000).unwrap();
        let reference = enumerate_potts(v, &edges, q, beta);
        let mu = marginal(ps.spec.es(), Axis::X).unwrap();
        for (a, b) in mu.weights().iter().zip(&reference.gibbs) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn triangle_potts_passes_all_checks() {
    let inst = PottsInstance::new(3, vec![(0, 1), (1, 2), (0, 2)], 2, 2f64.ln()).unwrap();
    let ps = potts_instance::<f64>(&inst, 200_000).unwrap();
    let (x, y) = ps.spec.support().pairs().next().unwrap();
    let pi0 = JointMeasure::dirac(ps.spec.support().clone(), x, y).unwrap();
    let report = verify_all(&ps.spec, &pi0, 60, 20, 1, &VerifyOptions::default()).unwrap();
    assert!(report.passed(), "{}", report.summary());
}

#[test]
fn f32_chain_runs() {
    let spec = random_instance::<f32>(3, 4, 0.8, 9).unwrap();
    let pi0 = JointMeasure::uniform(spec.support().clone());
    let trace = emit_trace(&spec, &pi0, 20).unwrap();
    assert!(trace
        .rows
        .iter()
        .all(|r| r.d_joint.is_finite() && r.d_joint >= 0.0));
    assert!(trace.rows.last().unwrap().d_joint < 1e-3);
}
