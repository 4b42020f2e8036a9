use macstate::binsim::{self, SimParams};
use macstate::macmodel::{
    assemble_joint, build_switch_bsc, AuxPolicy, CoopConfig, Factorization, InputConstraint,
    MacChannel, Mode, S1, S2, U, V, X1, X2, Y,
};
use macstate::optimizer::{trace_boundary, SearchConfig};
use macstate::probcore::{
    binary_entropy, bernoulli_convolve, conditional_mutual_information, entropy, joint_from_factors,
    marginalize, Axis, CondPmf, Factor, JointPmf, Pmf,
};
use macstate::rateregion::{
    hausdorff, hull_union, pentagon_for, region_compare, region_contains, Pentagon, RatePoint,
    Verdict,
};
use proptest::prelude::*;

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let t: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / t).collect()
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(normalized)
}

/// Row-stochastic table with `rows` rows over `out` letters.
fn table(rows: usize, out: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(simplex(out), rows).prop_map(|r| r.concat())
}

fn joint3() -> impl Strategy<Value = JointPmf> {
    (2usize..4, 2usize..4, 2usize..4)
        .prop_flat_map(|(a, b, c)| (Just((a, b, c)), simplex(a * b * c)))
        .prop_map(|((a, b, c), p)| {
            JointPmf::new(
                vec![Axis::new("a", a), Axis::new("b", b), Axis::new("c", c)],
                p,
            )
            .unwrap()
        })
}

fn random_channel() -> impl Strategy<Value = MacChannel> {
    (1usize..3, 1usize..3, 2usize..4, 2usize..4, 2usize..4)
        .prop_flat_map(|(s1, s2, x1, x2, y)| {
            (
                Just([s1, s2, x1, x2, y]),
                simplex(s1 * s2),
                prop::collection::vec(simplex(y), s1 * s2 * x1 * x2),
            )
        })
        .prop_map(|(sizes, state, kernel)| MacChannel::new(sizes, state, kernel).unwrap())
}

/// Channel with a random policy of the given factorization, tables drawn
/// independently of the cooperation budget.
fn channel_and_policy(fact: Factorization) -> impl Strategy<Value = (MacChannel, AuxPolicy)> {
    random_channel().prop_flat_map(move |ch| {
        let v_card = if fact.has_v() { 2 } else { 1 };
        let shapes = AuxPolicy::shapes(&ch, fact, 2, v_card);
        let tabs: Vec<_> = shapes
            .iter()
            .map(|(p, o)| table(p.iter().product(), *o))
            .collect();
        (Just(ch), Just(shapes), tabs)
    })
    .prop_map(move |(ch, shapes, tabs)| {
        let mk = |k: usize| CondPmf::new(shapes[k].0.clone(), shapes[k].1, tabs[k].clone()).unwrap();
        let mut pol = AuxPolicy::uniform(&ch, fact, 2, if fact.has_v() { 2 } else { 1 });
        pol.u_given = mk(0);
        if fact.has_v() {
            pol.v_given = Some(mk(1));
        }
        pol.x1_given = mk(2);
        pol.x2_given = mk(3);
        (ch, pol)
    })
}

fn pentagon() -> impl Strategy<Value = Pentagon> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.5).prop_map(|(a1, a2, a12)| Pentagon::new(a1, a2, a12))
}

/// Down-closed hull membership by brute force: some pair of vertices spans a
/// segment dominating `p`.
fn dominated(pents: &[Pentagon], p: RatePoint, slack: f64) -> bool {
    let mut v: Vec<RatePoint> = pents.iter().flat_map(|q| q.vertices()).collect();
    v.push(RatePoint::new(0.0, 0.0));
    v.iter().any(|a| {
        v.iter().any(|b| {
            (0..=200).any(|k| {
                let t = k as f64 / 200.0;
                t * a.r1 + (1.0 - t) * b.r1 >= p.r1 - slack
                    && t * a.r2 + (1.0 - t) * b.r2 >= p.r2 - slack
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_rule(j in joint3()) {
        let whole = conditional_mutual_information(&j, &["a"], &["b", "c"], &[]).unwrap();
        let first = conditional_mutual_information(&j, &["a"], &["b"], &[]).unwrap();
        let rest = conditional_mutual_information(&j, &["a"], &["c"], &["b"]).unwrap();
        prop_assert!((whole - first - rest).abs() < 1e-9);
    }

    #[test]
    fn information_is_nonnegative_and_bounded(j in joint3()) {
        let i = conditional_mutual_information(&j, &["a"], &["b"], &["c"]).unwrap();
        prop_assert!(i >= 0.0);
        let m = marginalize(&j, &["a"]).unwrap();
        let h = entropy(&Pmf::new(m.probs().to_vec()).unwrap());
        prop_assert!(i <= h + 1e-12);
        prop_assert!(h <= (m.axes()[0].size as f64).log2() + 1e-12);
    }

    #[test]
    fn marginals_keep_mass(j in joint3()) {
        for keep in [&["a"][..], &["c", "a"], &["b", "c"], &[]] {
            let m = marginalize(&j, keep).unwrap();
            prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn factors_are_recovered(px in simplex(3), py in table(3, 2)) {
        let x = Pmf::new(px.clone()).unwrap();
        let y = CondPmf::new(vec![3], 2, py.clone()).unwrap();
        let j = joint_from_factors(&[
            Factor::root(Axis::new("x", 3), &x),
            Factor::new(vec![Axis::new("y", 2)], vec!["x"], y),
        ])
        .unwrap();
        for a in 0..3 {
            for b in 0..2 {
                prop_assert!((j.get(&[a, b]) / px[a] - py[a * 2 + b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_never_lowers_entropy(p in 0.0f64..=0.5, q in 0.0f64..=0.5) {
        let h = binary_entropy(bernoulli_convolve(p, q).unwrap()).unwrap();
        let floor = binary_entropy(p).unwrap().max(binary_entropy(q).unwrap());
        prop_assert!(h >= floor - 1e-12);
    }

    #[test]
    fn one_way_joint_is_markov((ch, pol) in channel_and_policy(Factorization::OneWay)) {
        let j = assemble_joint(&ch, &pol, Mode::OneWay).unwrap();
        let cmi = |a: &[&str], b: &[&str], c: &[&str]| conditional_mutual_information(&j, a, b, c).unwrap();
        // Encoder 2 sees only U; the channel sees only the inputs and state.
        prop_assert!(cmi(&[X2], &[S1, S2, X1], &[U]) < 1e-10);
        prop_assert!(cmi(&[Y], &[U], &[S1, S2, X1, X2]) < 1e-10);
    }

    #[test]
    fn two_way_joint_is_markov((ch, pol) in channel_and_policy(Factorization::TwoWay)) {
        let j = assemble_joint(&ch, &pol, Mode::TwoWay).unwrap();
        let cmi = |a: &[&str], b: &[&str], c: &[&str]| conditional_mutual_information(&j, a, b, c).unwrap();
        prop_assert!(cmi(&[U], &[S2], &[S1]) < 1e-10);
        prop_assert!(cmi(&[X1], &[S2], &[S1, U, V]) < 1e-10);
        prop_assert!(cmi(&[X2], &[S1], &[S2, U, V]) < 1e-10);
        prop_assert!(cmi(&[Y], &[U, V], &[S1, S2, X1, X2]) < 1e-10);
    }

    #[test]
    fn pentagons_obey_mode_formulas((ch, pol) in channel_and_policy(Factorization::OneWay), c12 in 0.0f64..2.0) {
        let j = assemble_joint(&ch, &pol, Mode::OneWay).unwrap();
        let p = pentagon_for(&j, &CoopConfig::one_way(c12)).unwrap();
        let cmi = |a: &[&str], b: &[&str], c: &[&str]| conditional_mutual_information(&j, a, b, c).unwrap();
        let ius = cmi(&[U], &[S1, S2], &[]);
        prop_assert_eq!(p.feasible, ius <= c12 + 1e-12);
        if p.feasible {
            let credit = c12 - ius;
            let a1 = cmi(&[X1], &[Y], &[X2, S1, S2, U]) + credit;
            let a12 = (cmi(&[X1, X2], &[Y], &[S1, S2, U]) + credit).min(cmi(&[X1, X2], &[Y], &[S1, S2]));
            prop_assert!((p.a1 - a1.max(0.0)).abs() < 1e-9);
            prop_assert!((p.a12 - a12.max(0.0)).abs() < 1e-9);
            prop_assert!((p.a2 - cmi(&[X2], &[Y], &[X1, S1, S2, U])).abs() < 1e-9);
        }
    }

    #[test]
    fn hull_is_concave_and_touches_axes(ps in prop::collection::vec(pentagon(), 1..8)) {
        let r = hull_union(&ps);
        let b = &r.boundary;
        prop_assert_eq!(b[0].r1, 0.0);
        prop_assert_eq!(b.last().unwrap().r2, 0.0);
        for w in b.windows(2) {
            prop_assert!(w[1].r1 >= w[0].r1 && w[1].r2 <= w[0].r2);
        }
        for w in b.windows(3) {
            let cross = (w[1].r1 - w[0].r1) * (w[2].r2 - w[1].r2) - (w[1].r2 - w[0].r2) * (w[2].r1 - w[1].r1);
            prop_assert!(cross <= 1e-9);
        }
        for p in &ps {
            for v in p.vertices() {
                prop_assert!(region_contains(&r, v, 1e-9));
            }
        }
    }

    #[test]
    fn containment_matches_brute_force(
        ps in prop::collection::vec(pentagon(), 1..5),
        pts in prop::collection::vec((0.0f64..1.6, 0.0f64..1.1), 20),
    ) {
        let r = hull_union(&ps);
        for (a, b) in pts {
            let p = RatePoint::new(a, b);
            // The discretized oracle can only under-report; skip the thin band
            // where it is uncertain.
            if dominated(&ps, p, -1e-2) {
                prop_assert!(region_contains(&r, p, 0.0));
            } else if !dominated(&ps, p, 1e-2) {
                prop_assert!(!region_contains(&r, p, 0.0));
            }
        }
    }

    #[test]
    fn comparison_is_consistent(ps in prop::collection::vec(pentagon(), 1..5), extra in pentagon()) {
        let small = hull_union(&ps);
        let mut more = ps.clone();
        more.push(extra);
        let big = hull_union(&more);
        prop_assert_eq!(hausdorff(&small, &small), 0.0);
        prop_assert!((hausdorff(&small, &big) - hausdorff(&big, &small)).abs() < 1e-15);
        let v = region_compare(&small, &big, 1e-9).verdict;
        prop_assert!(matches!(v, Verdict::ASubsetB | Verdict::Equal));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulator_breakdown_adds_up(seed in 0u64..1000, n in 4usize..9) {
        let ch = build_switch_bsc(0.0).unwrap();
        let mut pol = AuxPolicy::uniform(&ch, Factorization::OneWay, 2, 1);
        pol.u_given = CondPmf::deterministic(vec![2, 1], 2, |r| r);
        let p = SimParams {
            channel: ch,
            policy: pol,
            n,
            r1: 0.3,
            r2: 0.3,
            c12: 1.25,
            eps: 0.9,
            trials: 40,
            seed,
        };
        let r = binsim::estimate_error(&p).unwrap();
        prop_assert_eq!(r.breakdown.total(), r.errors);
        prop_assert!((0.0..=1.0).contains(&r.error_rate));
        let cb = binsim::build_codebooks(&p).unwrap();
        let sizes: Vec<usize> = (0..cb.bins).map(|b| cb.bin(b).len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        for j in 0..cb.u_count {
            prop_assert_eq!(cb.u_word(j).len(), n);
            prop_assert!(cb.u_word(j).iter().all(|&u| u < 2));
        }
    }
}

#[test]
fn witnesses_reproduce_their_vertices() {
    let ch = build_switch_bsc(0.05).unwrap();
    let cfg = SearchConfig {
        weight_count: 7,
        restarts: 2,
        local_steps: 60,
        ..SearchConfig::default()
    };
    for coop in [
        CoopConfig::one_way(0.3),
        CoopConfig::two_way(0.2, 0.1),
        CoopConfig::split(0.1, 0.2),
        CoopConfig::state_only(0.3),
        CoopConfig::message_only(0.3),
    ] {
        let res = trace_boundary(&ch, &coop, &InputConstraint::both(0.25, 0.25), &cfg).unwrap();
        for (v, w) in res.region.boundary.iter().zip(&res.witnesses) {
            let j = assemble_joint(&ch, w, coop.mode).unwrap();
            let p = pentagon_for(&j, &coop).unwrap();
            assert!(p.feasible, "{coop:?}");
            assert!(p.contains(*v, 1e-7), "{coop:?}: {v:?} not in {p:?}");
        }
    }
}

#[test]
fn v_axis_only_in_two_way() {
    let ch = build_switch_bsc(0.1).unwrap();
    let pol = AuxPolicy::uniform(&ch, Factorization::TwoWay, 2, 2);
    let j = assemble_joint(&ch, &pol, Mode::TwoWay).unwrap();
    assert_eq!(j.axis_size(V).unwrap(), 2);
}
