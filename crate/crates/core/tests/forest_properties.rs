use affinduce_core::badset::{bad_set, d_infty_profile, extended_bad, near_invariance_check, tube, BadSetApprox, Level};
use affinduce_core::ergodic::ulam_model;
use affinduce_core::inducer::{enumerate_good, induced_map, residual_curve, GoodForest, MarkovThresholds};
use affinduce_core::nice::{build_nice, NiceNbhd};
use affinduce_core::{q, zoo, Budgets, ClosedUnion, IntervalQ, PAMap, Rat};
use proptest::prelude::*;

fn skew_tent() -> impl Strategy<Value = PAMap> {
    (3i64..13)
        .prop_flat_map(|d| (1..d).prop_map(move |n| q(n, d)))
        .prop_filter("peak away from the ends", |c| c >= &q(1, 5) && c <= &q(4, 5))
        .prop_map(zoo::full_skew_tent)
}

fn tent() -> impl Strategy<Value = PAMap> {
    (29i64..=40).prop_map(|n| zoo::tent(q(n, 20)))
}

fn any_map() -> impl Strategy<Value = PAMap> {
    prop_oneof![skew_tent(), tent()]
}

fn setup(m: &PAMap, h: usize) -> (NiceNbhd, GoodForest) {
    let budgets = Budgets::default();
    let u = build_nice(m, &q(1, 4), 64, &budgets).expect("nice neighborhood");
    let f = enumerate_good(m, &u, h, &budgets).expect("forest");
    (u, f)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn members_are_pairwise_disjoint_or_nested(m in any_map()) {
        let (_, f) = setup(&m, 6);
        let ms = f.members();
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                prop_assert!(ms[i].interval.disjoint_or_nested(&ms[j].interval));
            }
            let strictly_inside = ms.iter().filter(|g| g.interval.strictly_contains(&ms[i].interval)).count();
            prop_assert_eq!(strictly_inside, ms[i].depth);
        }
    }

    #[test]
    fn every_branch_maps_onto_its_target(m in any_map()) {
        let (u, f) = setup(&m, 10);
        for g in f.members() {
            let target = &u.component(&g.target).unwrap().interval;
            prop_assert_eq!(g.map_data.image(&g.interval.closure()), target.closure());
            prop_assert_eq!(m.iterate_point(&g.interval.midpoint(), g.time), g.map_data.apply(&g.interval.midpoint()));
        }
    }

    #[test]
    fn residuals_shrink_and_match_bad_set(m in any_map()) {
        let (_, f) = setup(&m, 9);
        let hs: Vec<usize> = (0..=9).collect();
        let curve = residual_curve(&f, &hs, &MarkovThresholds::default()).unwrap();
        prop_assert!(curve.rows.windows(2).all(|w| w[1].residual <= w[0].residual));
        let mut previous: Option<BadSetApprox> = None;
        for row in &curve.rows {
            let fh = f.restrict(row.horizon);
            let b = bad_set(&fh);
            prop_assert_eq!(&b.measure, &row.residual);
            prop_assert_eq!(&induced_map(&fh).residual, &row.residual);
            if let Some(p) = &previous {
                prop_assert!(b.pieces.is_subset_of(&p.pieces));
            }
            previous = Some(b);
        }
    }

    #[test]
    fn profiles_and_levels_are_monotone(m in any_map()) {
        let (_, f) = setup(&m, 8);
        let p = d_infty_profile(&f, 8);
        prop_assert_eq!(&p.measures[0], &f.phase().length());
        prop_assert!(p.measures.windows(2).all(|w| w[1] <= w[0]));
        let levels: Vec<BadSetApprox> = (0..=5).map(|n| extended_bad(&m, &f, n).unwrap()).collect();
        for w in levels.windows(2) {
            prop_assert!(w[0].pieces.is_subset_of(&w[1].pieces));
        }
        prop_assert!(bad_set(&f).pieces.is_subset_of(&levels[0].pieces));
    }

    #[test]
    fn tube_slices_follow_the_orbit(m in any_map()) {
        let (u, f) = setup(&m, 6);
        let b0 = bad_set(&f);
        for g in f.members().iter().filter(|g| g.time >= 1).take(40) {
            let tb = tube(&m, &f, g).unwrap();
            let uc = u.component(&g.target).unwrap().interval.closure();
            prop_assert_eq!(&tb.slices[0], &b0.pieces.intersect_interval(&uc));
            for i in 0..g.time {
                let image = ClosedUnion::from_intervals(tb.slices[i + 1].pieces().iter().map(|p| m.image_of_interval(p)));
                prop_assert!(image.is_subset_of(&tb.slices[i]));
            }
        }
    }

    #[test]
    fn ulam_columns_sum_to_one(m in any_map(), cells in 2usize..40) {
        let model = ulam_model(&m, cells);
        for j in 0..cells {
            prop_assert_eq!(model.column_sum(j), Rat::one());
        }
        prop_assert!(model.density.iter().all(|d| *d >= 0.0));
        prop_assert!((model.mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn whole_phase_is_invariant() {
    for (_, m) in zoo::acceptance_zoo() {
        let all = BadSetApprox::new(ClosedUnion::from_intervals([m.phase().clone()]), 0, Level::Bad);
        assert!(near_invariance_check(&m, &all).defect.is_zero());
    }
}

#[test]
fn branches_are_dense_at_the_mesh_scale() {
    for (name, m) in zoo::acceptance_zoo() {
        let (u, f) = setup(&m, 12);
        let branches: Vec<IntervalQ> = f.branches().map(|g| g.interval.clone()).collect();
        let len = f.phase().length();
        let step = (&len - u.mesh()) / Rat::from_integer(99);
        for k in 0..100 {
            let lo = f.phase().lo() + &step * Rat::from_integer(k);
            let probe = IntervalQ::open(lo.clone(), &lo + u.mesh());
            assert!(branches.iter().any(|b| !b.is_disjoint(&probe)), "{name}: probe {probe} misses every branch");
        }
    }
}

#[test]
fn depth_structure_is_stable_under_restriction() {
    let m = zoo::bimodal();
    let (_, f) = setup(&m, 9);
    for h in [0, 3, 6] {
        let direct = enumerate_good(&m, f.nice(), h, &Budgets::default()).unwrap();
        assert_eq!(f.restrict(h), direct);
    }
}
