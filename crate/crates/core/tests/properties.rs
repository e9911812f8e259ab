use proptest::prelude::*;

use recurlab::grid::discretize;
use recurlab::space::torus_linf;
use recurlab::*;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn random_permutation() -> impl Strategy<Value = GridPermutation> {
    (1usize..=2, 3u32..=6).prop_flat_map(|(dim, level)| {
        let level = if dim == 2 { level.min(4) } else { level };
        let grid = GridSpec::torus(dim, level).unwrap();
        Just((0..grid.cell_count() as u32).collect::<Vec<u32>>())
            .prop_shuffle()
            .prop_map(move |f| GridPermutation::from_forward(grid, f).unwrap())
    })
}

fn systems() -> Vec<SystemMap> {
    let g = GridSpec::torus(1, 7).unwrap();
    let tau = discretize(&SystemMap::rotation(vec![GOLDEN]).unwrap(), g).unwrap();
    vec![
        SystemMap::rotation(vec![GOLDEN]).unwrap(),
        SystemMap::rotation(vec![0.1234, 0.8765]).unwrap(),
        SystemMap::cat_map(),
        SystemMap::grid(towerize(&tau, &build_cover(g, 1.0 / 16.0, 0.1).unwrap()).unwrap().permutation),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn towerize_keeps_its_guarantees(tau in random_permutation(), scale in 1u32..=4, eps in 0.01f64..0.5) {
        let grid = *tau.grid();
        let delta = grid.cell_width() * (1u32 << scale) as f64 * 0.99 + grid.cell_width() * 0.02;
        let cover = build_cover(grid, delta, eps).unwrap();
        let report = towerize(&tau, &cover).unwrap();
        let g = report.permutation.forward();
        let mut seen = vec![false; g.len()];
        for &c in g {
            prop_assert!(!std::mem::replace(&mut seen[c as usize], true));
        }
        for (z, &b) in g.iter().enumerate() {
            let (a, b) = (tau.apply(z), b as usize);
            prop_assert!(torus_linf(&grid.center(a), &grid.center(b)) < delta);
            prop_assert!(a == b || cover.cube_of(a) == cover.cube_of(b));
        }
        prop_assert!(report.max_displacement < delta);
        let p = report.period_bound.unwrap();
        prop_assert!(report.periodicity.fraction(p) > 1.0 - eps);
    }

    #[test]
    fn self_target_hitting_equals_recurrence(which in 0usize..4, seed: u64, n in 1u64..400, beta in 0.5f64..3.0) {
        let map = &systems()[which];
        let x = map.natural_measure().sample(seed, 0);
        let rate = RateSequence::power(beta).unwrap();
        let h = Horizon::full(n).unwrap();
        let r = recurrence_score(map, &Observable::Identity, &rate, &x, h).unwrap();
        let s = hitting_score(map, &Observable::Identity, &rate, &x, &x, h).unwrap();
        prop_assert_eq!(r.to_bits(), s.to_bits());
    }

    #[test]
    fn scores_do_not_increase_with_horizon(which in 0usize..4, seed: u64, n1 in 1u64..300, extra in 0u64..300) {
        let map = &systems()[which];
        let model = map.natural_measure();
        let (x, y) = (model.sample(seed, 0), model.sample(seed, 1));
        let rate = RateSequence::power(1.0).unwrap();
        let f = Observable::Identity;
        let (a, b) = (Horizon::full(n1).unwrap(), Horizon::full(n1 + extra).unwrap());
        prop_assert!(recurrence_score(map, &f, &rate, &x, b).unwrap() <= recurrence_score(map, &f, &rate, &x, a).unwrap());
        prop_assert!(hitting_score(map, &f, &rate, &x, &y, b).unwrap() <= hitting_score(map, &f, &rate, &x, &y, a).unwrap());
    }

    #[test]
    fn window_union_is_the_fraction_with_a_hit(which in 0usize..4, seed: u64, p in 1u64..4, m in 1u64..20, len in 0u64..60) {
        let map = &systems()[which];
        let model = map.natural_measure();
        let y = model.sample(seed ^ 0xabc, 0);
        let rate = RateSequence::power(1.0).unwrap();
        let f = Observable::Identity;
        let w = WpWindow::new(p, m, m + len).unwrap();
        let est = wp_union_measure(map, &f, &rate, &y, &w, &model, 100, seed).unwrap();
        let hits = (0..100)
            .filter(|&i| wp_hit_count(map, &f, &rate, &model.sample(seed, i), &y, &w).unwrap() >= 1)
            .count();
        prop_assert_eq!(est.value, hits as f64 / 100.0);
    }

    #[test]
    fn shrinking_target_fraction_is_monotone(seed: u64, beta in 1.0f64..4.0, dbeta in 0.0f64..2.0, n in 20u64..400, extra in 0u64..400) {
        let map = SystemMap::rotation(vec![GOLDEN, 0.3819]).unwrap();
        let model = MeasureModel::lebesgue(Space::torus(2));
        let y = Point::on_torus(vec![0.5, 0.5]);
        let frac = |beta, n| {
            let spec = ShrinkingTargetSpec::new(y.clone(), beta).unwrap();
            borel_cantelli_fraction(&map, &spec, 10, n, &model, 100, seed).unwrap().value
        };
        let base = frac(beta, n);
        prop_assert!(base <= frac(beta, n + extra));
        prop_assert!(base <= frac(beta + dbeta, n));
    }

    #[test]
    fn uniform_local_dimension_is_exact(dim in 1usize..=2, coords in prop::collection::vec(0.0f64..1.0, 2)) {
        let grid = GridSpec::torus(dim, 9).unwrap();
        let y = Point::on_torus(coords[..dim].to_vec());
        let est = local_dimension(&DimensionMeasure::Uniform(grid), &y, 2f64.powi(-8), 2f64.powi(-3)).unwrap();
        prop_assert!((est.slope - dim as f64).abs() < 1e-9);
    }

    #[test]
    fn map_distance_is_a_semimetric(which in 0usize..3, other in 0usize..3, seed: u64) {
        let maps = systems();
        let (a, b) = (&maps[which], &maps[other]);
        prop_assume!(a.space() == b.space());
        prop_assert_eq!(map_distance(a, a, &[], 200, seed).unwrap(), 0.0);
        prop_assert_eq!(map_distance(a, b, &[], 200, seed).unwrap(), map_distance(b, a, &[], 200, seed).unwrap());
    }

    #[test]
    fn decay_verdict_ignores_scale(theta in prop::collection::vec(1e-6f64..1.0, 12), c in 1e-3f64..1e3) {
        let horizons: Vec<u64> = (0..12).map(|i| 1u64 << i).collect();
        let scaled: Vec<f64> = theta.iter().map(|t| t * c).collect();
        let a = superpoly_test(&CorrelationSeries::from_theta(horizons.clone(), theta).unwrap(), &[1.0, 2.0]).unwrap();
        let b = superpoly_test(&CorrelationSeries::from_theta(horizons, scaled).unwrap(), &[1.0, 2.0]).unwrap();
        for (x, y) in a.fits.iter().zip(&b.fits) {
            prop_assert_eq!(x.verdict, y.verdict);
        }
    }
}
