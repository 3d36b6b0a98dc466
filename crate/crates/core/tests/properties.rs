use lipbound::model::{BoxDomain, Dataset, Geometry, LipschitzSpec, ProblemSpec, Scenario};
use lipbound::redundancy::{is_redundant_definitional, is_redundant_sufficient, Region};
use lipbound::solver::chain::apply_chain;
use lipbound::solver::{
    impose_mean, normalize_weights, verify, ChainContext, Direction, Encoding, SolverConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plane() -> Geometry {
    Geometry::new(
        BoxDomain::new(&[(0.0, 1.0), (0.0, 2.0)]).unwrap(),
        LipschitzSpec::new(vec![1.0, 0.5], 0.1).unwrap(),
        Dataset::new(
            vec![vec![0.2, 0.5], vec![0.9, 1.5], vec![0.5, 1.0]],
            vec![0.3, 0.9, 0.4],
            None,
        )
        .unwrap(),
    )
    .unwrap()
}

fn unit_raw(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chain_output_passes_independent_check(
        u in unit_raw(2 + 2 + 2 + 4),
        m in 0.0f64..1.2,
        theta in 0.0f64..1.0,
        shape in prop::sample::select(vec![[2u8, 2], [1, 2], [2, 1]]),
        seed in 0u64..1000,
    ) {
        let g = plane();
        let config = SolverConfig::default();
        let enc = Encoding::new(&shape).unwrap();
        let ctx = ChainContext {
            geometry: &g,
            m,
            theta,
            config: &config,
            encoding: &enc,
            direction: Direction::Maximize,
            pinned: None,
        };
        let bounds = ctx.bounds();
        let raw: Vec<f64> = bounds
            .iter()
            .zip(&u)
            .map(|((lo, hi), t)| lo + (hi - lo) * t)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = apply_chain(&raw, &ctx, &mut rng);
        if out.residual == 0.0 {
            let spec = ProblemSpec::from_geometry(g.clone(), m, theta).unwrap();
            let v = verify(&out.scenario, &spec, &config);
            prop_assert!(v.valid, "{:?}", v.violations);
            prop_assert_eq!(v.objective, out.scenario.failure_probability(theta));
        }
    }

    #[test]
    fn mean_shift_keeps_differences(
        y in prop::collection::vec(-2.0f64..2.0, 4),
        p in prop::collection::vec(0.0f64..1.0, 2),
        m in -1.0f64..3.0,
    ) {
        let s = Scenario::new(vec![0.0, 0.0], vec![1.0, 1.0], p, y).unwrap();
        let t = impose_mean(&s, m, &[]);
        prop_assert!(t.mean() >= m.min(s.mean()) - 1e-12);
        let d = t.y[0] - s.y[0];
        for (a, b) in t.y.iter().zip(&s.y) {
            prop_assert!((a - b - d).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_clamp_is_idempotent(p in prop::collection::vec(-1.0f64..2.0, 3)) {
        let s = Scenario::new(vec![0.0; 3], vec![1.0; 3], p, vec![0.0; 8]).unwrap();
        let once = normalize_weights(&s);
        prop_assert!(once.p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(normalize_weights(&once), once.clone());
        prop_assert!((once.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sufficient_redundancy_implies_definitional(
        pts in prop::collection::vec(prop::collection::vec(0.0f64..0.5, 2), 1..5),
        vals in prop::collection::vec(-0.3f64..0.3, 5),
        z0 in prop::collection::vec(0.6f64..1.0, 2),
        g0 in -1.0f64..1.0,
        l in prop::collection::vec(0.2f64..2.0, 2),
        t in 0.0f64..0.2,
    ) {
        let lip = LipschitzSpec::new(l, t).unwrap();
        let domain = BoxDomain::unit(2);
        let v = Region::new(&domain, BoxDomain::new(&[(0.0, 0.5), (0.0, 0.5)]).unwrap()).unwrap();
        let vals = vals[..pts.len()].to_vec();
        let data = Dataset::new(pts, vals, None).unwrap();
        if is_redundant_sufficient(&z0, g0, &v, &data, &lip).unwrap() {
            prop_assert!(is_redundant_definitional(&z0, g0, &v, &data, &lip, 41).unwrap());
        }
    }
}
