use proptest::prelude::*;

use mbvge::dependence::copula_component;
use mbvge::em::{e_step, m_step, partition_data, EmConfig, MStepStats};
use mbvge::io::{read_pairs_csv, write_csv};
use mbvge::{BvgePair, BvgeParams, GeParams, MixtureParams, Region};

fn shape() -> impl Strategy<Value = f64> {
    (0.1f64..5.0).prop_map(|x| x)
}

fn component() -> impl Strategy<Value = BvgeParams> {
    (shape(), shape(), shape(), 0.1f64..5.0).prop_map(|(a, b, c, l)| BvgeParams::new(a, b, c, l).unwrap())
}

fn mixture() -> impl Strategy<Value = MixtureParams> {
    (0.05f64..0.95, component(), component()).prop_map(|(p, a, b)| MixtureParams::new(p, a, b).unwrap())
}

proptest! {
    #[test]
    fn ge_quantile_inverts_cdf(a in shape(), l in 0.1f64..5.0, q in 0.001f64..0.999) {
        let g = GeParams::new(a, l).unwrap();
        let x = g.quantile(q).unwrap();
        prop_assert!((g.cdf(x) - q).abs() < 1e-12);
    }

    #[test]
    fn bvge_cdf_is_bounded_and_has_its_margins(c in component(), x1 in 0.01f64..10.0, x2 in 0.01f64..10.0) {
        let h = c.cdf(x1, x2);
        let f1 = c.marginal1().cdf(x1);
        let f2 = c.marginal2().cdf(x2);
        prop_assert!(h >= (f1 + f2 - 1.0).max(0.0) - 1e-14);
        prop_assert!(h <= f1.min(f2) + 1e-14);
        prop_assert!((c.cdf(x1, f64::INFINITY) - f1).abs() < 1e-14);
    }

    #[test]
    fn copula_respects_frechet_bounds(c in component(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let cv = copula_component(&c, u, v);
        prop_assert!(cv >= (u + v - 1.0).max(0.0) - 1e-14);
        prop_assert!(cv <= u.min(v) + 1e-14);
    }

    #[test]
    fn swapping_coordinates_swaps_the_density(c in component(), x1 in 0.01f64..5.0, x2 in 0.01f64..5.0) {
        prop_assume!(x1 != x2);
        let a = c.ln_density(&BvgePair::new(x1, x2, 0.0));
        let b = c.swapped().ln_density(&BvgePair::new(x2, x1, 0.0));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn label_swap_leaves_the_mixture_unchanged(m in mixture(), x1 in 0.01f64..5.0, x2 in 0.01f64..5.0) {
        let p = BvgePair::new(x1, x2, 0.0);
        let a = m.ln_density(&p);
        let b = m.swapped_components().ln_density(&p);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn sampler_regions_match_values(m in mixture(), seed in any::<u64>()) {
        for d in m.sample_seeded(50, seed) {
            let expect = if d.pair.x1 == d.pair.x2 { Region::Diagonal } else if d.pair.x1 < d.pair.x2 { Region::Lower } else { Region::Upper };
            prop_assert_eq!(d.pair.region, expect);
            prop_assert!(d.pair.x1 > 0.0 && d.pair.x2 > 0.0);
            prop_assert!(d.label < 2);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(v in proptest::collection::vec((any::<f64>(), any::<f64>()), 1..40)) {
        let v: Vec<(f64, f64)> = v.into_iter().filter(|(a, b)| a.is_finite() && b.is_finite()).collect();
        prop_assume!(!v.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        write_csv(&path, &["x1", "x2"], v.iter().map(|(a, b)| vec![a.to_string(), b.to_string()])).unwrap();
        let back = read_pairs_csv(std::fs::File::open(&path).unwrap()).unwrap();
        prop_assert_eq!(back.len(), v.len());
        for (x, y) in back.iter().zip(&v) {
            prop_assert_eq!(x.0.to_bits(), y.0.to_bits());
            prop_assert_eq!(x.1.to_bits(), y.1.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn em_iteration_never_lowers_the_likelihood(truth in mixture(), start in mixture(), seed in any::<u64>()) {
        let data: Vec<(f64, f64)> = truth.sample_seeded(150, seed).into_iter().map(|d| (d.pair.x1, d.pair.x2)).collect();
        let part = partition_data(&data, 0.0);
        prop_assume!(part.is_ok());
        let part = part.unwrap();
        let mut cur = start;
        let mut prev = e_step(&cur, &part);
        for _ in 0..5 {
            let next = m_step(&cur, &prev, &part, &EmConfig::default(), &mut MStepStats::default());
            let e = e_step(&next, &part);
            prop_assert!(e.loglik >= prev.loglik - 1e-10 * prev.loglik.abs(), "{} -> {}", prev.loglik, e.loglik);
            cur = next;
            prev = e;
        }
    }
}
