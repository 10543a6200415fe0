use proptest::prelude::*;

use vpp_bidding::cadmmb::gap;
use vpp_bidding::hydro::envelope_bounds;
use vpp_bidding::market::BidCurve;
use vpp_bidding::presets;
use vpp_bidding::scenarios::reduce_scenarios;

proptest! {
    #[test]
    fn envelope_contains_the_bilinear_surface(plant in 0usize..12, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let c = presets::reference_cascade(4, 4);
        let p = &c.plants[plant];
        let q = p.turbine_min + a * (p.turbine_max - p.turbine_min);
        let h = p.head_min + b * (p.head_max - p.head_min);
        let (lo, hi) = envelope_bounds(p, q, h);
        let exact = p.power_coefficient() * q * h;
        prop_assert!(lo <= exact + 1e-9 && exact <= hi + 1e-9);
    }

    #[test]
    fn gap_is_symmetric_in_sign_and_zero_when_closed(ub in -1e6f64..-1.0, d in 0.0f64..1e4) {
        prop_assert_eq!(gap(ub, ub), 0.0);
        let g = gap(ub, ub - d);
        prop_assert!((g - 100.0 * d / ub.abs()).abs() < 1e-9);
    }

    #[test]
    fn cleared_quantity_is_non_decreasing_in_price(
        mut pts in prop::collection::vec((0.0f64..200.0, 0.0f64..500.0), 1..8),
        p1 in -10.0f64..250.0,
        p2 in -10.0f64..250.0,
    ) {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        let mut q = 0.0;
        for p in &mut pts {
            q += p.1;
            p.1 = q;
        }
        let curve = BidCurve { hour: 0, points: pts };
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(curve.cleared_quantity(lo) <= curve.cleared_quantity(hi));
    }

    #[test]
    fn reduced_sets_are_uniformly_weighted(m in 1usize..10, seed in 0u64..1000) {
        let c = presets::toy_cascade(2, 3);
        let full = presets::toy_scenarios(&c, 10, 1).unwrap();
        let r = reduce_scenarios(&full, m, seed).unwrap();
        prop_assert_eq!(r.len(), m);
        let total: f64 = r.scenarios.iter().map(|s| s.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
