use proptest::prelude::*;

use gw_nary::critical::{find_critical, Family};
use gw_nary::solve::ROOT_TOL;
use gw_nary::{
    fit_asymptote, iterate_survival, pemantle_bound, smallest_root, Criticality, OffspringSpec,
    SubtreeGF,
};

fn finite_spec(max_k: usize) -> impl Strategy<Value = OffspringSpec> {
    prop::collection::vec(0.0f64..1.0, 2..=max_k + 1).prop_filter_map("all-zero weights", |raw| {
        let total: f64 = raw.iter().sum();
        if total < 1e-3 {
            return None;
        }
        let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let last = w.len() - 1;
        w[last] += 1.0 - w.iter().sum::<f64>();
        OffspringSpec::finite(w).ok()
    })
}

fn parametric_spec() -> impl Strategy<Value = OffspringSpec> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|p| OffspringSpec::geometric(p).unwrap()),
        (0.2f64..8.0).prop_map(|m| OffspringSpec::poisson(m).unwrap()),
        ((0.05f64..0.95), 2u32..7).prop_map(|(p, r)| OffspringSpec::one_or_many(p, r).unwrap()),
        (1u32..12, 0.05f64..0.95).prop_map(|(n, p)| OffspringSpec::binomial(n, p).unwrap()),
    ]
}

fn any_spec() -> impl Strategy<Value = OffspringSpec> {
    prop_oneof![parametric_spec(), finite_spec(6)]
}

fn falling(k: u32, j: u32) -> f64 {
    (0..j).map(|i| f64::from(k) - f64::from(i)).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pgf_monotone_convex_normalized(spec in any_spec()) {
        prop_assert!((spec.pgf(1.0).unwrap() - 1.0).abs() <= 1e-12);
        let grid: Vec<f64> = (0..=50).map(|i| f64::from(i) / 50.0).collect();
        for w in grid.windows(2) {
            let (s1, s2) = (w[0], w[1]);
            let (f1, f2) = (spec.pgf(s1).unwrap(), spec.pgf(s2).unwrap());
            prop_assert!(f2 >= f1 - 1e-15);
            let mid = spec.pgf(0.5 * (s1 + s2)).unwrap();
            prop_assert!(mid <= 0.5 * (f1 + f2) + 1e-15);
        }
    }

    #[test]
    fn finite_derivatives_match_brute_force(spec in finite_spec(6), s in 0.0f64..=1.0, j in 0u32..8) {
        let OffspringSpec::Finite { weights } = &spec else { unreachable!() };
        let brute: f64 = weights
            .iter()
            .enumerate()
            .filter(|(k, _)| *k as u32 >= j)
            .map(|(k, w)| w * falling(k as u32, j) * s.powi(k as i32 - j as i32))
            .sum();
        let got = spec.pgf_deriv(s, j).unwrap();
        prop_assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));
    }

    #[test]
    fn derivatives_match_central_differences(spec in any_spec(), n in 1usize..=3) {
        let h = 1e-5;
        for i in 1..10 {
            let s = f64::from(i) / 10.0;
            for j in 1..=(n as u32 + 1) {
                let fd = (spec.pgf_deriv(s + h, j - 1).unwrap() - spec.pgf_deriv(s - h, j - 1).unwrap()) / (2.0 * h);
                let exact = spec.pgf_deriv(s, j).unwrap();
                let scale = exact.abs().max(1e-2);
                prop_assert!((fd - exact).abs() / scale <= 1e-6, "j={} s={} fd={} exact={}", j, s, fd, exact);
            }
        }
    }

    #[test]
    fn g_invariants(spec in any_spec(), n in 1usize..=4) {
        prop_assume!(spec.has_mass_above(n));
        let g = SubtreeGF::new(spec, n).unwrap();
        prop_assert!((g.g(1.0).unwrap() - 1.0).abs() <= 1e-12);
        for i in 0..=1000 {
            prop_assert!(g.g_prime(f64::from(i) / 1000.0).unwrap() >= 0.0);
        }
        let h = 1e-5;
        for i in 1..20 {
            let s = f64::from(i) / 20.0;
            let fd1 = (g.g(s + h).unwrap() - g.g(s - h).unwrap()) / (2.0 * h);
            let d1 = g.g_prime(s).unwrap();
            prop_assert!((fd1 - d1).abs() / d1.abs().max(1e-2) <= 1e-6, "g' at {}: {} vs {}", s, fd1, d1);
            let fd2 = (g.g_prime(s + h).unwrap() - g.g_prime(s - h).unwrap()) / (2.0 * h);
            let d2 = g.g_double_prime(s).unwrap();
            prop_assert!((fd2 - d2).abs() / d2.abs().max(1e-2) <= 1e-6, "g'' at {}: {} vs {}", s, fd2, d2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn n1_reduces_to_pgf(spec in finite_spec(6)) {
        prop_assume!(spec.has_mass_above(1));
        let g = SubtreeGF::new(spec.clone(), 1).unwrap();
        for i in 0..=20 {
            let s = f64::from(i) / 20.0;
            prop_assert!((g.g(s).unwrap() - spec.pgf(s).unwrap()).abs() <= 1e-12);
            prop_assert!((g.g_prime(s).unwrap() - spec.pgf_deriv(s, 1).unwrap()).abs() <= 1e-12);
            prop_assert!((g.g_double_prime(s).unwrap() - spec.pgf_deriv(s, 2).unwrap()).abs() <= 1e-12);
        }
    }
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |c, i| c * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(j: u32) -> f64 {
    (1..=j).map(f64::from).product()
}

#[test]
fn g_matches_family_closed_forms() {
    let grid: Vec<f64> = (0..=100).map(|i| f64::from(i) / 100.0).collect();
    for p in [0.3, 0.8, 0.95] {
        for n in 1..=4usize {
            let g = SubtreeGF::new(OffspringSpec::geometric(p).unwrap(), n).unwrap();
            for &s in &grid {
                let closed = 1.0 - (p * (1.0 - s) / (1.0 - p * s)).powi(n as i32);
                assert!(
                    (g.g(s).unwrap() - closed).abs() <= 1e-12,
                    "geometric p={p} N={n} s={s}"
                );
            }
        }
    }
    for m in [0.5, 3.3509, 7.0] {
        for n in 1..=4u32 {
            let g = SubtreeGF::new(OffspringSpec::poisson(m).unwrap(), n as usize).unwrap();
            for &s in &grid {
                let sum: f64 = (0..n)
                    .map(|j| ((1.0 - s) * m).powi(j as i32) / factorial(j))
                    .sum();
                let closed = (m * (s - 1.0)).exp() * sum;
                assert!(
                    (g.g(s).unwrap() - closed).abs() <= 1e-12,
                    "poisson m={m} N={n} s={s}"
                );
            }
        }
    }
    for (r, n) in [(3u32, 2u32), (4, 2), (4, 3), (6, 4)] {
        let p = 0.7;
        let g = SubtreeGF::new(OffspringSpec::one_or_many(p, r).unwrap(), n as usize).unwrap();
        for &s in &grid {
            let tail: f64 = (n..=r)
                .map(|j| binom(r, j) * (1.0 - s).powi(j as i32) * s.powi((r - j) as i32))
                .sum();
            let closed = 1.0 - p * tail;
            assert!(
                (g.g(s).unwrap() - closed).abs() <= 1e-12,
                "one-or-many r={r} N={n} s={s}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_is_smallest_and_consistent(spec in finite_spec(6), n in 2usize..=3) {
        prop_assume!(spec.has_mass_above(n));
        let g = SubtreeGF::new(spec, n).unwrap();
        let r = smallest_root(&g, ROOT_TOL).unwrap();
        if r.gamma > 0.0 && r.gamma < 1.0 {
            prop_assert!(r.a <= 1.0 + 1e-9);
            if r.class != Criticality::Critical {
                prop_assert!(r.residual.abs() <= ROOT_TOL);
            }
        }
        if r.class == Criticality::Critical && !r.boundary {
            prop_assert!(r.b > 0.0);
        }
        // no earlier crossing on a 10x finer grid
        let fine = 40_960;
        for i in 0..fine {
            let s = i as f64 / fine as f64;
            if s >= r.gamma - ROOT_TOL {
                break;
            }
            prop_assert!(g.g(s).unwrap() - s > 0.0, "crossing at {} before gamma {}", s, r.gamma);
        }
    }

    #[test]
    fn pemantle_bound_implies_upper_bound(spec in finite_spec(6), n in 1usize..=3, s0 in 1e-9f64..0.999_999_999) {
        prop_assume!(spec.has_mass_above(n));
        let g = SubtreeGF::new(spec, n).unwrap();
        let r = smallest_root(&g, ROOT_TOL).unwrap();
        if pemantle_bound(&g, s0).unwrap() {
            prop_assert!(r.gamma <= s0 + ROOT_TOL);
        }
    }
}

#[test]
fn geometric_n1_roots() {
    for i in 1..50 {
        let p = 0.5 + f64::from(i) / 100.0;
        let g = SubtreeGF::new(OffspringSpec::geometric(p).unwrap(), 1).unwrap();
        let r = smallest_root(&g, ROOT_TOL).unwrap();
        assert!(
            (r.gamma - (1.0 - p) / p).abs() <= ROOT_TOL,
            "p={p}: {}",
            r.gamma
        );
    }
}

#[test]
fn critical_families_are_tangent() {
    let cases = [
        (Family::Geometric, [0.5, 0.95]),
        (Family::Poisson, [2.0, 5.0]),
        (Family::OneOrMany { r: 3 }, [0.5, 0.99]),
    ];
    for (family, range) in cases {
        let c = find_critical(family, 2, range, ROOT_TOL).unwrap();
        assert!((c.a_at_critical - 1.0).abs() <= 1e-4, "{family}: {c:?}");
        assert!(c.gamma_critical > 0.0 && c.gamma_critical < 1.0);
        let eps = 1e-3;
        let above = SubtreeGF::new(family.spec(c.param_critical + eps).unwrap(), 2).unwrap();
        let below = SubtreeGF::new(family.spec(c.param_critical - eps).unwrap(), 2).unwrap();
        assert!(smallest_root(&above, ROOT_TOL).unwrap().gamma < 1.0);
        assert_eq!(
            smallest_root(&below, ROOT_TOL).unwrap().class,
            Criticality::Degenerate
        );
    }
}

#[test]
fn one_or_many_threshold_agrees_for_larger_n() {
    for n in 2..=4usize {
        let (p, g) = gw_nary::one_or_many_closed_form(n).unwrap();
        let c = find_critical(
            Family::OneOrMany { r: n as u32 + 1 },
            n,
            [0.3, 0.999],
            ROOT_TOL,
        )
        .unwrap();
        assert!((c.param_critical - p).abs() <= 1e-6);
        assert!((c.gamma_critical - g).abs() <= 1e-6);
    }
    // N = 3 closed form by hand: (2/3)(8/9)^{-3} = 243/256
    let c = find_critical(Family::OneOrMany { r: 4 }, 3, [0.5, 0.999], ROOT_TOL).unwrap();
    assert!((c.param_critical - 243.0 / 256.0).abs() <= 1e-6);
}

#[test]
fn classify_quoted_poisson_values() {
    // quoted to four digits; a_N is only 1 to within the rounding of gamma
    let g = SubtreeGF::new(OffspringSpec::poisson(3.3509).unwrap(), 2).unwrap();
    assert!((g.g_prime(0.4648).unwrap() - 1.0).abs() <= 1e-3);
    let c = find_critical(Family::Poisson, 2, [2.0, 5.0], ROOT_TOL).unwrap();
    let exact = SubtreeGF::new(OffspringSpec::poisson(c.param_critical).unwrap(), 2).unwrap();
    let r = gw_nary::classify(&exact, c.gamma_critical, gw_nary::solve::CRITICAL_BAND).unwrap();
    assert_eq!(r.class, Criticality::Critical);
    assert!((r.a - 1.0).abs() <= 1e-3);
}

#[test]
fn critical_reciprocal_increments_approach_half_b() {
    let poisson_m = find_critical(Family::Poisson, 2, [2.0, 5.0], ROOT_TOL)
        .unwrap()
        .param_critical;
    for spec in [
        OffspringSpec::geometric(0.8).unwrap(),
        OffspringSpec::poisson(poisson_m).unwrap(),
        OffspringSpec::one_or_many(8.0 / 9.0, 3).unwrap(),
    ] {
        let g = SubtreeGF::new(spec, 2).unwrap();
        let root = smallest_root(&g, ROOT_TOL).unwrap();
        let curve = iterate_survival(&g, &root, 10_000).unwrap();
        let fit = fit_asymptote(&curve, &root).unwrap();
        assert!(fit.max_rel_residual <= 0.05, "{fit:?}");
        for t in 1..=curve.t_end() {
            assert!(curve.gamma_seq[t] <= root.gamma + 1e-12);
            assert!(curve.gamma_seq[t] > curve.gamma_seq[t - 1]);
        }
    }
}

#[test]
fn chayes_binomial_case() {
    // threshold for f(s) = (1-p+ps)^9 and N = 8 lies near p = 0.9925
    let c = find_critical(Family::Binomial { n: 9 }, 8, [0.9, 0.999], ROOT_TOL).unwrap();
    assert!(
        (c.param_critical - 0.992_483_851_701_192).abs() < 1e-9,
        "{c:?}"
    );
    let g = SubtreeGF::new(OffspringSpec::binomial(9, 0.995).unwrap(), 8).unwrap();
    let r = smallest_root(&g, ROOT_TOL).unwrap();
    assert!(r.gamma > 0.0 && r.gamma < 1.0);
    // grid oracle
    let n = 100_000;
    let first = (0..=n)
        .map(|i| i as f64 / n as f64)
        .find(|&s| g.g(s).unwrap() - s <= 0.0)
        .unwrap();
    assert!(r.gamma <= first && r.gamma > first - 1.0 / n as f64);
}

#[test]
fn reports_round_trip_through_json() {
    let g = SubtreeGF::new(OffspringSpec::geometric(0.9).unwrap(), 2).unwrap();
    let root = smallest_root(&g, ROOT_TOL).unwrap();
    let text = serde_json::to_string(&root).unwrap();
    assert_eq!(
        serde_json::from_str::<gw_nary::RootReport>(&text).unwrap(),
        root
    );

    let curve = iterate_survival(&g, &root, 100).unwrap();
    let fit = fit_asymptote(&curve, &root).unwrap();
    let text = serde_json::to_string(&fit).unwrap();
    assert_eq!(
        serde_json::from_str::<gw_nary::AsymptoteFit>(&text).unwrap(),
        fit
    );
    let text = serde_json::to_string(&curve).unwrap();
    assert_eq!(
        serde_json::from_str::<gw_nary::SurvivalCurve>(&text).unwrap(),
        curve
    );

    let c = find_critical(Family::Poisson, 2, [2.0, 5.0], ROOT_TOL).unwrap();
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(
        serde_json::from_str::<gw_nary::CriticalReport>(&text).unwrap(),
        c
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_is_exact(gamma in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..100.0, p in 0.0f64..1.0) {
        let r = gw_nary::RootReport {
            gamma, a, b,
            class: Criticality::Subcritical,
            bracket: [gamma * 0.5, gamma],
            tol: 1e-12,
            boundary: false,
            residual: a - b,
        };
        let back: gw_nary::RootReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
        let est = gw_nary::McEstimate { p_hat: p, n_trials: 12345, half_width_95: p * 1e-3, budget_exhausted_count: 7 };
        let back: gw_nary::McEstimate = serde_json::from_str(&serde_json::to_string(&est).unwrap()).unwrap();
        prop_assert_eq!(back, est);
        let spec = OffspringSpec::geometric(p.clamp(1e-6, 1.0 - 1e-6)).unwrap();
        let back: OffspringSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }
}
