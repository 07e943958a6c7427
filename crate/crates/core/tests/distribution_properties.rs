use seatcalc::distributions::{lognormal_mean_cumulative, mark_residual, std_normal_cdf};
use seatcalc::{
    expected_family_bias, monte_carlo_bias, unbiased_mark, unbiased_mark_generic,
    verify_alabama_immunity, DistributionMarks, PopulationDistribution, SignpostRule,
};

const TABLE_IV_QG: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];
const TABLE_IV_F: [u64; 6] = [0, 1, 2, 5, 10, 20];

/// Composite Simpson with a fixed, fine grid.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

#[test]
fn lognormal_closed_form_matches_fine_quadrature() {
    for qg in TABLE_IV_QG {
        for f in TABLE_IV_F {
            let closed = lognormal_mean_cumulative(qg, 1.0, f);
            let ln_qg = qg.ln();
            let integrand = |q: f64| if q <= 0.0 { 0.0 } else { std_normal_cdf(q.ln() - ln_qg) };
            let numeric = if f == 0 {
                // q = u^2 removes the square-root-like onset at zero.
                simpson(|u| integrand(u * u) * 2.0 * u, 0.0, 1.0, 20_000)
            } else {
                simpson(integrand, f as f64, f as f64 + 1.0, 20_000)
            };
            assert!((closed - numeric).abs() < 1e-9, "qg={qg} f={f} {closed} vs {numeric}");
        }
    }
}

#[test]
fn every_emitted_mark_satisfies_its_defining_equation() {
    for qg in TABLE_IV_QG {
        let dist = PopulationDistribution::lognormal(qg.ln(), 1.0).unwrap();
        for f in TABLE_IV_F {
            let r = unbiased_mark(&dist, f, 1.0).unwrap();
            assert!(mark_residual(&dist, f, 1.0, r).abs() <= 1e-10, "qg={qg} f={f}");
        }
    }
    for beta in -4..=4 {
        let dist = PopulationDistribution::power_law(beta as f64, 0.5, 50.0).unwrap();
        for f in 0..=20u64 {
            if f == 0 && beta <= -1 {
                continue;
            }
            let r = unbiased_mark(&dist, f, 1.0).unwrap();
            let res = mark_residual(&dist, f, 1.0, r);
            let span = dist.cumulative(f as f64 + 1.0) - dist.cumulative(f as f64);
            assert!(res.abs() <= 1e-10, "beta={beta} f={f} res={res}");
            assert!(res.abs() <= 1e-10 * span.abs(), "beta={beta} f={f} rel={}", res / span);
        }
    }
}

#[test]
fn quadrature_path_reproduces_power_law_marks() {
    for beta in -3..=3 {
        let dist = PopulationDistribution::power_law(beta as f64, 0.5, 50.0).unwrap();
        let rule = SignpostRule::PowerLaw(beta as f64);
        for f in 0..=20u64 {
            for d in [0.1, 1.0, 10.0] {
                let r = unbiased_mark_generic(&dist, f, d).unwrap();
                assert!((r - rule.mark(f)).abs() < 1e-8, "beta={beta} f={f} d={d} r={r}");
            }
        }
    }
}

#[test]
fn quadrature_path_reproduces_lognormal_marks() {
    for qg in TABLE_IV_QG {
        let dist = PopulationDistribution::lognormal(qg.ln(), 1.0).unwrap();
        for f in TABLE_IV_F {
            let a = unbiased_mark(&dist, f, 1.0).unwrap();
            let b = unbiased_mark_generic(&dist, f, 1.0).unwrap();
            assert!((a - b).abs() < 1e-8, "qg={qg} f={f}");
        }
    }
}

#[test]
fn lognormal_marks_are_alabama_immune() {
    // v_g = 1, so q_g = 1 / D runs over [1, 20].
    let dist = PopulationDistribution::lognormal(0.0, 1.0).unwrap();
    let marks = DistributionMarks::new(dist);
    let grid: Vec<f64> = (0..=200).map(|i| 0.05 * 20f64.powf(i as f64 / 200.0)).collect();
    for f in 0..=20 {
        let rep = verify_alabama_immunity(&marks, f, &grid).unwrap();
        assert!(rep.is_immune(), "f={f} min slope {}", rep.min_slope());
    }
}

#[test]
fn webster_over_serves_small_lognormal_family() {
    let dist = PopulationDistribution::lognormal(5f64.ln(), 1.0).unwrap();
    let b = expected_family_bias(&dist, 1.0, 0, 0.5).unwrap();
    assert!(b > 0.0);
    let mc = monte_carlo_bias(&dist, 1.0, &SignpostRule::Webster, 20_000, 50, 5).unwrap();
    assert!(mc[0].mean > 4.0 * mc[0].std_error);
}

#[test]
fn matched_marks_are_unbiased_in_simulation() {
    let dist = PopulationDistribution::lognormal(5f64.ln(), 1.0).unwrap();
    let marks = DistributionMarks::new(dist);
    let mc = monte_carlo_bias(&dist, 1.0, &marks, 20_000, 50, 9).unwrap();
    for fb in mc.iter().filter(|b| b.occupied > 100) {
        assert!(fb.mean.abs() < 4.0 * fb.std_error, "family {} {:?}", fb.family, fb);
    }
}

#[test]
fn monte_carlo_ignores_thread_count() {
    let dist = PopulationDistribution::lognormal(5f64.ln(), 1.0).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo_bias(&dist, 1.0, &SignpostRule::Webster, 3000, 20, 4).unwrap())
    };
    assert_eq!(run(1), run(4));
}
