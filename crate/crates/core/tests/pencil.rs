use frobtoda::flatchart::Site;
use frobtoda::frobstruct::{eta, eta_inverse, unity_cotangent, euler_field};
use frobtoda::laurent::{c, re, C64};
use frobtoda::pencil::*;
use frobtoda::point::{pair, random_covector, random_point, random_tangent, PointNM, Settings, TangentVec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SHAPES: [(usize, usize); 4] = [(1, 1), (2, 1), (1, 2), (2, 3)];

fn sites(seed: u64) -> Vec<Site> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Settings::default();
    let mut out = vec![Site::new(&PointNM::p0(), &s).unwrap()];
    for (n, m) in SHAPES {
        out.push(Site::new(&random_point(n, m, &mut rng, &s), &s).unwrap());
    }
    out
}

/// Sample points outside (`outer`) or inside the unit circle.
fn ring(count: usize, outer: bool) -> Vec<C64> {
    (0..count)
        .map(|k| {
            let r = if outer { 1.6 + 0.1 * (k % 4) as f64 } else { 0.35 + 0.05 * (k % 4) as f64 };
            C64::from_polar(r, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / count as f64)
        })
        .collect()
}

#[test]
fn g_inverse_recovers_covectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for site in sites(20) {
        let (n, m) = (site.n(), site.m());
        for _ in 0..20 {
            let w = random_covector(n, m, 10, &mut rng);
            let back = g_inverse(&site, &g_map(&site.point, &w)).unwrap();
            let err = back.max_abs_diff(&w);
            assert!(err < 1e-9, "({n},{m}) {err}");
        }
    }
}

#[test]
fn theta_route_inverts_g_on_tangent_vectors() {
    // the expansions of 1/a′ at ∞ and 1/â′ at 0 converge on the circle here
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for site in sites(20) {
        if !theta_route_applies(&site).unwrap() {
            assert!(site.n() > 1);
            continue;
        }
        let (n, m) = (site.n(), site.m());
        for _ in 0..20 {
            let x = random_tangent(n, m, 10, &mut rng);
            let w = g_inverse_theta(&site, &x).unwrap();
            let err = g_map(&site.point, &w).max_abs_diff(&x);
            assert!(err < 1e-9, "({n},{m}) {err}");
        }
    }
}

#[test]
fn dense_and_theta_inverses_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let site = sites(20).swap_remove(0);
    let x = random_tangent(1, 1, 8, &mut rng);
    let a = g_inverse_theta(&site, &x).unwrap();
    let b = g_inverse_dense(&site.point, &x).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-7, "{}", a.max_abs_diff(&b));
}

#[test]
fn both_routes_agree_and_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for site in sites(23) {
        let (n, m) = (site.n(), site.m());
        let p = &site.point;
        for _ in 0..5 {
            let w1 = random_covector(n, m, 8, &mut rng);
            let w2 = random_covector(n, m, 8, &mut rng);
            let b = intersection_cotangent(p, &w1, &w2);
            assert!((b - intersection_cotangent(p, &w2, &w1)).norm() < 1e-12);
            let e = intersection_via_euler(p, &w1, &w2);
            assert!((b - e).norm() < 1e-9, "({n},{m}) {b} vs {e}");
        }
        // ⟨ω, g(e*)⟩ = i_E(ω·e*) = ⟨ω, E⟩
        assert!(g_map(p, &unity_cotangent(p)).max_abs_diff(&euler_field(p)) < 1e-10);
    }
}

#[test]
fn tangent_form_matches_quadrature() {
    // the circle formula is derived from the Θ route and shares its domain
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for site in sites(25) {
        let (n, m) = (site.n(), site.m());
        let applies = theta_route_applies(&site).unwrap();
        for _ in 0..5 {
            // X₁ = g(ω₁), so (X₁, X₂) = ⟨ω₁, X₂⟩
            let w1 = random_covector(n, m, 8, &mut rng);
            let x1 = g_map(&site.point, &w1);
            let x2 = random_tangent(n, m, 8, &mut rng);
            let direct = pair(&w1, &x2);
            let quad = intersection_tangent_quadrature(&site, &x1, &x2).unwrap();
            let err = (direct - quad).norm();
            assert!(!applies || err < 1e-7, "({n},{m}) {direct} vs {quad}");
        }
    }
}

#[test]
fn generating_functions_on_a_grid() {
    for site in sites(26) {
        let p = &site.point;
        let zero = TangentVec::zero();
        for (alpha, beta) in [
            (Letter::A, Letter::A),
            (Letter::A, Letter::AHat),
            (Letter::AHat, Letter::A),
            (Letter::AHat, Letter::AHat),
        ] {
            let ps = ring(16, alpha == Letter::A);
            let mut qs = ring(16, beta == Letter::A);
            // same letter: keep the two rings apart
            if alpha == beta {
                qs.iter_mut().for_each(|q| *q *= if beta == Letter::A { 1.5 } else { 0.5 });
            }
            for &qv in &qs {
                let dq = beta.differential(p, qv);
                let (e, g) = (eta(p, &dq), g_map(p, &dq));
                for &pv in &ps {
                    let dp = alpha.differential(p, pv);
                    let mg = metric_generating(p, alpha, beta, pv, qv);
                    let ig = intersection_generating(p, alpha, beta, pv, qv);
                    let tol = 1e-9 * mg.norm().max(ig.norm()).max(1.0);
                    assert!((pair(&dp, &e) - mg).norm() < tol, "{alpha:?}{beta:?} {pv} {qv}");
                    assert!((pair(&dp, &g) - ig).norm() < tol, "{alpha:?}{beta:?} {pv} {qv}");
                    let bc = bracket_coefficients(p, &zero, alpha, beta, pv, qv);
                    assert!((bc.first.leading - mg).norm() < tol);
                    assert!((bc.second.leading - ig).norm() < tol);
                    assert!(bc.first.subleading.norm() == 0.0 && bc.second.subleading.norm() == 0.0);
                }
            }
        }
    }
}

#[test]
fn pencil_is_nondegenerate_away_from_the_spectrum() {
    let s_values: Vec<C64> = (0..8).map(|k| C64::from_polar(3.0, 0.3 + 0.7 * k as f64)).collect();
    for site in sites(27) {
        let r = pencil_nondegeneracy(&site.point, &s_values, 12);
        assert!(r.min_ratio > 1e-8, "({},{}) {r:?}", site.n(), site.m());
    }
    // g itself, s = 0, and η alone, as a sanity check of the assembly
    let p = PointNM::p0();
    let r = pencil_nondegeneracy(&p, &[re(0.0), c(1e8, 0.0)], 12);
    assert!(r.min_ratio > 1e-8, "{r:?}");
    let site = Site::new(&p, &Settings::default()).unwrap();
    let x = eta(&p, &p.da(re(2.0)));
    assert!(eta_inverse(&site, &x).unwrap().omega.max_abs_diff(&p.da(re(2.0))) < 1e-9);
}
