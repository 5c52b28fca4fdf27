use frobtoda::flatchart::{coord_list, Coord, Site};
use frobtoda::frobstruct::*;
use frobtoda::laurent::{c, re, winding_number, LaurentSeries, C64};
use frobtoda::point::{random_covector, random_point, random_tangent, CotangentVec, PointNM, Settings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SHAPES: [(usize, usize); 4] = [(1, 1), (2, 1), (1, 2), (2, 3)];

fn sites(seed: u64, per_shape: usize) -> Vec<Site> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Settings::default();
    let mut out = vec![Site::new(&PointNM::p0(), &s).unwrap()];
    for (n, m) in SHAPES {
        for _ in 0..per_shape {
            out.push(Site::new(&random_point(n, m, &mut rng, &s), &s).unwrap());
        }
    }
    out
}

#[test]
fn flat_gram_is_constant() {
    for site in sites(11, 1) {
        let (n, m) = (site.n(), site.m());
        let labels = coord_list(n, m, 3);
        let frames: Vec<_> = labels.iter().map(|&l| site.frame(l).unwrap()).collect();
        let (inf, zero) = ell_prime_inverses(&site).unwrap();
        for (i, a) in labels.iter().enumerate() {
            let (partner, val) = a.dual(n, m);
            for (j, b) in labels.iter().enumerate() {
                let g = metric_tangent_with(&site, &frames[i], &frames[j], &inf, &zero).unwrap();
                let want = if *b == partner { val } else { 0.0 };
                assert!((g - re(want)).norm() < 1e-8, "({n},{m}) <{a},{b}> = {g}");
            }
        }
    }
}

#[test]
fn metric_maps_invert_each_other() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for site in sites(12, 1) {
        let (n, m) = (site.n(), site.m());
        for _ in 0..3 {
            let x = random_tangent(n, m, 12, &mut rng);
            let inv = eta_inverse(&site, &x).unwrap();
            assert!(eta(&site.point, &inv.omega).max_abs_diff(&x) < 1e-10);
            assert!(inv.cond_k.is_finite() && inv.cond_khat.is_finite());
            let w = random_covector(n, m, 12, &mut rng);
            let back = eta_inverse(&site, &eta(&site.point, &w)).unwrap().omega;
            assert!(back.max_abs_diff(&w) < 1e-10);
        }
    }
}

#[test]
fn cotangent_metric_is_symmetric_and_matches_tangent_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for site in sites(13, 1) {
        let (n, m) = (site.n(), site.m());
        let p = &site.point;
        let w1 = random_covector(n, m, 10, &mut rng);
        let w2 = random_covector(n, m, 10, &mut rng);
        let g12 = metric_cotangent(p, &w1, &w2);
        assert!((g12 - metric_cotangent(p, &w2, &w1)).norm() < 1e-12);
        let gt = metric_tangent(&site, &eta(p, &w1), &eta(p, &w2)).unwrap();
        assert!((g12 - gt).norm() < 1e-9, "{g12} vs {gt}");
    }
}

#[test]
fn frobenius_algebra_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for site in sites(14, 1) {
        let (n, m) = (site.n(), site.m());
        let p = &site.point;
        let w: Vec<CotangentVec> = (0..3).map(|_| random_covector(n, m, 8, &mut rng)).collect();
        let ab = product_cotangent(p, &w[0], &w[1]);
        assert!(ab.max_abs_diff(&product_cotangent(p, &w[1], &w[0])) < 1e-12);
        let l = product_cotangent(p, &ab, &w[2]);
        let r = product_cotangent(p, &w[0], &product_cotangent(p, &w[1], &w[2]));
        assert!(l.max_abs_diff(&r) < 1e-9, "assoc {}", l.max_abs_diff(&r));
        let e = unity_cotangent(p);
        assert!(product_cotangent(p, &e, &w[0]).max_abs_diff(&w[0]) < 1e-13);
        let inv_l = metric_cotangent(p, &ab, &w[2]);
        let inv_r = metric_cotangent(p, &w[0], &product_cotangent(p, &w[1], &w[2]));
        assert!((inv_l - inv_r).norm() < 1e-10);

        let x = random_tangent(n, m, 8, &mut rng);
        let ex = product_tangent(&site, &unity_tangent(), &x).unwrap();
        assert!(ex.max_abs_diff(&x) < 1e-10);
    }
}

/// `Σ_i Π_{j≠i} α_j′(p_j)/(p_i⁻¹ − p_j⁻¹) dα_i(p_i)`.
fn kfold(p: &PointNM, pts: &[(bool, C64)]) -> CotangentVec {
    let ap = p.a.deriv();
    let ahp = p.ahat.deriv();
    let d = |(hat, q): (bool, C64)| if hat { p.dahat(q) } else { p.da(q) };
    let dv = |(hat, q): (bool, C64)| if hat { ahp.eval(q) } else { ap.eval(q) };
    let mut acc = CotangentVec::zero();
    for i in 0..pts.len() {
        let mut coef = re(1.0);
        for j in 0..pts.len() {
            if j != i {
                coef *= dv(pts[j]) / (pts[i].1.inv() - pts[j].1.inv());
            }
        }
        acc = &acc + &d(pts[i]).scale(coef);
    }
    acc
}

#[test]
fn generating_products_match_closed_form() {
    for site in sites(15, 1) {
        let p = &site.point;
        let pts = [(false, c(2.0, 0.3)), (true, c(0.5, -0.1)), (false, c(-0.4, 3.0))];
        let d = |(hat, q): (bool, C64)| if hat { p.dahat(q) } else { p.da(q) };
        let two = product_cotangent(p, &d(pts[0]), &d(pts[1]));
        assert!(two.max_abs_diff(&kfold(p, &pts[..2])) < 1e-9);
        let three = product_cotangent(p, &two, &d(pts[2]));
        let err = three.max_abs_diff(&kfold(p, &pts));
        assert!(err < 1e-9, "k=3 {err}");
    }
}

#[test]
fn three_tensor_matches_closed_forms() {
    for site in sites(16, 1) {
        let (n, m) = (site.n(), site.m());
        let labels = coord_list(n, m, 2);
        let mut fr = Frames::new(site.clone(), &labels).unwrap();
        for (iu, &u) in labels.iter().enumerate() {
            for (iv, &v) in labels.iter().enumerate().skip(iu) {
                for &w in labels.iter().skip(iv) {
                    let got = fr.c(u, v, w).unwrap();
                    let want = three_tensor_closed_form(&site, u, v, w).unwrap();
                    assert!(
                        (got - want).norm() < 1e-8,
                        "({n},{m}) c({u},{v},{w}) = {got} vs {want}"
                    );
                    let sym = fr.c(w, u, v).unwrap();
                    assert!((got - sym).norm() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn unity_axis_gives_the_metric() {
    let site = sites(17, 1).pop().unwrap();
    let (n, m) = (site.n(), site.m());
    let labels = coord_list(n, m, 2);
    let mut fr = Frames::new(site.clone(), &labels).unwrap();
    let e = Coord::Hhat(m as i32);
    for &u in &labels {
        for &v in &labels {
            let (partner, val) = u.dual(n, m);
            let want = if v == partner { val } else { 0.0 };
            assert!((fr.c(e, u, v).unwrap() - re(want)).norm() < 1e-9);
        }
    }
}

#[test]
fn smeared_idempotents_diagonalise() {
    for site in sites(18, 1) {
        let p = &site.point;
        let ns = site.nodes.len();
        let f = semisimple_f(p, ns).unwrap();
        let phi = LaurentSeries::from_terms(&[(0, re(1.0)), (2, c(0.3, 0.1)), (-1, re(0.2))]);
        let psi = LaurentSeries::from_terms(&[(1, re(0.5)), (-2, c(-0.1, 0.4))]);
        let fs = site.from_values(f.values.clone());
        let a = smeared_idempotent(&site, &phi).unwrap();
        let b = smeared_idempotent(&site, &psi).unwrap();
        let fpp = &(&phi * &psi) * &fs.shift(-1);
        let g = metric_cotangent(p, &a, &b);
        assert!((g - fpp.coeff(0)).norm() < 1e-9, "{g} vs {}", fpp.coeff(0));
        // smeared on the circle, the product picks up the opposite sign
        let prod = product_cotangent(p, &a, &b);
        let want = smeared_idempotent(&site, &fpp.scale(re(-1.0))).unwrap();
        assert!(prod.max_abs_diff(&want) < 1e-9, "{}", prod.max_abs_diff(&want));
        // so the unity is Ω_{−p/f}, provided the circle expansions of
        // 1/(z a′) and 1/(z â′) agree with those at ∞ and at 0
        let wind = |g: &LaurentSeries| winding_number(&g.to_samples(ns).unwrap().values).unwrap();
        let inside = wind(&p.a.deriv()).round() as i32 == p.ni() - 1
            && wind(&p.ahat.deriv()).round() as i32 == -p.mi() - 1;
        let inv_f = site.from_values(f.values.iter().map(|v| -v.inv()).collect());
        let e = smeared_idempotent(&site, &inv_f.shift(1)).unwrap();
        let d = e.max_abs_diff(&unity_cotangent(p));
        // 1/f decays slowly when a′ or â′ nearly vanishes, hence the looser bound
        if inside {
            assert!(d < 1e-6, "({},{}) {d}", p.n, p.m);
        } else {
            assert!(d > 1e-3, "({},{}) {d}", p.n, p.m);
        }
    }
}

#[test]
fn semisimplicity_fails_where_a_prime_vanishes() {
    // a′ = 2z − 2 vanishes at z = 1
    let a = LaurentSeries::from_terms(&[(2, re(1.0)), (1, re(-2.0))]);
    let p = PointNM::new(2, 1, a, LaurentSeries::monomial(-1, re(0.25))).unwrap();
    let r = semisimple_diagnostic(&p, 512, 1e-6).unwrap();
    assert!(!r.pass && r.min_abs_f < 1e-12);
}
