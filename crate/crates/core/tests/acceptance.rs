//! Acceptance run: one PASS/FAIL line per criterion, indented detail below.
//! Failing criteria are reported, not asserted, so the binary exits 0.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use frobtoda::flatchart::{Coord, Site};
use frobtoda::frobstruct::{semisimple_diagnostic, Frames};
use frobtoda::laurent::{c, re, LaurentSeries, C64};
use frobtoda::pencil::{bracket_coefficients, Letter};
use frobtoda::point::{pair, random_point, PointNM, Settings};
use frobtoda::potential::{
    cross_term, double_contour_quadrature, double_contour_term, fnm_third_derivative, potential_third_derivative,
};
use frobtoda::report::Report;
use frobtoda::suites::{
    algebra_suite, euler_suite, metric_suite, pencil_suite, potential_suite, reduction_suite, wdvv_suite, SuiteConfig,
};
use frobtoda::toda::{
    evolve, flow_rhs, hydrodynamic_split, max_abs_diff, poisson_apply, toda_cross_residual, variational_gradient, Flow,
    LoopField, Operator,
};

const SHAPES: [(usize, usize); 4] = [(1, 1), (2, 1), (1, 2), (2, 3)];

struct Tally {
    failed: Vec<u32>,
}

impl Tally {
    fn criterion(&mut self, id: u32, title: &str, pass: bool) {
        println!("{} criterion {id}: {title}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

fn detail(pass: bool, text: impl AsRef<str>) -> bool {
    println!("    [{}] {}", if pass { "ok" } else { "fail" }, text.as_ref());
    pass
}

/// Worst error and verdict of `check` pooled over reports.
fn pooled(reports: &[&Report], check: &str) -> (f64, bool, usize) {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut count = 0;
    for r in reports {
        for rec in r.records.iter().filter(|x| x.check == check) {
            count += 1;
            ok &= rec.pass;
            let e = if rec.abs_err.is_nan() { rec.value_re } else { rec.abs_err };
            worst = worst.max(e);
        }
    }
    (worst, ok && count > 0, count)
}

fn pooled_line(reports: &[&Report], check: &str, what: &str) -> bool {
    let (worst, ok, n) = pooled(reports, check);
    detail(ok, format!("{what}: {n} checks, worst {worst:.2e}"))
}

fn shape_label(p: &PointNM) -> String {
    format!("({},{})", p.n, p.m)
}

/// The reference point, then three random admissible points per shape.
fn test_points(s: &Settings) -> Vec<PointNM> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = vec![PointNM::p0()];
    for (n, m) in SHAPES {
        for _ in 0..3 {
            out.push(random_point(n, m, &mut rng, s));
        }
    }
    out
}

/// A loop whose low coefficients all move with `x`.
fn busy_loop(n: usize, m: usize, grid: usize) -> LoopField {
    LoopField::from_fn(grid, |x| {
        let (ni, mi) = (n as i32, m as i32);
        let e = C64::from_polar(1.0, x);
        let mut a = vec![(ni, re(1.0))];
        for k in -2..ni {
            a.push((k, c(0.03 * x.sin(), 0.01) * (1.0 + k.abs() as f64).recip() + e * 0.01));
        }
        let mut ah = vec![(-mi, re(0.25 + 0.02 * (2.0 * x).cos()))];
        for k in (-mi + 1)..=ni {
            ah.push((k, c(0.02 * x.cos(), -0.01 * x.sin())));
        }
        // ζ stays close to z
        ah.push((1, re(-1.0)));
        if ni >= 2 {
            ah.push((ni, re(1.0)));
        }
        PointNM::new(n, m, LaurentSeries::from_terms(&a), LaurentSeries::from_terms(&ah)).unwrap()
    })
    .unwrap()
}

/// Real perturbation of the reference point with nonzero Hamiltonians.
fn perturbed_loop(grid: usize) -> LoopField {
    LoopField::from_fn(grid, |x| {
        let a = LaurentSeries::from_terms(&[(1, re(1.0)), (0, re(0.1 + 0.02 * x.sin())), (-1, re(0.03 * x.cos()))]);
        let ah = LaurentSeries::from_terms(&[(-1, re(0.25 + 0.01 * x.cos())), (0, re(0.02 + 0.05 * (2.0 * x).sin()))]);
        PointNM::new(1, 1, a, ah).unwrap()
    })
    .unwrap()
}

fn main() {
    let start = Instant::now();
    let s = Settings::default();
    let mut t = Tally { failed: Vec::new() };
    let points = test_points(&s);
    let sites: Vec<Site> = points.iter().map(|p| Site::new(p, &s).expect("test point")).collect();
    let cfg_for = |k: usize| SuiteConfig {
        seed: 100 + k as u64,
        ..SuiteConfig::default()
    };
    // random points only, as the criterion asks; P₀ rides along in later ones
    let clock = Instant::now();
    let metric: Vec<Report> = sites.iter().enumerate().map(|(k, x)| metric_suite(x, &cfg_for(k)).unwrap()).collect();
    let metric_time = clock.elapsed().as_secs_f64();
    let random_metric: Vec<&Report> = metric.iter().skip(1).collect();

    // 1
    {
        let gram = pooled_line(&random_metric, "gram", "Gram of flat frames, |i|<=6 plus h and hhat, 12 random points, tol 1e-8");
        let fast = detail(metric_time < 60.0, format!("runtime {metric_time:.2} s (limit 60 s)"));
        t.criterion(1, "flat-metric Gram matrix is the constant block form", gram && fast);
    }

    let pencil: Vec<Report> = sites.iter().enumerate().map(|(k, x)| pencil_suite(x, &cfg_for(k)).unwrap()).collect();
    let pencil_refs: Vec<&Report> = pencil.iter().collect();
    let metric_refs: Vec<&Report> = metric.iter().collect();

    // 2
    {
        let mut ok = pooled_line(&metric_refs, "eta_tangent_round_trip", "eta(eta^-1 X) = X, 20 per point, tol 1e-10");
        ok &= pooled_line(&metric_refs, "eta_covector_round_trip", "eta^-1(eta w) = w, 20 per point, tol 1e-10");
        ok &= pooled_line(&pencil_refs, "g_covector_round_trip", "g^-1(g w) = w, 20 per point, tol 1e-9");
        let (worst, pass, n) = pooled(&pencil_refs, "g_tangent_round_trip");
        ok &= detail(
            pass,
            format!("g(g^-1 X) = X where the inverse series converge on the circle: {n} checks, worst {worst:.2e}"),
        );
        t.criterion(2, "eta and g are bijective", ok);
    }

    // 3
    {
        let alg: Vec<Report> = sites.iter().enumerate().map(|(k, x)| algebra_suite(x, &cfg_for(k)).unwrap()).collect();
        let r: Vec<&Report> = alg.iter().collect();
        let mut ok = pooled_line(&r, "commutativity", "commutativity, tol 1e-12");
        ok &= pooled_line(&r, "associativity", "associativity, tol 1e-9");
        ok &= pooled_line(&r, "unity", "unity, tol 1e-13");
        ok &= pooled_line(&r, "invariance", "invariance, tol 1e-10");
        ok &= pooled_line(&r, "generating_product_3", "threefold product of generating covectors vs closed form, tol 1e-9");
        t.criterion(3, "Frobenius algebra axioms", ok);
    }

    // 4
    {
        let chosen: Vec<&Site> = [0usize, 1, 4, 7].iter().map(|&k| &sites[k]).collect();
        let mut reports = Vec::new();
        let mut stated_worst: f64 = 0.0;
        for site in &chosen {
            let r = potential_suite(site, &SuiteConfig::default()).unwrap();
            for rec in r.records.iter().filter(|x| x.check == "third_derivative_stated_gap") {
                stated_worst = stated_worst.max(rec.value_re);
            }
            reports.push(r);
        }
        // tensor entries here are O(1), so an absolute gap reads as relative
        let stated_ok = stated_worst <= 1e-5;
        let r: Vec<&Report> = reports.iter().collect();
        let mut ok = pooled_line(&r, "third_derivative", "FD third derivatives with the cubic h-term vs 3-tensor, |i|<=1, tol 1e-5 rel");
        ok &= detail(
            stated_ok,
            format!("same without the cubic h-term (potential exactly as stated), worst gap {stated_worst:.2e}"),
        );
        // anchor at the reference point
        let h0 = Coord::Hhat(0);
        let site = &sites[0];
        let mut fr = Frames::new(site.clone(), &[h0]).unwrap();
        let tensor = fr.c(h0, h0, h0).unwrap();
        let want = site.hhat(0).unwrap().exp();
        ok &= detail(
            (tensor - want).norm() < 1e-7,
            format!("c(hhat0,hhat0,hhat0) = e^hhat0 = {:.6} at P0: 3-tensor gives {:.3e}", want.re, tensor.norm()),
        );
        let fnm = fnm_third_derivative(site, h0, h0, h0).unwrap();
        let fd = potential_third_derivative(&site.point, h0, h0, h0, 1e-3, &s).unwrap().corrected();
        detail((fnm - want).norm() < 1e-7, format!("its finite-part share d3F_NM = {:.6}", fnm.re));
        detail((fd - tensor).norm() < 1e-7, format!("FD of the full potential agrees with the tensor: {:.3e}", fd.norm()));
        t.criterion(4, "potential reproduces the 3-tensor", ok);
    }

    // 5
    {
        let site = &sites[0];
        let p = &site.point;
        let mut ok = true;
        let mut anchor = |name: &str, got: C64, want: C64| {
            ok &= detail((got - want).norm() < 1e-9, format!("{name} = {:.12} (want {:.12})", got.re, want.re));
        };
        anchor("t^-2", site.t(-2).unwrap(), re(0.25));
        anchor("t^-2 by the curve formula", site.t_curve_formula(-2).unwrap(), re(0.25));
        anchor("t^-4", site.t(-4).unwrap(), re(-3.0 / 32.0));
        anchor("hhat^0", site.hhat(0).unwrap(), re(0.25f64.ln()));
        anchor("hhat^1", site.hhat(1).unwrap(), re(0.0));
        anchor("double contour term", double_contour_term(p), re(-0.375));
        anchor("double contour term by quadrature", double_contour_quadrature(p, 0.9, 1.1, 256), re(-0.375));
        anchor("cross term", cross_term(site, s.t_max).unwrap().value, re(0.0));
        t.criterion(5, "anchor scalars at P0", ok);
    }

    // 6
    {
        let w: Vec<Report> = sites.iter().enumerate().map(|(k, x)| wdvv_suite(x, &cfg_for(k)).unwrap()).collect();
        let e: Vec<Report> = points.iter().enumerate().map(|(k, p)| euler_suite(p, &cfg_for(k)).unwrap()).collect();
        let (wr, er): (Vec<&Report>, Vec<&Report>) = (w.iter().collect(), e.iter().collect());
        let mut ok = pooled_line(&wr, "wdvv", "WDVV over |i|<=1, index sum over |i|<=10, tol 1e-6");
        ok &= pooled_line(&er, "euler_identity", "Euler identity on a, ahat, zeta, l, tol 1e-13");
        ok &= pooled_line(&er, "quasi_homogeneity", "quasi-homogeneity of c under the Euler flow, tol 1e-6");
        t.criterion(6, "WDVV, Euler identity and quasi-homogeneity", ok);
    }

    // 7
    {
        let mut ok = true;
        for k in [0usize, 1, 4, 7] {
            let p = &points[k];
            let r = reduction_suite(p, &SuiteConfig::default()).unwrap();
            let devs: Vec<String> = r
                .records
                .iter()
                .filter(|x| x.check == "reduction_deviation")
                .map(|x| format!("{:.1e}", x.value_re))
                .collect();
            let (_, dec, _) = pooled(&[&r], "reduction_deviation");
            let (rw, res, _) = pooled(&[&r], "restriction_identity");
            ok &= detail(
                dec && res,
                format!(
                    "{} eps 1e-1..1e-3: deviation {} (decreasing: {dec}), restriction error {rw:.1e}",
                    shape_label(p),
                    devs.join(" -> ")
                ),
            );
        }
        t.criterion(7, "reduction to the finite-dimensional part", ok);
    }

    // 8
    {
        let mut ok = pooled_line(&pencil_refs, "bracket1_leading", "delta' of the first bracket vs metric generating function, 16x16 grid");
        ok &= pooled_line(&pencil_refs, "bracket2_leading", "delta' of the second bracket vs intersection generating function, 16x16 grid");
        ok &= pooled_line(&pencil_refs, "metric_generating", "metric generating function, direct pairing");
        ok &= pooled_line(&pencil_refs, "intersection_generating", "intersection generating function, direct pairing");
        // x-dependent loops: both coefficients
        let mut worst: f64 = 0.0;
        for (n, m) in [(1, 1), (2, 1), (1, 2)] {
            let l = busy_loop(n, m, 32);
            let dx = l.dx().unwrap();
            for (alpha, beta, pv, qv) in [
                (Letter::A, Letter::A, c(1.8, 0.4), c(-1.5, 1.2)),
                (Letter::A, Letter::AHat, c(1.7, -0.3), c(0.3, 0.2)),
                (Letter::AHat, Letter::A, c(0.2, -0.35), c(1.6, 0.5)),
                (Letter::AHat, Letter::AHat, c(0.4, 0.1), c(-0.2, 0.25)),
            ] {
                let dq = beta.differential(&l.points[0], qv);
                for (op, second) in [(Operator::P1, false), (Operator::P2, true)] {
                    let (a, b) = hydrodynamic_split(&l, &dq, op).unwrap();
                    for j in (0..32).step_by(4) {
                        let p = &l.points[j];
                        let want = bracket_coefficients(p, &dx[j], alpha, beta, pv, qv);
                        let want = if second { want.second } else { want.first };
                        let dp = alpha.differential(p, pv);
                        worst = worst.max((pair(&dp, &a[j]) - want.leading).norm());
                        worst = worst.max((pair(&dp, &b[j]) - want.subleading).norm());
                    }
                }
            }
        }
        ok &= detail(worst < 1e-9, format!("delta' and delta coefficients on x-dependent loops, worst {worst:.2e}"));
        t.criterion(8, "Poisson pencil matches the bracket generating functions", ok);
    }

    // 9
    {
        let clock = Instant::now();
        let mut worst_bh: f64 = 0.0;
        for (n, m) in SHAPES {
            let l = busy_loop(n, m, 32);
            for k in 1..=2u32 {
                for hat in [false, true] {
                    let shift = if hat { m } else { n } as u32;
                    let lo = Flow { hat, n: k };
                    let hi = Flow { hat, n: k + shift };
                    let p1 = poisson_apply(&l, &variational_gradient(&l, hi).unwrap(), Operator::P1).unwrap();
                    let p2 = poisson_apply(&l, &variational_gradient(&l, lo).unwrap(), Operator::P2).unwrap();
                    worst_bh = worst_bh.max(max_abs_diff(&p1, &p2));
                    let v = flow_rhs(&l, lo).unwrap().velocity;
                    worst_bh = worst_bh.max(max_abs_diff(&p2, &v));
                }
            }
        }
        let mut ok = detail(worst_bh < 1e-8, format!("P1(dH_(n+N)) = P2(dH_n) = flow field, n=1,2, four shapes, worst {worst_bh:.2e}"));
        let l = perturbed_loop(64);
        let rec = [Flow::s(1), Flow::s(2), Flow::shat(1)];
        for flow in [Flow::s(1), Flow::shat(1)] {
            let tr = evolve(&l, flow, 1e-3, 1000, &rec, 100, Some(&s)).unwrap();
            let drift = tr.drift();
            let first = &tr.rows[0].values;
            let text: Vec<String> = tr
                .labels
                .iter()
                .zip(&drift)
                .zip(first)
                .map(|((lab, d), v)| format!("{lab}={:.4} drift {d:.1e}", v.re))
                .collect();
            let moved = tr.last.max_abs_diff(&l);
            ok &= detail(
                drift.iter().all(|d| *d <= 1e-8) && moved > 1e-4,
                format!("{} for t in [0,1], grid 64, dt 1e-3: {} (loop moved {moved:.1e})", flow.label("s"), text.join(", ")),
            );
        }
        for (n, m) in [(1, 1), (2, 1)] {
            let r = toda_cross_residual(&busy_loop(n, m, 32), 1e-2, 2.5e-3).unwrap();
            let w = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
            ok &= detail(w <= 1e-5, format!("2D Toda cross-derivative residual ({n},{m}): {w:.2e}"));
        }
        let secs = clock.elapsed().as_secs_f64();
        ok &= detail(secs < 120.0, format!("runtime {secs:.1} s (limit 120 s)"));
        t.criterion(9, "Toda hierarchy: bi-Hamiltonian, conservation, 2D Toda", ok);
    }

    // 10
    {
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for p in &points {
            let r = semisimple_diagnostic(p, s.n_samples, 1e-6).unwrap();
            worst = worst.min(r.min_abs_f);
            ok &= r.pass;
        }
        ok = detail(ok, format!("min |f| over the {} validated test points: {worst:.3e}", points.len())) && ok;
        let a = LaurentSeries::from_terms(&[(2, re(1.0)), (1, re(-2.0))]);
        let vanishing = PointNM::new(2, 1, a, LaurentSeries::monomial(-1, re(0.25))).unwrap();
        let r = semisimple_diagnostic(&vanishing, s.n_samples, 1e-6).unwrap();
        ok &= detail(!r.pass, format!("a = z^2 - 2z, ahat = z^-1/4 (a' vanishes at 1): min |f| = {:.1e}, rejected", r.min_abs_f));
        let m2 = PointNM::new(1, 1, LaurentSeries::z(), LaurentSeries::monomial(-1, re(1.0))).unwrap();
        let r = semisimple_diagnostic(&m2, s.n_samples, 1e-6).unwrap();
        ok &= detail(
            !r.pass,
            format!("a = z, ahat = z^-1 (zeta' vanishes at +-i): f finite everywhere = {}, rejected", r.all_finite),
        );
        t.criterion(10, "semisimplicity diagnostic", ok);
    }

    println!(
        "summary: {}/10 criteria pass{}; {:.1} s",
        10 - t.failed.len(),
        if t.failed.is_empty() {
            String::new()
        } else {
            format!(", failing: {:?}", t.failed)
        },
        start.elapsed().as_secs_f64()
    );
}
