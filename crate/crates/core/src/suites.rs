//! Verification suites run at one point, each producing a [`Report`].

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatchart::{coord_list, Site};
use crate::frobstruct::{
    ell_prime_inverses, eta, eta_inverse, euler_field, metric_cotangent, metric_tangent_with, product_cotangent,
    product_tangent, unity_cotangent, unity_tangent, Frames,
};
use crate::laurent::{re, C64};
use crate::pencil::{
    g_inverse, g_inverse_theta, g_map, intersection_cotangent, intersection_generating, intersection_via_euler,
    metric_generating, pencil_nondegeneracy, theta_route_applies, Letter,
};
use crate::point::{pair, random_covector, random_tangent, CotangentVec, PointNM, Settings};
use crate::potential::{euler_homogeneity_check, potential_third_derivative, reduction_limit, wdvv_check};
use crate::report::Report;
use crate::toda::{hydrodynamic_split, LoopField, Operator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Metric,
    Algebra,
    Wdvv,
    Euler,
    Pencil,
    Reduction,
    Potential,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Metric,
        Suite::Algebra,
        Suite::Wdvv,
        Suite::Euler,
        Suite::Pencil,
        Suite::Reduction,
        Suite::Potential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Metric => "metric",
            Suite::Algebra => "algebra",
            Suite::Wdvv => "wdvv",
            Suite::Euler => "euler",
            Suite::Pencil => "pencil",
            Suite::Reduction => "reduction",
            Suite::Potential => "potential",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown suite {s:?}")))
    }
}

/// Pass thresholds. The first field of each group is the one a per-suite
/// override replaces.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub gram: f64,
    pub eta_round_trip: f64,
    pub associativity: f64,
    pub commutativity: f64,
    pub unity: f64,
    pub invariance: f64,
    pub wdvv: f64,
    pub homogeneity: f64,
    pub euler_identity: f64,
    pub pencil: f64,
    pub symmetry: f64,
    pub restriction: f64,
    pub potential_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gram: 1e-8,
            eta_round_trip: 1e-10,
            associativity: 1e-9,
            commutativity: 1e-12,
            unity: 1e-13,
            invariance: 1e-10,
            wdvv: 1e-6,
            homogeneity: 1e-6,
            euler_identity: 1e-13,
            pencil: 1e-9,
            symmetry: 1e-12,
            restriction: 1e-10,
            potential_relative: 1e-5,
        }
    }
}

impl Tolerances {
    /// Replace the headline tolerance of `suite`.
    pub fn set(&mut self, suite: Suite, tol: f64) -> Result<()> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Input(format!("tolerance for {suite} must be positive, got {tol}")));
        }
        let slot = match suite {
            Suite::Metric => &mut self.gram,
            Suite::Algebra => &mut self.associativity,
            Suite::Wdvv => &mut self.wdvv,
            Suite::Euler => &mut self.homogeneity,
            Suite::Pencil => &mut self.pencil,
            Suite::Reduction => &mut self.restriction,
            Suite::Potential => &mut self.potential_relative,
        };
        *slot = tol;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    /// random vectors (or triples) per check
    pub vectors: usize,
    /// `|i|` bound on the `t` labels of the Gram check
    pub gram_cut: i32,
    pub wdvv_cut: i32,
    /// truncation of the index sum inside WDVV
    pub wdvv_sum_cut: i32,
    pub euler_cut: i32,
    pub potential_cut: i32,
    /// finite-difference step along coordinate flows
    pub fd_step: f64,
    /// sample points per axis of the generating-function grid
    pub grid_points: usize,
    pub epsilons: Vec<f64>,
    pub tol: Tolerances,
    #[serde(skip)]
    pub settings: Settings,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 1,
            vectors: 20,
            gram_cut: 6,
            wdvv_cut: 1,
            wdvv_sum_cut: 10,
            euler_cut: 2,
            potential_cut: 1,
            fd_step: 1e-3,
            grid_points: 16,
            epsilons: vec![1e-1, 1e-2, 1e-3],
            tol: Tolerances::default(),
            settings: Settings::default(),
        }
    }
}

pub fn run_suite(p: &PointNM, suite: Suite, cfg: &SuiteConfig) -> Result<Report> {
    let site = Site::new(p, &cfg.settings)?;
    match suite {
        Suite::Metric => metric_suite(&site, cfg),
        Suite::Algebra => algebra_suite(&site, cfg),
        Suite::Wdvv => wdvv_suite(&site, cfg),
        Suite::Euler => euler_suite(p, cfg),
        Suite::Pencil => pencil_suite(&site, cfg),
        Suite::Reduction => reduction_suite(p, cfg),
        Suite::Potential => potential_suite(&site, cfg),
    }
}

fn rng_for(cfg: &SuiteConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(salt))
}

/// Flat Gram matrix against its constant block form, then η round trips.
pub fn metric_suite(site: &Site, cfg: &SuiteConfig) -> Result<Report> {
    let (n, m) = (site.n(), site.m());
    let mut r = Report::new();
    let labels = coord_list(n, m, cfg.gram_cut);
    let frames = labels.iter().map(|&l| site.frame(l)).collect::<Result<Vec<_>>>()?;
    let (inf, zero) = ell_prime_inverses(site)?;
    for (i, a) in labels.iter().enumerate() {
        let (partner, val) = a.dual(n, m);
        for (j, b) in labels.iter().enumerate() {
            let g = metric_tangent_with(site, &frames[i], &frames[j], &inf, &zero)?;
            let want = if *b == partner { val } else { 0.0 };
            r.compare("gram", format!("{a},{b}"), g, re(want), cfg.tol.gram);
        }
    }
    let mut rng = rng_for(cfg, 1);
    let p = &site.point;
    for k in 0..cfg.vectors {
        let x = random_tangent(n, m, 12, &mut rng);
        let back = eta(p, &eta_inverse(site, &x)?.omega);
        r.residual("eta_tangent_round_trip", k.to_string(), back.max_abs_diff(&x), cfg.tol.eta_round_trip);
        let w = random_covector(n, m, 12, &mut rng);
        let back = eta_inverse(site, &eta(p, &w))?.omega;
        r.residual("eta_covector_round_trip", k.to_string(), back.max_abs_diff(&w), cfg.tol.eta_round_trip);
    }
    Ok(r)
}

/// `Σ_i Π_{j≠i} α_j′(p_j)/(p_i⁻¹ − p_j⁻¹) dα_i(p_i)`, the closed form of a
/// product of generating covectors.
fn generating_product(p: &PointNM, pts: &[(Letter, C64)]) -> CotangentVec {
    let ap = p.a.deriv();
    let ahp = p.ahat.deriv();
    let slope = |(l, q): (Letter, C64)| match l {
        Letter::A => ap.eval(q),
        Letter::AHat => ahp.eval(q),
    };
    let mut acc = CotangentVec::zero();
    for i in 0..pts.len() {
        let mut coef = re(1.0);
        for j in 0..pts.len() {
            if j != i {
                coef *= slope(pts[j]) / (pts[i].1.inv() - pts[j].1.inv());
            }
        }
        acc = &acc + &pts[i].0.differential(p, pts[i].1).scale(coef);
    }
    acc
}

/// Axioms of the cotangent algebra on random triples, plus closed forms.
pub fn algebra_suite(site: &Site, cfg: &SuiteConfig) -> Result<Report> {
    let (n, m) = (site.n(), site.m());
    let p = &site.point;
    let t = &cfg.tol;
    let mut r = Report::new();
    let mut rng = rng_for(cfg, 2);
    let e = unity_cotangent(p);
    for k in 0..cfg.vectors {
        let idx = k.to_string();
        let w: Vec<CotangentVec> = (0..3).map(|_| random_covector(n, m, 8, &mut rng)).collect();
        let ab = product_cotangent(p, &w[0], &w[1]);
        let ba = product_cotangent(p, &w[1], &w[0]);
        r.residual("commutativity", &*idx, ab.max_abs_diff(&ba), t.commutativity);
        let bc = product_cotangent(p, &w[1], &w[2]);
        let left = product_cotangent(p, &ab, &w[2]);
        let right = product_cotangent(p, &w[0], &bc);
        r.residual("associativity", &*idx, left.max_abs_diff(&right), t.associativity);
        r.residual("unity", &*idx, product_cotangent(p, &e, &w[0]).max_abs_diff(&w[0]), t.unity);
        let il = metric_cotangent(p, &ab, &w[2]);
        let ir = metric_cotangent(p, &w[0], &bc);
        r.compare("invariance", &*idx, il, ir, t.invariance);
        let x = random_tangent(n, m, 8, &mut rng);
        let ex = product_tangent(site, &unity_tangent(), &x)?;
        r.residual("tangent_unity", &*idx, ex.max_abs_diff(&x), t.invariance);
    }
    // generating covectors: one in each region, one more outside
    let pts = [
        (Letter::A, C64::new(2.0, 0.3)),
        (Letter::AHat, C64::new(0.5, -0.1)),
        (Letter::A, C64::new(-0.4, 3.0)),
    ];
    let d = |(l, q): (Letter, C64)| l.differential(p, q);
    let two = product_cotangent(p, &d(pts[0]), &d(pts[1]));
    r.residual("generating_product_2", "a,ahat", two.max_abs_diff(&generating_product(p, &pts[..2])), t.associativity);
    let three = product_cotangent(p, &two, &d(pts[2]));
    r.residual("generating_product_3", "a,ahat,a", three.max_abs_diff(&generating_product(p, &pts)), t.associativity);
    Ok(r)
}

pub fn wdvv_suite(site: &Site, cfg: &SuiteConfig) -> Result<Report> {
    let (n, m) = (site.n(), site.m());
    let labels = coord_list(n, m, cfg.wdvv_cut);
    let mut frames = Frames::new(site.clone(), &labels)?;
    let w = wdvv_check(&mut frames, &labels, &coord_list(n, m, cfg.wdvv_sum_cut))?;
    let mut r = Report::new();
    r.residual("wdvv", format!("|i|<={}; sum |i|<={}", cfg.wdvv_cut, cfg.wdvv_sum_cut), w.max_residual, cfg.tol.wdvv);
    // the size of the neglected tail, for reading the residual
    r.verdict("wdvv_tail", format!("{} quadruples", w.quadruples), w.tail, true);
    Ok(r)
}

pub fn euler_suite(p: &PointNM, cfg: &SuiteConfig) -> Result<Report> {
    let labels = coord_list(p.n, p.m, cfg.euler_cut);
    let e = euler_homogeneity_check(p, &labels, cfg.fd_step, &cfg.settings)?;
    let mut r = Report::new();
    r.residual("euler_identity", "a,ahat,zeta,l", e.identity_residual, cfg.tol.euler_identity);
    r.residual("quasi_homogeneity", format!("{} triples", e.triples), e.max_homogeneity_error, cfg.tol.homogeneity);
    Ok(r)
}

/// Sample points outside (`outer`) or inside the unit circle.
fn ring(count: usize, outer: bool, scale: f64) -> Vec<C64> {
    (0..count)
        .map(|k| {
            let r = if outer { 1.6 + 0.1 * (k % 4) as f64 } else { 0.35 + 0.05 * (k % 4) as f64 };
            C64::from_polar(r * scale, 0.4 + std::f64::consts::TAU * k as f64 / count as f64)
        })
        .collect()
}

const LETTER_PAIRS: [(Letter, Letter); 4] = [
    (Letter::A, Letter::A),
    (Letter::A, Letter::AHat),
    (Letter::AHat, Letter::A),
    (Letter::AHat, Letter::AHat),
];

fn letter(l: Letter) -> &'static str {
    match l {
        Letter::A => "a",
        Letter::AHat => "ahat",
    }
}

/// Intersection form, its inverse, and the two generating functions, the
/// latter both directly and as `δ′` coefficients of the two operators on a
/// loop frozen at the point.
pub fn pencil_suite(site: &Site, cfg: &SuiteConfig) -> Result<Report> {
    let (n, m) = (site.n(), site.m());
    let p = &site.point;
    let tol = cfg.tol.pencil;
    let mut r = Report::new();
    let mut rng = rng_for(cfg, 3);
    let theta = theta_route_applies(site)?;
    for k in 0..cfg.vectors {
        let idx = k.to_string();
        let w = random_covector(n, m, 10, &mut rng);
        let back = g_inverse(site, &g_map(p, &w))?;
        r.residual("g_covector_round_trip", &*idx, back.max_abs_diff(&w), tol);
        if theta {
            let x = random_tangent(n, m, 10, &mut rng);
            let back = g_map(p, &g_inverse_theta(site, &x)?);
            r.residual("g_tangent_round_trip", &*idx, back.max_abs_diff(&x), tol);
        }
        let w2 = random_covector(n, m, 8, &mut rng);
        let b12 = intersection_cotangent(p, &w, &w2);
        r.compare("intersection_symmetry", &*idx, b12, intersection_cotangent(p, &w2, &w), cfg.tol.symmetry);
        r.compare("intersection_via_euler", &*idx, b12, intersection_via_euler(p, &w, &w2), tol);
    }
    r.residual("g_unity_is_euler", "", g_map(p, &unity_cotangent(p)).max_abs_diff(&euler_field(p)), tol * 10.0);

    let frozen = LoopField::new(vec![p.clone(); 4])?;
    let count = cfg.grid_points;
    for (alpha, beta) in LETTER_PAIRS {
        let ps = ring(count, alpha == Letter::A, 1.0);
        // same letter: keep the two rings apart
        let qscale = match (alpha == beta, beta) {
            (false, _) => 1.0,
            (true, Letter::A) => 1.5,
            (true, Letter::AHat) => 0.5,
        };
        let qs = ring(count, beta == Letter::A, qscale);
        let tag = format!("{}{}", letter(alpha), letter(beta));
        for &qv in &qs {
            let dq = beta.differential(p, qv);
            let (e, g) = (eta(p, &dq), g_map(p, &dq));
            let (lead1, _) = hydrodynamic_split(&frozen, &dq, Operator::P1)?;
            let (lead2, _) = hydrodynamic_split(&frozen, &dq, Operator::P2)?;
            for &pv in &ps {
                let dp = alpha.differential(p, pv);
                let mg = metric_generating(p, alpha, beta, pv, qv);
                let ig = intersection_generating(p, alpha, beta, pv, qv);
                let scale = mg.norm().max(ig.norm()).max(1.0);
                let at = format!("{tag} p={pv:.3} q={qv:.3}");
                r.compare("metric_generating", &*at, pair(&dp, &e), mg, tol * scale);
                r.compare("intersection_generating", &*at, pair(&dp, &g), ig, tol * scale);
                r.compare("bracket1_leading", &*at, pair(&dp, &lead1[0]), mg, tol * scale);
                r.compare("bracket2_leading", &*at, pair(&dp, &lead2[0]), ig, tol * scale);
            }
        }
    }
    let s_values: Vec<C64> = (0..8).map(|k| C64::from_polar(3.0, 0.3 + 0.7 * k as f64)).collect();
    let nd = pencil_nondegeneracy(p, &s_values, 12);
    r.verdict("pencil_min_singular_ratio", "|s|=3", nd.min_ratio, nd.min_ratio > 1e-8);
    Ok(r)
}

/// The `ε`-sweep on `ζ = εz` with the point's own `l`.
pub fn reduction_suite(p: &PointNM, cfg: &SuiteConfig) -> Result<Report> {
    let (_, ell) = p.zeta_and_ell();
    let rows = reduction_limit(p.n, p.m, &ell, &cfg.epsilons, &cfg.settings)?;
    let mut r = Report::new();
    let mut prev = f64::INFINITY;
    for row in &rows {
        let idx = format!("eps={:e}", row.epsilon);
        r.verdict("reduction_deviation", &*idx, row.max_deviation, row.max_deviation < prev);
        prev = row.max_deviation;
        r.residual("restriction_identity", &*idx, row.restriction_error, cfg.tol.restriction);
        r.verdict("reduction_wdvv", &*idx, row.wdvv_residual, true);
    }
    Ok(r)
}

/// Finite-difference third derivatives of the potential against the
/// algebraic 3-tensor. Records the potential as stated and with the cubic
/// term the tensor needs; only the latter decides the suite.
pub fn potential_suite(site: &Site, cfg: &SuiteConfig) -> Result<Report> {
    let (n, m) = (site.n(), site.m());
    let labels = coord_list(n, m, cfg.potential_cut);
    let mut frames = Frames::new(site.clone(), &labels)?;
    let mut r = Report::new();
    let tol = cfg.tol.potential_relative;
    for (iu, &u) in labels.iter().enumerate() {
        for (iv, &v) in labels.iter().enumerate().skip(iu) {
            for &w in &labels[iv..] {
                let c = frames.c(u, v, w)?;
                let d = potential_third_derivative(&site.point, u, v, w, cfg.fd_step, &cfg.settings)?;
                let scale = c.norm().max(1.0);
                let idx = format!("{u},{v},{w}");
                r.compare("third_derivative", &*idx, d.corrected(), c, tol * scale);
                // informational: the gap is the missing cubic term
                r.verdict("third_derivative_stated_gap", &*idx, (d.stated() - c).norm(), true);
            }
        }
    }
    Ok(r)
}
