//! The Frobenius structure at a point: the metric isomorphism `η`, both
//! metrics, the products, the 3-tensor, the Euler field and the
//! semisimplicity diagnostic.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flatchart::{Coord, Site};
use crate::laurent::{dot0, re, CircleSamples, LaurentSeries, C64};
use crate::point::{pair, CotangentVec, PointNM, TangentVec};

/// `η(ω)`.
pub fn eta(p: &PointNM, omega: &CotangentVec) -> TangentVec {
    let ap = p.a.deriv();
    let ahp = p.ahat.deriv();
    let sum = &omega.w + &omega.what;
    let mixed = &(&omega.w * &ap) + &(&omega.what * &ahp);
    let x = &(&ap * &sum.lt(0)) - &mixed.lt(0);
    let xhat = &mixed.ge(0) - &(&ahp * &sum.ge(0));
    TangentVec::projected(p.n, p.m, x.shift(1), xhat.shift(1))
}

#[derive(Clone, Debug)]
pub struct EtaInverse {
    pub omega: CotangentVec,
    /// condition number of the `N−1` band system (1 when empty)
    pub cond_k: f64,
    /// condition number of the `M+1` band system
    pub cond_khat: f64,
}

fn condition(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// The lower-triangular systems of the mid band, as `(K, K̂)`.
///
/// Row `m` of `K` (for `X_m`, `m = N−1..1`) and column `k` (for `ω̃_k`,
/// `k = −1..−N+1`) hold `(m−k) v_{m−k}`; row `m` of `K̂` (`m = −M..0`) and
/// column `k` (`k = 0..M`) hold `−(m−k) v̂_{m−k}`.
pub fn band_systems(p: &PointNM) -> (DMatrix<C64>, DMatrix<C64>) {
    let (n, m) = (p.ni(), p.mi());
    let nk = (n - 1) as usize;
    let mut k = DMatrix::<C64>::zeros(nk, nk);
    for (r, row) in (1..n).rev().enumerate() {
        for (c, col) in (-(n - 1)..=-1).rev().enumerate() {
            let e = row - col;
            k[(r, c)] = p.a.coeff(e) * e as f64;
        }
    }
    let mk = (m + 1) as usize;
    let mut kh = DMatrix::<C64>::zeros(mk, mk);
    for (r, row) in (-m..=0).enumerate() {
        for (c, col) in (0..=m).enumerate() {
            let e = row - col;
            kh[(r, c)] = -p.ahat.coeff(e) * e as f64;
        }
    }
    (k, kh)
}

/// `η⁻¹(X)` by the constructive route: the outer bands from dividing by
/// `zζ′` on the circle, the mid band from the two triangular systems.
pub fn eta_inverse(site: &Site, x: &TangentVec) -> Result<EtaInverse> {
    let p = &site.point;
    let (n, m) = (p.ni(), p.mi());
    let dz = x.dzeta().to_samples(site.nodes.len())?;
    let d = site.from_values(
        (0..site.nodes.len())
            .map(|j| dz.values[j] / (site.nodes[j] * site.zeta_prime_s.values[j]))
            .collect(),
    );
    let w_hi = -&d.ge(0);
    let what_lo = d.lt(0);
    let (k, kh) = band_systems(p);
    let solve = |mat: &DMatrix<C64>, rhs: DVector<C64>| -> Result<DVector<C64>> {
        if mat.nrows() == 0 {
            return Ok(rhs);
        }
        mat.clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("band system".into()))
    };
    let rhs_k = DVector::from_iterator((n - 1) as usize, (1..n).rev().map(|r| x.x.coeff(r)));
    let sol_k = solve(&k, rhs_k)?;
    let rhs_kh = DVector::from_iterator((m + 1) as usize, (-m..=0).map(|r| x.xhat.coeff(r)));
    let sol_kh = solve(&kh, rhs_kh)?;
    // ω̃_k for k = −1..−N+1 gives ω_k = ω̃_k − ω̂_k; ω̃_k for k = 0..M gives ω̂_k = ω̃_k − ω_k
    let mut w_terms = Vec::new();
    for (c, col) in (-(n - 1)..=-1).rev().enumerate() {
        w_terms.push((col, sol_k[c] - what_lo.coeff(col)));
    }
    let mut wh_terms = Vec::new();
    for (c, col) in (0..=m).enumerate() {
        wh_terms.push((col, sol_kh[c] - w_hi.coeff(col)));
    }
    let w = &w_hi + &LaurentSeries::from_terms(&w_terms);
    let what = &what_lo + &LaurentSeries::from_terms(&wh_terms);
    Ok(EtaInverse {
        omega: CotangentVec::projected(p.n, p.m, w, what),
        cond_k: condition(&k),
        cond_khat: condition(&kh),
    })
}

/// `⟨ω₁, ω₂⟩* = ⟨ω₁, η(ω₂)⟩`.
pub fn metric_cotangent(p: &PointNM, w1: &CotangentVec, w2: &CotangentVec) -> C64 {
    pair(w1, &eta(p, w2))
}

/// `(1/l′)` at infinity and at zero.
pub fn ell_prime_inverses(site: &Site) -> Result<(LaurentSeries, LaurentSeries)> {
    Ok((site.ell_prime.inv_at_infinity()?, site.ell_prime.inv_at_zero()?))
}

/// The tangent metric from its three-term formula: a circle integral of
/// `∂₁ζ ∂₂ζ/(z²ζ′)` and residues of `∂₁l ∂₂l/(z²l′)` at both punctures.
pub fn metric_tangent(site: &Site, x1: &TangentVec, x2: &TangentVec) -> Result<C64> {
    let (inv_inf, inv_zero) = ell_prime_inverses(site)?;
    metric_tangent_with(site, x1, x2, &inv_inf, &inv_zero)
}

pub fn metric_tangent_with(
    site: &Site,
    x1: &TangentVec,
    x2: &TangentVec,
    inv_inf: &LaurentSeries,
    inv_zero: &LaurentSeries,
) -> Result<C64> {
    let ns = site.nodes.len();
    let a = x1.dzeta().to_samples(ns)?;
    let b = x2.dzeta().to_samples(ns)?;
    let t1: C64 = (0..ns)
        .map(|j| a.values[j] * b.values[j] / (site.nodes[j] * site.zeta_prime_s.values[j]))
        .sum::<C64>()
        / ns as f64;
    let ll = &x1.dell() * &x2.dell();
    let t2 = dot0(&ll, &inv_inf.shift(-1));
    let t3 = dot0(&ll, &inv_zero.shift(-1));
    Ok(-t1 + t2 - t3)
}

/// The cotangent product in Laurent form.
pub fn product_cotangent(p: &PointNM, w1: &CotangentVec, w2: &CotangentVec) -> CotangentVec {
    let ap = p.a.deriv();
    let ahp = p.ahat.deriv();
    let w1a = &w1.w * &ap;
    let w2a = &w2.w * &ap;
    let h1 = &w1.what * &ahp;
    let h2 = &w2.what * &ahp;
    let first = &(&(&(&w2.w * &w1a.ge(0)) - &(&w2.w * &h1.lt(0))) - &(&w1.w * &w2a.lt(0)))
        - &(&w1.w * &h2.lt(0));
    let second = &(&(&(&w2.what * &w1a.ge(0)) + &(&w2.what * &h1.ge(0)))
        + &(&w1.what * &w2a.ge(0)))
        - &(&w1.what * &h2.lt(0));
    CotangentVec::new_unchecked(
        first.ge(-p.ni()).shift(1),
        second.le(p.mi() - 1).shift(1),
    )
}

/// `e* = (0, z^M/(M v̂_{−M}))`.
pub fn unity_cotangent(p: &PointNM) -> CotangentVec {
    let c = (p.vhat_lead() * p.m as f64).inv();
    CotangentVec::new_unchecked(LaurentSeries::zero(), LaurentSeries::monomial(p.mi(), c))
}

/// `e = (1, 1)`.
pub fn unity_tangent() -> TangentVec {
    TangentVec::new_unchecked(LaurentSeries::one(), LaurentSeries::one())
}

/// `X₁·X₂ = η(η⁻¹X₁ · η⁻¹X₂)`.
pub fn product_tangent(site: &Site, x1: &TangentVec, x2: &TangentVec) -> Result<TangentVec> {
    let w1 = eta_inverse(site, x1)?.omega;
    let w2 = eta_inverse(site, x2)?.omega;
    Ok(eta(&site.point, &product_cotangent(&site.point, &w1, &w2)))
}

/// Coordinate frames and their `η⁻¹` images, computed once per point.
pub struct Frames {
    pub site: Site,
    pub frames: HashMap<Coord, TangentVec>,
    pub covectors: HashMap<Coord, CotangentVec>,
    products: HashMap<(Coord, Coord), CotangentVec>,
}

impl Frames {
    pub fn new(site: Site, labels: &[Coord]) -> Result<Frames> {
        let mut f = Frames {
            site,
            frames: HashMap::new(),
            covectors: HashMap::new(),
            products: HashMap::new(),
        };
        for &c in labels {
            f.ensure(c)?;
        }
        Ok(f)
    }

    pub fn ensure(&mut self, c: Coord) -> Result<()> {
        if !self.frames.contains_key(&c) {
            let x = self.site.frame(c)?;
            let w = eta_inverse(&self.site, &x)?.omega;
            self.frames.insert(c, x);
            self.covectors.insert(c, w);
        }
        Ok(())
    }

    pub fn frame(&mut self, c: Coord) -> Result<&TangentVec> {
        self.ensure(c)?;
        Ok(&self.frames[&c])
    }

    /// `c(∂u, ∂v, ∂w) = ⟨η⁻¹∂u · η⁻¹∂v, ∂w⟩`.
    pub fn c(&mut self, u: Coord, v: Coord, w: Coord) -> Result<C64> {
        for x in [u, v, w] {
            self.ensure(x)?;
        }
        let key = if u <= v { (u, v) } else { (v, u) };
        if !self.products.contains_key(&key) {
            let prod = product_cotangent(&self.site.point, &self.covectors[&u], &self.covectors[&v]);
            self.products.insert(key, prod);
        }
        Ok(pair(&self.products[&key], &self.frames[&w]))
    }
}

/// `c(∂u, ∂v, ∂w)` at a point.
pub fn three_tensor(site: &Site, u: Coord, v: Coord, w: Coord) -> Result<C64> {
    Frames::new(site.clone(), &[u, v, w])?.c(u, v, w)
}

/// `(1/2πi)∮ f dz`.
fn contour(f: &LaurentSeries) -> C64 {
    f.coeff(-1)
}

/// The closed-form expressions of the 3-tensor, one per type pattern of the
/// labels. Independent of `η⁻¹` and of the products.
pub fn three_tensor_closed_form(site: &Site, u: Coord, v: Coord, w: Coord) -> Result<C64> {
    let (n, m) = (site.n() as i64, site.m() as i64);
    let (nf, mf) = (n as f64, m as f64);
    // χ′χ^q at infinity and χ̂′χ̂^q at zero, through powers of l
    let chi = |q: i64| -> Result<LaurentSeries> {
        Ok((&site.ell_prime * &site.ell_pow_inf(q + 1 - n, n)?).scale(re(1.0 / nf)))
    };
    let chihat = |q: i64| -> Result<LaurentSeries> {
        Ok((&site.ell_prime * &site.ell_pow_zero(q + 1 - m, m)?).scale(re(1.0 / mf)))
    };
    let zz = |i: i32| site.on_circle(|_, zt, zp| zp * zt.powi(i));
    let z = LaurentSeries::z();
    let mut ts = Vec::new();
    let mut hs = Vec::new();
    let mut hh = Vec::new();
    for c in [u, v, w] {
        c.check(site.n(), site.m())?;
        match c {
            Coord::T(i) => ts.push(i),
            Coord::H(j) => hs.push(j as i64),
            Coord::Hhat(k) => hh.push(k as i64),
        }
    }
    let val = match (ts.len(), hs.len(), hh.len()) {
        (1, 1, 1) => re(0.0),
        (2, 1, 0) => {
            let f = &zz(ts[0] + ts[1]).lt(-1) * &chi(n - 1 - hs[0])?.ge(0);
            -contour(&(&z * &f))
        }
        (1, 2, 0) => {
            let f = &zz(ts[0]).lt(0) * &chi(n - 1 - hs[0] - hs[1])?.ge(-1);
            -contour(&(&z * &f)) / nf
        }
        (0, 2, 1) => {
            let f = &chi(n - 1 - hs[0] - hs[1])?.ge(-1) * &chihat(m - 1 - hh[0])?.lt(0);
            -contour(&(&z * &f)) / nf
        }
        (2, 0, 1) => {
            let f = &zz(ts[0] + ts[1]).ge(-1) * &chihat(m - 1 - hh[0])?.lt(0);
            contour(&(&z * &f))
        }
        (1, 0, 2) => {
            let f = &zz(ts[0]).ge(0) * &chihat(m - 1 - hh[0] - hh[1])?.lt(-1);
            -contour(&(&z * &f)) / mf
        }
        (0, 1, 2) => {
            let f = &chi(n - 1 - hs[0])?.ge(0) * &chihat(m - 1 - hh[0] - hh[1])?.lt(-1);
            -contour(&(&z * &f)) / mf
        }
        (0, 3, 0) => {
            let f = &site.zeta_prime.lt(0) * &chi(n - 1 - hs[0] - hs[1] - hs[2])?.ge(-1);
            let first = -contour(&(&z * &f)) / (nf * nf);
            let mut prod = LaurentSeries::z();
            for &j in &hs {
                prod = &prod * &chi(n - 1 - j)?.ge(0);
            }
            let inv = site.ell_prime.inv_at_infinity()?;
            first + (&prod * &inv).coeff(-1)
        }
        (0, 0, 3) => {
            let f = &site.zeta_prime.ge(0) * &chihat(m - 1 - hh[0] - hh[1] - hh[2])?.lt(-1);
            let first = contour(&(&z * &f)) / (mf * mf);
            let mut prod = LaurentSeries::z();
            for &k in &hh {
                prod = &prod * &chihat(m - 1 - k)?.lt(0);
            }
            let inv = site.ell_prime.inv_at_zero()?;
            first + (&prod * &inv).coeff(-1)
        }
        (3, 0, 0) => {
            let (i1, i2, i3) = (ts[0], ts[1], ts[2]);
            let pz = site.zeta_prime.pi_split();
            let lp = &site.ell_prime;
            let s = i1 + i2 + i3;
            let first = site.on_circle(|_, zt, zp| zp * zt.powi(s));
            let first = contour(&(&z * &(&first * &(&pz.scale(re(0.5)) - lp))));
            let part = |ia: i32, ib: i32, ic: i32| {
                let pi = zz(ic).pi_split();
                &site.on_circle(|_, zt, zp| zp * zt.powi(ia + ib)) * &pi
            };
            let sum = &(&part(i1, i2, i3) + &part(i2, i3, i1)) + &part(i3, i1, i2);
            first - contour(&(&z * &sum)) * 0.5
        }
        _ => unreachable!("three labels"),
    };
    Ok(val)
}

/// `E = (a − (z/N)a′, â − (z/N)â′)`.
pub fn euler_field(p: &PointNM) -> TangentVec {
    let k = re(1.0 / p.n as f64);
    let ea = &p.a - &p.a.zderiv().scale(k);
    let eah = &p.ahat - &p.ahat.zderiv().scale(k);
    TangentVec::projected(p.n, p.m, ea, eah)
}

/// Largest coefficient of `(E + (z/N)∂_z)θ − θ` over `θ ∈ {a, â, ζ, l}`.
pub fn euler_identity_residual(p: &PointNM) -> f64 {
    let e = euler_field(p);
    let k = re(1.0 / p.n as f64);
    let (zeta, ell) = p.zeta_and_ell();
    let pairs = [
        (&p.a, e.x.clone()),
        (&p.ahat, e.xhat.clone()),
        (&zeta, e.dzeta()),
        (&ell, e.dell()),
    ];
    pairs
        .iter()
        .map(|(th, eth)| (&(eth + &th.zderiv().scale(k)) - *th).max_abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SemisimpleReport {
    pub min_abs_f: f64,
    pub all_finite: bool,
    pub pass: bool,
}

/// `f(p) = −p² a′(p) â′(p)/ζ′(p)` sampled on the circle.
pub fn semisimple_f(p: &PointNM, n_samples: usize) -> Result<CircleSamples> {
    let ap = p.a.deriv().to_samples(n_samples)?;
    let ahp = p.ahat.deriv().to_samples(n_samples)?;
    let (zeta, _) = p.zeta_and_ell();
    let zp = zeta.deriv().to_samples(n_samples)?;
    let nodes = CircleSamples::nodes(n_samples);
    Ok(CircleSamples {
        values: (0..n_samples)
            .map(|j| -nodes[j] * nodes[j] * ap.values[j] * ahp.values[j] / zp.values[j])
            .collect(),
    })
}

pub fn semisimple_diagnostic(p: &PointNM, n_samples: usize, floor: f64) -> Result<SemisimpleReport> {
    let f = semisimple_f(p, n_samples)?;
    let all_finite = f.values.iter().all(|v| v.re.is_finite() && v.im.is_finite());
    let min_abs_f = f
        .values
        .iter()
        .map(|v| if v.norm().is_finite() { v.norm() } else { 0.0 })
        .fold(f64::INFINITY, f64::min);
    Ok(SemisimpleReport {
        min_abs_f,
        all_finite,
        pass: all_finite && min_abs_f > floor,
    })
}

/// `Ω_φ = ∮ φ(p) du(p) dp/(2πi p) = ((φâ′/ζ′)_{≥−N+1}, −(φa′/ζ′)_{≤M})`,
/// the smeared idempotent basis. On these `⟨Ω_φ, Ω_ψ⟩* = [φψf/p]₀` and
/// `Ω_φ·Ω_ψ = −Ω_{φψf/p}`, so the unity is `Ω_{−p/f}`.
pub fn smeared_idempotent(site: &Site, phi: &LaurentSeries) -> Result<CotangentVec> {
    let p = &site.point;
    let ns = site.nodes.len();
    let ph = phi.to_samples(ns)?;
    let ap = p.a.deriv().to_samples(ns)?;
    let ahp = p.ahat.deriv().to_samples(ns)?;
    let w = site.from_values(
        (0..ns)
            .map(|j| ph.values[j] * ahp.values[j] / site.zeta_prime_s.values[j])
            .collect(),
    );
    let what = site.from_values(
        (0..ns)
            .map(|j| -ph.values[j] * ap.values[j] / site.zeta_prime_s.values[j])
            .collect(),
    );
    Ok(CotangentVec::projected(p.n, p.m, w, what))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::{random_covector, random_tangent, Settings};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p0_site() -> Site {
        Site::new(&PointNM::p0(), &Settings::default()).unwrap()
    }

    #[test]
    fn unity_maps_to_one_one() {
        let p = PointNM::p0();
        let e = eta(&p, &unity_cotangent(&p));
        assert!(e.max_abs_diff(&unity_tangent()) < 1e-14);
        assert!(eta(&p, &CotangentVec::zero()).max_abs() == 0.0);
        let back = eta_inverse(&p0_site(), &unity_tangent()).unwrap().omega;
        assert!(back.what.max_abs_diff(&LaurentSeries::monomial(1, re(4.0))) < 1e-13);
        assert!(back.w.max_abs() < 1e-13);
    }

    #[test]
    fn eta_round_trip_at_p0() {
        let site = p0_site();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let x = random_tangent(1, 1, 10, &mut rng);
            let w = eta_inverse(&site, &x).unwrap().omega;
            assert!(eta(&site.point, &w).max_abs_diff(&x) < 1e-12);
        }
    }

    #[test]
    fn unit_is_null_at_p0() {
        // e = ∂ĥ^M pairs only with ∂ĥ⁰, so both norms vanish
        let p = PointNM::p0();
        let e = unity_cotangent(&p);
        assert!(metric_cotangent(&p, &e, &e).norm() < 1e-14);
        let dh1 = Site::new(&p, &Settings::default()).unwrap().differential(Coord::Hhat(1)).unwrap();
        assert!((metric_cotangent(&p, &e, &dh1) - re(1.0)).norm() < 1e-12);
        let site = p0_site();
        let v = metric_tangent(&site, &unity_tangent(), &unity_tangent()).unwrap();
        assert!(v.norm() < 1e-13);
    }

    #[test]
    fn unity_of_the_product() {
        let p = PointNM::p0();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_covector(1, 1, 8, &mut rng);
        let prod = product_cotangent(&p, &unity_cotangent(&p), &w);
        assert!(prod.max_abs_diff(&w) < 1e-14);
    }

    #[test]
    fn euler_field_at_p0() {
        let e = euler_field(&PointNM::p0());
        assert!(e.x.max_abs() < 1e-15);
        assert!(e.xhat.max_abs_diff(&LaurentSeries::monomial(-1, re(0.5))) < 1e-15);
        assert!(euler_identity_residual(&PointNM::p0()) < 1e-15);
    }

    #[test]
    fn semisimple_at_p0() {
        let r = semisimple_diagnostic(&PointNM::p0(), 512, 1e-6).unwrap();
        assert!(r.pass);
        assert!((r.min_abs_f - 0.2).abs() < 1e-12);
    }
}
