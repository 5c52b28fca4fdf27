//! The potential: its double-contour and cross terms, the residue formula
//! for third derivatives of the finite part, finite-difference third
//! derivatives, WDVV, quasi-homogeneity and the `ζ = εz` reduction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flatchart::{coordinate_flow, Coord, Site};
use crate::frobstruct::{ell_prime_inverses, euler_identity_residual, Frames};
use crate::laurent::{re, unwrapped_log, CircleSamples, LaurentSeries, C64};
use crate::point::{PointNM, Settings};

#[derive(Clone, Debug, Serialize)]
pub struct PotentialValue {
    pub double_term: C64,
    pub cross_term: C64,
    pub fnm_included: bool,
    /// double plus cross term, as stated
    pub total: C64,
    /// value of [`cubic_correction`], reported apart from `total`
    pub cubic_correction: C64,
}

/// `−Σ_{m≥1} (1/m)[½ζ_{−m}ζ_m − ζ_{−m}l_m + l_{−m}ζ_m]`.
pub fn double_contour_term(p: &PointNM) -> C64 {
    let (zeta, ell) = p.zeta_and_ell();
    double_pairing(&zeta, &ell, &zeta, &ell, 0.5)
}

/// The bilinear sum behind the double term; `half` weighs the `ζζ` part.
fn double_pairing(
    z1: &LaurentSeries,
    l1: &LaurentSeries,
    z2: &LaurentSeries,
    l2: &LaurentSeries,
    half: f64,
) -> C64 {
    let top = z1.hi().max(z2.hi()).max(-z1.lo()).max(-z2.lo()).max(l1.hi()).max(-l1.lo());
    let mut acc = re(0.0);
    for m in 1..=top.max(0) {
        let t = z1.coeff(-m) * z2.coeff(m) * half - z1.coeff(-m) * l2.coeff(m)
            + l1.coeff(-m) * z2.coeff(m);
        acc += t / m as f64;
    }
    -acc
}

/// Trapezoid quadrature of the double contour on `|z₁| = r1 < |z₂| = r2`.
pub fn double_contour_quadrature(p: &PointNM, r1: f64, r2: f64, n: usize) -> C64 {
    let (zeta, ell) = p.zeta_and_ell();
    let nodes = CircleSamples::nodes(n);
    let at = |r: f64| -> Vec<(C64, C64, C64)> {
        nodes
            .iter()
            .map(|&w| {
                let z = w * r;
                (z, zeta.eval(z), ell.eval(z))
            })
            .collect()
    };
    let (c1, c2) = (at(r1), at(r2));
    let mut acc = re(0.0);
    for &(z1, zt1, l1) in &c1 {
        for &(z2, zt2, l2) in &c2 {
            let g = zt1 * zt2 * 0.5 - zt1 * l2 + l1 * zt2;
            acc += g * (re(1.0) - z1 / z2).ln();
        }
    }
    acc / (n * n) as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossTerm {
    /// `[½ζ + l]₀`
    pub first_factor: C64,
    /// `[ζ(log(ζ/z) − 1)]₀` by quadrature
    pub second_factor: C64,
    /// `Σ_{0≤i≤T} t^i t^{−i−1}`
    pub second_factor_flat: C64,
    pub value: C64,
}

/// `log(ζ/z)` on the nodes, continuous and principal at `z = 1`.
fn log_zeta_over_z(site: &Site) -> Result<Vec<C64>> {
    let ratio: Vec<C64> = (0..site.nodes.len())
        .map(|j| site.zeta_s.values[j] / site.nodes[j])
        .collect();
    unwrapped_log(&ratio)
}

pub fn cross_term(site: &Site, t_max: i32) -> Result<CrossTerm> {
    let first_factor = site.zeta.coeff(0) * 0.5 + site.ell.coeff(0);
    let lg = log_zeta_over_z(site)?;
    let ns = lg.len();
    let second_factor = (0..ns)
        .map(|j| site.zeta_s.values[j] * (lg[j] - 1.0))
        .sum::<C64>()
        / ns as f64;
    let mut flat = re(0.0);
    for i in 0..=t_max {
        flat += site.t(i)? * site.t(-i - 1)?;
    }
    Ok(CrossTerm {
        first_factor,
        second_factor,
        second_factor_flat: flat,
        value: -first_factor * second_factor,
    })
}

/// `𝓕` without its finite part `F_{N,M}`, which is fixed only up to
/// quadratic terms.
pub fn potential(site: &Site) -> Result<PotentialValue> {
    let double_term = double_contour_term(&site.point);
    let cross = cross_term(site, 0)?.value;
    let h: Vec<C64> = (1..site.n() as i32).map(|j| site.h(j)).collect::<Result<_>>()?;
    Ok(PotentialValue {
        double_term,
        cross_term: cross,
        fnm_included: false,
        total: double_term + cross,
        cubic_correction: cubic_correction(site.n(), site.t(-1)?, &h),
    })
}

fn is_finite_label(c: Coord) -> bool {
    !c.is_t()
}

/// `∂³F_{N,M}/∂u∂v∂w = −(res_∞ + res_0) ∂_u l ∂_v l ∂_w l/(z² l′) dz`.
pub fn fnm_third_derivative(site: &Site, u: Coord, v: Coord, w: Coord) -> Result<C64> {
    let (inf, zero) = ell_prime_inverses(site)?;
    fnm_with(site, [u, v, w], &inf, &zero)
}

fn fnm_with(site: &Site, labels: [Coord; 3], inf: &LaurentSeries, zero: &LaurentSeries) -> Result<C64> {
    let mut prod = LaurentSeries::one();
    for c in labels {
        if !is_finite_label(c) {
            return Err(Error::Input(format!("{c} is not an h or hhat label")));
        }
        prod = &prod * &site.frame_zeta_ell(c)?.1;
    }
    Ok((&prod * inf).coeff(1) - (&prod * zero).coeff(1))
}

/// `∂_w` of the double and cross terms, in closed form.
pub fn potential_gradient(site: &Site, w: Coord) -> Result<C64> {
    let (dz, dl) = site.frame_zeta_ell(w)?;
    let (zeta, ell) = (&site.zeta, &site.ell);
    let double = double_pairing(&dz, &dl, zeta, ell, 0.5)
        + double_pairing(zeta, ell, &dz, &dl, 0.5);
    let lg = log_zeta_over_z(site)?;
    let ns = lg.len();
    let a = zeta.coeff(0) * 0.5 + ell.coeff(0);
    let s = (0..ns)
        .map(|j| site.zeta_s.values[j] * (lg[j] - 1.0))
        .sum::<C64>()
        / ns as f64;
    let da = dz.coeff(0) * 0.5 + dl.coeff(0);
    let dzs = dz.to_samples(ns)?;
    let ds = (0..ns).map(|j| dzs.values[j] * lg[j]).sum::<C64>() / ns as f64;
    Ok(double - (da * s + a * ds))
}

/// Mixed second difference of `∂_w(𝓕 − F)` along the flows of `u` and `v`.
fn second_difference(p: &PointNM, u: Coord, v: Coord, w: Coord, h: f64, s: &Settings) -> Result<C64> {
    let g = |q: &PointNM| potential_gradient(&Site::new(q, s)?, w);
    if u == v {
        let plus = coordinate_flow(p, u, h, s)?;
        let minus = coordinate_flow(p, u, -h, s)?;
        return Ok((g(&plus)? - g(p)? * 2.0 + g(&minus)?) / (h * h));
    }
    let mut acc = re(0.0);
    for (su, sv, sign) in [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)] {
        let q = coordinate_flow(&coordinate_flow(p, u, su, s)?, v, sv, s)?;
        acc += g(&q)? * sign;
    }
    Ok(acc / (4.0 * h * h))
}

/// Third derivative of the potential, split by origin.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThirdDerivative {
    /// double contour and cross terms, by finite differences
    pub integral_part: C64,
    /// `∂³F_{N,M}` from residues; zero unless all labels are in `h ∪ ĥ`
    pub fnm: C64,
    /// `∂³` of [`cubic_correction`]
    pub cubic: C64,
}

impl ThirdDerivative {
    /// The potential exactly as stated: integrals plus `F_{N,M}`.
    pub fn stated(&self) -> C64 {
        self.integral_part + self.fnm
    }

    /// With the cubic term that the 3-tensor requires for `N ≥ 2`.
    pub fn corrected(&self) -> C64 {
        self.stated() + self.cubic
    }
}

/// `−(1/2N) t^{−1} Σ_{j=1}^{N−1} h^j h^{N−j}`.
///
/// The 3-tensor has the constant entries `c(∂t^{−1}, ∂h^j, ∂h^{N−j}) = −1/N`,
/// which the double contour, cross and `F_{N,M}` terms cannot produce: for
/// `N = 2`, `l` is affine in `h¹` while nothing else depends on it. This
/// quasi-homogeneous cubic of degree 2 supplies them.
pub fn cubic_correction(n: usize, t_minus_one: C64, h: &[C64]) -> C64 {
    let mut acc = re(0.0);
    for j in 1..n {
        acc += h[j - 1] * h[n - j - 1];
    }
    -t_minus_one * acc / (2.0 * n as f64)
}

/// Third derivatives of [`cubic_correction`].
pub fn cubic_correction_third(n: usize, u: Coord, v: Coord, w: Coord) -> f64 {
    let mut l = [u, v, w];
    l.sort();
    match l {
        [Coord::T(-1), Coord::H(a), Coord::H(b)] if a + b == n as i32 => -1.0 / n as f64,
        _ => 0.0,
    }
}

/// `∂³𝓕/∂u∂v∂w`: one analytic derivative, two central differences along
/// exact coordinate flows with one Richardson pass, plus the residue formula
/// for `F_{N,M}` when all labels are in `h ∪ ĥ`.
pub fn potential_third_derivative(
    p: &PointNM,
    u: Coord,
    v: Coord,
    w: Coord,
    h: f64,
    settings: &Settings,
) -> Result<ThirdDerivative> {
    if h <= 1e-6 {
        return Err(Error::Input(format!("step {h} too small for second differences")));
    }
    for c in [u, v, w] {
        c.check(p.n, p.m)?;
    }
    // put a t label in the analytic slot when there is one
    let mut l = [u, v, w];
    l.sort_by_key(|c| !c.is_t());
    let [a, b, c] = l;
    let coarse = second_difference(p, b, c, a, h, settings)?;
    let fine = second_difference(p, b, c, a, h / 2.0, settings)?;
    let fnm = if l.iter().all(|&x| is_finite_label(x)) {
        fnm_third_derivative(&Site::new(p, settings)?, u, v, w)?
    } else {
        re(0.0)
    };
    Ok(ThirdDerivative {
        integral_part: (fine * 4.0 - coarse) / 3.0,
        fnm,
        cubic: re(cubic_correction_third(p.n, u, v, w)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WdvvReport {
    pub max_residual: f64,
    /// largest `|c|` among terms of the index sum at its truncation edge
    pub tail: f64,
    pub quadruples: usize,
}

/// `c_{uv}^ε c_{εwx} − c_{uw}^ε c_{εvx}` over quadruples from `labels`, with
/// `ε` running over `sum_labels` and raised by the flat Gram inverse.
pub fn wdvv_check(frames: &mut Frames, labels: &[Coord], sum_labels: &[Coord]) -> Result<WdvvReport> {
    let (n, m) = (frames.site.n(), frames.site.m());
    let edge = sum_labels
        .iter()
        .filter_map(|c| match c {
            Coord::T(i) => Some(i.abs()),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut worst: f64 = 0.0;
    let mut tail: f64 = 0.0;
    let mut count = 0;
    let raised = |fr: &mut Frames, a: Coord, b: Coord| -> Result<Vec<C64>> {
        sum_labels
            .iter()
            .map(|&e| {
                let (d, val) = e.dual(n, m);
                Ok(fr.c(a, b, d)? / val)
            })
            .collect()
    };
    for (iu, &u) in labels.iter().enumerate() {
        for &v in &labels[iu..] {
            let left = raised(frames, u, v)?;
            for &w in labels {
                let right = raised(frames, u, w)?;
                for &x in labels {
                    let mut acc = re(0.0);
                    for (k, &e) in sum_labels.iter().enumerate() {
                        let a = left[k] * frames.c(e, w, x)?;
                        let b = right[k] * frames.c(e, v, x)?;
                        acc += a - b;
                        if matches!(e, Coord::T(i) if i.abs() == edge) {
                            tail = tail.max(a.norm()).max(b.norm());
                        }
                    }
                    worst = worst.max(acc.norm());
                    count += 1;
                }
            }
        }
    }
    Ok(WdvvReport {
        max_residual: worst,
        tail,
        quadruples: count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EulerReport {
    /// `(E + (z/N)∂_z)θ − θ` over `θ ∈ {a, â, ζ, l}`
    pub identity_residual: f64,
    /// worst `|E(c_uvw) − (2 − Σdeg) c_uvw|`
    pub max_homogeneity_error: f64,
    pub triples: usize,
}

/// Quasi-homogeneity of the 3-tensor: `E(c_uvw) = (2 − deg u − deg v − deg w) c_uvw`
/// with `E(c)` from central differences along the exact Euler flow.
pub fn euler_homogeneity_check(p: &PointNM, labels: &[Coord], h: f64, settings: &Settings) -> Result<EulerReport> {
    let (n, m) = (p.n, p.m);
    let at = |s: f64| -> Result<Frames> { Frames::new(Site::new(&p.euler_flow(s), settings)?, labels) };
    let mut base = at(0.0)?;
    let mut flows = [at(h)?, at(-h)?, at(h / 2.0)?, at(-h / 2.0)?];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (iu, &u) in labels.iter().enumerate() {
        for (iv, &v) in labels.iter().enumerate().skip(iu) {
            for &w in &labels[iv..] {
                let mut vals = [re(0.0); 4];
                for (k, f) in flows.iter_mut().enumerate() {
                    vals[k] = f.c(u, v, w)?;
                }
                let coarse = (vals[0] - vals[1]) / (2.0 * h);
                let fine = (vals[2] - vals[3]) / h;
                let ec = (fine * 4.0 - coarse) / 3.0;
                let deg = u.degree(n, m) + v.degree(n, m) + w.degree(n, m);
                let c = base.c(u, v, w)?;
                worst = worst.max((ec - c * (2.0 - deg)).norm());
                count += 1;
            }
        }
    }
    Ok(EulerReport {
        identity_residual: euler_identity_residual(p),
        max_homogeneity_error: worst,
        triples: count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionRow {
    pub epsilon: f64,
    /// worst `|c − ∂³F_{N,M}|` over triples in `h ∪ ĥ`
    pub max_deviation: f64,
    /// `|(𝓕 − F) + ε res₀ l|`
    pub restriction_error: f64,
    /// WDVV residual on `h ∪ ĥ` alone
    pub wdvv_residual: f64,
}

/// The submanifold `ζ = εz` with `l` fixed, for each `ε`.
pub fn reduction_limit(n: usize, m: usize, ell: &LaurentSeries, eps: &[f64], settings: &Settings) -> Result<Vec<ReductionRow>> {
    let labels: Vec<Coord> = (1..n as i32)
        .map(Coord::H)
        .chain((0..=m as i32).map(Coord::Hhat))
        .collect();
    let mut rows = Vec::new();
    for &e in eps {
        let zeta = LaurentSeries::monomial(1, re(e));
        let p = PointNM::assemble(n, m, &zeta, ell)?;
        let site = Site::new(&p, settings)?;
        let (inf, zero) = ell_prime_inverses(&site)?;
        let mut frames = Frames::new(site.clone(), &labels)?;
        let mut dev: f64 = 0.0;
        for (iu, &u) in labels.iter().enumerate() {
            for (iv, &v) in labels.iter().enumerate().skip(iu) {
                for &w in &labels[iv..] {
                    let c = frames.c(u, v, w)?;
                    dev = dev.max((c - fnm_with(&site, [u, v, w], &inf, &zero)?).norm());
                }
            }
        }
        let pv = potential(&site)?;
        let restriction_error = (pv.total + ell.coeff(-1) * e).norm();
        let wdvv = wdvv_check(&mut frames, &labels, &labels)?;
        rows.push(ReductionRow {
            epsilon: e,
            max_deviation: dev,
            restriction_error,
            wdvv_residual: wdvv.max_residual,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_term_at_p0() {
        let p = PointNM::p0();
        assert!((double_contour_term(&p) - re(-0.375)).norm() < 1e-15);
        let q = double_contour_quadrature(&p, 0.9, 1.1, 128);
        assert!((q - re(-0.375)).norm() < 1e-10, "{q}");
    }

    #[test]
    fn double_term_for_identity_zeta() {
        // ζ = z leaves only −l_{−1}
        let ell = LaurentSeries::from_terms(&[(1, re(1.0)), (0, re(0.3)), (-1, re(0.7))]);
        let p = PointNM::assemble(1, 1, &LaurentSeries::z(), &ell).unwrap();
        assert!((double_contour_term(&p) - re(-0.7)).norm() < 1e-15);
    }

    #[test]
    fn cross_term_at_p0() {
        let site = Site::new(&PointNM::p0(), &Settings::default()).unwrap();
        let ct = cross_term(&site, 8).unwrap();
        assert!(ct.first_factor.norm() < 1e-15);
        assert!(ct.value.norm() < 1e-15);
        assert!(ct.second_factor_flat.norm() < 1e-12);
    }

    #[test]
    fn fnm_at_p0() {
        let site = Site::new(&PointNM::p0(), &Settings::default()).unwrap();
        let h0 = Coord::Hhat(0);
        let v = fnm_third_derivative(&site, h0, h0, h0).unwrap();
        assert!((v - re(0.25)).norm() < 1e-13, "{v}");
        assert!(fnm_third_derivative(&site, Coord::T(1), h0, h0).is_err());
    }
}
