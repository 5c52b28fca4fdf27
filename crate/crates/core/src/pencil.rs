//! The intersection form `(ω₁, ω₂)* = i_E(ω₁·ω₂)`, its map `g`, the
//! inverse of `g`, and the generating functions behind the two
//! hydrodynamic brackets.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flatchart::Site;
use crate::frobstruct::{eta, euler_field, product_cotangent};
use crate::laurent::{re, winding_number, LaurentSeries, Window, C64, MARGIN};
use crate::point::{pair, CotangentVec, PointNM, TangentVec};

/// `B(α) = α − (z/N)α′`.
pub fn b_op(alpha: &LaurentSeries, n: usize) -> LaurentSeries {
    alpha - &alpha.zderiv().scale(re(1.0 / n as f64))
}

/// `g(ω)`, the four-term projection formula.
pub fn g_map(p: &PointNM, omega: &CotangentVec) -> TangentVec {
    let ap = p.a.deriv();
    let ahp = p.ahat.deriv();
    let ba = b_op(&p.a, p.n);
    let bah = b_op(&p.ahat, p.n);
    let withb = &(&omega.w * &ba) + &(&omega.what * &bah);
    let withd = &(&omega.w * &ap) + &(&omega.what * &ahp);
    let x = &(&ap * &withb.lt(0)) - &(&ba * &withd.lt(0));
    let xhat = &(&bah * &withd.ge(0)) - &(&ahp * &withb.ge(0));
    TangentVec::projected(p.n, p.m, x.shift(1), xhat.shift(1))
}

/// `(ω₁, ω₂)* = ⟨ω₁, g(ω₂)⟩`.
pub fn intersection_cotangent(p: &PointNM, w1: &CotangentVec, w2: &CotangentVec) -> C64 {
    pair(w1, &g_map(p, w2))
}

/// `i_E(ω₁·ω₂)`, the defining route.
pub fn intersection_via_euler(p: &PointNM, w1: &CotangentVec, w2: &CotangentVec) -> C64 {
    pair(&product_cotangent(p, w1, w2), &euler_field(p))
}

/// Whether `1/a′` at infinity and `1/â′` at zero both converge on the unit
/// circle, i.e. `a′` winds `N−1` times and `â′` winds `−M−1` times. Only then
/// do the expansions in the `Θ` formula make sense as series on the circle.
/// A zero on or next to the circle leaves the winding unresolved; neither
/// expansion converges there, so the answer is `false`.
pub fn theta_route_applies(site: &Site) -> Result<bool> {
    let p = &site.point;
    let ns = site.nodes.len();
    let wind = |f: &LaurentSeries| -> Result<Option<i32>> {
        match winding_number(&f.to_samples(ns)?.values) {
            Ok(w) => Ok(Some(w.round() as i32)),
            Err(Error::Resolution(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    Ok(wind(&p.a.deriv())? == Some(p.ni() - 1) && wind(&p.ahat.deriv())? == Some(-p.mi() - 1))
}

/// `g⁻¹(X)`: the `Θ` formula when it applies, otherwise a least-squares
/// solve of the truncated linear system. With a zero of `a′` or `â′` just
/// across the circle the `Θ` series diverge only slowly and can beat the
/// (then ill-conditioned) dense solve, so both are tried and the smaller
/// residual `|g(ω) − X|` wins.
pub fn g_inverse(site: &Site, x: &TangentVec) -> Result<CotangentVec> {
    if theta_route_applies(site)? {
        return g_inverse_theta(site, x);
    }
    let p = &site.point;
    let dense = g_inverse_dense(p, x)?;
    let Ok(theta) = g_inverse_theta(site, x) else {
        return Ok(dense);
    };
    let residual = |w: &CotangentVec| g_map(p, w).max_abs_diff(x);
    let (rt, rd) = (residual(&theta), residual(&dense));
    Ok(if rt.is_finite() && rt < rd { theta } else { dense })
}

/// `g⁻¹(X)` through `Θ = (â′X − a′X̂)/(z(aâ′ − a′â))`.
pub fn g_inverse_theta(site: &Site, x: &TangentVec) -> Result<CotangentVec> {
    let p = &site.point;
    let ns = site.nodes.len();
    let samples = |f: &LaurentSeries| f.to_samples(ns);
    let (a, ah) = (samples(&p.a)?, samples(&p.ahat)?);
    let (ap, ahp) = (samples(&p.a.deriv())?, samples(&p.ahat.deriv())?);
    let (xs, xhs) = (samples(&x.x)?, samples(&x.xhat)?);
    let mut theta = Vec::with_capacity(ns);
    for j in 0..ns {
        let den = site.nodes[j] * (a.values[j] * ahp.values[j] - ap.values[j] * ah.values[j]);
        if den.norm() <= site.settings.floor {
            return Err(Error::Singular("a a-hat' - a' a-hat vanishes on the circle".into()));
        }
        theta.push((ahp.values[j] * xs.values[j] - ap.values[j] * xhs.values[j]) / den);
    }
    let theta = site.from_values(theta);
    let inv_ap = p.a.deriv().inv_at_infinity()?;
    let inv_ahp = p.ahat.deriv().inv_at_zero()?;
    let w = &inv_ap * &theta.ge(0);
    let what = -&(&inv_ahp * &theta.lt(0));
    Ok(CotangentVec::projected(p.n, p.m, w, what))
}

/// Unknowns stop this far inside the global window.
const DENSE_PAD: i32 = 8;

/// `g` as a matrix from the covector coefficients on
/// `[−N+1, K−pad] × [−K+pad, M]` to all tangent coefficients in the window.
fn g_matrix(p: &PointNM) -> (DMatrix<C64>, Vec<(bool, i32)>, Vec<(bool, i32)>) {
    let win = Window::global();
    let (n, m) = (p.ni(), p.mi());
    let cols: Vec<(bool, i32)> = ((-n + 1)..=(win.hi - MARGIN - DENSE_PAD))
        .map(|k| (false, k))
        .chain((win.lo + DENSE_PAD..=m).map(|k| (true, k)))
        .collect();
    let rows: Vec<(bool, i32)> = (win.lo..n)
        .map(|k| (false, k))
        .chain((-m..=win.hi).map(|k| (true, k)))
        .collect();
    let mut mat = DMatrix::<C64>::zeros(rows.len(), cols.len());
    for (c, &(hat, k)) in cols.iter().enumerate() {
        let mono = LaurentSeries::monomial(k, re(1.0));
        let w = if hat {
            CotangentVec::new_unchecked(LaurentSeries::zero(), mono)
        } else {
            CotangentVec::new_unchecked(mono, LaurentSeries::zero())
        };
        let img = g_map(p, &w);
        for (r, &(rhat, e)) in rows.iter().enumerate() {
            mat[(r, c)] = if rhat { img.xhat.coeff(e) } else { img.x.coeff(e) };
        }
    }
    (mat, rows, cols)
}

/// `g⁻¹(X)` by least squares on the truncated system. Householder QR; the
/// iterative complex SVD stalls near 1e-9 on systems QR solves to 1e-15, so
/// it is kept only for a numerically rank-deficient `R`.
pub fn g_inverse_dense(p: &PointNM, x: &TangentVec) -> Result<CotangentVec> {
    let (mat, rows, cols) = g_matrix(p);
    let rhs = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&(hat, e)| if hat { x.xhat.coeff(e) } else { x.x.coeff(e) }),
    );
    let qr = mat.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().map(|d| d.norm()).fold(0.0, f64::max);
    let full_rank = r.diagonal().iter().all(|d| d.norm() > 1e-12 * diag_max);
    let by_qr = if full_rank {
        r.solve_upper_triangular(&(qr.q().adjoint() * &rhs))
    } else {
        None
    };
    let sol = match by_qr {
        Some(s) => s,
        None => mat
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Singular(format!("intersection system: {e}")))?,
    };
    let pick = |hat: bool| {
        let terms: Vec<(i32, C64)> = cols
            .iter()
            .zip(sol.iter())
            .filter(|((h, _), _)| *h == hat)
            .map(|(&(_, k), &v)| (k, v))
            .collect();
        LaurentSeries::from_terms(&terms)
    };
    Ok(CotangentVec::new_unchecked(pick(false), pick(true)))
}

/// The tangent intersection form as a circle integral of
/// `N₁N₂/(z² D)` with `Nᵢ = ∂ᵢa/a′ − ∂ᵢâ/â′` and `D = a/a′ − â/â′`.
pub fn intersection_tangent_quadrature(site: &Site, x1: &TangentVec, x2: &TangentVec) -> Result<C64> {
    let p = &site.point;
    let ns = site.nodes.len();
    let s = |f: &LaurentSeries| f.to_samples(ns).map(|c| c.values);
    let (a, ah, ap, ahp) = (s(&p.a)?, s(&p.ahat)?, s(&p.a.deriv())?, s(&p.ahat.deriv())?);
    let (u1, uh1, u2, uh2) = (s(&x1.x)?, s(&x1.xhat)?, s(&x2.x)?, s(&x2.xhat)?);
    let mut acc = re(0.0);
    for j in 0..ns {
        let n1 = u1[j] / ap[j] - uh1[j] / ahp[j];
        let n2 = u2[j] / ap[j] - uh2[j] / ahp[j];
        let d = a[j] / ap[j] - ah[j] / ahp[j];
        acc += n1 * n2 / (d * site.nodes[j]);
    }
    Ok(acc / ns as f64)
}

/// Which of `a`, `â` a generating covector refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Letter {
    A,
    AHat,
}

impl Letter {
    /// `dα(p)`.
    pub fn differential(self, p: &PointNM, at: C64) -> CotangentVec {
        match self {
            Letter::A => p.da(at),
            Letter::AHat => p.dahat(at),
        }
    }

    fn series(self, p: &PointNM) -> &LaurentSeries {
        match self {
            Letter::A => &p.a,
            Letter::AHat => &p.ahat,
        }
    }

    fn component(self, x: &TangentVec) -> &LaurentSeries {
        match self {
            Letter::A => &x.x,
            Letter::AHat => &x.xhat,
        }
    }
}

/// `(α(p), α′(p))`.
fn value_and_slope(f: &LaurentSeries, at: C64) -> (C64, C64) {
    (f.eval(at), f.deriv().eval(at))
}

/// `⟨dα(p), dβ(q)⟩* = pq/(p−q) (α′(p) − β′(q))`, for `p ≠ q`.
pub fn metric_generating(p: &PointNM, alpha: Letter, beta: Letter, pv: C64, qv: C64) -> C64 {
    let (_, ad) = value_and_slope(alpha.series(p), pv);
    let (_, bd) = value_and_slope(beta.series(p), qv);
    pv * qv / (pv - qv) * (ad - bd)
}

/// `(dα(p), dβ(q))* = pq/(p−q) (α′(p)B(β(q)) − B(α(p))β′(q))`, for `p ≠ q`.
pub fn intersection_generating(p: &PointNM, alpha: Letter, beta: Letter, pv: C64, qv: C64) -> C64 {
    let nf = p.n as f64;
    let (av, ad) = value_and_slope(alpha.series(p), pv);
    let (bv, bd) = value_and_slope(beta.series(p), qv);
    let ba = av - pv * ad / nf;
    let bb = bv - qv * bd / nf;
    pv * qv / (pv - qv) * (ad * bb - ba * bd)
}

/// Coefficients of `δ′(x−y)` and `δ(x−y)` in one bracket.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeltaCoefficients {
    pub leading: C64,
    pub subleading: C64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BracketCoefficients {
    pub first: DeltaCoefficients,
    pub second: DeltaCoefficients,
}

/// The two hydrodynamic brackets `{α(p,x), β(q,y)}_ν` at a loop point with
/// `x`-derivative `dx = (∂ₓa, ∂ₓâ)`, for `p ≠ q`.
pub fn bracket_coefficients(
    p: &PointNM,
    dx: &TangentVec,
    alpha: Letter,
    beta: Letter,
    pv: C64,
    qv: C64,
) -> BracketCoefficients {
    let nf = p.n as f64;
    let (av, ad) = value_and_slope(alpha.series(p), pv);
    let (bv, bd) = value_and_slope(beta.series(p), qv);
    let (ax, _) = value_and_slope(alpha.component(dx), pv);
    let (bx, bxd) = value_and_slope(beta.component(dx), qv);
    let pq = pv * qv;
    let d = pv - qv;
    let first = DeltaCoefficients {
        leading: pq / d * (ad - bd),
        subleading: pq * ((ax - bx) / (d * d) - bxd / d),
    };
    let second = DeltaCoefficients {
        leading: pq * ((ad * bv - av * bd) / d + ad * bd / nf),
        subleading: pq * ((ax * bv - av * bx) / (d * d) + (ad * bx - av * bxd) / d + ad * bxd / nf),
    };
    BracketCoefficients { first, second }
}

#[derive(Clone, Debug, Serialize)]
pub struct PencilReport {
    /// basis covectors per component
    pub truncation: usize,
    /// `(s, σ_min/σ_max)` of the truncated `g − s·η`
    pub samples: Vec<(C64, f64)>,
    pub min_ratio: f64,
}

/// Smallest relative singular value of `g − s·η` restricted to the
/// covectors `z^k`, `−N+1 ≤ k < −N+1+L` and `M−L < k ≤ M`, with the full
/// image kept, so the matrix is tall and `σ_min > 0` certifies injectivity
/// on that subspace.
pub fn pencil_nondegeneracy(p: &PointNM, s_values: &[C64], truncation: usize) -> PencilReport {
    let (n, m) = (p.ni(), p.mi());
    let l = truncation as i32;
    let mut basis = Vec::new();
    for k in (-n + 1)..(-n + 1 + l) {
        basis.push(CotangentVec::new_unchecked(LaurentSeries::monomial(k, re(1.0)), LaurentSeries::zero()));
    }
    for k in (m - l + 1)..=m {
        basis.push(CotangentVec::new_unchecked(LaurentSeries::zero(), LaurentSeries::monomial(k, re(1.0))));
    }
    let images: Vec<(TangentVec, TangentVec)> = basis.iter().map(|w| (g_map(p, w), eta(p, w))).collect();
    let (mut xlo, mut xhi, mut hlo, mut hhi) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for (g, e) in &images {
        for t in [g, e] {
            if !t.x.is_zero() {
                xlo = xlo.min(t.x.lo());
                xhi = xhi.max(t.x.hi());
            }
            if !t.xhat.is_zero() {
                hlo = hlo.min(t.xhat.lo());
                hhi = hhi.max(t.xhat.hi());
            }
        }
    }
    let rows_x = if xlo <= xhi { (xlo..=xhi).collect() } else { Vec::new() };
    let rows_h: Vec<i32> = if hlo <= hhi { (hlo..=hhi).collect() } else { Vec::new() };
    let nrows = rows_x.len() + rows_h.len();
    let samples: Vec<(C64, f64)> = s_values
        .iter()
        .map(|&s| {
            let mat = DMatrix::from_fn(nrows, basis.len(), |r, c| {
                let (g, e) = &images[c];
                if r < rows_x.len() {
                    let k: i32 = rows_x[r];
                    g.x.coeff(k) - e.x.coeff(k) * s
                } else {
                    let k = rows_h[r - rows_x.len()];
                    g.xhat.coeff(k) - e.xhat.coeff(k) * s
                }
            });
            let sv = mat.svd(false, false).singular_values;
            let max = sv.iter().cloned().fold(0.0, f64::max);
            let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            (s, if max > 0.0 { min / max } else { 0.0 })
        })
        .collect();
    let min_ratio = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    PencilReport {
        truncation,
        samples,
        min_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobstruct::unity_cotangent;
    use crate::laurent::c;
    use crate::point::Settings;

    #[test]
    fn g_of_unity_is_euler() {
        let p = PointNM::p0();
        let g = g_map(&p, &unity_cotangent(&p));
        assert!(g.max_abs_diff(&euler_field(&p)) < 1e-14);
        assert!(g_map(&p, &CotangentVec::zero()).max_abs() == 0.0);
    }

    #[test]
    fn a_equals_z_kills_the_a_a_block() {
        // B(z) = 0 when N = 1, so (da(p), da(q))* vanishes identically
        let p = PointNM::p0();
        let (pv, qv) = (re(2.0), re(3.0));
        assert!(intersection_generating(&p, Letter::A, Letter::A, pv, qv).norm() < 1e-15);
        let v = intersection_via_euler(&p, &p.da(pv), &p.da(qv));
        assert!(v.norm() < 1e-12, "{v}");
    }

    #[test]
    fn round_trip_at_p0() {
        let site = Site::new(&PointNM::p0(), &Settings::default()).unwrap();
        let x = TangentVec::new_unchecked(
            LaurentSeries::from_terms(&[(0, c(0.3, 0.1)), (-2, re(0.2))]),
            LaurentSeries::from_terms(&[(-1, re(0.5)), (1, c(0.0, 0.4))]),
        );
        let w = g_inverse(&site, &x).unwrap();
        assert!(g_map(&site.point, &w).max_abs_diff(&x) < 1e-12);
    }
}
