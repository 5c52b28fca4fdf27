//! Flat coordinates `t ∪ h ∪ ĥ`: the forward chart, its inverse, the flat
//! differentials and the coordinate tangent frames.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{
    ps, re, unwrapped_log, winding_number, Anchor, CircleSamples, LaurentSeries, Window, C64,
};
use crate::point::{CotangentVec, PointNM, Settings, TangentVec};

/// A flat coordinate label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    T(i32),
    H(i32),
    Hhat(i32),
}

impl Coord {
    pub fn check(&self, n: usize, m: usize) -> Result<()> {
        let ok = match *self {
            Coord::T(_) => true,
            Coord::H(j) => j >= 1 && j < n as i32,
            Coord::Hhat(k) => k >= 0 && k <= m as i32,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnknownLabel(format!("{self} for N={n}, M={m}")))
        }
    }

    /// Scaling degree under the Euler field: `t^i ↦ −i`, `h^j ↦ j/N`,
    /// `ĥ^k ↦ k/M`. The shifts on `t⁰` and `ĥ⁰` are not degrees.
    pub fn degree(&self, n: usize, m: usize) -> f64 {
        match *self {
            Coord::T(i) => -(i as f64),
            Coord::H(j) => j as f64 / n as f64,
            Coord::Hhat(k) => k as f64 / m as f64,
        }
    }

    pub fn is_t(&self) -> bool {
        matches!(self, Coord::T(_))
    }

    /// Partner under the flat metric and the value of the Gram entry.
    pub fn dual(&self, n: usize, m: usize) -> (Coord, f64) {
        match *self {
            Coord::T(i) => (Coord::T(-1 - i), -1.0),
            Coord::H(j) => (Coord::H(n as i32 - j), 1.0 / n as f64),
            Coord::Hhat(k) => (Coord::Hhat(m as i32 - k), 1.0 / m as f64),
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::T(i) => write!(f, "t^{i}"),
            Coord::H(j) => write!(f, "h^{j}"),
            Coord::Hhat(k) => write!(f, "hhat^{k}"),
        }
    }
}

impl FromStr for Coord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownLabel(s.to_string());
        let (name, idx) = s.split_once('^').ok_or_else(bad)?;
        let idx: i32 = idx.trim().parse().map_err(|_| bad())?;
        match name.trim() {
            "t" => Ok(Coord::T(idx)),
            "h" => Ok(Coord::H(idx)),
            "hhat" => Ok(Coord::Hhat(idx)),
            _ => Err(bad()),
        }
    }
}

/// `{t^i : |i| ≤ cut} ∪ h ∪ ĥ`, in that order.
pub fn coord_list(n: usize, m: usize, cut: i32) -> Vec<Coord> {
    let mut v: Vec<Coord> = (-cut..=cut).map(Coord::T).collect();
    v.extend((1..n as i32).map(Coord::H));
    v.extend((0..=m as i32).map(Coord::Hhat));
    v
}

/// Cached derived data of a point. All circle quantities use
/// `settings.n_samples` nodes.
#[derive(Clone, Debug)]
pub struct Site {
    pub point: PointNM,
    pub settings: Settings,
    pub zeta: LaurentSeries,
    pub ell: LaurentSeries,
    pub zeta_prime: LaurentSeries,
    pub ell_prime: LaurentSeries,
    pub nodes: Vec<C64>,
    pub zeta_s: CircleSamples,
    pub zeta_prime_s: CircleSamples,
}

impl Site {
    pub fn new(p: &PointNM, settings: &Settings) -> Result<Site> {
        let (zeta, ell) = p.zeta_and_ell();
        let zeta_prime = zeta.deriv();
        let n = settings.n_samples;
        let zeta_s = zeta.to_samples(n)?;
        let zeta_prime_s = zeta_prime.to_samples(n)?;
        if zeta_prime_s.min_modulus() <= settings.floor {
            return Err(Error::InvalidPoint("zeta-prime vanishes on the circle".into()));
        }
        if zeta_s.min_modulus() <= settings.floor {
            return Err(Error::InvalidPoint("zeta vanishes on the circle".into()));
        }
        Ok(Site {
            point: p.clone(),
            settings: *settings,
            ell_prime: ell.deriv(),
            zeta,
            ell,
            zeta_prime,
            nodes: CircleSamples::nodes(n),
            zeta_s,
            zeta_prime_s,
        })
    }

    pub fn n(&self) -> usize {
        self.point.n
    }

    pub fn m(&self) -> usize {
        self.point.m
    }

    /// Laurent coefficients of a function given by its values on the nodes.
    pub fn from_values(&self, values: Vec<C64>) -> LaurentSeries {
        CircleSamples { values }.to_series(Window::global())
    }

    /// Pointwise function of `(z, ζ, ζ′)` on the circle.
    pub fn on_circle(&self, f: impl Fn(C64, C64, C64) -> C64) -> LaurentSeries {
        let v = (0..self.nodes.len())
            .map(|j| f(self.nodes[j], self.zeta_s.values[j], self.zeta_prime_s.values[j]))
            .collect();
        self.from_values(v)
    }

    /// `ζ^k` as a series on the annulus around the circle.
    pub fn zeta_pow(&self, k: i32) -> LaurentSeries {
        self.on_circle(|_, zt, _| zt.powi(k))
    }

    /// `1/(z ζ′)` on the annulus.
    pub fn inv_z_zeta_prime(&self) -> LaurentSeries {
        self.on_circle(|z, _, zp| (z * zp).inv())
    }

    /// `l^{num/den}` expanded at infinity.
    pub fn ell_pow_inf(&self, num: i64, den: i64) -> Result<LaurentSeries> {
        self.ell.fractional_power(num, den, Anchor::Infinity)
    }

    /// `l^{num/den}` expanded at zero.
    pub fn ell_pow_zero(&self, num: i64, den: i64) -> Result<LaurentSeries> {
        self.ell.fractional_power(num, den, Anchor::Zero)
    }

    /// `(∂ζ, ∂l)` of the coordinate vector field `∂/∂c`.
    pub fn frame_zeta_ell(&self, c: Coord) -> Result<(LaurentSeries, LaurentSeries)> {
        c.check(self.n(), self.m())?;
        let (n, m) = (self.n() as i64, self.m() as i64);
        let zlp = self.ell_prime.shift(1);
        Ok(match c {
            Coord::T(i) => {
                let dz = self.on_circle(|z, zt, zp| -z * zt.powi(i) * zp);
                (dz, LaurentSeries::zero())
            }
            Coord::H(j) => {
                let p = self.ell_pow_inf(-(j as i64), n)?;
                let dl = (&zlp * &p).gt(0).scale(re(1.0 / n as f64));
                (LaurentSeries::zero(), dl)
            }
            Coord::Hhat(k) => {
                let p = self.ell_pow_zero(-(k as i64), m)?;
                let dl = (&zlp * &p).le(0).scale(re(-1.0 / m as f64));
                (LaurentSeries::zero(), dl)
            }
        })
    }

    /// The tangent vector `∂/∂c` as `(∂a, ∂â)`.
    pub fn frame(&self, c: Coord) -> Result<TangentVec> {
        let (dz, dl) = self.frame_zeta_ell(c)?;
        Ok(TangentVec::from_zeta_ell(&dz, &dl))
    }

    /// The covector `dc`.
    pub fn differential(&self, c: Coord) -> Result<CotangentVec> {
        c.check(self.n(), self.m())?;
        let (n, m) = (self.n() as i64, self.m() as i64);
        Ok(match c {
            Coord::T(i) => {
                let p = self.zeta_pow(-i - 1);
                CotangentVec::new_unchecked(-&p.ge(-(n as i32) + 1), p.le(m as i32))
            }
            Coord::H(j) => {
                let p = self.ell_pow_inf(j as i64 - n, n)?;
                CotangentVec::new_unchecked(p.ge(-(n as i32) + 1), LaurentSeries::zero())
            }
            Coord::Hhat(k) => {
                let p = self.ell_pow_zero(k as i64 - m, m)?;
                CotangentVec::new_unchecked(LaurentSeries::zero(), p.le(m as i32))
            }
        })
    }

    /// `t^i` by circle quadrature; `t⁰` uses the branch of `log(ζ/z)` that is
    /// principal at `z = 1` and continuous along the circle.
    pub fn t(&self, i: i32) -> Result<C64> {
        let n = self.nodes.len() as f64;
        if i == 0 {
            let ratio: Vec<C64> = self
                .zeta_s
                .values
                .iter()
                .zip(&self.nodes)
                .map(|(zt, z)| zt / z)
                .collect();
            let logs = unwrapped_log(&ratio)?;
            Ok(-logs.iter().sum::<C64>() / n)
        } else {
            let s: C64 = self.zeta_s.values.iter().map(|zt| zt.powi(-i)).sum();
            Ok(s / n / i as f64)
        }
    }

    /// `t^i` from the curve-side formula `∮_Γ ζ^{−i−1} log(z(ζ)/ζ) dζ`, pulled
    /// back to the circle. An independent route to the same numbers.
    pub fn t_curve_formula(&self, i: i32) -> Result<C64> {
        let ratio: Vec<C64> = self
            .zeta_s
            .values
            .iter()
            .zip(&self.nodes)
            .map(|(zt, z)| z / zt)
            .collect();
        let logs = unwrapped_log(&ratio)?;
        let n = self.nodes.len();
        let s: C64 = (0..n)
            .map(|j| {
                let (z, zt, zp) = (self.nodes[j], self.zeta_s.values[j], self.zeta_prime_s.values[j]);
                zt.powi(-i - 1) * logs[j] * zp * z
            })
            .sum();
        Ok(s / n as f64)
    }

    pub fn h(&self, j: i32) -> Result<C64> {
        let n = self.n() as i64;
        Ok(self.ell_pow_inf(j as i64, n)?.coeff(0) * (n as f64 / j as f64))
    }

    pub fn hhat(&self, k: i32) -> Result<C64> {
        if k == 0 {
            return Ok(self.point.vhat_lead().ln());
        }
        let m = self.m() as i64;
        Ok(self.ell_pow_zero(k as i64, m)?.coeff(0) * (m as f64 / k as f64))
    }

    pub fn coordinate(&self, c: Coord) -> Result<C64> {
        c.check(self.n(), self.m())?;
        match c {
            Coord::T(i) => self.t(i),
            Coord::H(j) => self.h(j),
            Coord::Hhat(k) => self.hhat(k),
        }
    }
}

/// Values of the flat coordinates with `|i| ≤ T_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatCoords {
    pub n: usize,
    pub m: usize,
    pub t_max: i32,
    /// `t[i + T_max] = t^i`
    pub t: Vec<C64>,
    /// `h^1 .. h^{N−1}`
    pub h: Vec<C64>,
    /// `ĥ^0 .. ĥ^M`
    pub hhat: Vec<C64>,
}

impl FlatCoords {
    /// All `t` and `h` zero, `ĥ^0 = σ`, other `ĥ` zero.
    pub fn collapse(n: usize, m: usize, t_max: i32, sigma: C64) -> Self {
        let mut hhat = vec![C64::new(0.0, 0.0); m + 1];
        hhat[0] = sigma;
        FlatCoords {
            n,
            m,
            t_max,
            t: vec![C64::new(0.0, 0.0); (2 * t_max + 1) as usize],
            h: vec![C64::new(0.0, 0.0); n - 1],
            hhat,
        }
    }

    pub fn t(&self, i: i32) -> C64 {
        if i.abs() > self.t_max {
            C64::new(0.0, 0.0)
        } else {
            self.t[(i + self.t_max) as usize]
        }
    }

    pub fn get(&self, c: Coord) -> Option<C64> {
        match c {
            Coord::T(i) if i.abs() <= self.t_max => Some(self.t(i)),
            Coord::H(j) if j >= 1 && (j as usize) < self.n => Some(self.h[j as usize - 1]),
            Coord::Hhat(k) if k >= 0 && (k as usize) <= self.m => Some(self.hhat[k as usize]),
            _ => None,
        }
    }

    pub fn set(&mut self, c: Coord, v: C64) -> Result<()> {
        match c {
            Coord::T(i) if i.abs() <= self.t_max => self.t[(i + self.t_max) as usize] = v,
            Coord::H(j) if j >= 1 && (j as usize) < self.n => self.h[j as usize - 1] = v,
            Coord::Hhat(k) if k >= 0 && (k as usize) <= self.m => self.hhat[k as usize] = v,
            _ => return Err(Error::UnknownLabel(c.to_string())),
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<Coord> {
        coord_list(self.n, self.m, self.t_max)
    }

    pub fn max_abs_diff(&self, other: &FlatCoords) -> f64 {
        self.labels()
            .into_iter()
            .map(|c| match (self.get(c), other.get(c)) {
                (Some(a), Some(b)) => (a - b).norm(),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> FlatCoordsFile {
        FlatCoordsFile {
            n: self.n,
            m: self.m,
            t_max: self.t_max,
            t: (-self.t_max..=self.t_max)
                .map(|i| (i.to_string(), [self.t(i).re, self.t(i).im]))
                .collect(),
            h: self.h.iter().map(|c| [c.re, c.im]).collect(),
            hhat: self.hhat.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_file(f: &FlatCoordsFile) -> Result<Self> {
        if f.n == 0 || f.m == 0 || f.t_max < 0 {
            return Err(Error::Input("N, M must be positive and T_max non-negative".into()));
        }
        if f.h.len() != f.n - 1 || f.hhat.len() != f.m + 1 {
            return Err(Error::Input(format!(
                "expected {} h entries and {} hhat entries",
                f.n - 1,
                f.m + 1
            )));
        }
        let mut fc = FlatCoords::collapse(f.n, f.m, f.t_max, C64::new(0.0, 0.0));
        for (k, v) in &f.t {
            let i: i32 = k
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad t index {k}")))?;
            if i.abs() > f.t_max {
                return Err(Error::Input(format!("t^{i} exceeds T_max {}", f.t_max)));
            }
            fc.set(Coord::T(i), C64::new(v[0], v[1]))?;
        }
        fc.h = f.h.iter().map(|c| C64::new(c[0], c[1])).collect();
        fc.hhat = f.hhat.iter().map(|c| C64::new(c[0], c[1])).collect();
        let all_finite = fc.t.iter().chain(&fc.h).chain(&fc.hhat).all(|c| c.re.is_finite() && c.im.is_finite());
        if !all_finite {
            return Err(Error::Input("non-finite coordinate".into()));
        }
        Ok(fc)
    }
}

/// Coordinates file layout; `t` is keyed by the index as a string.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlatCoordsFile {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T_max")]
    pub t_max: i32,
    pub t: BTreeMap<String, [f64; 2]>,
    pub h: Vec<[f64; 2]>,
    pub hhat: Vec<[f64; 2]>,
}

/// The point reached from `p` by moving the single flat coordinate `c` by
/// `s`, all others fixed: RK4 on `(ζ, l)` along the frame `∂/∂c`.
pub fn coordinate_flow(p: &PointNM, c: Coord, s: f64, settings: &Settings) -> Result<PointNM> {
    let steps = ((s.abs() / 0.02).ceil() as usize).max(1);
    let h = re(s / steps as f64);
    let (n, m) = (p.n, p.m);
    let rhs = |zeta: &LaurentSeries, ell: &LaurentSeries| -> Result<(LaurentSeries, LaurentSeries)> {
        let q = PointNM::assemble(n, m, zeta, ell)?;
        Site::new(&q, settings)?.frame_zeta_ell(c)
    };
    let (mut zeta, mut ell) = p.zeta_and_ell();
    for _ in 0..steps {
        let (k1z, k1l) = rhs(&zeta, &ell)?;
        let half = h * 0.5;
        let (k2z, k2l) = rhs(&(&zeta + &k1z.scale(half)), &(&ell + &k1l.scale(half)))?;
        let (k3z, k3l) = rhs(&(&zeta + &k2z.scale(half)), &(&ell + &k2l.scale(half)))?;
        let (k4z, k4l) = rhs(&(&zeta + &k3z.scale(h)), &(&ell + &k3l.scale(h)))?;
        let sixth = h / 6.0;
        let dz = &(&(&k1z + &k2z.scale(re(2.0))) + &k3z.scale(re(2.0))) + &k4z;
        let dl = &(&(&k1l + &k2l.scale(re(2.0))) + &k3l.scale(re(2.0))) + &k4l;
        zeta = &zeta + &dz.scale(sixth);
        ell = &ell + &dl.scale(sixth);
    }
    PointNM::assemble(n, m, &zeta, &ell)
}

pub fn flat_coordinates(p: &PointNM, t_max: i32, settings: &Settings) -> Result<FlatCoords> {
    let site = Site::new(p, settings)?;
    flat_coordinates_at(&site, t_max)
}

pub fn flat_coordinates_at(site: &Site, t_max: i32) -> Result<FlatCoords> {
    let (n, m) = (site.n(), site.m());
    let mut fc = FlatCoords::collapse(n, m, t_max, C64::new(0.0, 0.0));
    for c in coord_list(n, m, t_max) {
        fc.set(c, site.coordinate(c)?)?;
    }
    Ok(fc)
}

/// The factors `f₀(ζ) = exp(−Σ_{i≥0} t^i ζ^i)` (a power series in `ζ`) and
/// `f_∞(ζ) = ζ exp(Σ_{i≥1} t^{−i} ζ^{−i})` (a series in `ζ⁻¹`), so that
/// `z(ζ) = f_∞(ζ)/f₀(ζ)`.
pub fn riemann_hilbert_split(fc: &FlatCoords) -> (LaurentSeries, LaurentSeries) {
    let win = Window::global();
    let len0 = (win.hi + 1) as usize;
    let mut a0 = vec![C64::new(0.0, 0.0); len0];
    for i in 0..=fc.t_max.min(win.hi) {
        a0[i as usize] = -fc.t(i);
    }
    let f0 = LaurentSeries::new(0, ps::exp(&a0, len0));
    let len_inf = (1 - win.lo) as usize;
    let mut ainf = vec![C64::new(0.0, 0.0); len_inf];
    for i in 1..=fc.t_max.min(len_inf as i32 - 1) {
        ainf[i as usize] = fc.t(-i);
    }
    let e = ps::exp(&ainf, len_inf);
    let rev: Vec<C64> = e.into_iter().rev().collect();
    let finf = LaurentSeries::new(1 - len_inf as i32 + 1, rev);
    (f0.with_truncated(true), finf.with_truncated(true))
}

/// `ζ(z)` from the factorization `z(ζ) = ζ exp(Σ_i t^i ζ^i)` by inverting it on
/// circle nodes. Works when the finite `t` data defines a univalent map near
/// the curve; used as a seed for the Newton matching.
pub fn zeta_from_factorization(fc: &FlatCoords, settings: &Settings) -> Result<LaurentSeries> {
    let tm = fc.t_max;
    let map = |w: C64| {
        let mut s = C64::new(0.0, 0.0);
        let mut ds = C64::new(0.0, 0.0);
        for i in -tm..=tm {
            let ti = fc.t(i);
            if ti == C64::new(0.0, 0.0) {
                continue;
            }
            s += ti * w.powi(i);
            ds += ti * (i as f64) * w.powi(i - 1);
        }
        let e = s.exp();
        (w * e, e * (re(1.0) + w * ds))
    };
    // seed: solve map(w) = 1 starting from w = 1
    let start = crate::laurent::continuation_newton(&map, &[re(1.0)], re(1.0), 1e-14)?[0];
    let inv = crate::laurent::invert_map_to_circle(&map, settings.n_samples, start)?;
    let zeta = CircleSamples { values: inv.values }.to_series(Window::global());
    Ok(zeta)
}

fn solve_complex(j: DMatrix<C64>, r: DVector<C64>) -> Result<DVector<C64>> {
    j.lu()
        .solve(&r)
        .ok_or_else(|| Error::Singular("chart Jacobian".into()))
}

/// `t^i` for `|i| ≤ T` and their Jacobian with respect to `ζ_k`,
/// `k ∈ [−T+1, T+1]`: `∂t^i/∂ζ_k = −[ζ^{−i−1}]_{−k}`.
fn t_and_jacobian(zeta: &LaurentSeries, tm: i32, settings: &Settings) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let site_like = zeta.to_samples(settings.n_samples)?;
    let nodes = CircleSamples::nodes(settings.n_samples);
    let wn = winding_number(&site_like.values)?;
    if (wn - 1.0).abs() > 1e-6 {
        return Err(Error::Winding(wn));
    }
    let nf = settings.n_samples as f64;
    let dim = (2 * tm + 1) as usize;
    let mut t = vec![C64::new(0.0, 0.0); dim];
    let mut jac = DMatrix::<C64>::zeros(dim, dim);
    let ratio: Vec<C64> = site_like.values.iter().zip(&nodes).map(|(a, z)| a / z).collect();
    let logs = unwrapped_log(&ratio)?;
    for i in -tm..=tm {
        let r = (i + tm) as usize;
        t[r] = if i == 0 {
            -logs.iter().sum::<C64>() / nf
        } else {
            site_like.values.iter().map(|v| v.powi(-i)).sum::<C64>() / nf / i as f64
        };
        let pw = CircleSamples {
            values: site_like.values.iter().map(|v| v.powi(-i - 1)).collect(),
        }
        .to_series(Window::global());
        for k in (-tm + 1)..=(tm + 1) {
            jac[(r, (k + tm - 1) as usize)] = -pw.coeff(-k);
        }
    }
    Ok((t, jac))
}

fn zeta_from_unknowns(x: &DVector<C64>, tm: i32) -> LaurentSeries {
    LaurentSeries::new(-tm + 1, x.iter().copied().collect())
}

/// Newton matching of `t^{−T..T}` with `ζ` supported on `[−T+1, T+1]`.
fn match_zeta(fc: &FlatCoords, seed: &LaurentSeries, settings: &Settings) -> Result<LaurentSeries> {
    let tm = fc.t_max;
    let dim = (2 * tm + 1) as usize;
    let target: Vec<C64> = (-tm..=tm).map(|i| fc.t(i)).collect();
    let mut x = DVector::<C64>::from_iterator(dim, ((-tm + 1)..=(tm + 1)).map(|k| seed.coeff(k)));
    let resid = |t: &[C64]| -> (DVector<C64>, f64) {
        let r = DVector::from_iterator(dim, t.iter().zip(&target).map(|(a, b)| a - b));
        let nrm = r.iter().map(|c| c.norm()).fold(0.0, f64::max);
        (r, nrm)
    };
    let (t0, mut jac) = t_and_jacobian(&zeta_from_unknowns(&x, tm), tm, settings)?;
    let (mut r, mut rn) = resid(&t0);
    let scale = 1.0 + target.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for _ in 0..60 {
        if rn <= 1e-14 * scale {
            break;
        }
        let dx = solve_complex(jac.clone(), -r.clone())?;
        let mut lam = 1.0;
        let mut accepted = false;
        while lam > 1e-4 {
            let xn = &x + dx.scale(lam);
            if let Ok((tn, jn)) = t_and_jacobian(&zeta_from_unknowns(&xn, tm), tm, settings) {
                let (rn_vec, rn_new) = resid(&tn);
                if rn_new < rn || rn_new <= 1e-14 * scale {
                    x = xn;
                    r = rn_vec;
                    rn = rn_new;
                    jac = jn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn > 1e-11 * scale {
        return Err(Error::NonConvergent(format!("t matching residual {rn:e}")));
    }
    Ok(zeta_from_unknowns(&x, tm))
}

/// `h`, `ĥ` of `l` and the Jacobian with respect to `l_r`, `r ∈ [−M+1, N−1]`.
fn hh_and_jacobian(ell: &LaurentSeries, n: usize, m: usize) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let (ni, mi) = (n as i64, m as i64);
    let dim = n - 1 + m;
    let mut v = Vec::with_capacity(dim);
    let mut jac = DMatrix::<C64>::zeros(dim, dim);
    let col = |r: i32| (r + mi as i32 - 1) as usize;
    for j in 1..ni {
        let row = v.len();
        v.push(ell.fractional_power(j, ni, Anchor::Infinity)?.coeff(0) * (ni as f64 / j as f64));
        let d = ell.fractional_power(j - ni, ni, Anchor::Infinity)?;
        for r in (-mi as i32 + 1)..(ni as i32) {
            jac[(row, col(r))] = d.coeff(-r);
        }
    }
    for k in 1..=mi {
        let row = v.len();
        v.push(ell.fractional_power(k, mi, Anchor::Zero)?.coeff(0) * (mi as f64 / k as f64));
        let d = ell.fractional_power(k - mi, mi, Anchor::Zero)?;
        for r in (-mi as i32 + 1)..(ni as i32) {
            jac[(row, col(r))] = d.coeff(-r);
        }
    }
    Ok((v, jac))
}

fn match_ell(fc: &FlatCoords) -> Result<LaurentSeries> {
    let (n, m) = (fc.n, fc.m);
    let (ni, mi) = (n as i32, m as i32);
    let lead = fc.hhat[0].exp();
    let target: Vec<C64> = fc.h.iter().chain(&fc.hhat[1..]).copied().collect();
    let build = |x: &[C64]| {
        let mut terms = vec![(ni, re(1.0)), (-mi, lead)];
        for (idx, r) in ((-mi + 1)..ni).enumerate() {
            terms.push((r, x[idx]));
        }
        LaurentSeries::from_terms(&terms)
    };
    let dim = n - 1 + m;
    let mut x = vec![C64::new(0.0, 0.0); dim];
    let scale = 1.0 + target.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for _ in 0..50 {
        let (v, jac) = hh_and_jacobian(&build(&x), n, m)?;
        let r = DVector::from_iterator(dim, v.iter().zip(&target).map(|(a, b)| a - b));
        let rn = r.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if rn <= 1e-13 * scale {
            return Ok(build(&x));
        }
        let dx = solve_complex(jac, -r)?;
        for (xi, d) in x.iter_mut().zip(dx.iter()) {
            *xi += d;
        }
    }
    let (v, _) = hh_and_jacobian(&build(&x), n, m)?;
    let rn = v.iter().zip(&target).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if rn <= 1e-11 * scale {
        Ok(build(&x))
    } else {
        Err(Error::NonConvergent(format!("h matching residual {rn:e}")))
    }
}

/// Inverse chart.
///
/// `l` is recovered exactly from its `N + M` coordinates. For `ζ` the chart
/// is infinite-dimensional; the reconstruction returns the `ζ` supported on
/// `[−T_max+1, T_max+1]` whose `t^{−T_max..T_max}` equal the given values.
/// Points whose `ζ` fits in that window are recovered exactly.
pub fn point_from_flat(fc: &FlatCoords, settings: &Settings) -> Result<PointNM> {
    let tm = fc.t_max;
    let ell = match_ell(fc)?;
    let linear = {
        let mut terms = vec![(1, re(1.0))];
        for i in -tm..=tm {
            terms.push((i + 1, -fc.t(i)));
        }
        LaurentSeries::from_terms(&terms)
    };
    let zeta = match zeta_from_factorization(fc, settings) {
        Ok(seed) => match_zeta(fc, &seed, settings).or_else(|_| match_zeta(fc, &linear, settings)),
        Err(_) => match_zeta(fc, &linear, settings),
    }?;
    PointNM::assemble(fc.n, fc.m, &zeta, &ell)
}
