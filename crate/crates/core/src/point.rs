//! Points `(a, â)` of the manifold, their validity conditions, and the
//! tangent/cotangent pairing.

use std::ops::{Add, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{dot0, re, winding_number, LaurentSeries, SeriesLiteral, Window, C64};

/// Sample count and modulus floor shared by the circle-based checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    pub n_samples: usize,
    pub floor: f64,
    pub t_max: i32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            n_samples: 512,
            floor: 1e-8,
            t_max: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointNM {
    pub n: usize,
    pub m: usize,
    pub a: LaurentSeries,
    pub ahat: LaurentSeries,
}

impl PointNM {
    /// Checks the structural windows: `a` monic of degree `N`, `â` bounded below
    /// by `−M`.
    pub fn new(n: usize, m: usize, a: LaurentSeries, ahat: LaurentSeries) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Input("N and M must be positive".into()));
        }
        let (ni, mi) = (n as i32, m as i32);
        if a.hi() != ni || (a.coeff(ni) - re(1.0)).norm() > 1e-12 {
            return Err(Error::InvalidPoint(format!(
                "a must be monic of degree {n}, got top exponent {} with coefficient {}",
                a.hi(),
                a.coeff(a.hi())
            )));
        }
        if ahat.lo() < -mi && !ahat.is_zero() {
            return Err(Error::InvalidPoint(format!(
                "ahat has exponent {} below -M = {}",
                ahat.lo(),
                -mi
            )));
        }
        let a = &a.lt(ni) + &LaurentSeries::monomial(ni, re(1.0));
        Ok(PointNM { n, m, a, ahat })
    }

    /// `a = z`, `â = z⁻¹/4` with `N = M = 1`.
    pub fn p0() -> Self {
        PointNM::new(
            1,
            1,
            LaurentSeries::z(),
            LaurentSeries::monomial(-1, re(0.25)),
        )
        .expect("reference point is well formed")
    }

    pub fn ni(&self) -> i32 {
        self.n as i32
    }

    pub fn mi(&self) -> i32 {
        self.m as i32
    }

    /// `v̂_{−M}`.
    pub fn vhat_lead(&self) -> C64 {
        self.ahat.coeff(-self.mi())
    }

    /// `ζ = a − â` and `l = a_{>0} + â_{≤0}`.
    pub fn zeta_and_ell(&self) -> (LaurentSeries, LaurentSeries) {
        let zeta = &self.a - &self.ahat;
        let ell = &self.a.gt(0) + &self.ahat.le(0);
        (zeta, ell)
    }

    /// Inverse of [`zeta_and_ell`](Self::zeta_and_ell):
    /// `a = l + ζ_{≤0}`, `â = l − ζ_{>0}`.
    pub fn assemble(n: usize, m: usize, zeta: &LaurentSeries, ell: &LaurentSeries) -> Result<Self> {
        let (ni, mi) = (n as i32, m as i32);
        if !ell.is_zero() && (ell.lo() < -mi || ell.hi() > ni) {
            return Err(Error::InvalidPoint(format!(
                "l has window [{}, {}] outside [-M, N] = [{}, {}]",
                ell.lo(),
                ell.hi(),
                -mi,
                ni
            )));
        }
        if (ell.coeff(ni) - re(1.0)).norm() > 1e-12 {
            return Err(Error::InvalidPoint("l is not monic at z^N".into()));
        }
        let a = ell + &zeta.le(0);
        let ahat = ell - &zeta.gt(0);
        PointNM::new(n, m, a, ahat)
    }

    pub fn validate(&self, settings: &Settings) -> ValidationReport {
        validate(self, settings)
    }

    /// `da(p) = Σ_{i≤N−1} dv_i p^i`, valid for `|z| < |p|`.
    pub fn da(&self, p: C64) -> CotangentVec {
        let win = Window::global();
        let lo = -self.ni() + 1;
        let w = LaurentSeries::from_fn(lo, win.hi, |e| p.powi(-e));
        CotangentVec::new_unchecked(w.with_truncated(true), LaurentSeries::zero())
    }

    /// `dâ(p) = Σ_{j≥−M} dv̂_j p^j`, valid for `|z| > |p|`.
    pub fn dahat(&self, p: C64) -> CotangentVec {
        let win = Window::global();
        let what = LaurentSeries::from_fn(win.lo, self.mi(), |e| p.powi(-e));
        CotangentVec::new_unchecked(LaurentSeries::zero(), what.with_truncated(true))
    }

    pub fn to_file(&self) -> PointFile {
        PointFile {
            n: self.n,
            m: self.m,
            a: (&self.a).into(),
            ahat: (&self.ahat).into(),
        }
    }

    pub fn from_file(f: &PointFile) -> Result<Self> {
        PointNM::new(
            f.n,
            f.m,
            LaurentSeries::try_from(&f.a)?,
            LaurentSeries::try_from(&f.ahat)?,
        )
    }

    /// `θ ↦ e^s θ(e^{−s/N} z)` applied to both components; the exact flow of
    /// the Euler field.
    pub fn euler_flow(&self, s: f64) -> Self {
        let scale = |f: &LaurentSeries| {
            let v = f
                .terms()
                .map(|(k, c)| c * (s - s * k as f64 / self.n as f64).exp())
                .collect();
            LaurentSeries::new(f.lo(), v)
        };
        PointNM {
            n: self.n,
            m: self.m,
            a: scale(&self.a),
            ahat: scale(&self.ahat),
        }
    }
}

/// Point file layout.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointFile {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub a: SeriesLiteral,
    pub ahat: SeriesLiteral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub m1: bool,
    pub m2: bool,
    pub m3: bool,
    pub vhat_lead_modulus: f64,
    pub min_wronskian: f64,
    pub min_zeta_prime: f64,
    pub min_ell_prime: f64,
    pub winding: Option<f64>,
    pub reasons: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.m1 && self.m2 && self.m3
    }
}

fn validate(p: &PointNM, settings: &Settings) -> ValidationReport {
    let mut reasons = Vec::new();
    let n = settings.n_samples;
    let lead = p.vhat_lead().norm();
    let m1 = lead > settings.floor;
    if !m1 {
        reasons.push("(M1) leading coefficient of ahat vanishes".to_string());
    }
    let (zeta, ell) = p.zeta_and_ell();
    let wr = &p.a * &p.ahat.deriv() - &p.a.deriv() * &p.ahat;
    let min_of = |f: &LaurentSeries, reasons: &mut Vec<String>, name: &str| -> f64 {
        match f.to_samples(n) {
            Ok(s) => s.min_modulus(),
            Err(e) => {
                reasons.push(format!("{name}: {e}"));
                0.0
            }
        }
    };
    let min_wronskian = min_of(&wr, &mut reasons, "wronskian");
    let min_zeta_prime = min_of(&zeta.deriv(), &mut reasons, "zeta-prime");
    let min_ell_prime = min_of(&ell.deriv(), &mut reasons, "ell-prime");
    let mut m2 = true;
    for (v, name) in [
        (min_wronskian, "a ahat' - a' ahat"),
        (min_zeta_prime, "zeta-prime"),
        (min_ell_prime, "ell-prime"),
    ] {
        if !(v > settings.floor) {
            m2 = false;
            reasons.push(format!("(M2) {name} vanishes on the circle (min modulus {v:.3e})"));
        }
    }
    let (winding, m3) = match zeta.to_samples(n).and_then(|s| winding_number(&s.values)) {
        Ok(w) => {
            let ok = (w - 1.0).abs() < 1e-6;
            if !ok {
                reasons.push(format!("(M3) winding number of zeta is {w:.3}"));
            }
            (Some(w), ok)
        }
        Err(e) => {
            reasons.push(format!("(M3) {e}"));
            (None, false)
        }
    };
    ValidationReport {
        m1,
        m2,
        m3,
        vhat_lead_modulus: lead,
        min_wronskian,
        min_zeta_prime,
        min_ell_prime,
        winding,
        reasons,
    }
}

/// `(X, X̂)` with `X ∈ z^{N−1}H⁻` and `X̂ ∈ z^{−M}H⁺`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TangentVec {
    pub x: LaurentSeries,
    pub xhat: LaurentSeries,
}

/// `(ω, ω̂)` with `ω ∈ z^{−N+1}H⁺` and `ω̂ ∈ z^{M}H⁻`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CotangentVec {
    pub w: LaurentSeries,
    pub what: LaurentSeries,
}

impl TangentVec {
    pub fn new(n: usize, m: usize, x: LaurentSeries, xhat: LaurentSeries) -> Result<Self> {
        if !x.is_zero() && x.hi() > n as i32 - 1 {
            return Err(Error::Input(format!("X has exponent {} above N-1", x.hi())));
        }
        if !xhat.is_zero() && xhat.lo() < -(m as i32) {
            return Err(Error::Input(format!("Xhat has exponent {} below -M", xhat.lo())));
        }
        Ok(TangentVec { x, xhat })
    }

    pub fn new_unchecked(x: LaurentSeries, xhat: LaurentSeries) -> Self {
        TangentVec { x, xhat }
    }

    /// Clip both components to the tangent windows.
    pub fn projected(n: usize, m: usize, x: LaurentSeries, xhat: LaurentSeries) -> Self {
        TangentVec {
            x: x.le(n as i32 - 1),
            xhat: xhat.ge(-(m as i32)),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scale(&self, s: C64) -> Self {
        TangentVec {
            x: self.x.scale(s),
            xhat: self.xhat.scale(s),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.x
            .max_abs_diff(&other.x)
            .max(self.xhat.max_abs_diff(&other.xhat))
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.xhat.max_abs())
    }

    /// `∂ζ = X − X̂`.
    pub fn dzeta(&self) -> LaurentSeries {
        &self.x - &self.xhat
    }

    /// `∂l = X_{>0} + X̂_{≤0}`.
    pub fn dell(&self) -> LaurentSeries {
        &self.x.gt(0) + &self.xhat.le(0)
    }

    /// Tangent vector with given `∂ζ`, `∂l`.
    pub fn from_zeta_ell(dzeta: &LaurentSeries, dell: &LaurentSeries) -> Self {
        TangentVec {
            x: dell + &dzeta.le(0),
            xhat: dell - &dzeta.gt(0),
        }
    }
}

impl CotangentVec {
    pub fn new(n: usize, m: usize, w: LaurentSeries, what: LaurentSeries) -> Result<Self> {
        if !w.is_zero() && w.lo() < -(n as i32) + 1 {
            return Err(Error::Input(format!("omega has exponent {} below -N+1", w.lo())));
        }
        if !what.is_zero() && what.hi() > m as i32 {
            return Err(Error::Input(format!("omegahat has exponent {} above M", what.hi())));
        }
        Ok(CotangentVec { w, what })
    }

    pub fn new_unchecked(w: LaurentSeries, what: LaurentSeries) -> Self {
        CotangentVec { w, what }
    }

    /// Clip both components to the cotangent windows.
    pub fn projected(n: usize, m: usize, w: LaurentSeries, what: LaurentSeries) -> Self {
        CotangentVec {
            w: w.ge(-(n as i32) + 1),
            what: what.le(m as i32),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scale(&self, s: C64) -> Self {
        CotangentVec {
            w: self.w.scale(s),
            what: self.what.scale(s),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.w
            .max_abs_diff(&other.w)
            .max(self.what.max_abs_diff(&other.what))
    }

    pub fn max_abs(&self) -> f64 {
        self.w.max_abs().max(self.what.max_abs())
    }
}

impl Add for &TangentVec {
    type Output = TangentVec;
    fn add(self, o: &TangentVec) -> TangentVec {
        TangentVec {
            x: &self.x + &o.x,
            xhat: &self.xhat + &o.xhat,
        }
    }
}

impl Sub for &TangentVec {
    type Output = TangentVec;
    fn sub(self, o: &TangentVec) -> TangentVec {
        TangentVec {
            x: &self.x - &o.x,
            xhat: &self.xhat - &o.xhat,
        }
    }
}

impl Add for &CotangentVec {
    type Output = CotangentVec;
    fn add(self, o: &CotangentVec) -> CotangentVec {
        CotangentVec {
            w: &self.w + &o.w,
            what: &self.what + &o.what,
        }
    }
}

impl Sub for &CotangentVec {
    type Output = CotangentVec;
    fn sub(self, o: &CotangentVec) -> CotangentVec {
        CotangentVec {
            w: &self.w - &o.w,
            what: &self.what - &o.what,
        }
    }
}

/// `⟨ω, X⟩ = [ωX + ω̂X̂]₀`.
pub fn pair(omega: &CotangentVec, x: &TangentVec) -> C64 {
    dot0(&omega.w, &x.x) + dot0(&omega.what, &x.xhat)
}

fn small_complex<R: Rng>(rng: &mut R, scale: f64) -> C64 {
    C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

/// A random point close to `ζ = z`, `l = z^N + v̂ z^{−M}`, redrawn until it
/// passes validation.
///
/// `ζ − z` and `l − z^N − v̂ z^{−M}` get small coefficients on `[−3, 3]` and
/// `(−M, N)` respectively, with magnitudes decaying away from the centre.
pub fn random_point<R: Rng>(n: usize, m: usize, rng: &mut R, settings: &Settings) -> PointNM {
    let (ni, mi) = (n as i32, m as i32);
    loop {
        let mut zt = vec![(1, re(1.0))];
        for k in -3i32..=3 {
            if k == 1 {
                continue;
            }
            zt.push((k, small_complex(rng, 0.04 / (1.0 + (k - 1).abs() as f64))));
        }
        let zeta = LaurentSeries::from_terms(&zt);
        let lead = C64::from_polar(rng.gen_range(0.22..0.32), rng.gen_range(-0.4..0.4));
        let mut lt = vec![(ni, re(1.0)), (-mi, lead)];
        for k in (-mi + 1)..ni {
            lt.push((k, small_complex(rng, 0.08)));
        }
        let ell = LaurentSeries::from_terms(&lt);
        let Ok(p) = PointNM::assemble(n, m, &zeta, &ell) else {
            continue;
        };
        let rep = p.validate(settings);
        if rep.passed() && rep.min_ell_prime > 0.05 && rep.min_zeta_prime > 0.3 {
            return p;
        }
    }
}

/// Random covector on a finite window `[−N+1, K₀] × [−K₀, M]` with
/// geometrically decaying coefficients.
pub fn random_covector<R: Rng>(n: usize, m: usize, depth: i32, rng: &mut R) -> CotangentVec {
    let w = LaurentSeries::from_fn(-(n as i32) + 1, depth, |k| {
        small_complex(rng, 0.7f64.powi(k.abs()))
    });
    let what = LaurentSeries::from_fn(-depth, m as i32, |k| small_complex(rng, 0.7f64.powi(k.abs())));
    CotangentVec { w, what }
}

/// Random tangent vector on `[−K₀, N−1] × [−M, K₀]`.
pub fn random_tangent<R: Rng>(n: usize, m: usize, depth: i32, rng: &mut R) -> TangentVec {
    let x = LaurentSeries::from_fn(-depth, n as i32 - 1, |k| small_complex(rng, 0.7f64.powi(k.abs())));
    let xhat = LaurentSeries::from_fn(-(m as i32), depth, |k| {
        small_complex(rng, 0.7f64.powi(k.abs()))
    });
    TangentVec { x, xhat }
}
