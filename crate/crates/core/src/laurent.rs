//! Truncated Laurent series in one complex variable.
//!
//! Every series is a finite window of coefficients `[lo, hi]`. Products are
//! clipped to a global exponent window; when a clip drops a nonzero term the
//! result carries a `truncated` flag instead of failing silently.
//!
//! Three kinds of data share this type:
//! - finite Laurent polynomials (points, monomial covectors), exact;
//! - expansions at infinity (`z^d (1 + O(1/z))`), clipped from below;
//! - expansions at zero (`z^d (1 + O(z))`), clipped from above;
//! - functions analytic on an annulus around `|z| = 1`, obtained from circle
//!   samples and clipped on both sides.
//!
//! Mixing an expansion at infinity with one at zero in a product is
//! meaningless and the callers never do it.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicI32, Ordering};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default half-width of the global exponent window.
pub const DEFAULT_K: i32 = 64;
/// Extra room above `K` so that `z^N` and friends fit for moderate `N`.
pub const MARGIN: i32 = 8;

static GLOBAL_K: AtomicI32 = AtomicI32::new(DEFAULT_K);

/// Set the global half-width. Meant to be called once at startup.
pub fn set_global_k(k: i32) {
    GLOBAL_K.store(k.max(4), Ordering::Relaxed);
}

pub fn global_k() -> i32 {
    GLOBAL_K.load(Ordering::Relaxed)
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub lo: i32,
    pub hi: i32,
}

impl Window {
    pub fn new(lo: i32, hi: i32) -> Self {
        Window { lo, hi }
    }

    /// `[-K, K + MARGIN]`.
    pub fn global() -> Self {
        let k = global_k();
        Window { lo: -k, hi: k + MARGIN }
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    /// exponents `>= 0`
    NonNeg,
    /// exponents `> 0`
    Pos,
    /// exponents `<= 0`
    NonPos,
    /// exponents `< 0`
    Neg,
    /// exponents `>= k`
    AtLeast(i32),
    /// exponents `<= k`
    AtMost(i32),
    /// exponents in `[a, b]`
    Range(i32, i32),
}

impl Part {
    fn bounds(self) -> (i32, i32) {
        match self {
            Part::NonNeg => (0, i32::MAX),
            Part::Pos => (1, i32::MAX),
            Part::NonPos => (i32::MIN, 0),
            Part::Neg => (i32::MIN, -1),
            Part::AtLeast(k) => (k, i32::MAX),
            Part::AtMost(k) => (i32::MIN, k),
            Part::Range(a, b) => (a, b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    Infinity,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSeries {
    lo: i32,
    coeffs: Vec<C64>,
    truncated: bool,
}

impl Default for LaurentSeries {
    fn default() -> Self {
        LaurentSeries::zero()
    }
}

impl LaurentSeries {
    pub fn zero() -> Self {
        LaurentSeries {
            lo: 0,
            coeffs: vec![C64::new(0.0, 0.0)],
            truncated: false,
        }
    }

    /// Coefficient of `z^k` is `coeffs[k - lo]`. Exact zeros at both ends are
    /// trimmed.
    pub fn new(lo: i32, coeffs: Vec<C64>) -> Self {
        let mut s = LaurentSeries {
            lo,
            coeffs,
            truncated: false,
        };
        s.trim();
        s
    }

    pub fn from_real(lo: i32, coeffs: &[f64]) -> Self {
        Self::new(lo, coeffs.iter().map(|&x| re(x)).collect())
    }

    pub fn monomial(k: i32, coef: C64) -> Self {
        Self::new(k, vec![coef])
    }

    pub fn constant(coef: C64) -> Self {
        Self::monomial(0, coef)
    }

    pub fn one() -> Self {
        Self::constant(re(1.0))
    }

    /// The series `z`.
    pub fn z() -> Self {
        Self::monomial(1, re(1.0))
    }

    pub fn from_fn(lo: i32, hi: i32, f: impl FnMut(i32) -> C64) -> Self {
        Self::new(lo, (lo..=hi).map(f).collect())
    }

    /// Sum of `(k, c)` terms; repeated exponents add up.
    pub fn from_terms(terms: &[(i32, C64)]) -> Self {
        if terms.is_empty() {
            return Self::zero();
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut v = vec![C64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for &(k, c) in terms {
            v[(k - lo) as usize] += c;
        }
        Self::new(lo, v)
    }

    fn trim(&mut self) {
        let zero = C64::new(0.0, 0.0);
        let first = self.coeffs.iter().position(|&c| c != zero);
        match first {
            None => {
                self.lo = 0;
                self.coeffs = vec![zero];
            }
            Some(f) => {
                let last = self.coeffs.iter().rposition(|&c| c != zero).unwrap();
                self.coeffs.truncate(last + 1);
                self.coeffs.drain(..f);
                self.lo += f as i32;
            }
        }
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn with_truncated(mut self, flag: bool) -> Self {
        self.truncated = self.truncated || flag;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == C64::new(0.0, 0.0)
    }

    pub fn coeff(&self, k: i32) -> C64 {
        if k < self.lo || k > self.hi() {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k - self.lo) as usize]
        }
    }

    /// `(exponent, coefficient)` pairs over the stored window.
    pub fn terms(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.lo + i as i32, c))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient difference over the union of both windows.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        (lo..=hi)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.lo, self.coeffs.iter().map(|&c| c * s).collect())
            .with_truncated(self.truncated)
    }

    /// Multiply by `z^k`.
    pub fn shift(&self, k: i32) -> Self {
        LaurentSeries {
            lo: self.lo + k,
            coeffs: self.coeffs.clone(),
            truncated: self.truncated,
        }
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let v = (lo..=hi)
            .map(|k| self.coeff(k) + other.coeff(k) * sign)
            .collect();
        Self::new(lo, v).with_truncated(self.truncated || other.truncated)
    }

    /// Product clipped to the global window.
    pub fn mul_series(&self, other: &Self) -> Self {
        self.mul_in(other, Window::global())
    }

    /// Product clipped to `win`, flagging dropped nonzero terms.
    pub fn mul_in(&self, other: &Self, win: Window) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let full_lo = self.lo + other.lo;
        let full_hi = self.hi() + other.hi();
        let lo = full_lo.max(win.lo);
        let hi = full_hi.min(win.hi);
        let clipped = full_lo < win.lo || full_hi > win.hi;
        if lo > hi {
            return Self::zero().with_truncated(true);
        }
        let mut out = vec![C64::new(0.0, 0.0); (hi - lo + 1) as usize];
        let (a_lo, b_lo) = (self.lo, other.lo);
        let b_hi = other.hi();
        for (i, &x) in self.coeffs.iter().enumerate() {
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            let ei = a_lo + i as i32;
            let j_lo = (lo - ei).max(b_lo);
            let j_hi = (hi - ei).min(b_hi);
            if j_lo > j_hi {
                continue;
            }
            for ej in j_lo..=j_hi {
                out[(ei + ej - lo) as usize] += x * other.coeffs[(ej - b_lo) as usize];
            }
        }
        Self::new(lo, out).with_truncated(self.truncated || other.truncated || clipped)
    }

    /// Product that refuses to clip.
    pub fn mul_strict(&self, other: &Self, win: Window) -> Result<Self> {
        let need_lo = self.lo + other.lo;
        let need_hi = self.hi() + other.hi();
        if !(self.is_zero() || other.is_zero()) && (need_lo < win.lo || need_hi > win.hi) {
            return Err(Error::WindowOverflow {
                need_lo,
                need_hi,
                lo: win.lo,
                hi: win.hi,
            });
        }
        Ok(self.mul_in(other, win))
    }

    pub fn project(&self, part: Part) -> Self {
        let (a, b) = part.bounds();
        let lo = self.lo.max(a);
        let hi = self.hi().min(b);
        if lo > hi {
            return Self::zero();
        }
        let v = self.coeffs[(lo - self.lo) as usize..=(hi - self.lo) as usize].to_vec();
        Self::new(lo, v).with_truncated(self.truncated)
    }

    pub fn ge(&self, k: i32) -> Self {
        self.project(Part::AtLeast(k))
    }

    pub fn gt(&self, k: i32) -> Self {
        self.project(Part::AtLeast(k + 1))
    }

    pub fn le(&self, k: i32) -> Self {
        self.project(Part::AtMost(k))
    }

    pub fn lt(&self, k: i32) -> Self {
        self.project(Part::AtMost(k - 1))
    }

    /// `Π[f] = f_{≥0} − f_{<0}`.
    pub fn pi_split(&self) -> Self {
        &self.ge(0) - &self.lt(0)
    }

    /// `d/dz`.
    pub fn deriv(&self) -> Self {
        let v = self
            .terms()
            .map(|(k, c)| c * k as f64)
            .collect::<Vec<_>>();
        Self::new(self.lo - 1, v).with_truncated(self.truncated)
    }

    /// `z d/dz`, which keeps the window.
    pub fn zderiv(&self) -> Self {
        let v = self.terms().map(|(k, c)| c * k as f64).collect();
        Self::new(self.lo, v).with_truncated(self.truncated)
    }

    /// Residue of `f dz` at `z = 0`.
    pub fn res_zero(&self) -> C64 {
        self.coeff(-1)
    }

    /// Residue of `f dz` at `z = ∞`.
    pub fn res_infinity(&self) -> C64 {
        -self.coeff(-1)
    }

    /// `(1/2πi) ∮ f dz/z`.
    pub fn circle_average(&self) -> C64 {
        self.coeff(0)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc * z.powi(self.lo)
    }

    /// Non-negative integer power by repeated squaring.
    pub fn powi(&self, n: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_series(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_series(&base);
            }
        }
        result
    }

    /// `f^{num/den}` as an expansion at the given anchor.
    ///
    /// At infinity the leading term `c z^d` is the top coefficient; at zero it
    /// is the bottom one. The branch is fixed by the principal value of
    /// `c^{num/den}`, so a monic top gives `z^{d num/den}(1 + O(1/z))`.
    pub fn fractional_power(&self, num: i64, den: i64, anchor: Anchor) -> Result<Self> {
        fractional_power(self, num, den, anchor)
    }

    /// `1/f` expanded at infinity.
    pub fn inv_at_infinity(&self) -> Result<Self> {
        fractional_power(self, -1, 1, Anchor::Infinity)
    }

    /// `1/f` expanded at zero.
    pub fn inv_at_zero(&self) -> Result<Self> {
        fractional_power(self, -1, 1, Anchor::Zero)
    }

    /// Samples at the `n`-th roots of unity.
    pub fn to_samples(&self, n: usize) -> Result<CircleSamples> {
        circle_forward(self, n)
    }
}

impl Add for &LaurentSeries {
    type Output = LaurentSeries;
    fn add(self, rhs: &LaurentSeries) -> LaurentSeries {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &LaurentSeries {
    type Output = LaurentSeries;
    fn sub(self, rhs: &LaurentSeries) -> LaurentSeries {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: &LaurentSeries) -> LaurentSeries {
        self.mul_series(rhs)
    }
}

impl Mul<C64> for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: C64) -> LaurentSeries {
        self.scale(rhs)
    }
}

impl Mul<f64> for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: f64) -> LaurentSeries {
        self.scale(re(rhs))
    }
}

impl Neg for &LaurentSeries {
    type Output = LaurentSeries;
    fn neg(self) -> LaurentSeries {
        self.scale(re(-1.0))
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for LaurentSeries {
            type Output = LaurentSeries;
            fn $m(self, rhs: LaurentSeries) -> LaurentSeries {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&LaurentSeries> for LaurentSeries {
            type Output = LaurentSeries;
            fn $m(self, rhs: &LaurentSeries) -> LaurentSeries {
                (&self).$m(rhs)
            }
        }
        impl $tr<LaurentSeries> for &LaurentSeries {
            type Output = LaurentSeries;
            fn $m(self, rhs: LaurentSeries) -> LaurentSeries {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for LaurentSeries {
    type Output = LaurentSeries;
    fn neg(self) -> LaurentSeries {
        -&self
    }
}

impl Mul<C64> for LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: C64) -> LaurentSeries {
        self.scale(rhs)
    }
}

impl Mul<f64> for LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: f64) -> LaurentSeries {
        self.scale(re(rhs))
    }
}

/// Coefficient of `z^0` in `f g`, summed directly over overlapping exponents.
pub fn dot0(f: &LaurentSeries, g: &LaurentSeries) -> C64 {
    let lo = f.lo().max(-g.hi());
    let hi = f.hi().min(-g.lo());
    let mut acc = C64::new(0.0, 0.0);
    for k in lo..=hi {
        acc += f.coeff(k) * g.coeff(-k);
    }
    acc
}

// ---------------------------------------------------------------------------
// Power series in one variable, stored as `a[0] + a[1] w + ...` of fixed length.

pub(crate) mod ps {
    use super::C64;
    use crate::error::{Error, Result};

    /// `a^α` for `a[0] = 1`, principal branch at the constant term.
    ///
    /// Miller's recurrence `k g_k = Σ_{j=1}^k ((α+1)j − k) a_j g_{k−j}` fixes
    /// one order at a time, so low orders stay accurate even when the series
    /// is only formal and its tail grows geometrically.
    pub fn power(a: &[C64], alpha: f64, len: usize) -> Result<Vec<C64>> {
        if a.is_empty() || (a[0] - C64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::Input("power of a series not normalized to 1".into()));
        }
        let mut g = vec![C64::new(0.0, 0.0); len];
        if len == 0 {
            return Ok(g);
        }
        g[0] = C64::new(1.0, 0.0);
        for k in 1..len {
            let mut s = C64::new(0.0, 0.0);
            for j in 1..=k.min(a.len() - 1) {
                s += a[j] * g[k - j] * ((alpha + 1.0) * j as f64 - k as f64);
            }
            g[k] = s / k as f64;
        }
        if g.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonConvergent(format!("power {alpha}: overflow")));
        }
        Ok(g)
    }

    /// `exp(a)` for `a[0] = 0`: `e_k = (1/k) Σ j a_j e_{k−j}`.
    pub fn exp(a: &[C64], len: usize) -> Vec<C64> {
        let mut e = vec![C64::new(0.0, 0.0); len];
        if len == 0 {
            return e;
        }
        e[0] = a.first().copied().unwrap_or_default().exp();
        for k in 1..len {
            let mut s = C64::new(0.0, 0.0);
            for j in 1..=k {
                if let Some(&aj) = a.get(j) {
                    s += aj * (j as f64) * e[k - j];
                }
            }
            e[k] = s / k as f64;
        }
        e
    }
}

fn fractional_power(f: &LaurentSeries, num: i64, den: i64, anchor: Anchor) -> Result<LaurentSeries> {
    if den <= 0 {
        return Err(Error::Input(format!("denominator {den} must be positive")));
    }
    if f.is_zero() {
        return Err(Error::ZeroLeading(0));
    }
    let win = Window::global();
    let (d, lead) = match anchor {
        Anchor::Infinity => (f.hi(), f.coeff(f.hi())),
        Anchor::Zero => (f.lo(), f.coeff(f.lo())),
    };
    if lead.norm() == 0.0 {
        return Err(Error::ZeroLeading(d));
    }
    if (d as i64 * num) % den != 0 {
        return Err(Error::NonIntegralPower {
            num,
            den,
            degree: d,
        });
    }
    let e = (d as i64 * num / den) as i32;
    let len = match anchor {
        Anchor::Infinity => e - win.lo + 1,
        Anchor::Zero => win.hi - e + 1,
    };
    if len <= 0 {
        return Ok(LaurentSeries::zero().with_truncated(true));
    }
    let len = len as usize;
    let g: Vec<C64> = (0..len as i32)
        .map(|k| match anchor {
            Anchor::Infinity => f.coeff(d - k) / lead,
            Anchor::Zero => f.coeff(d + k) / lead,
        })
        .collect();
    let h = ps::power(&g, num as f64 / den as f64, len)?;
    let scale = (lead.ln() * (num as f64 / den as f64)).exp();
    let out: Vec<C64> = h.iter().map(|&x| x * scale).collect();
    let s = match anchor {
        Anchor::Infinity => {
            let rev: Vec<C64> = out.into_iter().rev().collect();
            LaurentSeries::new(e - len as i32 + 1, rev)
        }
        Anchor::Zero => LaurentSeries::new(e, out),
    };
    Ok(s.with_truncated(true))
}

// ---------------------------------------------------------------------------
// Circle sampling.

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Values of a function at the `n`-th roots of unity `e^{2πij/n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleSamples {
    pub values: Vec<C64>,
}

impl CircleSamples {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn nodes(n: usize) -> Vec<C64> {
        (0..n)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect()
    }

    /// Coefficients on `win` (clipped to what `n` samples can resolve).
    pub fn to_series(&self, win: Window) -> LaurentSeries {
        let n = self.n();
        let mut buf = self.values.clone();
        PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
        let half = (n / 2) as i32;
        let lo = win.lo.max(-half);
        let hi = win.hi.min(half - 1);
        let inv_n = 1.0 / n as f64;
        let v = (lo..=hi)
            .map(|k| buf[k.rem_euclid(n as i32) as usize] * inv_n)
            .collect();
        LaurentSeries::new(lo, v).with_truncated(true)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> CircleSamples {
        CircleSamples {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }
}

fn circle_forward(f: &LaurentSeries, n: usize) -> Result<CircleSamples> {
    if !n.is_power_of_two() {
        return Err(Error::Input(format!("sample count {n} is not a power of two")));
    }
    let width = f.coeffs().len();
    if width > n {
        return Err(Error::Aliasing { width, samples: n });
    }
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (k, c) in f.terms() {
        buf[k.rem_euclid(n as i32) as usize] += c;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut buf));
    Ok(CircleSamples { values: buf })
}

/// Evaluate a pointwise function of several series on the circle and return
/// its Laurent coefficients on the global window.
///
/// The closure receives the node `z` and the input values at `z`.
pub fn sample_apply(
    n: usize,
    inputs: &[&LaurentSeries],
    f: impl Fn(C64, &[C64]) -> C64,
) -> Result<LaurentSeries> {
    let samples: Vec<CircleSamples> = inputs
        .iter()
        .map(|s| s.to_samples(n))
        .collect::<Result<_>>()?;
    let nodes = CircleSamples::nodes(n);
    let mut vals = vec![C64::new(0.0, 0.0); inputs.len()];
    let out = nodes
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            for (i, s) in samples.iter().enumerate() {
                vals[i] = s.values[j];
            }
            f(z, &vals)
        })
        .collect();
    Ok(CircleSamples { values: out }.to_series(Window::global()))
}

/// Continuous logarithm along a closed sampled curve, starting from the
/// principal value at the first sample. Fails when consecutive arguments jump
/// by more than `π/2` or when the curve winds around the origin.
pub fn unwrapped_log(values: &[C64]) -> Result<Vec<C64>> {
    let (incs, total) = arg_increments(values)?;
    if total.abs() > PI {
        return Err(Error::Resolution(format!(
            "log branch does not close: total argument increment {total:.3}"
        )));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut arg = values[0].arg();
    out.push(C64::new(values[0].norm().ln(), arg));
    for (j, v) in values.iter().enumerate().skip(1) {
        arg += incs[j - 1];
        out.push(C64::new(v.norm().ln(), arg));
    }
    Ok(out)
}

/// Winding number of a closed sampled curve around 0.
pub fn winding_number(values: &[C64]) -> Result<f64> {
    let (_, total) = arg_increments(values)?;
    let w = total / (2.0 * PI);
    if (w - w.round()).abs() > 0.25 {
        return Err(Error::Resolution(format!("winding number {w:.3} is not near an integer")));
    }
    Ok(w)
}

fn arg_increments(values: &[C64]) -> Result<(Vec<f64>, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    if values.iter().any(|v| v.norm() == 0.0) {
        return Err(Error::Resolution("curve passes through 0".into()));
    }
    let mut incs = Vec::with_capacity(n);
    let mut total = 0.0;
    for j in 0..n {
        let a = values[j];
        let b = values[(j + 1) % n];
        let d = (b / a).arg();
        if d.abs() > PI / 2.0 {
            return Err(Error::Resolution(format!(
                "argument jump {d:.3} between samples {j} and {}",
                (j + 1) % n
            )));
        }
        incs.push(d);
        total += d;
    }
    Ok((incs, total))
}

// ---------------------------------------------------------------------------
// Functional inversion on samples.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// Invert a series `f: S¹ → Γ`; the inverse is evaluated at points of `Γ`.
    CircleToCurve,
    /// Invert a map `g: Γ → S¹`; the inverse is evaluated at circle nodes.
    CurveToCircle,
}

/// A compositional inverse known on sample nodes: `values[j] = f⁻¹(nodes[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledInverse {
    pub nodes: Vec<C64>,
    pub values: Vec<C64>,
}

/// Solve `map(w_j) = target_j` along a chain of targets, seeding each Newton
/// run with the previous solution. `map` returns the value and derivative.
pub fn continuation_newton(
    map: &dyn Fn(C64) -> (C64, C64),
    targets: &[C64],
    seed: C64,
    tol: f64,
) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(targets.len());
    let mut w = seed;
    for (j, &t) in targets.iter().enumerate() {
        let mut res = f64::INFINITY;
        for _ in 0..60 {
            let (v, dv) = map(w);
            let r = v - t;
            res = r.norm();
            if res <= tol * (1.0 + t.norm()) {
                break;
            }
            if dv.norm() == 0.0 || !dv.norm().is_finite() {
                return Err(Error::NewtonDivergence { index: j, residual: res });
            }
            let mut step = r / dv;
            // damp steps that would jump across the curve
            let lim = 0.25 * (1.0 + w.norm());
            if step.norm() > lim {
                step *= lim / step.norm();
            }
            w -= step;
        }
        if !(res <= tol * (1.0 + t.norm()) * 10.0) {
            return Err(Error::NewtonDivergence { index: j, residual: res });
        }
        out.push(w);
    }
    Ok(out)
}

/// Compositional inverse of a series restricted to the unit circle.
///
/// `CircleToCurve`: `f` is the series, `points` lie on `Γ = f(S¹)` and are
/// ordered along it. `CurveToCircle` is handled by [`invert_map_to_circle`].
pub fn functional_inverse(
    f: &LaurentSeries,
    points: &[C64],
    n_check: usize,
    floor: f64,
) -> Result<SampledInverse> {
    let df = f.deriv();
    let dsamp = df.to_samples(n_check)?;
    if dsamp.min_modulus() < floor {
        return Err(Error::InvalidPoint(format!(
            "derivative vanishes on the circle (min modulus {:.3e})",
            dsamp.min_modulus()
        )));
    }
    let w = winding_number(&f.to_samples(n_check)?.values)?;
    if (w - 1.0).abs() > 1e-6 {
        return Err(Error::Winding(w));
    }
    if points.is_empty() {
        return Ok(SampledInverse {
            nodes: vec![],
            values: vec![],
        });
    }
    // seed: the circle node whose image is closest to the first point
    let nodes = CircleSamples::nodes(n_check);
    let img = f.to_samples(n_check)?;
    let j0 = (0..n_check)
        .min_by(|&i, &j| {
            (img.values[i] - points[0])
                .norm()
                .partial_cmp(&(img.values[j] - points[0]).norm())
                .unwrap()
        })
        .unwrap();
    let map = |z: C64| (f.eval(z), df.eval(z));
    let values = continuation_newton(&map, points, nodes[j0], 1e-14)?;
    Ok(SampledInverse {
        nodes: points.to_vec(),
        values,
    })
}

/// Given a map `g` (value, derivative) from a neighbourhood of a curve onto the
/// unit circle, find `w_j` with `g(w_j) = e^{2πij/n}`, by continuation from
/// `seed`.
pub fn invert_map_to_circle(
    g: &dyn Fn(C64) -> (C64, C64),
    n: usize,
    seed: C64,
) -> Result<SampledInverse> {
    let nodes = CircleSamples::nodes(n);
    let values = continuation_newton(g, &nodes, seed, 1e-14)?;
    Ok(SampledInverse { nodes, values })
}

/// Literal file format of a series: `{"lo", "hi", "coeffs": [[re, im], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SeriesLiteral {
    pub lo: i32,
    pub hi: i32,
    pub coeffs: Vec<[f64; 2]>,
}

impl From<&LaurentSeries> for SeriesLiteral {
    fn from(s: &LaurentSeries) -> Self {
        SeriesLiteral {
            lo: s.lo(),
            hi: s.hi(),
            coeffs: s.coeffs().iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<&SeriesLiteral> for LaurentSeries {
    type Error = Error;
    fn try_from(lit: &SeriesLiteral) -> Result<Self> {
        if lit.hi < lit.lo {
            return Err(Error::Input(format!("hi {} below lo {}", lit.hi, lit.lo)));
        }
        let want = (lit.hi - lit.lo + 1) as usize;
        if lit.coeffs.len() != want {
            return Err(Error::Input(format!(
                "series window [{}, {}] needs {want} coefficients, got {}",
                lit.lo,
                lit.hi,
                lit.coeffs.len()
            )));
        }
        if lit.coeffs.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::Input("non-finite coefficient".into()));
        }
        Ok(LaurentSeries::new(
            lit.lo,
            lit.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn addition_is_coefficientwise() {
        let f = LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(2.0))]);
        let g = LaurentSeries::monomial(-1, re(3.0));
        let s = &f + &g;
        assert_eq!(s.coeff(1), re(1.0));
        assert_eq!(s.coeff(-1), re(5.0));
    }

    #[test]
    fn binomial_square() {
        let f = LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(-0.25))]);
        let sq = &f * &f;
        assert_eq!(sq.coeff(2), re(1.0));
        assert_eq!(sq.coeff(0), re(-0.5));
        assert_eq!(sq.coeff(-2), re(1.0 / 16.0));
        assert!(!sq.truncated());
        assert!((&f * &LaurentSeries::zero()).is_zero());
    }

    #[test]
    fn clipping_sets_the_flag() {
        let f = LaurentSeries::monomial(40, re(1.0));
        let p = f.mul_in(&f, Window::new(-64, 72));
        assert!(p.truncated());
        assert!(p.is_zero());
        assert!(f.mul_strict(&f, Window::new(-64, 72)).is_err());
    }

    #[test]
    fn projections() {
        let f = LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(-0.25))]);
        assert_eq!(f.gt(0), LaurentSeries::z());
        assert_eq!(f.le(0), LaurentSeries::monomial(-1, re(-0.25)));
        let g = LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(1.0))]);
        assert_eq!(g.pi_split(), LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(-1.0))]));
    }

    #[test]
    fn derivatives_and_residues() {
        let zn = LaurentSeries::monomial(3, re(1.0));
        assert_eq!(zn.deriv(), LaurentSeries::monomial(2, re(3.0)));
        let f = LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(-0.25))]);
        assert_eq!(f.zderiv(), LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(0.25))]));
        assert!(LaurentSeries::constant(re(7.0)).zderiv().is_zero());
        let cz = LaurentSeries::monomial(-1, re(0.3));
        assert_eq!(cz.res_zero(), re(0.3));
        assert_eq!(cz.res_infinity(), re(-0.3));
        assert_eq!(f.circle_average(), re(0.0));
    }

    #[test]
    fn circle_transform_small() {
        let s = LaurentSeries::z().to_samples(4).unwrap();
        let want = [re(1.0), c(0.0, 1.0), re(-1.0), c(0.0, -1.0)];
        for (v, w) in s.values.iter().zip(want) {
            assert!(close(*v, w, 1e-15));
        }
        let one = CircleSamples { values: vec![re(1.0); 8] };
        let back = one.to_series(Window::global());
        assert!(back.max_abs_diff(&LaurentSeries::one()) < 1e-15);
        let f = LaurentSeries::from_terms(&[(1, re(1.0)), (-1, re(-0.25))]);
        let back = f.to_samples(8).unwrap().to_series(Window::global());
        assert!(back.max_abs_diff(&f) < 1e-14);
        assert!(LaurentSeries::monomial(20, re(1.0))
            .shift(-20)
            .to_samples(1)
            .is_ok());
        let wide = LaurentSeries::from_terms(&[(-5, re(1.0)), (5, re(1.0))]);
        assert!(matches!(wide.to_samples(8), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn square_root_at_infinity_matches_binomial_series() {
        let v = re(0.3);
        let f = LaurentSeries::from_terms(&[(2, re(1.0)), (0, v * 2.0)]);
        let r = f.fractional_power(1, 2, Anchor::Infinity).unwrap();
        assert!(close(r.coeff(1), re(1.0), 1e-14));
        assert!(close(r.coeff(0), re(0.0), 1e-14));
        assert!(close(r.coeff(-1), v, 1e-14));
        assert!(close(r.coeff(-3), -v * v / 2.0, 1e-14));
        // (2v)^3/16 from the binomial series of sqrt(1+x)
        assert!(close(r.coeff(-5), v * v * v / 2.0, 1e-14));
    }

    #[test]
    fn trivial_powers() {
        let z = LaurentSeries::z();
        let r = z.fractional_power(1, 1, Anchor::Infinity).unwrap();
        assert!(r.max_abs_diff(&z) < 1e-15);
        let cz = LaurentSeries::monomial(-1, c(0.2, 0.1));
        let r = cz.fractional_power(1, 1, Anchor::Zero).unwrap();
        assert!(r.max_abs_diff(&cz) < 1e-15);
        assert!(matches!(
            LaurentSeries::monomial(3, re(1.0)).fractional_power(1, 2, Anchor::Infinity),
            Err(Error::NonIntegralPower { .. })
        ));
    }

    #[test]
    fn exp_series() {
        let a = vec![re(0.0), re(1.0)];
        let e = ps::exp(&a, 6);
        let mut fact = 1.0;
        for (k, ek) in e.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            assert!(close(*ek, re(1.0 / fact), 1e-15));
        }
    }

    #[test]
    fn unwrapped_log_closes() {
        let f = LaurentSeries::from_terms(&[(0, re(2.0)), (1, re(0.5))]);
        let s = f.to_samples(64).unwrap();
        let l = unwrapped_log(&s.values).unwrap();
        for (lv, v) in l.iter().zip(&s.values) {
            assert!(close(lv.exp(), *v, 1e-13));
        }
        let zs = LaurentSeries::z().to_samples(64).unwrap();
        assert!(unwrapped_log(&zs.values).is_err());
        assert!((winding_number(&zs.values).unwrap() - 1.0).abs() < 1e-12);
    }
}
