//! Loops in the manifold, the dispersionless Toda flows on them, their
//! Hamiltonians and the two Poisson operators.
//!
//! Every loop quantity is a vector of Laurent series, one per grid point
//! `x_j = 2πj/G`. The `x`-derivative is spectral, exponent by exponent.

use std::cell::RefCell;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{dot0, re, Anchor, LaurentSeries, C64};
use crate::point::{CotangentVec, PointFile, PointNM, Settings, TangentVec};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// A loop sampled on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopField {
    pub n: usize,
    pub m: usize,
    pub points: Vec<PointNM>,
}

/// Loop file layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoopFile {
    pub grid_size: usize,
    pub points: Vec<PointFile>,
}

pub type LoopTangent = Vec<TangentVec>;
pub type LoopCovector = Vec<CotangentVec>;

impl LoopField {
    pub fn new(points: Vec<PointNM>) -> Result<LoopField> {
        let g = points.len();
        if g < 2 || !g.is_power_of_two() {
            return Err(Error::Input(format!("grid size {g} is not a power of two")));
        }
        let (n, m) = (points[0].n, points[0].m);
        if points.iter().any(|p| p.n != n || p.m != m) {
            return Err(Error::Input("grid points disagree on (N, M)".into()));
        }
        Ok(LoopField { n, m, points })
    }

    /// Sample `f(x)` on the grid.
    pub fn from_fn(grid: usize, f: impl Fn(f64) -> PointNM) -> Result<LoopField> {
        LoopField::new(grid_x(grid).into_iter().map(f).collect())
    }

    pub fn grid(&self) -> usize {
        self.points.len()
    }

    pub fn from_file(f: &LoopFile) -> Result<LoopField> {
        if f.points.len() != f.grid_size {
            return Err(Error::Input(format!(
                "grid_size {} but {} points",
                f.grid_size,
                f.points.len()
            )));
        }
        LoopField::new(f.points.iter().map(PointNM::from_file).collect::<Result<_>>()?)
    }

    pub fn to_file(&self) -> LoopFile {
        LoopFile {
            grid_size: self.grid(),
            points: self.points.iter().map(PointNM::to_file).collect(),
        }
    }

    /// Grid indices failing (M1)–(M3).
    pub fn invalid_points(&self, settings: &Settings) -> Vec<usize> {
        (0..self.grid())
            .filter(|&j| !self.points[j].validate(settings).passed())
            .collect()
    }

    pub fn a(&self) -> Vec<LaurentSeries> {
        self.points.iter().map(|p| p.a.clone()).collect()
    }

    pub fn ahat(&self) -> Vec<LaurentSeries> {
        self.points.iter().map(|p| p.ahat.clone()).collect()
    }

    /// `(∂ₓa, ∂ₓâ)` at every grid point.
    pub fn dx(&self) -> Result<LoopTangent> {
        let ax = spectral_dx(&self.a())?;
        let ahx = spectral_dx(&self.ahat())?;
        Ok(ax.into_iter().zip(ahx).map(|(x, xh)| TangentVec::new_unchecked(x, xh)).collect())
    }

    /// `L + s·V`, keeping the monic top of `a`.
    pub fn step(&self, v: &LoopTangent, s: f64) -> LoopField {
        let points = self
            .points
            .iter()
            .zip(v)
            .map(|(p, t)| PointNM {
                n: p.n,
                m: p.m,
                a: &p.a + &t.x.scale(re(s)),
                ahat: &p.ahat + &t.xhat.scale(re(s)),
            })
            .collect();
        LoopField {
            n: self.n,
            m: self.m,
            points,
        }
    }

    pub fn max_abs_diff(&self, other: &LoopField) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(p, q)| p.a.max_abs_diff(&q.a).max(p.ahat.max_abs_diff(&q.ahat)))
            .fold(0.0, f64::max)
    }
}

/// `x_j = 2πj/G`.
pub fn grid_x(grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / grid as f64)
        .collect()
}

/// Spectral derivative of a periodic sequence of length `G`.
fn dx_values(values: &mut [C64]) {
    let g = values.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(g).process(values));
    for (k, v) in values.iter_mut().enumerate() {
        let wave = if k < g / 2 {
            k as f64
        } else if k == g / 2 {
            0.0
        } else {
            k as f64 - g as f64
        };
        *v *= C64::new(0.0, wave / g as f64);
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(g).process(values));
}

/// `∂ₓ` of a loop of series, coefficient by coefficient.
pub fn spectral_dx(f: &[LaurentSeries]) -> Result<Vec<LaurentSeries>> {
    let g = f.len();
    if g < 2 || !g.is_power_of_two() {
        return Err(Error::Input(format!("grid size {g} is not a power of two")));
    }
    let nonzero = f.iter().filter(|s| !s.is_zero());
    let lo = nonzero.clone().map(|s| s.lo()).min();
    let hi = nonzero.map(|s| s.hi()).max();
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Ok(vec![LaurentSeries::zero(); g]);
    };
    let width = (hi - lo + 1) as usize;
    let mut out = vec![vec![re(0.0); width]; g];
    let mut buf = vec![re(0.0); g];
    for k in lo..=hi {
        for (j, s) in f.iter().enumerate() {
            buf[j] = s.coeff(k);
        }
        dx_values(&mut buf);
        for j in 0..g {
            out[j][(k - lo) as usize] = buf[j];
        }
    }
    Ok(out.into_iter().map(|v| LaurentSeries::new(lo, v)).collect())
}

/// `{f, g} = z(f_z g_x − g_z f_x)` pointwise on the grid.
pub fn lie_bracket(f: &[LaurentSeries], g: &[LaurentSeries]) -> Result<Vec<LaurentSeries>> {
    if f.len() != g.len() {
        return Err(Error::Input(format!("grid mismatch: {} vs {}", f.len(), g.len())));
    }
    let fx = spectral_dx(f)?;
    let gx = spectral_dx(g)?;
    Ok((0..f.len())
        .map(|j| (&(&f[j].deriv() * &gx[j]) - &(&g[j].deriv() * &fx[j])).shift(1))
        .collect())
}

/// `s_n` (`hat = false`) or `ŝ_n`; also labels `H_n`, `Ĥ_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flow {
    pub hat: bool,
    pub n: u32,
}

impl Flow {
    pub fn s(n: u32) -> Flow {
        Flow { hat: false, n }
    }

    pub fn shat(n: u32) -> Flow {
        Flow { hat: true, n }
    }

    pub fn label(&self, prefix: &str) -> String {
        format!("{prefix}{}_{}", if self.hat { "hat" } else { "" }, self.n)
    }
}

impl std::str::FromStr for Flow {
    type Err = Error;

    /// `s3`, `shat2`.
    fn from_str(s: &str) -> Result<Flow> {
        let (hat, rest) = match s.strip_prefix("shat") {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('s').unwrap_or(s)),
        };
        let n = rest
            .trim_start_matches('_')
            .parse::<u32>()
            .map_err(|_| Error::Input(format!("bad flow '{s}'")))?;
        if n == 0 {
            return Err(Error::Input("flow index must be positive".into()));
        }
        Ok(Flow { hat, n })
    }
}

/// `λ^k = a^{k/N}` at infinity.
pub fn lambda_pow(p: &PointNM, k: i64) -> Result<LaurentSeries> {
    p.a.fractional_power(k, p.n as i64, Anchor::Infinity)
}

/// `λ̂^k = â^{k/M}` at zero.
pub fn lambda_hat_pow(p: &PointNM, k: i64) -> Result<LaurentSeries> {
    p.ahat.fractional_power(k, p.m as i64, Anchor::Zero)
}

/// `(λⁿ)_{≥0}` or `−(λ̂ⁿ)_{<0}`.
fn generator(p: &PointNM, flow: Flow) -> Result<LaurentSeries> {
    if flow.hat {
        Ok(-&lambda_hat_pow(p, flow.n as i64)?.lt(0))
    } else {
        Ok(lambda_pow(p, flow.n as i64)?.ge(0))
    }
}

#[derive(Clone, Debug)]
pub struct FlowRhs {
    pub velocity: LoopTangent,
    /// largest coefficient outside the tangent windows before clipping
    pub closure: f64,
}

/// Largest coefficient of `x` above `z^{N−1}` or of `x̂` below `z^{−M}`.
fn window_excess(n: usize, m: usize, x: &LaurentSeries, xhat: &LaurentSeries) -> f64 {
    x.gt(n as i32 - 1).max_abs().max(xhat.lt(-(m as i32)).max_abs())
}

/// Right-hand side of a flow: `∂a = {B, a}`, `∂â = {B, â}`.
pub fn flow_rhs(l: &LoopField, flow: Flow) -> Result<FlowRhs> {
    let b: Vec<LaurentSeries> = l.points.iter().map(|p| generator(p, flow)).collect::<Result<_>>()?;
    let da = lie_bracket(&b, &l.a())?;
    let dah = lie_bracket(&b, &l.ahat())?;
    let mut closure: f64 = 0.0;
    let velocity = da
        .into_iter()
        .zip(dah)
        .map(|(x, xh)| {
            closure = closure.max(window_excess(l.n, l.m, &x, &xh));
            TangentVec::projected(l.n, l.m, x, xh)
        })
        .collect();
    Ok(FlowRhs { velocity, closure })
}

/// `H_n = (N/n)⟨[λⁿ]₀⟩ₓ` or `Ĥ_n = (M/n)⟨[λ̂ⁿ]₀⟩ₓ`, with `⟨·⟩ₓ` the grid mean.
pub fn hamiltonian(l: &LoopField, which: Flow) -> Result<C64> {
    let mut acc = re(0.0);
    for p in &l.points {
        acc += hamiltonian_density(p, which)?;
    }
    Ok(acc / l.grid() as f64)
}

/// The density of [`hamiltonian`] at one point.
pub fn hamiltonian_density(p: &PointNM, which: Flow) -> Result<C64> {
    let k = which.n as i64;
    Ok(if which.hat {
        lambda_hat_pow(p, k)?.coeff(0) * (p.m as f64 / k as f64)
    } else {
        lambda_pow(p, k)?.coeff(0) * (p.n as f64 / k as f64)
    })
}

/// `dH_n = ((λ^{n−N})_{≥−N+1}, 0)` and `dĤ_n = (0, (λ̂^{n−M})_{≤M})`, from
/// `δλ = (1/N)λ^{1−N}δa`. No `x`-derivatives appear in the densities, so the
/// gradient is pointwise.
pub fn variational_gradient(l: &LoopField, which: Flow) -> Result<LoopCovector> {
    l.points.iter().map(|p| point_gradient(p, which)).collect()
}

pub fn point_gradient(p: &PointNM, which: Flow) -> Result<CotangentVec> {
    let k = which.n as i64;
    Ok(if which.hat {
        let w = lambda_hat_pow(p, k - p.m as i64)?;
        CotangentVec::projected(p.n, p.m, LaurentSeries::zero(), w)
    } else {
        let w = lambda_pow(p, k - p.n as i64)?;
        CotangentVec::projected(p.n, p.m, w, LaurentSeries::zero())
    })
}

/// Central-difference derivative of the density in each coefficient of `a`
/// and `â` on `[lo, hi]`, in pairing order: entry `(false, i)` is
/// `∂h/∂v_i`, entry `(true, j)` is `∂h/∂v̂_j`.
pub fn density_gradient_fd(p: &PointNM, which: Flow, lo: i32, hi: i32, h: f64) -> Result<Vec<((bool, i32), C64)>> {
    let mut out = Vec::new();
    for hat in [false, true] {
        let range = if hat { -(p.m as i32)..=hi } else { lo..=(p.n as i32 - 1) };
        for i in range {
            let bump = |s: f64| {
                let mut q = p.clone();
                let e = LaurentSeries::monomial(i, re(s));
                if hat {
                    q.ahat = &q.ahat + &e;
                } else {
                    q.a = &q.a + &e;
                }
                hamiltonian_density(&q, which)
            };
            let d = (bump(h)? - bump(-h)?) / (2.0 * h);
            out.push(((hat, i), d));
        }
    }
    Ok(out)
}

/// `P₁` or `P₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    P1,
    P2,
}

/// The Hamiltonian operators applied to a loop covector.
pub fn poisson_apply(l: &LoopField, omega: &LoopCovector, which: Operator) -> Result<LoopTangent> {
    let g = l.grid();
    if omega.len() != g {
        return Err(Error::Input(format!("grid mismatch: {} vs {g}", omega.len())));
    }
    let (a, ah) = (l.a(), l.ahat());
    let w: Vec<LaurentSeries> = omega.iter().map(|c| c.w.clone()).collect();
    let wh: Vec<LaurentSeries> = omega.iter().map(|c| c.what.clone()).collect();
    let ba = lie_bracket(&w, &a)?;
    let bah = lie_bracket(&wh, &ah)?;
    let inner: Vec<LaurentSeries> = (0..g).map(|j| &ba[j] + &bah[j]).collect();
    // the argument of the outer brackets: ω + ω̂ or aω + âω̂
    let mixed: Vec<LaurentSeries> = match which {
        Operator::P1 => (0..g).map(|j| &w[j] + &wh[j]).collect(),
        Operator::P2 => (0..g).map(|j| &(&a[j] * &w[j]) + &(&ah[j] * &wh[j])).collect(),
    };
    let lower: Vec<LaurentSeries> = mixed.iter().map(|s| s.lt(0)).collect();
    let upper: Vec<LaurentSeries> = mixed.iter().map(|s| s.ge(0)).collect();
    let first = lie_bracket(&lower, &a)?;
    let second = lie_bracket(&upper, &ah)?;
    let tail = match which {
        Operator::P1 => None,
        Operator::P2 => {
            let f: Vec<LaurentSeries> = (0..g)
                .map(|j| {
                    let s = &(&w[j] * &a[j].deriv()) + &(&wh[j] * &ah[j].deriv());
                    LaurentSeries::constant(s.coeff(-1) / l.n as f64)
                })
                .collect();
            Some(spectral_dx(&f)?)
        }
    };
    let mut out = Vec::with_capacity(g);
    for j in 0..g {
        let (mut x, mut xh) = match which {
            Operator::P1 => (
                &inner[j].le(0) - &first[j],
                &second[j] - &inner[j].gt(0),
            ),
            Operator::P2 => (
                &(&a[j] * &inner[j].le(0)) - &first[j],
                &second[j] - &(&ah[j] * &inner[j].gt(0)),
            ),
        };
        if let Some(t) = &tail {
            let fx = t[j].coeff(0);
            x = &x + &a[j].zderiv().scale(fx);
            xh = &xh + &ah[j].zderiv().scale(fx);
        }
        let excess = window_excess(l.n, l.m, &x, &xh);
        let scale = 1.0 + x.max_abs().max(xh.max_abs());
        if excess > 1e-8 * scale {
            return Err(Error::Input(format!(
                "operator output leaves the tangent windows by {excess:e} at grid point {j}"
            )));
        }
        out.push(TangentVec::projected(l.n, l.m, x, xh));
    }
    Ok(out)
}

/// `⟨ω, X⟩ = ⟨[ωX + ω̂X̂]₀⟩ₓ`.
pub fn loop_pair(omega: &LoopCovector, x: &LoopTangent) -> C64 {
    let s: C64 = omega
        .iter()
        .zip(x)
        .map(|(w, t)| dot0(&w.w, &t.x) + dot0(&w.what, &t.xhat))
        .sum();
    s / omega.len() as f64
}

pub fn max_abs_diff(x: &LoopTangent, y: &LoopTangent) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
}

/// `e^u = v̂_{−M}^{1/M}` at each grid point.
pub fn exp_u(l: &LoopField) -> Vec<C64> {
    l.points
        .iter()
        .map(|p| p.vhat_lead().powf(1.0 / p.m as f64))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub time: f64,
    pub values: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// column labels of `values`
    pub labels: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
    pub last: LoopField,
    /// largest window excess of any flow evaluation
    pub closure: f64,
}

impl Trajectory {
    /// Largest `|value(t) − value(0)|` in each column.
    pub fn drift(&self) -> Vec<f64> {
        let first = &self.rows[0].values;
        (0..self.labels.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| (r.values[c] - first[c]).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut head = vec!["step".to_string(), "time".to_string()];
        for l in &self.labels {
            head.push(format!("{l}_re"));
            head.push(format!("{l}_im"));
        }
        out.write_record(&head)?;
        for r in &self.rows {
            let mut rec = vec![r.step.to_string(), format!("{:e}", r.time)];
            for v in &r.values {
                rec.push(format!("{:e}", v.re));
                rec.push(format!("{:e}", v.im));
            }
            out.write_record(&rec)?;
        }
        out.flush()
    }
}

/// Growth beyond this coefficient size counts as blow-up.
const BLOW_UP: f64 = 1e8;

/// One classical RK4 step along `flow`.
pub fn rk4_step(l: &LoopField, flow: Flow, dt: f64) -> Result<(LoopField, f64)> {
    let k1 = flow_rhs(l, flow)?;
    let k2 = flow_rhs(&l.step(&k1.velocity, dt / 2.0), flow)?;
    let k3 = flow_rhs(&l.step(&k2.velocity, dt / 2.0), flow)?;
    let k4 = flow_rhs(&l.step(&k3.velocity, dt), flow)?;
    let combo: LoopTangent = (0..l.grid())
        .map(|j| {
            let s = &(&k1.velocity[j] + &k4.velocity[j])
                + &(&k2.velocity[j] + &k3.velocity[j]).scale(re(2.0));
            s.scale(re(1.0 / 6.0))
        })
        .collect();
    let closure = k1.closure.max(k2.closure).max(k3.closure).max(k4.closure);
    Ok((l.step(&combo, dt), closure))
}

/// Fixed-step RK4 along one flow, recording the listed Hamiltonians every
/// `every` steps (and at the end).
pub fn evolve(
    l0: &LoopField,
    flow: Flow,
    dt: f64,
    steps: usize,
    record: &[Flow],
    every: usize,
    settings: Option<&Settings>,
) -> Result<Trajectory> {
    evolve_observed(l0, flow, dt, steps, record, every, settings, &mut |_, _| {})
}

/// As [`evolve`], handing each recorded loop to `observe` with its step.
#[allow(clippy::too_many_arguments)]
pub fn evolve_observed(
    l0: &LoopField,
    flow: Flow,
    dt: f64,
    steps: usize,
    record: &[Flow],
    every: usize,
    settings: Option<&Settings>,
    observe: &mut dyn FnMut(usize, &LoopField),
) -> Result<Trajectory> {
    let labels = record
        .iter()
        .map(|f| f.label("H"))
        .collect::<Vec<_>>();
    let row = |l: &LoopField, step: usize| -> Result<TrajectoryRow> {
        Ok(TrajectoryRow {
            step,
            time: step as f64 * dt,
            values: record.iter().map(|&f| hamiltonian(l, f)).collect::<Result<_>>()?,
        })
    };
    let mut rows = vec![row(l0, 0)?];
    observe(0, l0);
    let mut l = l0.clone();
    let mut closure: f64 = 0.0;
    let every = every.max(1);
    for step in 1..=steps {
        let (next, c) = rk4_step(&l, flow, dt).map_err(|e| Error::BlowUp {
            step,
            reason: e.to_string(),
        })?;
        closure = closure.max(c);
        let size = next
            .points
            .iter()
            .map(|p| p.a.max_abs().max(p.ahat.max_abs()))
            .fold(0.0, f64::max);
        if !size.is_finite() || size > BLOW_UP {
            return Err(Error::BlowUp {
                step,
                reason: format!("coefficient size {size:e}"),
            });
        }
        if let Some(s) = settings {
            if let Some(&j) = next.invalid_points(s).first() {
                return Err(Error::BlowUp {
                    step,
                    reason: format!("grid point {j} left the valid region"),
                });
            }
        }
        l = next;
        if step % every == 0 || step == steps {
            rows.push(row(&l, step)?);
            observe(step, &l);
        }
    }
    Ok(Trajectory {
        labels,
        rows,
        last: l,
        closure,
    })
}

/// `∂_{s₁}∂_{ŝ₁}u − ∂ₓ²e^u` by a centred mixed difference of the two flows
/// with step `h`, each run with RK4 substeps of size at most `dt`.
pub fn toda_cross_residual(l: &LoopField, h: f64, dt: f64) -> Result<Vec<C64>> {
    let steps = (h / dt).ceil().max(1.0) as usize;
    let run = |l: &LoopField, flow: Flow, s: f64| -> Result<LoopField> {
        let mut cur = l.clone();
        for _ in 0..steps {
            cur = rk4_step(&cur, flow, s / steps as f64)?.0;
        }
        Ok(cur)
    };
    let u = |l: &LoopField| exp_u(l).into_iter().map(|e| e.ln()).collect::<Vec<_>>();
    let mut corners = Vec::new();
    for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let mid = run(l, Flow::shat(1), b * h)?;
        corners.push(u(&run(&mid, Flow::s(1), a * h)?));
    }
    let eu: Vec<LaurentSeries> = exp_u(l).into_iter().map(LaurentSeries::constant).collect();
    let d2 = spectral_dx(&spectral_dx(&eu)?)?;
    Ok((0..l.grid())
        .map(|j| {
            let mixed = (corners[0][j] - corners[1][j] - corners[2][j] + corners[3][j]) / (4.0 * h * h);
            mixed - d2[j].coeff(0)
        })
        .collect())
}

/// `P_ν(ω₀φ) = A φ′ + B φ` for a covector `ω₀` constant in `x`: returns
/// `(A, B)` per grid point, read off with `φ = 1` and `φ = e^{ix}`.
pub fn hydrodynamic_split(l: &LoopField, omega0: &CotangentVec, which: Operator) -> Result<(LoopTangent, LoopTangent)> {
    let g = l.grid();
    let xs = grid_x(g);
    let flat: LoopCovector = vec![omega0.clone(); g];
    let b = poisson_apply(l, &flat, which)?;
    let wave: LoopCovector = xs.iter().map(|&x| omega0.scale(C64::from_polar(1.0, x))).collect();
    let pw = poisson_apply(l, &wave, which)?;
    let a = (0..g)
        .map(|j| {
            let e = C64::from_polar(1.0, xs[j]);
            (&pw[j] - &b[j].scale(e)).scale((C64::new(0.0, 1.0) * e).inv())
        })
        .collect();
    Ok((a, b))
}
