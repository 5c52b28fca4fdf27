//! `frobtoda`: validation, flat charts, verification suites and Toda runs.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 input error, 3 numerical failure.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use frobtoda::flatchart::{flat_coordinates, point_from_flat, FlatCoords, FlatCoordsFile};
use frobtoda::laurent::{re, set_global_k};
use frobtoda::point::{PointFile, PointNM, Settings};
use frobtoda::report::Report;
use frobtoda::suites::{run_suite, Suite, SuiteConfig};
use frobtoda::toda::{evolve_observed, exp_u, grid_x, toda_cross_residual, Flow, LoopField, LoopFile};
use frobtoda::Error;

#[derive(Parser)]
#[command(name = "frobtoda", version, about = "Frobenius manifolds of the dispersionless Toda hierarchy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// expected N of the input; a mismatch is an input error
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    #[arg(long = "M", global = true)]
    m: Option<usize>,
    /// coefficient window half-width
    #[arg(long = "K", global = true)]
    k: Option<i32>,
    #[arg(long, global = true)]
    tmax: Option<i32>,
    /// circle samples for validation and contour integrals
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// loop grid size when a constant loop is built from --point
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output file; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "tol.metric", global = true)]
    tol_metric: Option<f64>,
    #[arg(long = "tol.algebra", global = true)]
    tol_algebra: Option<f64>,
    #[arg(long = "tol.wdvv", global = true)]
    tol_wdvv: Option<f64>,
    #[arg(long = "tol.euler", global = true)]
    tol_euler: Option<f64>,
    #[arg(long = "tol.pencil", global = true)]
    tol_pencil: Option<f64>,
    #[arg(long = "tol.reduction", global = true)]
    tol_reduction: Option<f64>,
    #[arg(long = "tol.potential", global = true)]
    tol_potential: Option<f64>,
    #[arg(long = "tol.toda", global = true)]
    tol_toda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the admissibility conditions of a point
    Validate {
        #[arg(long)]
        point: PathBuf,
    },
    /// Run one verification suite, or all of them
    Verify {
        #[arg(long)]
        point: PathBuf,
        /// metric, algebra, wdvv, euler, pencil, reduction, potential or all
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Flat coordinates of a point
    Flatcoords {
        #[arg(long)]
        point: PathBuf,
    },
    /// Point from flat coordinates; with --point, a round trip
    Reconstruct {
        #[arg(long, conflicts_with = "point", required_unless_present = "point")]
        coords: Option<PathBuf>,
        #[arg(long)]
        point: Option<PathBuf>,
    },
    /// Integrate a Toda flow along a loop
    Evolve {
        #[arg(long = "loop", conflicts_with = "point", required_unless_present = "point")]
        loop_file: Option<PathBuf>,
        /// build an x-independent loop from this point
        #[arg(long)]
        point: Option<PathBuf>,
        /// s<n> or shat<n>
        #[arg(long, default_value = "s1")]
        flow: String,
        /// Hamiltonians to record, comma separated
        #[arg(long, default_value = "s1,s2,shat1")]
        record: String,
        /// record every this many steps
        #[arg(long, default_value_t = 10)]
        every: usize,
        /// (x, t, u) triples for plotting
        #[arg(long)]
        plot: Option<PathBuf>,
        /// report the 2D Toda cross-derivative residual instead
        #[arg(long)]
        cross: bool,
        /// mixed-difference step of --cross
        #[arg(long, default_value_t = 1e-2)]
        h: f64,
    },
}

/// Everything a run reads, from file and flags.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "K")]
    k: i32,
    t_max: i32,
    n_samples: usize,
    floor: f64,
    grid_size: usize,
    dt: f64,
    steps: usize,
    /// drift allowed per unit time along a flow
    drift_tol: f64,
    cross_tol: f64,
    round_trip_tol: f64,
    suite: SuiteConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = Settings::default();
        RunConfig {
            n: None,
            m: None,
            k: frobtoda::laurent::global_k(),
            t_max: s.t_max,
            n_samples: s.n_samples,
            floor: s.floor,
            grid_size: 64,
            dt: 1e-3,
            steps: 1000,
            drift_tol: 1e-8,
            cross_tol: 1e-5,
            round_trip_tol: 1e-9,
            suite: SuiteConfig::default(),
        }
    }
}

impl RunConfig {
    fn load(c: &Common) -> Result<RunConfig, Failure> {
        let mut rc: RunConfig = match &c.config {
            Some(path) => read_json(path)?,
            None => RunConfig::default(),
        };
        rc.n = c.n.or(rc.n);
        rc.m = c.m.or(rc.m);
        if let Some(k) = c.k {
            rc.k = k;
        }
        if let Some(t) = c.tmax {
            rc.t_max = t;
        }
        if let Some(s) = c.samples {
            rc.n_samples = s;
        }
        if let Some(g) = c.grid {
            rc.grid_size = g;
        }
        if let Some(dt) = c.dt {
            rc.dt = dt;
        }
        if let Some(s) = c.steps {
            rc.steps = s;
        }
        if let Some(s) = c.seed {
            rc.suite.seed = s;
        }
        for (suite, tol) in [
            (Suite::Metric, c.tol_metric),
            (Suite::Algebra, c.tol_algebra),
            (Suite::Wdvv, c.tol_wdvv),
            (Suite::Euler, c.tol_euler),
            (Suite::Pencil, c.tol_pencil),
            (Suite::Reduction, c.tol_reduction),
            (Suite::Potential, c.tol_potential),
        ] {
            if let Some(t) = tol {
                rc.suite.tol.set(suite, t)?;
            }
        }
        if let Some(t) = c.tol_toda {
            rc.cross_tol = t;
        }
        let positive = rc.k > 0
            && rc.t_max > 0
            && rc.n_samples > 0
            && rc.grid_size > 0
            && rc.dt > 0.0
            && rc.floor > 0.0
            && rc.drift_tol > 0.0
            && rc.cross_tol > 0.0;
        if !positive {
            return Err(Failure::input("configuration values must be positive"));
        }
        set_global_k(rc.k);
        rc.suite.settings = rc.settings();
        Ok(rc)
    }

    fn settings(&self) -> Settings {
        Settings {
            n_samples: self.n_samples,
            floor: self.floor,
            t_max: self.t_max,
        }
    }

    fn check_shape(&self, n: usize, m: usize) -> Result<(), Failure> {
        if self.n.is_some_and(|x| x != n) || self.m.is_some_and(|x| x != m) {
            return Err(Failure::input(format!(
                "input has (N, M) = ({n}, {m}) but ({:?}, {:?}) was requested",
                self.n, self.m
            )));
        }
        Ok(())
    }
}

/// A reason to stop, carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }

    fn verification(message: impl Into<String>) -> Failure {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Failure {
        Failure::input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Failure {
        Failure::input(e.to_string())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::input(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn read_point(path: &Path, rc: &RunConfig) -> Result<PointNM, Failure> {
    let f: PointFile = read_json(path)?;
    let p = PointNM::from_file(&f)?;
    rc.check_shape(p.n, p.m)?;
    Ok(p)
}

/// Stops with exit code 1 unless the point passes validation.
fn require_valid(p: &PointNM, rc: &RunConfig) -> Result<(), Failure> {
    let v = p.validate(&rc.settings());
    if v.passed() {
        Ok(())
    } else {
        Err(Failure::verification(format!("invalid point: {}", v.reasons.join("; "))))
    }
}

fn cmd_validate(point: &Path, rc: &RunConfig, out: &Option<PathBuf>) -> Result<(), Failure> {
    let p = read_point(point, rc)?;
    let s = rc.settings();
    let v = p.validate(&s);
    let mut r = Report::new();
    r.verdict("M1", "vhat_lead_modulus", v.vhat_lead_modulus, v.m1);
    r.verdict("M2", "wronskian_min_modulus", v.min_wronskian, v.min_wronskian > s.floor);
    r.verdict("M2", "zeta_prime_min_modulus", v.min_zeta_prime, v.min_zeta_prime > s.floor);
    r.verdict("M2", "ell_prime_min_modulus", v.min_ell_prime, v.min_ell_prime > s.floor);
    r.verdict("M3", "zeta_winding", v.winding.unwrap_or(f64::NAN), v.m3);
    r.write_csv(output(out)?)?;
    for reason in &v.reasons {
        eprintln!("{reason}");
    }
    if v.passed() {
        Ok(())
    } else {
        Err(Failure::verification("validation failed"))
    }
}

fn cmd_verify(point: &Path, suite: &str, rc: &RunConfig, out: &Option<PathBuf>) -> Result<(), Failure> {
    let p = read_point(point, rc)?;
    require_valid(&p, rc)?;
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        suite.split(',').map(|s| s.trim().parse()).collect::<Result<_, Error>>()?
    };
    // one worker per suite; reports are joined in the requested order
    let results: Vec<frobtoda::Result<Report>> = std::thread::scope(|scope| {
        let handles: Vec<_> = suites
            .iter()
            .map(|&s| {
                let p = &p;
                let cfg = &rc.suite;
                scope.spawn(move || run_suite(p, s, cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite worker panicked")).collect()
    });
    let mut all = Report::new();
    for (s, r) in suites.iter().zip(results) {
        let r = r?;
        for (name, count, worst, ok) in r.summary() {
            eprintln!("{s:<10} {name:<28} n={count:<5} worst={worst:.3e} {}", if ok { "pass" } else { "FAIL" });
        }
        all.extend(r);
    }
    all.write_csv(output(out)?)?;
    if all.passed() {
        Ok(())
    } else {
        Err(Failure::verification(format!("{} checks failed", all.failures().count())))
    }
}

fn cmd_flatcoords(point: &Path, rc: &RunConfig, out: &Option<PathBuf>) -> Result<(), Failure> {
    let p = read_point(point, rc)?;
    require_valid(&p, rc)?;
    let fc = flat_coordinates(&p, rc.t_max, &rc.settings())?;
    write_json(out, &fc.to_file())
}

fn point_diff(a: &PointNM, b: &PointNM) -> f64 {
    (&a.a - &b.a).max_abs().max((&a.ahat - &b.ahat).max_abs())
}

fn cmd_reconstruct(coords: Option<&Path>, point: Option<&Path>, rc: &RunConfig, out: &Option<PathBuf>) -> Result<(), Failure> {
    let s = rc.settings();
    if let Some(path) = coords {
        let f: FlatCoordsFile = read_json(path)?;
        let fc = FlatCoords::from_file(&f)?;
        rc.check_shape(f.n, f.m)?;
        let p = point_from_flat(&fc, &s)?;
        return write_json(out, &p.to_file());
    }
    let path = point.ok_or_else(|| Failure::input("--coords or --point is required"))?;
    let p = read_point(path, rc)?;
    require_valid(&p, rc)?;
    let fc = flat_coordinates(&p, rc.t_max, &s)?;
    let back = point_from_flat(&fc, &s)?;
    let err = point_diff(&p, &back);
    let mut r = Report::new();
    r.residual("chart_round_trip", format!("T_max={}", rc.t_max), err, rc.round_trip_tol);
    r.write_csv(output(out)?)?;
    eprintln!("max coefficient error {err:.3e}");
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::verification("round trip exceeds tolerance"))
    }
}

struct EvolveArgs<'a> {
    loop_file: Option<&'a Path>,
    point: Option<&'a Path>,
    flow: &'a str,
    record: &'a str,
    every: usize,
    plot: Option<&'a Path>,
    cross: bool,
    h: f64,
}

fn cmd_evolve(a: EvolveArgs, rc: &RunConfig, out: &Option<PathBuf>) -> Result<(), Failure> {
    let s = rc.settings();
    let l = match (a.loop_file, a.point) {
        (Some(path), _) => LoopField::from_file(&read_json::<LoopFile>(path)?)?,
        (None, Some(path)) => LoopField::new(vec![read_point(path, rc)?; rc.grid_size])?,
        (None, None) => return Err(Failure::input("--loop or --point is required")),
    };
    rc.check_shape(l.n, l.m)?;
    if let Some(&j) = l.invalid_points(&s).first() {
        return Err(Failure::verification(format!("grid point {j} fails validation")));
    }
    if a.cross {
        let res = toda_cross_residual(&l, a.h, rc.dt)?;
        let mut r = Report::new();
        for (x, v) in grid_x(l.grid()).into_iter().zip(&res) {
            r.compare("toda_cross_residual", format!("x={x:.6}"), *v, re(0.0), rc.cross_tol);
        }
        r.write_csv(output(out)?)?;
        let worst = res.iter().map(|v| v.norm()).fold(0.0, f64::max);
        eprintln!("max 2D Toda residual {worst:.3e}");
        return if r.passed() { Ok(()) } else { Err(Failure::verification("2D Toda residual exceeds tolerance")) };
    }
    let flow: Flow = a.flow.parse()?;
    let record = a.record.split(',').map(|f| f.trim().parse()).collect::<Result<Vec<Flow>, Error>>()?;
    let xs = grid_x(l.grid());
    let mut plot_rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut observe = |step: usize, cur: &LoopField| {
        if a.plot.is_some() {
            let t = step as f64 * rc.dt;
            for (x, e) in xs.iter().zip(exp_u(cur)) {
                let u = e.ln();
                plot_rows.push((*x, t, u.re, u.im));
            }
        }
    };
    let run = evolve_observed(&l, flow, rc.dt, rc.steps, &record, a.every, Some(&s), &mut observe);
    let traj = match run {
        Ok(t) => t,
        Err(Error::BlowUp { step, reason }) => {
            return Err(Failure {
                code: 3,
                message: format!("blow-up: last valid step {}: {reason}", step - 1),
            })
        }
        Err(e) => return Err(e.into()),
    };
    traj.write_csv(output(out)?)?;
    if let Some(path) = a.plot {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "t", "u_re", "u_im"])?;
        for (x, t, ur, ui) in plot_rows {
            w.write_record([x, t, ur, ui].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
    }
    let horizon = (rc.steps as f64 * rc.dt).max(1.0);
    let mut ok = true;
    for (label, d) in traj.labels.iter().zip(traj.drift()) {
        let pass = d <= rc.drift_tol * horizon;
        ok &= pass;
        eprintln!("{label:<8} drift {d:.3e} {}", if pass { "pass" } else { "FAIL" });
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::verification("conserved quantities drifted"))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let rc = RunConfig::load(&cli.common)?;
    let out = &cli.common.out;
    match &cli.command {
        Command::Validate { point } => cmd_validate(point, &rc, out),
        Command::Verify { point, suite } => cmd_verify(point, suite, &rc, out),
        Command::Flatcoords { point } => cmd_flatcoords(point, &rc, out),
        Command::Reconstruct { coords, point } => cmd_reconstruct(coords.as_deref(), point.as_deref(), &rc, out),
        Command::Evolve {
            loop_file,
            point,
            flow,
            record,
            every,
            plot,
            cross,
            h,
        } => cmd_evolve(
            EvolveArgs {
                loop_file: loop_file.as_deref(),
                point: point.as_deref(),
                flow,
                record,
                every: *every,
                plot: plot.as_deref(),
                cross: *cross,
                h: *h,
            },
            &rc,
            out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
