//! Path simulation through the decomposition `X_t = (β(A(t)), Y_t)`.
//!
//! `Y_t = x_n exp(B_t − μt)` is sampled exactly on a grid of step `dt`,
//! `A(t) = ∫₀ᵗ Y_s² ds` by the trapezoid rule, and the `(n−1)`-dimensional
//! Brownian motion `β` by Gaussian increments of variance `ΔA`. Crossings
//! of a barrier between grid points are accounted for with the Brownian
//! bridge crossing probability `exp(−2 d₀ d₁ / ΔA)`.
//!
//! Once `Y` falls below `y_floor · x_n` the rest of the clock is
//! `A_∞ − A(t) = Y_t²/(2G)` with `G ~ Gamma(μ, 1)`, and the exit question is
//! settled exactly from the joint law of the endpoint and minimum of `β₁`
//! over that clock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainPoint, HyperPoint, ModelParams, Wall};
use crate::quad::CompensatedSum;

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub n_paths: usize,
    /// Tail closure starts when `Y < y_floor · x_n`.
    #[serde(default = "default_y_floor")]
    pub y_floor: f64,
}

fn default_y_floor() -> f64 {
    1e-4
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            dt: 1e-3,
            t_max: 200.0,
            seed: 20_240_601,
            n_paths: 100_000,
            y_floor: default_y_floor(),
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ConfigInvalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt) || !self.t_max.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "t_max {} must be finite and at least dt {}",
                self.t_max, self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::ConfigInvalid("n_paths must be at least 1".into()));
        }
        if !(self.y_floor > 0.0 && self.y_floor < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "y_floor must lie in (0, 1), got {}",
                self.y_floor
            )));
        }
        Ok(())
    }

    /// The same configuration with the step doubled.
    pub fn coarser(&self) -> Self {
        PathConfig {
            dt: 2.0 * self.dt,
            t_max: self.t_max.max(2.0 * self.dt),
            ..*self
        }
    }

    fn rng(&self, path: u64, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(path);
        rng
    }
}

/// Monte Carlo statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl Estimate {
    /// Mean and `sd/√n` of `samples`, summed in order.
    pub fn from_samples(samples: &[f64], seed: u64) -> Estimate {
        let n = samples.len();
        if n == 0 {
            return Estimate {
                value: f64::NAN,
                stderr: f64::NAN,
                n,
                seed,
            };
        }
        let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        let var = if n > 1 {
            samples
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .collect::<CompensatedSum>()
                .value()
                / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            value: mean,
            stderr: (var / n as f64).sqrt(),
            n,
            seed,
        }
    }

    fn proportion(hits: usize, n: usize, seed: u64) -> Estimate {
        let p = hits as f64 / n as f64;
        let var = if n > 1 {
            p * (1.0 - p) * n as f64 / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            value: p,
            stderr: (var / n as f64).sqrt(),
            n,
            seed,
        }
    }
}

/// Where a path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitWall {
    Wall1,
    Wall2,
    Censored,
}

impl From<Wall> for ExitWall {
    fn from(w: Wall) -> Self {
        match w {
            Wall::Wall1 => ExitWall::Wall1,
            Wall::Wall2 => ExitWall::Wall2,
        }
    }
}

/// Internal clocks at the end of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    /// Real time. Infinite for `∂₂D`, where `τ_D = ∞`.
    pub t: f64,
    /// `A(t)`.
    pub a: f64,
}

/// Outcome of one path started in `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub exited: bool,
    pub wall: ExitWall,
    /// Exit position; the current position for censored paths.
    pub location: Vec<f64>,
    pub clock: Clock,
    /// Whether the exit was decided by the closed-form tail, in which
    /// case a `∂₁D` location carries the height at which the tail began.
    pub tail: bool,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `P(min of a Brownian bridge from d0 > 0 to d1 > 0 over variance v ≤ 0)`.
fn bridge_crossing(d0: f64, d1: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    (-2.0 * d0 * d1 / v).exp()
}

fn check_start(params: &ModelParams, x: &[f64]) -> Result<()> {
    params.check_dim(x)?;
    if params.n() < 2 {
        return Err(Error::Domain("simulation needs n >= 2".into()));
    }
    Ok(())
}

fn exit_path<R: Rng>(params: &ModelParams, x: &[f64], cfg: &PathConfig, rng: &mut R) -> ExitRecord {
    let n = params.n();
    let mu = params.mu();
    let x_n = x[n - 1];
    let floor = cfg.y_floor * x_n;
    let (dt, sdt) = (cfg.dt, cfg.dt.sqrt());
    let mut y = x_n;
    let mut beta: Vec<f64> = x[..n - 1].to_vec();
    let mut prev = beta.clone();
    let (mut t, mut a) = (0.0, 0.0);
    let steps = (cfg.t_max / dt).ceil() as u64;
    for _ in 0..steps {
        if y < floor {
            return tail_closure(params, &beta, y, t, a, rng);
        }
        let y_new = y * (sdt * normal(rng) - mu * dt).exp();
        let da = 0.5 * dt * (y * y + y_new * y_new);
        let s = da.sqrt();
        prev.copy_from_slice(&beta);
        for b in beta.iter_mut() {
            *b += s * normal(rng);
        }
        let (b0, b1) = (prev[0], beta[0]);
        let crossing = if b1 <= 0.0 {
            Some(b0 / (b0 - b1))
        } else {
            let e = -2.0 * b0 * b1 / da;
            if e > -40.0 && rng.random::<f64>() < e.exp() {
                Some(b0 / (b0 + b1))
            } else {
                None
            }
        };
        if let Some(f) = crossing {
            let mut location = Vec::with_capacity(n);
            location.push(0.0);
            for k in 1..n - 1 {
                location.push(prev[k] + f * (beta[k] - prev[k]));
            }
            location.push(y * (y_new / y).powf(f));
            return ExitRecord {
                exited: true,
                wall: ExitWall::Wall1,
                location,
                clock: Clock {
                    t: t + f * dt,
                    a: a + f * da,
                },
                tail: false,
            };
        }
        y = y_new;
        a += da;
        t += dt;
    }
    let mut location = beta;
    location.push(y);
    ExitRecord {
        exited: false,
        wall: ExitWall::Censored,
        location,
        clock: Clock { t, a },
        tail: false,
    }
}

fn tail_closure<R: Rng>(params: &ModelParams, beta: &[f64], y: f64, t: f64, a: f64, rng: &mut R) -> ExitRecord {
    let g = Gamma::new(params.mu(), 1.0).expect("μ > 0").sample(rng);
    let rest = y * y / (2.0 * g);
    let s = rest.sqrt();
    let end: Vec<f64> = beta.iter().map(|b| b + s * normal(rng)).collect();
    let (b0, b1) = (beta[0], end[0]);
    let crossed = b1 <= 0.0 || rng.random::<f64>() < bridge_crossing(b0, b1, rest);
    if crossed {
        let mut location = beta.to_vec();
        location[0] = 0.0;
        location.push(y);
        ExitRecord {
            exited: true,
            wall: ExitWall::Wall1,
            location,
            clock: Clock { t, a },
            tail: true,
        }
    } else {
        let mut location = end;
        location.push(0.0);
        ExitRecord {
            exited: true,
            wall: ExitWall::Wall2,
            location,
            clock: Clock {
                t: f64::INFINITY,
                a: a + rest,
            },
            tail: true,
        }
    }
}

/// Simulates one path from `x` until it leaves `D` (stream 0 of
/// `cfg.seed`).
pub fn sample_path(params: &ModelParams, x: &DomainPoint, cfg: &PathConfig) -> Result<ExitRecord> {
    cfg.validate()?;
    check_start(params, x.coords())?;
    Ok(exit_path(params, x.coords(), cfg, &mut cfg.rng(0, 0)))
}

/// Simulates `cfg.n_paths` paths in parallel; path `i` uses stream `i`.
pub fn sample_paths(params: &ModelParams, x: &DomainPoint, cfg: &PathConfig) -> Result<Vec<ExitRecord>> {
    cfg.validate()?;
    check_start(params, x.coords())?;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| exit_path(params, x.coords(), cfg, &mut cfg.rng(i, 0)))
        .collect())
}

/// `x₁²/Z²` with `Z` standard normal: the first time a Brownian motion
/// started at `x₁` hits 0.
pub fn sample_tau1<R: Rng + ?Sized>(x1: f64, rng: &mut R) -> Result<f64> {
    if !(x1 > 0.0 && x1.is_finite()) {
        return Err(Error::Domain(format!("x1 must be positive, got {x1}")));
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z != 0.0 {
            return Ok(x1 * x1 / (z * z));
        }
    }
}

/// `x_n²/(2G)` with `G ~ Gamma(μ, 1)`: the total clock `A_∞` of
/// `x_n exp(B_t − μt)`.
pub fn sample_a_infinity<R: Rng + ?Sized>(params: &ModelParams, x_n: f64, rng: &mut R) -> Result<f64> {
    if !(x_n > 0.0 && x_n.is_finite()) {
        return Err(Error::Domain(format!("x_n must be positive, got {x_n}")));
    }
    let g = Gamma::new(params.mu(), 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(x_n * x_n / (2.0 * g.sample(rng)))
}

/// Counts of path outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitCounts {
    pub wall1: usize,
    pub wall2: usize,
    pub censored: usize,
}

impl ExitCounts {
    pub fn of(records: &[ExitRecord]) -> ExitCounts {
        let mut c = ExitCounts {
            wall1: 0,
            wall2: 0,
            censored: 0,
        };
        for r in records {
            match r.wall {
                ExitWall::Wall1 => c.wall1 += 1,
                ExitWall::Wall2 => c.wall2 += 1,
                ExitWall::Censored => c.censored += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.wall1 + self.wall2 + self.censored
    }
}

/// Fraction of uncensored paths that leave through `∂₁D`.
pub fn exit_probability_from(records: &[ExitRecord], seed: u64) -> Estimate {
    let c = ExitCounts::of(records);
    Estimate::proportion(c.wall1, c.wall1 + c.wall2, seed)
}

/// Estimate of `P_x(τ_D < ∞)`, the probability of leaving through `∂₁D`.
pub fn estimate_exit_probability(params: &ModelParams, x: &DomainPoint, cfg: &PathConfig) -> Result<Estimate> {
    let records = sample_paths(params, x, cfg)?;
    Ok(exit_probability_from(&records, cfg.seed))
}

/// Bins along one coordinate of a wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub wall: Wall,
    /// Coordinate index the bins refer to (`n−1` for heights on `∂₁D`).
    pub axis: usize,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / self.bins as f64)
            .collect()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.bins == 0 || !(self.hi > self.lo) || self.axis >= n {
            return Err(Error::ConfigInvalid(format!("bad binning {self:?}")));
        }
        Ok(())
    }

    fn index(&self, v: f64) -> Option<usize> {
        if v < self.lo || v >= self.hi {
            return None;
        }
        Some((((v - self.lo) / (self.hi - self.lo)) * self.bins as f64).floor() as usize).map(|k| k.min(self.bins - 1))
    }
}

/// Probability mass of exits into each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub binning: Binning,
    pub edges: Vec<f64>,
    pub mass: Vec<Estimate>,
    /// Indices of bins that received no path.
    pub empty_bins: Vec<usize>,
    /// Exits through the wall that fell outside the window.
    pub outside: usize,
    pub uncensored: usize,
}

impl Histogram {
    /// Estimated density (mass over bin width).
    pub fn density(&self) -> Vec<f64> {
        self.mass
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m.value / (e[1] - e[0]))
            .collect()
    }
}

/// Histogram of exit locations built from existing records.
pub fn histogram_from(records: &[ExitRecord], binning: &Binning, seed: u64) -> Histogram {
    let target: ExitWall = binning.wall.into();
    let mut counts = vec![0usize; binning.bins];
    let mut outside = 0;
    let mut uncensored = 0;
    for r in records {
        if r.wall == ExitWall::Censored {
            continue;
        }
        uncensored += 1;
        if r.wall != target {
            continue;
        }
        match binning.index(r.location[binning.axis]) {
            Some(k) => counts[k] += 1,
            None => outside += 1,
        }
    }
    Histogram {
        binning: binning.clone(),
        edges: binning.edges(),
        mass: counts
            .iter()
            .map(|&c| Estimate::proportion(c, uncensored, seed))
            .collect(),
        empty_bins: counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(k, _)| k)
            .collect(),
        outside,
        uncensored,
    }
}

/// Binned law of the exit position on one wall.
pub fn estimate_hitting_histogram(
    params: &ModelParams,
    x: &DomainPoint,
    cfg: &PathConfig,
    binning: &Binning,
) -> Result<Histogram> {
    binning.validate(params.n())?;
    let records = sample_paths(params, x, cfg)?;
    Ok(histogram_from(&records, binning, cfg.seed))
}

/// Killed positions at time `t`: `Some(X_t)` on `{t < τ_D}`.
pub fn sample_killed_positions(
    params: &ModelParams,
    x: &DomainPoint,
    t: f64,
    cfg: &PathConfig,
) -> Result<Vec<Option<Vec<f64>>>> {
    cfg.validate()?;
    check_start(params, x.coords())?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let steps = (t / cfg.dt).round().max(1.0) as u64;
    let dt = t / steps as f64;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i, 3);
            let n = params.n();
            let mu = params.mu();
            let mut y = x.last();
            let mut beta = x.coords()[..n - 1].to_vec();
            for _ in 0..steps {
                let y_new = y * (dt.sqrt() * normal(&mut rng) - mu * dt).exp();
                let da = 0.5 * dt * (y * y + y_new * y_new);
                let b0 = beta[0];
                for b in beta.iter_mut() {
                    *b += da.sqrt() * normal(&mut rng);
                }
                let b1 = beta[0];
                if b1 <= 0.0 || rng.random::<f64>() < bridge_crossing(b0, b1, da) {
                    return None;
                }
                y = y_new;
            }
            beta.push(y);
            Some(beta)
        })
        .collect())
}

/// Axis-aligned cell `Π [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v < *h)
    }
}

/// `P_x(X_t ∈ cell, t < τ_D)` for each cell, from one set of paths.
pub fn estimate_occupation(
    params: &ModelParams,
    x: &DomainPoint,
    t: f64,
    cells: &[Cell],
    cfg: &PathConfig,
) -> Result<Vec<Estimate>> {
    let pos = sample_killed_positions(params, x, t, cfg)?;
    Ok(cells
        .iter()
        .map(|c| {
            let hits = pos.iter().flatten().filter(|p| c.contains(p)).count();
            Estimate::proportion(hits, pos.len(), cfg.seed)
        })
        .collect())
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d: f64, (k, &v)| {
        let f = cdf(v);
        d.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs())
    })
}

/// Asymptotic critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// First coordinates at the grid times of free paths and of the paths
/// reflected after their first grid crossing of `x₁ = 0`.
///
/// The reflection uses the grid value at the crossing as pivot,
/// `Z₁ = 2β₁(τ) − β₁`, which keeps the discrete walk exactly symmetric;
/// the overshoot `β₁(τ) ≤ 0` vanishes as `dt → 0`.
fn free_and_reflected<R: Rng>(
    params: &ModelParams,
    x: &[f64],
    dt: f64,
    grid: &[usize],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let n = params.n();
    let mu = params.mu();
    let mut y = x[n - 1];
    let mut beta = x[..n - 1].to_vec();
    let mut pivot: Option<f64> = None;
    let last = *grid.iter().max().unwrap_or(&0);
    let (mut xs, mut zs) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    let record = |k: usize, b1: f64, pivot: Option<f64>, xs: &mut Vec<f64>, zs: &mut Vec<f64>| {
        for &g in grid {
            if g == k {
                xs.push(b1);
                zs.push(pivot.map_or(b1, |p| 2.0 * p - b1));
            }
        }
    };
    record(0, beta[0], pivot, &mut xs, &mut zs);
    for k in 1..=last {
        let y_new = y * (dt.sqrt() * normal(rng) - mu * dt).exp();
        let da = 0.5 * dt * (y * y + y_new * y_new);
        for b in beta.iter_mut() {
            *b += da.sqrt() * normal(rng);
        }
        y = y_new;
        if pivot.is_none() && beta[0] <= 0.0 {
            pivot = Some(beta[0]);
        }
        record(k, beta[0], pivot, &mut xs, &mut zs);
    }
    (xs, zs)
}

/// Outcome of the reflection check at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionPoint {
    pub t: f64,
    pub ks_statistic: f64,
    pub critical: f64,
    /// Mean of `sign(X₁)` and `sign(Z₁)`.
    pub sign_x: Estimate,
    pub sign_z: Estimate,
    pub pass: bool,
}

/// Reflection-principle report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    /// Family-wise level; each test runs at `alpha / tests`.
    pub alpha: f64,
    pub points: Vec<ReflectionPoint>,
    pub pass: bool,
}

/// Compares the laws of `X_t` and of the path reflected after `τ_D` at the
/// times in `t_grid`, using two independent sets of `cfg.n_paths` paths and
/// a two-sample test on the first coordinate with Bonferroni correction.
pub fn reflection_check(
    params: &ModelParams,
    x: &DomainPoint,
    t_grid: &[f64],
    cfg: &PathConfig,
) -> Result<ReflectionReport> {
    cfg.validate()?;
    check_start(params, x.coords())?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::ConfigInvalid("t_grid must hold non-negative times".into()));
    }
    let grid: Vec<usize> = t_grid.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    let run = |salt: u64| -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| free_and_reflected(params, x.coords(), cfg.dt, &grid, &mut cfg.rng(i, salt)))
            .collect()
    };
    let plain = run(1);
    let mirrored = run(2);
    let alpha = 0.01;
    let level = alpha / t_grid.len() as f64;
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let points: Vec<ReflectionPoint> = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let xs: Vec<f64> = plain.iter().map(|(a, _)| a[k]).collect();
            let zs: Vec<f64> = mirrored.iter().map(|(_, b)| b[k]).collect();
            let d = ks_two_sample(&xs, &zs);
            let critical = ks_critical(level, xs.len(), zs.len());
            let sx = Estimate::from_samples(&xs.iter().map(|&v| sign(v)).collect::<Vec<_>>(), cfg.seed);
            let sz = Estimate::from_samples(&zs.iter().map(|&v| sign(v)).collect::<Vec<_>>(), cfg.seed);
            let sign_ok = (sx.value - sz.value).abs() <= 3.0 * sx.stderr.hypot(sz.stderr) + 1e-12;
            ReflectionPoint {
                t,
                ks_statistic: d,
                critical,
                sign_x: sx,
                sign_z: sz,
                pass: d <= critical && sign_ok,
            }
        })
        .collect();
    Ok(ReflectionReport {
        alpha,
        pass: points.iter().all(|p| p.pass),
        points,
    })
}

/// Axis-aligned box `U = Π [lo_k, hi_k]` with `lo_n > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() < 2 {
            return Err(Error::ConfigInvalid("box bounds must have equal length >= 2".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) || !(lo[lo.len() - 1] > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "box {lo:?} x {hi:?} is empty or touches x_n = 0"
            )));
        }
        Ok(BoxDomain { lo, hi })
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v > *l && *v < *h)
    }
}

/// A face of a box: coordinate `axis` at its upper or lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

/// Exit of a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxExit {
    pub face: Face,
    pub tau: f64,
    pub location: Vec<f64>,
}

fn box_exit<R: Rng>(mu: f64, x: &[f64], u: &BoxDomain, dt: f64, t_max: f64, rng: &mut R) -> Option<BoxExit> {
    let n = x.len();
    let mut log_y = x[n - 1].ln();
    let (log_lo, log_hi) = (u.lo[n - 1].ln(), u.hi[n - 1].ln());
    let mut beta = x[..n - 1].to_vec();
    let mut prev = beta.clone();
    let mut t = 0.0;
    let sdt = dt.sqrt();
    let mut crossing_p = Vec::with_capacity(2 * n);
    while t < t_max {
        let ly_new = log_y + sdt * normal(rng) - mu * dt;
        let (y0, y1) = (log_y.exp(), ly_new.exp());
        let da = 0.5 * dt * (y0 * y0 + y1 * y1);
        prev.copy_from_slice(&beta);
        for b in beta.iter_mut() {
            *b += da.sqrt() * normal(rng);
        }
        // Coordinate values, bounds and step variances in the variables in
        // which each one is a Brownian motion.
        let coord = |k: usize, new: bool| -> (f64, f64, f64, f64) {
            if k == n - 1 {
                (if new { ly_new } else { log_y }, log_lo, log_hi, dt)
            } else {
                (if new { beta[k] } else { prev[k] }, u.lo[k], u.hi[k], da)
            }
        };
        let mut first: Option<(f64, Face)> = None;
        for k in 0..n {
            let (v0, lo, hi, _) = coord(k, false);
            let (v1, _, _, _) = coord(k, true);
            for (bound, upper) in [(lo, false), (hi, true)] {
                let out = if upper { v1 >= bound } else { v1 <= bound };
                if out {
                    let f = (bound - v0) / (v1 - v0);
                    if first.map_or(true, |(g, _)| f < g) {
                        first = Some((f, Face { axis: k, upper }));
                    }
                }
            }
        }
        if first.is_none() {
            crossing_p.clear();
            for k in 0..n {
                let (v0, lo, hi, var) = coord(k, false);
                let (v1, _, _, _) = coord(k, true);
                crossing_p.push((bridge_crossing(v0 - lo, v1 - lo, var), Face { axis: k, upper: false }));
                crossing_p.push((bridge_crossing(hi - v0, hi - v1, var), Face { axis: k, upper: true }));
            }
            let survive: f64 = crossing_p.iter().map(|(p, _)| 1.0 - p).product();
            let total = 1.0 - survive;
            if total > 1e-300 {
                let mut u01 = rng.random::<f64>();
                if u01 < total {
                    let weights: f64 = crossing_p.iter().map(|(p, _)| p).sum();
                    u01 *= weights / total;
                    let mut chosen = crossing_p[crossing_p.len() - 1].1;
                    for (p, face) in &crossing_p {
                        if u01 < *p {
                            chosen = *face;
                            break;
                        }
                        u01 -= p;
                    }
                    first = Some((0.5, chosen));
                }
            }
        }
        if let Some((f, face)) = first {
            let mut location: Vec<f64> = (0..n - 1).map(|k| prev[k] + f * (beta[k] - prev[k])).collect();
            location.push((log_y + f * (ly_new - log_y)).exp());
            location[face.axis] = if face.upper { u.hi[face.axis] } else { u.lo[face.axis] };
            return Some(BoxExit {
                face,
                tau: t + f * dt,
                location,
            });
        }
        log_y = ly_new;
        t += dt;
    }
    None
}

/// One side of the change-of-drift identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GirsanovSide {
    /// `E^{(μ)}[e^{−½(η²−μ²)τ_U} (x_n/X_n(τ_U))^{η−μ}; X_{τ_U} ∈ A]`.
    pub weighted: Estimate,
    /// `P^{(η)}(X_{τ_U} ∈ A)`.
    pub direct: Estimate,
    /// Paths that did not leave `U` before `t_max`.
    pub censored: usize,
}

/// Report of [`girsanov_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirsanovReport {
    pub mu: f64,
    pub eta: f64,
    pub fine: GirsanovSide,
    pub coarse: GirsanovSide,
    /// Twice the change of `weighted − direct` when `dt` is doubled.
    pub allowance: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn girsanov_side(
    params: &ModelParams,
    eta: f64,
    x: &HyperPoint,
    u: &BoxDomain,
    faces: &[Face],
    cfg: &PathConfig,
) -> GirsanovSide {
    let mu = params.mu();
    let in_a = |f: &Face| faces.is_empty() || faces.contains(f);
    let x_n = x.last();
    let weighted: Vec<Option<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            box_exit(mu, x.coords(), u, cfg.dt, cfg.t_max, &mut cfg.rng(i, 4)).map(|e| {
                if in_a(&e.face) {
                    (-0.5 * (eta * eta - mu * mu) * e.tau).exp() * (x_n / e.location[x.dim() - 1]).powf(eta - mu)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let direct: Vec<Option<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            box_exit(eta, x.coords(), u, cfg.dt, cfg.t_max, &mut cfg.rng(i, 5)).map(|e| {
                if in_a(&e.face) {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect();
    let censored = weighted.iter().filter(|w| w.is_none()).count() + direct.iter().filter(|w| w.is_none()).count();
    let w: Vec<f64> = weighted.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let d: Vec<f64> = direct.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    GirsanovSide {
        weighted: Estimate::from_samples(&w, cfg.seed),
        direct: Estimate::from_samples(&d, cfg.seed),
        censored,
    }
}

/// Checks `E^{(μ)}[e^{−½(η²−μ²)τ_U}(x_n/X_n(τ_U))^{η−μ}; X_{τ_U} ∈ A] = P^{(η)}(X_{τ_U} ∈ A)`
/// for a box `U` with `A` a union of faces (all of `∂U` when `faces` is
/// empty), from two independent simulations at `dt` and `2dt`.
pub fn girsanov_check(
    params: &ModelParams,
    eta: f64,
    x: &HyperPoint,
    u: &BoxDomain,
    faces: &[Face],
    cfg: &PathConfig,
) -> Result<GirsanovReport> {
    cfg.validate()?;
    params.check_dim(x.coords())?;
    if u.lo.len() != params.n() || !u.contains(x.coords()) {
        return Err(Error::ConfigInvalid(
            "start point must lie inside a box of the model dimension".into(),
        ));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    if faces.iter().any(|f| f.axis >= params.n()) {
        return Err(Error::ConfigInvalid("face axis out of range".into()));
    }
    let fine = girsanov_side(params, eta, x, u, faces, cfg);
    let coarse = girsanov_side(params, eta, x, u, faces, &cfg.coarser());
    let gap = |s: &GirsanovSide| s.weighted.value - s.direct.value;
    let allowance = 2.0 * (gap(&fine) - gap(&coarse)).abs();
    let difference = gap(&fine).abs();
    let tolerance = 3.0 * fine.weighted.stderr.hypot(fine.direct.stderr) + allowance;
    Ok(GirsanovReport {
        mu: params.mu(),
        eta,
        fine,
        coarse,
        allowance,
        difference,
        tolerance,
        pass: difference <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hartman_watson::{a_infinity_density, exit_time_density};
    use crate::quad::{integrate_adaptive, QuadSpec};

    fn small(n_paths: usize) -> PathConfig {
        PathConfig {
            dt: 1e-2,
            n_paths,
            t_max: 100.0,
            ..PathConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig { dt: 0.0, ..small(1) }.validate().is_err());
        assert!(PathConfig { n_paths: 0, ..small(1) }.validate().is_err());
        assert!(PathConfig {
            t_max: 1e-3,
            ..small(1)
        }
        .validate()
        .is_err());
        assert!(small(1).validate().is_ok());
    }

    #[test]
    fn tau1_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_tau1(0.7, &mut rng).unwrap()).collect();
        // P(τ ≤ u) = 2(1 − Φ(x₁/√u)) = erfc(x₁/√(2u)).
        let d = ks_one_sample(&draws, |u| libm::erfc(0.7 / (2.0 * u).sqrt()));
        assert!(d < 0.01, "{d}");
        let q = QuadSpec::default();
        let by_density = integrate_adaptive(|u| exit_time_density(0.7, u).unwrap(), 1e-12, 2.0, &q)
            .unwrap()
            .value;
        assert!((by_density - libm::erfc(0.7 / 2.0)).abs() < 1e-8);
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let want = 0.49 / 0.674_489_750_196_081_7f64.powi(2);
        assert!((median / want - 1.0).abs() < 0.02);
    }

    #[test]
    fn a_infinity_law() {
        let p = ModelParams::new(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| sample_a_infinity(&p, 1.0, &mut rng).unwrap())
            .collect();
        let e = Estimate::from_samples(&draws, 2);
        assert!((e.value - 0.5).abs() < 3.0 * e.stderr, "{e:?}");
        let q = QuadSpec::default().with_tol(1e-9);
        let cdf = |u: f64| {
            integrate_adaptive(|s| a_infinity_density(&p, 1.0, s).unwrap(), 0.0, u, &q)
                .unwrap()
                .value
        };
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        let sub: Vec<f64> = sorted.iter().step_by(50).copied().collect();
        let d = sub
            .iter()
            .enumerate()
            .map(|(k, &v)| (cdf(v) - (k * 50) as f64 / draws.len() as f64).abs())
            .fold(0.0, f64::max);
        assert!(d < 0.01, "{d}");
        let p_small = ModelParams::new(3, 0.3).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = sample_a_infinity(&p_small, 1.0, &mut r1).unwrap();
        let b = sample_a_infinity(&p_small, 2.0, &mut r2).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn gbm_marginal_is_lognormal() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let cfg = PathConfig {
            dt: 0.05,
            t_max: 1.0,
            n_paths: 20_000,
            ..PathConfig::default()
        };
        let x = DomainPoint::new(vec![1e6, 0.0, 1.0]).unwrap();
        // Far from the wall every path is censored at t_max with Y ~ e^{N(−μ t, t)}.
        let recs = sample_paths(&p, &x, &cfg).unwrap();
        let ys: Vec<f64> = recs.iter().map(|r| r.location[2]).collect();
        let d = ks_one_sample(&ys, |v| 0.5 * libm::erfc(-(v.ln() + 1.0) / 2f64.sqrt()));
        assert!(d < 0.015, "{d}");
        assert!(recs.iter().all(|r| r.wall == ExitWall::Censored));
    }

    #[test]
    fn determinism_and_bookkeeping() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = DomainPoint::new(vec![1.0, 0.0, 1.0]).unwrap();
        let cfg = small(500);
        let a = sample_paths(&p, &x, &cfg).unwrap();
        let b = sample_paths(&p, &x, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_path(&p, &x, &cfg).unwrap(), a[0]);
        let c = ExitCounts::of(&a);
        assert_eq!(c.total(), 500);
        for r in a.iter().filter(|r| r.wall == ExitWall::Wall1) {
            assert_eq!(r.location[0], 0.0);
        }
        let binning = Binning {
            wall: Wall::Wall1,
            axis: 2,
            lo: 0.0,
            hi: 1e9,
            bins: 4,
        };
        let h = histogram_from(&a, &binning, cfg.seed);
        let total: f64 = h.mass.iter().map(|m| m.value).sum();
        assert!((total - exit_probability_from(&a, cfg.seed).value).abs() < 1e-12);
    }

    #[test]
    fn exit_probability_trends() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let cfg = small(4000);
        let probs: Vec<f64> = [0.25, 1.0, 4.0]
            .iter()
            .map(|&x1| {
                estimate_exit_probability(&p, &DomainPoint::new(vec![x1, 0.0, 1.0]).unwrap(), &cfg)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(probs[0] > probs[1] && probs[1] > probs[2], "{probs:?}");
        // 1 − x₁/√(x₁² + x_n²) at μ = 1.
        for (p_hat, x1) in probs.iter().zip([0.25f64, 1.0, 4.0]) {
            let want = 1.0 - x1 / (x1 * x1 + 1.0).sqrt();
            assert!((p_hat - want).abs() < 0.03, "{p_hat} vs {want}");
        }
        let near = estimate_exit_probability(&p, &DomainPoint::new(vec![1e-4, 0.0, 1.0]).unwrap(), &cfg).unwrap();
        assert!(near.value > 0.99);
        let strong = ModelParams::new(3, 10.0).unwrap();
        let far = estimate_exit_probability(&strong, &DomainPoint::new(vec![5.0, 0.0, 1.0]).unwrap(), &cfg).unwrap();
        assert!(far.value < 0.01);
    }

    #[test]
    fn ks_statistics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
        let u: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&u, |v| v) <= 0.0005 + 1e-12);
        assert!((ks_critical(0.05, 100, 100) - 1.358 * 0.1414).abs() < 1e-3);
    }

    #[test]
    fn reflection_small_run() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = DomainPoint::new(vec![0.5, 0.0, 1.0]).unwrap();
        let cfg = PathConfig {
            dt: 1e-2,
            n_paths: 5000,
            ..PathConfig::default()
        };
        let r = reflection_check(&p, &x, &[0.0, 0.25, 1.0], &cfg).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.points[0].ks_statistic, 0.0);
    }

    #[test]
    fn girsanov_null_and_total_mass() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = HyperPoint::new(vec![0.0, 0.0, 1.0]).unwrap();
        let u = BoxDomain::new(vec![-1.0, -1.0, 0.5], vec![1.0, 1.0, 2.0]).unwrap();
        let cfg = PathConfig {
            dt: 1e-2,
            n_paths: 4000,
            ..PathConfig::default()
        };
        let top = [Face { axis: 2, upper: true }];
        let null = girsanov_check(&p, 1.0, &x, &u, &top, &cfg).unwrap();
        assert!(null.pass, "{null:?}");
        let total = girsanov_check(&p, 2.0, &x, &u, &[], &cfg).unwrap();
        assert_eq!(total.fine.direct.value, 1.0);
        assert!(total.pass, "{total:?}");
    }
}
