//! Analytic kernels of the process generated by `½Δ_μ` on `H^n` and on
//! the half-space `D`.
//!
//! All Legendre functions enter through the reduced ratio
//! `R_b^a(z) = 𝒬_b^a(z)/(z²−1)^{a/2}` (see [`crate::specfun`]), always with
//! degree `b = μ − 1/2`. Odd dimensions use the elementary closed form,
//! even dimensions the integral representation; [`KernelValue::route`]
//! records which one produced a value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{
    cosh_distance, cosh_distance_reflected, squared_distance, BoundaryPoint, CoshDistance, DomainPoint, HyperPoint,
    ModelParams, Wall,
};
use crate::hartman_watson::{ln_sinh, lobe_decay_start};
use crate::quad::{
    integrate_adaptive, integrate_adaptive_raw, integrate_damped_oscillatory, integrate_fixed,
    integrate_semi_infinite_scaled, CompensatedSum, QuadResult, QuadSpec, ZeroProgression,
};
use crate::specfun::{gamma, legendre_ratio_difference_zm1, legendre_ratio_zm1, ln_gamma, LegendreOrder};

/// Kernels refuse points with `cosh ρ − 1` below this.
pub const DIAGONAL_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ClosedForm,
    Quadrature,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::ClosedForm => "closed_form",
            Route::Quadrature => "quadrature",
        })
    }
}

/// A kernel value with its absolute error estimate. The error is zero on
/// the closed-form route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub abs_error: f64,
    pub route: Route,
}

impl KernelValue {
    fn scaled(self, factor: f64) -> Self {
        KernelValue {
            value: self.value * factor,
            abs_error: self.abs_error * factor.abs(),
            route: self.route,
        }
    }
}

fn off_diagonal(c: CoshDistance) -> Result<CoshDistance> {
    if c.minus_one() < DIAGONAL_GUARD {
        return Err(Error::DiagonalSingularity {
            cosh_minus_one: c.minus_one(),
        });
    }
    Ok(c)
}

/// Order `ν − 1/2 = (n−2)/2` used by the potential and the Green function.
fn potential_order(n: usize) -> LegendreOrder {
    if n % 2 == 1 {
        LegendreOrder::HalfInteger(((n - 3) / 2) as u32)
    } else {
        LegendreOrder::General((n as f64 - 2.0) / 2.0)
    }
}

/// Order `ν + 1/2 = n/2` used by the Poisson kernel on `∂₁D`.
fn wall1_order(n: usize) -> LegendreOrder {
    if n % 2 == 1 {
        LegendreOrder::HalfInteger(((n - 1) / 2) as u32)
    } else {
        LegendreOrder::General(n as f64 / 2.0)
    }
}

fn route_of(order: LegendreOrder) -> Route {
    if order.is_closed_form() {
        Route::ClosedForm
    } else {
        Route::Quadrature
    }
}

/// `(x_n/y_n)^{μ−ν}`.
fn drift_weight(params: &ModelParams, x_n: f64, y_n: f64) -> f64 {
    (x_n / y_n).powf(params.mu() - params.nu())
}

/// `ln(cosh b + z)` without overflow.
fn ln_cosh_plus(b: f64, z: f64) -> f64 {
    if b < 20.0 {
        (b.cosh() + z).ln()
    } else {
        b + (0.5 + z * (-b).exp() + 0.5 * (-2.0 * b).exp()).ln()
    }
}

fn density_prefactor(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    (ln_gamma((nf + 1.0) / 2.0) - PI.ln() - 0.5 * nf * (2.0 * PI).ln() - 0.5 * t.ln()).exp()
}

/// The distance part of the transition density,
/// `H(t, ρ) = Γ((n+1)/2)/(π(2π)^{n/2}√t) ∫₀^∞ e^{(π²−b²)/(2t)} sinh b sin(πb/t) (cosh b + cosh ρ)^{−(n+1)/2} db`,
/// summed lobe by lobe.
fn heat_lobes(n: usize, t: f64, z: f64, quad: &QuadSpec) -> Result<QuadResult> {
    let k = (n as f64 + 1.0) / 2.0;
    let f = |b: f64| {
        let log = -b * b / (2.0 * t) + ln_sinh(b) - k * ln_cosh_plus(b, z);
        log.exp() * (PI * b / t).sin()
    };
    let zeros = ZeroProgression { first: 0.0, spacing: t };
    let res = match integrate_damped_oscillatory(f, zeros, lobe_decay_start(t), &quad.tightened()) {
        Ok(r) => r,
        Err(Error::NonConvergence { value, abs_error }) => QuadResult {
            value,
            abs_error_estimate: abs_error,
            evaluations: 0,
            converged: false,
        },
        Err(e) => return Err(e),
    };
    let pre = density_prefactor(n, t) * (PI * PI / (2.0 * t)).exp();
    Ok(QuadResult {
        value: pre * res.value,
        abs_error_estimate: pre * res.abs_error_estimate,
        ..res
    })
}

/// `H(t, ρ)` along the line `Im b = π/2`.
///
/// With `G(b) = e^{−(b−iπ)²/(2t)} sinh b (cosh b + z)^{−(n+1)/2}` the
/// integrand is `Im G` on the real axis, `G` has no singularity in the
/// strip `0 ≤ Im b ≤ π/2`, and the leg `0 → iπ/2` is real, so
/// `H = pre · ∫₀^∞ Im G(c + iπ/2) dc`. The modulus of that integrand is
/// free of the factor `e^{π²/(2t)}`.
fn heat_contour(n: usize, t: f64, z: f64, quad: &QuadSpec) -> Result<QuadResult> {
    let k = (n as f64 + 1.0) / 2.0;
    let log_modulus = |c: f64| {
        let ln_cosh = c + (-2.0 * c).exp().ln_1p() - std::f64::consts::LN_2;
        let sh = c.sinh();
        let ln_abs = if sh.is_finite() {
            0.5 * (z * z + sh * sh).ln()
        } else {
            ln_sinh(c)
        };
        (PI * PI / 4.0 - c * c) / (2.0 * t) + ln_cosh - k * ln_abs
    };
    let integrand = |c: f64| {
        let phase = PI * c / (2.0 * t) + PI / 2.0 - k * c.sinh().atan2(z);
        log_modulus(c).exp() * phase.sin()
    };
    let end = (PI * PI / 4.0 + 2.0 * t * 60.0).sqrt() + 2.0;
    let magnitude = integrate_fixed(|c| log_modulus(c).exp(), 0.0, end, 16);
    let inner = quad.tightened();
    let floor = inner.abs_tol.max(4.0 * f64::EPSILON * magnitude);
    // Not converging here means rounding has been reached; the estimate
    // below stays honest either way.
    let res = integrate_adaptive_raw(integrand, 0.0, end, &inner.with_abs_tol(floor));
    let pre = density_prefactor(n, t);
    Ok(QuadResult {
        value: pre * res.value,
        abs_error_estimate: pre * (res.abs_error_estimate + 8.0 * f64::EPSILON * magnitude),
        ..res
    })
}

fn heat(n: usize, t: f64, z: f64, quad: &QuadSpec) -> Result<QuadResult> {
    if t < quad.t_min_theta {
        return Err(Error::RangeTooOscillatory {
            t,
            t_min: quad.t_min_theta,
        });
    }
    let lobes = heat_lobes(n, t, z, quad)?;
    if lobes.abs_error_estimate <= quad.tol * lobes.value.abs() {
        return Ok(lobes);
    }
    match heat_contour(n, t, z, quad) {
        Ok(c) if c.abs_error_estimate < lobes.abs_error_estimate => Ok(c),
        _ => Ok(lobes),
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time must be positive and finite, got {t}"));
    }
    Ok(())
}

/// Transition density `p^{(μ)}(t, x, y)` with respect to `dV_n`:
/// `(x_n/y_n)^{μ−ν} e^{−μ²t/2} H(t, ρ)`, where `H` is the oscillatory
/// integral in `b` over lobes `[kt, (k+1)t]`.
///
/// Refuses `t < quad.t_min_theta`. When cancellation keeps the lobe sum
/// above `quad.tol`, the value along the line `Im b = π/2`
/// ([`transition_density_contour`]) is used if its error is smaller.
pub fn transition_density(
    params: &ModelParams,
    t: f64,
    x: &HyperPoint,
    y: &HyperPoint,
    quad: &QuadSpec,
) -> Result<KernelValue> {
    check_time(t)?;
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let z = cosh_distance(x, y).value();
    let h = heat(params.n(), t, z, quad)?;
    let w = drift_weight(params, x.last(), y.last()) * (-params.mu() * params.mu() * t / 2.0).exp();
    Ok(KernelValue {
        value: h.value,
        abs_error: h.abs_error_estimate,
        route: Route::Quadrature,
    }
    .scaled(w))
}

/// Transition density evaluated along the line `Im b = π/2` only. No
/// lower limit on `t` applies; accuracy degrades slowly as `t → 0` with
/// the ratio `e^{π²/(8t)} / p`.
pub fn transition_density_contour(
    params: &ModelParams,
    t: f64,
    x: &HyperPoint,
    y: &HyperPoint,
    quad: &QuadSpec,
) -> Result<KernelValue> {
    check_time(t)?;
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let z = cosh_distance(x, y).value();
    let h = heat_contour(params.n(), t, z, quad)?;
    let w = drift_weight(params, x.last(), y.last()) * (-params.mu() * params.mu() * t / 2.0).exp();
    Ok(KernelValue {
        value: h.value,
        abs_error: h.abs_error_estimate,
        route: Route::Quadrature,
    }
    .scaled(w))
}

/// Density of the process killed on leaving `D`:
/// `p^{(μ)}(t, x, y) − p^{(μ)}(t, x, ȳ)`.
pub fn killed_density(
    params: &ModelParams,
    t: f64,
    x: &DomainPoint,
    y: &DomainPoint,
    quad: &QuadSpec,
) -> Result<KernelValue> {
    let direct = transition_density(params, t, x, y, quad)?;
    let mirror = transition_density(params, t, x, &y.reflect(), quad)?;
    Ok(KernelValue {
        value: direct.value - mirror.value,
        abs_error: direct.abs_error + mirror.abs_error,
        route: Route::Quadrature,
    })
}

fn potential_prefactor(params: &ModelParams, x_n: f64, y_n: f64) -> f64 {
    drift_weight(params, x_n, y_n) * 2.0 / (2.0 * PI).powf(params.n() as f64 / 2.0)
}

/// Potential kernel
/// `V^{(μ)}(x, y) = (x_n/y_n)^{μ−ν} · 2/(2π)^{n/2} · R_{μ−1/2}^{ν−1/2}(cosh ρ)`.
///
/// ```
/// use halfspace::geometry::{HyperPoint, ModelParams};
/// use halfspace::kernels::potential;
/// use halfspace::quad::QuadSpec;
/// // n = 3, μ = 1: V = e^{−ρ} / (2π sinh ρ).
/// let p = ModelParams::new(3, 1.0).unwrap();
/// let x = HyperPoint::new(vec![0.0, 0.0, 1.0]).unwrap();
/// let y = HyperPoint::new(vec![0.0, 0.0, 2.0]).unwrap();
/// let rho = 2f64.ln();
/// let v = potential(&p, &x, &y, &QuadSpec::default()).unwrap();
/// let want = (-rho).exp() / (2.0 * std::f64::consts::PI * rho.sinh());
/// assert!((v.value - want).abs() < 1e-15);
/// ```
pub fn potential(params: &ModelParams, x: &HyperPoint, y: &HyperPoint, quad: &QuadSpec) -> Result<KernelValue> {
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let c = off_diagonal(cosh_distance(x, y))?;
    let order = potential_order(params.n());
    let (r, err) = legendre_ratio_zm1(order, params.mu() - 0.5, c.minus_one(), quad)?;
    Ok(KernelValue {
        value: r,
        abs_error: err,
        route: route_of(order),
    }
    .scaled(potential_prefactor(params, x.last(), y.last())))
}

/// Green function of `D`, `G_D(x, y) = V(x, y) − V(x, ȳ)`, evaluated as a
/// single difference of Legendre ratios so that it keeps its relative
/// accuracy when `ȳ` is close to `y`.
pub fn green(params: &ModelParams, x: &DomainPoint, y: &DomainPoint, quad: &QuadSpec) -> Result<KernelValue> {
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let c = off_diagonal(cosh_distance(x, y))?;
    let cbar = cosh_distance_reflected(x, y);
    let order = potential_order(params.n());
    let (d, err) = legendre_ratio_difference_zm1(order, params.mu() - 0.5, c.minus_one(), cbar.minus_one(), quad)?;
    Ok(KernelValue {
        value: d,
        abs_error: err,
        route: route_of(order),
    }
    .scaled(potential_prefactor(params, x.last(), y.last())))
}

fn poisson_constant(params: &ModelParams) -> f64 {
    let (mu, nu) = (params.mu(), params.nu());
    (ln_gamma(mu + nu) - ln_gamma(mu) - nu * PI.ln()).exp()
}

/// Global Poisson kernel, the density of `X_∞` on `R^{n−1} × {0}`:
/// `Γ(μ+ν)/(Γ(μ)π^ν) · x_n^{2μ}/|x−y|^{2μ+2ν}`. `y` is given with its
/// last coordinate equal to 0.
pub fn global_poisson(params: &ModelParams, x: &HyperPoint, y: &[f64]) -> Result<f64> {
    params.check_dim(x.coords())?;
    params.check_dim(y)?;
    if y[y.len() - 1] != 0.0 {
        return domain(format!("global Poisson kernel needs y_n = 0, got {y:?}"));
    }
    let d2 = squared_distance(x.coords(), y);
    let mu = params.mu();
    Ok(poisson_constant(params) * x.last().powf(2.0 * mu) * d2.powf(-(mu + params.nu())))
}

/// `d^{−k} − (d + e)^{−k}` for `d, e > 0`, without cancellation.
fn power_gap(d: f64, e: f64, k: f64) -> f64 {
    d.powf(-k) * -(-k * (e / d).ln_1p()).exp_m1()
}

/// Poisson kernel of `D`, the density of `X_{τ_D}` on each wall with
/// respect to surface measure.
///
/// * `∂₁D` (`y₁ = 0`): `2x₁/(2π)^{n/2} · x_n^{μ−ν−1} y_n^{−μ−ν} · R_{μ−1/2}^{ν+1/2}(cosh ρ)`.
/// * `∂₂D` (`y_n = 0`): `Γ(μ+ν)/(Γ(μ)π^ν) · x_n^{2μ}(|x−y|^{−2μ−2ν} − |x−ȳ|^{−2μ−2ν})`.
///
/// Both are densities against Lebesgue measure on the wall.
pub fn poisson_boundary(
    params: &ModelParams,
    x: &DomainPoint,
    y: &BoundaryPoint,
    quad: &QuadSpec,
) -> Result<KernelValue> {
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let (mu, nu) = (params.mu(), params.nu());
    let n = params.n();
    match y.wall() {
        Wall::Wall1 => {
            let y_n = y.coords()[n - 1];
            let zm1 = squared_distance(x.coords(), y.coords()) / (2.0 * x.last() * y_n);
            let order = wall1_order(n);
            let (r, err) = legendre_ratio_zm1(order, mu - 0.5, zm1, quad)?;
            let log_pre = (2.0 * x.first()).ln() - 0.5 * n as f64 * (2.0 * PI).ln() + (mu - nu - 1.0) * x.last().ln()
                - (mu + nu) * y_n.ln();
            Ok(KernelValue {
                value: r,
                abs_error: err,
                route: route_of(order),
            }
            .scaled(log_pre.exp()))
        }
        Wall::Wall2 => {
            let d = squared_distance(x.coords(), y.coords());
            let gap = 4.0 * x.first() * y.coords()[0];
            let v = poisson_constant(params) * x.last().powf(2.0 * mu) * power_gap(d, gap, mu + nu);
            Ok(KernelValue {
                value: v,
                abs_error: 0.0,
                route: Route::ClosedForm,
            })
        }
    }
}

/// λ-Poisson kernel `x_n^{μ−η} P_D^{(η)}(x, y)` with `η = √(μ² + 2λ)`.
/// With `f` on `∂D`, `u(x) = ∫ P_λ(x, y) f(y) dy` solves `½Δ_μ u = λu`.
pub fn lambda_poisson(
    params: &ModelParams,
    x: &DomainPoint,
    y: &BoundaryPoint,
    quad: &QuadSpec,
) -> Result<KernelValue> {
    if params.lambda() == 0.0 {
        return poisson_boundary(params, x, y, quad);
    }
    let eta = params.eta();
    let shifted = params.with_mu(eta)?;
    let k = poisson_boundary(&shifted, x, y, quad)?;
    Ok(k.scaled(x.last().powf(params.mu() - eta)))
}

/// Anchors of the boundary limits of the Green function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallLimitKind {
    /// `lim y₁^{−1} G_D(x, y)` as `y → z ∈ ∂₁D`.
    Wall1(BoundaryPoint),
    /// `lim y_n^{1−n} G_D(x, y)` as `y → z ∈ ∂₂D`.
    Wall2(BoundaryPoint),
    /// `lim y_n^{2μ+2} G_D(x, y)` as `y_n → ∞` with `y₁` fixed.
    Infinity { y1: f64 },
    /// `lim |x−y|^{n−2} G_D(x, y)` as `y → x`, for `n ≥ 3`.
    Diagonal,
}

/// Limit values of the rescaled Green function at the boundary of `D`, at
/// infinity and on the diagonal.
pub fn wall_limit(params: &ModelParams, kind: &WallLimitKind, x: &DomainPoint, quad: &QuadSpec) -> Result<f64> {
    params.check_dim(x.coords())?;
    let (mu, nu) = (params.mu(), params.nu());
    let n = params.n();
    let nf = n as f64;
    match kind {
        WallLimitKind::Wall1(z) => {
            if z.wall() != Wall::Wall1 {
                return Err(Error::WallMismatch(
                    "Wall1 limit needs a point of the first wall".into(),
                ));
            }
            params.check_dim(z.coords())?;
            let z_n = z.coords()[n - 1];
            let zm1 = squared_distance(x.coords(), z.coords()) / (2.0 * x.last() * z_n);
            let (r, _) = legendre_ratio_zm1(wall1_order(n), mu - 0.5, zm1, quad)?;
            Ok(
                4.0 / (2.0 * PI).powf(nf / 2.0) * x.first() / (x.last() * z_n)
                    * drift_weight(params, x.last(), z_n)
                    * r,
            )
        }
        WallLimitKind::Wall2(z) => {
            if z.wall() != Wall::Wall2 {
                return Err(Error::WallMismatch(
                    "Wall2 limit needs a point of the second wall".into(),
                ));
            }
            params.check_dim(z.coords())?;
            let d = squared_distance(x.coords(), z.coords());
            let gap = 4.0 * x.first() * z.coords()[0];
            let c = (ln_gamma(mu + nu) - nu * PI.ln() - ln_gamma(mu + 1.0)).exp();
            Ok(c * x.last().powf(2.0 * mu) * power_gap(d, gap, mu + nu))
        }
        WallLimitKind::Infinity { y1 } => {
            if !(*y1 > 0.0) {
                return domain(format!("Infinity limit needs y1 > 0, got {y1}"));
            }
            let c = 4.0 * (ln_gamma(mu + nu + 1.0) - nu * PI.ln() - ln_gamma(mu + 1.0)).exp();
            Ok(c * x.last().powf(2.0 * mu) * x.first() * y1)
        }
        WallLimitKind::Diagonal => {
            if n < 3 {
                return domain("the diagonal limit needs n >= 3 (Γ((n−2)/2) has a pole at n = 2)");
            }
            Ok(x.last().powf(nf - 2.0) * gamma((nf - 2.0) / 2.0) / (2.0 * PI.powf(nf / 2.0)))
        }
    }
}

/// Terms of the finite-difference residual of `½Δ_μ u − λu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    pub residual: f64,
    /// `½ x_n² Σ ∂²u/∂x_k²`.
    pub diffusion: f64,
    /// `−½ (2μ−1) x_n ∂u/∂x_n`.
    pub drift: f64,
    /// `−λ u`.
    pub killing: f64,
}

impl PdeResidual {
    /// `|residual|` relative to the largest term it is assembled from.
    pub fn relative(&self) -> f64 {
        let scale = self.diffusion.abs().max(self.drift.abs()).max(self.killing.abs());
        if scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / scale
        }
    }
}

/// Central-difference residual of `½[x_n² Σ∂²_k − (2μ−1)x_n ∂_n]u − λu` at
/// `x`, from `u` on the `2n+1`-point stencil of step `h`.
///
/// ```
/// use halfspace::geometry::{DomainPoint, ModelParams};
/// use halfspace::kernels::pde_residual;
/// let p = ModelParams::new(3, 1.5).unwrap();
/// let x = DomainPoint::new(vec![1.0, 0.0, 1.0]).unwrap();
/// // x_n^{2μ} is annihilated by Δ_μ.
/// let r = pde_residual(&p, |y: &[f64]| Ok(y[2].powf(3.0)), &x, 1e-3).unwrap();
/// assert!(r.relative() < 1e-5);
/// ```
pub fn pde_residual<F>(params: &ModelParams, mut u: F, x: &DomainPoint, h: f64) -> Result<PdeResidual>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    params.check_dim(x.coords())?;
    if !(h > 0.0) || x.first() - h <= 0.0 || x.last() - h <= 0.0 {
        return Err(Error::StencilOutsideDomain(format!(
            "step {h} at {:?} reaches a wall",
            x.coords()
        )));
    }
    let n = params.n();
    let center = u(x.coords())?;
    let mut laplacian = CompensatedSum::new();
    let mut d_last = 0.0;
    let mut probe = x.coords().to_vec();
    for k in 0..n {
        let orig = probe[k];
        probe[k] = orig + h;
        let up = u(&probe)?;
        probe[k] = orig - h;
        let down = u(&probe)?;
        probe[k] = orig;
        laplacian.add((up - 2.0 * center + down) / (h * h));
        if k == n - 1 {
            d_last = (up - down) / (2.0 * h);
        }
    }
    let x_n = x.last();
    let diffusion = 0.5 * x_n * x_n * laplacian.value();
    let drift = -0.5 * (2.0 * params.mu() - 1.0) * x_n * d_last;
    let killing = -params.lambda() * center;
    Ok(PdeResidual {
        residual: diffusion + drift + killing,
        diffusion,
        drift,
        killing,
    })
}

/// Surface area of the unit sphere `S^{d−1} ⊂ R^d`.
fn sphere_area(d: usize) -> f64 {
    let df = d as f64;
    2.0 * PI.powf(df / 2.0) / gamma(df / 2.0)
}

/// Integral of `kernel` over one wall, in coordinates (height-like
/// variable, radius of the middle coordinates around those of `x`).
/// Kernels on the walls depend on the middle coordinates only through that
/// radius.
fn wall_coordinates(x: &DomainPoint, wall: Wall, outer: f64, radius: f64) -> Vec<f64> {
    let n = x.dim();
    let mut c = x.coords().to_vec();
    if n > 2 {
        c[1] += radius;
    }
    match wall {
        Wall::Wall1 => {
            c[0] = 0.0;
            c[n - 1] = outer;
        }
        Wall::Wall2 => {
            c[0] = outer;
            c[n - 1] = 0.0;
        }
    }
    c
}

fn radial_weight(n: usize, radius: f64) -> f64 {
    match n {
        2 => 1.0,
        3 => 2.0,
        _ => sphere_area(n - 2) * radius.powi(n as i32 - 3),
    }
}

/// Mass `∫_{wall} kernel(x, y) dy`, by iterated adaptive quadrature.
pub fn wall_mass<K>(params: &ModelParams, x: &DomainPoint, wall: Wall, kernel: K, quad: &QuadSpec) -> Result<QuadResult>
where
    K: Fn(&BoundaryPoint) -> Result<f64>,
{
    wall_mass_over(params, x, wall, kernel, None, quad)
}

/// Mass of the band `lo ≤ y_n < hi` of `∂₁D` (or `lo ≤ y₁ < hi` of
/// `∂₂D`), all other coordinates free.
pub fn wall_band_mass<K>(
    params: &ModelParams,
    x: &DomainPoint,
    wall: Wall,
    kernel: K,
    (lo, hi): (f64, f64),
    quad: &QuadSpec,
) -> Result<QuadResult>
where
    K: Fn(&BoundaryPoint) -> Result<f64>,
{
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return domain(format!("bad band [{lo}, {hi})"));
    }
    wall_mass_over(params, x, wall, kernel, Some((lo, hi)), quad)
}

fn wall_mass_over<K>(
    params: &ModelParams,
    x: &DomainPoint,
    wall: Wall,
    kernel: K,
    band: Option<(f64, f64)>,
    quad: &QuadSpec,
) -> Result<QuadResult>
where
    K: Fn(&BoundaryPoint) -> Result<f64>,
{
    params.check_dim(x.coords())?;
    let n = params.n();
    let inner_spec = quad.tightened();
    let scale_outer = match wall {
        Wall::Wall1 => x.last(),
        Wall::Wall2 => x.first(),
    };
    let scale_inner = x.first().min(x.last());
    let failure = std::cell::Cell::new(None);
    let outer = |o: f64| -> f64 {
        if o <= 0.0 {
            return 0.0;
        }
        let point = |r: f64| -> f64 {
            let c = wall_coordinates(x, wall, o, r);
            match BoundaryPoint::new(wall, c).and_then(|y| kernel(&y)) {
                Ok(v) => v * radial_weight(n, r),
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        };
        if n == 2 {
            return point(0.0);
        }
        match integrate_semi_infinite_scaled(point, 0.0, scale_inner, &inner_spec) {
            Ok(r) => r.value,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let res = match band {
        None => integrate_semi_infinite_scaled(outer, 0.0, scale_outer, quad),
        Some((lo, hi)) => integrate_adaptive(outer, lo, hi, quad),
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    res
}

/// Fixed-rule counterpart of [`wall_mass`]: composite Gauss–Legendre in
/// both variables. The result depends smoothly on `x`, which makes it
/// suitable for finite differences.
pub fn wall_mass_fixed<K>(params: &ModelParams, x: &DomainPoint, wall: Wall, kernel: K, panels: usize) -> Result<f64>
where
    K: Fn(&BoundaryPoint) -> Result<f64>,
{
    params.check_dim(x.coords())?;
    let n = params.n();
    let failure = std::cell::Cell::new(None);
    // Fixed scales (not tied to x) keep the quadrature nodes identical
    // across a finite-difference stencil.
    let outer = |o: f64| -> f64 {
        let point = |r: f64| -> f64 {
            let c = wall_coordinates(x, wall, o, r);
            match BoundaryPoint::new(wall, c).and_then(|y| kernel(&y)) {
                Ok(v) => v * radial_weight(n, r),
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        };
        if n == 2 {
            return point(0.0);
        }
        log_mapped_fixed(point, panels)
    };
    let v = log_mapped_fixed(outer, panels);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(v)
}

/// `∫₀^∞ f` through `x = e^s`, `s ∈ [−30, 12]`, with a fixed rule.
fn log_mapped_fixed<F: FnMut(f64) -> f64>(mut f: F, panels: usize) -> f64 {
    integrate_fixed(
        |s| {
            let x = s.exp();
            let v = f(x) * x;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        -30.0,
        12.0,
        panels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadSpec {
        QuadSpec::default()
    }

    fn hp(c: &[f64]) -> HyperPoint {
        HyperPoint::new(c.to_vec()).unwrap()
    }

    fn dp(c: &[f64]) -> DomainPoint {
        DomainPoint::new(c.to_vec()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// n = 3, μ = 1: `p = (2πt)^{−3/2} (ρ/sinh ρ) e^{−t/2 − ρ²/(2t)}`.
    fn heat3(t: f64, rho: f64) -> f64 {
        (2.0 * PI * t).powf(-1.5) * rho / rho.sinh() * (-t / 2.0 - rho * rho / (2.0 * t)).exp()
    }

    #[test]
    fn transition_density_matches_three_dimensional_closed_form() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = hp(&[0.0, 0.0, 1.0]);
        for &yn in &[1.2, 2.0, 5.0] {
            let y = hp(&[0.0, 0.0, yn]);
            let rho = f64::ln(yn);
            for &t in &[0.2, 0.5, 1.0, 3.0] {
                let want = heat3(t, rho);
                let a = transition_density(&p, t, &x, &y, &q()).unwrap();
                let b = transition_density_contour(&p, t, &x, &y, &q()).unwrap();
                assert!(rel(a.value, want) < 1e-8, "lobes t={t} yn={yn}: {} vs {want}", a.value);
                assert!(
                    rel(b.value, want) < 1e-9,
                    "contour t={t} yn={yn}: {} vs {want}",
                    b.value
                );
            }
        }
    }

    #[test]
    fn contour_density_reaches_small_times() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = hp(&[0.0, 0.0, 1.0]);
        let y = hp(&[0.0, 0.0, 2.0]);
        let rho = 2f64.ln();
        for &t in &[0.05, 0.1] {
            let v = transition_density_contour(&p, t, &x, &y, &q()).unwrap();
            let err = (v.value - heat3(t, rho)).abs();
            assert!(err <= v.abs_error, "t={t}: {err} > {}", v.abs_error);
        }
        let v = transition_density_contour(&p, 0.1, &x, &y, &q()).unwrap();
        assert!(rel(v.value, heat3(0.1, rho)) < 1e-6);
        assert!(matches!(
            transition_density(&p, 0.1, &x, &y, &q()),
            Err(Error::RangeTooOscillatory { .. })
        ));
    }

    #[test]
    fn drift_change_is_exact() {
        let p = ModelParams::new(4, 0.7).unwrap();
        let classical = ModelParams::new(4, 1.5).unwrap();
        let x = hp(&[0.3, 0.1, -0.4, 1.2]);
        let y = hp(&[0.5, 0.0, 0.2, 0.6]);
        let t = 0.8;
        let a = transition_density(&p, t, &x, &y, &q()).unwrap().value;
        let b = transition_density(&classical, t, &x, &y, &q()).unwrap().value;
        let factor = (1.2f64 / 0.6).powf(0.7 - 1.5) * (-(0.49 - 2.25) * t / 2.0).exp();
        assert!(rel(a, factor * b) < 1e-12);
        let back = transition_density(&p, t, &y, &x, &q()).unwrap().value;
        assert!(rel(a / back, (1.2f64 / 0.6).powf(2.0 * (0.7 - 1.5))) < 1e-12);
    }

    #[test]
    fn killed_density_is_dominated_and_vanishes_at_the_wall() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = dp(&[0.5, 0.0, 1.0]);
        for &y1 in &[1e-6, 0.1, 0.5, 2.0] {
            let y = dp(&[y1, 0.2, 0.8]);
            let k = killed_density(&p, 0.5, &x, &y, &q()).unwrap().value;
            let free = transition_density(&p, 0.5, &x, &y, &q()).unwrap().value;
            assert!(k >= 0.0 && k <= free);
            if y1 < 1e-5 {
                assert!(k < 1e-4 * free);
            }
        }
    }

    #[test]
    fn potential_closed_form_and_decay() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = hp(&[0.0, 0.0, 1.0]);
        assert!(matches!(
            potential(&p, &x, &x, &q()),
            Err(Error::DiagonalSingularity { .. })
        ));
        // e^{−ρ}/(2π sinh ρ) at cosh ρ = 2.
        let y = hp(&[2f64.sqrt(), 0.0, 1.0]);
        let v = potential(&p, &x, &y, &q()).unwrap();
        let rho = 2f64.acosh();
        assert!(rel(v.value, (-rho).exp() / (2.0 * PI * rho.sinh())) < 1e-14);
        assert_eq!(v.route, Route::ClosedForm);
        assert_eq!(v.abs_error, 0.0);
    }

    #[test]
    fn potential_odd_dimensions_as_bessel_polynomial_sum() {
        // V = (x_n/y_n)^{μ−ν} Γ(μ+ν)/(2π)^ν Σ_k a(m,k)/Γ(μ+1+k) e^{−ρ(μ+k)}/(sinh ρ)^{ν+k}.
        for &n in &[3usize, 5, 7] {
            for &mu in &[0.5, 1.0, 1.7] {
                let p = ModelParams::new(n, mu).unwrap();
                let nu = p.nu();
                let m = ((n - 3) / 2) as u32;
                let mut xc = vec![0.0; n];
                xc[n - 1] = 1.3;
                let mut yc = vec![0.0; n];
                yc[0] = 0.4;
                yc[n - 1] = 0.7;
                let (x, y) = (hp(&xc), hp(&yc));
                let rho = cosh_distance(&x, &y).distance();
                let mut sum = 0.0;
                for k in 0..=m {
                    let a = crate::specfun::bessel_poly_coeff(m, k).unwrap() as f64;
                    sum += a / gamma(mu + 1.0 + k as f64) * (-rho * (mu + k as f64)).exp()
                        / rho.sinh().powf(nu + k as f64);
                }
                let want = (1.3f64 / 0.7).powf(mu - nu) * gamma(mu + nu) / (2.0 * PI).powf(nu) * sum;
                let got = potential(&p, &x, &y, &q()).unwrap().value;
                assert!(rel(got, want) < 1e-12, "n={n} mu={mu}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn even_dimension_potential_uses_quadrature() {
        let p = ModelParams::new(4, 1.0).unwrap();
        let x = hp(&[0.0, 0.0, 0.0, 1.0]);
        let y = hp(&[1.0, 0.0, 0.0, 2.0]);
        let v = potential(&p, &x, &y, &q()).unwrap();
        assert_eq!(v.route, Route::Quadrature);
        assert!(v.value > 0.0 && v.abs_error <= 1e-9 * v.value);
    }

    #[test]
    fn green_examples() {
        for &n in &[3usize, 4] {
            let p = ModelParams::new(n, (n as f64 - 1.0) / 2.0).unwrap();
            let mut a = vec![0.7, 0.2, 1.1];
            let mut b = vec![0.3, -0.5, 0.6];
            if n == 4 {
                a.insert(2, 0.4);
                b.insert(2, -0.1);
            }
            let (x, y) = (dp(&a), dp(&b));
            let g1 = green(&p, &x, &y, &q()).unwrap().value;
            let g2 = green(&p, &y, &x, &q()).unwrap().value;
            assert!(rel(g1, g2) < 1e-10, "n={n}");
            let v = potential(&p, &x, &y, &q()).unwrap().value;
            let vbar = potential(&p, &x, &y.reflect(), &q()).unwrap().value;
            assert!(g1 > 0.0 && g1 <= v);
            assert!(rel(g1, v - vbar) < 1e-9);
        }
        let p = ModelParams::new(3, 1.0).unwrap();
        let y = dp(&[0.5, 0.0, 1.0]);
        let x = dp(&[1e-9, 0.3, 1.0]);
        assert!(green(&p, &x, &y, &q()).unwrap().value < 1e-7);
    }

    #[test]
    fn global_poisson_examples() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let v = global_poisson(&p, &hp(&[0.0, 0.0, 1.0]), &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
        let a = global_poisson(&p, &hp(&[0.3, 1.0, 2.0]), &[1.0, -1.0, 0.0]).unwrap();
        let b = global_poisson(&p, &hp(&[5.3, 1.5, 2.0]), &[6.0, -0.5, 0.0]).unwrap();
        assert!(rel(a, b) < 1e-14);
        assert!(global_poisson(&p, &hp(&[0.0, 0.0, 1.0]), &[0.0, 0.0, 1.0]).is_err());
        for &mu in &[0.5, 1.0, 2.0] {
            let p = ModelParams::new(3, mu).unwrap();
            // Radial mass: 2π ∫ r P dr.
            let m = integrate_semi_infinite_scaled(
                |r| 2.0 * PI * r * global_poisson(&p, &hp(&[0.0, 0.0, 1.0]), &[r, 0.0, 0.0]).unwrap(),
                0.0,
                1.0,
                &q(),
            )
            .unwrap()
            .value;
            assert!((m - 1.0).abs() < 1e-6, "mu={mu}: {m}");
        }
    }

    #[test]
    fn poisson_masses_match_exit_law() {
        // At μ = 1, P(exit through ∂₁D) = 1 − x₁/|x| in the (x₁, x_n) plane.
        let x = dp(&[1.0, 0.0, 1.0]);
        let expected = [(0.5, 0.5), (1.0, 1.0 - 0.5f64.sqrt()), (2.0, 0.116_116_523_516_815_6)];
        for &(mu, wall1) in &expected {
            let p = ModelParams::new(3, mu).unwrap();
            let spec = q().with_tol(1e-8);
            let m1 = wall_mass(
                &p,
                &x,
                Wall::Wall1,
                |y| Ok(poisson_boundary(&p, &x, y, &spec)?.value),
                &spec,
            )
            .unwrap()
            .value;
            let m2 = wall_mass(
                &p,
                &x,
                Wall::Wall2,
                |y| Ok(poisson_boundary(&p, &x, y, &spec)?.value),
                &spec,
            )
            .unwrap()
            .value;
            assert!((m1 - wall1).abs() < 1e-6, "mu={mu}: wall1 {m1} vs {wall1}");
            assert!((m1 + m2 - 1.0).abs() < 1e-6, "mu={mu}: total {}", m1 + m2);
        }
    }

    #[test]
    fn poisson_wall_checks() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = dp(&[1.0, 0.0, 1.0]);
        let y = BoundaryPoint::wall2(vec![1e-9, 0.0, 0.0]).unwrap();
        assert!(poisson_boundary(&p, &x, &y, &q()).unwrap().value < 1e-8);
        let bad = BoundaryPoint::wall1(vec![0.0, 0.0, 1.0, 2.0]).unwrap();
        assert!(poisson_boundary(&p, &x, &bad, &q()).is_err());
    }

    #[test]
    fn lambda_kernel_reduces_and_normalizes() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = dp(&[1.0, 0.3, 0.8]);
        for y in [
            BoundaryPoint::wall1(vec![0.0, 0.1, 1.5]).unwrap(),
            BoundaryPoint::wall2(vec![0.4, -0.2, 0.0]).unwrap(),
        ] {
            let a = lambda_poisson(&p, &x, &y, &q()).unwrap();
            let b = poisson_boundary(&p, &x, &y, &q()).unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
        let pl = p.with_lambda(0.5).unwrap();
        let spec = q().with_tol(1e-8);
        let total: f64 = [Wall::Wall1, Wall::Wall2]
            .iter()
            .map(|&w| {
                wall_mass(&pl, &x, w, |y| Ok(lambda_poisson(&pl, &x, y, &spec)?.value), &spec)
                    .unwrap()
                    .value
            })
            .sum();
        assert!(rel(total, 0.8f64.powf(1.0 - 2f64.sqrt())) < 1e-6);
    }

    #[test]
    fn wall_limits() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let x = dp(&[1.0, 0.0, 1.0]);
        let d = wall_limit(&p, &WallLimitKind::Diagonal, &x, &q()).unwrap();
        assert!((d - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let p2 = ModelParams::new(2, 1.0).unwrap();
        assert!(wall_limit(&p2, &WallLimitKind::Diagonal, &dp(&[1.0, 1.0]), &q()).is_err());
        let z = BoundaryPoint::wall1(vec![0.0, 0.2, 1.5]).unwrap();
        let lim = wall_limit(&p, &WallLimitKind::Wall1(z), &x, &q()).unwrap();
        let delta = 1e-5;
        let g = green(&p, &x, &dp(&[delta, 0.2, 1.5]), &q()).unwrap().value;
        assert!(rel(g / delta, lim) < 1e-4);
        let z2 = BoundaryPoint::wall2(vec![0.6, -0.3, 0.0]).unwrap();
        assert!(matches!(
            wall_limit(&p, &WallLimitKind::Wall1(z2), &x, &q()),
            Err(Error::WallMismatch(_))
        ));
    }

    #[test]
    fn pde_residual_basics() {
        let p = ModelParams::new(3, 1.0).unwrap().with_lambda(0.5).unwrap();
        let x = dp(&[1.0, 0.0, 1.0]);
        let r = pde_residual(&p, |_| Ok(2.0), &x, 1e-3).unwrap();
        assert_eq!(r.residual, -1.0);
        let p0 = ModelParams::new(3, 1.0).unwrap();
        assert_eq!(pde_residual(&p0, |_| Ok(2.0), &x, 1e-3).unwrap().residual, 0.0);
        assert!(matches!(
            pde_residual(&p0, |_| Ok(2.0), &x, 1.5),
            Err(Error::StencilOutsideDomain(_))
        ));
    }
}
