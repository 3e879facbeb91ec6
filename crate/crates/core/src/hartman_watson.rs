//! Densities of the one-dimensional building blocks of the process: the
//! Hartman–Watson density `θ_r(t)`, the joint law of the clock and the
//! vertical coordinate, the law of the total clock `A_∞`, the killed Bessel
//! transition density and the hitting time of zero for Brownian motion.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::geometry::ModelParams;
pub use crate::quad::QuadSpec;
use crate::quad::{integrate_adaptive, integrate_damped_oscillatory, integrate_fixed, QuadResult, ZeroProgression};
use crate::specfun::{ive, ln_gamma};

/// Point from which the Gaussian factor `e^{−b²/2t}` dominates every other
/// factor of the lobe integrands.
pub(crate) fn lobe_decay_start(t: f64) -> f64 {
    (1.5 * t).max(1.0)
}

fn check_theta_args(r: f64, t: f64, quad: &QuadSpec) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("theta needs r > 0, got {r}"));
    }
    if !t.is_finite() || !(t > 0.0) {
        return domain(format!("theta needs t > 0, got {t}"));
    }
    if t < quad.t_min_theta {
        return Err(Error::RangeTooOscillatory {
            t,
            t_min: quad.t_min_theta,
        });
    }
    Ok(())
}

/// Hartman–Watson density
/// `θ_r(t) = r/(2π³t)^{1/2} ∫₀^∞ e^{(π²−b²)/(2t)} e^{−r cosh b} sinh b sin(πb/t) db`.
///
/// Evaluated by [`theta_lobes`]; when the alternating lobe sum cannot
/// reach `quad.tol` because of cancellation (small `r` and `t`) and
/// `t ≤ 1`, the contour route [`theta_contour`] is used instead. Times
/// below `quad.t_min_theta` are refused.
///
/// ```
/// use halfspace::hartman_watson::{theta, QuadSpec};
/// let v = theta(1.0, 1.0, &QuadSpec::default()).unwrap();
/// assert!((v.value - 0.739_076_531_303_231_9).abs() < 1e-9);
/// ```
pub fn theta(r: f64, t: f64, quad: &QuadSpec) -> Result<QuadResult> {
    let scaled = theta_scaled(r, t, quad)?;
    let down = (-r).exp();
    Ok(QuadResult {
        value: scaled.value * down,
        abs_error_estimate: scaled.abs_error_estimate * down,
        ..scaled
    })
}

/// `e^{r} θ_r(t)`, which stays bounded as `r` grows.
pub fn theta_scaled(r: f64, t: f64, quad: &QuadSpec) -> Result<QuadResult> {
    let lobes = theta_lobes_scaled(r, t, quad)?;
    if lobes.abs_error_estimate <= quad.tol * lobes.value.abs() || t > 1.0 {
        return Ok(lobes);
    }
    match theta_contour(r, t, quad) {
        Ok(c) => {
            let up = r.exp();
            let c = QuadResult {
                value: c.value * up,
                abs_error_estimate: c.abs_error_estimate * up,
                ..c
            };
            Ok(if c.abs_error_estimate < lobes.abs_error_estimate {
                c
            } else {
                lobes
            })
        }
        Err(_) => Ok(lobes),
    }
}

/// `θ_r(t)` from the real-axis integral alone, summed lobe by lobe between
/// the zeros `b = kt`. The error estimate includes the rounding error of
/// the alternating sum, which grows like `e^{π²/(2t)}`.
pub fn theta_lobes(r: f64, t: f64, quad: &QuadSpec) -> Result<QuadResult> {
    let scaled = theta_lobes_scaled(r, t, quad)?;
    let down = (-r).exp();
    Ok(QuadResult {
        value: scaled.value * down,
        abs_error_estimate: scaled.abs_error_estimate * down,
        ..scaled
    })
}

fn theta_lobes_scaled(r: f64, t: f64, quad: &QuadSpec) -> Result<QuadResult> {
    check_theta_args(r, t, quad)?;
    let f = |b: f64| {
        let half = (0.5 * b).sinh();
        let expo = -b * b / (2.0 * t) - 2.0 * r * half * half + ln_sinh(b);
        expo.exp() * (PI * b / t).sin()
    };
    let zeros = ZeroProgression { first: 0.0, spacing: t };
    let res = match integrate_damped_oscillatory(f, zeros, lobe_decay_start(t), &quad.tightened()) {
        Ok(res) => res,
        // Cancellation-limited: keep the value, report its honest error.
        Err(Error::NonConvergence { value, abs_error }) => QuadResult {
            value,
            abs_error_estimate: abs_error,
            evaluations: 0,
            converged: false,
        },
        Err(e) => return Err(e),
    };
    let pre = r / (2.0 * PI.powi(3) * t).sqrt() * (PI * PI / (2.0 * t)).exp();
    Ok(QuadResult {
        value: pre * res.value,
        abs_error_estimate: pre * res.abs_error_estimate,
        ..res
    })
}

/// `θ_r(t)` by deforming the integration path into the complex plane.
///
/// Writing the integrand as `Im F(b)` with
/// `F(b) = e^{−(b−iπ)²/(2t)} e^{−r cosh b} sinh b`, the path
/// `0 → iπ → C+iπ → C+iπ/2 → ∞+iπ/2` gives real contributions on its
/// first two legs, so
///
/// ```text
/// θ_r(t) = r/(2π³t)^{1/2} · Im[ −i ∫_{π/2}^{π} F(C+iy) dy + ∫_C^∞ F(c+iπ/2) dc ],
/// ```
///
/// with `C` the root of `r sinh C / C = 1/t` when `rt < 1` and `C = 0`
/// otherwise. No cancellation of the size `e^{π²/(2t)}` occurs, so the
/// route is accurate for small `t`; it is limited to `t ≤ 1`, beyond which
/// the phase `r sinh c` oscillates too fast along the horizontal leg.
pub fn theta_contour(r: f64, t: f64, quad: &QuadSpec) -> Result<QuadResult> {
    if !(r > 0.0) || !r.is_finite() || !(t > 0.0 && t <= 1.0) {
        return domain(format!("theta_contour needs r > 0 and 0 < t <= 1, got r={r}, t={t}"));
    }
    let c0 = if r * t < 1.0 { saddle(r, t) } else { 0.0 };
    let two_t = 2.0 * t;
    let big_f = |b: Complex64| {
        let shift = b - Complex64::new(0.0, PI);
        (-(shift * shift) / two_t - r * b.cosh()).exp() * b.sinh()
    };
    let inner = quad.tightened();
    // −i ∫ F dy has imaginary part −Re ∫ F dy.
    let vertical = integrate_adaptive(
        |y| -big_f(Complex64::new(c0, y)).re,
        PI / 2.0,
        PI,
        &inner.with_abs_tol(0.0),
    )?;
    let end = c0 + 12.0 * t.sqrt() + 5.0;
    let horizontal = integrate_adaptive(
        |c| big_f(Complex64::new(c, PI / 2.0)).im,
        c0,
        end,
        &inner.with_abs_tol(vertical.value.abs() * inner.tol),
    )?;
    // Rounding in the two legs, from the size of what is being summed.
    let magnitude = integrate_fixed(|y| big_f(Complex64::new(c0, y)).norm(), PI / 2.0, PI, 4)
        + integrate_fixed(|c| big_f(Complex64::new(c, PI / 2.0)).norm(), c0, end, 16);
    let pre = r / (2.0 * PI.powi(3) * t).sqrt();
    Ok(QuadResult {
        value: pre * (vertical.value + horizontal.value),
        abs_error_estimate: pre
            * (vertical.abs_error_estimate + horizontal.abs_error_estimate + 8.0 * f64::EPSILON * magnitude),
        evaluations: vertical.evaluations + horizontal.evaluations,
        converged: true,
    })
}

/// `ln sinh b` for `b > 0`, without overflow.
pub(crate) fn ln_sinh(b: f64) -> f64 {
    if b < 20.0 {
        b.sinh().ln()
    } else {
        b - std::f64::consts::LN_2 + (-(-2.0 * b).exp()).ln_1p()
    }
}

/// Root of `r sinh C / C = 1/t` for `rt < 1`, by bisection on `ln`.
fn saddle(r: f64, t: f64) -> f64 {
    let g = |c: f64| (r * c.sinh() / c).ln() + t.ln();
    let (mut lo, mut hi) = (1e-12, 1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Upper bound for `∫₀^{t0} e^{−λt} θ_r(t) dt`, from
/// `e^{−λt} ≤ e^{λ'(t0−t)} e^{−λt}` and the Laplace transform
/// `∫₀^∞ e^{−λt} θ_r(t) dt = I_{√(2λ)}(r)`, minimized over `λ' ≥ 0`.
pub fn theta_laplace_head_bound(r: f64, lambda: f64, t0: f64) -> f64 {
    minimize_log(|lp| lp * t0 + bessel_i_log(((lambda + lp) * 2.0).sqrt(), r), 0.0, 1e6).exp()
}

/// Upper bound for `∫_T^∞ e^{−λt} θ_r(t) dt`:
/// `min_{0 ≤ λ'' < λ} e^{−(λ−λ'')T} I_{√(2λ'')}(r)`.
pub fn theta_laplace_tail_bound(r: f64, lambda: f64, t_end: f64) -> f64 {
    minimize_log(
        |lp| -(lambda - lp) * t_end + bessel_i_log((2.0 * lp).sqrt(), r),
        0.0,
        lambda,
    )
    .exp()
}

pub(crate) fn bessel_i_log(order: f64, r: f64) -> f64 {
    crate::specfun::log_bessel_i(order, r)
}

/// Minimum of a function over `[lo, hi]`: coarse log-spaced scan followed
/// by golden-section refinement. The bounds built on it stay valid at any
/// point, so only the tightness depends on finding the true minimum.
pub(crate) fn minimize_log<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let mut best_x = lo;
    let mut best = f(lo);
    let steps = 400;
    let span = hi - lo;
    let mut grid = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let x = lo + span * 10f64.powf(-9.0 + 9.0 * k as f64 / steps as f64);
        grid.push(x);
    }
    grid.push(hi);
    for &x in &grid {
        let v = f(x);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    let idx = grid.iter().position(|&x| x == best_x).unwrap_or(0);
    let (mut a, mut b) = (grid[idx.saturating_sub(1)], grid[(idx + 1).min(grid.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.min(f(0.5 * (a + b)))
}

/// Joint density of `(A_t, Y_t)` for `Y_t = x_n exp(B_t − μt)` and
/// `A_t = ∫₀ᵗ Y_s² ds`:
/// `(v/x_n)^{−μ} e^{−μ²t/2} (uv)^{−1} exp(−(x_n²+v²)/(2u)) θ_{x_n v/u}(t)`.
pub fn joint_density_a_y(params: &ModelParams, x_n: f64, t: f64, u: f64, v: f64, quad: &QuadSpec) -> Result<f64> {
    if !(x_n > 0.0 && t > 0.0 && u > 0.0 && v > 0.0) {
        return domain(format!(
            "joint density needs positive arguments, got x_n={x_n}, t={t}, u={u}, v={v}"
        ));
    }
    let mu = params.mu();
    let r = x_n * v / u;
    let th = theta_scaled(r, t, quad)?;
    // exp(−(x_n²+v²)/(2u)) θ_r = exp(−(x_n+v)²/(2u)) · e^{r}θ_r.
    let weight = (-(x_n + v).powi(2) / (2.0 * u) - mu * (v / x_n).ln() - mu * mu * t / 2.0).exp();
    Ok(weight * th.value / (u * v))
}

/// Density of `A_∞ = ∫₀^∞ Y_s² ds`:
/// `x_n^{2μ}/(Γ(μ) 2^μ) · e^{−x_n²/(2u)} / u^{1+μ}`, i.e. the law of
/// `x_n²/(2G)` with `G ~ Gamma(μ, 1)`.
pub fn a_infinity_density(params: &ModelParams, x_n: f64, u: f64) -> Result<f64> {
    if !(x_n > 0.0 && u > 0.0) {
        return domain(format!("a_infinity_density needs x_n > 0 and u > 0, got {x_n}, {u}"));
    }
    let mu = params.mu();
    let log = 2.0 * mu * x_n.ln() - ln_gamma(mu) - mu * 2f64.ln() - x_n * x_n / (2.0 * u) - (1.0 + mu) * u.ln();
    Ok(log.exp())
}

/// Transition density of the Bessel process of index `ν < 0` killed at
/// zero, with respect to Lebesgue measure in `w`:
/// `(w/t)(w/x)^ν e^{−(x²+w²)/(2t)} I_{−ν}(xw/t)`.
///
/// Its total mass is the survival probability `P(T₀ > t) < 1`.
pub fn bessel_transition_density(nu: f64, t: f64, x: f64, w: f64) -> Result<f64> {
    if !(nu < 0.0) || !(t > 0.0 && x > 0.0 && w > 0.0) {
        return domain(format!(
            "bessel_transition_density needs nu < 0 and t, x, w > 0, got nu={nu}, t={t}, x={x}, w={w}"
        ));
    }
    let log_pre = (w / t).ln() + nu * (w / x).ln() - (x - w).powi(2) / (2.0 * t);
    Ok(log_pre.exp() * ive(-nu, x * w / t))
}

/// Density of the first hitting time of 0 for Brownian motion started at
/// `x1 > 0`: `x₁/√(2π) · e^{−x₁²/(2u)} u^{−3/2}`.
pub fn exit_time_density(x1: f64, u: f64) -> Result<f64> {
    if !(x1 > 0.0 && u > 0.0) {
        return domain(format!("exit_time_density needs x1 > 0 and u > 0, got {x1}, {u}"));
    }
    Ok(x1 / (2.0 * PI).sqrt() * (-x1 * x1 / (2.0 * u)).exp() * u.powf(-1.5))
}
