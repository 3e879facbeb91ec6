//! Special functions: Γ, the exponentially scaled modified Bessel function
//! `e^{-s} I_ν(s)`, Bessel-polynomial coefficients and the modified Legendre
//! function of the second kind.
//!
//! # The real Legendre convention
//!
//! Every Legendre value in this crate is the real function
//! `𝒬_b^a(z) = e^{-aπi} Q_b^a(z)`, which is positive on `z > 1` for the
//! parameters the kernels use. Most formulas only need the *reduced ratio*
//!
//! ```text
//! R_b^a(z) = 𝒬_b^a(z) / (z² − 1)^{a/2} = √(π/2) ∫₀^∞ s^{a−1/2} e^{−sz} I_{b+1/2}(s) ds,
//! ```
//!
//! which satisfies `d/dz R_b^a = −R_b^{a+1}`. For half-integer `a = m + 1/2`
//! the ratio is elementary (a finite sum weighted by Bessel-polynomial
//! coefficients); for other orders the integral is evaluated numerically.
//!
//! Arguments close to `z = 1` lose their precision when stored as `z`, so
//! the `*_zm1` variants take `z − 1` directly.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::quad::{gauss_legendre, integrate_adaptive_raw, integrate_semi_infinite_scaled, CompensatedSum, QuadSpec};

const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// Natural logarithm of Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma needs a finite positive argument, got {x}"));
    }
    Ok(libm::lgamma(x))
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub(crate) fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `e^{-s} I_order(s)` for `order ≥ 0`, `s ≥ 0`.
///
/// Power series up to `s = 30` (and beyond it while `4·order² ≥ s`), the
/// large-argument Hankel expansion otherwise.
pub fn bessel_i_scaled(order: f64, s: f64) -> Result<f64> {
    if !(order >= 0.0) || !(s >= 0.0) || !order.is_finite() || s.is_nan() {
        return domain(format!(
            "bessel_i_scaled needs order >= 0 and s >= 0, got ({order}, {s})"
        ));
    }
    Ok(ive(order, s))
}

pub(crate) fn ive(nu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if s.is_infinite() {
        return 0.0;
    }
    if s <= 30.0 || 4.0 * nu * nu >= s {
        ive_series(nu, s)
    } else {
        ive_hankel(nu, s)
    }
}

/// `ln I_order(s)`, finite even where `I_order(s)` underflows.
pub(crate) fn log_bessel_i(nu: f64, s: f64) -> f64 {
    let scaled = ive(nu, s);
    if scaled > 1e-250 {
        return scaled.ln() + s;
    }
    // Leading power-series term times the (well-scaled) ratio sum.
    let half = 0.5 * s;
    let q = half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    while term > 1e-17 * sum {
        term *= q / ((k + 1.0) * (k + nu + 1.0));
        sum += term;
        k += 1.0;
    }
    nu * half.ln() - ln_gamma(nu + 1.0) + sum.ln()
}

fn ive_series(nu: f64, s: f64) -> f64 {
    let half = 0.5 * s;
    let log_t0 = nu * half.ln() - ln_gamma(nu + 1.0) - s;
    let mut term = log_t0.exp();
    if term == 0.0 && log_t0 < -745.0 {
        // The leading term underflows; walk the recurrence in log space
        // until terms become representable.
        let mut log_term = log_t0;
        let mut sum = 0.0;
        let q = half * half;
        let mut k = 0.0;
        loop {
            let t = log_term.exp();
            sum += t;
            let ratio = q / ((k + 1.0) * (k + nu + 1.0));
            if k > half && (t <= sum * 1e-17 || ratio < 1.0 && t == 0.0 && sum > 0.0) {
                break;
            }
            if k > 4.0 * s + 200.0 {
                break;
            }
            log_term += ratio.ln();
            k += 1.0;
        }
        return sum;
    }
    let q = half * half;
    let mut sum = CompensatedSum::new();
    let mut k = 0.0;
    loop {
        sum.add(term);
        term *= q / ((k + 1.0) * (k + nu + 1.0));
        k += 1.0;
        if k > half && term <= 1e-17 * sum.value() {
            break;
        }
        if k > 4.0 * s + 500.0 {
            break;
        }
    }
    sum.value()
}

fn ive_hankel(nu: f64, s: f64) -> f64 {
    let mu4 = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu4 - odd * odd) / (k * 8.0 * s);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    sum / (2.0 * PI * s).sqrt()
}

/// Bessel-polynomial coefficient `a(m, k) = (m+k)! / ((m−k)! k! 2^k)`,
/// computed exactly.
pub fn bessel_poly_coeff(m: u32, k: u32) -> Result<u128> {
    if k > m {
        return domain(format!("bessel_poly_coeff needs k <= m, got m={m}, k={k}"));
    }
    // a(m,k) = C(m+k, 2k) · (2k−1)!!
    let (m, k) = (m as u128, k as u128);
    let mut binom: u128 = 1;
    for j in 0..2 * k {
        binom = binom
            .checked_mul(m + k - j)
            .ok_or_else(|| Error::Overflow(format!("a({m},{k})")))?
            / (j + 1);
    }
    let mut dfact: u128 = 1;
    let mut j = 1;
    while j < 2 * k {
        dfact = dfact
            .checked_mul(j)
            .ok_or_else(|| Error::Overflow(format!("a({m},{k})")))?;
        j += 2;
    }
    binom
        .checked_mul(dfact)
        .ok_or_else(|| Error::Overflow(format!("a({m},{k})")))
}

/// Order of a modified Legendre function: half-integer orders have a closed
/// form, everything else goes through quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegendreOrder {
    /// `a = m + 1/2`.
    HalfInteger(u32),
    General(f64),
}

impl LegendreOrder {
    /// Picks the closed form whenever `a` is a half-integer.
    pub fn from_order(a: f64) -> Self {
        let twice = 2.0 * a;
        if a > 0.0 && (twice - twice.round()).abs() < 1e-12 && (twice.round() as i64) % 2 == 1 {
            LegendreOrder::HalfInteger(((twice.round() as i64 - 1) / 2) as u32)
        } else {
            LegendreOrder::General(a)
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            LegendreOrder::HalfInteger(m) => m as f64 + 0.5,
            LegendreOrder::General(a) => a,
        }
    }

    pub fn raised(&self) -> Self {
        match *self {
            LegendreOrder::HalfInteger(m) => LegendreOrder::HalfInteger(m + 1),
            LegendreOrder::General(a) => LegendreOrder::General(a + 1.0),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, LegendreOrder::HalfInteger(_))
    }
}

fn check_zm1(zm1: f64) -> Result<()> {
    if !(zm1 > 0.0) || !zm1.is_finite() {
        return domain(format!("Legendre argument must satisfy z > 1, got z - 1 = {zm1}"));
    }
    Ok(())
}

/// `√(z²−1)` and `z − √(z²−1)` from `z − 1` without cancellation.
fn sqrt_and_w(zm1: f64) -> (f64, f64) {
    let z = 1.0 + zm1;
    let root = (zm1 * (zm1 + 2.0)).sqrt();
    (root, 1.0 / (z + root))
}

/// Elementary sum behind the half-integer closed form: returns
/// `R_b^{m+1/2}(z)`.
fn ratio_half_integer(m: u32, b: f64, zm1: f64) -> Result<f64> {
    if !(b + m as f64 + 1.5 > 0.0) {
        return domain(format!("need b + m + 3/2 > 0, got b={b}, m={m}"));
    }
    let (root, w) = sqrt_and_w(zm1);
    let ln_root = root.ln();
    let ln_w = w.ln();
    let mut sum = CompensatedSum::new();
    for k in 0..=m {
        let coeff = bessel_poly_coeff(m, k)? as f64;
        // Γ(b+m+3/2)/Γ(b+3/2+k) as a finite product.
        let mut ratio = 1.0;
        for j in k..m {
            ratio *= b + 1.5 + j as f64;
        }
        let power = (b + 0.5 + k as f64) * ln_w - (0.5 + k as f64 + m as f64 + 0.5) * ln_root;
        let term = coeff * ratio * power.exp();
        if !term.is_finite() {
            return Err(Error::Overflow(format!("R_b^(m+1/2) with m={m}, b={b}, z-1={zm1}")));
        }
        sum.add(term);
    }
    Ok(SQRT_HALF_PI * sum.value())
}

/// `𝒬_b^{m+1/2}(z)` in closed form.
///
/// ```
/// use halfspace::specfun::legendre_q_real;
/// // m = 0, b = 1/2, z = cosh 1 gives √(π/2) e^{-1} / √(sinh 1).
/// let z = 1f64.cosh();
/// let expected = (std::f64::consts::PI / 2.0).sqrt() * (-1f64).exp() / 1f64.sinh().sqrt();
/// assert!((legendre_q_real(0, 0.5, z).unwrap() - expected).abs() < 1e-14);
/// ```
pub fn legendre_q_real(m: u32, b: f64, z: f64) -> Result<f64> {
    legendre_q_real_zm1(m, b, z - 1.0)
}

pub fn legendre_q_real_zm1(m: u32, b: f64, zm1: f64) -> Result<f64> {
    check_zm1(zm1)?;
    let (root, _) = sqrt_and_w(zm1);
    let r = ratio_half_integer(m, b, zm1)?;
    let v = r * root.powf(m as f64 + 0.5);
    if !v.is_finite() {
        return Err(Error::Overflow(format!("Q with m={m}, b={b}")));
    }
    Ok(v)
}

fn check_oracle_params(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0) || !(b + 0.5 >= 0.0) || !(a + b > -1.0) {
        return domain(format!(
            "Legendre integral needs a >= 0, b >= -1/2 and a + b > -1, got a={a}, b={b}"
        ));
    }
    Ok(())
}

/// Integral representation of the reduced ratio, `R_b^a(z)`, with its
/// quadrature error.
///
/// The integral runs over `[0, s_max]` split at geometric break points, plus
/// a separately integrated tail beyond `s_max`.
pub fn legendre_ratio_oracle_zm1(a: f64, b: f64, zm1: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    check_zm1(zm1)?;
    check_oracle_params(a, b)?;
    let order = b + 0.5;
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let v = (-(s * zm1)).exp() * ive(order, s);
        if v == 0.0 {
            0.0
        } else {
            v * s.powf(a - 0.5)
        }
    };
    integrate_laplace_like(integrand, a, zm1, quad).map(|(v, e)| (SQRT_HALF_PI * v, SQRT_HALF_PI * e))
}

/// `R_b^a(x) − R_b^a(y)` for `1 < x ≤ y`, computed as one integral with
/// the positive weight `e^{−s x}(1 − e^{−s(y−x)})`.
pub fn legendre_ratio_oracle_difference_zm1(a: f64, b: f64, xm1: f64, ym1: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    check_zm1(xm1)?;
    check_zm1(ym1)?;
    check_oracle_params(a, b)?;
    if ym1 < xm1 {
        return domain("difference needs x <= y");
    }
    let gap = ym1 - xm1;
    let order = b + 0.5;
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let v = (-(s * xm1)).exp() * ive(order, s) * -(-(s * gap)).exp_m1();
        if v == 0.0 {
            0.0
        } else {
            v * s.powf(a - 0.5)
        }
    };
    integrate_laplace_like(integrand, a, xm1, quad).map(|(v, e)| (SQRT_HALF_PI * v, SQRT_HALF_PI * e))
}

/// Integrates a function with Laplace-type decay `e^{-s·zm1}` over
/// `[0, ∞)`.
fn integrate_laplace_like<F: Fn(f64) -> f64>(f: F, a: f64, zm1: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    let inner = quad.tightened();
    let s_max = ((1.0 / quad.tol).ln() + (a + 2.0) * (1.0 / zm1).ln_1p()) / zm1;
    // Break points 0, s0, 8·s0, 64·s0, … up to s_max.
    let mut breaks = vec![0.0];
    let mut edge = (1.0f64).min(s_max);
    while edge < s_max {
        breaks.push(edge);
        edge *= 8.0;
    }
    breaks.push(s_max);
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    let mut all_converged = true;
    for pair in breaks.windows(2) {
        let r = integrate_adaptive_raw(&f, pair[0], pair[1], &inner);
        all_converged &= r.converged;
        value.add(r.value);
        error += r.abs_error_estimate;
    }
    let body = value.value();
    let tail = integrate_semi_infinite_scaled(&f, s_max, 1.0 / zm1, &inner.with_abs_tol(body.abs() * inner.tol))?;
    value.add(tail.value);
    error += tail.abs_error_estimate;
    let total = value.value();
    if !all_converged || error > quad.tol * total.abs() + quad.abs_tol {
        return Err(Error::NonConvergence {
            value: total,
            abs_error: error,
        });
    }
    Ok((total, error))
}

/// `𝒬_b^a(z)` through its integral representation; valid for any order
/// `a ≥ 0`. Returns the value and its error estimate.
pub fn legendre_q_oracle(a: f64, b: f64, z: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    legendre_q_oracle_zm1(a, b, z - 1.0, quad)
}

pub fn legendre_q_oracle_zm1(a: f64, b: f64, zm1: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    let (r, e) = legendre_ratio_oracle_zm1(a, b, zm1, quad)?;
    let (root, _) = sqrt_and_w(zm1);
    let scale = root.powf(a);
    Ok((r * scale, e * scale))
}

/// Reduced ratio `R_b^a(z)` by whichever route the order allows. The
/// error is zero on the closed-form route.
pub fn legendre_ratio_zm1(order: LegendreOrder, b: f64, zm1: f64, quad: &QuadSpec) -> Result<(f64, f64)> {
    match order {
        LegendreOrder::HalfInteger(m) => {
            check_zm1(zm1)?;
            Ok((ratio_half_integer(m, b, zm1)?, 0.0))
        }
        LegendreOrder::General(a) => legendre_ratio_oracle_zm1(a, b, zm1, quad),
    }
}

/// `R_b^a(x) − R_b^a(y)` for `1 < x ≤ y` without cancellation.
///
/// Closed form: when `y` is close to `x` the difference is integrated as
/// `∫_x^y R_b^{a+1}`, otherwise subtracted directly. General orders use the
/// single-integral form of the oracle.
pub fn legendre_ratio_difference_zm1(
    order: LegendreOrder,
    b: f64,
    xm1: f64,
    ym1: f64,
    quad: &QuadSpec,
) -> Result<(f64, f64)> {
    check_zm1(xm1)?;
    check_zm1(ym1)?;
    if ym1 < xm1 {
        return domain(format!("difference needs x <= y, got x-1={xm1}, y-1={ym1}"));
    }
    if ym1 == xm1 {
        return Ok((0.0, 0.0));
    }
    match order {
        LegendreOrder::HalfInteger(m) => {
            let gap = ym1 - xm1;
            if gap <= 0.5 * xm1 {
                let (nodes, weights) = gauss_legendre(24);
                let half = 0.5 * gap;
                let mut sum = CompensatedSum::new();
                for (t, w) in nodes.iter().zip(&weights) {
                    let zm1 = xm1 + half * (1.0 + t);
                    sum.add(w * ratio_half_integer(m + 1, b, zm1)?);
                }
                Ok((sum.value() * half, 0.0))
            } else {
                let rx = ratio_half_integer(m, b, xm1)?;
                let ry = ratio_half_integer(m, b, ym1)?;
                Ok((rx - ry, 0.0))
            }
        }
        LegendreOrder::General(a) => legendre_ratio_oracle_difference_zm1(a, b, xm1, ym1, quad),
    }
}

/// `lim_{z→1⁺} (z−1)^{a/2} 𝒬_b^a(z) = 2^{a/2−1} Γ(a)`.
pub fn legendre_limit_near_one(a: f64) -> f64 {
    2f64.powf(0.5 * a - 1.0) * gamma(a)
}

/// `lim_{z→∞} z^{b+1} 𝒬_b^a(z) = √π Γ(b+a+1) / (2^{b+1} Γ(b+3/2))`.
pub fn legendre_limit_at_infinity(a: f64, b: f64) -> f64 {
    (PI.sqrt() * (ln_gamma(b + a + 1.0) - ln_gamma(b + 1.5)).exp()) / 2f64.powf(b + 1.0)
}

/// Comparison envelope `(z−1)^{−a} z^{−(b+1)}` for `R_b^a(z)`.
pub fn legendre_envelope(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(z > 1.0) {
        return domain(format!("legendre_envelope needs z > 1, got {z}"));
    }
    Ok((z - 1.0).powf(-a) * z.powf(-(b + 1.0)))
}

/// Envelope `(y−x)/(y−1) · (x−1)^{−a} x^{−(b+1)}` for `R_b^a(x) − R_b^a(y)`.
pub fn legendre_diff_envelope(a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(x > 1.0 && y > x) {
        return domain(format!("legendre_diff_envelope needs 1 < x < y, got x={x}, y={y}"));
    }
    Ok((y - x) / (y - 1.0) * (x - 1.0).powf(-a) * x.powf(-(b + 1.0)))
}

/// Envelope `(y−x)/(y x^a)` for `x^{−a} − y^{−a}`.
pub fn power_diff_envelope(a: f64, x: f64, y: f64) -> Result<f64> {
    if !(a > 0.0 && x > 0.0 && y > x) {
        return domain(format!(
            "power_diff_envelope needs a > 0 and 0 < x < y, got a={a}, x={x}, y={y}"
        ));
    }
    Ok((y - x) / (y * x.powf(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn log_gamma_values() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert!((log_gamma(0.5).unwrap() - PI.sqrt().ln()).abs() < 1e-15);
        assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-14);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn log_gamma_against_factorials() {
        let mut fact = 1.0f64;
        for k in 1..40 {
            fact *= k as f64;
            let lg = log_gamma(k as f64 + 1.0).unwrap();
            assert!((lg - fact.ln()).abs() <= 1e-13 * fact.ln().max(1.0), "k={k}");
        }
    }

    #[test]
    fn bessel_edge_values() {
        assert_eq!(bessel_i_scaled(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(2.0, 0.0).unwrap(), 0.0);
        assert!(bessel_i_scaled(-1.0, 1.0).is_err());
        assert!(bessel_i_scaled(1.0, -1.0).is_err());
    }

    #[test]
    fn bessel_half_orders_match_elementary_forms() {
        // I_{1/2}(x) = √(2/(πx)) sinh x, I_{3/2}(x) = √(2/(πx)) (cosh x − sinh x / x).
        for &x in &[1e-3, 0.3, 1.0, 5.0, 29.0, 31.0, 80.0, 400.0] {
            let pre = (2.0 / (PI * x)).sqrt();
            let half = pre * (-(-2.0 * x).exp_m1()) * 0.5;
            let three_half = pre * 0.5 * ((1.0 + (-2.0 * x).exp()) - (1.0 - (-2.0 * x).exp()) / x);
            assert!(rel(ive(0.5, x), half) < 1e-13, "x={x}");
            if x > 0.1 {
                assert!(rel(ive(1.5, x), three_half) < 1e-12, "x={x}");
            }
        }
        assert!(rel(ive(0.5, 1.0), 0.344_951_313_888_244_6) < 1e-14);
    }

    #[test]
    fn bessel_integer_reference_values() {
        // I₀(1), I₁(1), I₀(50)·e^{-50}, I₂(10)·e^{-10}.
        assert!(rel(ive(0.0, 1.0) * 1f64.exp(), 1.266_065_877_752_008_4) < 1e-14);
        assert!(rel(ive(1.0, 1.0) * 1f64.exp(), 0.565_159_103_992_485_1) < 1e-14);
        assert!(rel(ive(0.0, 50.0), 0.056_561_626_647_454_19) < 1e-12);
        assert!(rel(ive(2.0, 10.0) * 10f64.exp(), 2281.518967726004) < 1e-12);
    }

    #[test]
    fn log_bessel_survives_underflow() {
        assert!((log_bessel_i(1.0, 2.0) - (ive(1.0, 2.0).ln() + 2.0)).abs() < 1e-14);
        // I_ν(1) ~ (1/2)^ν / Γ(ν+1) for large ν.
        let nu = 400.0;
        let want = -nu * 2f64.ln() - ln_gamma(nu + 1.0);
        assert!((log_bessel_i(nu, 1.0) - want).abs() < 1e-3);
    }

    #[test]
    fn bessel_decreases_in_order() {
        for &s in &[0.1, 1.0, 10.0, 35.0, 100.0] {
            let mut prev = f64::INFINITY;
            for k in 0..12 {
                let v = ive(0.37 * k as f64, s);
                assert!(v <= prev, "s={s}, k={k}");
                assert!(v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn bessel_poly_coefficients() {
        assert_eq!(bessel_poly_coeff(0, 0).unwrap(), 1);
        assert_eq!(bessel_poly_coeff(2, 1).unwrap(), 3);
        assert_eq!(bessel_poly_coeff(2, 2).unwrap(), 3);
        assert_eq!(bessel_poly_coeff(3, 3).unwrap(), 15);
        assert_eq!(bessel_poly_coeff(4, 2).unwrap(), 45);
        assert!(bessel_poly_coeff(1, 2).is_err());
        // Against the factorial definition.
        let fact = |n: u32| (1..=n as u128).product::<u128>();
        for m in 0..12 {
            for k in 0..=m {
                let direct = fact(m + k) / (fact(m - k) * fact(k) * (1u128 << k));
                assert_eq!(bessel_poly_coeff(m, k).unwrap(), direct);
            }
        }
    }

    #[test]
    fn legendre_m0_elementary() {
        let z = 1f64.cosh();
        let v = legendre_q_real(0, 0.5, z).unwrap();
        assert!((v - 0.425_313_673_011_570_8).abs() < 1e-14);
        assert!(legendre_q_real(0, 0.5, 1.0).is_err());
        assert!(legendre_q_real(0, 0.5, 0.5).is_err());
    }

    #[test]
    fn legendre_closed_form_matches_oracle() {
        let quad = QuadSpec::default().with_tol(1e-12);
        for m in 0..4u32 {
            for &b in &[-0.3, 0.0, 0.5, 1.2, 2.0] {
                for &z in &[1.05, 1.5, 3.0, 20.0, 500.0] {
                    let closed = legendre_q_real(m, b, z).unwrap();
                    let (oracle, _) = legendre_q_oracle(m as f64 + 0.5, b, z, &quad).unwrap();
                    assert!(rel(closed, oracle) < 1e-9, "m={m} b={b} z={z}: {closed} vs {oracle}");
                }
            }
        }
    }

    #[test]
    fn legendre_oracle_is_decreasing() {
        let quad = QuadSpec::default();
        let (v2, _) = legendre_q_oracle(1.0, 0.5, 2.0, &quad).unwrap();
        let (v3, _) = legendre_q_oracle(1.0, 0.5, 3.0, &quad).unwrap();
        assert!(v2 > 0.0 && v3 < v2);
    }

    #[test]
    fn legendre_oracle_near_one_behaves_like_pole() {
        // a = 1: (z−1)^a R → Γ(a)/2.
        let quad = QuadSpec::default();
        let zm1 = 1e-5;
        let (r, _) = legendre_ratio_oracle_zm1(1.0, 0.5, zm1, &quad).unwrap();
        assert!(rel(r * zm1, 0.5) < 1e-2);
    }

    #[test]
    fn legendre_asymptotics() {
        for m in 0..3u32 {
            let a = m as f64 + 0.5;
            for &b in &[0.0, 0.5, 1.7] {
                let zm1: f64 = 1e-6;
                let near = zm1.powf(a / 2.0) * legendre_q_real_zm1(m, b, zm1).unwrap();
                assert!(rel(near, legendre_limit_near_one(a)) < 1e-2, "near m={m} b={b}");
                let z: f64 = 1e6;
                let far = z.powf(b + 1.0) * legendre_q_real(m, b, z).unwrap();
                assert!(rel(far, legendre_limit_at_infinity(a, b)) < 1e-2, "far m={m} b={b}");
            }
        }
    }

    #[test]
    fn derivative_identity_lowers_ratio_by_next_order() {
        for m in 0..3u32 {
            for &b in &[0.0, 0.5, 2.0] {
                for &z in &[1.2, 2.0, 7.0] {
                    let h = 1e-4 * (z - 1.0);
                    let f = |x: f64| ratio_half_integer(m, b, x - 1.0).unwrap();
                    let deriv = (f(z + h) - f(z - h)) / (2.0 * h);
                    let next = ratio_half_integer(m + 1, b, z - 1.0).unwrap();
                    assert!(rel(-deriv, next) < 1e-6, "m={m} b={b} z={z}");
                }
            }
        }
    }

    #[test]
    fn difference_routes_agree() {
        let quad = QuadSpec::default().with_tol(1e-12);
        for m in 0..3u32 {
            let order = LegendreOrder::HalfInteger(m);
            for &(x, y) in &[(0.2, 0.2001), (0.2, 0.25), (0.2, 3.0), (5.0, 5.0 + 1e-7)] {
                let (closed, _) = legendre_ratio_difference_zm1(order, 0.5, x, y, &quad).unwrap();
                let (quadr, _) = legendre_ratio_oracle_difference_zm1(m as f64 + 0.5, 0.5, x, y, &quad).unwrap();
                assert!(rel(closed, quadr) < 1e-8, "m={m} x={x} y={y}: {closed} vs {quadr}");
            }
        }
    }

    #[test]
    fn order_dispatch() {
        assert_eq!(LegendreOrder::from_order(0.5), LegendreOrder::HalfInteger(0));
        assert_eq!(LegendreOrder::from_order(2.5), LegendreOrder::HalfInteger(2));
        assert_eq!(LegendreOrder::from_order(1.0), LegendreOrder::General(1.0));
        assert_eq!(LegendreOrder::from_order(0.0), LegendreOrder::General(0.0));
    }

    #[test]
    fn envelopes() {
        assert!((legendre_envelope(1.0, 0.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((legendre_diff_envelope(1.0, 0.0, 2.0, 3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(legendre_diff_envelope(1.0, 0.0, 2.0, 2.0).is_err());
        assert!(legendre_diff_envelope(1.0, 0.0, 1.0, 2.0).is_err());
        let e = power_diff_envelope(1.0, 1.0, 2.0).unwrap();
        assert!((e - 0.5).abs() < 1e-15);
        assert!(power_diff_envelope(1.0, 2.0, 1.0).is_err());
        // y = 2x, a = 1: both sides equal 1/(2x).
        let x = 0.7;
        assert!((power_diff_envelope(1.0, x, 2.0 * x).unwrap() - (1.0 / x - 1.0 / (2.0 * x))).abs() < 1e-15);
        // y → x: ratio of true difference to envelope tends to a.
        let a = 2.3;
        let y = x * (1.0 + 1e-7);
        let ratio = (x.powf(-a) - y.powf(-a)) / power_diff_envelope(a, x, y).unwrap();
        assert!((ratio - a).abs() < 1e-5);
        // The ratio envelope tends to z^{-(a+b+1)} at infinity.
        let z = 1e8;
        assert!(rel(legendre_envelope(1.5, 0.5, z).unwrap(), z.powf(-3.0)) < 1e-7);
    }
}
