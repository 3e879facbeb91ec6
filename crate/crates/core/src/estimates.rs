//! Two-sided envelopes for the Green function and the Poisson kernel of
//! `D`, and a seeded audit of the kernel/envelope ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cosh_distance, squared_distance, squared_distance_reflected, BoundaryPoint, DomainPoint, ModelParams, Wall,
};
use crate::kernels::{green, poisson_boundary, DIAGONAL_GUARD};
use crate::quad::QuadSpec;

/// Envelope of the Green function:
/// `(x_n/y_n)^{μ−ν} · x₁y₁/|x−ȳ|² · (x_n y_n)^{ν−1/2} / (|x−y|^{n−2} (cosh ρ)^{μ+1/2})`.
pub fn green_envelope(params: &ModelParams, x: &DomainPoint, y: &DomainPoint) -> Result<f64> {
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let c = cosh_distance(x, y);
    if c.minus_one() < DIAGONAL_GUARD {
        return Err(Error::DiagonalSingularity {
            cosh_minus_one: c.minus_one(),
        });
    }
    let (mu, nu) = (params.mu(), params.nu());
    let n = params.n() as f64;
    let (xn, yn) = (x.last(), y.last());
    let d2 = squared_distance(x.coords(), y.coords());
    let d2bar = squared_distance_reflected(x.coords(), y.coords());
    let log = (mu - nu) * (xn / yn).ln() + (x.first() * y.first() / d2bar).ln() + (nu - 0.5) * (xn * yn).ln()
        - 0.5 * (n - 2.0) * d2.ln()
        - (mu + 0.5) * c.value().ln();
    Ok(log.exp())
}

/// Envelope of the Poisson kernel.
///
/// * `∂₁D`: `x₁ x_n^{2μ} y_n / (|x−y|^n (|x−y|² + x_n y_n)^{μ+1/2})`
/// * `∂₂D`: `x₁ y₁ x_n^{2μ} / (|x−ȳ|² |x−y|^{2μ+2ν})`
pub fn poisson_envelope(params: &ModelParams, x: &DomainPoint, y: &BoundaryPoint) -> Result<f64> {
    params.check_dim(x.coords())?;
    params.check_dim(y.coords())?;
    let (mu, nu) = (params.mu(), params.nu());
    let n = params.n() as f64;
    let xn = x.last();
    let d2 = squared_distance(x.coords(), y.coords());
    let log = match y.wall() {
        Wall::Wall1 => {
            let yn = y.coords()[params.n() - 1];
            x.first().ln() + 2.0 * mu * xn.ln() + yn.ln() - 0.5 * n * d2.ln() - (mu + 0.5) * (d2 + xn * yn).ln()
        }
        Wall::Wall2 => {
            let d2bar = squared_distance_reflected(x.coords(), y.coords());
            (x.first() * y.coords()[0]).ln() + 2.0 * mu * xn.ln() - d2bar.ln() - (mu + nu) * d2.ln()
        }
    };
    Ok(log.exp())
}

/// Which kernel an audit compares with its envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKernel {
    Green,
    PoissonWall1,
    PoissonWall2,
}

impl AuditKernel {
    pub const ALL: [AuditKernel; 3] = [AuditKernel::Green, AuditKernel::PoissonWall1, AuditKernel::PoissonWall2];
}

/// Box the audit draws points from. The first coordinate is log-uniform
/// on `first`, the last log-uniform on `other`, and the middle ones have a
/// random sign and a log-uniform modulus on `other`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub first: (f64, f64),
    pub other: (f64, f64),
}

impl Default for SamplingBox {
    fn default() -> Self {
        SamplingBox {
            first: (1e-3, 1e2),
            other: (1e-2, 1e2),
        }
    }
}

impl SamplingBox {
    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.first, self.other] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::ConfigInvalid(format!("bad sampling range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp()
}

fn draw_point<R: Rng>(rng: &mut R, n: usize, b: &SamplingBox) -> Vec<f64> {
    let mut c = Vec::with_capacity(n);
    c.push(log_uniform(rng, b.first));
    for _ in 1..n - 1 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        c.push(sign * log_uniform(rng, b.other));
    }
    c.push(log_uniform(rng, b.other));
    c
}

/// Extremes of kernel/envelope over a seeded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioAudit {
    pub kernel: AuditKernel,
    pub n: usize,
    pub mu: f64,
    pub sampling: SamplingBox,
    pub seed: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Samples that entered the extremes.
    pub n_samples: usize,
    /// Draws excluded for `cosh ρ − 1 < 1e−10`.
    pub rejected: usize,
}

impl RatioAudit {
    /// `max_ratio / min_ratio`, the empirical squared comparability constant.
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

/// Draws of `cosh ρ − 1` below this are excluded from audits.
pub const AUDIT_DIAGONAL_EXCLUSION: f64 = 1e-10;

fn sample_ratio(
    params: &ModelParams,
    kernel: AuditKernel,
    sampling: &SamplingBox,
    seed: u64,
    index: u64,
    quad: &QuadSpec,
) -> Result<Option<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = params.n();
    let x = DomainPoint::new(draw_point(&mut rng, n, sampling))?;
    let mut yc = draw_point(&mut rng, n, sampling);
    let (k, e) = match kernel {
        AuditKernel::Green => {
            let y = DomainPoint::new(yc)?;
            if cosh_distance(&x, &y).minus_one() < AUDIT_DIAGONAL_EXCLUSION {
                return Ok(None);
            }
            (green(params, &x, &y, quad)?.value, green_envelope(params, &x, &y)?)
        }
        AuditKernel::PoissonWall1 | AuditKernel::PoissonWall2 => {
            let y = if kernel == AuditKernel::PoissonWall1 {
                yc[0] = 0.0;
                BoundaryPoint::wall1(yc)?
            } else {
                yc[n - 1] = 0.0;
                BoundaryPoint::wall2(yc)?
            };
            (
                poisson_boundary(params, &x, &y, quad)?.value,
                poisson_envelope(params, &x, &y)?,
            )
        }
    };
    Ok(Some(k / e))
}

/// Ratios kernel/envelope for sample indices `0..n_samples`, `None` for
/// excluded draws. Sample `i` uses stream `i` of a ChaCha8 generator
/// seeded with `seed`, so a longer run extends a shorter one.
pub fn audit_samples(
    params: &ModelParams,
    kernel: AuditKernel,
    sampling: &SamplingBox,
    n_samples: usize,
    seed: u64,
    quad: &QuadSpec,
) -> Result<Vec<Option<f64>>> {
    if params.n() < 3 {
        return Err(Error::Domain("envelope audits need n >= 3".into()));
    }
    sampling.validate()?;
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| sample_ratio(params, kernel, sampling, seed, i, quad))
        .collect()
}

/// Summarizes ratios from [`audit_samples`].
pub fn summarize(
    params: &ModelParams,
    kernel: AuditKernel,
    sampling: &SamplingBox,
    seed: u64,
    ratios: &[Option<f64>],
) -> Result<RatioAudit> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut used = 0;
    for r in ratios.iter().flatten() {
        if !r.is_finite() || *r <= 0.0 {
            return Err(Error::Domain(format!("non-positive or non-finite ratio {r}")));
        }
        min = min.min(*r);
        max = max.max(*r);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Domain("every draw was excluded".into()));
    }
    Ok(RatioAudit {
        kernel,
        n: params.n(),
        mu: params.mu(),
        sampling: *sampling,
        seed,
        min_ratio: min,
        max_ratio: max,
        n_samples: used,
        rejected: ratios.len() - used,
    })
}

/// Extremal kernel/envelope ratios over `n_samples` seeded draws.
///
/// ```
/// use halfspace::estimates::{audit_ratio, AuditKernel, SamplingBox};
/// use halfspace::{ModelParams, QuadSpec};
/// let p = ModelParams::new(3, 1.0).unwrap();
/// let a = audit_ratio(&p, AuditKernel::Green, &SamplingBox::default(), 10, 7, &QuadSpec::default()).unwrap();
/// assert!(a.min_ratio > 0.0 && a.max_ratio.is_finite());
/// ```
pub fn audit_ratio(
    params: &ModelParams,
    kernel: AuditKernel,
    sampling: &SamplingBox,
    n_samples: usize,
    seed: u64,
    quad: &QuadSpec,
) -> Result<RatioAudit> {
    if n_samples == 0 {
        return Err(Error::ConfigInvalid("n_samples must be at least 1".into()));
    }
    let ratios = audit_samples(params, kernel, sampling, n_samples, seed, quad)?;
    summarize(params, kernel, sampling, seed, &ratios)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(c: &[f64]) -> DomainPoint {
        DomainPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn green_envelope_matches_cosh_form() {
        // With cosh ρ − 1 = |x−y|²/(2x_n y_n), cosh ρ̄ − 1 = |x−ȳ|²/(2x_n y_n)
        // and cosh ρ̄ − cosh ρ = 2x₁y₁/(x_n y_n), the envelope equals
        // 2^{−(ν+3/2)} (x_n/y_n)^{μ−ν} (cosh ρ̄ − cosh ρ)/(cosh ρ̄ − 1)
        //   · (cosh ρ − 1)^{−(ν−1/2)} (cosh ρ)^{−(μ+1/2)}.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 3..=6 {
            let p = ModelParams::new(n, 0.8).unwrap();
            for _ in 0..200 {
                let x = dp(&draw_point(&mut rng, n, &SamplingBox::default()));
                let y = dp(&draw_point(&mut rng, n, &SamplingBox::default()));
                let c = cosh_distance(&x, &y);
                let cbar = crate::geometry::cosh_distance_reflected(&x, &y);
                let nu = p.nu();
                let want = 2f64.powf(-(nu + 1.5))
                    * (x.last() / y.last()).powf(0.8 - nu)
                    * (2.0 * x.first() * y.first() / (x.last() * y.last()))
                    / cbar.minus_one()
                    * c.minus_one().powf(-(nu - 0.5))
                    * c.value().powf(-1.3);
                let got = green_envelope(&p, &x, &y).unwrap();
                assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn envelopes_vanish_with_the_kernel() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let y = dp(&[0.5, 0.2, 1.0]);
        let near = green_envelope(&p, &dp(&[1e-8, 0.0, 1.0]), &y).unwrap();
        assert!(near < 1e-7);
        let x = dp(&[1.0, 0.0, 1.0]);
        let w2 = poisson_envelope(&p, &x, &BoundaryPoint::wall2(vec![1e-9, 0.0, 0.0]).unwrap()).unwrap();
        assert!(w2 < 1e-8);
        assert!(green_envelope(&p, &x, &x).is_err());
    }

    #[test]
    fn wall1_envelope_near_field() {
        // For |x−y|² ≪ x_n y_n the kernel blows up like (cosh ρ − 1)^{−n/2}.
        let p = ModelParams::new(3, 1.5).unwrap();
        let q = QuadSpec::default();
        let mut prev: Option<f64> = None;
        for k in 2..7 {
            let eps = 10f64.powi(-k);
            let x = dp(&[eps, 0.0, 1.0]);
            let y = BoundaryPoint::wall1(vec![0.0, 0.0, 1.0]).unwrap();
            let r = poisson_boundary(&p, &x, &y, &q).unwrap().value / poisson_envelope(&p, &x, &y).unwrap();
            if let Some(pr) = prev {
                assert!(((r - pr) / pr).abs() < 0.05);
            }
            prev = Some(r);
        }
        // R ~ Γ(3/2)/2 · (z−1)^{−3/2} with z − 1 = ε²/2, so the ratio tends to 1/(2π).
        let want = 1.0 / (2.0 * std::f64::consts::PI);
        assert!(((prev.unwrap() - want) / want).abs() < 1e-3);
    }

    #[test]
    fn audit_smoke_and_determinism() {
        let p = ModelParams::new(3, 1.0).unwrap();
        let q = QuadSpec::default();
        for k in AuditKernel::ALL {
            let a = audit_ratio(&p, k, &SamplingBox::default(), 50, 11, &q).unwrap();
            let b = audit_ratio(&p, k, &SamplingBox::default(), 50, 11, &q).unwrap();
            assert_eq!(a, b);
            assert!(a.min_ratio > 1e-3 && a.max_ratio < 1e3, "{a:?}");
        }
        assert!(audit_ratio(&p, AuditKernel::Green, &SamplingBox::default(), 0, 1, &q).is_err());
        let p2 = ModelParams::new(2, 1.0).unwrap();
        assert!(audit_ratio(&p2, AuditKernel::Green, &SamplingBox::default(), 5, 1, &q).is_err());
    }
}
