//! Inner bound of independent vector quantization followed by scaled
//! transmission of the chosen codewords.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{check_rho, CanonicalInstance, DistortionPair};

/// Membership slack for the (strict) rate-region inequalities, in bits.
pub const REGION_TOL: f64 = 1e-12;

/// Quantizer rates and the correlation they induce between the codewords.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
    pub rho_tilde: f64,
}

impl RatePair {
    pub fn new(rho: f64, r1: f64, r2: f64) -> Result<Self> {
        check_rho(rho, 0.0)?;
        for (name, r) in [("r1", r1), ("r2", r2)] {
            if r.is_nan() || r < 0.0 {
                return Err(invalid(name, format!("rate must be >= 0, got {r}")));
            }
        }
        Ok(Self {
            r1,
            r2,
            rho_tilde: rho_tilde(rho, r1, r2),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqBoundResult {
    pub rates: RatePair,
    pub in_region: bool,
    pub d1: f64,
    pub d2: f64,
}

/// `2^{-2r}`: the fraction of variance a rate-`r` quantizer leaves behind.
pub(crate) fn residual(r: f64) -> f64 {
    (-2.0 * r).exp2()
}

pub fn rho_tilde(rho: f64, r1: f64, r2: f64) -> f64 {
    rho * ((1.0 - residual(r1)) * (1.0 - residual(r2))).sqrt()
}

/// The three right-hand sides of the rate region: `(r1 max, r2 max, sum max)`.
pub fn region_limits(c: &CanonicalInstance, rho_tilde: f64) -> (f64, f64, f64) {
    let n = c.noise_var;
    let k = 1.0 - rho_tilde * rho_tilde;
    let single = |p: f64| 0.5 * ((p * k + n) / (n * k)).log2();
    let sum = 0.5 * ((c.p1 + c.p2 + 2.0 * rho_tilde * (c.p1 * c.p2).sqrt() + n) / (n * k)).log2();
    (single(c.p1), single(c.p2), sum)
}

pub fn in_rate_region(c: &CanonicalInstance, rates: &RatePair) -> bool {
    let (l1, l2, ls) = region_limits(c, rates.rho_tilde);
    rates.r1 <= l1 + REGION_TOL
        && rates.r2 <= l2 + REGION_TOL
        && rates.r1 + rates.r2 <= ls + REGION_TOL
}

/// Distortions reached by reconstructing from both decoded codewords.
pub fn vq_distortions(c: &CanonicalInstance, rates: &RatePair) -> DistortionPair {
    let (x1, x2) = (residual(rates.r1), residual(rates.r2));
    let r2 = c.rho * c.rho;
    let k = 1.0 - rates.rho_tilde * rates.rho_tilde;
    DistortionPair {
        d1: c.sigma_sq * x1 * (1.0 - r2 * (1.0 - x2)) / k,
        d2: c.sigma_sq * x2 * (1.0 - r2 * (1.0 - x1)) / k,
    }
}

pub fn vq_bound(c: &CanonicalInstance, rates: RatePair) -> VqBoundResult {
    let d = vq_distortions(c, &rates);
    VqBoundResult {
        rates,
        in_region: in_rate_region(c, &rates),
        d1: d.d1,
        d2: d.d2,
    }
}

/// Common distortion at common rate `r`; decreasing in `r`.
pub fn symmetric_vq_distortion(sigma_sq: f64, rho: f64, r: f64) -> f64 {
    let x = residual(r);
    let r2 = rho * rho;
    sigma_sq * x * (1.0 - r2 * (1.0 - x)) / (1.0 - r2 * (1.0 - x).powi(2))
}

/// Largest common rate the equal-power region admits at rate `r`.
pub fn symmetric_rate_limit(rho: f64, p: f64, noise_var: f64, r: f64) -> f64 {
    let q = 1.0 - residual(r);
    0.25 * ((2.0 * p * (1.0 + rho * q) + noise_var) / (noise_var * (1.0 - rho * rho * q * q)))
        .log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricVqSolution {
    pub rate: f64,
    pub distortion: f64,
}

const SCAN_CELLS: usize = 1024;
const BISECTION_CAP: usize = 200;

/// Supremum of the self-consistent common rate and its distortion.
///
/// Finds the last downward crossing of `limit(R) - R` on a bracket where the
/// gap is positive at 0 and negative at the right end, then bisects it.
pub fn solve_symmetric_rate(
    sigma_sq: f64,
    rho: f64,
    p: f64,
    noise_var: f64,
    tolerance: f64,
) -> Result<SymmetricVqSolution> {
    check_rho(rho, 0.0)?;
    crate::error::require_positive("p", p)?;
    crate::error::require_positive("noise_var", noise_var)?;
    crate::error::require_positive("sigma_sq", sigma_sq)?;
    let gap = |r: f64| symmetric_rate_limit(rho, p, noise_var, r) - r;

    let mut hi = if rho < 1.0 {
        0.25 * ((2.0 * p * (1.0 + rho) + noise_var) / (noise_var * (1.0 - rho * rho))).log2() + 1.0
    } else {
        1.0
    };
    let mut expansions = 0;
    while gap(hi) >= 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 64 || !hi.is_finite() {
            return Err(Error::NonConvergence {
                what: "symmetric rate bracket",
                iterations: expansions,
            });
        }
    }

    let cell = hi / SCAN_CELLS as f64;
    let mut lo_edge = 0.0;
    let mut hi_edge = cell;
    let mut prev = gap(0.0);
    for k in 1..=SCAN_CELLS {
        let x = cell * k as f64;
        let g = gap(x);
        if prev > 0.0 && g <= 0.0 {
            lo_edge = x - cell;
            hi_edge = x;
        }
        prev = g;
    }

    let (mut a, mut b) = (lo_edge, hi_edge);
    let mut iterations = 0;
    while b - a > tolerance {
        if iterations == BISECTION_CAP {
            return Err(Error::NonConvergence {
                what: "symmetric rate bisection",
                iterations,
            });
        }
        let mid = 0.5 * (a + b);
        if gap(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    let rate = a;
    Ok(SymmetricVqSolution {
        rate,
        distortion: symmetric_vq_distortion(sigma_sq, rho, rate),
    })
}

/// Limit of `sqrt(P/N) * D` as the SNR grows.
pub fn high_snr_asymptote(sigma_sq: f64, rho: f64) -> f64 {
    sigma_sq * ((1.0 - rho) / 2.0).sqrt()
}
