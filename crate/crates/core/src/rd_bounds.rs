//! Outer bound: the rate-distortion function of the bivariate source against
//! the MAC capacity with fully coherent inputs.
//!
//! The closed form is evaluated on the ordered pair `d1 <= d2`. The
//! rate-distortion function is symmetric when the variances are equal, and on
//! the ordered pair the three case sets partition the domain. An independent
//! route ([`waterfill_oracle_rate`]) searches over a scaling of the second
//! component followed by reverse waterfilling on the decorrelated pair.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CanonicalInstance, DistortionPair};

/// Slack, in bits, when comparing a rate-distortion value against capacity.
pub const RATE_COMPARISON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdCaseTag {
    /// Both distortion constraints bind with independent errors.
    BothSmall,
    /// Both constraints bind with correlated errors.
    Intermediate,
    /// Only the smaller distortion constraint binds.
    OneInactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdCase {
    pub tag: RdCaseTag,
    /// Clamped to the source variance and ordered so that `d1 <= d2`.
    pub canonical_pair: DistortionPair,
    pub swapped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterBoundResult {
    pub rd_rate: f64,
    pub capacity_term: f64,
    pub achievable_possible: bool,
}

fn check_distortions(d: DistortionPair) -> Result<()> {
    for (name, v) in [("d1", d.d1), ("d2", d.d2)] {
        if v.is_nan() || v <= 0.0 {
            return Err(invalid(name, format!("distortion must be > 0, got {v}")));
        }
    }
    Ok(())
}

/// Lower edge of the intermediate set as a function of the smaller distortion.
pub fn both_small_edge(sigma_sq: f64, rho: f64, d1: f64) -> f64 {
    let r2 = rho * rho;
    if r2 == 0.0 {
        sigma_sq
    } else if d1 >= sigma_sq {
        f64::NEG_INFINITY
    } else {
        (sigma_sq * (1.0 - r2) - d1) * sigma_sq / (sigma_sq - d1)
    }
}

/// Upper edge of the intermediate set as a function of the smaller distortion.
pub fn one_inactive_edge(sigma_sq: f64, rho: f64, d1: f64) -> f64 {
    let r2 = rho * rho;
    sigma_sq * (1.0 - r2) + r2 * d1
}

pub fn classify_case(c: &CanonicalInstance, d: DistortionPair) -> Result<RdCase> {
    check_distortions(d)?;
    let s = c.sigma_sq;
    let (a, b) = (d.d1.min(s), d.d2.min(s));
    let swapped = a > b;
    let (d1, d2) = if swapped { (b, a) } else { (a, b) };
    let tag = if d2 < both_small_edge(s, c.rho, d1) {
        RdCaseTag::BothSmall
    } else if d2 > one_inactive_edge(s, c.rho, d1) {
        RdCaseTag::OneInactive
    } else {
        RdCaseTag::Intermediate
    };
    Ok(RdCase {
        tag,
        canonical_pair: DistortionPair { d1, d2 },
        swapped,
    })
}

/// Evaluates one case expression on an ordered pair, without clamping.
///
/// Exposed so that continuity across case boundaries can be checked by
/// evaluating both neighbouring expressions at the same point.
pub fn case_formula(tag: RdCaseTag, sigma_sq: f64, rho: f64, d1: f64, d2: f64) -> f64 {
    let s = sigma_sq;
    let r2 = rho * rho;
    match tag {
        RdCaseTag::BothSmall => 0.5 * (s * s * (1.0 - r2) / (d1 * d2)).log2(),
        RdCaseTag::Intermediate => {
            let cross = rho * s - ((s - d1) * (s - d2)).sqrt();
            0.5 * (s * s * (1.0 - r2) / (d1 * d2 - cross * cross)).log2()
        }
        RdCaseTag::OneInactive => 0.5 * (s / d1.min(d2)).log2(),
    }
}

/// R(D1, D2) in bits. Distortions above the variance are clamped to it.
pub fn rd_rate(c: &CanonicalInstance, d: DistortionPair) -> Result<f64> {
    let case = classify_case(c, d)?;
    let DistortionPair { d1, d2 } = case.canonical_pair;
    // With rho = 1 the components coincide and only the smaller target
    // matters; the intermediate expression degenerates to 0/0 on d1 = d2.
    let tag = if c.rho >= 1.0 {
        RdCaseTag::OneInactive
    } else {
        case.tag
    };
    Ok(case_formula(tag, c.sigma_sq, c.rho, d1, d2).max(0.0))
}

/// Capacity of the channel with the inputs' correlation at its maximum, in bits.
pub fn capacity_term(c: &CanonicalInstance) -> f64 {
    let coherent = c.p1 + c.p2 + 2.0 * c.rho * (c.p1 * c.p2).sqrt();
    0.5 * (1.0 + coherent / c.noise_var).log2()
}

/// `achievable_possible == false` means `d` is provably unachievable.
pub fn check_necessary_condition(
    c: &CanonicalInstance,
    d: DistortionPair,
) -> Result<OuterBoundResult> {
    let rd = rd_rate(c, d)?;
    let cap = capacity_term(c);
    Ok(OuterBoundResult {
        rd_rate: rd,
        capacity_term: cap,
        achievable_possible: cap >= rd - RATE_COMPARISON_TOL,
    })
}

/// Smallest common distortion `D` the outer bound allows with equal powers.
pub fn symmetric_outer_bound(sigma_sq: f64, rho: f64, p: f64, noise_var: f64) -> f64 {
    let threshold = if rho >= 1.0 {
        f64::INFINITY
    } else {
        rho / (1.0 - rho * rho)
    };
    if p / noise_var <= threshold {
        symmetric_outer_low_snr(sigma_sq, rho, p, noise_var)
    } else {
        symmetric_outer_high_snr(sigma_sq, rho, p, noise_var)
    }
}

/// Branch of [`symmetric_outer_bound`] at or below the threshold SNR.
pub fn symmetric_outer_low_snr(sigma_sq: f64, rho: f64, p: f64, noise_var: f64) -> f64 {
    sigma_sq * (p * (1.0 - rho * rho) + noise_var) / (2.0 * p * (1.0 + rho) + noise_var)
}

/// Branch of [`symmetric_outer_bound`] above the threshold SNR.
pub fn symmetric_outer_high_snr(sigma_sq: f64, rho: f64, p: f64, noise_var: f64) -> f64 {
    sigma_sq * ((1.0 - rho * rho) * noise_var / (2.0 * p * (1.0 + rho) + noise_var)).sqrt()
}

// ---------------------------------------------------------------------------
// Reverse-waterfilling oracle
// ---------------------------------------------------------------------------

/// The pair `(S1, c*S2)` rotated onto its eigenbasis.
#[derive(Debug, Clone, Copy)]
struct ScaledSource {
    /// Eigenvalues, larger first.
    lambda: [f64; 2],
    /// Squared loadings of `S1` on each eigen-component.
    w1: [f64; 2],
    /// Squared loadings of `c*S2` on each eigen-component.
    w2: [f64; 2],
    c_sq: f64,
}

impl ScaledSource {
    fn new(sigma_sq: f64, rho: f64, c: f64) -> Self {
        let c_sq = c * c;
        let a = sigma_sq;
        let b = c * rho * sigma_sq;
        let d = c_sq * sigma_sq;
        let disc = ((1.0 - c_sq).powi(2) + 4.0 * c_sq * rho * rho).sqrt();
        let hi = sigma_sq * ((1.0 + c_sq) + disc) / 2.0;
        // product of eigenvalues is the determinant; avoids cancellation
        let lo = (a * d - b * b).max(0.0) / hi;
        let (p, q) = if b == 0.0 {
            if a >= d {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        } else {
            let (x, y) = (b, hi - a);
            let norm = x.hypot(y);
            (x / norm, y / norm)
        };
        Self {
            lambda: [hi, lo],
            w1: [p * p, q * q],
            w2: [q * q, p * p],
            c_sq,
        }
    }

    fn eigenvalues(sigma_sq: f64, rho: f64, c: f64) -> [f64; 2] {
        Self::new(sigma_sq, rho, c).lambda
    }

    /// Largest water level whose error on the component with loadings `w`
    /// stays at or below `target`.
    fn max_level(&self, w: [f64; 2], target: f64) -> f64 {
        let [hi, lo] = self.lambda;
        if w[0] * hi + w[1] * lo <= target {
            hi
        } else if target <= lo {
            target
        } else {
            ((target - w[1] * lo) / w[0]).min(hi)
        }
    }

    fn rate_at(&self, theta: f64) -> f64 {
        self.lambda
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| 0.5 * (l / theta.min(l)).log2())
            .sum()
    }

    /// Per-component distortions in the original (unscaled) coordinates.
    fn distortions_at(&self, theta: f64) -> (f64, f64) {
        let dv = [theta.min(self.lambda[0]), theta.min(self.lambda[1])];
        let d1 = self.w1[0] * dv[0] + self.w1[1] * dv[1];
        let d2 = (self.w2[0] * dv[0] + self.w2[1] * dv[1]) / self.c_sq;
        (d1, d2)
    }

    /// Minimal rate meeting both targets within this scaling's waterfilling family.
    fn rate_for(&self, d1: f64, d2: f64) -> f64 {
        let theta = self
            .max_level(self.w1, d1)
            .min(self.max_level(self.w2, self.c_sq * d2));
        self.rate_at(theta)
    }
}

/// Eigenvalues of the covariance of `(S1, c*S2)`, larger first.
pub fn scaled_source_eigenvalues(sigma_sq: f64, rho: f64, c: f64) -> [f64; 2] {
    ScaledSource::eigenvalues(sigma_sq, rho, c)
}

/// Distortions and rate of reverse waterfilling at `level` on `(S1, c*S2)`,
/// with the second distortion mapped back to the units of `S2`.
pub fn waterfill_point(sigma_sq: f64, rho: f64, c: f64, level: f64) -> (DistortionPair, f64) {
    let src = ScaledSource::new(sigma_sq, rho, c);
    let (d1, d2) = src.distortions_at(level);
    (DistortionPair { d1, d2 }, src.rate_at(level))
}

const LOG_SCALE_RANGE: (f64, f64) = (-8.0, 8.0);
const SCAN_POINTS: usize = 64;
const ORACLE_MAX_ITERATIONS: usize = 200;

/// Minimal rate for `d` found numerically: search over the scaling `c` of the
/// second component, reverse-waterfill the scaled pair, keep the cheapest
/// water level meeting both targets.
pub fn waterfill_oracle_rate(
    c: &CanonicalInstance,
    d: DistortionPair,
    tolerance: f64,
) -> Result<f64> {
    check_distortions(d)?;
    let s = c.sigma_sq;
    if d.d1 > s * (1.0 + 1e-12) || d.d2 > s * (1.0 + 1e-12) {
        return Err(invalid("d", "oracle targets must not exceed the variance"));
    }
    let (d1, d2) = (d.d1.min(s), d.d2.min(s));
    let rate = |log_c: f64| ScaledSource::new(s, c.rho, log_c.exp()).rate_for(d1, d2);

    // Coarse scan guards the golden-section search against a poor bracket.
    let (lo, hi) = LOG_SCALE_RANGE;
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| rate(lo + step * k as f64))
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = lo + step * (best + 1).min(SCAN_POINTS - 1) as f64;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (rate(x1), rate(x2));
    let mut converged = false;
    for _ in 0..ORACLE_MAX_ITERATIONS {
        if b - a < 1e-12 || ((f1 - f2).abs() < tolerance * 1e-3 && b - a < 1e-6) {
            converged = true;
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = rate(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = rate(x2);
        }
    }
    let value = grid[best].min(f1).min(f2);
    if !converged || !value.is_finite() {
        return Err(Error::NonConvergence {
            what: "reverse-waterfilling scale search",
            iterations: ORACLE_MAX_ITERATIONS,
        });
    }
    Ok(value.max(0.0))
}
