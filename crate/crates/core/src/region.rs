//! Point verdicts, SNR sweeps, boundary traces and time-sharing envelopes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CanonicalInstance, DistortionPair};
use crate::par;
use crate::rd_bounds::{
    capacity_term, check_necessary_condition, rd_rate, symmetric_outer_bound, RATE_COMPARISON_TOL,
};
use crate::uncoded::{optimality_threshold, symmetric_uncoded_bound, uncoded_distortions};
use crate::vq_analytic::{in_rate_region, solve_symmetric_rate, vq_distortions, RatePair};

/// Relative slack when deciding that a scheme reaches a target distortion.
pub const ACHIEVE_TOL: f64 = 1e-9;
const GRID_SIDE: usize = 64;
const RATE_TOL: f64 = 1e-10;
const SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Unachievable,
    UncodedAchieves,
    VqAchieves,
    Gap,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unachievable => "UNACHIEVABLE",
            Verdict::UncodedAchieves => "UNCODED_ACHIEVES",
            Verdict::VqAchieves => "VQ_ACHIEVES",
            Verdict::Gap => "GAP",
        })
    }
}

/// One row of a point query or a sweep.
///
/// Point queries fill `target` and `outer_rd_rate`. Sweep rows fill
/// `outer_d` (the equal-power outer bound) and judge whether that bound is
/// met by one of the schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sigma_sq: f64,
    pub rho: f64,
    pub p1: f64,
    pub p2: f64,
    pub noise_var: f64,
    pub target: Option<DistortionPair>,
    pub outer_rd_rate: Option<f64>,
    pub capacity_term: f64,
    pub outer_d: Option<f64>,
    pub uncoded_d1: f64,
    pub uncoded_d2: f64,
    pub vq_best_d1: f64,
    pub vq_best_d2: f64,
    pub vq_r1: f64,
    pub vq_r2: f64,
    pub threshold_flag: bool,
    pub verdict: Verdict,
}

impl SweepRecord {
    pub fn snr(&self) -> f64 {
        self.p1 / self.noise_var
    }
}

/// Result of searching the quantizer rate region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqOperatingPoint {
    pub rates: RatePair,
    pub distortion: DistortionPair,
    pub objective: f64,
}

/// Upper limit on either quantizer rate anywhere in the region: a single
/// rate never exceeds the coherent sum capacity.
fn rate_ceiling(c: &CanonicalInstance) -> f64 {
    let coherent = c.p1 + c.p2 + 2.0 * (c.p1 * c.p2).sqrt();
    0.5 * (1.0 + coherent / c.noise_var).log2()
}

/// Minimizes `cost` over the rate region: log grid, then a pattern search
/// over the eight compass moves with a halving step. `cost` returns
/// infinity for infeasible points.
fn minimize_over_region<F>(
    c: &CanonicalInstance,
    seeds: &[(f64, f64)],
    cost: F,
) -> Option<VqOperatingPoint>
where
    F: Fn(DistortionPair) -> f64,
{
    let eval = |r1: f64, r2: f64| -> Option<(RatePair, DistortionPair, f64)> {
        if r1 < 0.0 || r2 < 0.0 {
            return None;
        }
        let rates = RatePair::new(c.rho, r1, r2).ok()?;
        if !in_rate_region(c, &rates) {
            return None;
        }
        let d = vq_distortions(c, &rates);
        let v = cost(d);
        v.is_finite().then_some((rates, d, v))
    };
    let top = rate_ceiling(c);
    let bottom = top * 1e-4;
    let ratio = (top / bottom).powf(1.0 / (GRID_SIDE - 1) as f64);
    let axis: Vec<f64> = (0..GRID_SIDE)
        .map(|k| bottom * ratio.powi(k as i32))
        .collect();

    let mut best: Option<(RatePair, DistortionPair, f64)> = None;
    let consider = |cand: Option<(RatePair, DistortionPair, f64)>, best: &mut Option<_>| {
        if let Some(cand) = cand {
            if best
                .as_ref()
                .is_none_or(|b: &(RatePair, DistortionPair, f64)| cand.2 < b.2)
            {
                *best = Some(cand);
            }
        }
    };
    for &(r1, r2) in seeds {
        consider(eval(r1, r2), &mut best);
    }
    for &r1 in &axis {
        for &r2 in &axis {
            consider(eval(r1, r2), &mut best);
        }
    }
    let (mut rates, mut d, mut v) = best?;

    let mut step = top / GRID_SIDE as f64;
    const MOVES: [(f64, f64); 8] = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (-1.0, -1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
    ];
    while step > RATE_TOL {
        let mut improved = false;
        for (a, b) in MOVES {
            if let Some(cand) = eval(rates.r1 + a * step, rates.r2 + b * step) {
                if cand.2 < v {
                    (rates, d, v) = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Some(VqOperatingPoint {
        rates,
        distortion: d,
        objective: v,
    })
}

/// Rate pair in the region minimizing `max(vq_d1 / t1, vq_d2 / t2)`.
pub fn best_vq_operating_point(
    c: &CanonicalInstance,
    target: DistortionPair,
) -> Option<VqOperatingPoint> {
    let seeds = symmetric_seed(c);
    minimize_over_region(c, &seeds, |d| (d.d1 / target.d1).max(d.d2 / target.d2))
}

fn symmetric_seed(c: &CanonicalInstance) -> Vec<(f64, f64)> {
    if c.is_symmetric() {
        if let Ok(sol) = solve_symmetric_rate(c.sigma_sq, c.rho, c.p1, c.noise_var, SOLVER_TOL) {
            return vec![(sol.rate, sol.rate)];
        }
    }
    Vec::new()
}

fn meets(value: f64, target: f64) -> bool {
    value <= target * (1.0 + ACHIEVE_TOL)
}

/// Outer-bound check, uncoded closed form and a quantizer rate search for a
/// target distortion pair.
pub fn verdict(c: &CanonicalInstance, d: DistortionPair) -> Result<SweepRecord> {
    let outer = check_necessary_condition(c, d)?;
    let u = uncoded_distortions(c);
    let vq = best_vq_operating_point(c, d);
    let (vq_d, vq_rates, vq_ok) = match vq {
        Some(p) => (p.distortion, p.rates, p.objective <= 1.0 + ACHIEVE_TOL),
        None => (
            DistortionPair {
                d1: c.sigma_sq,
                d2: c.sigma_sq,
            },
            RatePair::new(c.rho, 0.0, 0.0)?,
            false,
        ),
    };
    let verdict = if !outer.achievable_possible {
        Verdict::Unachievable
    } else if meets(u.d1, d.d1) && meets(u.d2, d.d2) {
        Verdict::UncodedAchieves
    } else if vq_ok {
        Verdict::VqAchieves
    } else {
        Verdict::Gap
    };
    let threshold = optimality_threshold(c.rho)?;
    Ok(SweepRecord {
        sigma_sq: c.sigma_sq,
        rho: c.rho,
        p1: c.p1,
        p2: c.p2,
        noise_var: c.noise_var,
        target: Some(d),
        outer_rd_rate: Some(outer.rd_rate),
        capacity_term: outer.capacity_term,
        outer_d: None,
        uncoded_d1: u.d1,
        uncoded_d2: u.d2,
        vq_best_d1: vq_d.d1,
        vq_best_d2: vq_d.d2,
        vq_r1: vq_rates.r1,
        vq_r2: vq_rates.r2,
        threshold_flag: c.is_symmetric() && c.p1 / c.noise_var <= threshold,
        verdict,
    })
}

/// Whether the equal-power outer bound is met by either scheme.
fn sweep_verdict(outer: f64, uncoded: f64, vq: f64) -> Verdict {
    if meets(uncoded, outer) {
        Verdict::UncodedAchieves
    } else if meets(vq, outer) {
        Verdict::VqAchieves
    } else {
        Verdict::Gap
    }
}

fn sweep_row(sigma_sq: f64, rho: f64, snr: f64) -> Result<SweepRecord> {
    let c = CanonicalInstance::symmetric(sigma_sq, rho, snr, 1.0)?;
    let outer = symmetric_outer_bound(sigma_sq, rho, snr, 1.0);
    let uncoded = symmetric_uncoded_bound(sigma_sq, rho, snr, 1.0);
    let vq = solve_symmetric_rate(sigma_sq, rho, snr, 1.0, SOLVER_TOL)?;
    Ok(SweepRecord {
        sigma_sq,
        rho,
        p1: snr,
        p2: snr,
        noise_var: 1.0,
        target: None,
        outer_rd_rate: None,
        capacity_term: capacity_term(&c),
        outer_d: Some(outer),
        uncoded_d1: uncoded,
        uncoded_d2: uncoded,
        vq_best_d1: vq.distortion,
        vq_best_d2: vq.distortion,
        vq_r1: vq.rate,
        vq_r2: vq.rate,
        threshold_flag: snr <= optimality_threshold(rho)?,
        verdict: sweep_verdict(outer, uncoded, vq.distortion),
    })
}

/// Equal-power bounds over a grid of `P/N` values with `N = 1`.
pub fn snr_sweep(sigma_sq: f64, rho: f64, snr_grid: &[f64]) -> Result<Vec<SweepRecord>> {
    crate::error::require_positive("sigma_sq", sigma_sq)?;
    crate::model::check_rho(rho, 0.0)?;
    for &snr in snr_grid {
        crate::error::require_positive("snr", snr)?;
    }
    par::map_indexed(snr_grid.len(), |i| sweep_row(sigma_sq, rho, snr_grid[i]))
        .into_iter()
        .collect()
}

/// Lower convex envelope of the points `(xs[i], ys[i])`, evaluated at each
/// `xs[i]`. `xs` must be nondecreasing.
pub fn lower_convex_envelope(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return ys.to_vec();
    }
    let cross = |o: usize, a: usize, b: usize| {
        (xs[a] - xs[o]) * (ys[b] - ys[o]) - (ys[a] - ys[o]) * (xs[b] - xs[o])
    };
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        if let Some(&last) = hull.last() {
            if xs[last] == xs[i] {
                if ys[i] < ys[last] {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    let mut seg = 0;
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            while seg + 1 < hull.len() - 1 && xs[hull[seg + 1]] < x {
                seg += 1;
            }
            if hull.len() == 1 {
                return y.min(ys[hull[0]]);
            }
            let (a, b) = (hull[seg], hull[seg + 1]);
            let t = if xs[b] > xs[a] {
                (x - xs[a]) / (xs[b] - xs[a])
            } else {
                0.0
            };
            let v = ys[a] + t * (ys[b] - ys[a]);
            v.min(y)
        })
        .collect()
}

/// Replaces the achievable columns of a power-sorted sweep by their lower
/// convex envelopes over power (time sharing between operating points).
pub fn convexify(records: &[SweepRecord]) -> Result<Vec<SweepRecord>> {
    if records.len() < 2 {
        return Ok(records.to_vec());
    }
    if records.windows(2).any(|w| w[1].p1 < w[0].p1) {
        return Err(invalid("records", "must be sorted by power"));
    }
    let xs: Vec<f64> = records.iter().map(|r| r.p1).collect();
    let column = |f: fn(&SweepRecord) -> f64| {
        let ys: Vec<f64> = records.iter().map(f).collect();
        lower_convex_envelope(&xs, &ys)
    };
    let u1 = column(|r| r.uncoded_d1);
    let u2 = column(|r| r.uncoded_d2);
    let v1 = column(|r| r.vq_best_d1);
    let v2 = column(|r| r.vq_best_d2);
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut out = r.clone();
            out.uncoded_d1 = u1[i];
            out.uncoded_d2 = u2[i];
            out.vq_best_d1 = v1[i];
            out.vq_best_d2 = v2[i];
            if let Some(outer) = r.outer_d {
                out.verdict = sweep_verdict(outer, u1[i].max(u2[i]), v1[i].max(v2[i]));
            }
            out
        })
        .collect())
}

/// One abscissa of a traced boundary; `None` where no point exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub d1: f64,
    /// Smallest `d2` the outer bound allows.
    pub outer_d2: Option<f64>,
    /// Uncoded `d2` when uncoded transmission meets `d1`.
    pub uncoded_d2: Option<f64>,
    /// Smallest quantizer-scheme `d2` with its `d1` at most `d1`.
    pub vq_d2: Option<f64>,
}

fn outer_frontier(c: &CanonicalInstance, d1: f64, cap: f64) -> Result<Option<f64>> {
    let s = c.sigma_sq;
    let rate = |d2: f64| rd_rate(c, DistortionPair { d1, d2 });
    if rate(s)? > cap + RATE_COMPARISON_TOL {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, s);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate(mid)? > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

/// Traces the outer boundary and both inner frontiers on a log grid of
/// `d1` from the smallest value the outer bound allows, `sigma^2 2^{-2C}`,
/// up to the variance.
pub fn trace_region_boundary(
    c: &CanonicalInstance,
    resolution: usize,
) -> Result<Vec<BoundaryPoint>> {
    if resolution < 2 {
        return Err(invalid("resolution", "must be >= 2"));
    }
    let cap = capacity_term(c);
    let u = uncoded_distortions(c);
    let s = c.sigma_sq;
    let span = (resolution - 1) as f64;
    let log_floor = -2.0 * cap * std::f64::consts::LN_2;
    let points = par::map_indexed(resolution, |k| -> Result<BoundaryPoint> {
        let d1 = s * (log_floor * (1.0 - k as f64 / span)).exp();
        let outer_d2 = outer_frontier(c, d1, cap)?;
        let uncoded_d2 = meets(u.d1, d1).then_some(u.d2);
        let vq_d2 = minimize_over_region(c, &[], |d| if d.d1 <= d1 { d.d2 } else { f64::INFINITY })
            .map(|p| p.distortion.d2);
        Ok(BoundaryPoint {
            d1,
            outer_d2,
            uncoded_d2,
            vq_d2,
        })
    });
    points.into_iter().collect()
}

/// `start:stop:count:scale` with `scale` one of `log` or `lin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let span = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let t = k as f64 / span;
                if self.log {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + (self.stop - self.start) * t
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |why: &str| {
            invalid(
                "grid",
                format!("`{s}`: {why} (expected start:stop:count[:log|lin])"),
            )
        };
        if !(3..=4).contains(&parts.len()) {
            return Err(bad("wrong number of fields"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad start"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad("bad stop"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        let log = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(_) => return Err(bad("scale must be `log` or `lin`")),
        };
        if count == 0 {
            return Err(bad("count must be >= 1"));
        }
        if !start.is_finite() || !stop.is_finite() || start > stop {
            return Err(bad("need finite start <= stop"));
        }
        if log && start <= 0.0 {
            return Err(bad("log grids need start > 0"));
        }
        Ok(Self {
            start,
            stop,
            count,
            log,
        })
    }
}
