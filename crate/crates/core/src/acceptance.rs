//! Self-check suite behind `bivmac verify`.
//!
//! Each check returns a pass flag and a one-line summary built only from
//! seeded computations, so the rendered report is byte-stable. Wall-clock
//! budgets count toward the pass flag but are not printed in the report.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{CanonicalInstance, DistortionPair};
use crate::par::{self, stream};
use crate::rd_bounds::{
    both_small_edge, case_formula, one_inactive_edge, rd_rate, symmetric_outer_bound,
    symmetric_outer_high_snr, symmetric_outer_low_snr, waterfill_oracle_rate, RdCaseTag,
};
use crate::region::{snr_sweep, trace_region_boundary};
use crate::uncoded::{
    optimality_threshold, simulate_uncoded, symmetric_uncoded_bound, uncoded_distortions,
    UncodedSimulation,
};
use crate::vq_analytic::{high_snr_asymptote, solve_symmetric_rate, vq_distortions, RatePair};
use crate::vq_sim::{simulate_vq, DEFAULT_DELTA_TYP};

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    /// Wall time of the check; excluded from the rendered report.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {} {}: {}", self.id, self.name, self.summary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("bivmac verify (seed {})\n", self.seed);
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        out.push_str(&format!("{passed}/{} checks passed\n", self.checks.len()));
        out
    }
}

fn outcome(id: u8, name: &str, passed: bool, summary: String, start: Instant) -> CheckOutcome {
    CheckOutcome {
        id,
        name: name.to_owned(),
        passed,
        summary,
        elapsed: start.elapsed(),
    }
}

fn within_budget(start: Instant, secs: u64) -> bool {
    start.elapsed() < Duration::from_secs(secs)
}

const ORACLE_RHOS: [f64; 5] = [0.0, 0.3, 0.5, 0.8, 0.95];
const ORACLE_SIDE: usize = 20;

/// Closed-form rate against the numerical waterfilling oracle.
pub fn oracle_equivalence() -> Result<CheckOutcome> {
    let start = Instant::now();
    let per_rho = ORACLE_SIDE * ORACLE_SIDE;
    let diffs = par::map_indexed(ORACLE_RHOS.len() * per_rho, |k| -> Result<f64> {
        let rho = ORACLE_RHOS[k / per_rho];
        let (i, j) = ((k % per_rho) / ORACLE_SIDE, k % ORACLE_SIDE);
        let c = CanonicalInstance::symmetric(1.0, rho, 1.0, 1.0)?;
        let side = ORACLE_SIDE as f64;
        let d = DistortionPair::new((i + 1) as f64 / side, (j + 1) as f64 / side)?;
        Ok((rd_rate(&c, d)? - waterfill_oracle_rate(&c, d, 1e-12)?).abs())
    });
    let worst = diffs
        .into_iter()
        .try_fold(0f64, |m, d| d.map(|d| m.max(d)))?;
    let n = ORACLE_RHOS.len() * per_rho;
    Ok(outcome(
        1,
        "oracle equivalence",
        worst <= 1e-6 && within_budget(start, 10),
        format!("max |R - oracle| = {worst:.3e} bits over {n} points (limit 1e-6)"),
        start,
    ))
}

const EDGE_SAMPLES: usize = 1000;

/// Neighbouring case expressions agree on both case edges.
pub fn case_continuity(seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = par::rng_for(seed, stream::EDGE_SAMPLES, 0);
    let (mut lower, mut upper) = (0f64, 0f64);
    let s = 1.0;
    for _ in 0..EDGE_SAMPLES {
        let rho: f64 = rng.random_range(0.05..0.95);
        let u: f64 = rng.random_range(0.01..0.99);
        let d1 = u * s * (1.0 - rho);
        let d2 = both_small_edge(s, rho, d1);
        let gap = case_formula(RdCaseTag::BothSmall, s, rho, d1, d2)
            - case_formula(RdCaseTag::Intermediate, s, rho, d1, d2);
        lower = lower.max(gap.abs());

        let rho: f64 = rng.random_range(0.05..0.95);
        let d1 = rng.random_range(0.01..0.99) * s;
        let d2 = one_inactive_edge(s, rho, d1);
        let gap = case_formula(RdCaseTag::Intermediate, s, rho, d1, d2)
            - case_formula(RdCaseTag::OneInactive, s, rho, d1, d2);
        upper = upper.max(gap.abs());
    }
    Ok(outcome(
        2,
        "case continuity",
        lower <= 1e-10 && upper <= 1e-10,
        format!("max edge gaps {lower:.3e} / {upper:.3e} bits over {EDGE_SAMPLES} points each (limit 1e-10)"),
        start,
    ))
}

/// Uncoded transmission meets the outer bound below the threshold SNR.
pub fn uncoded_optimality() -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut worst = 0f64;
    let mut pairs = 0;
    for i in 0..10 {
        let rho = 0.05 + 0.1 * i as f64;
        let threshold = optimality_threshold(rho)?;
        for k in 1..=10 {
            let snr = threshold * k as f64 / 10.0;
            let u = symmetric_uncoded_bound(1.0, rho, snr, 1.0);
            let o = symmetric_outer_bound(1.0, rho, snr, 1.0);
            worst = worst.max((u / o - 1.0).abs());
            pairs += 1;
        }
    }
    let mut branch_gap = 0f64;
    for i in 0..10 {
        let rho = 0.05 + 0.1 * i as f64;
        let snr = optimality_threshold(rho)?;
        let lo = symmetric_outer_low_snr(1.0, rho, snr, 1.0);
        let hi = symmetric_outer_high_snr(1.0, rho, snr, 1.0);
        branch_gap = branch_gap.max((lo / hi - 1.0).abs());
    }
    let desk = [
        symmetric_uncoded_bound(1.0, 0.5, 2.0, 3.0),
        symmetric_outer_low_snr(1.0, 0.5, 2.0, 3.0),
        symmetric_outer_high_snr(1.0, 0.5, 2.0, 3.0),
    ];
    let desk_gap = desk.iter().map(|d| (d - 0.5).abs()).fold(0.0, f64::max);
    Ok(outcome(
        3,
        "uncoded optimality",
        worst <= 1e-12 && branch_gap <= 1e-12 && desk_gap <= 1e-12,
        format!(
            "max rel gap {worst:.3e} over {pairs} pairs, branch gap at threshold {branch_gap:.3e}, \
             desk point off 0.5 by {desk_gap:.3e} (limit 1e-12)"
        ),
        start,
    ))
}

const MC_TRIALS: usize = 1_000_000;

fn desk_instance() -> Result<CanonicalInstance> {
    CanonicalInstance::symmetric(1.0, 0.5, 2.0, 3.0)
}

/// Monte Carlo uncoded run at the desk point.
pub fn uncoded_monte_carlo(seed: u64) -> Result<(CheckOutcome, UncodedSimulation)> {
    let start = Instant::now();
    let sim = simulate_uncoded(&desk_instance()?, MC_TRIALS, seed)?;
    let rel = |x: f64, t: f64| (x / t - 1.0).abs();
    let d_err = rel(sim.distortion.d1, 0.5).max(rel(sim.distortion.d2, 0.5));
    let p_err = rel(sim.power1, 2.0).max(rel(sim.power2, 2.0));
    let check = outcome(
        4,
        "uncoded monte carlo",
        d_err <= 0.01 && p_err <= 0.01 && within_budget(start, 5),
        format!(
            "d = ({:.6}, {:.6}), power = ({:.6}, {:.6}) over {MC_TRIALS} samples (limit 1%)",
            sim.distortion.d1, sim.distortion.d2, sim.power1, sim.power2
        ),
        start,
    );
    Ok((check, sim))
}

/// The uncoded closed form with the coherent denominator, checked against
/// its equal-power reduction and the Monte Carlo estimate; the variant with
/// a single cross term in the denominator must disagree with the estimate.
pub fn uncoded_closed_form(sim: &UncodedSimulation) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut identity = 0f64;
    for &rho in &[0.0, 0.3, 0.5, 0.8, 0.95] {
        for &p in &[0.1, 1.0, 2.0, 10.0, 100.0] {
            let c = CanonicalInstance::symmetric(1.0, rho, p, 3.0)?;
            let u = uncoded_distortions(&c);
            identity = identity.max((u.d1 / symmetric_uncoded_bound(1.0, rho, p, 3.0) - 1.0).abs());
        }
    }
    let c = desk_instance()?;
    let closed = uncoded_distortions(&c).d1;
    let single_cross = c.sigma_sq * (c.p2 * (1.0 - c.rho * c.rho) + c.noise_var)
        / (c.p1 + c.p2 + c.rho * (c.p1 * c.p2).sqrt() + c.noise_var);
    let mc = sim.distortion.d1;
    let closed_err = (closed / mc - 1.0).abs();
    let single_err = (single_cross / mc - 1.0).abs();
    Ok(outcome(
        5,
        "uncoded closed form",
        identity <= 1e-12 && closed_err <= 0.01 && single_err > 0.01,
        format!(
            "equal-power identity {identity:.3e}; vs monte carlo: coherent denominator {closed_err:.3e}, \
             single cross term {single_err:.3e} (rejected)"
        ),
        start,
    ))
}

/// Independent sources: the quantizer scheme meets the outer bound.
pub fn independent_coincidence() -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut worst = 0f64;
    for &snr in &[0.1, 1.0, 10.0, 100.0] {
        let sol = solve_symmetric_rate(1.0, 0.0, snr, 1.0, 1e-12)?;
        let closed = (1.0 / (2.0 * snr + 1.0)).sqrt();
        let outer = symmetric_outer_bound(1.0, 0.0, snr, 1.0);
        worst = worst
            .max((sol.distortion - closed).abs())
            .max((sol.distortion - outer).abs());
    }
    let desk = solve_symmetric_rate(1.0, 0.0, 1.0, 1.0, 1e-12)?;
    let desk_ok = (desk.distortion - 3f64.powf(-0.5)).abs() <= 1e-9
        && (desk.rate - 0.25 * 3f64.log2()).abs() <= 1e-9;
    Ok(outcome(
        6,
        "independent sources coincidence",
        worst <= 1e-9 && desk_ok,
        format!(
            "max |D_vq - D_outer| = {worst:.3e} (limit 1e-9); P = N gives D = {:.9} at R = {:.9}",
            desk.distortion, desk.rate
        ),
        start,
    ))
}

/// Both bounds scaled by the root SNR approach the common asymptote.
pub fn high_snr_scaling() -> Result<CheckOutcome> {
    let start = Instant::now();
    let snr = 1e6;
    let mut worst = 0f64;
    for &rho in &[0.0, 0.5, 0.9] {
        let target = high_snr_asymptote(1.0, rho);
        let vq = solve_symmetric_rate(1.0, rho, snr, 1.0, 1e-12)?.distortion;
        let outer = symmetric_outer_bound(1.0, rho, snr, 1.0);
        for d in [vq, outer] {
            worst = worst.max((snr.sqrt() * d / target - 1.0).abs());
        }
    }
    Ok(outcome(
        7,
        "high snr asymptote",
        worst <= 0.02,
        format!("max relative deviation {worst:.3e} at P/N = 1e6 (limit 2%)"),
        start,
    ))
}

const LADDER: [usize; 4] = [8, 16, 24, 32];
const VQ_TRIALS: usize = 500;
const VQ_SNR: f64 = 10.0;

/// Finite-blocklength trends of the quantizer scheme simulator.
pub fn vq_trends(seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let (rho, rate) = (0.8, 0.5);
    let c = CanonicalInstance::symmetric(1.0, rho, VQ_SNR, 1.0)?;
    let rates = RatePair::new(rho, rate, rate)?;
    let analytic = vq_distortions(&c, &rates).d1;
    let target_mse = (-2.0 * rate).exp2();
    let mut stats = Vec::with_capacity(LADDER.len());
    for &n in &LADDER {
        stats.push(simulate_vq(
            &c,
            &rates,
            n,
            VQ_TRIALS,
            DEFAULT_DELTA_TYP,
            seed,
        )?);
    }
    let gaps: Vec<f64> = stats
        .iter()
        .map(|s| 0.5 * (s.quantizer_mse1 + s.quantizer_mse2) - target_mse)
        .collect();
    let errors: Vec<usize> = stats.iter().map(|s| s.decode_error_count).collect();
    let last = stats.last().expect("ladder is non-empty");
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let corr_ok = (last.empirical_codeword_corr - rates.rho_tilde).abs() <= 0.05;
    let cond = match (last.conditional_d1, last.conditional_d2) {
        (Some(a), Some(b)) => Some(0.5 * (a + b)),
        _ => None,
    };
    let cond_ok = cond.is_some_and(|d| (d / analytic - 1.0).abs() <= 0.2);
    let errors_ok = errors.windows(2).all(|w| w[1] <= w[0]);
    let fmt_list = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let err_list = errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let cond_text = cond.map_or("none".to_owned(), |d| format!("{d:.4}"));
    Ok(outcome(
        8,
        "vq simulator trends",
        shrinking && corr_ok && cond_ok && errors_ok && within_budget(start, 120) && last.rates_in_region,
        format!(
            "n = 8/16/24/32: mse gap {} ({}), corr {:.4} vs {:.1} ({}), conditional d {} vs {:.5} ({}), \
             decode errors {} of {VQ_TRIALS} ({})",
            fmt_list(&gaps),
            verdict_word(shrinking),
            last.empirical_codeword_corr,
            rates.rho_tilde,
            verdict_word(corr_ok),
            cond_text,
            analytic,
            verdict_word(cond_ok),
            err_list,
            verdict_word(errors_ok),
        ),
        start,
    ))
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

/// Debug rendering of every parallel entry point for one seed; `{:?}` on
/// `f64` round-trips, so equal strings mean bitwise-equal results.
fn parallel_fingerprint(seed: u64) -> Result<String> {
    let c = desk_instance()?;
    let uncoded = simulate_uncoded(&c, 200_000, seed)?;
    let vq_c = CanonicalInstance::symmetric(1.0, 0.8, VQ_SNR, 1.0)?;
    let vq = simulate_vq(
        &vq_c,
        &RatePair::new(0.8, 0.5, 0.5)?,
        16,
        200,
        DEFAULT_DELTA_TYP,
        seed,
    )?;
    let grid: Vec<f64> = (0..16).map(|k| 10f64.powf(-1.0 + k as f64 / 5.0)).collect();
    let sweep = snr_sweep(1.0, 0.5, &grid)?;
    let trace = trace_region_boundary(&CanonicalInstance::new(1.0, 0.6, 2.0, 1.0, 0.5)?, 9)?;
    Ok(format!("{uncoded:?}\n{vq:?}\n{sweep:?}\n{trace:?}"))
}

#[cfg(feature = "parallel")]
fn fingerprints(seed: u64) -> Result<Vec<(usize, String)>> {
    [1usize, 4]
        .into_iter()
        .map(|threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| crate::error::invalid("threads", e.to_string()))?;
            Ok((threads, pool.install(|| parallel_fingerprint(seed))?))
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn fingerprints(seed: u64) -> Result<Vec<(usize, String)>> {
    Ok(vec![
        (1, parallel_fingerprint(seed)?),
        (1, parallel_fingerprint(seed)?),
    ])
}

/// Simulations, sweeps and traces are bitwise equal under different pool sizes.
pub fn determinism(seed: u64) -> Result<CheckOutcome> {
    let start = Instant::now();
    let prints = fingerprints(seed)?;
    let same = prints.windows(2).all(|w| w[0].1 == w[1].1);
    let pools = prints
        .iter()
        .map(|p| p.0.to_string())
        .collect::<Vec<_>>()
        .join(" and ");
    Ok(outcome(
        9,
        "determinism",
        same,
        format!("simulations, sweep and boundary trace bitwise equal under {pools} worker threads: {same}"),
        start,
    ))
}

/// Runs every check in order.
pub fn run_all(seed: u64) -> Result<AcceptanceReport> {
    let (mc, sim) = uncoded_monte_carlo(seed)?;
    let checks = vec![
        oracle_equivalence()?,
        case_continuity(seed)?,
        uncoded_optimality()?,
        mc,
        uncoded_closed_form(&sim)?,
        independent_coincidence()?,
        high_snr_scaling()?,
        vq_trends(seed)?,
        determinism(seed)?,
    ];
    Ok(AcceptanceReport { seed, checks })
}
