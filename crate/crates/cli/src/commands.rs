use std::str::FromStr;

use bivmac::acceptance::{self, AcceptanceReport};
use bivmac::model::{
    canonicalize, canonicalize_distortion, decanonicalize_distortion, CanonicalInstance,
};
use bivmac::model::{DistortionPair, ProblemInstance};
use bivmac::rd_bounds::{classify_case, RdCaseTag};
use bivmac::region::{self, BoundaryPoint, GridSpec, SweepRecord, Verdict};
use bivmac::uncoded::{optimality_threshold, simulate_uncoded, uncoded_distortions};
use bivmac::vq_analytic::{region_limits, solve_symmetric_rate, vq_bound, RatePair};
use bivmac::vq_sim::simulate_vq;
use serde::Serialize;

use crate::args::{Command, Format, InstanceArgs, SweepArgs, SweepKind};
use crate::output::{csv_table, json, num, opt_num};
use crate::CliError;

/// Fixed-point tolerance for the common-rate solver.
const SOLVER_TOL: f64 = 1e-12;

/// Rendered output and whether it reports a failure.
pub struct Rendered {
    pub text: String,
    pub failed: bool,
}

impl From<String> for Rendered {
    fn from(text: String) -> Self {
        Self {
            text,
            failed: false,
        }
    }
}

impl InstanceArgs {
    fn problem(&self) -> Result<ProblemInstance, CliError> {
        let v1 = self.var1.unwrap_or(self.sigma2);
        let v2 = self.var2.unwrap_or(self.sigma2);
        Ok(ProblemInstance::new(
            v1, v2, self.rho, self.p1, self.p2, self.noise,
        )?)
    }
}

pub fn run(command: &Command, format: Option<Format>) -> Result<Rendered, CliError> {
    let point_format = format.unwrap_or(Format::Json);
    match command {
        Command::Bounds { instance, d1, d2 } => bounds(instance, *d1, *d2, point_format),
        Command::Uncoded { instance } => uncoded(instance, point_format),
        Command::SimulateUncoded {
            instance,
            trials,
            seed,
        } => sim_uncoded(instance, *trials, seed.seed, point_format),
        Command::VqBound { instance, r1, r2 } => vq(instance, r1.zip(*r2), point_format),
        Command::SimulateVq {
            instance,
            r1,
            r2,
            n,
            trials,
            delta_typ,
            seed,
        } => sim_vq(
            instance,
            (*r1, *r2),
            *n,
            *trials,
            *delta_typ,
            seed.seed,
            point_format,
        ),
        Command::Sweep(args) => sweep(args, format.unwrap_or(Format::Csv)),
        Command::Verify { seed } => verify(seed.seed, format),
    }
}

#[derive(Serialize)]
struct RatesOut {
    r1: f64,
    r2: f64,
}

#[derive(Serialize)]
struct BoundsOut {
    schema: &'static str,
    instance: ProblemInstance,
    target: DistortionPair,
    case: RdCaseTag,
    rd_rate: f64,
    capacity_term: f64,
    achievable_possible: bool,
    uncoded: DistortionPair,
    vq: DistortionPair,
    vq_rates: RatesOut,
    threshold_flag: bool,
    verdict: Verdict,
}

fn bounds(args: &InstanceArgs, d1: f64, d2: f64, format: Format) -> Result<Rendered, CliError> {
    let inst = args.problem()?;
    let c = canonicalize(&inst);
    let target = DistortionPair::new(d1, d2)?;
    let ct = canonicalize_distortion(&c, target);
    let case = classify_case(&c, ct)?;
    let rec = region::verdict(&c, ct)?;
    let out = BoundsOut {
        schema: "bivmac.bounds.v1",
        instance: inst,
        target,
        case: case.tag,
        rd_rate: rec.outer_rd_rate.unwrap_or(f64::NAN),
        capacity_term: rec.capacity_term,
        achievable_possible: rec.verdict != Verdict::Unachievable,
        uncoded: original(&c, rec.uncoded_d1, rec.uncoded_d2),
        vq: original(&c, rec.vq_best_d1, rec.vq_best_d2),
        vq_rates: RatesOut {
            r1: rec.vq_r1,
            r2: rec.vq_r2,
        },
        threshold_flag: rec.threshold_flag,
        verdict: rec.verdict,
    };
    Ok(match format {
        Format::Json => json(&out)?,
        Format::Csv => csv_table(
            &[
                "d1",
                "d2",
                "case",
                "rd_rate",
                "capacity_term",
                "uncoded_d1",
                "uncoded_d2",
                "vq_d1",
                "vq_d2",
                "verdict",
            ],
            [vec![
                num(d1),
                num(d2),
                case_name(case.tag).to_owned(),
                num(out.rd_rate),
                num(out.capacity_term),
                num(out.uncoded.d1),
                num(out.uncoded.d2),
                num(out.vq.d1),
                num(out.vq.d2),
                out.verdict.to_string(),
            ]],
        )?,
    }
    .into())
}

fn case_name(tag: RdCaseTag) -> &'static str {
    match tag {
        RdCaseTag::BothSmall => "both_small",
        RdCaseTag::Intermediate => "intermediate",
        RdCaseTag::OneInactive => "one_inactive",
    }
}

fn original(c: &CanonicalInstance, d1: f64, d2: f64) -> DistortionPair {
    decanonicalize_distortion(c, DistortionPair { d1, d2 })
}

#[derive(Serialize)]
struct UncodedOut {
    schema: &'static str,
    instance: ProblemInstance,
    d1: f64,
    d2: f64,
    /// `null` when uncoded transmission is optimal at every SNR.
    threshold_snr: Option<f64>,
    threshold_flag: bool,
}

fn uncoded(args: &InstanceArgs, format: Format) -> Result<Rendered, CliError> {
    let inst = args.problem()?;
    let c = canonicalize(&inst);
    let u = uncoded_distortions(&c);
    let d = original(&c, u.d1, u.d2);
    let threshold = optimality_threshold(c.rho)?;
    let out = UncodedOut {
        schema: "bivmac.uncoded.v1",
        instance: inst,
        d1: d.d1,
        d2: d.d2,
        threshold_snr: threshold.is_finite().then_some(threshold),
        threshold_flag: c.is_symmetric() && c.p1 / c.noise_var <= threshold,
    };
    Ok(match format {
        Format::Json => json(&out)?,
        Format::Csv => csv_table(
            &["d1", "d2", "threshold_snr", "threshold_flag"],
            [vec![
                num(out.d1),
                num(out.d2),
                opt_num(out.threshold_snr),
                out.threshold_flag.to_string(),
            ]],
        )?,
    }
    .into())
}

#[derive(Serialize)]
struct SimUncodedOut {
    schema: &'static str,
    instance: ProblemInstance,
    trials: usize,
    seed: u64,
    d1: f64,
    d2: f64,
    power1: f64,
    power2: f64,
    analytic_d1: f64,
    analytic_d2: f64,
}

fn sim_uncoded(
    args: &InstanceArgs,
    trials: usize,
    seed: u64,
    format: Format,
) -> Result<Rendered, CliError> {
    let inst = args.problem()?;
    let c = canonicalize(&inst);
    let sim = simulate_uncoded(&c, trials, seed)?;
    let u = uncoded_distortions(&c);
    let d = decanonicalize_distortion(&c, sim.distortion);
    let a = original(&c, u.d1, u.d2);
    let out = SimUncodedOut {
        schema: "bivmac.simulate-uncoded.v1",
        instance: inst,
        trials,
        seed,
        d1: d.d1,
        d2: d.d2,
        power1: sim.power1,
        power2: sim.power2,
        analytic_d1: a.d1,
        analytic_d2: a.d2,
    };
    Ok(match format {
        Format::Json => json(&out)?,
        Format::Csv => csv_table(
            &[
                "trials",
                "seed",
                "d1",
                "d2",
                "power1",
                "power2",
                "analytic_d1",
                "analytic_d2",
            ],
            [vec![
                trials.to_string(),
                seed.to_string(),
                num(out.d1),
                num(out.d2),
                num(out.power1),
                num(out.power2),
                num(out.analytic_d1),
                num(out.analytic_d2),
            ]],
        )?,
    }
    .into())
}

#[derive(Serialize)]
struct VqBoundOut {
    schema: &'static str,
    instance: ProblemInstance,
    /// `given` for user rates, `symmetric` for the solved common rate.
    mode: &'static str,
    r1: f64,
    r2: f64,
    rho_tilde: f64,
    in_region: bool,
    limit_r1: f64,
    limit_r2: f64,
    limit_sum: f64,
    d1: f64,
    d2: f64,
}

fn vq(
    args: &InstanceArgs,
    rates: Option<(f64, f64)>,
    format: Format,
) -> Result<Rendered, CliError> {
    let inst = args.problem()?;
    let c = canonicalize(&inst);
    let (mode, (r1, r2)) = match rates {
        Some(r) => ("given", r),
        None if c.is_symmetric() => {
            let sol = solve_symmetric_rate(c.sigma_sq, c.rho, c.p1, c.noise_var, SOLVER_TOL)?;
            ("symmetric", (sol.rate, sol.rate))
        }
        None => {
            return Err(CliError::Usage(
                "unequal powers need explicit rates; pass --r1 and --r2".into(),
            ))
        }
    };
    let b = vq_bound(&c, RatePair::new(c.rho, r1, r2)?);
    let (l1, l2, ls) = region_limits(&c, b.rates.rho_tilde);
    let d = original(&c, b.d1, b.d2);
    let out = VqBoundOut {
        schema: "bivmac.vq-bound.v1",
        instance: inst,
        mode,
        r1,
        r2,
        rho_tilde: b.rates.rho_tilde,
        in_region: b.in_region,
        limit_r1: l1,
        limit_r2: l2,
        limit_sum: ls,
        d1: d.d1,
        d2: d.d2,
    };
    Ok(match format {
        Format::Json => json(&out)?,
        Format::Csv => csv_table(
            &["mode", "r1", "r2", "rho_tilde", "in_region", "d1", "d2"],
            [vec![
                mode.to_owned(),
                num(r1),
                num(r2),
                num(out.rho_tilde),
                out.in_region.to_string(),
                num(out.d1),
                num(out.d2),
            ]],
        )?,
    }
    .into())
}

#[derive(Serialize)]
struct SimVqOut {
    schema: &'static str,
    instance: ProblemInstance,
    seed: u64,
    n: usize,
    trials: usize,
    delta_typ: f64,
    r1: f64,
    r2: f64,
    realized_rate1: f64,
    realized_rate2: f64,
    rates_in_region: bool,
    d1: f64,
    d2: f64,
    conditional_d1: Option<f64>,
    conditional_d2: Option<f64>,
    analytic_d1: f64,
    analytic_d2: f64,
    quantizer_mse1: f64,
    quantizer_mse2: f64,
    codeword_corr: f64,
    decode_errors: usize,
    decode_error_rate: f64,
    fallbacks: usize,
}

#[allow(clippy::too_many_arguments)]
fn sim_vq(
    args: &InstanceArgs,
    (r1, r2): (f64, f64),
    n: usize,
    trials: usize,
    delta_typ: f64,
    seed: u64,
    format: Format,
) -> Result<Rendered, CliError> {
    let inst = args.problem()?;
    let c = canonicalize(&inst);
    let rates = RatePair::new(c.rho, r1, r2)?;
    let st = simulate_vq(&c, &rates, n, trials, delta_typ, seed)?;
    let b = vq_bound(&c, rates);
    let d = original(&c, st.empirical_d1, st.empirical_d2);
    let a = original(&c, b.d1, b.d2);
    let cond = match (st.conditional_d1, st.conditional_d2) {
        (Some(x), Some(y)) => Some(original(&c, x, y)),
        _ => None,
    };
    let q = original(&c, st.quantizer_mse1, st.quantizer_mse2);
    let out = SimVqOut {
        schema: "bivmac.simulate-vq.v1",
        instance: inst,
        seed,
        n,
        trials,
        delta_typ,
        r1,
        r2,
        realized_rate1: st.realized_rate1,
        realized_rate2: st.realized_rate2,
        rates_in_region: st.rates_in_region,
        d1: d.d1,
        d2: d.d2,
        conditional_d1: cond.map(|p| p.d1),
        conditional_d2: cond.map(|p| p.d2),
        analytic_d1: a.d1,
        analytic_d2: a.d2,
        quantizer_mse1: q.d1,
        quantizer_mse2: q.d2,
        codeword_corr: st.empirical_codeword_corr,
        decode_errors: st.decode_error_count,
        decode_error_rate: st.decode_error_rate(),
        fallbacks: st.fallback_count,
    };
    Ok(match format {
        Format::Json => json(&out)?,
        Format::Csv => csv_table(
            &[
                "n",
                "trials",
                "seed",
                "d1",
                "d2",
                "conditional_d1",
                "conditional_d2",
                "analytic_d1",
                "analytic_d2",
                "codeword_corr",
                "decode_error_rate",
            ],
            [vec![
                n.to_string(),
                trials.to_string(),
                seed.to_string(),
                num(out.d1),
                num(out.d2),
                opt_num(out.conditional_d1),
                opt_num(out.conditional_d2),
                num(out.analytic_d1),
                num(out.analytic_d2),
                num(out.codeword_corr),
                num(out.decode_error_rate),
            ]],
        )?,
    }
    .into())
}

#[derive(Serialize)]
struct SnrRow {
    snr: f64,
    rho: f64,
    sigma_sq: f64,
    outer_d: f64,
    uncoded_d: f64,
    vq_d: f64,
    vq_rate: f64,
    threshold_flag: bool,
    verdict: Verdict,
}

impl From<&SweepRecord> for SnrRow {
    fn from(r: &SweepRecord) -> Self {
        Self {
            snr: r.snr(),
            rho: r.rho,
            sigma_sq: r.sigma_sq,
            outer_d: r.outer_d.unwrap_or(f64::NAN),
            uncoded_d: r.uncoded_d1,
            vq_d: r.vq_best_d1,
            vq_rate: r.vq_r1,
            threshold_flag: r.threshold_flag,
            verdict: r.verdict,
        }
    }
}

#[derive(Serialize)]
struct SnrSweepOut {
    schema: &'static str,
    convexified: bool,
    rows: Vec<SnrRow>,
}

#[derive(Serialize)]
struct BoundaryOut {
    schema: &'static str,
    instance: ProblemInstance,
    convexified: bool,
    points: Vec<BoundaryPoint>,
}

pub const SNR_COLUMNS: [&str; 9] = [
    "snr",
    "rho",
    "sigma_sq",
    "outer_d",
    "uncoded_d",
    "vq_d",
    "vq_rate",
    "threshold_flag",
    "verdict",
];

fn sweep(args: &SweepArgs, format: Format) -> Result<Rendered, CliError> {
    match args.kind {
        SweepKind::Snr => snr_sweep(args, format),
        SweepKind::Boundary => boundary(args, format),
    }
}

fn snr_sweep(args: &SweepArgs, format: Format) -> Result<Rendered, CliError> {
    let inst = &args.instance;
    if inst.var1.is_some() || inst.var2.is_some() {
        return Err(CliError::Usage(
            "SNR sweeps use one common variance; pass --sigma2 only".into(),
        ));
    }
    if inst.rho < 0.0 {
        return Err(CliError::Usage(
            "SNR sweeps take --rho in [0, 1]; the sign of the correlation does not change the bounds".into(),
        ));
    }
    let grid = GridSpec::from_str(&args.snr_grid)?;
    let mut rows = region::snr_sweep(inst.sigma2, inst.rho, &grid.values())?;
    if args.convexify {
        rows = region::convexify(&rows)?;
    }
    let rows: Vec<SnrRow> = rows.iter().map(SnrRow::from).collect();
    Ok(match format {
        Format::Json => json(&SnrSweepOut {
            schema: "bivmac.sweep-snr.v1",
            convexified: args.convexify,
            rows,
        })?,
        Format::Csv => csv_table(
            &SNR_COLUMNS,
            rows.iter().map(|r| {
                vec![
                    num(r.snr),
                    num(r.rho),
                    num(r.sigma_sq),
                    num(r.outer_d),
                    num(r.uncoded_d),
                    num(r.vq_d),
                    num(r.vq_rate),
                    r.threshold_flag.to_string(),
                    r.verdict.to_string(),
                ]
            }),
        )?,
    }
    .into())
}

/// Time-sharing envelope of one optional frontier column over `d1`.
fn convexify_column(
    points: &mut [BoundaryPoint],
    get: fn(&BoundaryPoint) -> Option<f64>,
    set: fn(&mut BoundaryPoint, f64),
) {
    let idx: Vec<usize> = (0..points.len())
        .filter(|&i| get(&points[i]).is_some())
        .collect();
    let xs: Vec<f64> = idx.iter().map(|&i| points[i].d1).collect();
    let ys: Vec<f64> = idx.iter().filter_map(|&i| get(&points[i])).collect();
    for (&i, v) in idx.iter().zip(region::lower_convex_envelope(&xs, &ys)) {
        set(&mut points[i], v);
    }
}

fn boundary(args: &SweepArgs, format: Format) -> Result<Rendered, CliError> {
    let inst = args.instance.problem()?;
    let c = canonicalize(&inst);
    let mut points = region::trace_region_boundary(&c, args.resolution)?;
    if args.convexify {
        convexify_column(&mut points, |p| p.uncoded_d2, |p, v| p.uncoded_d2 = Some(v));
        convexify_column(&mut points, |p| p.vq_d2, |p, v| p.vq_d2 = Some(v));
    }
    let scale = |v: Option<f64>| v.map(|d| d * c.scale2);
    let points: Vec<BoundaryPoint> = points
        .into_iter()
        .map(|p| BoundaryPoint {
            d1: p.d1 * c.scale1,
            outer_d2: scale(p.outer_d2),
            uncoded_d2: scale(p.uncoded_d2),
            vq_d2: scale(p.vq_d2),
        })
        .collect();
    Ok(match format {
        Format::Json => json(&BoundaryOut {
            schema: "bivmac.sweep-boundary.v1",
            instance: inst,
            convexified: args.convexify,
            points,
        })?,
        Format::Csv => csv_table(
            &["d1", "outer_d2", "uncoded_d2", "vq_d2"],
            points.iter().map(|p| {
                vec![
                    num(p.d1),
                    opt_num(p.outer_d2),
                    opt_num(p.uncoded_d2),
                    opt_num(p.vq_d2),
                ]
            }),
        )?,
    }
    .into())
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    schema: &'static str,
    all_passed: bool,
    #[serde(flatten)]
    report: &'a AcceptanceReport,
}

fn verify(seed: u64, format: Option<Format>) -> Result<Rendered, CliError> {
    let report = acceptance::run_all(seed)?;
    for c in &report.checks {
        eprintln!("check {} took {:.3} s", c.id, c.elapsed.as_secs_f64());
    }
    let text = match format {
        None => report.render(),
        Some(Format::Json) => json(&VerifyOut {
            schema: "bivmac.verify.v1",
            all_passed: report.all_passed(),
            report: &report,
        })?,
        Some(Format::Csv) => {
            return Err(CliError::Usage(
                "verify prints a text table or --format json".into(),
            ))
        }
    };
    Ok(Rendered {
        text,
        failed: !report.all_passed(),
    })
}
