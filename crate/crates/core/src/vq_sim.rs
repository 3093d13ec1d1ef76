//! End-to-end simulation of the vector-quantizer scheme at finite blocklength.
//!
//! Each encoder picks the codeword of its random spherical codebook closest to
//! the source block and sends it scaled to full power. The decoder searches
//! codeword pairs whose correlation is close to the expected codeword
//! correlation for the one whose weighted sum is best aligned with the channel
//! output, then reconstructs both sources linearly from the decoded pair.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CanonicalInstance, ChunkSampler};
use crate::par::{self, stream};
use crate::vq_analytic::{in_rate_region, residual, rho_tilde, RatePair};

/// Largest codebook, in bits, that [`generate_codebook`] will build.
pub const MAX_CODEBOOK_BITS: u32 = 22;
pub const DEFAULT_DELTA_TYP: f64 = 0.05;

const WORD_CHUNK: usize = 4096;
const WORD_STREAM: u64 = 0x574f_5244;

/// Random codewords on a sphere, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub n: usize,
    /// Nominal rate in bits per symbol.
    pub rate: f64,
    pub sigma_sq: f64,
    pub radius: f64,
    /// `ceil(n * rate)`; the codebook holds `2^bits` words.
    pub bits: u32,
    words: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        1usize << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn word(&self, index: usize) -> &[f64] {
        &self.words[index * self.n..(index + 1) * self.n]
    }

    pub fn words(&self) -> impl Iterator<Item = &[f64]> {
        self.words.chunks_exact(self.n)
    }

    /// Rate actually used after rounding the word count up to a power of two.
    pub fn realized_rate(&self) -> f64 {
        self.bits as f64 / self.n as f64
    }

    /// Transmit scaling `sqrt(P / (sigma^2 (1 - 2^{-2R})))`; zero for a
    /// rate-zero codebook, whose only word is the origin.
    pub fn power_scale(&self, power: f64) -> f64 {
        let var = self.sigma_sq * (1.0 - residual(self.rate));
        if var > 0.0 {
            (power / var).sqrt()
        } else {
            0.0
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn generate_codebook(n: usize, rate: f64, sigma_sq: f64, seed: u64) -> Result<Codebook> {
    if n == 0 {
        return Err(invalid("n", "blocklength must be >= 1"));
    }
    if !rate.is_finite() || rate < 0.0 {
        return Err(invalid(
            "rate",
            format!("must be finite and >= 0, got {rate}"),
        ));
    }
    crate::error::require_positive("sigma_sq", sigma_sq)?;
    let raw_bits = (n as f64 * rate - 1e-9).ceil().max(0.0);
    if raw_bits > MAX_CODEBOOK_BITS as f64 {
        return Err(Error::CodebookTooLarge {
            bits: raw_bits.min(u32::MAX as f64) as u32,
            cap: MAX_CODEBOOK_BITS,
        });
    }
    let bits = raw_bits as u32;
    let count = 1usize << bits;
    let radius = (n as f64 * sigma_sq * (1.0 - residual(rate))).sqrt();
    let mut words = vec![0.0; count * n];
    if radius > 0.0 {
        let mut blocks: Vec<&mut [f64]> = words.chunks_mut(WORD_CHUNK * n).collect();
        par::for_each_mut(&mut blocks, |chunk, block| {
            let mut rng = par::rng_for(seed, WORD_STREAM, chunk as u64);
            for w in block.chunks_exact_mut(n) {
                loop {
                    for v in w.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let norm = dot(w, w).sqrt();
                    if norm > 0.0 {
                        w.iter_mut().for_each(|v| *v *= radius / norm);
                        break;
                    }
                }
            }
        });
    }
    Ok(Codebook {
        n,
        rate,
        sigma_sq,
        radius,
        bits,
        words,
    })
}

/// Picks the word with the largest inner product with `s` (lowest index on
/// ties) and returns it scaled to full power.
pub fn encode(cb: &Codebook, s: &[f64], power: f64) -> Result<(usize, Vec<f64>)> {
    if s.len() != cb.n {
        return Err(invalid(
            "s",
            format!("block length {} != codebook n {}", s.len(), cb.n),
        ));
    }
    let index = nearest_word(cb, s);
    let alpha = cb.power_scale(power);
    Ok((index, cb.word(index).iter().map(|u| alpha * u).collect()))
}

fn nearest_word(cb: &Codebook, s: &[f64]) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, w) in cb.words().enumerate() {
        let v = dot(s, w);
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub index1: usize,
    pub index2: usize,
    /// No pair passed the typicality filter; the unconstrained search was used.
    pub fallback: bool,
}

/// Best-aligned pair among the pairs whose codeword correlation lies within
/// `delta_typ` of `rho_tilde`.
///
/// The score of a pair is `<a1 u1 + a2 u2, y> / |a1 u1 + a2 u2|`. All words of
/// a codebook share one norm, so the denominator depends on the pair only
/// through `<u1, u2>`, which the filter confines to a window. Pairs are
/// visited in decreasing numerator order and the walk stops once the
/// numerator over the smallest admissible denominator cannot beat the best
/// score found. The result equals an exhaustive search over all pairs.
pub fn decode(
    cb1: &Codebook,
    cb2: &Codebook,
    y: &[f64],
    rho_tilde: f64,
    delta_typ: f64,
    alpha1: f64,
    alpha2: f64,
) -> Result<DecodeOutcome> {
    if delta_typ.is_nan() || delta_typ <= 0.0 {
        return Err(invalid(
            "delta_typ",
            format!("must be > 0, got {delta_typ}"),
        ));
    }
    if cb1.n != y.len() || cb2.n != y.len() {
        return Err(invalid(
            "y",
            "channel block length does not match the codebooks",
        ));
    }
    let search = PairSearch::new(cb1, cb2, y, alpha1, alpha2);
    let rr = cb1.radius * cb2.radius;
    let window = ((rho_tilde - delta_typ) * rr, (rho_tilde + delta_typ) * rr);
    if let Some((index1, index2)) = search.best(window) {
        return Ok(DecodeOutcome {
            index1,
            index2,
            fallback: false,
        });
    }
    let (index1, index2) = search
        .best((f64::NEG_INFINITY, f64::INFINITY))
        .unwrap_or((0, 0));
    Ok(DecodeOutcome {
        index1,
        index2,
        fallback: true,
    })
}

struct PairSearch<'a> {
    cb1: &'a Codebook,
    cb2: &'a Codebook,
    /// Weighted inner products `alpha_i <u, y>` per word.
    v1: Vec<f64>,
    v2: Vec<f64>,
    order1: Vec<usize>,
    order2: Vec<usize>,
    alpha1: f64,
    alpha2: f64,
}

impl<'a> PairSearch<'a> {
    fn new(cb1: &'a Codebook, cb2: &'a Codebook, y: &[f64], alpha1: f64, alpha2: f64) -> Self {
        let weigh = |cb: &Codebook, alpha: f64| -> Vec<f64> {
            cb.words().map(|w| alpha * dot(w, y)).collect()
        };
        let v1 = weigh(cb1, alpha1);
        let v2 = weigh(cb2, alpha2);
        let sorted = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
            idx
        };
        let order1 = sorted(&v1);
        let order2 = sorted(&v2);
        Self {
            cb1,
            cb2,
            v1,
            v2,
            order1,
            order2,
            alpha1,
            alpha2,
        }
    }

    fn denominator(&self, g: f64) -> f64 {
        let (a, b) = (self.alpha1 * self.cb1.radius, self.alpha2 * self.cb2.radius);
        (a * a + b * b + 2.0 * self.alpha1 * self.alpha2 * g)
            .max(0.0)
            .sqrt()
    }

    /// Exact argmax of the score over pairs with `<u1, u2>` in `window`.
    fn best(&self, window: (f64, f64)) -> Option<(usize, usize)> {
        let rr = self.cb1.radius * self.cb2.radius;
        let (lo, hi) = (window.0.max(-rr), window.1.min(rr));
        if lo > hi {
            return None;
        }
        let (den_min, den_max) = (self.denominator(lo), self.denominator(hi));
        let bound = |num: f64| {
            if num >= 0.0 {
                if den_min > 0.0 {
                    num / den_min
                } else {
                    f64::INFINITY
                }
            } else {
                num / den_max
            }
        };
        let top2 = self.v2[self.order2[0]];
        let mut best: Option<(f64, usize, usize)> = None;
        for &i in &self.order1 {
            let vi = self.v1[i];
            if let Some((s, _, _)) = best {
                if bound(vi + top2) < s {
                    break;
                }
            }
            let u1 = self.cb1.word(i);
            for &j in &self.order2 {
                let num = vi + self.v2[j];
                if let Some((s, _, _)) = best {
                    if bound(num) < s {
                        break;
                    }
                }
                let g = dot(u1, self.cb2.word(j));
                if g < lo || g > hi {
                    continue;
                }
                let den = self.denominator(g);
                let score = if den > 0.0 { num / den } else { 0.0 };
                let better = match best {
                    None => true,
                    Some((s, bi, bj)) => score > s || (score == s && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((score, i, j));
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }
}

/// Linear reconstruction weights: `s1_hat = beta1 u1 + gamma1 u2` and
/// `s2_hat = beta2 u1 + gamma2 u2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub beta1: f64,
    pub gamma1: f64,
    pub beta2: f64,
    pub gamma2: f64,
}

/// MMSE weights for estimating each source from the two codewords, as if all
/// four were jointly Gaussian with the codeword statistics of the scheme.
pub fn reconstruction_coefficients(
    rho: f64,
    r1: f64,
    r2: f64,
    sigma_sq: f64,
) -> Result<Reconstruction> {
    crate::model::check_rho(rho, 0.0)?;
    crate::error::require_positive("sigma_sq", sigma_sq)?;
    if !(r1 >= 0.0 && r2 >= 0.0) {
        return Err(invalid("rates", "must be >= 0"));
    }
    // Var(U_i); Cov(S_i, U_i) = Var(U_i); Cov(S_j, U_i) = rho Var(U_i).
    let v1 = sigma_sq * (1.0 - residual(r1));
    let v2 = sigma_sq * (1.0 - residual(r2));
    match (v1 > 0.0, v2 > 0.0) {
        (false, false) => Ok(Reconstruction {
            beta1: 0.0,
            gamma1: 0.0,
            beta2: 0.0,
            gamma2: 0.0,
        }),
        (true, false) => Ok(Reconstruction {
            beta1: 1.0,
            gamma1: 0.0,
            beta2: rho,
            gamma2: 0.0,
        }),
        (false, true) => Ok(Reconstruction {
            beta1: 0.0,
            gamma1: rho,
            beta2: 0.0,
            gamma2: 1.0,
        }),
        (true, true) => {
            let rt = rho_tilde(rho, r1, r2);
            let k = 1.0 - rt * rt;
            if k <= 1e-12 {
                return Err(Error::SingularReconstruction { rho_tilde: rt });
            }
            let c12 = rt * (v1 * v2).sqrt();
            let det = v1 * v2 * k;
            let solve = |b1: f64, b2: f64| ((v2 * b1 - c12 * b2) / det, (v1 * b2 - c12 * b1) / det);
            let (beta1, gamma1) = solve(v1, rho * v2);
            let (beta2, gamma2) = solve(rho * v1, v2);
            Ok(Reconstruction {
                beta1,
                gamma1,
                beta2,
                gamma2,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqTrialStats {
    /// Mean per-symbol squared error over all trials.
    pub empirical_d1: f64,
    pub empirical_d2: f64,
    /// Same, restricted to trials where both codewords were decoded correctly.
    pub conditional_d1: Option<f64>,
    pub conditional_d2: Option<f64>,
    /// Mean of `|s_i - u_i*|^2 / n`.
    pub quantizer_mse1: f64,
    pub quantizer_mse2: f64,
    /// Mean normalized inner product of the two chosen codewords.
    pub empirical_codeword_corr: f64,
    pub decode_error_count: usize,
    pub fallback_count: usize,
    pub trials: usize,
    pub n: usize,
    pub realized_rate1: f64,
    pub realized_rate2: f64,
    /// Largest relative deviation of a block's power `|x_i|^2 / n` from `P_i`.
    pub max_power_deviation: f64,
    pub delta_typ: f64,
    pub rates_in_region: bool,
}

impl VqTrialStats {
    pub fn decode_error_rate(&self) -> f64 {
        self.decode_error_count as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialOutcome {
    err1: f64,
    err2: f64,
    q1: f64,
    q2: f64,
    corr: f64,
    correct: bool,
    fallback: bool,
    power_dev: f64,
}

/// Runs `trials` independent blocks of length `n` through the scheme.
///
/// Both codebooks are drawn once from `seed`; each trial draws its source
/// and noise from a seed derived from `(seed, trial)`.
pub fn simulate_vq(
    c: &CanonicalInstance,
    rates: &RatePair,
    n: usize,
    trials: usize,
    delta_typ: f64,
    seed: u64,
) -> Result<VqTrialStats> {
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    if delta_typ.is_nan() || delta_typ <= 0.0 {
        return Err(invalid(
            "delta_typ",
            format!("must be > 0, got {delta_typ}"),
        ));
    }
    let rates = RatePair::new(c.rho, rates.r1, rates.r2)?;
    let cb1 = generate_codebook(
        n,
        rates.r1,
        c.sigma_sq,
        par::derive_seed(seed, stream::CODEBOOK_1, 0),
    )?;
    let cb2 = generate_codebook(
        n,
        rates.r2,
        c.sigma_sq,
        par::derive_seed(seed, stream::CODEBOOK_2, 0),
    )?;
    let coef = reconstruction_coefficients(c.rho, rates.r1, rates.r2, c.sigma_sq)?;
    let (alpha1, alpha2) = (cb1.power_scale(c.p1), cb2.power_scale(c.p2));
    let sampler = ChunkSampler::new(c);
    let nf = n as f64;

    let outcomes = par::map_indexed(trials, |t| -> Result<TrialOutcome> {
        let (mut s1, mut s2, mut z) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        sampler.fill(
            par::derive_seed(seed, stream::VQ_TRIAL, t as u64),
            0,
            &mut s1,
            &mut s2,
            &mut z,
        );
        let (i1, x1) = encode(&cb1, &s1, c.p1)?;
        let (i2, x2) = encode(&cb2, &s2, c.p2)?;
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .zip(&z)
            .map(|((a, b), e)| a + b + e)
            .collect();
        let dec = decode(&cb1, &cb2, &y, rates.rho_tilde, delta_typ, alpha1, alpha2)?;
        let (u1, u2) = (cb1.word(dec.index1), cb2.word(dec.index2));
        let mut err1 = 0.0;
        let mut err2 = 0.0;
        for k in 0..n {
            let e1 = s1[k] - (coef.beta1 * u1[k] + coef.gamma1 * u2[k]);
            let e2 = s2[k] - (coef.beta2 * u1[k] + coef.gamma2 * u2[k]);
            err1 += e1 * e1;
            err2 += e2 * e2;
        }
        let (w1, w2) = (cb1.word(i1), cb2.word(i2));
        let norms = dot(w1, w1).sqrt() * dot(w2, w2).sqrt();
        let corr = if norms > 0.0 {
            dot(w1, w2) / norms
        } else {
            0.0
        };
        let dev = |x: &[f64], p: f64| {
            let pw = dot(x, x) / nf;
            if pw == 0.0 {
                0.0
            } else {
                (pw / p - 1.0).abs()
            }
        };
        Ok(TrialOutcome {
            err1: err1 / nf,
            err2: err2 / nf,
            q1: sq_dist(&s1, w1) / nf,
            q2: sq_dist(&s2, w2) / nf,
            corr,
            correct: dec.index1 == i1 && dec.index2 == i2,
            fallback: dec.fallback,
            power_dev: dev(&x1, c.p1).max(dev(&x2, c.p2)),
        })
    });

    let mut sum = TrialOutcome::default();
    let (mut cond1, mut cond2, mut correct, mut fallbacks) = (0.0, 0.0, 0usize, 0usize);
    for o in outcomes {
        let o = o?;
        sum.err1 += o.err1;
        sum.err2 += o.err2;
        sum.q1 += o.q1;
        sum.q2 += o.q2;
        sum.corr += o.corr;
        sum.power_dev = sum.power_dev.max(o.power_dev);
        if o.correct {
            correct += 1;
            cond1 += o.err1;
            cond2 += o.err2;
        }
        fallbacks += usize::from(o.fallback);
    }
    let tf = trials as f64;
    let conditional = |s: f64| (correct > 0).then(|| s / correct as f64);
    Ok(VqTrialStats {
        empirical_d1: sum.err1 / tf,
        empirical_d2: sum.err2 / tf,
        conditional_d1: conditional(cond1),
        conditional_d2: conditional(cond2),
        quantizer_mse1: sum.q1 / tf,
        quantizer_mse2: sum.q2 / tf,
        empirical_codeword_corr: sum.corr / tf,
        decode_error_count: trials - correct,
        fallback_count: fallbacks,
        trials,
        n,
        realized_rate1: cb1.realized_rate(),
        realized_rate2: cb2.realized_rate(),
        max_power_deviation: sum.power_dev,
        delta_typ,
        rates_in_region: in_rate_region(c, &rates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    /// Exhaustive reference decoder.
    fn brute_force_decode(
        cb1: &Codebook,
        cb2: &Codebook,
        y: &[f64],
        rho_tilde: f64,
        delta: f64,
        a1: f64,
        a2: f64,
    ) -> (usize, usize, bool) {
        let ny = dot(y, y).sqrt();
        let mut best: Option<(f64, usize, usize)> = None;
        let mut all: Option<(f64, usize, usize)> = None;
        for (i, u1) in cb1.words().enumerate() {
            for (j, u2) in cb2.words().enumerate() {
                let x: Vec<f64> = u1.iter().zip(u2).map(|(p, q)| a1 * p + a2 * q).collect();
                let score = dot(&x, y) / (dot(&x, &x).sqrt() * ny);
                let n1 = dot(u1, u1).sqrt();
                let n2 = dot(u2, u2).sqrt();
                let typical = (dot(u1, u2) - rho_tilde * n1 * n2).abs() <= delta * n1 * n2;
                if all.is_none_or(|(s, _, _)| score > s) {
                    all = Some((score, i, j));
                }
                if typical && best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => (i, j, false),
            None => {
                let (_, i, j) = all.unwrap();
                (i, j, true)
            }
        }
    }

    #[test]
    fn codebook_shape() {
        let cb = generate_codebook(16, 0.5, 1.0, 1).unwrap();
        assert_eq!(cb.len(), 256);
        let r = (16.0f64 * 0.5).sqrt();
        assert_abs_diff_eq!(cb.radius, r, epsilon = 1e-12);
        for w in cb.words() {
            assert!((dot(w, w).sqrt() / r - 1.0).abs() < 1e-9);
        }
        assert_eq!(cb, generate_codebook(16, 0.5, 1.0, 1).unwrap());
        assert_ne!(cb, generate_codebook(16, 0.5, 1.0, 2).unwrap());
    }

    #[test]
    fn rate_zero_codebook_is_the_origin() {
        let cb = generate_codebook(8, 0.0, 1.0, 1).unwrap();
        assert_eq!(cb.len(), 1);
        assert!(cb.word(0).iter().all(|&v| v == 0.0));
        assert_eq!(cb.power_scale(3.0), 0.0);
    }

    #[test]
    fn codebook_cap_is_enforced() {
        assert!(matches!(
            generate_codebook(46, 0.5, 1.0, 1),
            Err(Error::CodebookTooLarge { bits: 23, cap: 22 })
        ));
        assert!(generate_codebook(0, 0.5, 1.0, 1).is_err());
        assert!(generate_codebook(4, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn codewords_are_nearly_orthogonal() {
        let cb = generate_codebook(64, 0.125, 1.0, 9).unwrap();
        let r2 = cb.radius * cb.radius;
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..cb.len() {
            for j in (i + 1)..cb.len() {
                total += dot(cb.word(i), cb.word(j)) / r2;
                pairs += 1;
            }
        }
        assert!((total / pairs as f64).abs() < 0.05);
    }

    #[test]
    fn encoder_picks_the_aligned_word() {
        let cb = generate_codebook(12, 0.5, 2.0, 3).unwrap();
        let s: Vec<f64> = cb.word(17).iter().map(|v| v * 0.7).collect();
        let (idx, x) = encode(&cb, &s, 5.0).unwrap();
        assert_eq!(idx, 17);
        // alpha * radius = sqrt(n P)
        assert_abs_diff_eq!(dot(&x, &x), 12.0 * 5.0, epsilon = 1e-9);
        assert!(encode(&cb, &s[..5], 5.0).is_err());
    }

    #[test]
    fn quantizer_error_is_near_the_rate_distortion_value() {
        let cb = generate_codebook(16, 0.5, 1.0, 4).unwrap();
        let c = CanonicalInstance::symmetric(1.0, 0.0, 1.0, 1.0).unwrap();
        let mut total = 0.0;
        for t in 0..2000u64 {
            let b = crate::model::sample_source_and_noise(&c, 16, t).unwrap();
            let (i, _) = encode(&cb, &b.s1, 1.0).unwrap();
            total += sq_dist(&b.s1, cb.word(i)) / 16.0;
        }
        let mse = total / 2000.0;
        assert!((mse / 0.5 - 1.0).abs() < 0.25, "mse {mse}");
    }

    #[test]
    fn pruned_search_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for case in 0..60u64 {
            let n = 6 + (case as usize % 5);
            let cb1 = generate_codebook(n, 0.75, 1.0, 100 + case).unwrap();
            let cb2 = generate_codebook(n, 0.5, 1.0, 200 + case).unwrap();
            let y: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let rt = rng.random_range(0.0..0.8);
            let delta = [0.02, 0.05, 0.2, 2.0][case as usize % 4];
            let (a1, a2) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
            let fast = decode(&cb1, &cb2, &y, rt, delta, a1, a2).unwrap();
            let (i, j, fb) = brute_force_decode(&cb1, &cb2, &y, rt, delta, a1, a2);
            assert_eq!(
                (fast.index1, fast.index2, fast.fallback),
                (i, j, fb),
                "case {case}"
            );
        }
    }

    #[test]
    fn noiseless_channel_recovers_the_pair() {
        let cb1 = generate_codebook(16, 0.5, 1.0, 1).unwrap();
        let cb2 = generate_codebook(16, 0.5, 1.0, 2).unwrap();
        let (a1, a2) = (cb1.power_scale(4.0), cb2.power_scale(4.0));
        let (i, j) = (37, 201);
        let g = dot(cb1.word(i), cb2.word(j)) / (cb1.radius * cb2.radius);
        let y: Vec<f64> = cb1
            .word(i)
            .iter()
            .zip(cb2.word(j))
            .map(|(p, q)| a1 * p + a2 * q)
            .collect();
        let out = decode(&cb1, &cb2, &y, g, 0.01, a1, a2).unwrap();
        assert_eq!((out.index1, out.index2, out.fallback), (i, j, false));
        // a filter of width 1 around 0 accepts every pair
        let out = decode(&cb1, &cb2, &y, 0.0, 1.0, a1, a2).unwrap();
        assert_eq!((out.index1, out.index2), (i, j));
        assert!(decode(&cb1, &cb2, &y, 0.0, 0.0, a1, a2).is_err());
    }

    #[test]
    fn empty_filter_falls_back() {
        let cb1 = generate_codebook(8, 0.25, 1.0, 1).unwrap();
        let cb2 = generate_codebook(8, 0.25, 1.0, 2).unwrap();
        let y = vec![1.0; 8];
        // correlation window entirely above +1
        let out = decode(&cb1, &cb2, &y, 1.5, 0.1, 1.0, 1.0).unwrap();
        assert!(out.fallback);
    }

    #[test]
    fn reconstruction_examples() {
        let r = reconstruction_coefficients(0.0, 0.7, 1.3, 2.0).unwrap();
        assert_abs_diff_eq!(r.beta1, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.gamma1, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.gamma2, 1.0, epsilon = 1e-14);
        let r = reconstruction_coefficients(0.8, 0.5, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(r.beta1, 17.0 / 21.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.gamma1, 10.0 / 21.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.beta2, r.gamma1, epsilon = 1e-14);
        assert_abs_diff_eq!(r.gamma2, r.beta1, epsilon = 1e-14);
        let r = reconstruction_coefficients(0.6, 0.0, 0.0, 1.0).unwrap();
        assert_eq!((r.beta1, r.gamma1, r.beta2, r.gamma2), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            reconstruction_coefficients(1.0, 40.0, 40.0, 1.0),
            Err(Error::SingularReconstruction { .. })
        ));
    }

    /// The weights reproduce the analytic distortion under the assumed
    /// Gaussian statistics.
    #[test]
    fn reconstruction_error_matches_the_analytic_distortion() {
        let c = CanonicalInstance::new(1.0, 0.6, 1.0, 1.0, 1.0).unwrap();
        for (r1, r2) in [(0.5, 0.5), (0.2, 1.1), (2.0, 0.3)] {
            let rates = RatePair::new(0.6, r1, r2).unwrap();
            let k = reconstruction_coefficients(0.6, r1, r2, 1.0).unwrap();
            let v1 = 1.0 - residual(r1);
            let v2 = 1.0 - residual(r2);
            let mse1 = 1.0 - (k.beta1 * v1 + k.gamma1 * 0.6 * v2);
            let d = crate::vq_analytic::vq_distortions(&c, &rates);
            assert_abs_diff_eq!(mse1, d.d1, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_rate_simulation_estimates_zero() {
        let c = CanonicalInstance::symmetric(1.0, 0.5, 1.0, 1.0).unwrap();
        let rates = RatePair::new(0.5, 0.0, 0.0).unwrap();
        let st = simulate_vq(&c, &rates, 16, 400, DEFAULT_DELTA_TYP, 1).unwrap();
        assert!((st.empirical_d1 - 1.0).abs() < 0.05);
        assert!((st.empirical_d2 - 1.0).abs() < 0.05);
        assert_eq!(st.decode_error_count, 0);
    }

    #[test]
    fn simulation_is_deterministic_and_meets_power() {
        let c = CanonicalInstance::symmetric(1.0, 0.8, 10.0, 1.0).unwrap();
        let rates = RatePair::new(0.8, 0.5, 0.5).unwrap();
        let a = simulate_vq(&c, &rates, 12, 60, DEFAULT_DELTA_TYP, 77).unwrap();
        let b = simulate_vq(&c, &rates, 12, 60, DEFAULT_DELTA_TYP, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.max_power_deviation < 1e-9);
        assert!(a.rates_in_region);
        assert_eq!(a.realized_rate1, 0.5);
    }

    #[test]
    fn wide_window_decodes_reliably_at_high_snr() {
        let c = CanonicalInstance::symmetric(1.0, 0.8, 100.0, 1.0).unwrap();
        let rates = RatePair::new(0.8, 0.5, 0.5).unwrap();
        let st = simulate_vq(&c, &rates, 24, 500, 0.3, 2024).unwrap();
        assert!(st.rates_in_region);
        assert!(
            st.decode_error_rate() < 0.1,
            "error rate {}",
            st.decode_error_rate()
        );
    }
}
