//! Uncoded transmission: each encoder scales its source samples to full
//! power and the receiver forms per-symbol LMMSE estimates from the channel
//! output.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{CanonicalInstance, ChunkSampler, DistortionPair, SAMPLE_CHUNK};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncodedResult {
    pub d1: f64,
    pub d2: f64,
    /// Transmit scalings `sqrt(P_i) / sigma`.
    pub gain1: f64,
    pub gain2: f64,
    /// Receiver coefficients `E[S_i Y] / Var(Y)`.
    pub lmmse1: f64,
    pub lmmse2: f64,
}

/// Variance of the channel output under uncoded transmission.
pub fn output_variance(c: &CanonicalInstance) -> f64 {
    c.p1 + c.p2 + 2.0 * c.rho * (c.p1 * c.p2).sqrt() + c.noise_var
}

pub fn uncoded_distortions(c: &CanonicalInstance) -> UncodedResult {
    let sigma = c.sigma_sq.sqrt();
    let var_y = output_variance(c);
    let (sp1, sp2) = (c.p1.sqrt(), c.p2.sqrt());
    let r2 = c.rho * c.rho;
    UncodedResult {
        d1: c.sigma_sq * (c.p2 * (1.0 - r2) + c.noise_var) / var_y,
        d2: c.sigma_sq * (c.p1 * (1.0 - r2) + c.noise_var) / var_y,
        gain1: sp1 / sigma,
        gain2: sp2 / sigma,
        lmmse1: sigma * (sp1 + c.rho * sp2) / var_y,
        lmmse2: sigma * (sp2 + c.rho * sp1) / var_y,
    }
}

/// Equal-power distortion of uncoded transmission.
pub fn symmetric_uncoded_bound(sigma_sq: f64, rho: f64, p: f64, noise_var: f64) -> f64 {
    sigma_sq * (p * (1.0 - rho * rho) + noise_var) / (2.0 * p * (1.0 + rho) + noise_var)
}

/// SNR `P/N` below which uncoded transmission meets the outer bound with
/// equal powers. Infinite for `rho = 1`.
pub fn optimality_threshold(rho: f64) -> Result<f64> {
    crate::model::check_rho(rho, 0.0)?;
    if rho >= 1.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(rho / (1.0 - rho * rho))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncodedSimulation {
    pub distortion: DistortionPair,
    /// Empirical `(1/n) sum x_{i,k}^2`.
    pub power1: f64,
    pub power2: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    err1: f64,
    err2: f64,
    pow1: f64,
    pow2: f64,
}

/// Monte Carlo run of the uncoded scheme over `n` source symbols.
///
/// The symbols are split into fixed chunks with derived seeds; chunk sums
/// are combined in chunk order, so the result does not depend on threads.
pub fn simulate_uncoded(c: &CanonicalInstance, n: usize, seed: u64) -> Result<UncodedSimulation> {
    if n == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let u = uncoded_distortions(c);
    let sampler = ChunkSampler::new(c);
    let layout = par::chunks(n, SAMPLE_CHUNK);
    let partial = par::map_indexed(layout.len(), |i| {
        let len = layout[i].1;
        let (mut s1, mut s2, mut z) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        sampler.fill(seed, i as u64, &mut s1, &mut s2, &mut z);
        let mut sums = Sums::default();
        for k in 0..len {
            let x1 = u.gain1 * s1[k];
            let x2 = u.gain2 * s2[k];
            let y = x1 + x2 + z[k];
            let e1 = s1[k] - u.lmmse1 * y;
            let e2 = s2[k] - u.lmmse2 * y;
            sums.err1 += e1 * e1;
            sums.err2 += e2 * e2;
            sums.pow1 += x1 * x1;
            sums.pow2 += x2 * x2;
        }
        sums
    });
    let total = partial.iter().fold(Sums::default(), |acc, s| Sums {
        err1: acc.err1 + s.err1,
        err2: acc.err2 + s.err2,
        pow1: acc.pow1 + s.pow1,
        pow2: acc.pow2 + s.pow2,
    });
    let nf = n as f64;
    Ok(UncodedSimulation {
        distortion: DistortionPair {
            d1: total.err1 / nf,
            d2: total.err2 / nf,
        },
        power1: total.pow1 / nf,
        power2: total.pow2 / nf,
        trials: n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rd_bounds::symmetric_outer_bound;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Component-1 error before simplification: expanded numerator over the
    /// output variance.
    fn unsimplified_d1(s: f64, rho: f64, p1: f64, p2: f64, n: f64) -> f64 {
        let cross = rho * (p1 * p2).sqrt();
        let num = 2.0 * p1 + 4.0 * cross + (1.0 + rho * rho) * p2 + n
            - 2.0 * (p1 + 2.0 * cross + rho * rho * p2).sqrt() * (p1.sqrt() + rho * p2.sqrt());
        s * num / (p1 + p2 + 2.0 * cross + n)
    }

    #[test]
    fn closed_form_examples() {
        let u = uncoded_distortions(&CanonicalInstance::symmetric(1.0, 0.5, 2.0, 3.0).unwrap());
        assert_abs_diff_eq!(u.d1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u.d2, 0.5, epsilon = 1e-15);

        let u = uncoded_distortions(&CanonicalInstance::new(1.0, 0.0, 3.0, 1.0, 1.0).unwrap());
        assert_abs_diff_eq!(u.d1, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(u.d2, 0.8, epsilon = 1e-15);
        // Var(Y) = 5, E[S1 Y] = sqrt(3)
        assert_abs_diff_eq!(u.lmmse1, 3f64.sqrt() / 5.0, epsilon = 1e-15);

        let u = uncoded_distortions(&CanonicalInstance::symmetric(1.0, 1.0, 1.0, 1.0).unwrap());
        assert_abs_diff_eq!(u.d1, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_examples() {
        assert_abs_diff_eq!(
            symmetric_uncoded_bound(1.0, 0.5, 2.0, 3.0),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            symmetric_uncoded_bound(1.0, 0.0, 1.0, 1.0),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            symmetric_uncoded_bound(4.0, 0.3, 1e-14, 1.0),
            4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn threshold_examples() {
        assert_abs_diff_eq!(
            optimality_threshold(0.5).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(optimality_threshold(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            optimality_threshold(0.8).unwrap(),
            0.8 / 0.36,
            epsilon = 1e-15
        );
        assert_eq!(optimality_threshold(1.0).unwrap(), f64::INFINITY);
        assert!(optimality_threshold(-0.1).is_err());
    }

    #[test]
    fn fields_are_lmmse_consistent() {
        let c = CanonicalInstance::new(2.0, 0.35, 1.7, 0.4, 0.9).unwrap();
        let u = uncoded_distortions(&c);
        let var_y = output_variance(&c);
        let cov1 = u.lmmse1 * var_y;
        let cov2 = u.lmmse2 * var_y;
        assert_abs_diff_eq!(u.d1, c.sigma_sq - cov1 * cov1 / var_y, epsilon = 1e-14);
        assert_abs_diff_eq!(u.d2, c.sigma_sq - cov2 * cov2 / var_y, epsilon = 1e-14);
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let c = CanonicalInstance::symmetric(1.0, 0.5, 2.0, 3.0).unwrap();
        let sim = simulate_uncoded(&c, 1_000_000, 7).unwrap();
        assert!((sim.distortion.d1 / 0.5 - 1.0).abs() < 0.01);
        assert!((sim.distortion.d2 / 0.5 - 1.0).abs() < 0.01);
        assert!((sim.power1 / 2.0 - 1.0).abs() < 0.01);
        assert!((sim.power2 / 2.0 - 1.0).abs() < 0.01);
        assert_eq!(sim, simulate_uncoded(&c, 1_000_000, 7).unwrap());
    }

    #[test]
    fn noiseless_coherent_channel() {
        let c = CanonicalInstance::symmetric(1.0, 1.0, 1.0, 1e-9).unwrap();
        let sim = simulate_uncoded(&c, 100_000, 1).unwrap();
        assert!(sim.distortion.d1 < 1e-8 && sim.distortion.d2 < 1e-8);
    }

    #[test]
    fn noiseless_independent_channel() {
        let c = CanonicalInstance::new(1.0, 0.0, 3.0, 1.0, 1e-12).unwrap();
        let sim = simulate_uncoded(&c, 400_000, 2).unwrap();
        // with N -> 0: d1 = P2 / (P1 + P2)
        assert!((sim.distortion.d1 / 0.25 - 1.0).abs() < 0.01);
        assert!((sim.distortion.d2 / 0.75 - 1.0).abs() < 0.01);
    }

    #[test]
    fn deviation_shrinks_with_more_symbols() {
        let c = CanonicalInstance::symmetric(1.0, 0.5, 2.0, 3.0).unwrap();
        let rms = |n: usize| {
            let sq: f64 = (0..16)
                .map(|s| {
                    let d = simulate_uncoded(&c, n, 100 + s).unwrap().distortion.d1 - 0.5;
                    d * d
                })
                .sum();
            (sq / 16.0).sqrt()
        };
        assert!(rms(160_000) < rms(10_000));
    }

    proptest! {
        #[test]
        fn simplified_form_equals_expanded_form(
            rho in 0.0..1.0f64, p1 in 0.01..50.0f64, p2 in 0.01..50.0f64, n in 0.05..10.0f64
        ) {
            let c = CanonicalInstance::new(1.3, rho, p1, p2, n).unwrap();
            let u = uncoded_distortions(&c);
            let expanded = unsimplified_d1(1.3, rho, p1, p2, n);
            prop_assert!((u.d1 - expanded).abs() <= 1e-10 * u.d1.max(1e-3));
        }

        #[test]
        fn equal_powers_reduce_to_symmetric_form(rho in 0.0..1.0f64, p in 0.01..100.0f64) {
            let u = uncoded_distortions(&CanonicalInstance::symmetric(1.0, rho, p, 1.0).unwrap());
            let s = symmetric_uncoded_bound(1.0, rho, p, 1.0);
            prop_assert!((u.d1 - s).abs() <= 1e-12 * s);
            prop_assert!((u.d2 - s).abs() <= 1e-12 * s);
        }

        #[test]
        fn optimal_below_threshold(rho in 0.01..0.99f64, frac in 0.0..1.0f64) {
            let snr = frac * optimality_threshold(rho).unwrap();
            prop_assume!(snr > 0.0);
            let inner = symmetric_uncoded_bound(1.0, rho, snr, 1.0);
            let outer = symmetric_outer_bound(1.0, rho, snr, 1.0);
            prop_assert!((inner - outer).abs() <= 1e-12 * outer);
        }
    }
}
