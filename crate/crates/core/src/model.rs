//! Problem instances, canonicalization and seeded sampling.
//!
//! Every bound in this crate is evaluated on a [`CanonicalInstance`]: equal
//! source variances and a nonnegative correlation. A flipped sign on one
//! component and a rescaled component do not change which distortion pairs
//! are achievable beyond a known linear map, so nothing is lost.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Result};
use crate::par::{self, stream};

/// Source and channel parameters in original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho: f64,
    pub p1: f64,
    pub p2: f64,
    pub noise_var: f64,
}

impl ProblemInstance {
    pub fn new(
        sigma1_sq: f64,
        sigma2_sq: f64,
        rho: f64,
        p1: f64,
        p2: f64,
        noise_var: f64,
    ) -> Result<Self> {
        let inst = Self {
            sigma1_sq,
            sigma2_sq,
            rho,
            p1,
            p2,
            noise_var,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Equal variances, equal powers.
    pub fn symmetric(sigma_sq: f64, rho: f64, p: f64, noise_var: f64) -> Result<Self> {
        Self::new(sigma_sq, sigma_sq, rho, p, p, noise_var)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma1_sq", self.sigma1_sq)?;
        require_positive("sigma2_sq", self.sigma2_sq)?;
        require_positive("p1", self.p1)?;
        require_positive("p2", self.p2)?;
        require_positive("noise_var", self.noise_var)?;
        check_rho(self.rho, -1.0)
    }
}

pub(crate) fn check_rho(rho: f64, lower: f64) -> Result<()> {
    if (lower..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(invalid(
            "rho",
            format!("must lie in [{lower}, 1], got {rho}"),
        ))
    }
}

/// Equal-variance, nonnegative-correlation form of a [`ProblemInstance`].
///
/// `scale1` and `scale2` multiply canonical distortions to give distortions in
/// the original units. The common variance is `sigma1_sq`, so `scale1` is
/// always 1 and `scale2 = sigma2_sq / sigma1_sq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInstance {
    pub sigma_sq: f64,
    pub rho: f64,
    pub p1: f64,
    pub p2: f64,
    pub noise_var: f64,
    pub scale1: f64,
    pub scale2: f64,
    pub sign_flipped: bool,
}

impl CanonicalInstance {
    /// Builds an already-canonical instance directly (unit scales, no flip).
    pub fn new(sigma_sq: f64, rho: f64, p1: f64, p2: f64, noise_var: f64) -> Result<Self> {
        require_positive("sigma_sq", sigma_sq)?;
        require_positive("p1", p1)?;
        require_positive("p2", p2)?;
        require_positive("noise_var", noise_var)?;
        check_rho(rho, 0.0)?;
        Ok(Self {
            sigma_sq,
            rho,
            p1,
            p2,
            noise_var,
            scale1: 1.0,
            scale2: 1.0,
            sign_flipped: false,
        })
    }

    pub fn symmetric(sigma_sq: f64, rho: f64, p: f64, noise_var: f64) -> Result<Self> {
        Self::new(sigma_sq, rho, p, p, noise_var)
    }

    pub fn is_symmetric(&self) -> bool {
        self.p1 == self.p2
    }
}

/// Per-component mean squared errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionPair {
    pub d1: f64,
    pub d2: f64,
}

impl DistortionPair {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 >= 0.0 && d1.is_finite()) {
            return Err(invalid("d1", format!("must be finite and >= 0, got {d1}")));
        }
        if !(d2 >= 0.0 && d2.is_finite()) {
            return Err(invalid("d2", format!("must be finite and >= 0, got {d2}")));
        }
        Ok(Self { d1, d2 })
    }

    pub fn swapped(self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
        }
    }
}

/// IID source pairs and channel noise of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub z: Vec<f64>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }
}

pub fn canonicalize(inst: &ProblemInstance) -> CanonicalInstance {
    CanonicalInstance {
        sigma_sq: inst.sigma1_sq,
        rho: inst.rho.abs(),
        p1: inst.p1,
        p2: inst.p2,
        noise_var: inst.noise_var,
        scale1: 1.0,
        scale2: inst.sigma2_sq / inst.sigma1_sq,
        sign_flipped: inst.rho < 0.0,
    }
}

/// Maps a canonical distortion pair to original units.
pub fn decanonicalize_distortion(c: &CanonicalInstance, d: DistortionPair) -> DistortionPair {
    DistortionPair {
        d1: d.d1 * c.scale1,
        d2: d.d2 * c.scale2,
    }
}

/// Inverse of [`decanonicalize_distortion`]: original units to canonical.
pub fn canonicalize_distortion(c: &CanonicalInstance, d: DistortionPair) -> DistortionPair {
    DistortionPair {
        d1: d.d1 / c.scale1,
        d2: d.d2 / c.scale2,
    }
}

/// Samples per RNG chunk. Fixed so that batches do not depend on threading.
pub(crate) const SAMPLE_CHUNK: usize = 1 << 14;

/// Source pair and noise generator for one chunk of a batch.
pub(crate) struct ChunkSampler {
    sigma: f64,
    rho: f64,
    rho_c: f64,
    noise_sd: f64,
}

impl ChunkSampler {
    pub(crate) fn new(c: &CanonicalInstance) -> Self {
        Self {
            sigma: c.sigma_sq.sqrt(),
            rho: c.rho,
            rho_c: (1.0 - c.rho * c.rho).max(0.0).sqrt(),
            noise_sd: c.noise_var.sqrt(),
        }
    }

    /// Fills the three slices (equal length) for chunk `index` of `seed`.
    pub(crate) fn fill(
        &self,
        seed: u64,
        index: u64,
        s1: &mut [f64],
        s2: &mut [f64],
        z: &mut [f64],
    ) {
        let mut src = par::rng_for(seed, stream::SOURCE, index);
        for (a, b) in s1.iter_mut().zip(s2.iter_mut()) {
            let g1: f64 = src.sample(StandardNormal);
            let g2: f64 = src.sample(StandardNormal);
            *a = self.sigma * g1;
            *b = self.sigma * (self.rho * g1 + self.rho_c * g2);
        }
        let mut noise = par::rng_for(seed, stream::NOISE, index);
        for v in z.iter_mut() {
            let g: f64 = noise.sample(StandardNormal);
            *v = self.noise_sd * g;
        }
    }
}

pub fn sample_source_and_noise(c: &CanonicalInstance, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(invalid("n", "sample count must be >= 1"));
    }
    let mut batch = SampleBatch {
        s1: vec![0.0; n],
        s2: vec![0.0; n],
        z: vec![0.0; n],
        seed,
    };
    let sampler = ChunkSampler::new(c);
    let mut parts: Vec<_> = batch
        .s1
        .chunks_mut(SAMPLE_CHUNK)
        .zip(batch.s2.chunks_mut(SAMPLE_CHUNK))
        .zip(batch.z.chunks_mut(SAMPLE_CHUNK))
        .map(|((a, b), z)| (a, b, z))
        .collect();
    par::for_each_mut(&mut parts, |i, (a, b, z)| {
        sampler.fill(seed, i as u64, a, b, z);
    });
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn canonical_input_is_identity() {
        let c = canonicalize(&ProblemInstance::new(1.0, 1.0, 0.5, 2.0, 2.0, 3.0).unwrap());
        assert_eq!(
            (c.sigma_sq, c.rho, c.scale1, c.scale2),
            (1.0, 0.5, 1.0, 1.0)
        );
        assert!(!c.sign_flipped);
    }

    #[test]
    fn negative_rho_and_unequal_variances() {
        let inst = ProblemInstance::new(4.0, 1.0, -0.5, 1.0, 2.0, 1.0).unwrap();
        let c = canonicalize(&inst);
        assert_eq!((c.sigma_sq, c.rho), (4.0, 0.5));
        assert!(c.sign_flipped);
        // canonical distortion 4 on component 2 is the full variance 1 originally
        assert_relative_eq!(c.scale2, 0.25);
        let d = DistortionPair::new(0.5, 0.5).unwrap();
        let back = canonicalize_distortion(&c, decanonicalize_distortion(&c, d));
        assert_relative_eq!(back.d1, 0.5, max_relative = 1e-12);
        assert_relative_eq!(back.d2, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn ninefold_second_variance() {
        let c = canonicalize(&ProblemInstance::new(1.0, 9.0, 0.0, 1.0, 1.0, 1.0).unwrap());
        assert_eq!((c.sigma_sq, c.rho), (1.0, 0.0));
        assert_relative_eq!(c.scale2, 9.0);
        let d = canonicalize_distortion(&c, DistortionPair::new(0.9, 8.1).unwrap());
        assert_relative_eq!(d.d2, 0.9, max_relative = 1e-12);
    }

    #[test]
    fn decanonicalize_multiplies_by_scales() {
        let mut c = CanonicalInstance::symmetric(1.0, 0.5, 1.0, 1.0).unwrap();
        let d = DistortionPair::new(0.5, 0.5).unwrap();
        assert_eq!(decanonicalize_distortion(&c, d), d);
        c.scale2 = 4.0;
        assert_eq!(decanonicalize_distortion(&c, d).d2, 2.0);
        c.scale2 = 1.0 / 9.0;
        let d = decanonicalize_distortion(&c, DistortionPair::new(0.9, 0.9).unwrap());
        assert_relative_eq!(d.d2, 0.1, max_relative = 1e-12);
    }

    #[test]
    fn sign_flip_only_changes_the_flag() {
        let a = canonicalize(&ProblemInstance::new(2.0, 3.0, 0.7, 1.0, 2.0, 0.5).unwrap());
        let mut b = canonicalize(&ProblemInstance::new(2.0, 3.0, -0.7, 1.0, 2.0, 0.5).unwrap());
        assert!(b.sign_flipped);
        b.sign_flipped = false;
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_instances() {
        assert!(ProblemInstance::new(0.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemInstance::new(1.0, 1.0, 1.5, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemInstance::new(1.0, 1.0, f64::NAN, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemInstance::new(1.0, 1.0, 0.0, 1.0, -1.0, 1.0).is_err());
        assert!(CanonicalInstance::new(1.0, -0.1, 1.0, 1.0, 1.0).is_err());
        assert!(DistortionPair::new(-0.1, 1.0).is_err());
    }

    #[test]
    fn perfectly_correlated_components_coincide() {
        let c = CanonicalInstance::symmetric(2.0, 1.0, 1.0, 1.0).unwrap();
        let b = sample_source_and_noise(&c, 1000, 3).unwrap();
        assert_eq!(b.s1, b.s2);
    }

    #[test]
    fn independent_components_are_uncorrelated() {
        let c = CanonicalInstance::symmetric(1.0, 0.0, 1.0, 1.0).unwrap();
        let b = sample_source_and_noise(&c, 1_000_000, 11).unwrap();
        assert!(corr(&b.s1, &b.s2).abs() < 0.005);
    }

    #[test]
    fn moments_match_the_instance() {
        let c = CanonicalInstance::symmetric(2.5, 0.6, 1.0, 0.7).unwrap();
        let b = sample_source_and_noise(&c, 1_000_000, 5).unwrap();
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!((var(&b.s1) / 2.5 - 1.0).abs() < 0.01);
        assert!((var(&b.s2) / 2.5 - 1.0).abs() < 0.01);
        assert!((var(&b.z) / 0.7 - 1.0).abs() < 0.01);
        assert!((corr(&b.s1, &b.s2) - 0.6).abs() < 0.005);
        assert!(corr(&b.s1, &b.z).abs() < 0.005);
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = CanonicalInstance::symmetric(1.0, 0.3, 1.0, 1.0).unwrap();
        let a = sample_source_and_noise(&c, 50_000, 42).unwrap();
        let b = sample_source_and_noise(&c, 50_000, 42).unwrap();
        assert_eq!(a, b);
        let other = sample_source_and_noise(&c, 50_000, 43).unwrap();
        assert_ne!(a.s1, other.s1);
        assert!(sample_source_and_noise(&c, 0, 1).is_err());
    }

    #[test]
    fn prefix_is_stable_when_n_grows() {
        let c = CanonicalInstance::symmetric(1.0, 0.3, 1.0, 1.0).unwrap();
        let a = sample_source_and_noise(&c, 3 * SAMPLE_CHUNK, 9).unwrap();
        let b = sample_source_and_noise(&c, 5 * SAMPLE_CHUNK + 17, 9).unwrap();
        assert_eq!(a.s1[..], b.s1[..a.len()]);
    }
}
