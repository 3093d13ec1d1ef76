//! Deterministic data-parallel helpers.
//!
//! Work is always split into index-addressed units whose random streams are
//! derived from `(master seed, stream tag, index)`, and results are returned
//! in index order. Any reduction done by the caller over the returned vector
//! is therefore independent of how many threads ran the map, and identical
//! to the sequential build (`--no-default-features`).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream tags keep independent consumers of one master seed apart.
pub(crate) mod stream {
    pub const SOURCE: u64 = 0x5352_4345;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const CODEBOOK_1: u64 = 0x4342_0001;
    pub const CODEBOOK_2: u64 = 0x4342_0002;
    pub const VQ_TRIAL: u64 = 0x5651_5452;
    pub const EDGE_SAMPLES: u64 = 0x4544_4745;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable 64-bit mix of `(master, stream, index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}

pub(crate) fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, stream, index))
}

/// Evaluates `f(0..count)` and returns the results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Applies `f` to every element in place.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Splits `total` items into fixed-size chunks: `(start, len)` per chunk.
/// The chunk layout depends only on `total` and `chunk`, never on threads.
pub(crate) fn chunks(total: usize, chunk: usize) -> Vec<(usize, usize)> {
    (0..total.div_ceil(chunk))
        .map(|c| {
            let start = c * chunk;
            (start, chunk.min(total - start))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_across_streams_and_indices() {
        let a = derive_seed(7, stream::SOURCE, 0);
        assert_ne!(a, derive_seed(7, stream::SOURCE, 1));
        assert_ne!(a, derive_seed(7, stream::NOISE, 0));
        assert_ne!(a, derive_seed(8, stream::SOURCE, 0));
        assert_eq!(a, derive_seed(7, stream::SOURCE, 0));
    }

    #[test]
    fn chunk_layout_covers_everything() {
        let c = chunks(10, 4);
        assert_eq!(c, vec![(0, 4), (4, 4), (8, 2)]);
        assert!(chunks(0, 4).is_empty());
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(100, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
