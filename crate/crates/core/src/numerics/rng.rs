use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// Reproducible generator for `(seed, stream_id)`. Distinct stream ids give
/// non-overlapping ChaCha keystreams under the same key.
pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// SplitMix64 mix of a seed and a tag, for deriving child seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn same_seed_same_draws() {
        let a: Vec<f64> = rng_stream(42, 3).random_iter().take(100).collect();
        let b: Vec<f64> = rng_stream(42, 3).random_iter().take(100).collect();
        assert_eq!(a, b);
        let c: Vec<f64> = rng_stream(42, 4).random_iter().take(100).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn normal_and_bernoulli_clt_bounds() {
        let n = 1_000_000;
        let mut rng = rng_stream(7, 0);
        let mean: f64 = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        let hits = (0..n).filter(|_| rng.random_bool(0.5)).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn streams_look_independent() {
        let n = 100_000;
        let mut a = rng_stream(1, 0);
        let mut b = rng_stream(1, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.sample(StandardNormal)).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.sample(StandardNormal)).collect();
        let corr = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
    }
}
