//! Counter-based random substreams for reproducible simulation.
//!
//! Every replication draws from its own [`SubStream`], derived from the
//! master seed and the replication index alone. A substream's output is a
//! pure function of `(seed, index, draw counter)`, so results are identical
//! no matter how replications are scheduled or distributed.

use crate::math;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent pseudo-random sequence.
#[derive(Debug, Clone)]
pub struct SubStream {
    stream_id: u64,
    counter: u64,
}

impl SubStream {
    /// Derive the substream for `(master seed, replication index)`.
    pub fn new(seed: u64, index: u64) -> Self {
        let stream_id = mix64(
            seed.wrapping_mul(0xA076_1D64_78BD_642F)
                ^ index.wrapping_mul(0x8E9D_5A8F_6A09_E667)
                ^ 0xE703_7ED1_A0B4_28DB,
        );
        let counter = mix64(stream_id ^ 0xD134_2543_DE82_EF95);
        Self { stream_id, counter }
    }

    /// Next raw 64-bit sample.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN);
        mix64(self.stream_id ^ self.counter)
    }

    /// Uniform sample in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform sample in the open interval `(0, 1)`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    /// Standard normal sample via Box-Muller (always consumes two uniforms).
    pub fn next_standard_normal(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        let r = math::sqrt(-2.0 * math::ln(u1));
        r * math::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Exponential sample with the given mean (strictly positive).
    pub fn next_exponential(&mut self, mean: f64) -> f64 {
        let u = self.next_open01();
        -mean * math::ln(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_deterministic() {
        let mut a = SubStream::new(42, 7);
        let mut b = SubStream::new(42, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_by_index() {
        let mut a = SubStream::new(42, 0);
        let mut b = SubStream::new(42, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn open01_is_strictly_inside() {
        let mut s = SubStream::new(1, 0);
        for _ in 0..10_000 {
            let u = s.next_open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut s = SubStream::new(9, 3);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = s.next_standard_normal();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // 3 standard errors: SE(mean) = 1/sqrt(n), SE(var) ~ sqrt(2/n).
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "var {var}");
    }

    #[test]
    fn exponential_mean_is_sane() {
        let mut s = SubStream::new(5, 11);
        let n = 200_000;
        let mean_target = 2.0;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += s.next_exponential(mean_target);
        }
        let mean = sum / n as f64;
        let se = mean_target / (n as f64).sqrt();
        assert!((mean - mean_target).abs() < 3.0 * se, "mean {mean}");
    }
}
