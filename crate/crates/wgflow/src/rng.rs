//! Seeded pseudo-random number generation.
//!
//! The flow's bit-reproducibility contract requires every random draw to come
//! from one generator in a fixed order, with an output stream that does not
//! change underneath us when a dependency bumps its version. A small
//! xoshiro256++ generator (seeded through SplitMix64) with Box–Muller normals
//! keeps the whole stream under this crate's control.

/// xoshiro256++ with Box–Muller Gaussian draws.
#[derive(Debug, Clone)]
pub struct Prng {
    state: [u64; 4],
    spare_normal: Option<f64>,
}

impl Prng {
    pub fn seed_from(seed: u64) -> Self {
        // SplitMix64 expansion of the seed into the xoshiro state.
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = x;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        let state = [next(), next(), next(), next()];
        Prng {
            state,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1].
    fn next_f64_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller; the second value of each pair is
    /// cached so consecutive draws consume uniforms in a fixed pattern).
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64_open_zero();
        let u2 = self.next_f64();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    /// `n` draws without replacement from `0..len`, in draw order.
    pub fn sample_indices(&mut self, len: usize, n: usize) -> alloc::vec::Vec<usize> {
        let mut pool: alloc::vec::Vec<usize> = (0..len).collect();
        let take = n.min(len);
        for i in 0..take {
            let j = i + (self.next_u64() as usize) % (len - i);
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool
    }
}
