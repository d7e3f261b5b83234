//! Counter-based deterministic random stream.
//!
//! Every randomized operation in the crate draws from a `CounterRng` keyed by
//! `(master seed, stream labels...)`. The word at counter `c` is a pure
//! function of the key and `c`, so trials can be fanned out across threads
//! and still reproduce bit-identically in any schedule.
//!
//! The mixing function is the splitmix64 finalizer applied to the key and
//! counter:
//!
//! ```text
//! key    = mix(seed ^ PHI), then per label L: key = mix(key ^ (L * PHI))
//! word_c = mix(key ^ (c * PHI))
//! ```
//!
//! with `PHI = 0x9e3779b97f4a7c15` and
//! `mix(z) = ((z ^ z>>30) * 0xbf58476d1ce4e5b9 ^ ...>>27) * 0x94d049bb133111eb ^ ...>>31`.
//!
//! Pinned test vectors live in the module tests; changing them is a format
//! break for every seeded artifact.

const PHI: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream labels used across the crate, so distinct subsystems never share a
/// stream even under the same master seed.
pub mod stream {
    pub const LIFT: u64 = 1;
    pub const CARVE: u64 = 2;
    pub const LOCAL_SEARCH: u64 = 3;
    pub const HYPERGRAPH: u64 = 4;
    pub const KTW: u64 = 5;
    pub const AUDIT: u64 = 6;
    pub const SOUNDNESS: u64 = 7;
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, labels: &[u64]) -> Self {
        let mut key = mix(seed ^ PHI);
        for &l in labels {
            key = mix(key ^ l.wrapping_mul(PHI));
        }
        CounterRng { key, counter: 0 }
    }

    /// Word at an explicit counter; does not disturb the sequential state.
    pub fn word_at(&self, counter: u64) -> u64 {
        mix(self.key ^ counter.wrapping_mul(PHI))
    }

    pub fn next_u64(&mut self) -> u64 {
        let w = self.word_at(self.counter);
        self.counter += 1;
        w
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in [0, bound) by rejection; bound must be positive.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        let b = bound as u64;
        let zone = u64::MAX - (u64::MAX % b);
        loop {
            let w = self.next_u64();
            if w < zone {
                return (w % b) as usize;
            }
        }
    }

    /// Standard normal pair via Box-Muller; consumes exactly two words.
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let mut u1 = self.next_f64();
        let u2 = self.next_f64();
        if u1 <= 0.0 {
            u1 = f64::MIN_POSITIVE;
        }
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Derives an independent sub-seed, e.g. one per Monte Carlo trial.
    pub fn derive(seed: u64, labels: &[u64]) -> u64 {
        CounterRng::new(seed, labels).word_at(0)
    }
}
