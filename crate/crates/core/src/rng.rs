//! Deterministic random streams.
//!
//! Every stochastic component in the crate draws from an [`RngStream`], a
//! SplitMix64 generator with a fixed, documented sampling discipline:
//!
//! * `next_u64`  — one SplitMix64 step,
//! * `uniform`   — 53 high bits mapped to `[0, 1)`,
//! * `gaussian`  — Box–Muller over two uniform draws (no caching, so the
//!   draw count per sample is fixed at two),
//! * `derive`    — child stream keyed by an FNV-1a hash of a label.
//!
//! Identical seeds therefore yield identical draw sequences on every
//! platform, and labelled derivation lets concurrent tasks own disjoint
//! streams that never depend on scheduling order.

/// Algorithm identifier recorded in manifests and reports.
pub const RNG_ALGORITHM: &str = "splitmix64/box-muller/v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// A seeded deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, state: seed }
    }

    /// Seed this stream was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream whose seed depends on this stream's seed and `label`,
    /// but not on how many draws have been made. Used to fan out per-query
    /// and per-episode streams from one root seed.
    pub fn derive(&self, label: &str) -> RngStream {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325; // FNV-1a offset basis
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        RngStream::new(mix(self.seed ^ h))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below() needs a positive bound");
        (self.uniform() * bound as f64) as usize % bound
    }

    /// Standard normal draw via Box–Muller. Consumes exactly two uniforms.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE); // ln(0) guard
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Gaussian with standard deviation `sigma`.
    pub fn gaussian_scaled(&mut self, sigma: f64) -> f64 {
        self.gaussian() * sigma
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Sample `n` distinct indices from `0..len` (n <= len), in draw order.
    pub fn sample_indices(&mut self, len: usize, n: usize) -> Vec<usize> {
        assert!(n <= len, "cannot sample {n} from {len}");
        let mut pool: Vec<usize> = (0..len).collect();
        self.shuffle(&mut pool);
        pool.truncate(n);
        pool
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
