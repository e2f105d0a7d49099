//! Counter-based SplitMix64 streams with Box–Muller Gaussians.
//!
//! Word `i` of the stream keyed by `k` is the SplitMix64 output for state
//! `k + (i + 1) * 0x9E3779B97F4A7C15`, i.e. exactly what the reference
//! `splitmix64.c` (Vigna) yields on its `i`-th call when seeded with `k`.
//! Random access by position is therefore O(1).
//!
//! Gaussian draw `j` consumes stream position `j`: draws `2p` and `2p + 1`
//! share the uniform pair at words `2p` and `2p + 1`, giving `r cos θ` and
//! `r sin θ` respectively. `gaussian_stream(n)` thus advances the position by
//! exactly `n`.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Word at `position` of the stream keyed by `key`.
#[inline]
pub fn word_at(key: u64, position: u64) -> u64 {
    finalize(key.wrapping_add(position.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform in `(0, 1]` with 53 random bits.
#[inline]
fn open_unit(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
fn half_open_unit(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw at `position` of the stream keyed by `key`.
#[inline]
pub fn gaussian_at(key: u64, position: u64) -> f64 {
    let pair = position & !1;
    let u1 = open_unit(word_at(key, pair));
    let u2 = half_open_unit(word_at(key, pair + 1));
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    if position & 1 == 0 {
        r * theta.cos()
    } else {
        r * theta.sin()
    }
}

/// Deterministic random stream: a key (the seed) plus a word position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream_position: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, stream_position: 0 }
    }

    /// Same stream, jumped to `position`.
    pub fn at(self, position: u64) -> Self {
        RngState { stream_position: position, ..self }
    }

    /// Independent stream named by `label`, starting at position 0.
    ///
    /// The label bytes are folded into the key with FNV-1a and the result is
    /// passed through the SplitMix64 finalizer twice.
    pub fn substream(&self, label: &str) -> RngState {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01B3);
        }
        let key = finalize(finalize(self.seed ^ GOLDEN_GAMMA).wrapping_add(h));
        RngState::new(finalize(key ^ h.rotate_left(17)))
    }

    /// Substream indexed by an integer (e.g. a step or a layer).
    pub fn substream_indexed(&self, label: &str, index: u64) -> RngState {
        let base = self.substream(label);
        RngState::new(finalize(base.seed.wrapping_add(finalize(index.wrapping_add(GOLDEN_GAMMA)))))
    }

    pub fn next_u64(&mut self) -> u64 {
        let w = word_at(self.seed, self.stream_position);
        self.stream_position += 1;
        w
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        half_open_unit(self.next_u64())
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(bound);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn next_gaussian(&mut self) -> f64 {
        let g = gaussian_at(self.seed, self.stream_position);
        self.stream_position += 1;
        g
    }

    /// `n` standard-normal draws; advances the position by exactly `n`.
    pub fn gaussian_stream(&mut self, n: usize) -> Vec<f64> {
        let start = self.stream_position;
        let out = (0..n as u64).map(|j| gaussian_at(self.seed, start + j)).collect();
        self.stream_position = start + n as u64;
        out
    }

    /// Fisher–Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            idx.swap(i, j);
        }
        idx
    }
}

/// `n` standard-normal draws starting at the current position of `rng`.
pub fn gaussian_stream(rng: &mut RngState, n: usize) -> Vec<f64> {
    rng.gaussian_stream(n)
}
