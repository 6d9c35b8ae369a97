//! Counter-based random streams.
//!
//! Every random number used by a chain is a pure function of
//! `(seed, chain, step, lane)`, computed with the Philox4x32-10 block
//! function. Nothing is carried between draws, so a chain produces the same
//! trajectory no matter which thread runs it, in what order, or how many
//! other chains run beside it.
//!
//! Lane layout inside one step:
//!
//! ```text
//! lane 0            coordinate selection
//! lane 1 + j        normal pair j (Box-Muller on the block's two u64 words)
//! ```
//!
//! Overdamped noise for coordinate `i` is component `i % 2` of pair `i / 2`;
//! underdamped noise for coordinate `i` is the whole pair `i`. Initial draws
//! use the reserved step indices [`INIT_X_STEP`] and [`INIT_V_STEP`].
//!
//! Normals use the Box-Muller transform
//! `z0 = sqrt(-2 ln u1) cos(2 pi u2)`, `z1 = sqrt(-2 ln u1) sin(2 pi u2)` with
//! `u1` in `(0, 1]` and `u2` in `[0, 1)`, both carrying 53 random bits.

use std::f64::consts::TAU;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Reserved step index for initial positions.
pub const INIT_X_STEP: u32 = u32::MAX;
/// Reserved step index for initial velocities.
pub const INIT_V_STEP: u32 = u32::MAX - 1;
/// Largest usable step index (exclusive).
pub const MAX_STEPS: u64 = (u32::MAX - 1) as u64;

/// Chains with an index at or above this value are reserved for non-chain
/// consumers (dataset synthesis and similar).
pub const AUX_DOMAIN: u64 = 1 << 63;

const SELECT_LANE: u32 = 0;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

#[inline(always)]
fn unit_open_closed(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

#[inline(always)]
fn unit_closed_open(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Box-Muller on two raw 64-bit words.
///
/// Never inlined: a caller that uses only one component would otherwise let
/// the optimizer swap the shared `sin_cos` for a lone `cos` or `sin`, whose
/// last bit can differ.
#[inline(never)]
pub fn box_muller(w0: u64, w1: u64) -> (f64, f64) {
    let radius = (-2.0 * unit_open_closed(w0).ln()).sqrt();
    let (s, c) = (TAU * unit_closed_open(w1)).sin_cos();
    (radius * c, radius * s)
}

/// The random streams of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainStreams {
    key: [u32; 2],
    chain: u64,
}

impl ChainStreams {
    pub fn new(seed: u64, chain: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            chain,
        }
    }

    pub fn chain(&self) -> u64 {
        self.chain
    }

    #[inline]
    fn words(&self, step: u32, lane: u32) -> (u64, u64) {
        let out = philox4x32_10(
            [self.chain as u32, (self.chain >> 32) as u32, step, lane],
            self.key,
        );
        (
            u64::from(out[0]) | (u64::from(out[1]) << 32),
            u64::from(out[2]) | (u64::from(out[3]) << 32),
        )
    }

    /// Uniform in `[0, 1)` from the selection lane of `step`.
    #[inline]
    pub fn selection_uniform(&self, step: u32) -> f64 {
        unit_closed_open(self.words(step, SELECT_LANE).0)
    }

    /// Index in `0..n` from the selection lane of `step` (multiply-shift;
    /// bias is at most `n / 2^64`).
    #[inline]
    pub fn selection_index(&self, step: u32, n: usize) -> usize {
        let w = self.words(step, SELECT_LANE).0;
        ((u128::from(w) * n as u128) >> 64) as usize
    }

    /// Standard-normal pair `j` of `step`.
    #[inline]
    pub fn normal_pair(&self, step: u32, pair: u32) -> (f64, f64) {
        let (w0, w1) = self.words(step, 1 + pair);
        box_muller(w0, w1)
    }

    /// Standard normal for coordinate `i` when one normal per coordinate is
    /// consumed (pairs are shared between coordinates `2j` and `2j + 1`).
    #[inline]
    pub fn packed_normal(&self, step: u32, i: usize) -> f64 {
        let (z0, z1) = self.normal_pair(step, (i / 2) as u32);
        if i % 2 == 0 {
            z0
        } else {
            z1
        }
    }

    /// Fills `out` with one normal per coordinate using the packed layout.
    pub fn fill_packed_normals(&self, step: u32, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        let mut pair = 0u32;
        for c in &mut chunks {
            let (z0, z1) = self.normal_pair(step, pair);
            c[0] = z0;
            c[1] = z1;
            pair += 1;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair(step, pair).0;
        }
    }

    /// Uniform pair from an arbitrary lane, for auxiliary consumers such as
    /// rejection samplers.
    #[inline]
    pub fn uniform_pair(&self, step: u32, lane: u32) -> (f64, f64) {
        let (w0, w1) = self.words(step, lane);
        (unit_closed_open(w0), unit_closed_open(w1))
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}
