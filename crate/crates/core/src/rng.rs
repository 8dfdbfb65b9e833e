//! Counter-based random streams.
//!
//! Every stochastic routine in the crate draws from a [`Philox`] stream
//! (Philox4x32 with 10 rounds) keyed by an explicit 64-bit seed. A stream can
//! be split into independent child streams identified by a 64-bit tag: the
//! child key is `mix64(parent_key ^ mix64(tag + 1))`, and its counter starts
//! at zero. Output depends only on `(key, counter)`, so a given seed yields
//! the same sequence on every platform.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one seed: `h = mix64(h ^ w)` starting from `h = 0`.
pub fn derive_seed(words: &[u64]) -> u64 {
    words.iter().fold(0u64, |h, &w| mix64(h ^ w))
}

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32-10 block.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// A seekable, splittable Philox stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Philox {
    key: u64,
    counter: u128,
    buf: [u32; 4],
    pos: usize,
}

impl Philox {
    pub fn new(seed: u64) -> Self {
        Self {
            key: seed,
            counter: 0,
            buf: [0; 4],
            pos: 4,
        }
    }

    /// Shorthand for `Philox::new(seed).split(tag)`.
    pub fn stream(seed: u64, tag: u64) -> Self {
        Self::new(seed).split(tag)
    }

    /// Independent child stream. Does not advance `self`.
    pub fn split(&self, tag: u64) -> Self {
        Self::new(mix64(self.key ^ mix64(tag.wrapping_add(1))))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    fn refill(&mut self) {
        let c = self.counter;
        let words = [
            c as u32,
            (c >> 32) as u32,
            (c >> 64) as u32,
            (c >> 96) as u32,
        ];
        self.buf = philox4x32_10(words, [self.key as u32, (self.key >> 32) as u32]);
        self.counter = self.counter.wrapping_add(1);
        self.pos = 0;
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (unbiased, by rejection). `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() needs a positive bound");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Standard normal draw (Box-Muller, one value per pair of uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// +1 or -1 with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.next_u32() & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
