//! Counter-based noise streams.
//!
//! Every draw is addressed by `(seed, task, channel, step)`: the ChaCha key is
//! derived from the seed, the stream id encodes task and channel, and the word
//! position encodes the step. Draws are therefore independent of evaluation
//! order and can be replayed individually.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Measurement noise on the utility reading.
    Measurement = 0,
    /// Exploration dither on the level update.
    Dither = 1,
}

#[derive(Debug, Clone)]
pub struct NoiseSource {
    base: ChaCha8Rng,
    eta_bar: f64,
    zeta_bar: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, eta_bar: f64, zeta_bar: f64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
            eta_bar,
            zeta_bar,
        }
    }

    /// Uniform on `[-1, 1)`.
    pub fn unit(&self, channel: Channel, step: u64, task: usize) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(((task as u64) << 1) | channel as u64);
        // one u64 = two 32-bit words
        rng.set_word_pos(u128::from(step) * 2);
        let bits = rng.next_u64() >> 11;
        let u01 = bits as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * u01 - 1.0
    }

    /// `eta_i(k)`, uniform on `[-eta_bar, eta_bar]`.
    pub fn measurement(&self, step: u64, task: usize) -> f64 {
        if self.eta_bar == 0.0 {
            return 0.0;
        }
        self.eta_bar * self.unit(Channel::Measurement, step, task)
    }

    /// `zeta_i(k)`, uniform on `[-zeta_bar, zeta_bar]`.
    pub fn dither(&self, step: u64, task: usize) -> f64 {
        if self.zeta_bar == 0.0 {
            return 0.0;
        }
        self.zeta_bar * self.unit(Channel::Dither, step, task)
    }

    pub fn eta_bar(&self) -> f64 {
        self.eta_bar
    }

    pub fn zeta_bar(&self) -> f64 {
        self.zeta_bar
    }
}
