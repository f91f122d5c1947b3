//! Real AWGN multiple-access channel `y = sum_k h_k x_k + z`, `z ~ N(0, I)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

/// One block-fading state, fixed for every codeword block of a retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h: Vec<f64>,
    /// Per-server power `P`.
    pub power: f64,
    /// Drops `z` entirely; used for exactness checks.
    pub noiseless: bool,
}

impl ChannelRealization {
    /// Unit gains on every link.
    pub fn nonfading(servers: usize, power: f64) -> Self {
        Self { h: vec![1.0; servers], power, noiseless: false }
    }

    pub fn with_noiseless(mut self, noiseless: bool) -> Self {
        self.noiseless = noiseless;
        self
    }

    pub fn servers(&self) -> usize {
        self.h.len()
    }

    /// Noise variance seen by the decoder: 1, or 0 when noiseless.
    pub fn noise_variance(&self) -> f64 {
        if self.noiseless {
            0.0
        } else {
            1.0
        }
    }
}

/// Draws `h_k` i.i.d. standard normal from the seed's fading stream.
pub fn sample_fading(seed: u64, servers: usize, power: f64) -> Result<ChannelRealization> {
    if servers == 0 {
        return Err(Error::TooSmall { what: "N", min: 1, got: 0 });
    }
    let mut rng = seed::rng(seed, seed::tag::FADING);
    let h = (0..servers).map(|_| rng.sample(StandardNormal)).collect();
    Ok(ChannelRealization { h, power, noiseless: false })
}

/// Superposes the server signals and adds unit-variance Gaussian noise.
///
/// `xs[k]` is server `k`'s length-n signal; silent servers pass zeros.
pub fn transmit<R: Rng + ?Sized>(xs: &[Vec<f64>], chan: &ChannelRealization, rng: &mut R) -> Result<Vec<f64>> {
    if xs.len() != chan.h.len() {
        return Err(Error::LengthMismatch { expected: chan.h.len(), found: xs.len() });
    }
    let n = xs.first().map_or(0, Vec::len);
    if let Some(x) = xs.iter().find(|x| x.len() != n) {
        return Err(Error::LengthMismatch { expected: n, found: x.len() });
    }
    let mut y = vec![0.0; n];
    for (x, &hk) in xs.iter().zip(&chan.h) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += hk * xi;
        }
    }
    if !chan.noiseless {
        for yi in y.iter_mut() {
            *yi += rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(y)
}
