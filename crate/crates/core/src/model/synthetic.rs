use crate::error::{Error, Result};
use crate::vocab::{Distribution, TokenId, Vocabulary};

use super::{check_context, LanguageModel};

/// Pseudo-random model for fuzzing: the distribution is a softmax over
/// logits hashed from the seed and the last `window` context tokens.
#[derive(Clone, Debug)]
pub struct HashModel {
    vocab: Vocabulary,
    window: usize,
    seed: u64,
    sharpness: f64,
}

impl HashModel {
    pub fn new(vocab_size: usize, window: usize, seed: u64, sharpness: f64) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("window must be >= 1"));
        }
        if !(sharpness.is_finite() && sharpness >= 0.0) {
            return Err(Error::invalid("sharpness must be finite and >= 0"));
        }
        Ok(Self {
            vocab: Vocabulary::anonymous(vocab_size)?,
            window,
            seed,
            sharpness,
        })
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl LanguageModel for HashModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution> {
        check_context(&self.vocab, context)?;
        let tail = &context[context.len().saturating_sub(self.window)..];
        let key = tail
            .iter()
            .fold(mix(self.seed), |h, t| mix(h ^ u64::from(t.0)));
        let logits: Vec<f64> = (0..self.vocab.size() as u64)
            .map(|i| {
                let u = (mix(key ^ i.wrapping_mul(0xa076_1d64_78bd_642f)) >> 11) as f64
                    / (1u64 << 53) as f64;
                self.sharpness * u
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Distribution::from_weights(logits.iter().map(|l| (l - max).exp()).collect())
    }
}
