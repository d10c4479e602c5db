//! Token identities, next-token distributions and the ranking primitives that
//! every decoder shares.
//!
//! All rankings use the same comparator: probability descending, then token
//! id ascending. Greedy decoding, argtop-k extraction for matrix rows and the
//! verifier therefore agree on ties, which keeps speculative output identical
//! to plain autoregressive output.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a token inside a [`Vocabulary`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(v: u32) -> Self {
        TokenId(v)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Convenience for building token lists in tests and examples.
pub fn ids(raw: &[u32]) -> Vec<TokenId> {
    raw.iter().copied().map(TokenId).collect()
}

pub const UNKNOWN_SURFACE: &str = "<unk>";

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    size: usize,
    surface_forms: Option<Vec<String>>,
    unknown_id: TokenId,
    eos_id: Option<TokenId>,
    lookup: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// A vocabulary without surface forms. The last id doubles as the
    /// unknown token.
    pub fn anonymous(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("vocabulary size must be >= 2, got {size}")));
        }
        Ok(Self {
            size,
            surface_forms: None,
            unknown_id: TokenId(size as u32 - 1),
            eos_id: None,
            lookup: HashMap::new(),
        })
    }

    pub fn with_surface_forms(forms: Vec<String>, unknown_id: TokenId) -> Result<Self> {
        if forms.len() < 2 {
            return Err(Error::invalid(format!(
                "vocabulary size must be >= 2, got {}",
                forms.len()
            )));
        }
        if unknown_id.index() >= forms.len() {
            return Err(Error::invalid(format!(
                "unknown id {unknown_id} outside vocabulary of size {}",
                forms.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(forms.len());
        for (i, form) in forms.iter().enumerate() {
            if lookup.insert(form.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::invalid(format!("duplicate surface form {form:?}")));
            }
        }
        Ok(Self {
            size: forms.len(),
            surface_forms: Some(forms),
            unknown_id,
            eos_id: None,
            lookup,
        })
    }

    pub fn with_eos(mut self, eos: TokenId) -> Result<Self> {
        self.check(eos)?;
        self.eos_id = Some(eos);
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn unknown_id(&self) -> TokenId {
        self.unknown_id
    }

    pub fn eos_id(&self) -> Option<TokenId> {
        self.eos_id
    }

    pub fn surface_forms(&self) -> Option<&[String]> {
        self.surface_forms.as_deref()
    }

    pub fn contains(&self, t: TokenId) -> bool {
        t.index() < self.size
    }

    pub fn check(&self, t: TokenId) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "token {t} out of range for vocabulary of size {}",
                self.size
            )))
        }
    }

    pub fn check_all(&self, tokens: &[TokenId]) -> Result<()> {
        tokens.iter().try_for_each(|&t| self.check(t))
    }

    /// Surface form of `t`, or `#<id>` for anonymous vocabularies.
    pub fn surface(&self, t: TokenId) -> String {
        match &self.surface_forms {
            Some(forms) => forms
                .get(t.index())
                .cloned()
                .unwrap_or_else(|| format!("#{}", t.0)),
            None => format!("#{}", t.0),
        }
    }

    pub fn token_of(&self, surface: &str) -> TokenId {
        self.lookup.get(surface).copied().unwrap_or(self.unknown_id)
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        if self.surface_forms.is_none() {
            // Anonymous vocabularies accept `#12`-style or bare numeric tokens.
            return text
                .split_whitespace()
                .map(|w| {
                    w.trim_start_matches('#')
                        .parse::<u32>()
                        .ok()
                        .map(TokenId)
                        .filter(|t| self.contains(*t))
                        .unwrap_or(self.unknown_id)
                })
                .collect();
        }
        tokenize(text).iter().map(|w| self.token_of(w)).collect()
    }

    pub fn decode(&self, tokens: &[TokenId]) -> String {
        let words: Vec<String> = tokens.iter().map(|&t| self.surface(t)).collect();
        detokenize(&words)
    }
}

/// Word-level tokenization: split on whitespace, then split every
/// non-alphanumeric character into its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

pub fn detokenize(words: &[String]) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    for w in words {
        let closing = matches!(w.as_str(), "." | "," | ";" | ":" | "!" | "?" | ")" | "]");
        if !out.is_empty() && !closing && !glue_next {
            out.push(' ');
        }
        out.push_str(w);
        glue_next = matches!(w.as_str(), "(" | "[");
    }
    out
}

const SUM_TOLERANCE: f64 = 1e-6;

/// A next-token probability distribution over the whole vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {} (must be finite and >= 0)",
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn delta(vocab_size: usize, t: TokenId) -> Result<Self> {
        if t.index() >= vocab_size {
            return Err(Error::invalid(format!("delta token {t} out of range")));
        }
        let mut probs = vec![0.0; vocab_size];
        probs[t.index()] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(vocab_size: usize) -> Self {
        Self {
            probs: vec![1.0 / vocab_size as f64; vocab_size],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, t: TokenId) -> f64 {
        self.probs.get(t.index()).copied().unwrap_or(0.0)
    }
}

/// The `k` most probable tokens of a distribution, best first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopK {
    tokens: Vec<TokenId>,
}

impl TopK {
    pub fn from_tokens(tokens: Vec<TokenId>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<TokenId> {
        self.tokens
    }
}

#[inline]
fn ranks_before(pa: f64, a: usize, pb: f64, b: usize) -> bool {
    pa > pb || (pa == pb && a < b)
}

pub fn argtop_k(dist: &Distribution, k: usize) -> Result<TopK> {
    let probs = dist.probs();
    if k == 0 || k > probs.len() {
        return Err(Error::invalid(format!(
            "k = {k} must be in 1..={}",
            probs.len()
        )));
    }
    // Insertion into a k-slot buffer; k is small (8 by default).
    let mut best: Vec<usize> = Vec::with_capacity(k + 1);
    for (i, &p) in probs.iter().enumerate() {
        if best.len() == k {
            let last = best[k - 1];
            if !ranks_before(p, i, probs[last], last) {
                continue;
            }
        }
        let pos = best
            .iter()
            .position(|&j| ranks_before(p, i, probs[j], j))
            .unwrap_or(best.len());
        best.insert(pos, i);
        best.truncate(k);
    }
    Ok(TopK {
        tokens: best.into_iter().map(|i| TokenId(i as u32)).collect(),
    })
}

pub fn greedy_token(dist: &Distribution) -> TokenId {
    let probs = dist.probs();
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    TokenId(best as u32)
}

/// Uniform draw in `[0, 1)` from a counter-based stream: the same
/// `(seed, draw_index)` pair always yields the same number.
pub fn uniform_draw(seed: u64, draw_index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw_index);
    rng.gen::<f64>()
}

/// Samples from `probs^(1/temperature)`, or returns the greedy token when
/// `temperature` is zero.
pub fn sample_token(
    dist: &Distribution,
    temperature: f64,
    seed: u64,
    draw_index: u64,
) -> Result<TokenId> {
    if !temperature.is_finite() || temperature < 0.0 {
        return Err(Error::invalid(format!(
            "temperature must be finite and >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(greedy_token(dist));
    }
    let probs = dist.probs();
    let max_p = probs[greedy_token(dist).index()];
    let log_max = max_p.ln();
    // Scaled relative to the mode so tiny temperatures do not underflow the
    // whole vector.
    let weights: Vec<f64> = probs
        .iter()
        .map(|&p| {
            if p <= 0.0 {
                0.0
            } else {
                ((p.ln() - log_max) / temperature).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let target = uniform_draw(seed, draw_index) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = i;
        if target < acc {
            return Ok(TokenId(i as u32));
        }
    }
    Ok(TokenId(last_positive as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn argtop_k_orders_by_probability() {
        assert_eq!(argtop_k(&dist(&[0.1, 0.5, 0.4]), 2).unwrap().tokens(), ids(&[1, 2]));
    }

    #[test]
    fn argtop_k_breaks_ties_by_smallest_id() {
        assert_eq!(argtop_k(&dist(&[0.4, 0.4, 0.2]), 2).unwrap().tokens(), ids(&[0, 1]));
        assert_eq!(argtop_k(&dist(&[0.2; 5]), 3).unwrap().tokens(), ids(&[0, 1, 2]));
        assert_eq!(
            argtop_k(&dist(&[0.1, 0.3, 0.1, 0.3, 0.2]), 5).unwrap().tokens(),
            ids(&[1, 3, 4, 0, 2])
        );
    }

    #[test]
    fn argtop_k_rejects_oversized_k() {
        assert!(matches!(
            argtop_k(&dist(&[0.5, 0.5]), 3),
            Err(Error::InvalidArgument(_))
        ));
        assert!(argtop_k(&dist(&[0.5, 0.5]), 0).is_err());
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_token(&dist(&[0.0, 1.0, 0.0])), TokenId(1));
        assert_eq!(greedy_token(&dist(&[0.4, 0.4, 0.2])), TokenId(0));
        assert_eq!(greedy_token(&dist(&[0.3, 0.3, 0.4])), TokenId(2));
    }

    #[test]
    fn sampling_delta_and_zero_temperature() {
        for seed in 0..20 {
            assert_eq!(sample_token(&dist(&[0.0, 1.0, 0.0]), 1.0, seed, 3).unwrap(), TokenId(1));
            assert_eq!(sample_token(&dist(&[0.4, 0.4, 0.2]), 0.0, seed, 3).unwrap(), TokenId(0));
        }
    }

    #[test]
    fn sampling_frequency_matches_fair_coin() {
        let d = dist(&[0.5, 0.5]);
        let zeros = (0..10_000u64)
            .filter(|&i| sample_token(&d, 1.0, 7, i).unwrap() == TokenId(0))
            .count();
        let freq = zeros as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&freq), "freq = {freq}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = dist(&[0.2, 0.3, 0.5]);
        for i in 0..50 {
            assert_eq!(
                sample_token(&d, 0.8, 11, i).unwrap(),
                sample_token(&d, 0.8, 11, i).unwrap()
            );
        }
    }

    #[test]
    fn negative_temperature_is_rejected() {
        assert!(sample_token(&dist(&[0.5, 0.5]), -0.1, 0, 0).is_err());
        assert!(sample_token(&dist(&[0.5, 0.5]), f64::NAN, 0, 0).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.2, -0.2]).is_err());
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-7]).is_ok());
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(tokenize("Hello, world."), vec!["Hello", ",", "world", "."]);
        assert_eq!(detokenize(&tokenize("Hello, world.")), "Hello, world.");
    }

    #[test]
    fn vocabulary_invariants() {
        assert!(Vocabulary::anonymous(1).is_err());
        let v = Vocabulary::with_surface_forms(
            vec!["a".into(), "b".into(), UNKNOWN_SURFACE.into()],
            TokenId(2),
        )
        .unwrap();
        assert_eq!(v.encode("a b zzz"), ids(&[0, 1, 2]));
        assert_eq!(v.decode(&ids(&[0, 1])), "a b");
        assert!(Vocabulary::with_surface_forms(vec!["a".into(), "b".into()], TokenId(2)).is_err());
    }
}
