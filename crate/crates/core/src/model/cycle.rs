use crate::error::{Error, Result};
use crate::vocab::{Distribution, TokenId, Vocabulary};

use super::{check_context, LanguageModel};

/// Deterministic model that keeps walking a fixed token cycle.
///
/// The prediction follows the longest suffix of the context that occurs in
/// the (infinitely repeated) cycle; among equally long matches the earliest
/// cycle position wins. A context whose last token is not in the cycle
/// restarts at the first cycle token.
#[derive(Clone, Debug)]
pub struct CycleModel {
    cycle: Vec<TokenId>,
    vocab: Vocabulary,
}

impl CycleModel {
    pub fn new(cycle: Vec<TokenId>, vocab_size: usize) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::invalid("cycle must not be empty"));
        }
        let vocab = Vocabulary::anonymous(vocab_size)?;
        vocab.check_all(&cycle)?;
        Ok(Self { cycle, vocab })
    }

    pub fn cycle(&self) -> &[TokenId] {
        &self.cycle
    }

    pub fn predict(&self, context: &[TokenId]) -> TokenId {
        let l = self.cycle.len();
        let at = |i: isize| self.cycle[i.rem_euclid(l as isize) as usize];
        for m in (1..=context.len().min(l)).rev() {
            let suffix = &context[context.len() - m..];
            for j in 0..l as isize {
                let matched = suffix
                    .iter()
                    .enumerate()
                    .all(|(s, &t)| at(j - (m as isize - 1) + s as isize) == t);
                if matched {
                    return at(j + 1);
                }
            }
        }
        self.cycle[0]
    }
}

impl LanguageModel for CycleModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution> {
        check_context(&self.vocab, context)?;
        Distribution::delta(self.vocab.size(), self.predict(context))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{greedy_token, ids};

    #[test]
    fn follows_cycle() {
        let m = CycleModel::new(ids(&[0, 1, 2]), 5).unwrap();
        let d = m.next_distribution(&ids(&[4, 0])).unwrap();
        assert_eq!(d.prob(TokenId(1)), 1.0);
        assert_eq!(m.predict(&ids(&[2])), TokenId(0));
        assert_eq!(m.predict(&ids(&[4])), TokenId(0));
    }

    #[test]
    fn repeated_tokens_use_longer_suffix() {
        // a b a c: after "a" alone the first occurrence wins, after "c a" the second.
        let m = CycleModel::new(ids(&[0, 1, 0, 2]), 4).unwrap();
        assert_eq!(m.predict(&ids(&[0])), TokenId(1));
        assert_eq!(m.predict(&ids(&[1, 0])), TokenId(2));
        assert_eq!(m.predict(&ids(&[2, 0])), TokenId(1));
    }

    #[test]
    fn greedy_decoding_reproduces_cycle() {
        let cycle = ids(&[3, 1, 4, 1, 5]);
        let m = CycleModel::new(cycle.clone(), 6).unwrap();
        let mut ctx = ids(&[3]);
        for _ in 0..23 {
            let next = greedy_token(&m.next_distribution(&ctx).unwrap());
            ctx.push(next);
        }
        for (i, t) in ctx.iter().enumerate() {
            assert_eq!(*t, cycle[i % cycle.len()]);
        }
    }

    #[test]
    fn rejects_out_of_range_cycle() {
        assert!(CycleModel::new(ids(&[0, 9]), 5).is_err());
        assert!(CycleModel::new(vec![], 5).is_err());
    }
}
