//! Next-token oracles.
//!
//! [`LanguageModel::evaluate_tree`] is the batched call a speculative step
//! makes: one distribution per draft-tree node, each conditioned only on the
//! context plus that node's root-to-node path. That is exactly what a tree
//! attention mask computes on a transformer.

mod cycle;
mod ngram;
mod synthetic;

pub use cycle::CycleModel;
pub use ngram::{train_ngram, train_ngram_file, NGramModel, NGRAM_MAGIC};
pub use synthetic::HashModel;

use crate::error::{Error, Result};
use crate::tree::MergedSequence;
use crate::vocab::{Distribution, TokenId, Vocabulary};

pub trait LanguageModel {
    fn vocab(&self) -> &Vocabulary;

    /// Distribution of the token following `context`.
    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution>;

    /// One distribution per node of `seq`, where node `i` sees
    /// `context ++ path(root -> i)`. `context` holds the tokens before the
    /// root and may be empty.
    fn evaluate_tree(&self, context: &[TokenId], seq: &MergedSequence<'_>) -> Result<Vec<Distribution>> {
        evaluate_paths(self, context, seq)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution> {
        (**self).next_distribution(context)
    }

    fn evaluate_tree(&self, context: &[TokenId], seq: &MergedSequence<'_>) -> Result<Vec<Distribution>> {
        (**self).evaluate_tree(context, seq)
    }
}

/// Evaluates every node independently on its full path-extended context.
pub fn evaluate_paths<M: LanguageModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    seq: &MergedSequence<'_>,
) -> Result<Vec<Distribution>> {
    check_tree_inputs(model.vocab(), context, seq)?;
    (0..seq.len())
        .map(|i| {
            let mut ctx = context.to_vec();
            ctx.extend(seq.path_tokens(i));
            model.next_distribution(&ctx)
        })
        .collect()
}

pub(crate) fn check_context(vocab: &Vocabulary, context: &[TokenId]) -> Result<()> {
    if context.is_empty() {
        return Err(Error::invalid("context must not be empty"));
    }
    vocab.check_all(context)
}

pub(crate) fn check_tree_inputs(
    vocab: &Vocabulary,
    context: &[TokenId],
    seq: &MergedSequence<'_>,
) -> Result<()> {
    vocab.check_all(context)?;
    vocab.check_all(seq.tokens())
}
