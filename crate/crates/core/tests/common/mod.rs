#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use token_recycling::model::train_ngram;
use token_recycling::{
    CycleModel, Distribution, InitStrategy, LanguageModel, MergedSequence, NGramModel,
    NodeRecord, RecycleMatrix, TokenId, TreeSpec,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random valid tree with up to `max_nodes` nodes and ranks below `k`.
/// Nodes are appended in index order, so every parent precedes its child.
pub fn random_tree(rng: &mut impl Rng, max_nodes: usize, k: usize) -> TreeSpec {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut records = vec![NodeRecord::ROOT];
    // Next free rank for each node.
    let mut next_rank = vec![0usize];
    for _ in 1..n {
        let open: Vec<usize> = (0..records.len()).filter(|&p| next_rank[p] < k).collect();
        let p = open[rng.gen_range(0..open.len())];
        let rank = rng.gen_range(next_rank[p]..k);
        next_rank[p] = rank + 1;
        records.push(NodeRecord::child(p, rank));
        next_rank.push(0);
    }
    TreeSpec::from_records(records).expect("generated tree is valid")
}

pub fn random_matrix(rng: &mut impl Rng, vocab: usize, k: usize) -> RecycleMatrix {
    RecycleMatrix::new(vocab, k, &InitStrategy::Random { seed: rng.gen() }).unwrap()
}

/// Node tokens computed one node at a time from the parent's row.
pub fn naive_retrieve(m: &RecycleMatrix, spec: &TreeSpec, root: TokenId) -> Vec<TokenId> {
    fn token_of(m: &RecycleMatrix, spec: &TreeSpec, root: TokenId, i: usize) -> TokenId {
        match (spec.parent(i), spec.rank(i)) {
            (Some(p), Some(r)) => m.lookup_row(token_of(m, spec, root, p)).unwrap()[r],
            _ => root,
        }
    }
    (0..spec.len()).map(|i| token_of(m, spec, root, i)).collect()
}

/// Per-node distributions from independent calls on path-extended contexts.
pub fn naive_tree_eval<M: LanguageModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    seq: &MergedSequence<'_>,
) -> Vec<Distribution> {
    (0..seq.len())
        .map(|i| {
            let mut ctx = context.to_vec();
            ctx.extend(seq.path_tokens(i));
            model.next_distribution(&ctx).unwrap()
        })
        .collect()
}

pub fn random_tokens(rng: &mut impl Rng, vocab: usize, len: usize) -> Vec<TokenId> {
    (0..len).map(|_| TokenId(rng.gen_range(0..vocab as u32))).collect()
}

pub fn random_cycle_model(rng: &mut impl Rng) -> CycleModel {
    let vocab = rng.gen_range(2..24);
    let len = rng.gen_range(1..10);
    CycleModel::new(random_tokens(rng, vocab, len), vocab).unwrap()
}

const WORDS: &[&str] = &[
    "the", "a", "cat", "dog", "sat", "ran", "on", "mat", "log", "and", "then", "slept", ".", ",",
];

/// An n-gram model trained on a short random word sequence.
pub fn random_ngram_model(rng: &mut impl Rng) -> NGramModel {
    let words = rng.gen_range(2..WORDS.len());
    let len = rng.gen_range(5..80);
    let text: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..words)]).collect();
    let order = rng.gen_range(1..5);
    let alpha = [0.0, 0.01, 0.1, 1.0][rng.gen_range(0..4)];
    train_ngram(&text.join(" "), order, alpha, usize::MAX).unwrap()
}
