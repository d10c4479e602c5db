//! Decoding loops: plain autoregressive, Token Recycling and prompt lookup.
//!
//! Every speculative step follows the same shape: build a draft tree rooted
//! at the last confirmed token, evaluate all nodes in one batched model call,
//! walk the tree accepting the longest run of drafts that match the model's
//! own choices, and append one more model-chosen token at the end. Because
//! the accepted tokens are the model's choices at every position, greedy
//! output is identical to autoregressive output.

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::config::{DecodeConfig, UpdateScope};
use crate::error::{Error, Result};
use crate::matrix::RecycleMatrix;
use crate::model::LanguageModel;
use crate::tree::{retrieve, MergedSequence, TreeSpec};
use crate::vocab::{argtop_k, sample_token, Distribution, TokenId, TopK};

/// How ground-truth tokens are chosen during verification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VerifyMode {
    Greedy,
    /// Draw `d` of the walk uses index `first_draw + d`, so each output
    /// position always consumes the same draw whatever the tree looks like.
    Sampled {
        temperature: f64,
        seed: u64,
        first_draw: u64,
    },
}

impl VerifyMode {
    fn for_position(config: &DecodeConfig, position: u64) -> Self {
        if config.temperature > 0.0 {
            VerifyMode::Sampled {
                temperature: config.temperature,
                seed: config.rng_seed,
                first_draw: position,
            }
        } else {
            VerifyMode::Greedy
        }
    }

    fn pick(&self, dist: &Distribution, offset: u64) -> Result<TokenId> {
        match *self {
            VerifyMode::Greedy => sample_token(dist, 0.0, 0, 0),
            VerifyMode::Sampled {
                temperature,
                seed,
                first_draw,
            } => sample_token(dist, temperature, seed, first_draw + offset),
        }
    }
}

/// Result of walking one draft tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    /// Matched draft tokens followed by one correction token.
    pub accepted: Vec<TokenId>,
    /// Tree nodes whose draft token was matched, in walk order.
    pub accepted_node_path: Vec<usize>,
}

/// Walks the tree from the root, descending into the child whose token
/// equals the model's choice at the current node, until no child matches.
pub fn verify(
    merged: &MergedSequence<'_>,
    node_dists: &[Distribution],
    mode: VerifyMode,
) -> Result<Verdict> {
    if node_dists.len() != merged.len() {
        return Err(Error::invalid(format!(
            "{} distributions for {} tree nodes",
            node_dists.len(),
            merged.len()
        )));
    }
    let spec = merged.spec();
    let tokens = merged.tokens();
    let mut accepted = Vec::new();
    let mut path = Vec::new();
    let mut node = 0;
    loop {
        let truth = mode.pick(&node_dists[node], accepted.len() as u64)?;
        accepted.push(truth);
        // Children are in ascending rank order, so the first match is the
        // lowest-rank one when siblings repeat a token.
        match spec.children(node).iter().find(|&&c| tokens[c] == truth) {
            Some(&c) => {
                path.push(c);
                node = c;
            }
            None => break,
        }
    }
    Ok(Verdict {
        accepted,
        accepted_node_path: path,
    })
}

/// Everything one Token Recycling step produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub accepted: Vec<TokenId>,
    pub accepted_node_path: Vec<usize>,
    /// Tokens of the merged sequence that was verified (root first).
    pub merged: Vec<TokenId>,
    pub per_node_topk: Vec<TopK>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    /// Tokens kept from this step (after max-length / EOS truncation).
    pub accepted: usize,
    pub accepted_node_path: Vec<usize>,
}

/// Seconds spent per phase, summed over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub retrieve: f64,
    pub evaluate: f64,
    pub verify: f64,
    pub update: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    /// Newly generated tokens, prompt excluded.
    pub tokens: Vec<TokenId>,
    pub steps: usize,
    pub per_step: Vec<StepSummary>,
    pub wall_time: f64,
    pub phases: PhaseTimes,
}

impl DecodeResult {
    pub fn mean_accepted(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.tokens.len() as f64 / self.steps as f64
        }
    }
}

fn check_prompt<M: LanguageModel + ?Sized>(model: &M, prompt: &[TokenId]) -> Result<()> {
    if prompt.is_empty() {
        return Err(Error::invalid("prompt must not be empty"));
    }
    model.vocab().check_all(prompt)
}

/// Accumulates accepted spans while honouring the length budget and EOS.
struct Output {
    tokens: Vec<TokenId>,
    per_step: Vec<StepSummary>,
    budget: usize,
    eos: Option<TokenId>,
    done: bool,
}

impl Output {
    fn new(budget: usize, eos: Option<TokenId>) -> Self {
        Self {
            tokens: Vec::with_capacity(budget),
            per_step: Vec::new(),
            budget,
            eos,
            done: false,
        }
    }

    /// Returns the tokens actually kept.
    fn push_step(&mut self, mut accepted: Vec<TokenId>, node_path: Vec<usize>) -> Vec<TokenId> {
        accepted.truncate(self.budget - self.tokens.len());
        if let Some(eos) = self.eos {
            if let Some(p) = accepted.iter().position(|&t| t == eos) {
                accepted.truncate(p + 1);
                self.done = true;
            }
        }
        self.tokens.extend_from_slice(&accepted);
        if self.tokens.len() >= self.budget {
            self.done = true;
        }
        self.per_step.push(StepSummary {
            accepted: accepted.len(),
            accepted_node_path: node_path,
        });
        accepted
    }

    fn finish(self, started: Instant, phases: PhaseTimes) -> DecodeResult {
        DecodeResult {
            steps: self.per_step.len(),
            tokens: self.tokens,
            per_step: self.per_step,
            wall_time: started.elapsed().as_secs_f64(),
            phases,
        }
    }
}

/// Autoregressive baseline: one model call and one token per step.
pub fn ar_decode<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    config: &DecodeConfig,
) -> Result<DecodeResult> {
    config.validate()?;
    check_prompt(model, prompt)?;
    let started = Instant::now();
    let mut phases = PhaseTimes::default();
    let mut ctx = prompt.to_vec();
    let mut out = Output::new(config.max_new_tokens, model.vocab().eos_id());
    while !out.done {
        let t0 = Instant::now();
        let dist = model.next_distribution(&ctx)?;
        phases.evaluate += t0.elapsed().as_secs_f64();
        let mode = VerifyMode::for_position(config, out.tokens.len() as u64);
        let next = mode.pick(&dist, 0)?;
        ctx.extend(out.push_step(vec![next], Vec::new()));
    }
    Ok(out.finish(started, phases))
}

/// A Token Recycling session: owns the adjacency matrix and keeps it across
/// calls to [`TokenRecycler::decode`], which is how hot start works.
#[derive(Clone, Debug)]
pub struct TokenRecycler {
    matrix: RecycleMatrix,
    config: DecodeConfig,
    phases: PhaseTimes,
}

impl TokenRecycler {
    pub fn new(vocab_size: usize, config: DecodeConfig) -> Result<Self> {
        config.validate()?;
        if config.k > vocab_size {
            return Err(Error::Config(format!(
                "k = {} exceeds vocabulary size {vocab_size}",
                config.k
            )));
        }
        let matrix = RecycleMatrix::new(vocab_size, config.k, &config.init)?;
        Self::with_matrix(matrix, config)
    }

    pub fn with_matrix(matrix: RecycleMatrix, config: DecodeConfig) -> Result<Self> {
        config.validate()?;
        if matrix.k() != config.k {
            return Err(Error::IncompatibleMatrix {
                expected_vocab: matrix.vocab_size(),
                expected_k: config.k,
                found_vocab: matrix.vocab_size(),
                found_k: matrix.k(),
            });
        }
        Ok(Self {
            matrix,
            config,
            phases: PhaseTimes::default(),
        })
    }

    pub fn matrix(&self) -> &RecycleMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> RecycleMatrix {
        self.matrix
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.config
    }

    /// One retrieve / evaluate / verify / update round. `context` is every
    /// confirmed token so far; its last token is the tree root. `position`
    /// is the number of tokens generated before this step.
    pub fn step<M: LanguageModel + ?Sized>(
        &mut self,
        model: &M,
        context: &[TokenId],
        position: u64,
    ) -> Result<StepOutcome> {
        let (&root, before) = context
            .split_last()
            .ok_or_else(|| Error::invalid("context must not be empty"))?;
        if self.matrix.vocab_size() != model.vocab().size() {
            return Err(Error::IncompatibleMatrix {
                expected_vocab: model.vocab().size(),
                expected_k: self.config.k,
                found_vocab: self.matrix.vocab_size(),
                found_k: self.matrix.k(),
            });
        }
        let tree = &self.config.tree;

        let t = Instant::now();
        let merged = retrieve(&self.matrix, tree, root)?;
        self.phases.retrieve += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let dists = model.evaluate_tree(before, &merged)?;
        self.phases.evaluate += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let verdict = verify(
            &merged,
            &dists,
            VerifyMode::for_position(&self.config, position),
        )?;
        self.phases.verify += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let per_node_topk = dists
            .iter()
            .map(|d| argtop_k(d, self.config.k))
            .collect::<Result<Vec<_>>>()?;
        match self.config.update_scope {
            UpdateScope::AllDraft => {
                self.matrix
                    .update(merged.tokens(), &per_node_topk, self.config.update_strategy)?;
            }
            UpdateScope::AcceptedOnly => {
                let nodes: Vec<usize> = std::iter::once(0)
                    .chain(verdict.accepted_node_path.iter().copied())
                    .collect();
                let tokens: Vec<TokenId> = nodes.iter().map(|&n| merged.tokens()[n]).collect();
                let rows: Vec<TopK> = nodes.iter().map(|&n| per_node_topk[n].clone()).collect();
                self.matrix
                    .update(&tokens, &rows, self.config.update_strategy)?;
            }
        }
        self.phases.update += t.elapsed().as_secs_f64();

        Ok(StepOutcome {
            accepted: verdict.accepted,
            accepted_node_path: verdict.accepted_node_path,
            merged: merged.tokens().to_vec(),
            per_node_topk,
        })
    }

    /// Decodes `prompt` with the session's current matrix, updating it as
    /// it goes.
    pub fn decode<M: LanguageModel + ?Sized>(
        &mut self,
        model: &M,
        prompt: &[TokenId],
    ) -> Result<DecodeResult> {
        check_prompt(model, prompt)?;
        let started = Instant::now();
        self.phases = PhaseTimes::default();
        let mut ctx = prompt.to_vec();
        let mut out = Output::new(self.config.max_new_tokens, model.vocab().eos_id());
        while !out.done {
            let outcome = self.step(model, &ctx, out.tokens.len() as u64)?;
            ctx.extend(out.push_step(outcome.accepted, outcome.accepted_node_path));
        }
        Ok(out.finish(started, self.phases))
    }
}

/// Token Recycling with a matrix freshly built from `config.init`.
pub fn tr_decode<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    config: &DecodeConfig,
) -> Result<DecodeResult> {
    TokenRecycler::new(model.vocab().size(), config.clone())?.decode(model, prompt)
}

/// Draft for prompt lookup: the tokens that followed the most recent earlier
/// occurrence of the longest matching suffix of `context`.
pub fn prompt_lookup_draft(
    context: &[TokenId],
    max_ngram: usize,
    min_ngram: usize,
    draft_len: usize,
) -> Vec<TokenId> {
    if draft_len == 0 {
        return Vec::new();
    }
    let len = context.len();
    for n in (min_ngram.max(1)..=max_ngram.min(len.saturating_sub(1))).rev() {
        let suffix = &context[len - n..];
        // Most recent occurrence that ends before the suffix itself starts.
        for start in (0..len - n).rev() {
            if &context[start..start + n] == suffix {
                let from = start + n;
                let to = (from + draft_len).min(len);
                return context[from..to].to_vec();
            }
        }
    }
    Vec::new()
}

/// Prompt-lookup baseline: drafts are copied from earlier context and
/// verified as a single chain.
pub fn pld_decode<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    config: &DecodeConfig,
) -> Result<DecodeResult> {
    config.validate()?;
    check_prompt(model, prompt)?;
    let started = Instant::now();
    let mut phases = PhaseTimes::default();
    let chains: Vec<TreeSpec> = (0..=config.pld.draft_len).map(TreeSpec::chain).collect();
    let mut ctx = prompt.to_vec();
    let mut out = Output::new(config.max_new_tokens, model.vocab().eos_id());
    while !out.done {
        let t = Instant::now();
        let draft = prompt_lookup_draft(
            &ctx,
            config.pld.max_ngram,
            config.pld.min_ngram,
            config.pld.draft_len,
        );
        let (&root, before) = ctx.split_last().expect("non-empty");
        let mut tokens = Vec::with_capacity(draft.len() + 1);
        tokens.push(root);
        tokens.extend_from_slice(&draft);
        let merged = MergedSequence::new(&chains[draft.len()], tokens)?;
        phases.retrieve += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let dists = model.evaluate_tree(before, &merged)?;
        phases.evaluate += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let verdict = verify(
            &merged,
            &dists,
            VerifyMode::for_position(config, out.tokens.len() as u64),
        )?;
        phases.verify += t.elapsed().as_secs_f64();
        ctx.extend(out.push_step(verdict.accepted, verdict.accepted_node_path));
    }
    Ok(out.finish(started, phases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{train_ngram, CycleModel, HashModel};
    use crate::vocab::{greedy_token, ids};

    fn cfg(max_new: usize) -> DecodeConfig {
        DecodeConfig {
            max_new_tokens: max_new,
            ..DecodeConfig::default()
        }
    }

    #[test]
    fn ar_follows_cycle() {
        let m = CycleModel::new(ids(&[0, 1, 2]), 3).unwrap();
        let r = ar_decode(&m, &ids(&[0]), &cfg(5)).unwrap();
        assert_eq!(r.tokens, ids(&[1, 2, 0, 1, 2]));
        assert_eq!(r.steps, 5);
        assert_eq!(ar_decode(&m, &ids(&[0]), &cfg(1)).unwrap().steps, 1);
    }

    #[test]
    fn ar_matches_reference_loop_on_ngram() {
        let m = train_ngram("the cat sat on the mat . the cat ran .", 2, 0.1, 20).unwrap();
        let prompt = vec![m.vocab().token_of("the")];
        let r = ar_decode(&m, &prompt, &cfg(12)).unwrap();
        let mut ctx = prompt.clone();
        for _ in 0..12 {
            let probs = m.next_distribution(&ctx).unwrap();
            let p = probs.probs();
            let mut best = 0;
            for i in 0..p.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            ctx.push(TokenId(best as u32));
        }
        assert_eq!(r.tokens, ctx[1..]);
    }

    fn chain_seq<'a>(spec: &'a TreeSpec, tokens: &[u32]) -> MergedSequence<'a> {
        MergedSequence::new(spec, ids(tokens)).unwrap()
    }

    #[test]
    fn verify_accepts_matching_prefix_plus_correction() {
        // root "for", drafts [i, in, range, (]; model says i, in, zip, ...
        let (for_, i, in_, range, paren, zip) = (0u32, 1, 2, 3, 4, 5);
        let spec = TreeSpec::chain(4);
        let seq = chain_seq(&spec, &[for_, i, in_, range, paren]);
        let truths = [i, in_, zip, paren, paren];
        let dists: Vec<_> = truths
            .iter()
            .map(|&t| Distribution::delta(6, TokenId(t)).unwrap())
            .collect();
        let v = verify(&seq, &dists, VerifyMode::Greedy).unwrap();
        assert_eq!(v.accepted, ids(&[i, in_, zip]));
        assert_eq!(v.accepted_node_path, vec![1, 2]);
    }

    #[test]
    fn verify_immediate_mismatch_gives_one_token() {
        let spec = TreeSpec::from_edges(&[(0, 0), (0, 1)]).unwrap();
        let seq = chain_seq(&spec, &[0, 1, 2]);
        let dists = vec![Distribution::delta(4, TokenId(3)).unwrap(); 3];
        let v = verify(&seq, &dists, VerifyMode::Greedy).unwrap();
        assert_eq!(v.accepted, ids(&[3]));
        assert!(v.accepted_node_path.is_empty());
    }

    #[test]
    fn verify_descends_into_lowest_rank_duplicate() {
        let spec = TreeSpec::from_edges(&[(0, 0), (0, 1), (2, 0)]).unwrap();
        let seq = chain_seq(&spec, &[0, 1, 1, 2]);
        let dists = vec![
            Distribution::delta(3, TokenId(1)).unwrap(),
            Distribution::delta(3, TokenId(0)).unwrap(),
            Distribution::delta(3, TokenId(2)).unwrap(),
            Distribution::delta(3, TokenId(0)).unwrap(),
        ];
        let v = verify(&seq, &dists, VerifyMode::Greedy).unwrap();
        assert_eq!(v.accepted_node_path, vec![1]);
        assert_eq!(v.accepted, ids(&[1, 0]));
    }

    #[test]
    fn verify_rejects_misaligned_inputs() {
        let spec = TreeSpec::chain(1);
        let seq = chain_seq(&spec, &[0, 1]);
        assert!(verify(&seq, &[Distribution::uniform(2)], VerifyMode::Greedy).is_err());
    }

    #[test]
    fn warm_cycle_accepts_full_depth() {
        let cycle = ids(&[0, 1, 2]);
        let m = CycleModel::new(cycle.clone(), 3).unwrap();
        let mut config = cfg(200);
        config.k = 3;
        config.tree = TreeSpec::chain(5);
        let mut s = TokenRecycler::new(3, config).unwrap();
        let mut ctx = ids(&[0]);
        // Warm up until every cycle token has its successor recorded.
        for step in 0..3 {
            let out = s.step(&m, &ctx, step).unwrap();
            ctx.extend(out.accepted);
        }
        let out = s.step(&m, &ctx, 3).unwrap();
        assert_eq!(out.accepted.len(), 6);
    }

    #[test]
    fn tr_is_lossless_and_makes_progress() {
        let m = HashModel::new(16, 1, 9, 6.0).unwrap();
        let prompt = ids(&[3, 4]);
        let config = cfg(60);
        let ar = ar_decode(&m, &prompt, &config).unwrap();
        let tr = tr_decode(&m, &prompt, &config).unwrap();
        assert_eq!(ar.tokens, tr.tokens);
        assert!(tr.per_step.iter().all(|s| s.accepted >= 1));
        assert!(tr.steps <= ar.steps);
        assert_eq!(tr.per_step.iter().map(|s| s.accepted).sum::<usize>(), 60);
    }

    #[test]
    fn first_step_on_zero_matrix_makes_progress() {
        let m = HashModel::new(16, 2, 1, 3.0).unwrap();
        let mut s = TokenRecycler::new(16, cfg(10)).unwrap();
        let out = s.step(&m, &ids(&[5]), 0).unwrap();
        assert!(!out.accepted.is_empty());
        assert_eq!(out.accepted[0], greedy_token(&m.next_distribution(&ids(&[5])).unwrap()));
        assert_eq!(out.per_node_topk.len(), 81);
    }

    #[test]
    fn sampled_tr_matches_sampled_ar() {
        let m = HashModel::new(12, 1, 4, 2.0).unwrap();
        let mut config = cfg(50);
        config.temperature = 0.7;
        config.rng_seed = 99;
        let ar = ar_decode(&m, &ids(&[1]), &config).unwrap();
        let tr = tr_decode(&m, &ids(&[1]), &config).unwrap();
        assert_eq!(ar.tokens, tr.tokens);
        assert_eq!(tr_decode(&m, &ids(&[1]), &config).unwrap().tokens, tr.tokens);
    }

    #[test]
    fn eos_truncates_and_stops() {
        let m = CycleModel::new(ids(&[0, 1, 2, 3]), 4).unwrap();
        let m = EosModel {
            inner: m.clone(),
            vocab: crate::vocab::Vocabulary::anonymous(4).unwrap().with_eos(TokenId(3)).unwrap(),
        };
        let mut config = cfg(50);
        config.k = 2;
        config.tree = TreeSpec::balanced(2, 3);
        let ar = ar_decode(&m, &ids(&[0]), &config).unwrap();
        assert_eq!(ar.tokens, ids(&[1, 2, 3]));
        assert_eq!(tr_decode(&m, &ids(&[0]), &config).unwrap().tokens, ar.tokens);
        assert_eq!(pld_decode(&m, &ids(&[0]), &config).unwrap().tokens, ar.tokens);
    }

    struct EosModel {
        inner: CycleModel,
        vocab: crate::vocab::Vocabulary,
    }

    impl LanguageModel for EosModel {
        fn vocab(&self) -> &crate::vocab::Vocabulary {
            &self.vocab
        }
        fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution> {
            self.inner.next_distribution(context)
        }
    }

    #[test]
    fn prompt_lookup_copies_continuation() {
        // a b c a b -> suffix [a, b] seen at 0, draft starts with c
        let ctx = ids(&[0, 1, 2, 0, 1]);
        assert_eq!(prompt_lookup_draft(&ctx, 3, 1, 2), ids(&[2, 0]));
        assert!(prompt_lookup_draft(&ids(&[0, 1, 2, 3]), 3, 1, 4).is_empty());
        assert!(prompt_lookup_draft(&ids(&[0]), 3, 1, 4).is_empty());
    }

    #[test]
    fn pld_without_repeats_is_autoregressive() {
        // Cycle longer than the output: nothing ever repeats.
        let cycle: Vec<TokenId> = (0..40).map(TokenId).collect();
        let m = CycleModel::new(cycle, 40).unwrap();
        let r = pld_decode(&m, &ids(&[0]), &cfg(30)).unwrap();
        assert_eq!(r.steps, 30);
        assert!(r.per_step.iter().all(|s| s.accepted == 1));
    }

    #[test]
    fn rejects_empty_prompt() {
        let m = CycleModel::new(ids(&[0, 1]), 2).unwrap();
        assert!(ar_decode(&m, &[], &cfg(3)).is_err());
        assert!(tr_decode(&m, &[], &cfg(3)).is_err());
        assert!(pld_decode(&m, &[], &cfg(3)).is_err());
    }
}
