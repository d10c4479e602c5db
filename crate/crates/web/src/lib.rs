//! Browser bindings for the Token Recycling demo page in `www/`.
//!
//! Every function takes plain numbers and strings and returns a JSON string,
//! so the page needs no bindings beyond what `wasm-bindgen` generates.

use std::sync::OnceLock;

use serde::Serialize;
use token_recycling::bench::{sweep_tree, MatrixSource};
use token_recycling::corpus::{shipped_cases, shipped_model, FRESH_TEXT, REPETITIVE};
use token_recycling::{
    ar_decode, retrieve, DecodeConfig, DecodeResult, InitStrategy, LanguageModel, NGramModel,
    TokenId, TokenRecycler, TreeSpec,
};
use wasm_bindgen::prelude::*;

fn model() -> &'static NGramModel {
    static MODEL: OnceLock<NGramModel> = OnceLock::new();
    MODEL.get_or_init(|| shipped_model().expect("shipped corpus trains"))
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn config(
    k: usize,
    nodes: usize,
    depth: usize,
    temperature: f64,
    seed: u64,
    init: &str,
    max_new_tokens: usize,
) -> Result<DecodeConfig, JsError> {
    let tree = TreeSpec::default_tree()
        .resized(nodes, depth, k)
        .map_err(js_err)?;
    let init = match init {
        "random" => InitStrategy::Random { seed },
        "zero" => InitStrategy::Zero,
        other => return Err(js_err(format!("unsupported init {other:?} (zero or random)"))),
    };
    let cfg = DecodeConfig {
        k,
        tree,
        temperature,
        rng_seed: seed,
        init,
        max_new_tokens,
        ..DecodeConfig::default()
    };
    cfg.validate().map_err(js_err)?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Span {
    text: String,
    tokens: usize,
}

#[derive(Serialize)]
struct Comparison {
    text: String,
    identical: bool,
    ar_steps: usize,
    tr_steps: usize,
    mat: f64,
    spans: Vec<Span>,
}

fn spans(model: &NGramModel, r: &DecodeResult) -> Vec<Span> {
    let mut out = Vec::with_capacity(r.per_step.len());
    let mut at = 0;
    for s in &r.per_step {
        let toks = &r.tokens[at..at + s.accepted];
        at += s.accepted;
        out.push(Span {
            text: model.vocab().decode(toks),
            tokens: s.accepted,
        });
    }
    out
}

/// Decodes `prompt` with plain autoregressive decoding and with Token
/// Recycling, returning the text, step counts and TR's per-step spans.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn compare_decoding(
    prompt: &str,
    max_new_tokens: usize,
    k: usize,
    nodes: usize,
    depth: usize,
    temperature: f64,
    seed: u64,
    init: &str,
) -> Result<String, JsError> {
    let m = model();
    let cfg = config(k, nodes, depth, temperature, seed, init, max_new_tokens)?;
    let prompt = m.vocab().encode(prompt);
    let ar = ar_decode(m, &prompt, &cfg).map_err(js_err)?;
    let mut session = TokenRecycler::new(m.vocab().size(), cfg).map_err(js_err)?;
    let tr = session.decode(m, &prompt).map_err(js_err)?;
    let out = Comparison {
        text: m.vocab().decode(&tr.tokens),
        identical: ar.tokens == tr.tokens,
        ar_steps: ar.steps,
        tr_steps: tr.steps,
        mat: tr.mean_accepted(),
        spans: spans(m, &tr),
    };
    serde_json::to_string(&out).map_err(js_err)
}

#[derive(Serialize)]
struct DraftNode {
    index: usize,
    parent: Option<usize>,
    rank: Option<usize>,
    depth: usize,
    token: String,
}

#[derive(Serialize)]
struct DraftView {
    root: String,
    row: Vec<String>,
    nodes: Vec<DraftNode>,
}

/// Warms a matrix by decoding `prompt`, then shows the matrix row of the
/// last generated token and the draft tree retrieved from it.
#[wasm_bindgen]
pub fn inspect_draft(
    prompt: &str,
    max_new_tokens: usize,
    k: usize,
    nodes: usize,
    depth: usize,
) -> Result<String, JsError> {
    let m = model();
    let cfg = config(k, nodes, depth, 0.0, 0, "zero", max_new_tokens)?;
    let prompt = m.vocab().encode(prompt);
    let mut session = TokenRecycler::new(m.vocab().size(), cfg.clone()).map_err(js_err)?;
    let r = session.decode(m, &prompt).map_err(js_err)?;
    let root: TokenId = *r.tokens.last().or(prompt.last()).ok_or_else(|| js_err("empty prompt"))?;
    let matrix = session.matrix();
    let merged = retrieve(matrix, &cfg.tree, root).map_err(js_err)?;
    let v = m.vocab();
    let view = DraftView {
        root: v.surface(root),
        row: matrix
            .lookup_row(root)
            .map_err(js_err)?
            .iter()
            .map(|&t| v.surface(t))
            .collect(),
        nodes: (0..merged.len())
            .map(|i| DraftNode {
                index: i,
                parent: cfg.tree.parent(i),
                rank: cfg.tree.rank(i),
                depth: cfg.tree.node_depth(i),
                token: v.surface(merged.tokens()[i]),
            })
            .collect(),
    };
    serde_json::to_string(&view).map_err(js_err)
}

/// MAT over a grid of node counts and depths on the first `cases` shipped
/// bench prompts.
#[wasm_bindgen]
pub fn sweep(
    nodes: &[u32],
    depths: &[u32],
    cases: usize,
    max_new_tokens: usize,
) -> Result<String, JsError> {
    let m = model();
    let rep = shipped_cases(m.vocab(), &[REPETITIVE]).map_err(js_err)?;
    let fresh = shipped_cases(m.vocab(), &[FRESH_TEXT]).map_err(js_err)?;
    // Interleave categories so a small count still covers both.
    let mut all: Vec<_> = rep
        .into_iter()
        .zip(fresh)
        .flat_map(|(a, b)| [a, b])
        .take(cases.max(1))
        .collect();
    for c in &mut all {
        c.max_new_tokens = max_new_tokens;
    }
    let nodes: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();
    let depths: Vec<usize> = depths.iter().map(|&d| d as usize).collect();
    let cfg = DecodeConfig::default();
    let report = sweep_tree(m, &all, &cfg.tree, &nodes, &depths, &cfg, &MatrixSource::PerCase)
        .map_err(js_err)?;
    serde_json::to_string(&report).map_err(js_err)
}
