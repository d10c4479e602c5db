//! Corpus files and the shipped synthetic "redundancy corpus".
//!
//! A corpus file holds one case per blank-line-separated block. A block may
//! start with an `@category` line; blocks without one fall in `default`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{train_ngram, NGramModel};
use crate::vocab::{TokenId, Vocabulary};

pub const REDUNDANCY_CORPUS: &str = include_str!("../data/redundancy_corpus.txt");
pub const REDUNDANCY_SEED: u64 = 20240816;

pub const WARMUP: &str = "warmup";
pub const REPETITIVE: &str = "repetitive";
pub const FRESH_TEXT: &str = "fresh-text";
/// Lists of rare terms that widen the vocabulary; never used as prompts.
pub const GLOSSARY: &str = "glossary";

/// Settings under which the shipped corpus is benchmarked.
pub const SHIPPED_ORDER: usize = 3;
pub const SHIPPED_ALPHA: f64 = 0.5;
pub const SHIPPED_PROMPT_LEN: usize = 16;
pub const SHIPPED_MAX_NEW_TOKENS: usize = 256;

/// The n-gram model trained on the whole shipped corpus.
pub fn shipped_model() -> Result<NGramModel> {
    train_ngram(REDUNDANCY_CORPUS, SHIPPED_ORDER, SHIPPED_ALPHA, usize::MAX)
}

/// Shipped-corpus cases from the given categories, using the shipped
/// prompt length and generation budget.
pub fn shipped_cases(vocab: &Vocabulary, categories: &[&str]) -> Result<Vec<BenchCase>> {
    cases_from_corpus(
        REDUNDANCY_CORPUS,
        vocab,
        SHIPPED_PROMPT_LEN,
        SHIPPED_MAX_NEW_TOKENS,
        categories,
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub category: String,
    pub text: String,
}

pub fn parse_blocks(text: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut lines: Vec<&str> = Vec::new();
    let mut flush = |lines: &mut Vec<&str>| {
        if lines.is_empty() {
            return;
        }
        let (category, body) = match lines[0].trim().strip_prefix('@') {
            Some(cat) => (cat.trim().to_string(), &lines[1..]),
            None => ("default".to_string(), &lines[..]),
        };
        let text = body.join("\n").trim().to_string();
        if !text.is_empty() {
            blocks.push(Block { category, text });
        }
        lines.clear();
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut lines);
        } else {
            lines.push(line);
        }
    }
    flush(&mut lines);
    blocks
}

/// One prompt to decode.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct BenchCase {
    pub name: String,
    pub category: String,
    pub prompt: Vec<TokenId>,
    pub max_new_tokens: usize,
}

impl BenchCase {
    pub fn new(
        name: impl Into<String>,
        category: impl Into<String>,
        prompt: Vec<TokenId>,
        max_new_tokens: usize,
    ) -> Result<Self> {
        if prompt.is_empty() {
            return Err(Error::invalid("bench case prompt must not be empty"));
        }
        Ok(Self {
            name: name.into(),
            category: category.into(),
            prompt,
            max_new_tokens,
        })
    }
}

/// Turns corpus blocks into cases whose prompt is the first `prompt_len`
/// tokens of the block. `categories` filters blocks when non-empty.
pub fn cases_from_corpus(
    text: &str,
    vocab: &Vocabulary,
    prompt_len: usize,
    max_new_tokens: usize,
    categories: &[&str],
) -> Result<Vec<BenchCase>> {
    if prompt_len == 0 {
        return Err(Error::invalid("prompt length must be >= 1"));
    }
    let mut cases = Vec::new();
    for (i, block) in parse_blocks(text).into_iter().enumerate() {
        if !categories.is_empty() && !categories.contains(&block.category.as_str()) {
            continue;
        }
        let mut prompt = vocab.encode(&block.text);
        prompt.truncate(prompt_len);
        if prompt.is_empty() {
            continue;
        }
        cases.push(BenchCase::new(
            format!("{}-{i:03}", block.category),
            block.category,
            prompt,
            max_new_tokens,
        )?);
    }
    Ok(cases)
}

const PEOPLE: &[&str] = &[
    "engineer", "analyst", "committee", "team", "operator", "student", "manager", "researcher",
    "editor", "auditor", "designer", "director",
];
const ACTIONS: &[&str] = &[
    "reviewed", "updated", "checked", "approved", "measured", "reported", "tested", "prepared",
    "shared", "revised",
];
const THINGS: &[&str] = &[
    "report", "schedule", "budget", "design", "data", "results", "plan", "model", "summary",
    "contract", "survey", "proposal",
];
const TIMES: &[&str] = &[
    "in the morning",
    "after the meeting",
    "before the deadline",
    "during the review",
    "at the end of the week",
    "on the same day",
];
const QUALITIES: &[&str] = &[
    "clear", "late", "complete", "accurate", "useful", "short", "detailed", "ready",
];
const CLOSINGS: &[&str] = &[
    "Please let me know if you have any questions .",
    "Thank you for your help with this .",
    "We will send the next update soon .",
];

const FRESH_WORDS: &[&str] = &[
    "river", "forest", "lantern", "copper", "meadow", "harbor", "violin", "glacier", "orchard",
    "pepper", "canyon", "feather", "marble", "thunder", "saddle", "compass", "ember", "willow",
    "quartz", "ribbon", "falcon", "tundra", "velvet", "anchor", "biscuit", "cobalt", "dune",
    "fjord", "garnet", "hazel", "ivory", "jasmine", "kettle", "lagoon", "mosaic", "nectar",
    "opal", "prairie", "quill", "raven", "sable", "timber", "umber", "vortex", "walnut",
    "yarrow", "zephyr", "basalt", "cedar", "delta",
];
const FRESH_VERBS: &[&str] = &[
    "drifts", "glows", "bends", "echoes", "settles", "wanders", "shivers", "rises", "fades",
    "turns", "hums", "gathers", "spills", "waits", "sparkles", "tilts",
];
const FRESH_LINKS: &[&str] = &[
    "beside", "under", "beyond", "across", "toward", "within", "behind", "along",
];

const SKEW: f64 = 2.0;
const FRESH_SKEW: f64 = 1.0;

/// Draws `xs[r]` with weight `1 / (r + 1)^skew`.
fn zipf<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str], skew: f64) -> &'a str {
    let total: f64 = (1..=xs.len()).map(|r| (r as f64).powf(-skew)).sum();
    let mut u = rng.gen::<f64>() * total;
    for (r, x) in xs.iter().enumerate() {
        u -= ((r + 1) as f64).powf(-skew);
        if u <= 0.0 {
            return x;
        }
    }
    xs[xs.len() - 1]
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    zipf(rng, xs, SKEW)
}

fn templated_paragraph(rng: &mut ChaCha8Rng) -> String {
    let template = rng.gen_range(0..3);
    let sentences = rng.gen_range(4..7);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..sentences {
        let s = match template {
            0 => format!(
                "The {} {} the {} {} , and the {} {} the {} .",
                pick(rng, PEOPLE),
                pick(rng, ACTIONS),
                pick(rng, THINGS),
                pick(rng, TIMES),
                pick(rng, PEOPLE),
                pick(rng, ACTIONS),
                pick(rng, THINGS),
            ),
            1 => format!(
                "The {} was {} because the {} {} it {} .",
                pick(rng, THINGS),
                pick(rng, QUALITIES),
                pick(rng, PEOPLE),
                pick(rng, ACTIONS),
                pick(rng, TIMES),
            ),
            _ => format!(
                "According to the {} , the {} is {} and the {} is {} .",
                pick(rng, PEOPLE),
                pick(rng, THINGS),
                pick(rng, QUALITIES),
                pick(rng, THINGS),
                pick(rng, QUALITIES),
            ),
        };
        out.push(s);
    }
    out.push(pick(rng, CLOSINGS).to_string());
    out.join(" ")
}

fn fresh_paragraph(rng: &mut ChaCha8Rng) -> String {
    let sentences = rng.gen_range(4..7);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..sentences {
        let words: Vec<&str> = (0..3).map(|_| zipf(rng, FRESH_WORDS, FRESH_SKEW)).collect();
        out.push(format!(
            "A {} {} {} the {} , while {} {} .",
            words[0],
            zipf(rng, FRESH_VERBS, FRESH_SKEW),
            zipf(rng, FRESH_LINKS, FRESH_SKEW),
            words[1],
            words[2],
            zipf(rng, FRESH_VERBS, FRESH_SKEW),
        ));
    }
    out.join(" ")
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn rare_term(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
    }
    w
}

fn glossary_paragraph(rng: &mut ChaCha8Rng, terms: usize) -> String {
    let words: Vec<String> = (0..terms).map(|_| rare_term(rng)).collect();
    format!("Index : {} .", words.join(" , "))
}

/// Regenerates the shipped corpus text from its seed.
pub fn generate_redundancy_corpus(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    for _ in 0..12 {
        blocks.push(format!("@{WARMUP}\n{}", templated_paragraph(&mut rng)));
    }
    for _ in 0..12 {
        blocks.push(format!("@{REPETITIVE}\n{}", templated_paragraph(&mut rng)));
    }
    for _ in 0..12 {
        blocks.push(format!("@{FRESH_TEXT}\n{}", fresh_paragraph(&mut rng)));
    }
    for _ in 0..8 {
        blocks.push(format!("@{GLOSSARY}\n{}", glossary_paragraph(&mut rng, 100)));
    }
    let mut text = blocks.join("\n\n");
    text.push('\n');
    text
}
