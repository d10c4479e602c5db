use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tree::MergedSequence;
use crate::vocab::{tokenize, Distribution, TokenId, Vocabulary, UNKNOWN_SURFACE};

use super::{check_context, check_tree_inputs, LanguageModel};

pub const NGRAM_MAGIC: &[u8; 4] = b"TRNG";
const NGRAM_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Successors {
    total: u64,
    /// Sorted by token id.
    next: Vec<(TokenId, u32)>,
}

/// Interpolated add-alpha n-gram model over a word-level vocabulary.
///
/// `P(w | h) = sum_o lambda_o * (c(h_o, w) + alpha) / (c(h_o) + alpha * |V|)`
/// over every order `o` the context is long enough for, where `h_o` is the
/// last `o - 1` context tokens and `lambda_o` is proportional to `o`. An
/// unseen context contributes a uniform term.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    /// `tables[o - 1]` maps contexts of length `o - 1` to successor counts.
    tables: Vec<HashMap<Vec<TokenId>, Successors>>,
}

/// Trains on raw UTF-8 text. The vocabulary keeps the `vocab_cap` most
/// frequent surface forms (ties by lexical order) followed by `<unk>`.
pub fn train_ngram(text: &str, order: usize, alpha: f64, vocab_cap: usize) -> Result<NGramModel> {
    if order == 0 {
        return Err(Error::invalid("order must be >= 1"));
    }
    if vocab_cap < 2 {
        return Err(Error::invalid("vocab_cap must be >= 2"));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let words = tokenize(text);
    if words.is_empty() {
        return Err(Error::Training("corpus contains no tokens".into()));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for w in &words {
        if w != UNKNOWN_SURFACE {
            *freq.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(vocab_cap);
    let mut forms: Vec<String> = ranked.into_iter().map(|(w, _)| w.to_string()).collect();
    let unknown = TokenId(forms.len() as u32);
    forms.push(UNKNOWN_SURFACE.to_string());
    let vocab = Vocabulary::with_surface_forms(forms, unknown)?;

    let stream: Vec<TokenId> = words.iter().map(|w| vocab.token_of(w)).collect();
    let mut tables = vec![HashMap::<Vec<TokenId>, Successors>::new(); order];
    for (o, table) in tables.iter_mut().enumerate() {
        // o = context length
        let mut counts: HashMap<Vec<TokenId>, BTreeMap<TokenId, u32>> = HashMap::new();
        for win in stream.windows(o + 1) {
            *counts
                .entry(win[..o].to_vec())
                .or_default()
                .entry(win[o])
                .or_default() += 1;
        }
        for (ctx, next) in counts {
            let total = next.values().map(|&c| u64::from(c)).sum();
            table.insert(
                ctx,
                Successors {
                    total,
                    next: next.into_iter().collect(),
                },
            );
        }
    }
    Ok(NGramModel {
        order,
        alpha,
        vocab,
        tables,
    })
}

pub fn train_ngram_file(
    path: impl AsRef<Path>,
    order: usize,
    alpha: f64,
    vocab_cap: usize,
) -> Result<NGramModel> {
    let text = fs::read_to_string(path)?;
    train_ngram(&text, order, alpha, vocab_cap)
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Raw count of `next` after `context` (whose length selects the order).
    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.tables
            .get(context.len())
            .and_then(|t| t.get(context))
            .and_then(|s| s.next.binary_search_by_key(&next, |e| e.0).ok().map(|i| (s, i)))
            .map_or(0, |(s, i)| u64::from(s.next[i].1))
    }

    /// Distribution given the last `order - 1` (or fewer) tokens.
    fn window_dist(&self, window: &[TokenId]) -> Result<Distribution> {
        let v = self.vocab.size();
        let usable = (window.len() + 1).min(self.order);
        let weight_sum = (usable * (usable + 1) / 2) as f64;
        let mut probs = vec![0.0; v];
        let mut flat = 0.0;
        for o in 1..=usable {
            let lambda = o as f64 / weight_sum;
            let h = &window[window.len() - (o - 1)..];
            match self.tables[o - 1].get(h) {
                Some(s) if s.total > 0 => {
                    let denom = s.total as f64 + self.alpha * v as f64;
                    flat += lambda * self.alpha / denom;
                    for &(w, c) in &s.next {
                        probs[w.index()] += lambda * f64::from(c) / denom;
                    }
                }
                _ => flat += lambda / v as f64,
            }
        }
        probs.iter_mut().for_each(|p| *p += flat);
        Distribution::new(probs)
    }

    fn window<'c>(&self, context: &'c [TokenId]) -> &'c [TokenId] {
        &context[context.len().saturating_sub(self.order - 1)..]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        out.extend_from_slice(NGRAM_MAGIC);
        put(&mut out, NGRAM_VERSION);
        put(&mut out, self.order as u32);
        out.extend_from_slice(&self.alpha.to_bits().to_le_bytes());
        put(&mut out, self.vocab.size() as u32);
        put(&mut out, self.vocab.unknown_id().0);
        put(&mut out, self.vocab.eos_id().map_or(u32::MAX, |t| t.0));
        match self.vocab.surface_forms() {
            Some(forms) => {
                out.push(1);
                for f in forms {
                    put(&mut out, f.len() as u32);
                    out.extend_from_slice(f.as_bytes());
                }
            }
            None => out.push(0),
        }
        for table in &self.tables {
            let mut entries: Vec<_> = table.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            put(&mut out, entries.len() as u32);
            for (ctx, s) in entries {
                for t in ctx {
                    put(&mut out, t.0);
                }
                put(&mut out, s.next.len() as u32);
                for &(t, c) in &s.next {
                    put(&mut out, t.0);
                    put(&mut out, c);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != NGRAM_MAGIC {
            return Err(Error::format("magic", "expected TRNG"));
        }
        let version = r.u32("version")?;
        if version != NGRAM_VERSION {
            return Err(Error::format("version", format!("unsupported version {version}")));
        }
        let order = r.u32("order")? as usize;
        if order == 0 {
            return Err(Error::format("order", "must be >= 1"));
        }
        let alpha = f64::from_bits(u64::from_le_bytes(r.take(8, "alpha")?.try_into().unwrap()));
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::format("alpha", format!("{alpha} is not a valid constant")));
        }
        let size = r.u32("vocab_size")? as usize;
        let unknown = TokenId(r.u32("unknown_id")?);
        let eos = r.u32("eos_id")?;
        let vocab = match r.take(1, "surface_flag")?[0] {
            0 => Vocabulary::anonymous(size)?,
            1 => {
                let mut forms = Vec::with_capacity(size);
                for _ in 0..size {
                    let len = r.u32("surface_form")? as usize;
                    let raw = r.take(len, "surface_form")?;
                    forms.push(
                        String::from_utf8(raw.to_vec())
                            .map_err(|_| Error::format("surface_form", "not UTF-8"))?,
                    );
                }
                Vocabulary::with_surface_forms(forms, unknown)
                    .map_err(|e| Error::format("surface_form", e.to_string()))?
            }
            f => return Err(Error::format("surface_flag", format!("unknown flag {f}"))),
        };
        let vocab = if eos == u32::MAX {
            vocab
        } else {
            vocab.with_eos(TokenId(eos)).map_err(|e| Error::format("eos_id", e.to_string()))?
        };
        let check = |t: u32| -> Result<TokenId> {
            if (t as usize) < size {
                Ok(TokenId(t))
            } else {
                Err(Error::format("counts", format!("token {t} >= vocab_size {size}")))
            }
        };
        let mut tables = Vec::with_capacity(order);
        for ctx_len in 0..order {
            let n = r.u32("counts")? as usize;
            let mut table = HashMap::with_capacity(n);
            for _ in 0..n {
                let ctx = (0..ctx_len)
                    .map(|_| r.u32("counts").and_then(check))
                    .collect::<Result<Vec<_>>>()?;
                let m = r.u32("counts")? as usize;
                let mut next = Vec::with_capacity(m);
                for _ in 0..m {
                    let t = check(r.u32("counts")?)?;
                    next.push((t, r.u32("counts")?));
                }
                let total = next.iter().map(|&(_, c)| u64::from(c)).sum();
                table.insert(ctx, Successors { total, next });
            }
            tables.push(table);
        }
        if r.pos != bytes.len() {
            return Err(Error::format("trailer", format!("{} unread bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            order,
            alpha,
            vocab,
            tables,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(field, "file truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }
}

impl LanguageModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution> {
        check_context(&self.vocab, context)?;
        self.window_dist(self.window(context))
    }

    /// Only the last `order - 1` tokens of each node's path-extended context
    /// matter, so nodes sharing that window share one computation.
    fn evaluate_tree(&self, context: &[TokenId], seq: &MergedSequence<'_>) -> Result<Vec<Distribution>> {
        check_tree_inputs(&self.vocab, context, seq)?;
        let need = self.order - 1;
        let mut cache: HashMap<Vec<TokenId>, usize> = HashMap::new();
        let mut unique: Vec<Distribution> = Vec::new();
        let mut slots = Vec::with_capacity(seq.len());
        let spec = seq.spec();
        for i in 0..seq.len() {
            // Walk up at most `need` ancestors, then borrow from the context.
            let mut window = Vec::with_capacity(need);
            let mut node = Some(i);
            while let Some(n) = node {
                if window.len() == need {
                    break;
                }
                window.push(seq.tokens()[n]);
                node = spec.parent(n);
            }
            let from_ctx = need - window.len();
            window.extend(context[context.len().saturating_sub(from_ctx)..].iter().rev());
            window.reverse();
            let slot = match cache.get(&window) {
                Some(&s) => s,
                None => {
                    unique.push(self.window_dist(&window)?);
                    cache.insert(window, unique.len() - 1);
                    unique.len() - 1
                }
            };
            slots.push(slot);
        }
        Ok(slots.into_iter().map(|s| unique[s].clone()).collect())
    }
}
