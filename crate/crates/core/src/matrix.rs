//! The adjacency matrix: one row of `k` candidate successors per vocabulary
//! token, refreshed from every verification step.
//!
//! On-disk layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TRMX"
//! 4       4     format version (1)
//! 8       4     vocab_size
//! 12      4     k
//! 16      4*V*k rows, row-major, u32 token ids
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{InitStrategy, UpdateStrategy};
use crate::error::{Error, Result};
use crate::vocab::{TokenId, TopK};

pub const MATRIX_MAGIC: &[u8; 4] = b"TRMX";
pub const MATRIX_VERSION: u32 = 1;
pub const MATRIX_HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecycleMatrix {
    vocab_size: usize,
    k: usize,
    rows: Vec<TokenId>,
}

impl RecycleMatrix {
    pub fn new(vocab_size: usize, k: usize, strategy: &InitStrategy) -> Result<Self> {
        check_dims(vocab_size, k)?;
        match strategy {
            InitStrategy::Zero => Ok(Self::zeros(vocab_size, k)),
            InitStrategy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let rows = (0..vocab_size * k)
                    .map(|_| TokenId(rng.gen_range(0..vocab_size as u32)))
                    .collect();
                Ok(Self {
                    vocab_size,
                    k,
                    rows,
                })
            }
            InitStrategy::Hot { path } => {
                let m = Self::load(path)?;
                if m.vocab_size != vocab_size || m.k != k {
                    return Err(Error::IncompatibleMatrix {
                        expected_vocab: vocab_size,
                        expected_k: k,
                        found_vocab: m.vocab_size,
                        found_k: m.k,
                    });
                }
                Ok(m)
            }
        }
    }

    pub fn zeros(vocab_size: usize, k: usize) -> Self {
        Self {
            vocab_size,
            k,
            rows: vec![TokenId(0); vocab_size * k],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Row `t` without bounds reporting; callers have validated `t`.
    #[inline]
    pub(crate) fn row_unchecked(&self, t: TokenId) -> &[TokenId] {
        let start = t.index() * self.k;
        &self.rows[start..start + self.k]
    }

    pub fn lookup_row(&self, t: TokenId) -> Result<&[TokenId]> {
        if t.index() >= self.vocab_size {
            return Err(Error::invalid(format!(
                "token {t} out of range for matrix with {} rows",
                self.vocab_size
            )));
        }
        Ok(self.row_unchecked(t))
    }

    fn write_row(&mut self, t: TokenId, row: &TopK) {
        let start = t.index() * self.k;
        self.rows[start..start + self.k].copy_from_slice(row.tokens());
    }

    /// Overwrites the row of every token in `tokens` with the matching
    /// candidate list. Duplicated tokens are resolved by `strategy`.
    pub fn update(
        &mut self,
        tokens: &[TokenId],
        topk_rows: &[TopK],
        strategy: UpdateStrategy,
    ) -> Result<()> {
        if tokens.len() != topk_rows.len() {
            return Err(Error::invalid(format!(
                "update got {} tokens but {} candidate rows",
                tokens.len(),
                topk_rows.len()
            )));
        }
        for (i, (t, row)) in tokens.iter().zip(topk_rows).enumerate() {
            if t.index() >= self.vocab_size {
                return Err(Error::invalid(format!("update token {t} out of range")));
            }
            if row.len() != self.k {
                return Err(Error::invalid(format!(
                    "candidate row {i} has {} entries, matrix k = {}",
                    row.len(),
                    self.k
                )));
            }
            if let Some(bad) = row.tokens().iter().find(|c| c.index() >= self.vocab_size) {
                return Err(Error::invalid(format!("candidate {bad} out of range")));
            }
        }
        match strategy {
            UpdateStrategy::Sequential => {
                for (&t, row) in tokens.iter().zip(topk_rows) {
                    self.write_row(t, row);
                }
            }
            UpdateStrategy::First | UpdateStrategy::Last => {
                let mut chosen: HashMap<TokenId, usize> = HashMap::with_capacity(tokens.len());
                for (i, &t) in tokens.iter().enumerate() {
                    match strategy {
                        UpdateStrategy::First => {
                            chosen.entry(t).or_insert(i);
                        }
                        _ => {
                            chosen.insert(t, i);
                        }
                    }
                }
                for (t, i) in chosen {
                    self.write_row(t, &topk_rows[i]);
                }
            }
        }
        Ok(())
    }

    pub fn serialized_len(&self) -> usize {
        MATRIX_HEADER_LEN + 4 * self.rows.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u32).to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        for t in &self.rows {
            out.extend_from_slice(&t.0.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MATRIX_HEADER_LEN {
            return Err(Error::format(
                "header",
                format!("need {MATRIX_HEADER_LEN} bytes, file has {}", bytes.len()),
            ));
        }
        if &bytes[0..4] != MATRIX_MAGIC {
            return Err(Error::format("magic", format!("expected TRMX, found {:?}", &bytes[0..4])));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(4);
        if version != MATRIX_VERSION {
            return Err(Error::format(
                "version",
                format!("unsupported version {version}"),
            ));
        }
        let vocab_size = word(8) as usize;
        let k = word(12) as usize;
        if vocab_size < 2 {
            return Err(Error::format("vocab_size", format!("{vocab_size} < 2")));
        }
        if k == 0 {
            return Err(Error::format("k", "must be >= 1"));
        }
        let expected = vocab_size
            .checked_mul(k)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(MATRIX_HEADER_LEN))
            .ok_or_else(|| Error::format("vocab_size", "dimensions overflow"))?;
        if bytes.len() != expected {
            return Err(Error::format(
                "rows",
                format!("expected {expected} bytes for {vocab_size}x{k}, found {}", bytes.len()),
            ));
        }
        let rows: Vec<TokenId> = bytes[MATRIX_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| TokenId(u32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        if let Some(pos) = rows.iter().position(|t| t.index() >= vocab_size) {
            return Err(Error::format(
                "rows",
                format!("entry {pos} holds token {} >= vocab_size {vocab_size}", rows[pos]),
            ));
        }
        Ok(Self {
            vocab_size,
            k,
            rows,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn check_dims(vocab_size: usize, k: usize) -> Result<()> {
    if vocab_size < 2 {
        return Err(Error::invalid(format!("vocab_size must be >= 2, got {vocab_size}")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if vocab_size > u32::MAX as usize {
        return Err(Error::invalid("vocab_size exceeds u32 range"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::ids;

    fn topk(raw: &[u32]) -> TopK {
        TopK::from_tokens(ids(raw))
    }

    #[test]
    fn zero_init() {
        let m = RecycleMatrix::new(5, 2, &InitStrategy::Zero).unwrap();
        for t in 0..5 {
            assert_eq!(m.lookup_row(TokenId(t)).unwrap(), ids(&[0, 0]));
        }
    }

    #[test]
    fn random_init_is_seeded() {
        let a = RecycleMatrix::new(5, 2, &InitStrategy::Random { seed: 1 }).unwrap();
        let b = RecycleMatrix::new(5, 2, &InitStrategy::Random { seed: 1 }).unwrap();
        let c = RecycleMatrix::new(5, 2, &InitStrategy::Random { seed: 2 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.rows.iter().all(|t| t.index() < 5));
    }

    #[test]
    fn storage_for_full_vocabulary() {
        let m = RecycleMatrix::new(32000, 8, &InitStrategy::Zero).unwrap();
        assert_eq!(m.to_bytes().len(), 16 + 32000 * 8 * 4);
        assert_eq!(m.serialized_len(), 1_024_016);
    }

    #[test]
    fn lookup_out_of_range() {
        let m = RecycleMatrix::zeros(5, 2);
        assert!(matches!(m.lookup_row(TokenId(5)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn update_overwrites_named_rows_only() {
        // guest=1 -> [speaker=2, speak=3, Spe=4]
        let mut m = RecycleMatrix::zeros(6, 3);
        m.update(&ids(&[1]), &[topk(&[2, 3, 4])], UpdateStrategy::Sequential)
            .unwrap();
        assert_eq!(m.lookup_row(TokenId(1)).unwrap(), ids(&[2, 3, 4]));
        for t in [0, 2, 3, 4, 5] {
            assert_eq!(m.lookup_row(TokenId(t)).unwrap(), ids(&[0, 0, 0]));
        }
    }

    #[test]
    fn update_rejects_length_mismatch() {
        let mut m = RecycleMatrix::zeros(6, 2);
        assert!(m
            .update(&ids(&[1, 2]), &[topk(&[0, 1])], UpdateStrategy::Last)
            .is_err());
        assert!(m
            .update(&ids(&[1]), &[topk(&[0, 1, 2])], UpdateStrategy::Last)
            .is_err());
    }

    #[test]
    fn round_trip_and_format_errors() {
        let m = RecycleMatrix::new(7, 3, &InitStrategy::Random { seed: 4 }).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(RecycleMatrix::from_bytes(&bytes).unwrap(), m);

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            RecycleMatrix::from_bytes(truncated),
            Err(Error::Format { field: "rows", .. })
        ));
        assert!(matches!(
            RecycleMatrix::from_bytes(&bytes[..10]),
            Err(Error::Format { field: "header", .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            RecycleMatrix::from_bytes(&bad),
            Err(Error::Format { field: "magic", .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            RecycleMatrix::from_bytes(&bad),
            Err(Error::Format { field: "version", .. })
        ));
        let mut bad = bytes;
        bad[16..20].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            RecycleMatrix::from_bytes(&bad),
            Err(Error::Format { field: "rows", .. })
        ));
    }

    #[test]
    fn hot_start_checks_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.trmx");
        RecycleMatrix::zeros(10, 4).save(&path).unwrap();
        let ok = RecycleMatrix::new(10, 4, &InitStrategy::Hot { path: path.clone() });
        assert!(ok.is_ok());
        let err = RecycleMatrix::new(11, 4, &InitStrategy::Hot { path: path.clone() });
        assert!(matches!(err, Err(Error::IncompatibleMatrix { .. })));
        let missing = RecycleMatrix::new(10, 4, &InitStrategy::Hot {
            path: dir.path().join("nope.trmx"),
        });
        assert!(matches!(missing, Err(Error::Io(_))));
    }
}
