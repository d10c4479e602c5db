//! Token Recycling: training-free speculative decoding that stores every
//! step's top-k candidate tokens in a `|V| x k` adjacency matrix, retrieves a
//! static draft tree from it by breadth-first expansion, and verifies all
//! draft paths with one batched model evaluation.

pub mod bench;
pub mod config;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod matrix;
pub mod model;
pub mod tree;
pub mod vocab;

pub use bench::{run_bench, DecodeReport, MatrixSource, Method};
pub use config::{DecodeConfig, InitStrategy, PldConfig, UpdateScope, UpdateStrategy};
pub use decoder::{
    ar_decode, pld_decode, tr_decode, verify, DecodeResult, StepOutcome, TokenRecycler,
    VerifyMode,
};
pub use corpus::{cases_from_corpus, BenchCase};
pub use error::{Error, Result};
pub use matrix::RecycleMatrix;
pub use model::{CycleModel, HashModel, LanguageModel, NGramModel};
pub use tree::{calibrate_tree, retrieve, validate_tree, MergedSequence, NodeRecord, TreeSpec};
pub use vocab::{argtop_k, greedy_token, sample_token, Distribution, TokenId, TopK, Vocabulary};
