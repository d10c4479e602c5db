//! Rewrites `data/redundancy_corpus.txt` from its seed.

use token_recycling::corpus::{generate_redundancy_corpus, REDUNDANCY_SEED};

fn main() -> std::io::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/redundancy_corpus.txt");
    std::fs::write(path, generate_redundancy_corpus(REDUNDANCY_SEED))
}
