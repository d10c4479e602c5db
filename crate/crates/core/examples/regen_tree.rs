//! Rebuilds `data/default_tree.txt` by calibrating a complete 8-ary tree of
//! depth 5 against the warm-up blocks of the shipped corpus. Hit counts are
//! summed over greedy and sampled runs so that more than the single greedy
//! path gets measured; if fewer than 80 nodes are ever hit, the tree is
//! padded by `TreeSpec::resized`.

use token_recycling::bench::{node_hit_counts, MatrixSource};
use token_recycling::corpus::{cases_from_corpus, shipped_model, REDUNDANCY_CORPUS, WARMUP};
use token_recycling::{calibrate_tree, DecodeConfig, LanguageModel, TreeSpec};

fn main() -> token_recycling::Result<()> {
    let model = shipped_model()?;
    let cases = cases_from_corpus(REDUNDANCY_CORPUS, model.vocab(), 12, 128, &[WARMUP])?;
    let configs: Vec<DecodeConfig> = [(0.0, 0), (0.5, 1), (1.0, 2)]
        .into_iter()
        .map(|(temperature, rng_seed)| DecodeConfig {
            tree: TreeSpec::chain(1),
            temperature,
            rng_seed,
            ..DecodeConfig::default()
        })
        .collect();
    let mut rounds = 0;
    let tree = calibrate_tree(8, 5, 81, 40, |t| {
        rounds += 1;
        eprintln!("round {rounds}: {} nodes", t.len());
        let mut total = vec![0u64; t.len()];
        for config in &configs {
            let counts = node_hit_counts(&model, &cases, t, config, &MatrixSource::Carry)?;
            for (a, c) in total.iter_mut().zip(counts) {
                *a += c;
            }
        }
        Ok(total)
    })?;
    eprintln!("hit nodes: {}", tree.len());
    let tree = tree.resized(81, 5, 8)?;
    eprintln!("calibrated: {} nodes, depth {}", tree.len(), tree.depth());
    let header = "# Default draft tree: 81 nodes (root + 80 drafts), 5 draft layers.\n\
                  # Calibrated from a complete 8-ary tree of depth 5 by iterative\n\
                  # pruning on acceptance counts (see examples/regen_tree.rs).\n\
                  # Columns: index parent rank\n";
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/default_tree.txt");
    std::fs::write(path, format!("{header}{}", tree.to_text()))?;
    Ok(())
}
