//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p token-recycling --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use token_recycling::bench::{
    ablate_init, ablate_temperature, ablate_update_scope, run_bench, sweep_tree, warm_matrix,
    InitAblation, MatrixSource, Method,
};
use token_recycling::corpus::{shipped_cases, shipped_model, FRESH_TEXT, REPETITIVE, WARMUP};
use token_recycling::{
    ar_decode, pld_decode, retrieve, tr_decode, BenchCase, CycleModel, DecodeConfig, HashModel,
    InitStrategy, LanguageModel, MergedSequence, NGramModel, RecycleMatrix, TokenId,
    TokenRecycler, TopK, TreeSpec, UpdateStrategy,
};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took < limit {
        Ok(took)
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn shipped() -> (NGramModel, Vec<BenchCase>) {
    let model = shipped_model().expect("shipped model trains");
    let cases = shipped_cases(model.vocab(), &[REPETITIVE, FRESH_TEXT]).expect("shipped cases");
    (model, cases)
}

fn lossless_on_fuzzed_pairs() -> Check {
    let started = Instant::now();
    let mut r = rng(1);
    let mut pairs = 0;
    for i in 0..120 {
        let (ar, tr, pld) = if i % 2 == 0 {
            let m = random_cycle_model(&mut r);
            run_three(&m, &mut r)
        } else {
            let m = random_ngram_model(&mut r);
            run_three(&m, &mut r)
        };
        if tr != ar || pld != ar {
            return Err(format!("pair {i}: outputs differ from AR"));
        }
        pairs += 1;
    }
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!("{pairs} pairs (cycle + n-gram) identical to AR in {took:.1?}"))
}

fn run_three<M: LanguageModel>(
    m: &M,
    r: &mut impl Rng,
) -> (Vec<TokenId>, Vec<TokenId>, Vec<TokenId>) {
    let v = m.vocab().size();
    let k = r.gen_range(1..=v.min(8));
    let tree = if k == 8 && r.gen_bool(0.5) {
        TreeSpec::default_tree().resized(r.gen_range(6..81), 5, k).unwrap()
    } else {
        random_tree(r, 40, k)
    };
    let cfg = DecodeConfig {
        k,
        tree,
        max_new_tokens: r.gen_range(1..100),
        ..DecodeConfig::default()
    };
    let prompt_len = r.gen_range(1..8);
    let prompt = random_tokens(r, v, prompt_len);
    (
        ar_decode(m, &prompt, &cfg).unwrap().tokens,
        tr_decode(m, &prompt, &cfg).unwrap().tokens,
        pld_decode(m, &prompt, &cfg).unwrap().tokens,
    )
}

fn tree_eval_equivalence() -> Check {
    let started = Instant::now();
    let mut r = rng(2);
    for i in 0..1000 {
        let mismatch = match i % 3 {
            0 => tree_eval_mismatch(&random_ngram_model(&mut r), &mut r),
            1 => tree_eval_mismatch(&random_cycle_model(&mut r), &mut r),
            _ => {
                let v = r.gen_range(2..30);
                let m = HashModel::new(v, r.gen_range(1..4), r.gen(), 2.0).unwrap();
                tree_eval_mismatch(&m, &mut r)
            }
        };
        if mismatch {
            return Err(format!("triple {i}: evaluate_tree differs from per-node evaluation"));
        }
    }
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!("1000 (model, context, tree) triples elementwise equal in {took:.1?}"))
}

fn tree_eval_mismatch<M: LanguageModel>(m: &M, r: &mut impl Rng) -> bool {
    let v = m.vocab().size();
    let spec = random_tree(r, 40, v.min(8));
    let tokens = random_tokens(r, v, spec.len());
    let seq = MergedSequence::new(&spec, tokens).unwrap();
    let ctx_len = r.gen_range(0..8);
    let ctx = random_tokens(r, v, ctx_len);
    m.evaluate_tree(&ctx, &seq).unwrap() != naive_tree_eval(m, &ctx, &seq)
}

fn retrieval_equivalence() -> Check {
    let mut r = rng(3);
    for i in 0..1000 {
        let vocab = r.gen_range(2..200);
        let k = r.gen_range(1..=8);
        let m = random_matrix(&mut r, vocab, k);
        let spec = random_tree(&mut r, 100, k);
        let root = TokenId(r.gen_range(0..vocab as u32));
        let seq = retrieve(&m, &spec, root).unwrap();
        if seq.tokens() != naive_retrieve(&m, &spec, root) {
            return Err(format!("case {i}: layer-wise retrieval differs from recursive lookup"));
        }
    }
    Ok("1000 (matrix, tree, root) cases identical".into())
}

fn update_strategy_example() -> Check {
    let (a, b, c, d) = (TokenId(0), TokenId(1), TokenId(2), TokenId(3));
    let row = |start: u32| TopK::from_tokens((start..start + 4).map(TokenId).collect());
    // a1..a4 = 10..13, a5..a8 = 14..17
    let tokens = [a, b, c, a, d];
    let rows = [row(10), row(20), row(30), row(14), row(40)];
    let run = |s: UpdateStrategy| {
        let mut m = RecycleMatrix::zeros(50, 4);
        m.update(&tokens, &rows, s).unwrap();
        m
    };
    let first = run(UpdateStrategy::First);
    let last = run(UpdateStrategy::Last);
    let seq = run(UpdateStrategy::Sequential);
    let ids = |m: &RecycleMatrix| m.lookup_row(a).unwrap().iter().map(|t| t.0).collect::<Vec<_>>();
    let ok = ids(&first) == [10, 11, 12, 13] && ids(&last) == [14, 15, 16, 17] && seq == last;
    ensure(
        ok,
        format!(
            "first -> {:?}, last -> {:?}, sequential == last: {}",
            ids(&first),
            ids(&last),
            seq == last
        ),
    )
}

fn cycle_steady_state() -> Check {
    let cfg = DecodeConfig::default();
    let depth = cfg.tree.depth();
    let mut notes = Vec::new();
    for len in [1, 3, depth] {
        let cycle: Vec<TokenId> = (0..len as u32).map(|i| TokenId(i + 2)).collect();
        let model = CycleModel::new(cycle.clone(), 16).unwrap();
        let prompt = vec![cycle[0]];

        // Steady state: warm the matrix, then every step must take depth + 1.
        let mut session = TokenRecycler::new(16, cfg.clone()).unwrap();
        let mut ctx = prompt.clone();
        for _ in 0..20 {
            let out = session.step(&model, &ctx, 0).unwrap();
            ctx.extend(out.accepted);
        }
        for _ in 0..20 {
            let out = session.step(&model, &ctx, 0).unwrap();
            if out.accepted.len() != depth + 1 {
                return Err(format!(
                    "cycle {len}: warmed step accepted {} tokens, expected {}",
                    out.accepted.len(),
                    depth + 1
                ));
            }
            ctx.extend(out.accepted);
        }

        let run = DecodeConfig {
            max_new_tokens: 300,
            ..cfg.clone()
        };
        let ar = ar_decode(&model, &prompt, &run).unwrap();
        let tr = tr_decode(&model, &prompt, &run).unwrap();
        let ratio = ar.steps as f64 / tr.steps as f64;
        if ratio < 0.9 * (depth + 1) as f64 || tr.tokens != ar.tokens {
            return Err(format!("cycle {len}: step ratio {ratio:.3} over 300 tokens"));
        }
        notes.push(format!("cycle {len}: ratio {ratio:.2}"));
    }
    Ok(format!(
        "warmed steps accept {} tokens; {}",
        depth + 1,
        notes.join(", ")
    ))
}

fn update_scope_direction() -> Check {
    let (model, cases) = shipped();
    let r = ablate_update_scope(&model, &cases, &DecodeConfig::default(), &MatrixSource::PerCase)
        .map_err(|e| e.to_string())?;
    let all = r.mat("all").unwrap();
    let accepted = r.mat("accepted").unwrap();
    ensure(
        all > accepted,
        format!("MAT all_draft {all:.4} vs accepted_only {accepted:.4}"),
    )
}

fn init_direction() -> Check {
    let (model, cases) = shipped();
    let cfg = DecodeConfig::default();
    let warmup = shipped_cases(model.vocab(), &[WARMUP]).map_err(|e| e.to_string())?;
    let warm = warm_matrix(&model, &warmup, &cfg).map_err(|e| e.to_string())?;
    let r = ablate_init(
        &model,
        &cases,
        &[
            InitAblation::Random,
            InitAblation::Zero,
            InitAblation::FixedHot,
            InitAblation::ShuffleHot,
        ],
        &cfg,
        Some(&warm),
    )
    .map_err(|e| e.to_string())?;
    let [random, zero, fixed, shuffle] =
        ["random", "zero", "fixed-hot", "shuffle-hot"].map(|l| r.mat(l).unwrap());
    ensure(
        random <= zero && zero <= fixed && zero <= shuffle,
        format!(
            "MAT random {random:.4} <= zero {zero:.4} <= hot (fixed {fixed:.4}, shuffle {shuffle:.4})"
        ),
    )
}

fn storage_bound() -> Check {
    let m = RecycleMatrix::new(32000, 8, &InitStrategy::Zero).map_err(|e| e.to_string())?;
    let bytes = m.to_bytes().len();
    ensure(
        bytes <= 2_000_000 && bytes == 1_024_016 && bytes == m.serialized_len(),
        format!("32000 x 8 matrix serializes to {bytes} bytes"),
    )
}

fn sweep_shapes() -> Check {
    let (model, cases) = shipped();
    let cfg = DecodeConfig::default();
    let base = TreeSpec::default_tree();
    let src = MatrixSource::PerCase;
    let breadth = sweep_tree(&model, &cases, &base, &[20, 40, 60, 80], &[5], &cfg, &src)
        .map_err(|e| e.to_string())?;
    let mats: Vec<f64> = breadth.points.iter().map(|p| p.mat).collect();
    let monotone = mats.len() == 4 && mats.windows(2).all(|w| w[0] <= w[1]);

    let depth = sweep_tree(&model, &cases, &base, &[60], &[2, 4, 5, 7], &cfg, &src)
        .map_err(|e| e.to_string())?;
    let at = |d| depth.point(60, d).map(|p| p.mat).unwrap_or(f64::NAN);
    let early = at(4) - at(2);
    let late = at(7) - at(5);
    let flattening = late < early;
    ensure(
        monotone && flattening,
        format!(
            "depth 5, nodes 20/40/60/80 -> MAT {}; 60 nodes: gain 2->4 {early:.4}, 5->7 {late:.4}",
            mats.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join("/"),
        ),
    )
}

fn temperature_robustness() -> Check {
    let (model, cases) = shipped();
    let r = ablate_temperature(
        &model,
        &cases,
        &[0.0, 0.3, 1.0],
        &DecodeConfig::default(),
        &MatrixSource::PerCase,
    )
    .map_err(|e| e.to_string())?;
    let [t0, t03, t1] = ["T=0", "T=0.3", "T=1"].map(|l| r.mat(l).unwrap());
    let rel = (t03 - t0).abs() / t0;
    ensure(
        rel <= 0.10 && t1 <= t03,
        format!("MAT T=0 {t0:.4}, T=0.3 {t03:.4} ({:.1}% off), T=1 {t1:.4}", rel * 100.0),
    )
}

fn determinism() -> Check {
    let (model, cases) = shipped();
    let cases = &cases[..6];
    let base = TreeSpec::default_tree();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let mut texts = Vec::new();
        for temperature in [0.0, 0.7] {
            let cfg = DecodeConfig {
                temperature,
                rng_seed: 7,
                ..DecodeConfig::default()
            };
            for source in [MatrixSource::PerCase, MatrixSource::Carry] {
                let mut r = run_bench(cases, &model, &[Method::Ar, Method::Tr, Method::Pld], &cfg, &source)
                    .map_err(|e| e.to_string())?;
                r.strip_timing();
                texts.push(r.to_json().map_err(|e| e.to_string())?);
            }
            let mut s = sweep_tree(&model, cases, &base, &[20, 60], &[3, 5], &cfg, &MatrixSource::PerCase)
                .map_err(|e| e.to_string())?;
            s.strip_timing();
            texts.push(s.to_json().map_err(|e| e.to_string())?);
        }
        reports.push(texts);
    }
    let n = reports[0].len();
    ensure(
        reports[0] == reports[1],
        format!("{n} bench/sweep reports byte-identical across re-runs (timing stripped)"),
    )
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("losslessness on fuzzed models", lossless_on_fuzzed_pairs),
        ("tree evaluation equals per-path evaluation", tree_eval_equivalence),
        ("breadth-first retrieval equals recursive lookup", retrieval_equivalence),
        ("duplicate-token update strategies", update_strategy_example),
        ("steady-state acceptance on cycles", cycle_steady_state),
        ("all-draft updates beat accepted-only", update_scope_direction),
        ("initialization ordering random <= zero <= hot", init_direction),
        ("matrix storage under 2 MB", storage_bound),
        ("tree sweep shapes", sweep_shapes),
        ("temperature robustness", temperature_robustness),
        ("report determinism", determinism),
    ];
    let results: Vec<(Check, Duration)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let r = std::panic::catch_unwind(f)
                        .unwrap_or_else(|_| Err("panicked".to_string()));
                    (r, t.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (result, took))) in criteria.iter().zip(results).enumerate() {
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {name}: {detail} ({took:.1?})", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
