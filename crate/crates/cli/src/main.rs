//! `tokrec`: train n-gram models, decode with Token Recycling, run benches
//! and sweeps, calibrate draft trees and handle matrix files.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags or values), 1 on
//! runtime errors (missing files, dimension mismatches, ...).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use token_recycling::bench::{
    ablate_init, ablate_temperature, ablate_update_scope, ablate_update_strategy,
    node_hit_counts, run_bench, sweep_tree, warm_matrix, AblationReport, InitAblation,
    MatrixSource, Method,
};
use token_recycling::corpus::{
    cases_from_corpus, shipped_model, FRESH_TEXT, REDUNDANCY_CORPUS, REPETITIVE,
    SHIPPED_MAX_NEW_TOKENS, SHIPPED_PROMPT_LEN, WARMUP,
};
use token_recycling::model::train_ngram;
use token_recycling::{
    ar_decode, calibrate_tree, pld_decode, BenchCase, DecodeConfig, DecodeResult, InitStrategy,
    LanguageModel, NGramModel, RecycleMatrix, TokenRecycler, TreeSpec, UpdateScope,
    UpdateStrategy,
};

#[derive(Parser, Debug)]
#[command(name = "tokrec", version, about = "Token Recycling speculative decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an n-gram model on a text file.
    TrainNgram(TrainArgs),
    /// Generate a continuation of a prompt.
    Decode(DecodeArgs),
    /// Run decoders or an ablation over a corpus and write a report.
    Bench(BenchArgs),
    /// Measure MAT over a grid of tree sizes and depths.
    Sweep(SweepArgs),
    /// Derive a static draft tree from acceptance counts on a corpus.
    CalibrateTree(CalibrateArgs),
    /// Export, import or inspect adjacency-matrix files.
    Matrix {
        #[command(subcommand)]
        command: MatrixCommand,
    },
}

#[derive(Args, Debug, Clone)]
struct DecodeFlags {
    /// Candidates kept per matrix row.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Draft tree file (`index parent rank` lines). Default: the built-in 81-node tree.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Sampling temperature; 0 means greedy.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Seed for sampling, random initialization and shuffles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Matrix initialization: zero, random[:SEED] or hot:PATH.
    #[arg(long, default_value = "zero")]
    init: String,
    /// How duplicate tokens in one step update the matrix.
    #[arg(long, value_enum, default_value_t = UpdateArg::Sequential)]
    update: UpdateArg,
    /// Which draft rows are refreshed each step.
    #[arg(long, value_enum, default_value_t = ScopeArg::All)]
    update_scope: ScopeArg,
    /// Tokens to generate per prompt [default: 128; bench and sweep on the
    /// shipped corpus use 256].
    #[arg(long)]
    max_new_tokens: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UpdateArg {
    Sequential,
    First,
    Last,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    Accepted,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum MethodArg {
    Ar,
    Tr,
    Pld,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum SourceArg {
    /// Fresh matrix from --init for every case.
    #[default]
    PerCase,
    /// One matrix carried across all cases.
    Carry,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// UTF-8 training text.
    #[arg(long)]
    corpus: PathBuf,
    /// Model order (context length + 1).
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Add-alpha smoothing constant.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Maximum vocabulary size before `<unk>`.
    #[arg(long, default_value_t = 32000)]
    vocab_cap: usize,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// N-gram model file from `train-ngram`. Default: a model trained on the
    /// shipped corpus.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[command(flatten)]
    model: ModelArg,
    /// Prompt text.
    #[arg(long)]
    prompt: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Tr)]
    method: MethodArg,
    #[command(flatten)]
    flags: DecodeFlags,
    /// Write the final matrix here (Token Recycling only), for hot starts.
    #[arg(long)]
    save_matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Corpus file: blank-line separated blocks with optional `@category`
    /// headers. Default: the shipped redundancy corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Categories to bench (comma separated). Default: repetitive,fresh-text
    /// for the shipped corpus, every block otherwise.
    #[arg(long, value_delimiter = ',')]
    categories: Vec<String>,
    /// Prompt tokens taken from the start of each block.
    #[arg(long, default_value_t = SHIPPED_PROMPT_LEN)]
    prompt_len: usize,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, PartialEq)]
enum Ablation {
    /// Plain run of the selected methods.
    #[default]
    None,
    /// zero / random / fixed-hot / shuffle-hot initialization.
    Init,
    /// accepted-only vs all-draft updates.
    Scope,
    /// sequential / first / last duplicate handling.
    Strategy,
    /// MAT across --temperatures.
    Temperature,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report file. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Zero all wall-clock fields.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Methods to run (comma separated).
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Ar, MethodArg::Tr, MethodArg::Pld])]
    methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = Ablation::None)]
    ablation: Ablation,
    /// Category used to build the fixed-hot matrix in `--ablation init`.
    #[arg(long, default_value = WARMUP)]
    warmup_category: String,
    /// Temperatures for `--ablation temperature`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.3, 1.0])]
    temperatures: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SourceArg::PerCase)]
    matrix_source: SourceArg,
    #[command(flatten)]
    flags: DecodeFlags,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Node counts (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [20, 40, 60, 80])]
    nodes: Vec<usize>,
    /// Draft depths (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [5])]
    depths: Vec<usize>,
    #[command(flatten)]
    flags: DecodeFlags,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    model: ModelArg,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Branching factor of the starting complete tree.
    #[arg(long, default_value_t = 4)]
    branch: usize,
    /// Depth of the starting complete tree.
    #[arg(long, default_value_t = 5)]
    depth: usize,
    /// Node budget of the result, root included.
    #[arg(long, default_value_t = 81)]
    target_nodes: usize,
    /// Nodes kept per pruning round.
    #[arg(long, default_value_t = 40)]
    prune_step: usize,
    #[command(flatten)]
    flags: DecodeFlags,
    /// Output tree file. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum MatrixCommand {
    /// Copy a matrix file, or write it as JSON.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MatrixFormat::Binary)]
        format: MatrixFormat,
    },
    /// Build a binary matrix file from a binary or JSON export.
    Import {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the k candidates stored for one token.
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
        /// Token surface form, or a numeric id with --id.
        token: String,
        /// Treat TOKEN as a numeric id.
        #[arg(long)]
        id: bool,
        #[command(flatten)]
        model: ModelArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MatrixFormat {
    Binary,
    Json,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MatrixJson {
    vocab_size: usize,
    k: usize,
    rows: Vec<Vec<u32>>,
}

/// Errors from bad flag values; reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::TrainNgram(a) => train(a),
        Command::Decode(a) => decode(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => sweep(a),
        Command::CalibrateTree(a) => calibrate(a),
        Command::Matrix { command } => matrix(command),
    }
}

/// Validates flags into a config. Values are checked here, before any file
/// is read or written.
fn decode_config(f: &DecodeFlags, default_budget: usize) -> anyhow::Result<DecodeConfig> {
    let init = if f.init == "random" {
        InitStrategy::Random { seed: f.seed }
    } else {
        f.init.parse().map_err(|e| usage(format!("--init: {e}")))?
    };
    let tree = match &f.tree {
        Some(p) => TreeSpec::load(p).with_context(|| format!("reading tree {}", p.display()))?,
        None => TreeSpec::default_tree(),
    };
    let cfg = DecodeConfig {
        k: f.k,
        tree,
        temperature: f.temperature,
        rng_seed: f.seed,
        init,
        update_strategy: match f.update {
            UpdateArg::Sequential => UpdateStrategy::Sequential,
            UpdateArg::First => UpdateStrategy::First,
            UpdateArg::Last => UpdateStrategy::Last,
        },
        update_scope: match f.update_scope {
            ScopeArg::Accepted => UpdateScope::AcceptedOnly,
            ScopeArg::All => UpdateScope::AllDraft,
        },
        max_new_tokens: f.max_new_tokens.unwrap_or(default_budget),
        ..DecodeConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

const DEFAULT_BUDGET: usize = 128;

fn corpus_budget(c: &CorpusArgs) -> usize {
    if c.corpus.is_none() {
        SHIPPED_MAX_NEW_TOKENS
    } else {
        DEFAULT_BUDGET
    }
}

fn load_model(arg: &ModelArg) -> anyhow::Result<NGramModel> {
    match &arg.model {
        Some(p) => NGramModel::load(p).with_context(|| format!("loading model {}", p.display())),
        None => Ok(shipped_model()?),
    }
}

fn load_cases(
    args: &CorpusArgs,
    model: &NGramModel,
    max_new_tokens: usize,
) -> anyhow::Result<Vec<BenchCase>> {
    let (text, default_cats): (String, Vec<String>) = match &args.corpus {
        Some(p) => (
            fs::read_to_string(p).with_context(|| format!("reading corpus {}", p.display()))?,
            Vec::new(),
        ),
        None => (
            REDUNDANCY_CORPUS.to_string(),
            vec![REPETITIVE.to_string(), FRESH_TEXT.to_string()],
        ),
    };
    let cats = if args.categories.is_empty() {
        default_cats
    } else {
        args.categories.clone()
    };
    let cats: Vec<&str> = cats.iter().map(String::as_str).collect();
    let cases = cases_from_corpus(&text, model.vocab(), args.prompt_len, max_new_tokens, &cats)?;
    if cases.is_empty() {
        bail!("corpus has no cases in categories {cats:?}");
    }
    Ok(cases)
}

/// Reads the hot-start matrix header early so that a missing or mismatched
/// file is reported with its path.
fn check_hot(cfg: &DecodeConfig) -> anyhow::Result<()> {
    if let InitStrategy::Hot { path } = &cfg.init {
        RecycleMatrix::load(path)
            .with_context(|| format!("loading hot-start matrix {}", path.display()))?;
    }
    Ok(())
}

fn check_not_input(out: &Path, inputs: &[&Path]) -> anyhow::Result<()> {
    let same = |a: &Path, b: &Path| match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    };
    if inputs.iter().any(|i| same(out, i)) {
        return Err(usage(format!(
            "refusing to overwrite input file {}",
            out.display()
        )));
    }
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    if a.order == 0 || a.vocab_cap < 2 || !(a.alpha.is_finite() && a.alpha >= 0.0) {
        return Err(usage("--order must be >= 1, --vocab-cap >= 2 and --alpha >= 0"));
    }
    check_not_input(&a.out, &[&a.corpus])?;
    let text = fs::read_to_string(&a.corpus)
        .with_context(|| format!("reading corpus {}", a.corpus.display()))?;
    let model = train_ngram(&text, a.order, a.alpha, a.vocab_cap)?;
    model.save(&a.out)?;
    eprintln!(
        "trained order-{} model, vocabulary {} -> {}",
        a.order,
        model.vocab().size(),
        a.out.display()
    );
    Ok(())
}

fn decode(a: DecodeArgs) -> anyhow::Result<()> {
    let cfg = decode_config(&a.flags, DEFAULT_BUDGET)?;
    if a.save_matrix.is_some() && a.method != MethodArg::Tr {
        return Err(usage("--save-matrix requires --method tr"));
    }
    let model = load_model(&a.model)?;
    check_hot(&cfg)?;
    if let Some(p) = &a.save_matrix {
        let mut inputs: Vec<&Path> = a.model.model.iter().map(PathBuf::as_path).collect();
        if let InitStrategy::Hot { path } = &cfg.init {
            inputs.push(path);
        }
        check_not_input(p, &inputs)?;
    }
    let prompt = model.vocab().encode(&a.prompt);
    if prompt.is_empty() {
        return Err(usage("--prompt has no tokens"));
    }
    let (result, matrix): (DecodeResult, Option<RecycleMatrix>) = match a.method {
        MethodArg::Ar => (ar_decode(&model, &prompt, &cfg)?, None),
        MethodArg::Pld => (pld_decode(&model, &prompt, &cfg)?, None),
        MethodArg::Tr => {
            let mut s = TokenRecycler::new(model.vocab().size(), cfg.clone())?;
            let r = s.decode(&model, &prompt)?;
            (r, Some(s.into_matrix()))
        }
    };
    println!("{}", model.vocab().decode(&result.tokens));
    println!(
        "method={} tokens={} steps={} mat={:.4} wall_time_s={:.6}",
        a.method.to_possible_value().expect("no skipped variants").get_name(),
        result.tokens.len(),
        result.steps,
        result.mean_accepted(),
        result.wall_time
    );
    if let (Some(p), Some(m)) = (&a.save_matrix, matrix) {
        m.save(p)?;
    }
    Ok(())
}

fn source(s: SourceArg) -> MatrixSource {
    match s {
        SourceArg::PerCase => MatrixSource::PerCase,
        SourceArg::Carry => MatrixSource::Carry,
    }
}

fn ablation_text(mut r: AblationReport, report: &ReportArgs) -> anyhow::Result<String> {
    if report.no_timing {
        r.strip_timing();
    }
    Ok(match report.format {
        Format::Json => r.to_json()? + "\n",
        Format::Csv => r.to_csv()?,
    })
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let cfg = decode_config(&a.flags, corpus_budget(&a.corpus))?;
    if a.methods.is_empty() {
        return Err(usage("--methods must name at least one of ar, tr, pld"));
    }
    if a.temperatures.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(usage("--temperatures must be finite and >= 0"));
    }
    check_hot(&cfg)?;
    let model = load_model(&a.model)?;
    let cases = load_cases(&a.corpus, &model, cfg.max_new_tokens)?;
    let src = source(a.matrix_source);
    let text = match a.ablation {
        Ablation::None => {
            let methods: Vec<Method> = a
                .methods
                .iter()
                .map(|m| match m {
                    MethodArg::Ar => Method::Ar,
                    MethodArg::Tr => Method::Tr,
                    MethodArg::Pld => Method::Pld,
                })
                .collect();
            let mut r = run_bench(&cases, &model, &methods, &cfg, &src)?;
            if a.report.no_timing {
                r.strip_timing();
            }
            match a.report.format {
                Format::Json => r.to_json()? + "\n",
                Format::Csv => r.to_csv()?,
            }
        }
        Ablation::Init => {
            let text = match &a.corpus.corpus {
                Some(p) => fs::read_to_string(p)?,
                None => REDUNDANCY_CORPUS.to_string(),
            };
            let warmup = cases_from_corpus(
                &text,
                model.vocab(),
                a.corpus.prompt_len,
                cfg.max_new_tokens,
                &[a.warmup_category.as_str()],
            )?;
            let warm = if warmup.is_empty() {
                eprintln!("warning: no '{}' blocks; skipping fixed-hot", a.warmup_category);
                None
            } else {
                Some(warm_matrix(&model, &warmup, &cfg)?)
            };
            let mut strategies = vec![InitAblation::Zero, InitAblation::Random];
            if warm.is_some() {
                strategies.push(InitAblation::FixedHot);
            }
            strategies.push(InitAblation::ShuffleHot);
            let r = ablate_init(&model, &cases, &strategies, &cfg, warm.as_ref())?;
            ablation_text(r, &a.report)?
        }
        Ablation::Scope => ablation_text(ablate_update_scope(&model, &cases, &cfg, &src)?, &a.report)?,
        Ablation::Strategy => {
            ablation_text(ablate_update_strategy(&model, &cases, &cfg, &src)?, &a.report)?
        }
        Ablation::Temperature => ablation_text(
            ablate_temperature(&model, &cases, &a.temperatures, &cfg, &src)?,
            &a.report,
        )?,
    };
    write_output(a.report.out.as_deref(), &text)
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let cfg = decode_config(&a.flags, corpus_budget(&a.corpus))?;
    if a.nodes.is_empty() || a.depths.is_empty() {
        return Err(usage("--nodes and --depths must not be empty"));
    }
    check_hot(&cfg)?;
    let model = load_model(&a.model)?;
    let cases = load_cases(&a.corpus, &model, cfg.max_new_tokens)?;
    let mut r = sweep_tree(&model, &cases, &cfg.tree, &a.nodes, &a.depths, &cfg, &MatrixSource::PerCase)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if a.report.no_timing {
        r.strip_timing();
    }
    let text = match a.report.format {
        Format::Json => r.to_json()? + "\n",
        Format::Csv => r.to_csv()?,
    };
    write_output(a.report.out.as_deref(), &text)
}

fn calibrate(a: CalibrateArgs) -> anyhow::Result<()> {
    let cfg = decode_config(&a.flags, corpus_budget(&a.corpus))?;
    if a.branch == 0 || a.branch > cfg.k || a.prune_step == 0 || a.target_nodes == 0 {
        return Err(usage(
            "--branch must be in 1..=k; --prune-step and --target-nodes must be >= 1",
        ));
    }
    check_hot(&cfg)?;
    let model = load_model(&a.model)?;
    let cases = load_cases(&a.corpus, &model, cfg.max_new_tokens)?;
    let tree = calibrate_tree(a.branch, a.depth, a.target_nodes, a.prune_step, |t| {
        eprintln!("measuring {} nodes", t.len());
        node_hit_counts(&model, &cases, t, &cfg, &MatrixSource::PerCase)
    })?;
    let text = format!(
        "# calibrated: {} nodes, depth {}\n{}",
        tree.len(),
        tree.depth(),
        tree.to_text()
    );
    write_output(a.out.as_deref(), &text)
}

fn read_matrix_any(path: &Path) -> anyhow::Result<RecycleMatrix> {
    let bytes = fs::read(path).with_context(|| format!("reading matrix {}", path.display()))?;
    if bytes.starts_with(b"TRMX") {
        return Ok(RecycleMatrix::from_bytes(&bytes)?);
    }
    let j: MatrixJson = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is neither a TRMX file nor matrix JSON", path.display()))?;
    if j.rows.len() != j.vocab_size || j.rows.iter().any(|r| r.len() != j.k) {
        bail!("matrix JSON rows do not match vocab_size {} x k {}", j.vocab_size, j.k);
    }
    let mut bytes = Vec::with_capacity(16 + 4 * j.vocab_size * j.k);
    bytes.extend_from_slice(b"TRMX");
    for v in [1u32, j.vocab_size as u32, j.k as u32] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for t in j.rows.iter().flatten() {
        bytes.extend_from_slice(&t.to_le_bytes());
    }
    Ok(RecycleMatrix::from_bytes(&bytes)?)
}

fn matrix(cmd: MatrixCommand) -> anyhow::Result<()> {
    match cmd {
        MatrixCommand::Export { input, out, format } => {
            check_not_input(&out, &[&input])?;
            let m = RecycleMatrix::load(&input)
                .with_context(|| format!("loading matrix {}", input.display()))?;
            match format {
                MatrixFormat::Binary => m.save(&out)?,
                MatrixFormat::Json => {
                    let rows = (0..m.vocab_size() as u32)
                        .map(|t| {
                            m.lookup_row(token_recycling::TokenId(t))
                                .map(|r| r.iter().map(|c| c.0).collect())
                        })
                        .collect::<Result<Vec<Vec<u32>>, _>>()?;
                    let j = MatrixJson {
                        vocab_size: m.vocab_size(),
                        k: m.k(),
                        rows,
                    };
                    fs::write(&out, serde_json::to_string(&j)? + "\n")?;
                }
            }
            Ok(())
        }
        MatrixCommand::Import { input, out } => {
            check_not_input(&out, &[&input])?;
            read_matrix_any(&input)?.save(&out)?;
            Ok(())
        }
        MatrixCommand::Inspect {
            input,
            token,
            id,
            model,
        } => {
            let m = RecycleMatrix::load(&input)
                .with_context(|| format!("loading matrix {}", input.display()))?;
            let vocab = match &model.model {
                Some(_) => Some(load_model(&model)?.vocab().clone()),
                None => Some(shipped_model()?.vocab().clone())
                    .filter(|v| v.size() == m.vocab_size()),
            };
            let t = if id {
                token_recycling::TokenId(
                    token
                        .parse()
                        .map_err(|_| usage(format!("--id given but {token:?} is not a number")))?,
                )
            } else {
                match &vocab {
                    Some(v) => v.token_of(&token),
                    None => bail!("no vocabulary for surface forms; pass --model or --id"),
                }
            };
            let row = m.lookup_row(t)?;
            let show = |t: token_recycling::TokenId| match &vocab {
                Some(v) => format!("{} ({})", t.0, v.surface(t)),
                None => t.0.to_string(),
            };
            println!("row {}:", show(t));
            for (rank, c) in row.iter().enumerate() {
                println!("  {rank}: {}", show(*c));
            }
            Ok(())
        }
    }
}
