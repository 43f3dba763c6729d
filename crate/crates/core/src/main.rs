//! `rssmert` command-line tool.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 bad configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rssmert::config::{self, InitWeights, RunConfig};
use rssmert::corpus::{self, write_nbest, TuningCorpus};
use rssmert::metrics::{aggregate, corpus_bleu, sentence_bleu_stats};
use rssmert::report;
use rssmert::rss::{Rotation, RotationPlan};
use rssmert::synth::{self, SynthSpec};
use rssmert::{kcd_optimize, rss_optimize, CoordinateSystem, Error, ScoredCorpus};

#[derive(Parser)]
#[command(name = "rssmert", version, about = "MERT over N-best lists with rotated coordinate systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus BLEU of a plain-text hypothesis file.
    Score {
        hyp: PathBuf,
        #[arg(required = true)]
        refs: Vec<PathBuf>,
    },
    /// Coordinate descent from one starting point.
    Mert(RunArgs),
    /// Coordinate descent once per rotation angle, selected by tuning-set BLEU.
    Rss(RunArgs),
    /// Write a seeded synthetic closed/open corpus pair.
    Synth(SynthArgs),
}

/// Every flag overrides the matching `key = value` setting of `--config`.
#[derive(Args)]
struct RunArgs {
    /// Settings file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nbest: Option<String>,
    /// Reference files; repeat or comma-separate.
    #[arg(long)]
    refs: Vec<String>,
    #[arg(long)]
    open_nbest: Option<String>,
    #[arg(long)]
    open_refs: Vec<String>,
    /// Inline starting weights, e.g. `-0.5,1`.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long)]
    init_file: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    max_iter: Option<String>,
    /// `sequential` or `best-direction`.
    #[arg(long)]
    sweep_mode: Option<String>,
    /// `true` or `false`.
    #[arg(long)]
    parallel: Option<String>,
    /// `from:to` (gridded) or `from:to=alpha` (fixed), by feature name or index.
    #[arg(long)]
    rotate: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_step: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Result<BTreeMap<String, String>, Failure> {
        let mut kv = match &self.config {
            Some(p) => config::parse_key_values(&read(p)?).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?,
            None => BTreeMap::new(),
        };
        let single = [
            ("nbest", &self.nbest),
            ("open_nbest", &self.open_nbest),
            ("init", &self.init),
            ("init_file", &self.init_file),
            ("epsilon", &self.epsilon),
            ("max_iter", &self.max_iter),
            ("sweep_mode", &self.sweep_mode),
            ("parallel", &self.parallel),
            ("grid_start", &self.grid_start),
            ("grid_end", &self.grid_end),
            ("grid_step", &self.grid_step),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in single {
            if let Some(v) = value {
                kv.insert(key.to_owned(), v.clone());
            }
        }
        for (key, values) in [("refs", &self.refs), ("open_refs", &self.open_refs), ("rotate", &self.rotate)] {
            if !values.is_empty() {
                kv.insert(key.to_owned(), values.join(","));
            }
        }
        // an inline init on the command line replaces an init_file from the config, and vice versa
        if self.init.is_some() {
            kv.remove("init_file");
        } else if self.init_file.is_some() {
            kv.remove("init");
        }
        Ok(kv)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Spec file in the format of a written `synth.cfg`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sentences: Option<String>,
    #[arg(long)]
    hyps_per_sentence: Option<String>,
    #[arg(long)]
    features: Option<String>,
    /// `i:j:rho` items, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    correlated_pairs: Option<String>,
    #[arg(long)]
    vocab_size: Option<String>,
    #[arg(long)]
    ref_count: Option<String>,
    #[arg(long)]
    min_len: Option<String>,
    #[arg(long)]
    max_len: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

enum Failure {
    Input(String),
    Config(String),
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Config(m) => m,
        }
    }
}

/// Routes a library error to the input or configuration exit code.
fn classify(context: &str, e: Error) -> Failure {
    let msg = if context.is_empty() { e.to_string() } else { format!("{context}: {e}") };
    match e {
        Error::MalformedLine { .. }
        | Error::InconsistentFeatureCount { .. }
        | Error::NonNumericFeature { .. }
        | Error::LengthMismatch { .. }
        | Error::NoReferences { .. }
        | Error::IdMismatch(_)
        | Error::EmptyCorpus => Failure::Input(msg),
        Error::DimensionMismatch { .. }
        | Error::InvalidRotation(_)
        | Error::GridEmpty(_)
        | Error::InvalidConfig(_)
        | Error::SpecInvalid(_) => Failure::Config(msg),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_references(paths: &[PathBuf]) -> Result<BTreeMap<usize, Vec<corpus::Tokens>>, Failure> {
    let texts = paths.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
    corpus::parse_references(&texts).map_err(|e| {
        let ctx = match &e {
            Error::LengthMismatch { stream, .. } => paths[*stream].display().to_string(),
            _ => paths[0].display().to_string(),
        };
        classify(&ctx, e)
    })
}

fn load_corpus(nbest: &Path, refs: &[PathBuf]) -> Result<TuningCorpus, Failure> {
    let list = corpus::parse_nbest(&read(nbest)?).map_err(|e| classify(&nbest.display().to_string(), e))?;
    let references = load_references(refs)?;
    corpus::build_corpus(list, references).map_err(|e| classify(&nbest.display().to_string(), e))
}

fn init_weights(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>, Failure> {
    let w = match &cfg.init {
        InitWeights::Uniform => return Ok(rssmert::kcd::uniform_weights(dim)),
        InitWeights::Inline(w) => w.clone(),
        InitWeights::File(p) => config::parse_weights(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
    };
    if w.len() != dim {
        return Err(Failure::config(format!(
            "starting weights have {} values but the N-best list has {dim} features",
            w.len()
        )));
    }
    Ok(w)
}

struct Loaded {
    cfg: RunConfig,
    closed: ScoredCorpus,
    open: Option<ScoredCorpus>,
    init: Vec<f64>,
}

fn load_run(args: &RunArgs) -> Result<Loaded, Failure> {
    let cfg = RunConfig::from_map(&args.settings()?).map_err(|e| classify("", e))?;
    let closed = load_corpus(&cfg.nbest, &cfg.refs)?;
    let open = match &cfg.open_nbest {
        Some(p) => {
            let open = load_corpus(p, &cfg.open_refs)?;
            corpus::check_same_dim(&closed, &open).map_err(|e| classify(&p.display().to_string(), e))?;
            Some(ScoredCorpus::new(open))
        }
        None => None,
    };
    let init = init_weights(&cfg, closed.dim())?;
    create_dir(&cfg.out_dir)?;
    Ok(Loaded {
        cfg,
        closed: ScoredCorpus::new(closed),
        open,
        init,
    })
}

fn cmd_score(hyp: &Path, refs: &[PathBuf]) -> Result<(), Failure> {
    let text = read(hyp)?;
    let references = load_references(refs)?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != references.len() {
        return Err(Failure::Input(format!(
            "{}: {} lines, but the references have {}",
            hyp.display(),
            lines.len(),
            references.len()
        )));
    }
    let stats: Vec<_> = lines
        .iter()
        .zip(references.values())
        .map(|(l, r)| {
            let tokens: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
            sentence_bleu_stats(&tokens, r)
        })
        .collect();
    println!("{}", report::bleu100(&corpus_bleu(&aggregate(&stats))));
    Ok(())
}

fn cmd_mert(args: &RunArgs) -> Result<(), Failure> {
    let run = load_run(args)?;
    if !run.cfg.rotations.is_empty() {
        return Err(Failure::config("mert takes no rotations; use the rss subcommand"));
    }
    let names = run.closed.corpus.feature_names().to_vec();
    let system = CoordinateSystem::identity(names.len());
    let result = kcd_optimize(&run.closed.corpus, &run.closed.stats, &run.init, &system, &run.cfg.kcd)
        .map_err(|e| classify("", e))?;
    write(&run.cfg.out_dir.join("weights.txt"), &config::format_weights(&result.weights))?;
    write(&run.cfg.out_dir.join("trace.tsv"), &report::trace_tsv(&result.trace, &names))?;
    println!("closed test\t{}", report::bleu100(&result.error));
    if let Some(open) = &run.open {
        let e = open.evaluate(&result.weights).map_err(|e| classify("", e))?;
        println!("open test\t{}", report::bleu100(&e));
    }
    Ok(())
}

fn feature(corpus: &TuningCorpus, name: &str) -> Result<usize, Failure> {
    corpus
        .feature_index(name)
        .ok_or_else(|| Failure::config(format!("rotation names unknown feature {name:?}")))
}

fn cmd_rss(args: &RunArgs) -> Result<(), Failure> {
    let run = load_run(args)?;
    let c = &run.closed.corpus;
    let names = c.feature_names().to_vec();

    let mut gridded = None;
    let mut fixed = Vec::new();
    for r in &run.cfg.rotations {
        let (from, to) = (feature(c, &r.from)?, feature(c, &r.to)?);
        match (r.alpha, gridded) {
            (None, None) => gridded = Some((from, to)),
            (Some(alpha), _) => fixed.push(Rotation { from_dim: from, to_dim: to, alpha }),
            (None, Some(_)) => {
                return Err(Failure::config("only one rotation can be gridded; give the others a fixed alpha"));
            }
        }
    }
    let (from_dim, to_dim) = gridded.ok_or_else(|| Failure::config("rss needs one rotation `from:to` without a fixed alpha"))?;
    let plan = RotationPlan { from_dim, to_dim, fixed };

    // without a test set the tuning set stands in for it
    let open = run.open.as_ref().unwrap_or(&run.closed);
    let result = rss_optimize(&run.closed, open, &run.init, &plan, &run.cfg.grid, &run.cfg.kcd).map_err(|e| classify("", e))?;

    let out = &run.cfg.out_dir;
    let movement = format!("{} to {}", names[from_dim], names[to_dim]);
    let summary = report::rss_summary(&result, &movement);
    write(&out.join("rss_report.tsv"), &report::rss_report_tsv(&result, &names))?;
    write(&out.join("rss_summary.tsv"), &summary)?;
    write(&out.join("weights.txt"), &config::format_weights(&result.selected().weights))?;
    let traces = out.join("traces");
    create_dir(&traces)?;
    for r in &result.records {
        let file = traces.join(format!("alpha_{}.tsv", report::signed_alpha(r.alpha)));
        write(&file, &report::trace_tsv(&r.run.trace, &names))?;
    }
    println!("selected alpha\t{}", report::signed_alpha(result.selected_alpha()));
    print!("{summary}");
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let mut kv = match &args.config {
        Some(p) => config::parse_key_values(&read(p)?).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    for (key, value) in [
        ("sentences", &args.sentences),
        ("hyps_per_sentence", &args.hyps_per_sentence),
        ("features", &args.features),
        ("correlated_pairs", &args.correlated_pairs),
        ("vocab_size", &args.vocab_size),
        ("ref_count", &args.ref_count),
        ("min_len", &args.min_len),
        ("max_len", &args.max_len),
        ("seed", &args.seed),
    ] {
        if let Some(v) = value {
            kv.insert(key.to_owned(), v.clone());
        }
    }
    let spec = SynthSpec::from_key_values(&kv).map_err(|e| classify("", e))?;
    let corpora = synth::generate(&spec).map_err(|e| classify("", e))?;

    create_dir(&args.out_dir)?;
    write(&args.out_dir.join("synth.cfg"), &spec.header())?;
    for (split, c) in [("closed", &corpora.closed), ("open", &corpora.open)] {
        let (list, _) = c.to_parts();
        write(&args.out_dir.join(format!("{split}.nbest")), &write_nbest(&list, true, None))?;
        for (j, text) in synth::reference_files(c).iter().enumerate() {
            write(&args.out_dir.join(format!("{split}.ref{j}")), text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Score { hyp, refs } => cmd_score(hyp, refs),
        Command::Mert(args) => cmd_mert(args),
        Command::Rss(args) => cmd_rss(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rssmert: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
