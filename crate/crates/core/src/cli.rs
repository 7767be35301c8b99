//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Every output file
//! except `tag` output starts with a `{"config": ...}` line holding the
//! resolved [`RunConfig`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::benchmark::{compare_stores, evaluate, noun_replacement_ablation, open_candidate_sets, EvalResult};
use crate::curation::{filter_bottom, overlap, rank_difference_records, FilterManifest, FilterMetric};
use crate::metric::{
    f_clip_penalty_records, read_score_records, MetricConfig, PenaltyConfig, ScoreKind, ScoreRecord, Scorer,
};
use crate::provider::{HttpEmbedder, ProviderConfig, ENDPOINT_ENV};
use crate::store::{open_store, EmbeddingStore, PairManifest};
use crate::tagger::{read_tagged_corpus, tag, tokenize, train_tagger, TaggerModel, TrainConfig, UnitKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Fully resolved configuration of one run, echoed into output headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub tool_version: String,
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub metric: Option<MetricConfig>,
    pub score_metric: Option<String>,
    pub rate: Option<f64>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub output: Option<String>,
    pub jobs: Option<usize>,
    pub options: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: RunConfig,
}

/// Parses the `{"config": ...}` header line of an output file.
pub fn parse_header(line: &str) -> Result<RunConfig, serde_json::Error> {
    serde_json::from_str::<Header>(line).map(|h| h.config)
}

#[derive(Debug, Parser)]
#[command(name = "fgrain", version, about = "Noun-level image-text alignment scoring, benchmarks and data filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tag text and print one `surface<TAB>TAG` line per token
    Tag(TagArgs),
    /// Train a tagger model from a tagged corpus
    TrainTagger(TrainArgs),
    /// Score image-caption pairs with CLIPScore and F-CLIPScore
    Score(ScoreArgs),
    /// Caption-selection accuracy over candidate sets
    Eval(EvalArgs),
    /// Caption-selection accuracy with random noun-embedding replacement
    Ablate(AblateArgs),
    /// Batch penalty term over F-CLIPScores
    Penalty(PenaltyArgs),
    /// Remove the bottom x% of scored pairs
    Filter(FilterArgs),
    /// Overlap between the removed sets of two filter manifests
    Overlap(OverlapArgs),
    /// F-CLIPScore rank minus CLIPScore rank per pair
    Rankdiff(RankdiffArgs),
    /// Cosine drift between two stores for two id groups, with Welch's t-test
    CompareStores(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Noun,
    NounPhrase,
    Verb,
}

impl From<VariantArg> for UnitKind {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Noun => UnitKind::Noun,
            VariantArg::NounPhrase => UnitKind::NounPhrase,
            VariantArg::Verb => UnitKind::Verb,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Clip,
    Fclip,
}

impl From<MetricArg> for ScoreKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Clip => ScoreKind::Clip,
            MetricArg::Fclip => ScoreKind::Fclip,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterMetricArg {
    Clip,
    Fclip,
    Random,
}

impl From<FilterMetricArg> for FilterMetric {
    fn from(m: FilterMetricArg) -> Self {
        match m {
            FilterMetricArg::Clip => FilterMetric::Clip,
            FilterMetricArg::Fclip => FilterMetric::Fclip,
            FilterMetricArg::Random => FilterMetric::Random,
        }
    }
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Units averaged with the sentence score
    #[arg(long, value_enum, default_value = "noun")]
    variant: VariantArg,
    /// CLIPScore scale factor
    #[arg(long, default_value_t = 2.5)]
    w: f64,
    /// Keep negative cosines instead of clamping them at zero
    #[arg(long)]
    no_clamp: bool,
}

impl MetricArgs {
    fn config(&self) -> MetricConfig {
        MetricConfig {
            w: self.w,
            clamp_negative: !self.no_clamp,
            variant: self.variant.into(),
        }
    }
}

#[derive(Debug, Args)]
struct StoreArgs {
    /// Image embedding store
    #[arg(long)]
    img: PathBuf,
    /// Caption embedding store (also holds unit embeddings unless --units is given)
    #[arg(long)]
    txt: PathBuf,
    /// Store of unit embeddings keyed by lowercased surface
    #[arg(long)]
    units: Option<PathBuf>,
    /// Tagger model file (defaults to the built-in model)
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// Embedding service base URL for units missing from the stores
    #[arg(long)]
    embed_url: Option<String>,
    /// Cache file for fetched embeddings
    #[arg(long)]
    embed_cache: Option<PathBuf>,
    #[arg(long, default_value_t = 30_000)]
    embed_timeout_ms: u64,
    #[arg(long, default_value_t = 2)]
    embed_retries: u32,
    #[arg(long, default_value_t = 64)]
    embed_max_batch: usize,
    #[arg(long, default_value = "default")]
    embed_model_tag: String,
    /// Bearer token sent to the embedding service
    #[arg(long)]
    embed_token: Option<String>,
}

impl ProviderArgs {
    fn config(&self) -> Option<ProviderConfig> {
        let env_url = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.trim().is_empty());
        let url = env_url.or_else(|| self.embed_url.clone())?;
        Some(ProviderConfig {
            endpoint_url: url,
            timeout_ms: self.embed_timeout_ms,
            max_batch: self.embed_max_batch,
            cache_path: self.embed_cache.clone(),
            retries: self.embed_retries,
            model_tag: self.embed_model_tag.clone(),
            bearer_token: self.embed_token.clone(),
            ..ProviderConfig::default()
        })
    }

    fn echo(&self, cfg: &mut RunConfig) {
        if let Some(p) = self.config() {
            cfg.options.insert(
                "provider".into(),
                json!({
                    "endpointUrl": p.endpoint_url,
                    "timeoutMs": p.timeout_ms,
                    "maxBatch": p.max_batch,
                    "cachePath": p.cache_path,
                    "retries": p.retries,
                    "modelTag": p.model_tag,
                }),
            );
        }
    }
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file (defaults to standard output)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct TagArgs {
    /// Text to tag
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    text: Option<String>,
    /// File with one sentence per line
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Tagged corpus: `surface<TAB>TAG` lines, blank line between sentences
    #[arg(long)]
    corpus: PathBuf,
    /// Where to write the model
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long)]
    seed: u64,
    /// Fraction of sentences held out for the accuracy report
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Pair manifest (JSON lines)
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    stores: StoreArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Candidate sets (JSON lines)
    #[arg(long)]
    sets: PathBuf,
    #[command(flatten)]
    stores: StoreArgs,
    #[arg(long = "metric", value_enum, default_value = "fclip")]
    score_metric: MetricArg,
    /// Dataset name for the report (defaults to the sets file stem)
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    sets: PathBuf,
    #[command(flatten)]
    stores: StoreArgs,
    /// Store of replacement noun embeddings
    #[arg(long)]
    pool: PathBuf,
    /// Replacement probability in [0, 1]
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct PenaltyArgs {
    /// Score records produced by `score`
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Batch size; defaults to the number of records
    #[arg(long)]
    batch_size: Option<usize>,
    /// Scale the records were scored with
    #[arg(long, default_value_t = 2.5)]
    w: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Percentage of pairs to remove, in (0, 100)
    #[arg(long)]
    rate: f64,
    #[arg(long = "metric", value_enum)]
    score_metric: FilterMetricArg,
    /// Required with --metric random
    #[arg(long)]
    seed: Option<u64>,
    /// Retained pair ids, one per line (defaults to `<out>.retained-ids` when --out is set)
    #[arg(long)]
    retained_ids: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct RankdiffArgs {
    /// Records whose fScore is ranked
    #[arg(long)]
    f_scores: PathBuf,
    /// Records whose sentenceScore is ranked (defaults to --f-scores)
    #[arg(long)]
    c_scores: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Ids of group A, one per line
    #[arg(long)]
    ids_a: PathBuf,
    /// Ids of group B, one per line
    #[arg(long)]
    ids_b: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Also write the histogram as a tab-separated table
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

fn data<E: Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn base_config(subcommand: &str, out: Option<&OutArgs>) -> RunConfig {
    RunConfig {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        output: out.and_then(|o| o.out.as_deref()).map(path_str),
        jobs: out.and_then(|o| o.jobs),
        ..RunConfig::default()
    }
}

fn add_inputs(cfg: &mut RunConfig, inputs: &[(&str, Option<&Path>)]) {
    for (k, p) in inputs {
        if let Some(p) = p {
            cfg.inputs.insert(k.to_string(), path_str(p));
        }
    }
}

fn store_inputs(cfg: &mut RunConfig, s: &StoreArgs) {
    add_inputs(
        cfg,
        &[
            ("img", Some(&s.img)),
            ("txt", Some(&s.txt)),
            ("units", s.units.as_deref()),
            ("model", s.model.as_deref()),
        ],
    );
}

/// Parses `argv` (program name first) into the resolved configuration
/// without running anything.
pub fn resolve_config<I, T>(argv: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    Ok(config_for(&cli.command))
}

fn config_for(cmd: &Command) -> RunConfig {
    match cmd {
        Command::Tag(a) => {
            let mut c = base_config("tag", None);
            add_inputs(&mut c, &[("input", a.input.as_deref()), ("model", a.model.as_deref())]);
            if let Some(t) = &a.text {
                c.options.insert("text".into(), json!(t));
            }
            c
        }
        Command::TrainTagger(a) => {
            let mut c = base_config("train-tagger", None);
            add_inputs(&mut c, &[("corpus", Some(&a.corpus))]);
            c.output = Some(path_str(&a.out));
            c.seed = Some(a.seed);
            c.options.insert("epochs".into(), json!(a.epochs));
            c.options.insert("holdout".into(), json!(a.holdout));
            c
        }
        Command::Score(a) => {
            let mut c = base_config("score", Some(&a.out));
            add_inputs(&mut c, &[("manifest", Some(&a.manifest))]);
            store_inputs(&mut c, &a.stores);
            c.metric = Some(a.metric.config());
            a.provider.echo(&mut c);
            c
        }
        Command::Eval(a) => {
            let mut c = base_config("eval", Some(&a.out));
            add_inputs(&mut c, &[("sets", Some(&a.sets))]);
            store_inputs(&mut c, &a.stores);
            c.metric = Some(a.metric.config());
            c.score_metric = Some(score_kind_name(a.score_metric.into()).into());
            c.options.insert("datasetName".into(), json!(dataset_name(&a.name, &a.sets)));
            a.provider.echo(&mut c);
            c
        }
        Command::Ablate(a) => {
            let mut c = base_config("ablate", Some(&a.out));
            add_inputs(&mut c, &[("sets", Some(&a.sets)), ("pool", Some(&a.pool))]);
            store_inputs(&mut c, &a.stores);
            c.metric = Some(a.metric.config());
            c.score_metric = Some("fclip".into());
            c.rate = Some(a.rate);
            c.seed = Some(a.seed);
            c.options.insert("datasetName".into(), json!(dataset_name(&a.name, &a.sets)));
            a.provider.echo(&mut c);
            c
        }
        Command::Penalty(a) => {
            let mut c = base_config("penalty", Some(&a.out));
            add_inputs(&mut c, &[("scores", Some(&a.scores))]);
            c.alpha = Some(a.alpha);
            c.options.insert("batchSize".into(), json!(a.batch_size));
            c.options.insert("w".into(), json!(a.w));
            c
        }
        Command::Filter(a) => {
            let mut c = base_config("filter", Some(&a.out));
            add_inputs(&mut c, &[("scores", Some(&a.scores))]);
            c.rate = Some(a.rate);
            c.seed = a.seed;
            c.score_metric = Some(filter_metric_name(a.score_metric.into()).into());
            if let Some(p) = retained_ids_path(a) {
                c.options.insert("retainedIds".into(), json!(path_str(&p)));
            }
            c
        }
        Command::Overlap(a) => {
            let mut c = base_config("overlap", Some(&a.out));
            add_inputs(&mut c, &[("a", Some(&a.a)), ("b", Some(&a.b))]);
            c
        }
        Command::Rankdiff(a) => {
            let mut c = base_config("rankdiff", Some(&a.out));
            add_inputs(&mut c, &[("fScores", Some(&a.f_scores)), ("cScores", Some(c_scores_path(a)))]);
            c.options.insert("k".into(), json!(a.k));
            c
        }
        Command::CompareStores(a) => {
            let mut c = base_config("compare-stores", Some(&a.out));
            add_inputs(
                &mut c,
                &[
                    ("a", Some(&a.a)),
                    ("b", Some(&a.b)),
                    ("idsA", Some(&a.ids_a)),
                    ("idsB", Some(&a.ids_b)),
                ],
            );
            c.options.insert("bins".into(), json!(a.bins));
            if let Some(h) = &a.histogram {
                c.options.insert("histogram".into(), json!(path_str(h)));
            }
            c
        }
    }
}

fn score_kind_name(k: ScoreKind) -> &'static str {
    match k {
        ScoreKind::Clip => "clip",
        ScoreKind::Fclip => "fclip",
    }
}

fn filter_metric_name(m: FilterMetric) -> &'static str {
    match m {
        FilterMetric::Clip => "clip",
        FilterMetric::Fclip => "fclip",
        FilterMetric::Random => "random",
    }
}

fn dataset_name(name: &Option<String>, sets: &Path) -> String {
    name.clone().unwrap_or_else(|| {
        sets.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    })
}

fn retained_ids_path(a: &FilterArgs) -> Option<PathBuf> {
    a.retained_ids.clone().or_else(|| {
        a.out.out.as_ref().map(|o| {
            let mut s = o.as_os_str().to_os_string();
            s.push(".retained-ids");
            PathBuf::from(s)
        })
    })
}

fn c_scores_path(a: &RankdiffArgs) -> &Path {
    a.c_scores.as_deref().unwrap_or(&a.f_scores)
}

/// Runs the CLI with process streams and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let cfg = config_for(&cli.command);
    let jobs = match &cli.command {
        Command::Score(a) => a.out.jobs,
        Command::Eval(a) => a.out.jobs,
        Command::Ablate(a) => a.out.jobs,
        _ => None,
    };
    let result = match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(data)
            .and_then(|pool| {
                let mut buf = Vec::new();
                let r = pool.install(|| dispatch(&cli.command, cfg, &mut buf));
                out.write_all(&buf).map_err(data)?;
                r
            }),
        None => dispatch(&cli.command, cfg, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

/// Output sink: the `--out` file when given, else the caller's stdout.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(data)
        }
        None => f(stdout).map_err(data),
    }
}

fn write_json_line<T: Serialize>(w: &mut dyn Write, v: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    w.write_all(b"\n")
}

fn write_header(w: &mut dyn Write, cfg: &RunConfig) -> io::Result<()> {
    write_json_line(w, &json!({ "config": cfg }))
}

fn load_model(path: Option<&Path>) -> Result<TaggerModel, CliError> {
    match path {
        Some(p) => TaggerModel::load(p).map_err(data),
        None => Ok(TaggerModel::builtin().clone()),
    }
}

fn open(path: &Path) -> Result<EmbeddingStore, CliError> {
    open_store(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>, CliError> {
    let f = fs::File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    read_score_records(BufReader::new(f)).map_err(|e| data(format!("{}: {e}", path.display())))
}

struct Loaded {
    images: EmbeddingStore,
    captions: EmbeddingStore,
    units: Option<EmbeddingStore>,
    model: TaggerModel,
}

impl Loaded {
    fn new(s: &StoreArgs) -> Result<Self, CliError> {
        Ok(Loaded {
            images: open(&s.img)?,
            captions: open(&s.txt)?,
            units: s.units.as_deref().map(open).transpose()?,
            model: load_model(s.model.as_deref())?,
        })
    }

    fn scorer<'a, 't>(
        &'a self,
        cfg: MetricConfig,
        provider: &ProviderArgs,
        texts: impl Iterator<Item = &'t str>,
    ) -> Result<Scorer<'a>, CliError> {
        let mut scorer = Scorer::new(&self.images, &self.captions, &self.model, cfg).map_err(data)?;
        if let Some(u) = &self.units {
            scorer = scorer.with_unit_store(u);
        }
        if let Some(pcfg) = provider.config() {
            let embedder = HttpEmbedder::new(pcfg).map_err(data)?;
            scorer.fetch_missing_units(texts, &embedder).map_err(data)?;
        }
        Ok(scorer)
    }
}

fn dispatch(cmd: &Command, cfg: RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Tag(a) => cmd_tag(a, stdout),
        Command::TrainTagger(a) => cmd_train(a, stdout),
        Command::Score(a) => cmd_score(a, &cfg, stdout),
        Command::Eval(a) => cmd_eval(a, &cfg, stdout),
        Command::Ablate(a) => cmd_ablate(a, &cfg, stdout),
        Command::Penalty(a) => cmd_penalty(a, &cfg, stdout),
        Command::Filter(a) => cmd_filter(a, cfg, stdout),
        Command::Overlap(a) => cmd_overlap(a, &cfg, stdout),
        Command::Rankdiff(a) => cmd_rankdiff(a, &cfg, stdout),
        Command::CompareStores(a) => cmd_compare(a, &cfg, stdout),
    }
}

fn cmd_tag(a: &TagArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(a.model.as_deref())?;
    let lines: Vec<String> = match (&a.text, &a.input) {
        (Some(t), _) => vec![t.clone()],
        (None, Some(p)) => {
            let f = fs::File::open(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
            BufReader::new(f).lines().collect::<io::Result<_>>().map_err(data)?
        }
        (None, None) => return Err(CliError::Usage("one of --text or --input is required".into())),
    };
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            writeln!(stdout).map_err(data)?;
        }
        for t in tag(&model, tokenize(line)).map_err(data)? {
            let tag = t.tag.map(|t| t.as_str()).unwrap_or("X");
            writeln!(stdout, "{}\t{}", t.surface, tag).map_err(data)?;
        }
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if a.epochs == 0 {
        return Err(CliError::Usage("--epochs must be positive".into()));
    }
    let f = fs::File::open(&a.corpus).map_err(|e| data(format!("{}: {e}", a.corpus.display())))?;
    let corpus = read_tagged_corpus(BufReader::new(f)).map_err(data)?;
    let tc = TrainConfig {
        epochs: a.epochs,
        seed: a.seed,
        holdout_fraction: a.holdout,
    };
    let (model, report) = train_tagger(&corpus, &tc).map_err(data)?;
    model.save(&a.out).map_err(data)?;
    let heldout = report
        .heldout_accuracy
        .map_or("n/a".to_string(), |x| format!("{:.4}", x));
    writeln!(
        stdout,
        "trained on {} sentences ({} held out): train accuracy {:.4}, held-out accuracy {}",
        report.train_sentences, report.heldout_sentences, report.train_accuracy, heldout
    )
    .map_err(data)
}

fn cmd_score(a: &ScoreArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let manifest = PairManifest::open(&a.manifest).map_err(data)?;
    let loaded = Loaded::new(&a.stores)?;
    let texts = manifest.records.iter().map(|r| r.caption_text.as_str());
    let scorer = loaded.scorer(a.metric.config(), &a.provider, texts)?;
    let records = scorer.score_pairs(&manifest).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_header(w, cfg)?;
        records.iter().try_for_each(|r| write_json_line(w, r))
    })
}

fn write_eval(w: &mut dyn Write, cfg: &RunConfig, metric: &str, rate: Option<f64>, r: &EvalResult) -> io::Result<()> {
    write_header(w, cfg)?;
    write_json_line(
        w,
        &json!({
            "datasetName": r.dataset_name,
            "metric": metric,
            "rate": rate,
            "seed": r.seed,
            "accuracyPct": r.accuracy_pct,
            "correct": r.correct(),
            "items": r.per_item_choices.len(),
        }),
    )?;
    r.per_item_choices.iter().try_for_each(|c| write_json_line(w, c))
}

fn summary_line(stdout: &mut dyn Write, out: &OutArgs, r: &EvalResult) -> Result<(), CliError> {
    if out.out.is_some() {
        writeln!(
            stdout,
            "{}: accuracy {:.2}% ({}/{})",
            r.dataset_name,
            r.accuracy_pct,
            r.correct(),
            r.per_item_choices.len()
        )
        .map_err(data)?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let sets = open_candidate_sets(&a.sets).map_err(data)?;
    let loaded = Loaded::new(&a.stores)?;
    let metric: ScoreKind = a.score_metric.into();
    let texts = sets.iter().flat_map(|s| s.candidates.iter().map(|c| c.text.as_str()));
    let scorer = if metric == ScoreKind::Fclip {
        loaded.scorer(a.metric.config(), &a.provider, texts)?
    } else {
        loaded.scorer(a.metric.config(), &ProviderArgs::disabled(), std::iter::empty())?
    };
    let result = evaluate(&scorer, &sets, metric, &dataset_name(&a.name, &a.sets)).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_eval(w, cfg, score_kind_name(metric), None, &result)
    })?;
    summary_line(stdout, &a.out, &result)
}

impl ProviderArgs {
    fn disabled() -> Self {
        ProviderArgs {
            embed_url: None,
            embed_cache: None,
            embed_timeout_ms: 0,
            embed_retries: 0,
            embed_max_batch: 0,
            embed_model_tag: String::new(),
            embed_token: None,
        }
    }
}

fn cmd_ablate(a: &AblateArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.rate) {
        return Err(CliError::Usage(format!("--rate must be in [0, 1], got {}", a.rate)));
    }
    let sets = open_candidate_sets(&a.sets).map_err(data)?;
    let loaded = Loaded::new(&a.stores)?;
    let pool = open(&a.pool)?;
    let texts = sets.iter().flat_map(|s| s.candidates.iter().map(|c| c.text.as_str()));
    let scorer = loaded.scorer(a.metric.config(), &a.provider, texts)?;
    let name = dataset_name(&a.name, &a.sets);
    let result = noun_replacement_ablation(&scorer, &sets, &pool, a.rate, a.seed, &name).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_eval(w, cfg, "fclip", Some(a.rate), &result)
    })?;
    summary_line(stdout, &a.out, &result)
}

fn cmd_penalty(a: &PenaltyArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let records = read_scores(&a.scores)?;
    let pc = PenaltyConfig {
        alpha: a.alpha,
        batch_size: a.batch_size.unwrap_or(records.len()),
    };
    let p = f_clip_penalty_records(&records, a.w, &pc).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_header(w, cfg)?;
        write_json_line(w, &json!({"penalty": p, "alpha": pc.alpha, "batchSize": pc.batch_size}))
    })
}

fn cmd_filter(a: &FilterArgs, cfg: RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let metric: FilterMetric = a.score_metric.into();
    if metric == FilterMetric::Random && a.seed.is_none() {
        return Err(CliError::Usage("--metric random requires --seed".into()));
    }
    if !(a.rate > 0.0 && a.rate < 100.0) {
        return Err(CliError::Usage(format!("--rate must be in (0, 100), got {}", a.rate)));
    }
    let records = read_scores(&a.scores)?;
    let mut manifest = filter_bottom(&records, metric, a.rate, a.seed).map_err(data)?;
    manifest.config = Some(serde_json::to_value(&cfg).map_err(data)?);
    with_output(a.out.out.as_deref(), stdout, |w| manifest.write_to(w))?;
    if let Some(p) = retained_ids_path(a) {
        let f = fs::File::create(&p).map_err(|e| data(format!("{}: {e}", p.display())))?;
        let mut w = BufWriter::new(f);
        manifest
            .write_retained_ids(&mut w)
            .and_then(|_| w.flush())
            .map_err(data)?;
    }
    Ok(())
}

fn cmd_overlap(a: &OverlapArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let ma = FilterManifest::open(&a.a).map_err(data)?;
    let mb = FilterManifest::open(&a.b).map_err(data)?;
    let v = overlap(&ma, &mb).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_header(w, cfg)?;
        write_json_line(
            w,
            &json!({
                "overlap": v,
                "ratePct": ma.rate_pct,
                "removed": ma.removed.len(),
                "total": ma.total,
                "metricA": filter_metric_name(ma.metric),
                "metricB": filter_metric_name(mb.metric),
            }),
        )
    })
}

fn cmd_rankdiff(a: &RankdiffArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if a.k == 0 {
        return Err(CliError::Usage("--k must be positive".into()));
    }
    let f = read_scores(&a.f_scores)?;
    let c = read_scores(c_scores_path(a))?;
    let report = rank_difference_records(&f, &c, a.k).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_header(w, cfg)?;
        write_json_line(w, &json!({"topK": report.top_k, "bottomK": report.bottom_k}))?;
        report.entries.iter().try_for_each(|e| write_json_line(w, e))
    })
}

fn read_ids(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn cmd_compare(a: &CompareArgs, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let sa = open(&a.a)?;
    let sb = open(&a.b)?;
    let report = compare_stores(&sa, &sb, &read_ids(&a.ids_a)?, &read_ids(&a.ids_b)?, a.bins).map_err(data)?;
    with_output(a.out.out.as_deref(), stdout, |w| {
        write_header(w, cfg)?;
        write_json_line(
            w,
            &json!({
                "groupA": report.group_a,
                "groupB": report.group_b,
                "welchT": report.welch_t,
                "df": report.df,
                "pValue": report.p_value,
                "zeroVariance": report.zero_variance,
            }),
        )?;
        report.histogram.iter().try_for_each(|b| write_json_line(w, b))
    })?;
    if let Some(p) = &a.histogram {
        let f = fs::File::create(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "lower_edge\tcount\tcount_a\tcount_b").map_err(data)?;
        for b in &report.histogram {
            writeln!(w, "{}\t{}\t{}\t{}", b.lower_edge, b.count, b.count_a, b.count_b).map_err(data)?;
        }
        w.flush().map_err(data)?;
    }
    Ok(())
}
