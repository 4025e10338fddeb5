use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgexplore::estimator::WalkMode;
use kgexplore::explore::{rollup_query, subtopic_rank, ConceptQuery, DEFAULT_K};
use kgexplore::hop::HopCache;
use kgexplore::index::build_index_with;
use kgexplore::scoring::ScoringParams;
use kgexplore::study::{
    convergence_study, document_pairs, negative_concept_study, planted_pairs, NegativeStudyParams,
};
use kgexplore::synth::{gen_synthetic, GeneratorLedger, SynthParams, LEDGER_FILE};
use kgexplore::ConnParams;

use crate::error::{CliError, CliResult};
use crate::inputs::{load_corpus, load_index, reader, split_list, GraphArgs};
use crate::service::{listen_address, serve, AppState, Limits};

#[derive(Debug, Parser)]
#[command(name = "kgexplore", version, about = "Concept-level exploration of entity-linked documents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every candidate (concept, document) pair and write the index file
    BuildIndex(BuildIndexArgs),
    /// Roll-up query: documents matching every concept, ranked by rel
    Query(QueryArgs),
    /// Subtopic suggestions for drilling down from a query
    Subtopics(QueryArgs),
    /// Write a synthetic graph, corpus and generator ledger
    GenSynth(GenSynthArgs),
    /// Estimator error against exact connectivity over a grid of walk counts
    EvalSampling(EvalSamplingArgs),
    /// Positive versus random disjoint concepts on context relevance
    EvalNegative(EvalNegativeArgs),
    /// Serve the JSON API over a built index
    Serve(ServeArgs),
    /// Report every invalid record in a graph
    ValidateGraph(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Walks per sampled connectivity estimate
    #[arg(long, default_value_t = 50)]
    pub theta: usize,
    /// Maximum path length
    #[arg(long, default_value_t = 2)]
    pub tau: u32,
    /// Per-hop decay
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Roll-up depth along broader edges
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Exact path enumeration instead of sampling
    #[arg(long)]
    pub exact: bool,
    /// Context relevance when every mention matches the concept
    #[arg(long, default_value_t = 1.0)]
    pub empty_context_cdr_c: f64,
}

impl ScoringArgs {
    pub fn params(&self) -> CliResult<ScoringParams> {
        let p = ScoringParams {
            conn: ConnParams::new(self.tau, self.beta)?,
            theta: self.theta,
            broaden_depth: self.depth,
            use_exact_conn: self.exact,
            empty_context_cdr_c: self.empty_context_cdr_c,
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Hop maps kept in the LRU cache; 0 disables caching
    #[arg(long, default_value_t = kgexplore::hop::DEFAULT_HOP_CACHE_CAPACITY)]
    pub hop_cache_capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Comma separated concept ids
    #[arg(long)]
    pub concepts: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub concepts: Option<usize>,
    #[arg(long)]
    pub documents: Option<usize>,
    /// Full generator parameters as JSON; individual flags override it
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Pruned,
    Unpruned,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalSamplingArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub docs: PathBuf,
    /// Generator ledger naming each document's planted concept
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long, default_value = "1,5,10,20,50,100")]
    pub theta_grid: String,
    /// Repetitions per pair and theta
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 40)]
    pub pairs: usize,
    #[arg(long, default_value_t = 2)]
    pub tau: u32,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalNegativeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value = "1,2,3")]
    pub taus: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write one line per trial to this file
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Listen address; defaults to $KGEXPLORE_LISTEN, then 127.0.0.1:8080
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long, default_value_t = Limits::default().max_k)]
    pub max_k: usize,
    #[arg(long, default_value_t = Limits::default().max_concepts)]
    pub max_concepts: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> CliResult<Vec<T>> {
    let items = split_list(raw)
        .iter()
        .map(|s| s.parse().map_err(|_| CliError::usage(format!("invalid {what} {s:?}"))))
        .collect::<CliResult<Vec<T>>>()?;
    if items.is_empty() {
        return Err(CliError::usage(format!("empty {what} list")));
    }
    Ok(items)
}

pub fn build_index(args: &BuildIndexArgs) -> CliResult<()> {
    let params = args.scoring.params()?;
    let g = args.graph.load()?;
    let corpus = load_corpus(&args.docs, &g)?;
    let oracle = HopCache::with_capacity(params.conn.tau, args.hop_cache_capacity);
    let ix = build_index_with(&g, &corpus, &params, &oracle)?;
    let (hits, misses) = oracle.hit_stats();
    for f in ix.build_failures() {
        tracing::warn!(concept = %f.concept, document = %f.document, reason = %f.reason, "entry skipped");
    }
    let bytes = ix.to_bytes()?;
    fs::write(&args.out, &bytes).map_err(|e| CliError::new("io", format!("{}: {e}", args.out.display())))?;
    tracing::info!(entries = ix.len(), bytes = bytes.len(), hop_cache_hits = hits, hop_cache_misses = misses, "index written");
    println!("entries\t{}\nconcepts\t{}\ndocuments\t{}", ix.len(), ix.concepts().len(), ix.document_count());
    Ok(())
}

fn concept_query(args: &QueryArgs) -> CliResult<ConceptQuery> {
    Ok(ConceptQuery::new(split_list(&args.concepts), args.k)?)
}

pub fn query_table(ix: &kgexplore::index::InvertedIndex, q: &ConceptQuery) -> String {
    let mut out = String::from("rank\tdocument\trel\tconcept\tcdr\tcdr_o\tcdr_c\tpivot\tmatched_entities\n");
    for (i, r) in rollup_query(ix, q).iter().enumerate() {
        for e in &r.per_concept {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                r.document,
                r.rel,
                e.concept,
                e.cdr,
                e.cdr_o,
                e.cdr_c,
                e.pivot_entity,
                e.matched_entities.join(",")
            )
            .unwrap();
        }
    }
    out
}

pub fn subtopic_table(ix: &kgexplore::index::InvertedIndex, q: &ConceptQuery) -> String {
    let mut out = String::from("rank\tconcept\tsbr\tcoverage\tspecificity\tdiversity\tsupport_docs\n");
    for (i, s) in subtopic_rank(ix, q).iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            s.concept,
            s.sbr,
            s.coverage,
            s.specificity,
            s.diversity,
            s.support_docs
        )
        .unwrap();
    }
    out
}

pub fn query(args: &QueryArgs) -> CliResult<()> {
    let ix = load_index(&args.index)?;
    let q = concept_query(args)?;
    let text = match args.format {
        Format::Tsv => query_table(&ix, &q),
        Format::Json => serde_json::to_string_pretty(&rollup_query(&ix, &q))? + "\n",
    };
    emit(None, &text)
}

pub fn subtopics(args: &QueryArgs) -> CliResult<()> {
    let ix = load_index(&args.index)?;
    let q = concept_query(args)?;
    let text = match args.format {
        Format::Tsv => subtopic_table(&ix, &q),
        Format::Json => serde_json::to_string_pretty(&subtopic_rank(&ix, &q))? + "\n",
    };
    emit(None, &text)
}

pub fn gen_synth(args: &GenSynthArgs) -> CliResult<()> {
    let mut params = match &args.params {
        Some(path) => serde_json::from_reader(reader(path)?)?,
        None => SynthParams::default(),
    };
    params.seed = args.seed;
    if let Some(n) = args.instances {
        params.instance_count = n;
    }
    if let Some(n) = args.concepts {
        params.concept_count = n;
    }
    if let Some(n) = args.documents {
        params.document_count = n;
    }
    let data = gen_synthetic(&params)?;
    data.write_to_dir(&args.out)?;
    println!(
        "instances\t{}\nconcepts\t{}\ninstance_edges\t{}\ndocuments\t{}",
        params.instance_count,
        params.concept_count,
        data.ledger.instance_edges,
        data.ledger.document_concept.len()
    );
    Ok(())
}

pub fn eval_sampling(args: &EvalSamplingArgs) -> CliResult<()> {
    let grid: Vec<usize> = parse_list(&args.theta_grid, "theta")?;
    let p = ConnParams::new(args.tau, args.beta)?;
    let g = args.graph.load()?;
    let corpus = load_corpus(&args.docs, &g)?;
    let ledger_path = args
        .ledger
        .clone()
        .or_else(|| args.graph.graph.as_ref().map(|d| d.join(LEDGER_FILE)).filter(|p| p.exists()));
    let pairs = match ledger_path {
        Some(path) => {
            let ledger: GeneratorLedger = serde_json::from_reader(reader(&path)?)?;
            planted_pairs(&g, &corpus, &ledger, args.pairs)
        }
        None => document_pairs(&g, &corpus, args.pairs),
    };
    if pairs.is_empty() {
        return Err(CliError::new("study", "no (concept, context) pairs could be formed from the corpus"));
    }
    let mut table = convergence_study(&g, &pairs, &p, &grid, args.seeds, args.seed)?;
    match args.mode {
        ModeArg::Pruned => table.rows.retain(|r| r.mode == WalkMode::Pruned),
        ModeArg::Unpruned => table.rows.retain(|r| r.mode == WalkMode::Unpruned),
        ModeArg::Both => {}
    }
    tracing::info!(pairs = table.pairs_used, excluded = table.excluded_pairs.len(), "convergence study done");
    emit(args.out.as_deref(), &table.to_tsv())
}

pub fn eval_negative(args: &EvalNegativeArgs) -> CliResult<()> {
    let taus: Vec<u32> = parse_list(&args.taus, "tau")?;
    let g = args.graph.load()?;
    let corpus = load_corpus(&args.docs, &g)?;
    let ix = load_index(&args.index)?;
    let params = NegativeStudyParams { trials: args.trials, taus, scoring: *ix.params(), seed: args.seed };
    let study = negative_concept_study(&g, &ix, &corpus, &params)?;
    if let Some(path) = &args.trials_out {
        let mut text = String::from("tau\tconcept\tdocument\tnegative\tpositive_cdr_c\tnegative_cdr_c\n");
        for t in &study.trials {
            writeln!(
                text,
                "{}\t{}\t{}\t{}\t{}\t{}",
                t.tau, t.concept, t.document, t.negative, t.positive_cdr_c, t.negative_cdr_c
            )
            .unwrap();
        }
        emit(Some(path), &text)?;
    }
    emit(args.out.as_deref(), &study.to_tsv())
}

pub fn load_service_state(args: &ServeArgs) -> CliResult<AppState> {
    let g = args.graph.load()?;
    let corpus = load_corpus(&args.docs, &g)?;
    let ix = load_index(&args.index)?;
    let limits = Limits { max_k: args.max_k, max_concepts: args.max_concepts, ..Limits::default() };
    AppState::new(g, corpus, ix, limits)
}

pub fn serve_command(args: &ServeArgs) -> CliResult<()> {
    let addr = listen_address(args.listen.as_deref())?;
    let state = load_service_state(args)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(state, addr))
}

/// Lists every violation on stdout; fails when there is at least one.
pub fn validate(args: &ValidateArgs) -> CliResult<()> {
    let found = args.graph.validate()?;
    for e in &found {
        println!("{}\t{}", e.kind(), e);
    }
    if found.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(CliError::new("invalid_graph", format!("{} violations", found.len())))
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::BuildIndex(a) => build_index(a),
        Command::Query(a) => query(a),
        Command::Subtopics(a) => subtopics(a),
        Command::GenSynth(a) => gen_synth(a),
        Command::EvalSampling(a) => eval_sampling(a),
        Command::EvalNegative(a) => eval_negative(a),
        Command::Serve(a) => serve_command(a),
        Command::ValidateGraph(a) => validate(a),
    }
}
