//! One non-interactive recommendation pass over a model file.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};

use modelassist_core::gateway::GatewayError;
use modelassist_core::metrics::render_table;
use modelassist_core::model::{Candidate, CandidateKind, CandidatePayload};
use modelassist_core::prompt::ShotCatalog;
use modelassist_core::recommend::{RecommendError, Recommender, RecommenderConfig, SuggestionSet};
use modelassist_core::text::{association_line, parse_model, serialize_model};

use crate::config::{build_gateway, process_env, ProviderArgs};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    #[value(alias = "classes")]
    Class,
    #[value(alias = "attribute", alias = "attributes")]
    Attr,
    #[value(alias = "association", alias = "associations")]
    Assoc,
}

impl Kind {
    fn candidate_kind(self) -> CandidateKind {
        match self {
            Kind::Class => CandidateKind::Class,
            Kind::Attr => CandidateKind::Attribute,
            Kind::Assoc => CandidateKind::Association,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Model in the .dm notation
    #[arg(id = "MODEL_FILE", value_name = "MODEL.dm")]
    pub model_file: PathBuf,
    /// Suggestion kinds to run
    #[arg(long, value_delimiter = ',', default_value = "class,attr,assoc")]
    pub kinds: Vec<Kind>,
    /// Repetitions per prompt
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    /// Seed for shuffling class pairs
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Class the class prompt is centred on
    #[arg(long)]
    pub focus: Option<String>,
    /// Shot catalog in the interchange format (default: bundled)
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Accept every suggestion and write the result here
    #[arg(long, value_name = "OUT.dm")]
    pub apply_all: Option<PathBuf>,
    /// Print suggestions as JSON
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

pub fn load_catalog(path: Option<&PathBuf>) -> Result<ShotCatalog, CliError> {
    match path {
        Some(p) => ShotCatalog::from_file(p).map_err(|e| CliError::config(format!("{}: {e}", p.display()))),
        None => Ok(ShotCatalog::bundled()),
    }
}

fn gateway_failure(e: &GatewayError) -> CliError {
    match e {
        GatewayError::MockMiss { .. } => CliError::mock_miss(e.to_string()),
        _ => CliError::config(e.to_string()),
    }
}

pub async fn run(args: &CompleteArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.model_file)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.model_file.display())))?;
    let mut model = parse_model(&text).map_err(|e| CliError::input(format!("{}: {e}", args.model_file.display())))?;
    if model.classes().is_empty() {
        return Err(CliError::input(format!("{}: the model has no classes", args.model_file.display())));
    }
    let catalog = load_catalog(args.catalog.as_ref())?;
    let gateway = build_gateway(&args.provider.resolve(process_env)?)?;
    let config = RecommenderConfig::with_repetitions(args.n);
    let limit = config.max_presented;
    let recommender = Recommender::new(Arc::new(gateway), Arc::new(catalog), config);

    let kinds: Vec<CandidateKind> = args.kinds.iter().map(|k| k.candidate_kind()).collect();
    let iteration = recommender
        .run_kinds(&model, args.focus.as_deref(), args.seed, &kinds)
        .await
        .map_err(|e| match e {
            RecommendError::EmptyModel => CliError::input(e.to_string()),
            RecommendError::Gateway(g) => gateway_failure(&g),
            RecommendError::Prompt(p) => CliError::config(p.to_string()),
        })?;
    let errors = iteration.gateway_errors();
    if let Some(miss) = errors.iter().find(|e| matches!(e, GatewayError::MockMiss { .. })) {
        return Err(gateway_failure(miss));
    }
    if let Some((kind, e)) = iteration.failures.first() {
        let e = match e {
            RecommendError::Gateway(g) => gateway_failure(g),
            other => CliError::config(other.to_string()),
        };
        return Err(CliError::config(format!("{kind:?} suggestions failed: {}", e.message)));
    }
    for w in iteration.warnings() {
        tracing::warn!("{w}");
    }
    for e in &errors {
        tracing::warn!("worked around: {e}");
    }

    iteration.apply(&mut model);
    let set = SuggestionSet::of(&model, limit);

    if let Some(out) = &args.apply_all {
        for c in set.classes.iter().chain(&set.attributes).chain(&set.associations) {
            if let Err(e) = model.accept_candidate(&c.id) {
                tracing::warn!("skipped {}: {e}", c.payload.key());
            }
        }
        std::fs::write(out, serialize_model(&model.without_candidates()))
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", out.display())))?;
    }

    if args.json {
        let mut value = serde_json::to_value(&set).expect("suggestions serialize");
        let warnings: Vec<String> = iteration.warnings().map(str::to_string).collect();
        value["warnings"] = serde_json::json!(warnings);
        Ok(serde_json::to_string_pretty(&value).expect("json") + "\n")
    } else {
        Ok(render(&set))
    }
}

fn section(out: &mut String, title: &str, header: &[&str], rows: Vec<Vec<String>>) {
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str(title);
    out.push('\n');
    if rows.is_empty() {
        out.push_str("(none)\n");
    } else {
        out.push_str(&render_table(header, &rows));
    }
}

pub fn render(set: &SuggestionSet) -> String {
    let mut out = String::new();
    let rows = |cands: &[Candidate]| -> Vec<Vec<String>> {
        cands
            .iter()
            .map(|c| match &c.payload {
                CandidatePayload::Class(s) => vec![s.name.clone(), c.confidence.to_string()],
                CandidatePayload::Attribute(a) => {
                    vec![format!("{}.{}", a.owner, a.name), a.type_name.clone(), c.confidence.to_string()]
                }
                CandidatePayload::Association(a) => vec![association_line(a), c.confidence.to_string()],
            })
            .collect()
    };
    section(&mut out, "Classes", &["Class", "Confidence"], rows(&set.classes));
    section(&mut out, "Attributes", &["Attribute", "Type", "Confidence"], rows(&set.attributes));
    section(&mut out, "Associations", &["Association", "Confidence"], rows(&set.associations));
    out
}
