//! Benchmark manifests and per-language accuracy reports.
//!
//! A manifest lists documents, each a sequence of page images with one
//! ground-truth text file per page. Running a benchmark recognizes every
//! page once, derives a hypothesis per system (raw OCR, or a prompted
//! correction through a named backend), and scores documents with their
//! pages joined by newlines. Language rows average documents without
//! weighting; the `avg` row averages language rows the same way.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrector::{self, LlmBackend};
use crate::imaging::{self, PageImage};
use crate::metrics::{self, EvalRecord};
use crate::ocr;
use crate::pipeline::{self, CorrectionMode, PipelineDeps};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("manifest schema error: {0}")]
    SchemaError(String),
    #[error("manifest references missing file {0}")]
    MissingFile(PathBuf),
    #[error("unknown system {0:?}; expected ots, <backend>-zs or <backend>-fs")]
    UnknownSystem(String),
    #[error("no backend registered under id {0:?}")]
    UnknownBackend(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub doc_id: String,
    pub language: String,
    pub title: String,
    pub genre: String,
    pub image_paths: Vec<PathBuf>,
    pub gt_paths: Vec<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    doc_id: String,
    language: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    genre: String,
    pages: Vec<ManifestPage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestPage {
    image: PathBuf,
    gt: PathBuf,
}

/// Parses manifest JSON. Relative paths resolve against `base_dir`; every
/// referenced file must exist.
pub fn parse_manifest(json: &str, base_dir: &Path) -> Result<Vec<BenchmarkEntry>, BenchError> {
    let file: ManifestFile =
        serde_json::from_str(json).map_err(|e| BenchError::SchemaError(e.to_string()))?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(file.entries.len());
    for raw in file.entries {
        if raw.doc_id.trim().is_empty() || raw.language.trim().is_empty() {
            return Err(BenchError::SchemaError("doc_id and language must be non-empty".into()));
        }
        if !seen.insert(raw.doc_id.clone()) {
            return Err(BenchError::SchemaError(format!("duplicate doc_id {}", raw.doc_id)));
        }
        if raw.pages.is_empty() {
            return Err(BenchError::SchemaError(format!("document {} has no pages", raw.doc_id)));
        }
        let resolve = |p: &Path| -> Result<PathBuf, BenchError> {
            let full = if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
            if full.is_file() {
                Ok(full)
            } else {
                Err(BenchError::MissingFile(full))
            }
        };
        let mut image_paths = Vec::new();
        let mut gt_paths = Vec::new();
        for page in &raw.pages {
            image_paths.push(resolve(&page.image)?);
            gt_paths.push(resolve(&page.gt)?);
        }
        entries.push(BenchmarkEntry {
            doc_id: raw.doc_id,
            language: raw.language,
            title: raw.title,
            genre: raw.genre,
            image_paths,
            gt_paths,
        });
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<BenchmarkEntry>, BenchError> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => BenchError::MissingFile(path.to_path_buf()),
        _ => BenchError::Io(e),
    })?;
    parse_manifest(&json, path.parent().unwrap_or(Path::new(".")))
}

/// A column of the report: raw OCR or a backend in one prompting mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    Ots,
    ZeroShot(String),
    FewShot(String),
}

impl System {
    pub fn key(&self) -> String {
        match self {
            Self::Ots => "ots".into(),
            Self::ZeroShot(b) => format!("{b}-zs"),
            Self::FewShot(b) => format!("{b}-fs"),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Ots => "OTS".into(),
            Self::ZeroShot(b) => format!("{b} (ZS)"),
            Self::FewShot(b) => format!("{b} (FS)"),
        }
    }

    fn mode(&self) -> CorrectionMode {
        match self {
            Self::Ots => CorrectionMode::None,
            Self::ZeroShot(_) => CorrectionMode::ZeroShot,
            Self::FewShot(_) => CorrectionMode::FewShot,
        }
    }

    fn backend(&self) -> Option<&str> {
        match self {
            Self::Ots => None,
            Self::ZeroShot(b) | Self::FewShot(b) => Some(b),
        }
    }

    /// Parses a comma-separated list such as `ots,llm-zs,llm-fs`.
    pub fn parse_list(list: &str) -> Result<Vec<System>, BenchError> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
    }
}

impl FromStr for System {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("ots") {
            return Ok(Self::Ots);
        }
        match s.rsplit_once('-') {
            Some((b, m)) if !b.is_empty() && m.eq_ignore_ascii_case("zs") => Ok(Self::ZeroShot(b.into())),
            Some((b, m)) if !b.is_empty() && m.eq_ignore_ascii_case("fs") => Ok(Self::FewShot(b.into())),
            _ => Err(BenchError::UnknownSystem(s.into())),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl Serialize for System {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for System {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Column order: OTS first, then each backend's zero-shot and few-shot in
/// order of first mention.
pub fn order_systems(systems: &[System]) -> Vec<System> {
    let mut out = Vec::new();
    if systems.contains(&System::Ots) {
        out.push(System::Ots);
    }
    let mut backends: Vec<&str> = Vec::new();
    for s in systems {
        if let Some(b) = s.backend() {
            if !backends.contains(&b) {
                backends.push(b);
            }
        }
    }
    for b in backends {
        for s in [System::ZeroShot(b.into()), System::FewShot(b.into())] {
            if systems.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

pub struct BenchDeps {
    pub pipeline: PipelineDeps,
    pub backends: BTreeMap<String, Arc<dyn LlmBackend>>,
    pub seed: u64,
}

impl BenchDeps {
    pub fn new(pipeline: PipelineDeps) -> Self {
        Self { pipeline, backends: BTreeMap::new(), seed: 0 }
    }

    pub fn with_backend(mut self, id: impl Into<String>, backend: Arc<dyn LlmBackend>) -> Self {
        self.backends.insert(id.into(), backend);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageScore {
    pub page: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub car: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub war: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub doc_id: String,
    pub language: String,
    pub system: System,
    /// Absent when any page failed.
    pub record: Option<EvalRecord>,
    pub pages: Vec<PageScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub language: String,
    pub system: System,
    pub car: Option<f64>,
    pub war: Option<f64>,
    pub hyp_tokens: usize,
    pub gt_tokens: usize,
    pub documents: usize,
    /// Some document in this cell failed and was left out.
    pub incomplete: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub systems: Vec<System>,
    pub languages: Vec<String>,
    pub cells: Vec<ReportCell>,
    /// Ground-truth token sums per language.
    pub gt_tokens: BTreeMap<String, usize>,
    pub documents: Vec<DocumentResult>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl BenchmarkReport {
    /// Aggregates document results. Rows follow first appearance of each
    /// language; columns follow [`order_systems`].
    pub fn from_documents(systems: &[System], documents: Vec<DocumentResult>) -> Self {
        let systems = order_systems(systems);
        let mut languages: Vec<String> = Vec::new();
        for d in &documents {
            if !languages.contains(&d.language) {
                languages.push(d.language.clone());
            }
        }
        let mut gt_tokens: BTreeMap<String, usize> = BTreeMap::new();
        let mut counted = HashSet::new();
        for d in &documents {
            if let Some(r) = &d.record {
                if counted.insert(d.doc_id.clone()) {
                    *gt_tokens.entry(d.language.clone()).or_default() += r.gt_tokens;
                }
            }
        }
        let mut cells = Vec::new();
        for lang in &languages {
            for sys in &systems {
                let docs: Vec<&DocumentResult> =
                    documents.iter().filter(|d| &d.language == lang && &d.system == sys).collect();
                let records: Vec<&EvalRecord> = docs.iter().filter_map(|d| d.record.as_ref()).collect();
                cells.push(ReportCell {
                    language: lang.clone(),
                    system: sys.clone(),
                    car: mean(records.iter().map(|r| r.car)),
                    war: mean(records.iter().map(|r| r.war)),
                    hyp_tokens: records.iter().map(|r| r.hyp_tokens).sum(),
                    gt_tokens: records.iter().map(|r| r.gt_tokens).sum(),
                    documents: records.len(),
                    incomplete: records.len() < docs.len(),
                });
            }
        }
        Self { systems, languages, cells, gt_tokens, documents }
    }

    /// Convenience for already-scored records, one document each.
    pub fn from_records(systems: &[System], records: Vec<(System, EvalRecord)>) -> Self {
        let documents = records
            .into_iter()
            .map(|(system, r)| DocumentResult {
                doc_id: r.doc_id.clone(),
                language: r.language.clone(),
                system,
                record: Some(r),
                pages: Vec::new(),
            })
            .collect();
        Self::from_documents(systems, documents)
    }

    pub fn cell(&self, language: &str, system: &System) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.language == language && &c.system == system)
    }

    pub fn avg_car(&self, system: &System) -> Option<f64> {
        mean(self.cells.iter().filter(|c| &c.system == system).filter_map(|c| c.car))
    }

    pub fn avg_war(&self, system: &System) -> Option<f64> {
        mean(self.cells.iter().filter(|c| &c.system == system).filter_map(|c| c.war))
    }

    pub fn total_hyp_tokens(&self, system: &System) -> usize {
        self.cells.iter().filter(|c| &c.system == system).map(|c| c.hyp_tokens).sum()
    }

    pub fn total_gt_tokens(&self) -> usize {
        self.gt_tokens.values().sum()
    }

    /// System token total minus ground-truth token total.
    pub fn token_difference(&self, system: &System) -> i64 {
        self.total_hyp_tokens(system) as i64 - self.total_gt_tokens() as i64
    }

    pub fn is_complete(&self) -> bool {
        !self.cells.iter().any(|c| c.incomplete)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn language_name(code: &str) -> &str {
    match code {
        "ban" => "Balinese",
        "jav" => "Javanese",
        "sun" => "Sundanese",
        "min" => "Minangkabau",
        "ind" => "Indonesian",
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn fmt_score(v: Option<f64>, incomplete: bool) -> String {
    let mut s = v.map_or_else(|| "-".to_string(), |v| format!("{v:.5}"));
    if incomplete {
        s.push('*');
    }
    s
}

struct Grid {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn metric_grid(report: &BenchmarkReport, metric: &str) -> Grid {
    let pick = |c: &ReportCell| if metric == "car" { c.car } else { c.war };
    let mut header = vec!["Language".to_string()];
    header.extend(report.systems.iter().map(System::label));
    let mut rows = Vec::new();
    for lang in &report.languages {
        let mut row = vec![language_name(lang).to_string()];
        for sys in &report.systems {
            let cell = report.cell(lang, sys);
            row.push(fmt_score(cell.and_then(pick), cell.is_some_and(|c| c.incomplete)));
        }
        rows.push(row);
    }
    if !report.languages.is_empty() {
        let mut avg = vec!["avg".to_string()];
        for sys in &report.systems {
            let v = if metric == "car" { report.avg_car(sys) } else { report.avg_war(sys) };
            avg.push(fmt_score(v, false));
        }
        rows.push(avg);
    }
    Grid { header, rows }
}

fn token_grid(report: &BenchmarkReport) -> Grid {
    let mut header = vec!["Language".to_string(), "GT".to_string()];
    header.extend(report.systems.iter().map(System::label));
    let mut rows = Vec::new();
    for lang in &report.languages {
        let mut row = vec![
            language_name(lang).to_string(),
            report.gt_tokens.get(lang).copied().unwrap_or(0).to_string(),
        ];
        for sys in &report.systems {
            row.push(report.cell(lang, sys).map_or(0, |c| c.hyp_tokens).to_string());
        }
        rows.push(row);
    }
    if !report.languages.is_empty() {
        let mut total = vec!["total".to_string(), report.total_gt_tokens().to_string()];
        let mut diff = vec!["diff vs GT".to_string(), "0".to_string()];
        for sys in &report.systems {
            total.push(report.total_hyp_tokens(sys).to_string());
            diff.push(format!("{:+}", report.token_difference(sys)));
        }
        rows.push(total);
        rows.push(diff);
    }
    Grid { header, rows }
}

fn write_table(out: &mut String, title: &str, grid: &Grid) {
    let cols = grid.header.len();
    let widths: Vec<usize> = (0..cols)
        .map(|i| {
            std::iter::once(&grid.header).chain(&grid.rows).map(|r| r[i].chars().count()).max().unwrap_or(0)
        })
        .collect();
    let line =
        |row: &[String]| {
            row.iter()
                .enumerate()
                .map(|(i, v)| {
                    if i == 0 {
                        format!("{v:<w$}", w = widths[i])
                    } else {
                        format!("{v:>w$}", w = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join(" | ")
        };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(&grid.header));
    for row in &grid.rows {
        let _ = writeln!(out, "{}", line(row));
    }
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

/// Renders CAR, WAR and token-count tables. Column order is fixed:
/// language, OTS, then per-backend zero-shot and few-shot; summary rows last.
pub fn render_report(report: &BenchmarkReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Table => {
            let mut out = String::new();
            write_table(&mut out, "CAR", &metric_grid(report, "car"));
            out.push('\n');
            write_table(&mut out, "WAR", &metric_grid(report, "war"));
            out.push('\n');
            write_table(&mut out, "Tokens", &token_grid(report));
            out
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            let mut header = vec!["metric".to_string(), "language".to_string(), "GT".to_string()];
            header.extend(report.systems.iter().map(System::label));
            let _ = writeln!(out, "{}", header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
            for metric in ["car", "war"] {
                for row in metric_grid(report, metric).rows {
                    let mut fields = vec![metric.to_string(), row[0].clone(), String::new()];
                    fields.extend(row[1..].iter().cloned());
                    let _ = writeln!(
                        out,
                        "{}",
                        fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
                    );
                }
            }
            for row in token_grid(report).rows {
                let mut fields = vec!["tokens".to_string()];
                fields.extend(row);
                let _ =
                    writeln!(out, "{}", fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
            }
            out
        }
    }
}

struct PageInput {
    ocr: Result<String, String>,
    gt: Result<String, String>,
}

fn page_seed(seed: u64, doc_idx: usize, page_idx: usize) -> u64 {
    pipeline::image_seed(seed, doc_idx.wrapping_mul(10_007).wrapping_add(page_idx))
}

fn load_page(image: &Path, gt: &Path, deps: &PipelineDeps) -> PageInput {
    let id = image.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let ocr = PageImage::open(image)
        .and_then(|img| imaging::preprocess(&img, &deps.preprocess))
        .map_err(|e| e.to_string())
        .and_then(|prepared| {
            ocr::recognize(deps.engine.as_ref(), &prepared, &id, &deps.ocr)
                .map(|o| o.text)
                .map_err(|e| e.to_string())
        });
    let gt = std::fs::read_to_string(gt).map_err(|e| format!("{}: {e}", gt.display()));
    PageInput { ocr, gt }
}

fn hypothesis(
    system: &System,
    ocr_text: &str,
    language: &str,
    seed: u64,
    deps: &BenchDeps,
) -> Result<String, String> {
    let Some(backend_id) = system.backend() else {
        return Ok(ocr_text.to_string());
    };
    let backend = deps.backends.get(backend_id).ok_or_else(|| format!("no backend {backend_id:?}"))?;
    let p = &deps.pipeline;
    let dict = p.dictionaries.get(language);
    if system.mode() == CorrectionMode::FewShot && dict.is_none() {
        return Err(format!("dictionary required for language {language}"));
    }
    let req = pipeline::correction_request(
        ocr_text,
        system.mode(),
        language,
        dict.map(|d| d.as_ref()),
        &p.selection,
        &p.template,
        seed,
    )
    .expect("correcting systems build a request");
    corrector::correct(&req, backend.as_ref(), &p.generation)
        .map(|r| r.corrected_text)
        .map_err(|e| e.to_string())
}

fn score_document(
    doc_idx: usize,
    entry: &BenchmarkEntry,
    systems: &[System],
    deps: &BenchDeps,
) -> Vec<DocumentResult> {
    let pages: Vec<PageInput> = entry
        .image_paths
        .iter()
        .zip(&entry.gt_paths)
        .map(|(img, gt)| load_page(img, gt, &deps.pipeline))
        .collect();
    systems
        .iter()
        .map(|system| {
            let mut scores = Vec::new();
            let mut hyps = Vec::new();
            let mut gts = Vec::new();
            for (page_idx, page) in pages.iter().enumerate() {
                let hyp = page.ocr.clone().and_then(|text| {
                    hypothesis(system, &text, &entry.language, page_seed(deps.seed, doc_idx, page_idx), deps)
                });
                let score = match (&hyp, &page.gt) {
                    (Ok(h), Ok(g)) => match (metrics::car(g, h), metrics::war(g, h)) {
                        (Ok(c), Ok(w)) => {
                            PageScore { page: page_idx, car: Some(c), war: Some(w), error: None }
                        }
                        (Err(e), _) | (_, Err(e)) => {
                            PageScore { page: page_idx, car: None, war: None, error: Some(e.to_string()) }
                        }
                    },
                    (Err(e), _) | (_, Err(e)) => {
                        PageScore { page: page_idx, car: None, war: None, error: Some(e.clone()) }
                    }
                };
                if let (Ok(h), Ok(g)) = (hyp, &page.gt) {
                    hyps.push(h);
                    gts.push(g.clone());
                }
                scores.push(score);
            }
            let complete = hyps.len() == pages.len();
            let record = complete
                .then(|| {
                    EvalRecord::evaluate(&entry.doc_id, &entry.language, &gts.join("\n"), &hyps.join("\n"))
                        .ok()
                })
                .flatten();
            DocumentResult {
                doc_id: entry.doc_id.clone(),
                language: entry.language.clone(),
                system: system.clone(),
                record,
                pages: scores,
            }
        })
        .collect()
}

/// Runs every document through every system. Page failures are kept in the
/// per-page diagnostics and flag the affected cells as incomplete.
pub fn run_benchmark(
    entries: &[BenchmarkEntry],
    systems: &[System],
    deps: &BenchDeps,
) -> Result<BenchmarkReport, BenchError> {
    for s in systems {
        if let Some(b) = s.backend() {
            if !deps.backends.contains_key(b) {
                return Err(BenchError::UnknownBackend(b.into()));
            }
        }
    }
    let systems = order_systems(systems);
    let per_doc = crate::par::map_bounded(entries, deps.pipeline.parallelism, |idx, entry| {
        score_document(idx, entry, &systems, deps)
    });
    Ok(BenchmarkReport::from_documents(&systems, per_doc.into_iter().flatten().collect()))
}

/// Ground-truth-only helper: page texts joined the same way as in scoring.
pub fn document_text(pages: &[String]) -> String {
    pages.join("\n")
}

pub fn read_ground_truth(entry: &BenchmarkEntry) -> Result<Vec<String>, BenchError> {
    entry.gt_paths.iter().map(|p| Ok(std::fs::read_to_string(p)?)).collect()
}

/// Counts documents and images per language, in manifest order.
pub fn manifest_summary(entries: &[BenchmarkEntry]) -> Vec<(String, usize, usize)> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for e in entries {
        if !order.contains(&e.language) {
            order.push(e.language.clone());
        }
        let c = counts.entry(e.language.clone()).or_default();
        c.0 += 1;
        c.1 += e.image_paths.len();
    }
    order
        .into_iter()
        .map(|l| {
            let (d, i) = counts[&l];
            (l, d, i)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(doc: &str, lang: &str, car: f64, war: f64, hyp: usize, gt: usize) -> EvalRecord {
        EvalRecord { doc_id: doc.into(), language: lang.into(), car, war, hyp_tokens: hyp, gt_tokens: gt }
    }

    #[test]
    fn system_parsing() {
        assert_eq!(
            System::parse_list("ots, llm-zs,gpt-4-fs").unwrap(),
            vec![System::Ots, System::ZeroShot("llm".into()), System::FewShot("gpt-4".into()),]
        );
        assert!("llm".parse::<System>().is_err());
        assert!("-zs".parse::<System>().is_err());
    }

    #[test]
    fn column_order() {
        let given = System::parse_list("b-fs,a-zs,ots,b-zs,a-fs").unwrap();
        let keys: Vec<String> = order_systems(&given).iter().map(System::key).collect();
        assert_eq!(keys, ["ots", "b-zs", "b-fs", "a-zs", "a-fs"]);
    }

    #[test]
    fn empty_report_renders_header_only() {
        let report = BenchmarkReport::from_records(&[System::Ots], vec![]);
        let csv = render_report(&report, ReportFormat::Csv);
        assert_eq!(csv, "metric,language,GT,OTS\n");
        let table = render_report(&report, ReportFormat::Table);
        assert!(!table.contains("avg"));
    }

    #[test]
    fn single_row_avg_equals_row() {
        let report = BenchmarkReport::from_records(
            &[System::Ots],
            vec![(System::Ots, record("d", "jav", 0.5, 0.25, 3, 4))],
        );
        assert_eq!(report.avg_car(&System::Ots), Some(0.5));
        assert_eq!(report.avg_war(&System::Ots), Some(0.25));
        let csv = render_report(&report, ReportFormat::Csv);
        assert!(csv.contains("car,Javanese,,0.50000\ncar,avg,,0.50000\n"), "{csv}");
        assert!(csv.contains("tokens,diff vs GT,0,-1\n"), "{csv}");
    }

    #[test]
    fn language_rows_average_documents() {
        let report = BenchmarkReport::from_records(
            &[System::Ots],
            vec![
                (System::Ots, record("a", "sun", 1.0, 1.0, 1, 1)),
                (System::Ots, record("b", "sun", 0.0, -1.0, 1, 1)),
                (System::Ots, record("c", "ban", 0.4, 0.4, 1, 1)),
            ],
        );
        assert_eq!(report.languages, ["sun", "ban"]);
        assert_eq!(report.cell("sun", &System::Ots).unwrap().car, Some(0.5));
        assert!((report.avg_car(&System::Ots).unwrap() - 0.45).abs() < 1e-12);
        assert_eq!(report.total_gt_tokens(), 3);
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("p.png"), b"x").unwrap();
        std::fs::write(dir.path().join("p.txt"), b"x").unwrap();
        let ok = r#"{"entries":[{"doc_id":"d","language":"jav","title":"t","genre":"g","pages":[{"image":"p.png","gt":"p.txt"}]}]}"#;
        assert_eq!(parse_manifest(ok, dir.path()).unwrap().len(), 1);
        let missing = ok.replace("p.png", "q.png");
        assert!(matches!(parse_manifest(&missing, dir.path()), Err(BenchError::MissingFile(_))));
        assert!(matches!(parse_manifest("{\"entries\":3}", dir.path()), Err(BenchError::SchemaError(_))));
        let no_pages = r#"{"entries":[{"doc_id":"d","language":"jav","pages":[]}]}"#;
        assert!(matches!(parse_manifest(no_pages, dir.path()), Err(BenchError::SchemaError(_))));
    }
}
