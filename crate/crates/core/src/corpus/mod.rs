//! Patent corpora: record types, the line-delimited file formats, and the
//! synthetic generator used for desk-scale validation.
//!
//! Two record encodings are supported. JSONL carries one JSON object per line
//! with the [`PatentRecord`] field names; TSV carries a header row naming the
//! same fields and encodes lists as `;`-separated cells. IPC descriptions live
//! in a separate two-column TSV table (`code<TAB>description`).
//!
//! Invalid records are rejected one by one with a [`Diagnostic`]; only a
//! missing IPC description fails the corpus as a whole.

pub mod ipc;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use ipc::{truncate_code, IpcCode, IpcLevel, IpcParseError};
pub use synth::{generate_synthetic_corpus, SynthConfig, SyntheticCorpus, TruthRow};

pub const MAX_TOPICS: usize = 10;
pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Column order of the TSV record format.
pub const TSV_COLUMNS: [&str; 11] = [
    "patent_id",
    "year",
    "main_ipc",
    "secondary_ipcs",
    "applicants",
    "topics",
    "first_claims",
    "forward_citations",
    "backward_citations",
    "pages",
    "claims",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub year: i32,
    pub main_ipc: String,
    pub secondary_ipcs: Vec<String>,
    pub applicants: Vec<String>,
    pub topics: Vec<String>,
    pub first_claims: f64,
    pub forward_citations: u64,
    pub backward_citations: u64,
    pub pages: u32,
    pub claims: u32,
}

impl PatentRecord {
    /// Main IPC followed by the secondary IPCs.
    pub fn all_ipcs(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.main_ipc.as_str()).chain(self.secondary_ipcs.iter().map(String::as_str))
    }

    /// Distinct codes of this patent cut at `level`, sorted.
    pub fn categories(&self, level: IpcLevel) -> BTreeSet<String> {
        self.all_ipcs().map(|c| truncate_code(c, level)).collect()
    }

    /// Per-category code counts at `level`.
    pub fn category_counts(&self, level: IpcLevel) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for code in self.all_ipcs() {
            *counts.entry(truncate_code(code, level)).or_insert(0) += 1;
        }
        counts
    }

    /// IPC section letter of the main code.
    pub fn main_section(&self) -> char {
        self.main_ipc.chars().next().unwrap_or('?')
    }
}

/// A validated corpus. Immutable once assembled.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusData {
    pub records: Vec<PatentRecord>,
    pub ipc_texts: BTreeMap<String, String>,
}

impl CorpusData {
    /// Checks that every referenced IPC code has a description.
    pub fn new(records: Vec<PatentRecord>, ipc_texts: BTreeMap<String, String>) -> Result<Self, CorpusError> {
        let mut missing = BTreeSet::new();
        for r in &records {
            for code in r.all_ipcs() {
                if !ipc_texts.contains_key(code) {
                    missing.insert(code.to_string());
                }
            }
        }
        if !missing.is_empty() {
            return Err(CorpusError::MissingIpcText(missing.into_iter().collect()));
        }
        Ok(CorpusData { records, ipc_texts })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct IPC codes referenced by the records, sorted.
    pub fn distinct_ipcs(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().flat_map(|r| r.all_ipcs()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn write_records<W: Write>(&self, out: W, format: CorpusFormat) -> io::Result<()> {
        write_records(&self.records, out, format)
    }

    pub fn write_ipc_texts<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (code, text) in &self.ipc_texts {
            writeln!(out, "{}\t{}", code, sanitize_cell(text))?;
        }
        Ok(())
    }

    /// Writes `corpus.<ext>` and `ipc_texts.tsv` into `dir`.
    pub fn save(&self, dir: &Path, format: CorpusFormat) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        self.write_records(&mut buf, format)?;
        fs::write(dir.join(format!("corpus.{}", format.extension())), buf)?;
        let mut buf = Vec::new();
        self.write_ipc_texts(&mut buf)?;
        fs::write(dir.join("ipc_texts.tsv"), buf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Tsv => "tsv",
        }
    }

    /// Guesses the format from a file extension; defaults to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

/// Problems attributable to a single record.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("record {record}: missing field `{field}`")]
    MissingField { record: String, field: &'static str },
    #[error("record {record}: invalid IPC code `{code}`")]
    InvalidIpc { record: String, code: String },
    #[error("duplicate patent id `{0}`")]
    DuplicateId(String),
    #[error("record {record}: invalid value for `{field}`: {reason}")]
    InvalidField { record: String, field: &'static str, reason: String },
    #[error("line is not a JSON object: {0}")]
    Malformed(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("IPC codes without description text: {}", .0.join(", "))]
    MissingIpcText(Vec<String>),
    #[error("malformed IPC text table at line {line}: {reason}")]
    IpcTable { line: usize, reason: String },
    #[error("TSV corpus header is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Rejected,
}

/// One parse-time finding, tied to a 1-based input line.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
    pub error: Option<RecordError>,
}

/// Records accepted from a file plus every diagnostic raised on the way.
#[derive(Debug, Clone, Default)]
pub struct ParsedRecords {
    pub records: Vec<PatentRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedRecords {
    pub fn rejected(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Rejected)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }
}

/// A parsed corpus together with its record diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedCorpus {
    pub data: CorpusData,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads and validates a corpus file plus its IPC description table.
pub fn parse_corpus(path: &Path, format: CorpusFormat, ipc_texts_path: &Path) -> Result<ParsedCorpus, CorpusError> {
    let parsed = parse_records(BufReader::new(fs::File::open(path)?), format)?;
    let texts = parse_ipc_texts(BufReader::new(fs::File::open(ipc_texts_path)?))?;
    let data = CorpusData::new(parsed.records, texts)?;
    Ok(ParsedCorpus { data, diagnostics: parsed.diagnostics })
}

/// Parses an IPC description table. Codes are canonicalized when they parse.
pub fn parse_ipc_texts<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (code, text) = line
            .split_once('\t')
            .ok_or_else(|| CorpusError::IpcTable { line: i + 1, reason: "expected `code<TAB>description`".into() })?;
        let code = IpcCode::parse(code)
            .map(|c| c.to_string())
            .map_err(|e| CorpusError::IpcTable { line: i + 1, reason: e.to_string() })?;
        out.insert(code, text.trim().to_string());
    }
    Ok(out)
}

/// Parses records line by line, keeping input order.
pub fn parse_records<R: BufRead>(reader: R, format: CorpusFormat) -> Result<ParsedRecords, CorpusError> {
    let mut out = ParsedRecords::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut header: Option<Vec<String>> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields = match format {
            CorpusFormat::Jsonl => match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(map)) => RawFields::Json(map),
                Ok(_) => {
                    out.reject(line_no, RecordError::Malformed("expected an object".into()));
                    continue;
                }
                Err(e) => {
                    out.reject(line_no, RecordError::Malformed(e.to_string()));
                    continue;
                }
            },
            CorpusFormat::Tsv => {
                let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
                match &header {
                    None => {
                        // other columns are checked per record
                        for col in ["patent_id", "year", "main_ipc"] {
                            if !cells.iter().any(|c| c.trim() == col) {
                                return Err(CorpusError::MissingColumn(col));
                            }
                        }
                        header = Some(cells.iter().map(|c| c.trim().to_string()).collect());
                        continue;
                    }
                    Some(h) => RawFields::Tsv(h.iter().cloned().zip(cells).collect()),
                }
            }
        };
        let mut warnings = Vec::new();
        match build_record(&fields, &mut warnings) {
            Ok(record) => {
                if !seen.insert(record.patent_id.clone()) {
                    out.reject(line_no, RecordError::DuplicateId(record.patent_id));
                    continue;
                }
                for w in warnings {
                    out.diagnostics.push(Diagnostic {
                        line: line_no,
                        severity: Severity::Warning,
                        message: w,
                        error: None,
                    });
                }
                out.records.push(record);
            }
            Err(e) => out.reject(line_no, e),
        }
    }
    Ok(out)
}

impl ParsedRecords {
    fn reject(&mut self, line: usize, error: RecordError) {
        self.diagnostics.push(Diagnostic {
            line,
            severity: Severity::Rejected,
            message: error.to_string(),
            error: Some(error),
        });
    }
}

enum RawFields {
    Json(Map<String, Value>),
    Tsv(BTreeMap<String, String>),
}

impl RawFields {
    fn scalar(&self, key: &str) -> Option<String> {
        match self {
            RawFields::Json(m) => match m.get(key)? {
                Value::Null => None,
                Value::String(s) => Some(s.clone()),
                other => Some(other.to_string()),
            },
            RawFields::Tsv(m) => m.get(key).cloned(),
        }
        .filter(|s| !s.trim().is_empty())
    }

    fn list(&self, key: &str) -> Result<Vec<String>, String> {
        match self {
            RawFields::Json(m) => match m.get(key) {
                None | Some(Value::Null) => Ok(Vec::new()),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s.clone()),
                        other => Err(format!("expected string, found {other}")),
                    })
                    .collect(),
                Some(Value::String(s)) => Ok(split_list(s)),
                Some(other) => Err(format!("expected array, found {other}")),
            },
            RawFields::Tsv(m) => Ok(m.get(key).map(|s| split_list(s)).unwrap_or_default()),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(';').map(str::trim).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

fn build_record(fields: &RawFields, warnings: &mut Vec<String>) -> Result<PatentRecord, RecordError> {
    let patent_id = fields
        .scalar("patent_id")
        .map(|s| s.trim().to_string())
        .ok_or(RecordError::MissingField { record: "<unknown>".into(), field: "patent_id" })?;
    let id = patent_id.clone();
    let missing = |field| RecordError::MissingField { record: id.clone(), field };
    let invalid = |field, reason: String| RecordError::InvalidField { record: id.clone(), field, reason };

    let year_raw = fields.scalar("year").ok_or_else(|| missing("year"))?;
    let year: i32 = year_raw.trim().parse().map_err(|_| invalid("year", format!("`{year_raw}` is not an integer")))?;
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(invalid("year", format!("{year} outside [{MIN_YEAR}, {MAX_YEAR}]")));
    }

    let main_raw = fields.scalar("main_ipc").ok_or_else(|| missing("main_ipc"))?;
    let main_ipc = IpcCode::parse(&main_raw)
        .map_err(|_| RecordError::InvalidIpc { record: id.clone(), code: main_raw.clone() })?
        .to_string();

    let secondary_raw = fields.list("secondary_ipcs").map_err(|r| invalid("secondary_ipcs", r))?;
    let mut secondary_ipcs: Vec<String> = Vec::with_capacity(secondary_raw.len());
    for raw in &secondary_raw {
        let code = IpcCode::parse(raw)
            .map_err(|_| RecordError::InvalidIpc { record: id.clone(), code: raw.clone() })?
            .to_string();
        if code == main_ipc {
            warnings.push(format!("record {id}: main IPC {code} listed as secondary; removed"));
        } else if secondary_ipcs.contains(&code) {
            warnings.push(format!("record {id}: duplicate secondary IPC {code}; removed"));
        } else {
            secondary_ipcs.push(code);
        }
    }

    let clean = |v: Vec<String>| -> Vec<String> {
        v.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    let applicants = clean(fields.list("applicants").map_err(|r| invalid("applicants", r))?);
    let mut topics = clean(fields.list("topics").map_err(|r| invalid("topics", r))?);
    if topics.len() > MAX_TOPICS {
        warnings.push(format!("record {id}: {} topics truncated to {MAX_TOPICS}", topics.len()));
        topics.truncate(MAX_TOPICS);
    }

    let first_claims = parse_num::<f64>(fields, "first_claims", &id)?;
    if !first_claims.is_finite() || first_claims < 0.0 {
        return Err(invalid("first_claims", format!("{first_claims} is not a non-negative real")));
    }
    let forward_citations = parse_num::<u64>(fields, "forward_citations", &id)?;
    let backward_citations = parse_num::<u64>(fields, "backward_citations", &id)?;
    let pages = parse_num::<u32>(fields, "pages", &id)?;
    if pages == 0 {
        return Err(invalid("pages", "must be positive".into()));
    }
    let claims = parse_num::<u32>(fields, "claims", &id)?;
    if claims == 0 {
        return Err(invalid("claims", "must be positive".into()));
    }

    Ok(PatentRecord {
        patent_id,
        year,
        main_ipc,
        secondary_ipcs,
        applicants,
        topics,
        first_claims,
        forward_citations,
        backward_citations,
        pages,
        claims,
    })
}

fn parse_num<T: FromStr>(fields: &RawFields, field: &'static str, id: &str) -> Result<T, RecordError> {
    let raw = fields.scalar(field).ok_or_else(|| RecordError::MissingField { record: id.to_string(), field })?;
    raw.trim().parse().map_err(|_| RecordError::InvalidField {
        record: id.to_string(),
        field,
        reason: format!("cannot parse `{raw}`"),
    })
}

fn sanitize_cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn write_records<W: Write>(records: &[PatentRecord], mut out: W, format: CorpusFormat) -> io::Result<()> {
    match format {
        CorpusFormat::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
        CorpusFormat::Tsv => {
            writeln!(out, "{}", TSV_COLUMNS.join("\t"))?;
            let join =
                |v: &[String]| v.iter().map(|s| sanitize_cell(s).replace(';', ",")).collect::<Vec<_>>().join(";");
            for r in records {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    sanitize_cell(&r.patent_id),
                    r.year,
                    r.main_ipc,
                    join(&r.secondary_ipcs),
                    join(&r.applicants),
                    join(&r.topics),
                    r.first_claims,
                    r.forward_citations,
                    r.backward_citations,
                    r.pages,
                    r.claims
                )?;
            }
        }
    }
    Ok(())
}

/// Reads a whole file into memory and parses it; a convenience for small inputs.
pub fn parse_records_str(text: &str, format: CorpusFormat) -> ParsedRecords {
    parse_records(text.as_bytes(), format).unwrap_or_default()
}

/// Reads a file as UTF-8 text.
pub fn read_text(path: &Path) -> io::Result<String> {
    let mut s = String::new();
    fs::File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}
