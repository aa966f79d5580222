//! Loading and persisting labeled premise/hypothesis datasets.
//!
//! Two on-disk formats are supported:
//!
//! * JSONL, one object per line with keys `id`, `premise`, `hypothesis`, `label`.
//!   The label is either an integer code or a canonical label name.
//! * TSV with a header row and columns `id`, `premise`, `hypothesis`, `label`.
//!
//! The raw SNLI distribution column names (`pairID`, `sentence1`, `sentence2`,
//! `gold_label`) are accepted as aliases, so the released files load directly.
//! Rows whose gold label is `-` carry no annotator consensus; they are dropped
//! and counted.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::label::{Label, LabelSet, ParsedLabel};

const ID_KEYS: &[&str] = &["id", "pairID", "pair_id", "uid"];
const PREMISE_KEYS: &[&str] = &["premise", "sentence1"];
const HYPOTHESIS_KEYS: &[&str] = &["hypothesis", "sentence2"];
const LABEL_KEYS: &[&str] = &["label", "gold_label"];

/// Separator between an original id and the copy counter of an up-sampled record.
pub const DUPLICATE_MARKER: &str = "#dup";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
}

impl Record {
    pub fn new(
        id: impl Into<String>,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
        label: Label,
    ) -> Self {
        Record {
            id: id.into(),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label,
        }
    }

    /// Id of the record this one was copied from, or its own id for originals.
    pub fn origin_id(&self) -> &str {
        match self.id.rfind(DUPLICATE_MARKER) {
            Some(pos) if is_copy_suffix(&self.id[pos + DUPLICATE_MARKER.len()..]) => {
                &self.id[..pos]
            }
            _ => &self.id,
        }
    }

    pub fn is_duplicate(&self) -> bool {
        self.origin_id().len() != self.id.len()
    }

    /// Copy of this record under the id `<id>#dup<copy>`.
    pub fn duplicate(&self, copy: usize) -> Record {
        Record {
            id: format!("{}{DUPLICATE_MARKER}{copy}", self.id),
            ..self.clone()
        }
    }
}

fn is_copy_suffix(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub split_name: String,
    pub label_set: LabelSet,
}

impl Dataset {
    pub fn new(records: Vec<Record>, split_name: impl Into<String>, label_set: LabelSet) -> Self {
        Dataset {
            records,
            split_name: split_name.into(),
            label_set,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.label_set.len()
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<()> {
        if self.records.is_empty() {
            Err(Error::EmptyDataset)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Jsonl,
    Tsv,
}

impl DataFormat {
    /// Guesses the format from a file extension: `.tsv` and `.txt` (the SNLI
    /// release) are TSV, everything else JSONL.
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("txt") => {
                DataFormat::Tsv
            }
            _ => DataFormat::Jsonl,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(DataFormat::Jsonl),
            "tsv" => Ok(DataFormat::Tsv),
            other => Err(format!("unknown dataset format {other:?} (expected jsonl or tsv)")),
        }
    }
}

/// A loaded dataset together with ingestion counters.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Data rows read from the file (blank lines and the TSV header excluded).
    pub total_rows: usize,
    /// Rows dropped because their gold label was unresolved (`-`).
    pub skipped_unlabeled: usize,
}

pub fn load_dataset(path: &Path, format: DataFormat, label_set: &LabelSet) -> Result<LoadedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let split_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();

    let mut loader = Loader {
        path: path.to_path_buf(),
        label_set,
        seen: HashSet::new(),
        records: Vec::new(),
        total_rows: 0,
        skipped_unlabeled: 0,
    };
    match format {
        DataFormat::Jsonl => loader.read_jsonl(reader)?,
        DataFormat::Tsv => loader.read_tsv(reader)?,
    }

    Ok(LoadedDataset {
        dataset: Dataset::new(loader.records, split_name, label_set.clone()),
        total_rows: loader.total_rows,
        skipped_unlabeled: loader.skipped_unlabeled,
    })
}

struct Loader<'a> {
    path: PathBuf,
    label_set: &'a LabelSet,
    seen: HashSet<String>,
    records: Vec<Record>,
    total_rows: usize,
    skipped_unlabeled: usize,
}

impl Loader<'_> {
    fn malformed(&self, line: usize, message: impl Into<String>) -> Error {
        Error::MalformedRow {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn read_jsonl(&mut self, reader: impl BufRead) -> Result<()> {
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            self.total_rows += 1;
            let obj: Map<String, Value> = serde_json::from_str(&line)
                .map_err(|e| self.malformed(line_no, e.to_string()))?;

            let id = self.json_text(&obj, ID_KEYS, line_no)?;
            let premise = self.json_text(&obj, PREMISE_KEYS, line_no)?;
            let hypothesis = self.json_text(&obj, HYPOTHESIS_KEYS, line_no)?;
            let raw_label = match lookup(&obj, LABEL_KEYS) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                Some(Value::Null) => "-".to_string(),
                Some(other) => {
                    return Err(self.malformed(line_no, format!("label must be a string or integer, got {other}")))
                }
                None => return Err(self.malformed(line_no, "missing key `label`")),
            };
            self.push(line_no, id, premise, hypothesis, &raw_label)?;
        }
        Ok(())
    }

    fn json_text(&self, obj: &Map<String, Value>, keys: &[&str], line: usize) -> Result<String> {
        match lookup(obj, keys) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            Some(other) => Err(self.malformed(line, format!("`{}` must be a string, got {other}", keys[0]))),
            None => Err(self.malformed(line, format!("missing key `{}`", keys[0]))),
        }
    }

    fn read_tsv(&mut self, reader: impl BufRead) -> Result<()> {
        // SNLI text fields contain bare double quotes, so quoting is disabled.
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .flexible(true)
            .from_reader(reader);

        let headers = rdr.headers()?.clone();
        let column = |keys: &[&str]| -> Result<usize> {
            keys.iter()
                .find_map(|k| headers.iter().position(|h| h.trim() == *k))
                .ok_or_else(|| self.malformed(1, format!("header lacks column `{}`", keys[0])))
        };
        let id_col = column(ID_KEYS)?;
        let premise_col = column(PREMISE_KEYS)?;
        let hypothesis_col = column(HYPOTHESIS_KEYS)?;
        let label_col = column(LABEL_KEYS)?;

        let mut row = csv::StringRecord::new();
        loop {
            let more = rdr.read_record(&mut row).map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                self.malformed(line, e.to_string())
            })?;
            if !more {
                break;
            }
            let line_no = row.position().map(|p| p.line() as usize).unwrap_or(0);
            if row.len() == 1 && row[0].trim().is_empty() {
                continue;
            }
            self.total_rows += 1;
            let field = |col: usize| -> Result<String> {
                row.get(col).map(str::to_string).ok_or_else(|| {
                    self.malformed(line_no, format!("expected at least {} columns, found {}", col + 1, row.len()))
                })
            };
            let id = field(id_col)?;
            let premise = field(premise_col)?;
            let hypothesis = field(hypothesis_col)?;
            let raw_label = field(label_col)?;
            self.push(line_no, id, premise, hypothesis, &raw_label)?;
        }
        Ok(())
    }

    fn push(
        &mut self,
        line: usize,
        id: String,
        premise: String,
        hypothesis: String,
        raw_label: &str,
    ) -> Result<()> {
        let label = match self.label_set.parse(raw_label) {
            Some(ParsedLabel::Known(label)) => label,
            Some(ParsedLabel::Unlabeled) => {
                self.skipped_unlabeled += 1;
                return Ok(());
            }
            None => {
                return Err(Error::UnknownLabel {
                    path: self.path.clone(),
                    line,
                    label: raw_label.to_string(),
                })
            }
        };
        if !self.seen.insert(id.clone()) {
            return Err(Error::DuplicateId {
                path: self.path.clone(),
                line,
                id,
            });
        }
        self.records.push(Record {
            id,
            premise,
            hypothesis,
            label,
        });
        Ok(())
    }
}

fn lookup<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k))
}

#[derive(Serialize)]
struct RecordRow<'a> {
    id: &'a str,
    premise: &'a str,
    hypothesis: &'a str,
    label: &'a str,
}

/// Writes `dataset` with canonical label names. Fails on an empty dataset.
pub fn write_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    dataset.ensure_non_empty()?;
    if format == DataFormat::Tsv {
        for r in &dataset.records {
            for (field, text) in [("id", &r.id), ("premise", &r.premise), ("hypothesis", &r.hypothesis)] {
                if text.contains(['\t', '\n', '\r']) {
                    return Err(Error::UnencodableTsvField {
                        id: r.id.clone(),
                        field,
                    });
                }
            }
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        DataFormat::Jsonl => {
            for r in &dataset.records {
                let row = RecordRow {
                    id: &r.id,
                    premise: &r.premise,
                    hypothesis: &r.hypothesis,
                    label: dataset.label_set.name(r.label),
                };
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
        }
        DataFormat::Tsv => {
            let mut wtr = csv::WriterBuilder::new()
                .delimiter(b'\t')
                .quote_style(csv::QuoteStyle::Never)
                .from_writer(&mut out);
            wtr.write_record(["id", "premise", "hypothesis", "label"])?;
            for r in &dataset.records {
                wtr.write_record([
                    r.id.as_str(),
                    r.premise.as_str(),
                    r.hypothesis.as_str(),
                    dataset.label_set.name(r.label),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn snli() -> LabelSet {
        LabelSet::snli()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_three_valid_jsonl_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "train.jsonl",
            concat!(
                r#"{"id":"a","premise":"A dog runs.","hypothesis":"An animal moves.","label":"entailment"}"#, "\n",
                r#"{"id":"b","premise":"A dog runs.","hypothesis":"A cat sleeps.","label":2}"#, "\n",
                r#"{"id":"c","premise":"A dog runs.","hypothesis":"The dog is fast.","label":"neutral"}"#, "\n",
            ),
        );
        let loaded = load_dataset(&p, DataFormat::Jsonl, &snli()).unwrap();
        assert_eq!(loaded.dataset.len(), 3);
        assert_eq!(loaded.skipped_unlabeled, 0);
        assert_eq!(loaded.dataset.split_name, "train");
        let labels: Vec<_> = loaded.dataset.records.iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![Label(0), Label(2), Label(1)]);
    }

    #[test]
    fn unlabeled_rows_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::new();
        for (i, label) in ["entailment", "-", "neutral", "contradiction", "neutral"].iter().enumerate() {
            body.push_str(&format!(
                "{{\"id\":\"r{i}\",\"premise\":\"p\",\"hypothesis\":\"h\",\"label\":\"{label}\"}}\n"
            ));
        }
        let p = write(&dir, "x.jsonl", &body);
        let loaded = load_dataset(&p, DataFormat::Jsonl, &snli()).unwrap();
        assert_eq!(loaded.dataset.len(), 4);
        assert_eq!(loaded.skipped_unlabeled, 1);
        assert_eq!(loaded.total_rows, loaded.dataset.len() + loaded.skipped_unlabeled);
    }

    #[test]
    fn snli_raw_aliases_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "snli.jsonl",
            r#"{"annotator_labels":["neutral"],"captionID":"1","gold_label":"neutral","pairID":"1r1n","sentence1":"A person on a horse.","sentence2":"A person is training a horse."}"#,
        );
        let loaded = load_dataset(&p, DataFormat::Jsonl, &snli()).unwrap();
        assert_eq!(loaded.dataset.records[0].id, "1r1n");
        assert_eq!(loaded.dataset.records[0].label, Label(1));

        let tsv = "gold_label\tsentence1_binary_parse\tsentence1\tsentence2\tpairID\n\
                   neutral\t( x )\tA \"quoted\" man.\tA man.\tp1\n\
                   -\t( x )\tA man.\tA man.\tp2\n";
        let p = write(&dir, "snli.txt", tsv);
        let loaded = load_dataset(&p, DataFormat::from_path(&p), &snli()).unwrap();
        assert_eq!(loaded.dataset.len(), 1);
        assert_eq!(loaded.skipped_unlabeled, 1);
        assert_eq!(loaded.dataset.records[0].premise, "A \"quoted\" man.");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "bad.jsonl",
            "{\"id\":\"a\",\"premise\":\"p\",\"hypothesis\":\"h\",\"label\":0}\n\n{not json}\n",
        );
        match load_dataset(&p, DataFormat::Jsonl, &snli()) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_duplicate_id_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.jsonl", r#"{"id":"a","premise":"p","hypothesis":"h","label":"maybe"}"#);
        assert!(matches!(
            load_dataset(&p, DataFormat::Jsonl, &snli()),
            Err(Error::UnknownLabel { line: 1, .. })
        ));

        let p = write(
            &dir,
            "b.tsv",
            "id\tpremise\thypothesis\tlabel\nx\tp\th\t0\nx\tp\th\t1\n",
        );
        assert!(matches!(
            load_dataset(&p, DataFormat::Tsv, &snli()),
            Err(Error::DuplicateId { line: 3, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset(Path::new("/nonexistent/train.jsonl"), DataFormat::Jsonl, &snli()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn duplicates_are_written_as_distinct_rows() {
        let dir = tempfile::tempdir().unwrap();
        let a = Record::new("a", "A man sleeps.", "Nobody sleeps.", Label(2));
        let b = Record::new("b", "A cat.", "An animal.", Label(0));
        let dup = a.duplicate(1);
        let ds = Dataset::new(vec![a, b, dup], "train", snli());
        let p = dir.path().join("out.jsonl");
        write_dataset(&ds, &p, DataFormat::Jsonl).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);

        let back = load_dataset(&p, DataFormat::Jsonl, &snli()).unwrap().dataset;
        assert_eq!(back.records[2].id, "a#dup1");
        assert_eq!(back.records[2].origin_id(), "a");
        assert!(back.records[2].is_duplicate());
        assert!(!back.records[0].is_duplicate());
    }

    #[test]
    fn empty_dataset_cannot_be_written() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(vec![], "train", snli());
        let err = write_dataset(&ds, &dir.path().join("x.jsonl"), DataFormat::Jsonl).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn tsv_rejects_embedded_tabs() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(vec![Record::new("a", "x\ty", "h", Label(0))], "t", snli());
        assert!(matches!(
            write_dataset(&ds, &dir.path().join("x.tsv"), DataFormat::Tsv),
            Err(Error::UnencodableTsvField { field: "premise", .. })
        ));
    }

    #[test]
    fn origin_id_ignores_non_numeric_suffix() {
        let r = Record::new("x#dupe", "", "", Label(0));
        assert_eq!(r.origin_id(), "x#dupe");
        let r = Record::new("x#dup12", "", "", Label(0));
        assert_eq!(r.origin_id(), "x");
    }

    fn arb_records(tsv_safe: bool) -> impl Strategy<Value = Vec<Record>> {
        let text = if tsv_safe { "[^\t\n\r]{0,24}" } else { "\\PC{0,24}" };
        prop::collection::vec((text, text, 0u16..3), 1..12).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (p, h, l))| Record::new(format!("id{i}"), p, h, Label(l)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(records in arb_records(false)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.jsonl");
            let ds = Dataset::new(records, "rt", snli());
            write_dataset(&ds, &p, DataFormat::Jsonl).unwrap();
            let back = load_dataset(&p, DataFormat::Jsonl, &snli()).unwrap();
            prop_assert_eq!(back.dataset.records, ds.records);
            prop_assert_eq!(back.skipped_unlabeled, 0);
        }

        #[test]
        fn tsv_round_trip(records in arb_records(true)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.tsv");
            let ds = Dataset::new(records, "rt", snli());
            write_dataset(&ds, &p, DataFormat::Tsv).unwrap();
            let back = load_dataset(&p, DataFormat::Tsv, &snli()).unwrap();
            prop_assert_eq!(back.dataset.records, ds.records);
        }
    }
}
