//! Corpus ingestion, label encoding, stratified splitting, standardization and
//! the feature CSV interchange format.
//!
//! A corpus is a directory with one sub-directory per category, each holding
//! WAV files: `root/<category>/<file>.wav`. Files longer than the segment
//! length contribute one row per full segment.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::{self, AudioBuffer, DEFAULT_SAMPLE_RATE, DEFAULT_SEGMENT_SECONDS};
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureConfig, FeatureExtractor, FeatureVector, FEATURE_COUNT, SCHEMA_VERSION};

/// Population-std floor used by the scaler.
pub const STD_FLOOR: f64 = 1e-12;

const CSV_MAGIC: &str = "# wrice-features ";

/// Everything needed to turn a WAV file into feature rows reproducibly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub sample_rate: u32,
    pub segment_seconds: f64,
    pub stft: StftConfig,
    pub features: FeatureConfig,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            segment_seconds: DEFAULT_SEGMENT_SECONDS,
            stft: StftConfig::default(),
            features: FeatureConfig::default(),
        }
    }
}

impl ExtractionConfig {
    pub fn extractor(&self) -> Result<FeatureExtractor> {
        FeatureExtractor::new(self.stft, self.features, self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub features: FeatureVector,
    pub label: usize,
    /// File path, suffixed with `#<segment>` when a file yielded several rows.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<Row>,
    pub label_map: Vec<String>,
    pub config: ExtractionConfig,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Row>, label_map: Vec<String>, config: ExtractionConfig) -> Result<Self> {
        let unique: BTreeSet<&String> = label_map.iter().collect();
        if unique.len() != label_map.len() {
            let dup = label_map
                .iter()
                .find(|l| label_map.iter().filter(|m| m == l).count() > 1)
                .cloned()
                .unwrap_or_default();
            return Err(Error::DuplicateLabel(dup));
        }
        if let Some(row) = rows.iter().find(|r| r.label >= label_map.len()) {
            return Err(Error::BadLabel {
                label: row.label,
                n_classes: label_map.len(),
            });
        }
        Ok(Self {
            rows,
            label_map,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_map.len()];
        for r in &self.rows {
            counts[r.label] += 1;
        }
        counts
    }

    fn with_rows(&self, rows: Vec<Row>) -> Self {
        Self {
            rows,
            label_map: self.label_map.clone(),
            config: self.config,
        }
    }
}

/// Sorted, de-duplicated label map; a label's id is its index.
pub fn encode_labels<S: AsRef<str>>(names: &[S]) -> Result<Vec<String>> {
    if names.is_empty() {
        return Err(Error::EmptyInput("no category names"));
    }
    let mut sorted: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateLabel(w[0].clone()));
    }
    Ok(sorted)
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// A corpus listing: WAV paths with their category, sorted by path.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    pub label_map: Vec<String>,
    pub files: Vec<(PathBuf, usize)>,
}

pub fn scan_corpus(root: impl AsRef<Path>) -> Result<CorpusIndex> {
    let root = root.as_ref();
    let categories: Vec<PathBuf> = read_dir_sorted(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if categories.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no category directories under {}",
            root.display()
        )));
    }
    let names: Vec<String> = categories
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let label_map = encode_labels(&names)?;

    let mut files = Vec::new();
    for (dir, name) in categories.iter().zip(&names) {
        let label = label_map
            .iter()
            .position(|l| l == name)
            .expect("label map built from names");
        let mut found = 0;
        for path in read_dir_sorted(dir)? {
            if !path.is_file() {
                continue;
            }
            if is_wav(&path) {
                files.push((path, label));
                found += 1;
            } else {
                warn!("skipping non-WAV file {}", path.display());
            }
        }
        if found == 0 {
            return Err(Error::EmptyCorpus(format!("category {name:?} contains no WAV files")));
        }
    }
    files.sort();
    Ok(CorpusIndex { label_map, files })
}

/// Loads one file at the analysis rate, optionally perturbs the whole
/// recording, then extracts one feature vector per segment.
pub fn extract_file(
    path: &Path,
    config: &ExtractionConfig,
    extractor: &FeatureExtractor,
    perturb: impl FnOnce(AudioBuffer) -> Result<AudioBuffer>,
) -> Result<Vec<(String, FeatureVector)>> {
    let run = || -> Result<Vec<(String, FeatureVector)>> {
        let buf = perturb(audio_io::load_mono(path, config.sample_rate)?)?;
        extract_segments(&buf, &path.display().to_string(), config, extractor)
    };
    run().map_err(|e| e.context(path.display().to_string()))
}

/// One feature vector per full segment of `buf`, named `source#i` when there
/// is more than one. A buffer shorter than one segment is summarized whole.
pub fn extract_segments(
    buf: &AudioBuffer,
    source: &str,
    config: &ExtractionConfig,
    extractor: &FeatureExtractor,
) -> Result<Vec<(String, FeatureVector)>> {
    let segments = audio_io::segment(buf, config.segment_seconds)?;
    if segments.is_empty() {
        return Ok(vec![(source.to_string(), extractor.extract(buf)?)]);
    }
    let multi = segments.len() > 1;
    segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let name = if multi {
                format!("{source}#{i}")
            } else {
                source.to_string()
            };
            Ok((name, extractor.extract(seg)?))
        })
        .collect()
}

pub fn ingest_corpus(root: impl AsRef<Path>, config: &ExtractionConfig) -> Result<LabeledDataset> {
    let index = scan_corpus(root)?;
    let extractor = config.extractor()?;
    let mut rows = Vec::new();
    for (path, label) in &index.files {
        for (source, features) in extract_file(path, config, &extractor, Ok)? {
            rows.push(Row {
                features,
                label: *label,
                source,
            });
        }
    }
    LabeledDataset::new(rows, index.label_map, *config)
}

/// Per class: sort by source, shuffle with the seeded generator, send
/// `ceil(test_fraction * n)` rows to test (at most `n - 1`) and the rest to
/// train. Classes are visited in label order with one shared generator.
pub fn stratified_split(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::BadConfig(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, name) in ds.label_map.iter().enumerate() {
        let mut class: Vec<&Row> = ds.rows.iter().filter(|r| r.label == label).collect();
        if class.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: name.clone(),
                count: class.len(),
            });
        }
        class.sort_by(|a, b| a.source.cmp(&b.source));
        class.shuffle(&mut rng);
        let n_test = test_count(class.len(), test_fraction);
        test.extend(class[..n_test].iter().map(|r| (*r).clone()));
        train.extend(class[n_test..].iter().map(|r| (*r).clone()));
    }
    Ok((ds.with_rows(train), ds.with_rows(test)))
}

pub fn test_count(n: usize, test_fraction: f64) -> usize {
    // the epsilon absorbs representation error in products such as 0.2 * 10
    let raw = (test_fraction * n as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, n - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub schema_version: u32,
}

/// Per-column mean and population standard deviation over `train`.
pub fn fit_scaler(train: &LabeledDataset) -> Result<Scaler> {
    let n = train.rows.len();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let mut mean = vec![0.0; FEATURE_COUNT];
    for r in &train.rows {
        for (m, v) in mean.iter_mut().zip(&r.features.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; FEATURE_COUNT];
    for r in &train.rows {
        for ((s, v), m) in var.iter_mut().zip(&r.features.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n as f64).sqrt().max(STD_FLOOR)).collect();
    Ok(Scaler {
        mean,
        std,
        schema_version: SCHEMA_VERSION,
    })
}

/// `z = (x - mean) / std`. Not idempotent: applying it twice re-centres an
/// already standardized vector.
pub fn apply_scaler(scaler: &Scaler, fv: &FeatureVector) -> Result<FeatureVector> {
    if scaler.schema_version != fv.schema_version
        || scaler.mean.len() != FEATURE_COUNT
        || scaler.std.len() != FEATURE_COUNT
    {
        return Err(Error::SchemaMismatch(format!(
            "scaler schema v{} ({} columns) vs features v{}",
            scaler.schema_version,
            scaler.mean.len(),
            fv.schema_version
        )));
    }
    let mut values = fv.values;
    for ((v, m), s) in values.iter_mut().zip(&scaler.mean).zip(&scaler.std) {
        *v = (*v - m) / s;
    }
    Ok(FeatureVector {
        values,
        schema_version: fv.schema_version,
    })
}

pub fn scale_dataset(scaler: &Scaler, ds: &LabeledDataset) -> Result<LabeledDataset> {
    let rows = ds
        .rows
        .iter()
        .map(|r| {
            Ok(Row {
                features: apply_scaler(scaler, &r.features)?,
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ds.with_rows(rows))
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvMeta {
    schema_version: u32,
    label_map: Vec<String>,
    config: ExtractionConfig,
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_features_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let meta = CsvMeta {
        schema_version: SCHEMA_VERSION,
        label_map: ds.label_map.clone(),
        config: ds.config,
    };
    let meta = serde_json::to_string(&meta).map_err(|e| Error::BadConfig(e.to_string()))?;
    writeln!(out, "{CSV_MAGIC}{meta}").map_err(io_err)?;

    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut header = vec!["path".to_string(), "label".to_string()];
    header.extend(feature_names());
    writer.write_record(&header).map_err(csv_err)?;
    for r in &ds.rows {
        let mut record = vec![r.source.clone(), ds.label_map[r.label].clone()];
        record.extend(r.features.values.iter().map(|v| fmt_f64(*v)));
        writer.write_record(&record).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err)
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let meta: CsvMeta = first
        .trim_end()
        .strip_prefix(CSV_MAGIC)
        .ok_or_else(|| Error::SchemaMismatch("missing wrice-features metadata line".into()))
        .and_then(|json| serde_json::from_str(json).map_err(|e| Error::SchemaMismatch(format!("bad metadata: {e}"))))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "feature schema v{} (expected v{SCHEMA_VERSION})",
            meta.schema_version
        )));
    }

    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let csv_err = |e: csv::Error| Error::SchemaMismatch(format!("unreadable CSV: {e}"));
    let mut expected = vec!["path".to_string(), "label".to_string()];
    expected.extend(feature_names());
    let header: Vec<String> = csv_reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    if header != expected {
        return Err(Error::SchemaMismatch(format!(
            "header has {} columns, expected {} (path, label, {} features)",
            header.len(),
            expected.len(),
            FEATURE_COUNT
        )));
    }

    let mut rows = Vec::new();
    for (line, record) in csv_reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != expected.len() {
            return Err(Error::SchemaMismatch(format!(
                "row {} has {} columns, expected {}",
                line + 1,
                record.len(),
                expected.len()
            )));
        }
        let label = meta
            .label_map
            .iter()
            .position(|l| l == &record[1])
            .ok_or_else(|| Error::SchemaMismatch(format!("row {}: unknown label {:?}", line + 1, &record[1])))?;
        let values = record
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::SchemaMismatch(format!("row {}: bad number {v:?}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            features: FeatureVector::from_slice(&values)?,
            label,
            source: record[0].to_string(),
        });
    }
    LabeledDataset::new(rows, meta.label_map, meta.config)
}
