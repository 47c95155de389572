//! Dataset ingestion and label harmonization.
//!
//! Three source formats are parsed into one record schema:
//!
//! * UTKFace — labels encoded in the image filename as
//!   `<age>_<gender>_<race>_<suffix>.<ext>` (gender 0 = male, 1 = female;
//!   race 0 = white, 1 = black, 2 = asian, 3 = indian, 4 = other). The
//!   "other" race group is removed before records are emitted.
//! * LFWA+ — a delimited attribute table with one signed real score per
//!   candidate class; a categorical label is the class with the highest
//!   positive score, and rows with no positive score for a required
//!   attribute are excluded.
//! * CelebA — a delimited attribute table with ±1 binary columns; only the
//!   `Male` and `Young` columns are consumed, and ethnicity stays absent.
//!
//! Ages harmonize to a binary class: `Old` for 65 and over, `Young` below.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed name {name:?}: {reason}")]
    MalformedName { name: String, reason: String },
    #[error("negative age {0}")]
    NegativeAge(i64),
    #[error("no positive score among candidates")]
    NoPositiveScore,
    #[error("empty score list")]
    EmptyScores,
    #[error("malformed table {path} line {line}: {reason}")]
    MalformedTable { path: String, line: usize, reason: String },
    #[error("table {path} is missing required column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("malformed record on line {line}: {source}")]
    MalformedRecord { line: usize, source: serde_json::Error },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------------------
// Harmonized label vocabulary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum AgeClass {
    Young,
    Old,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Ethnicity {
    White,
    Black,
    Asian,
    Indian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum DataSource {
    #[serde(rename = "UTKFace")]
    UtkFace,
    #[serde(rename = "LFWA")]
    Lfwa,
    #[serde(rename = "CelebA")]
    CelebA,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
        })
    }
}

impl fmt::Display for AgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgeClass::Young => "young",
            AgeClass::Old => "old",
        })
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ethnicity::White => "white",
            Ethnicity::Black => "black",
            Ethnicity::Asian => "asian",
            Ethnicity::Indian => "indian",
        })
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataSource::UtkFace => "UTKFace",
            DataSource::Lfwa => "LFWA",
            DataSource::CelebA => "CelebA",
        })
    }
}

/// A labeled facial attribute with its fixed class vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Age,
    Ethnicity,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Gender, Attribute::Age, Attribute::Ethnicity];

    pub fn name(&self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Age => "age",
            Attribute::Ethnicity => "ethnicity",
        }
    }

    /// Class names, in canonical order.
    pub fn classes(&self) -> &'static [&'static str] {
        match self {
            Attribute::Gender => &["male", "female"],
            Attribute::Age => &["young", "old"],
            Attribute::Ethnicity => &["white", "black", "asian", "indian"],
        }
    }

    /// The class of `record` under this attribute, if labeled.
    pub fn class_of(&self, record: &FaceRecord) -> Option<&'static str> {
        match self {
            Attribute::Gender => record.gender.map(|g| match g {
                Gender::Male => "male",
                Gender::Female => "female",
            }),
            Attribute::Age => record.age_class.map(|a| match a {
                AgeClass::Young => "young",
                AgeClass::Old => "old",
            }),
            Attribute::Ethnicity => record.ethnicity.map(|e| match e {
                Ethnicity::White => "white",
                Ethnicity::Black => "black",
                Ethnicity::Asian => "asian",
                Ethnicity::Indian => "indian",
            }),
        }
    }

    pub fn parse(name: &str) -> Option<Attribute> {
        match name.to_ascii_lowercase().as_str() {
            "gender" => Some(Attribute::Gender),
            "age" => Some(Attribute::Age),
            "ethnicity" => Some(Attribute::Ethnicity),
            _ => None,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One image reference plus harmonized attribute labels.
///
/// Ingestion always fills `gender` and `age_class`; they are optional at the
/// type level because synthetic records produced by domain translation assert
/// only their target attribute and leave the rest unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceRecord {
    pub image_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_class: Option<AgeClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethnicity: Option<Ethnicity>,
    pub source: DataSource,
}

/// Raw UTKFace filename fields, before harmonization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawUtkRecord {
    pub age: u32,
    pub gender_code: u8,
    pub race_code: u8,
}

/// The race code UTKFace uses for the heterogeneous "other" group.
pub const UTK_RACE_OTHER: u8 = 4;

/// Signed per-class scores for one attribute of one LFWA+ row.
#[derive(Debug, Clone, PartialEq)]
pub struct LfwaScores {
    pub classes: Vec<String>,
    pub scores: Vec<f64>,
}

/// Counters for records dropped during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub parsed: usize,
    pub skipped_malformed: usize,
    pub filtered_other_ethnicity: usize,
    pub excluded_no_positive_score: usize,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Parse a UTKFace filename of the shape `<age>_<gender>_<race>_<suffix>.<ext>`.
///
/// No harmonization is applied; race code 4 ("other") parses fine and is
/// filtered downstream.
pub fn parse_utkface_filename(name: &str) -> Result<RawUtkRecord, IngestError> {
    let malformed = |reason: &str| IngestError::MalformedName {
        name: name.to_string(),
        reason: reason.to_string(),
    };
    let stem = match name.rsplit_once('.') {
        Some((stem, ext)) if !ext.is_empty() && !stem.is_empty() => stem,
        _ => return Err(malformed("missing extension")),
    };
    let parts: Vec<&str> = stem.split('_').collect();
    if parts.len() < 4 {
        return Err(malformed("expected <age>_<gender>_<race>_<suffix>"));
    }
    let age: u32 = parts[0]
        .parse()
        .map_err(|_| malformed("age field is not a non-negative integer"))?;
    let gender_code: u8 = parts[1]
        .parse()
        .map_err(|_| malformed("gender field is not an integer"))?;
    let race_code: u8 = parts[2]
        .parse()
        .map_err(|_| malformed("race field is not an integer"))?;
    if gender_code > 1 {
        return Err(malformed("gender code outside {0,1}"));
    }
    if race_code > UTK_RACE_OTHER {
        return Err(malformed("race code outside {0..4}"));
    }
    Ok(RawUtkRecord { age, gender_code, race_code })
}

/// Render the three label fields back into a filename stem (used by the
/// losslessness tests and by synthetic fixtures).
pub fn utkface_filename(record: &RawUtkRecord, suffix: &str, ext: &str) -> String {
    format!(
        "{}_{}_{}_{}.{}",
        record.age, record.gender_code, record.race_code, suffix, ext
    )
}

/// Binary age harmonization: `Old` for 65 and over, `Young` otherwise.
pub fn harmonize_age(age_years: i64) -> Result<AgeClass, IngestError> {
    if age_years < 0 {
        return Err(IngestError::NegativeAge(age_years));
    }
    Ok(if age_years >= 65 { AgeClass::Old } else { AgeClass::Young })
}

/// Index of the highest positive score; ties break to the lowest index.
///
/// Errors with `NoPositiveScore` when every score is ≤ 0 (such rows are
/// excluded rather than guessed).
pub fn lfwa_categorical_label(scores: &[f64]) -> Result<usize, IngestError> {
    if scores.is_empty() {
        return Err(IngestError::EmptyScores);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 && best.map_or(true, |(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(IngestError::NoPositiveScore)
}

/// Drop raw UTKFace records belonging to the "other" race group, preserving
/// order. Idempotent.
pub fn filter_ethnicity_other(records: &[RawUtkRecord]) -> Vec<RawUtkRecord> {
    records
        .iter()
        .copied()
        .filter(|r| r.race_code != UTK_RACE_OTHER)
        .collect()
}

/// Harmonize one raw UTKFace record. The caller is expected to have filtered
/// the "other" race group first; a leftover code 4 maps to `ethnicity: None`.
pub fn utk_to_face_record(raw: &RawUtkRecord, image_ref: &str) -> Result<FaceRecord, IngestError> {
    let gender = match raw.gender_code {
        0 => Gender::Male,
        _ => Gender::Female,
    };
    let ethnicity = match raw.race_code {
        0 => Some(Ethnicity::White),
        1 => Some(Ethnicity::Black),
        2 => Some(Ethnicity::Asian),
        3 => Some(Ethnicity::Indian),
        _ => None,
    };
    Ok(FaceRecord {
        image_ref: image_ref.to_string(),
        age_years: Some(raw.age),
        age_class: Some(harmonize_age(i64::from(raw.age))?),
        gender: Some(gender),
        ethnicity,
        source: DataSource::UtkFace,
    })
}

/// Scan a UTKFace image directory and harmonize every parseable filename.
///
/// Files whose names do not parse are skipped and counted; "other"-race
/// records are removed. Output is sorted by filename for determinism.
pub fn ingest_utkface_dir(dir: &Path) -> Result<(Vec<FaceRecord>, IngestStats), IngestError> {
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        if entry.file_type().map_err(|e| io_err(dir, e))?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for name in names {
        match parse_utkface_filename(&name) {
            Ok(raw) => {
                if raw.race_code == UTK_RACE_OTHER {
                    stats.filtered_other_ethnicity += 1;
                    continue;
                }
                records.push(utk_to_face_record(&raw, &name)?);
                stats.parsed += 1;
            }
            Err(_) => stats.skipped_malformed += 1,
        }
    }
    Ok((records, stats))
}

// ---------------------------------------------------------------------------
// LFWA+ attribute table
// ---------------------------------------------------------------------------

fn normalize_header(token: &str) -> String {
    token
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect()
}

fn split_line(line: &str, delim: char) -> Vec<String> {
    line.split(delim).map(|s| s.trim().to_string()).collect()
}

fn sniff_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

struct TableColumns {
    image: usize,
    male: usize,
    female: Option<usize>,
    age: [usize; 4],       // child, youth, middle-aged, senior
    ethnicity: [usize; 4], // white, black, asian, indian
}

fn locate_lfwa_columns(path: &Path, header: &[String]) -> Result<TableColumns, IngestError> {
    let norm: Vec<String> = header.iter().map(|h| normalize_header(h)).collect();
    let find = |name: &str| norm.iter().position(|h| h == name);
    let require = |name: &str, label: &str| {
        find(name).ok_or_else(|| IngestError::MissingColumn {
            path: path.display().to_string(),
            column: label.to_string(),
        })
    };
    Ok(TableColumns {
        image: require("image", "image")?,
        male: require("male", "Male")?,
        female: find("female"),
        age: [
            require("child", "Child")?,
            require("youth", "Youth")?,
            require("middleaged", "Middle Aged")?,
            require("senior", "Senior")?,
        ],
        ethnicity: [
            require("white", "White")?,
            require("black", "Black")?,
            require("asian", "Asian")?,
            require("indian", "Indian")?,
        ],
    })
}

/// Read an LFWA+ style attribute table (tab- or comma-delimited, one header
/// row) and harmonize each row.
///
/// Each attribute takes the class with the highest positive score. Rows where
/// any required attribute has no positive score are excluded and counted.
/// When no `Female` column exists, the negated `Male` score stands in for it,
/// which reduces the max-positive rule to the sign of the `Male` score.
pub fn ingest_lfwa_table(path: &Path) -> Result<(Vec<FaceRecord>, IngestStats), IngestError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| IngestError::MalformedTable {
            path: path.display().to_string(),
            line: 1,
            reason: "empty file".to_string(),
        })
        .and_then(|(i, r)| r.map(|l| (i, l)).map_err(|e| io_err(path, e)))?;
    let delim = sniff_delimiter(&header_line);
    let header = split_line(&header_line, delim);
    let cols = locate_lfwa_columns(path, &header)?;

    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields = split_line(&line, delim);
        if fields.len() != header.len() {
            return Err(IngestError::MalformedTable {
                path: path.display().to_string(),
                line: lineno,
                reason: format!("expected {} fields, got {}", header.len(), fields.len()),
            });
        }
        let score = |i: usize| -> Result<f64, IngestError> {
            fields[i].parse().map_err(|_| IngestError::MalformedTable {
                path: path.display().to_string(),
                line: lineno,
                reason: format!("non-numeric score {:?} in column {:?}", fields[i], header[i]),
            })
        };

        let male = score(cols.male)?;
        let female = match cols.female {
            Some(i) => score(i)?,
            None => -male,
        };
        let gender = match lfwa_categorical_label(&[male, female]) {
            Ok(0) => Gender::Male,
            Ok(_) => Gender::Female,
            Err(IngestError::NoPositiveScore) => {
                stats.excluded_no_positive_score += 1;
                continue;
            }
            Err(e) => return Err(e),
        };

        let mut age_scores = [0.0f64; 4];
        for (slot, col) in age_scores.iter_mut().zip(cols.age) {
            *slot = score(col)?;
        }
        let age_class = match lfwa_categorical_label(&age_scores) {
            Ok(3) => AgeClass::Old, // senior
            Ok(_) => AgeClass::Young,
            Err(IngestError::NoPositiveScore) => {
                stats.excluded_no_positive_score += 1;
                continue;
            }
            Err(e) => return Err(e),
        };

        let mut eth_scores = [0.0f64; 4];
        for (slot, col) in eth_scores.iter_mut().zip(cols.ethnicity) {
            *slot = score(col)?;
        }
        let ethnicity = match lfwa_categorical_label(&eth_scores) {
            Ok(0) => Ethnicity::White,
            Ok(1) => Ethnicity::Black,
            Ok(2) => Ethnicity::Asian,
            Ok(_) => Ethnicity::Indian,
            Err(IngestError::NoPositiveScore) => {
                stats.excluded_no_positive_score += 1;
                continue;
            }
            Err(e) => return Err(e),
        };

        records.push(FaceRecord {
            image_ref: fields[cols.image].clone(),
            age_years: None,
            age_class: Some(age_class),
            gender: Some(gender),
            ethnicity: Some(ethnicity),
            source: DataSource::Lfwa,
        });
        stats.parsed += 1;
    }
    Ok((records, stats))
}

// ---------------------------------------------------------------------------
// CelebA attribute table
// ---------------------------------------------------------------------------

/// Read a CelebA attribute table: optional leading count line, a header of
/// attribute names, then `filename ±1 ±1 ...` rows (whitespace- or
/// comma-delimited). Consumes the `Male` and `Young` columns; ethnicity stays
/// absent for every record.
pub fn ingest_celeba_table(path: &Path) -> Result<(Vec<FaceRecord>, IngestStats), IngestError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = if line.contains(',') {
            split_line(&line, ',')
        } else {
            line.split_whitespace().map(|s| s.to_string()).collect()
        };
        rows.push((idx + 1, fields));
    }
    if rows.is_empty() {
        return Err(IngestError::MalformedTable {
            path: path.display().to_string(),
            line: 1,
            reason: "empty file".to_string(),
        });
    }
    // Optional first line holding only the row count.
    let mut start = 0;
    if rows[0].1.len() == 1 && rows[0].1[0].parse::<u64>().is_ok() {
        start = 1;
    }
    if rows.len() <= start {
        return Err(IngestError::MalformedTable {
            path: path.display().to_string(),
            line: rows[0].0,
            reason: "missing header row".to_string(),
        });
    }
    let header = &rows[start].1;
    let norm: Vec<String> = header.iter().map(|h| normalize_header(h)).collect();
    let find = |name: &str| norm.iter().position(|h| h == name);
    let male_col = find("male").ok_or_else(|| IngestError::MissingColumn {
        path: path.display().to_string(),
        column: "Male".to_string(),
    })?;
    let young_col = find("young").ok_or_else(|| IngestError::MissingColumn {
        path: path.display().to_string(),
        column: "Young".to_string(),
    })?;
    // Header may or may not name the image column; data rows carry one extra
    // leading field when it does not.
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for (lineno, fields) in &rows[start + 1..] {
        let offset = match fields.len() {
            n if n == header.len() + 1 => 1,
            n if n == header.len() => 0,
            n => {
                return Err(IngestError::MalformedTable {
                    path: path.display().to_string(),
                    line: *lineno,
                    reason: format!("expected {} or {} fields, got {}", header.len(), header.len() + 1, n),
                })
            }
        };
        let value = |col: usize| -> Result<i8, IngestError> {
            let raw = &fields[col + offset];
            match raw.as_str() {
                "1" | "+1" => Ok(1),
                "-1" => Ok(-1),
                _ => Err(IngestError::MalformedTable {
                    path: path.display().to_string(),
                    line: *lineno,
                    reason: format!("expected ±1, got {raw:?}"),
                }),
            }
        };
        let image_ref = if offset == 1 { fields[0].clone() } else { fields[0].clone() };
        let gender = if value(male_col)? > 0 { Gender::Male } else { Gender::Female };
        let age_class = if value(young_col)? > 0 { AgeClass::Young } else { AgeClass::Old };
        records.push(FaceRecord {
            image_ref,
            age_years: None,
            age_class: Some(age_class),
            gender: Some(gender),
            ethnicity: None,
            source: DataSource::CelebA,
        });
        stats.parsed += 1;
    }
    Ok((records, stats))
}

// ---------------------------------------------------------------------------
// Record persistence (newline-delimited JSON)
// ---------------------------------------------------------------------------

pub fn write_records(path: &Path, records: &[FaceRecord]) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| io_err(path, e))?);
    for record in records {
        let line = serde_json::to_string(record)
            .expect("FaceRecord serialization cannot fail");
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<FaceRecord>, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|source| IngestError::MalformedRecord { line: idx + 1, source })?;
        records.push(record);
    }
    Ok(records)
}

/// Class counts of `records` under `attribute`, in canonical class order.
/// Unlabeled records are not counted.
pub fn class_counts(records: &[FaceRecord], attribute: Attribute) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = attribute
        .classes()
        .iter()
        .map(|c| (c.to_string(), 0))
        .collect();
    for record in records {
        if let Some(class) = attribute.class_of(record) {
            *counts.get_mut(class).expect("canonical class") += 1;
        }
    }
    counts
}
