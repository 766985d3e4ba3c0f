//! Wave-farm layout/power records and their CSV representation.
//!
//! A row holds 49 numbers: 16 WEC positions as 32 coordinates, 16 absorbed
//! powers, then the farm total. Coordinates are interleaved (`x1,y1,...`) by
//! default; a header row naming `X1,X2,...` switches to the blocked order.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEC_COUNT: usize = 16;
pub const POSITION_FIELDS: usize = 2 * WEC_COUNT;
pub const FIELD_COUNT: usize = POSITION_FIELDS + WEC_COUNT + 1;
/// Side of the square deployment area, meters.
pub const SITE_EXTENT: f64 = 566.0;

const MAX_REPORTED_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    Sydney,
    Adelaide,
    Perth,
    Tasmania,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Sydney,
        Scenario::Adelaide,
        Scenario::Perth,
        Scenario::Tasmania,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Sydney => "Sydney",
            Scenario::Adelaide => "Adelaide",
            Scenario::Perth => "Perth",
            Scenario::Tasmania => "Tasmania",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Planar WEC position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions of the 16 converters of one farm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WecLayout {
    pub positions: [Position; WEC_COUNT],
}

impl WecLayout {
    pub fn new(positions: [Position; WEC_COUNT]) -> Self {
        Self { positions }
    }

    /// Coordinates flattened as `x1, y1, ..., x16, y16`.
    pub fn flatten(&self) -> [f64; POSITION_FIELDS] {
        let mut out = [0.0; POSITION_FIELDS];
        for (i, p) in self.positions.iter().enumerate() {
            out[2 * i] = p.x;
            out[2 * i + 1] = p.y;
        }
        out
    }

    pub fn within_site(&self) -> bool {
        self.positions
            .iter()
            .all(|p| (0.0..=SITE_EXTENT).contains(&p.x) && (0.0..=SITE_EXTENT).contains(&p.y))
    }
}

/// One dataset row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarmRecord {
    pub layout: WecLayout,
    /// Absorbed power per WEC, watts.
    pub powers: [f64; WEC_COUNT],
    /// Farm output, watts.
    pub total_power: f64,
}

impl FarmRecord {
    pub fn power_sum(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// `|total - sum(powers)| / |total|`; zero when both vanish.
    pub fn sum_relative_error(&self) -> f64 {
        let diff = (self.total_power - self.power_sum()).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.total_power.abs()
        }
    }
}

/// How the 32 coordinate columns are ordered in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnOrder {
    /// `x1, y1, x2, y2, ..., x16, y16`
    #[default]
    Interleaved,
    /// `x1, ..., x16, y1, ..., y16`
    Blocked,
}

impl ColumnOrder {
    /// Column name of field `idx` (0-based) in this order.
    pub fn column_name(self, idx: usize) -> String {
        match idx {
            i if i < POSITION_FIELDS => match self {
                ColumnOrder::Interleaved => {
                    let axis = if i % 2 == 0 { 'x' } else { 'y' };
                    format!("{axis}{}", i / 2 + 1)
                }
                ColumnOrder::Blocked => {
                    let axis = if i < WEC_COUNT { 'x' } else { 'y' };
                    format!("{axis}{}", i % WEC_COUNT + 1)
                }
            },
            i if i < POSITION_FIELDS + WEC_COUNT => format!("power{}", i - POSITION_FIELDS + 1),
            _ => "total_power".to_string(),
        }
    }

    /// Maps WEC `wec` to its (x, y) field indices.
    #[inline]
    fn xy_fields(self, wec: usize) -> (usize, usize) {
        match self {
            ColumnOrder::Interleaved => (2 * wec, 2 * wec + 1),
            ColumnOrder::Blocked => (wec, WEC_COUNT + wec),
        }
    }

    fn from_header(fields: &[&str]) -> Option<Self> {
        let second = fields.get(1)?.trim().to_ascii_lowercase();
        match second.as_str() {
            "y1" => Some(ColumnOrder::Interleaved),
            "x2" => Some(ColumnOrder::Blocked),
            _ => None,
        }
    }
}

/// Header handling for [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderPolicy {
    /// Skip the first row when it is not numeric.
    #[default]
    Auto,
    Skip,
    None,
}

impl FromStr for HeaderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(HeaderPolicy::Auto),
            "skip" => Ok(HeaderPolicy::Skip),
            "none" => Ok(HeaderPolicy::None),
            other => Err(Error::InvalidArgument(format!("header policy {other:?}"))),
        }
    }
}

/// Parses one 49-field CSV row in the default interleaved order.
pub fn parse_record(line: &str, row_index: usize) -> Result<FarmRecord> {
    parse_record_with(line, row_index, ColumnOrder::Interleaved)
}

pub fn parse_record_with(line: &str, row_index: usize, order: ColumnOrder) -> Result<FarmRecord> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != FIELD_COUNT {
        return Err(Error::FieldCount {
            row: row_index,
            found: fields.len(),
        });
    }
    let mut values = [0.0; FIELD_COUNT];
    for (idx, (slot, raw)) in values.iter_mut().zip(&fields).enumerate() {
        let raw = raw.trim();
        *slot = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::NonNumeric {
                row: row_index,
                column: order.column_name(idx),
                value: raw.to_string(),
            })?;
    }

    let mut positions = [Position::default(); WEC_COUNT];
    for (wec, p) in positions.iter_mut().enumerate() {
        let (xi, yi) = order.xy_fields(wec);
        *p = Position::new(values[xi], values[yi]);
    }
    let mut powers = [0.0; WEC_COUNT];
    powers.copy_from_slice(&values[POSITION_FIELDS..POSITION_FIELDS + WEC_COUNT]);

    Ok(FarmRecord {
        layout: WecLayout::new(positions),
        powers,
        total_power: values[FIELD_COUNT - 1],
    })
}

/// Writes a record as a 49-field row in interleaved order. Uses the shortest
/// representation that parses back to the same `f64`.
pub fn format_record(record: &FarmRecord) -> String {
    let mut out = String::with_capacity(FIELD_COUNT * 12);
    for (i, v) in record
        .layout
        .flatten()
        .iter()
        .chain(record.powers.iter())
        .chain(std::iter::once(&record.total_power))
        .enumerate()
    {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&v.to_string());
    }
    out
}

/// Header line matching [`format_record`].
pub fn header_line() -> String {
    (0..FIELD_COUNT)
        .map(|i| ColumnOrder::Interleaved.column_name(i))
        .collect::<Vec<_>>()
        .join(",")
}

/// All records of one scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmDataset {
    pub scenario: Scenario,
    pub records: Vec<FarmRecord>,
    pub source_path: PathBuf,
}

impl FarmDataset {
    pub fn new(
        scenario: Scenario,
        records: Vec<FarmRecord>,
        source_path: impl Into<PathBuf>,
    ) -> Result<Self> {
        let source_path = source_path.into();
        if records.is_empty() {
            return Err(Error::EmptyDataset(source_path.display().to_string()));
        }
        Ok(Self {
            scenario,
            records,
            source_path,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_powers(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total_power).collect()
    }

    /// Writes the dataset as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = header_line();
        out.push('\n');
        for r in &self.records {
            out.push_str(&format_record(r));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn looks_numeric(line: &str) -> bool {
    line.split(',')
        .next()
        .is_some_and(|f| f.trim().parse::<f64>().is_ok())
}

/// Reads a scenario file. Every malformed row is collected; the error lists
/// the first 20.
pub fn load_dataset(
    path: &Path,
    scenario: Scenario,
    header_policy: HeaderPolicy,
) -> Result<FarmDataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut order = ColumnOrder::Interleaved;
    if let Some(&(_, first)) = lines.peek() {
        let skip = match header_policy {
            HeaderPolicy::Skip => true,
            HeaderPolicy::None => false,
            HeaderPolicy::Auto => !looks_numeric(first),
        };
        if skip {
            let fields: Vec<&str> = first.split(',').collect();
            if let Some(o) = ColumnOrder::from_header(&fields) {
                order = o;
            }
            lines.next();
        }
    }

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (line_no, line) in lines {
        match parse_record_with(line, line_no + 1, order) {
            Ok(r) => records.push(r),
            Err(e) => failures.push(e.to_string()),
        }
    }
    if !failures.is_empty() {
        let shown = failures.len().min(MAX_REPORTED_ROWS);
        return Err(Error::MalformedRows {
            path: path.to_path_buf(),
            count: failures.len(),
            shown,
            details: failures[..shown].join("\n"),
        });
    }
    FarmDataset::new(scenario, records, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeViolation {
    pub row: usize,
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumMismatch {
    pub row: usize,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub record_count: usize,
    pub range_violations: Vec<RangeViolation>,
    pub sum_mismatches: Vec<SumMismatch>,
    pub status: ValidationStatus,
}

impl ValidationReport {
    /// Escalates a warning to a failure.
    pub fn strict(mut self) -> Self {
        if self.status == ValidationStatus::Warn {
            self.status = ValidationStatus::Fail;
        }
        self
    }
}

/// Checks coordinate ranges, power signs and the total-equals-sum rule.
/// Row indices are 0-based record positions. Findings are reported as
/// [`ValidationStatus::Warn`]; see [`ValidationReport::strict`].
pub fn validate_dataset(ds: &FarmDataset, sum_tolerance: f64) -> Result<ValidationReport> {
    if sum_tolerance.is_nan() || sum_tolerance <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sum tolerance must be positive, got {sum_tolerance}"
        )));
    }
    let mut range_violations = Vec::new();
    let mut sum_mismatches = Vec::new();
    for (row, rec) in ds.records.iter().enumerate() {
        for (wec, p) in rec.layout.positions.iter().enumerate() {
            for (axis, v) in [("x", p.x), ("y", p.y)] {
                if !(0.0..=SITE_EXTENT).contains(&v) {
                    range_violations.push(RangeViolation {
                        row,
                        column: format!("{axis}{}", wec + 1),
                        value: v,
                    });
                }
            }
        }
        for (wec, &p) in rec.powers.iter().enumerate() {
            if p < 0.0 {
                range_violations.push(RangeViolation {
                    row,
                    column: format!("power{}", wec + 1),
                    value: p,
                });
            }
        }
        let rel = rec.sum_relative_error();
        if rel > sum_tolerance {
            sum_mismatches.push(SumMismatch {
                row,
                relative_error: rel,
            });
        }
    }
    let status = if range_violations.is_empty() && sum_mismatches.is_empty() {
        ValidationStatus::Pass
    } else {
        ValidationStatus::Warn
    };
    Ok(ValidationReport {
        record_count: ds.len(),
        range_violations,
        sum_mismatches,
        status,
    })
}
