//! CDR parsing and reduction to per-station daily load series.
//!
//! A day is split into 144 ten-minute bins; bin `b` of a day counts the
//! distinct users seen at the site during `[10b, 10(b+1))` minutes after
//! local midnight. Days are bounded in a fixed UTC offset (UTC by default).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BINS_PER_DAY: usize = 144;
pub const HOURS_PER_DAY: usize = 24;
pub const BINS_PER_HOUR: usize = BINS_PER_DAY / HOURS_PER_DAY;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdrRecord {
    pub user_id: String,
    pub site_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampFormat {
    /// RFC 3339 / ISO-8601 instants such as `2013-03-04T10:03:00Z`.
    Iso8601,
    /// Integer seconds since the Unix epoch.
    Epoch,
    /// Taken from a `# timestamp=...` header, else sniffed from the first
    /// data line.
    Auto,
}

#[derive(Clone, Debug)]
pub struct CdrFormat {
    pub delimiter: char,
    pub timestamp: TimestampFormat,
    /// Fraction of malformed lines tolerated before parsing fails.
    pub max_error_fraction: f64,
}

impl Default for CdrFormat {
    fn default() -> Self {
        CdrFormat {
            delimiter: ',',
            timestamp: TimestampFormat::Auto,
            max_error_fraction: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parsed records plus the report of rejected lines.
#[derive(Clone, Debug, Default)]
pub struct ParsedCdr {
    pub records: Vec<CdrRecord>,
    pub errors: Vec<LineError>,
    /// Number of non-blank, non-comment lines seen.
    pub data_lines: usize,
}

impl ParsedCdr {
    /// Line-numbered error report, one `line N: message` entry per line.
    pub fn write_error_report<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.errors {
            writeln!(out, "line {}: {}", e.line, e.message)?;
        }
        Ok(())
    }
}

fn header_format(line: &str) -> Option<TimestampFormat> {
    let body = line.trim_start_matches('#').trim();
    let (key, value) = body.split_once(['=', ':'])?;
    if !key.trim().eq_ignore_ascii_case("timestamp") {
        return None;
    }
    match value.trim().to_ascii_lowercase().as_str() {
        "iso8601" | "iso-8601" | "iso" | "rfc3339" => Some(TimestampFormat::Iso8601),
        "epoch" | "unix" | "epoch_seconds" => Some(TimestampFormat::Epoch),
        _ => None,
    }
}

fn parse_timestamp(
    raw: &str,
    format: TimestampFormat,
) -> std::result::Result<DateTime<Utc>, String> {
    match format {
        TimestampFormat::Epoch => {
            let secs: i64 = raw
                .parse()
                .map_err(|_| format!("bad epoch timestamp {raw:?}"))?;
            DateTime::from_timestamp(secs, 0).ok_or_else(|| format!("epoch {secs} out of range"))
        }
        TimestampFormat::Iso8601 => DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| format!("bad ISO-8601 timestamp {raw:?}: {e}")),
        TimestampFormat::Auto => {
            if raw.bytes().all(|b| b.is_ascii_digit() || b == b'-') {
                parse_timestamp(raw, TimestampFormat::Epoch)
            } else {
                parse_timestamp(raw, TimestampFormat::Iso8601)
            }
        }
    }
}

fn parse_line(
    line: &str,
    delimiter: char,
    format: TimestampFormat,
) -> std::result::Result<CdrRecord, String> {
    let mut fields = line.split(delimiter).map(str::trim);
    let user = fields.next().unwrap_or_default();
    let site = fields.next().ok_or("missing site_id")?;
    let ts = fields.next().ok_or("missing timestamp")?;
    // Optional tower coordinates are accepted and ignored.
    if fields.clone().count() > 2 {
        return Err("too many fields".into());
    }
    if user.is_empty() {
        return Err("empty user_id".into());
    }
    if site.is_empty() {
        return Err("empty site_id".into());
    }
    Ok(CdrRecord {
        user_id: user.to_owned(),
        site_id: site.to_owned(),
        timestamp: parse_timestamp(ts, format)?,
    })
}

/// Parse a delimited CDR stream, one event per line.
///
/// Blank lines and `#` comments are skipped. Malformed lines go to the
/// error report; the call fails only when their share of data lines exceeds
/// `format.max_error_fraction`.
pub fn parse_cdr<R: BufRead>(input: R, format: &CdrFormat) -> Result<ParsedCdr> {
    let mut out = ParsedCdr::default();
    let mut ts_format = format.timestamp;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if format.timestamp == TimestampFormat::Auto && out.data_lines == 0 {
                if let Some(f) = header_format(trimmed) {
                    ts_format = f;
                }
            }
            continue;
        }
        if ts_format == TimestampFormat::Auto {
            // Lock the file-wide format on the first data line.
            if let Some(ts) = trimmed.split(format.delimiter).nth(2) {
                let ts = ts.trim();
                ts_format = if !ts.is_empty() && ts.bytes().all(|b| b.is_ascii_digit()) {
                    TimestampFormat::Epoch
                } else {
                    TimestampFormat::Iso8601
                };
            }
        }
        out.data_lines += 1;
        match parse_line(trimmed, format.delimiter, ts_format) {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(LineError {
                line: idx + 1,
                message,
            }),
        }
    }
    if out.data_lines > 0 {
        let fraction = out.errors.len() as f64 / out.data_lines as f64;
        if fraction > format.max_error_fraction {
            return Err(Error::TooManyMalformed {
                malformed: out.errors.len(),
                total: out.data_lines,
                threshold: format.max_error_fraction,
            });
        }
    }
    Ok(out)
}

/// Distinct-user counts of one site over one day.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoadSeries {
    pub site_id: String,
    pub date: NaiveDate,
    bins: Vec<u32>,
}

impl LoadSeries {
    pub fn new(site_id: impl Into<String>, date: NaiveDate, bins: Vec<u32>) -> Result<Self> {
        if bins.len() != BINS_PER_DAY {
            return Err(Error::DimensionMismatch {
                expected: BINS_PER_DAY,
                found: bins.len(),
            });
        }
        let site_id = site_id.into();
        if site_id.is_empty() {
            return Err(Error::InvalidInput("empty site_id".into()));
        }
        Ok(LoadSeries {
            site_id,
            date,
            bins,
        })
    }

    pub fn bins(&self) -> &[u32] {
        &self.bins
    }

    /// Hourly totals: hour `h` sums bins `6h..6h+6`.
    pub fn hourly_sums(&self) -> Vec<u32> {
        self.bins
            .chunks(BINS_PER_HOUR)
            .map(|c| c.iter().sum())
            .collect()
    }
}

pub type SeriesKey = (String, NaiveDate);

/// Streaming reducer from records to load series.
#[derive(Debug)]
pub struct LoadAccumulator {
    offset: FixedOffset,
    users: HashMap<String, u32>,
    days: BTreeMap<SeriesKey, Vec<HashSet<u32>>>,
}

impl LoadAccumulator {
    pub fn new(offset: FixedOffset) -> Self {
        LoadAccumulator {
            offset,
            users: HashMap::new(),
            days: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, record: &CdrRecord) {
        let local = record.timestamp.with_timezone(&self.offset);
        let bin = ((local.hour() * 60 + local.minute()) / 10) as usize;
        let next = self.users.len() as u32;
        let user = *self.users.entry(record.user_id.clone()).or_insert(next);
        let day = self
            .days
            .entry((record.site_id.clone(), local.date_naive()))
            .or_insert_with(|| vec![HashSet::new(); BINS_PER_DAY]);
        day[bin].insert(user);
    }

    pub fn finish(self) -> BTreeMap<SeriesKey, LoadSeries> {
        self.days
            .into_iter()
            .map(|((site, date), sets)| {
                let bins = sets.iter().map(|s| s.len() as u32).collect();
                let series = LoadSeries {
                    site_id: site.clone(),
                    date,
                    bins,
                };
                ((site, date), series)
            })
            .collect()
    }
}

/// Count distinct users per (site, day, bin), with days bounded in UTC.
pub fn build_load_series<'a, I>(records: I) -> BTreeMap<SeriesKey, LoadSeries>
where
    I: IntoIterator<Item = &'a CdrRecord>,
{
    build_load_series_in(records, FixedOffset::east_opt(0).expect("zero offset"))
}

pub fn build_load_series_in<'a, I>(
    records: I,
    offset: FixedOffset,
) -> BTreeMap<SeriesKey, LoadSeries>
where
    I: IntoIterator<Item = &'a CdrRecord>,
{
    let mut acc = LoadAccumulator::new(offset);
    for r in records {
        acc.push(r);
    }
    acc.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(rename = "10min")]
    TenMin,
    #[serde(rename = "hourly")]
    Hourly,
}

impl Granularity {
    pub fn len(self) -> usize {
        match self {
            Granularity::TenMin => BINS_PER_DAY,
            Granularity::Hourly => HOURS_PER_DAY,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::TenMin => "10min",
            Granularity::Hourly => "hourly",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "10min" | "tenmin" => Ok(Granularity::TenMin),
            "hourly" | "1h" => Ok(Granularity::Hourly),
            _ => Err(Error::InvalidParameter(format!(
                "unknown granularity {s:?}"
            ))),
        }
    }
}

/// Min-max normalized daily load.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile<F> {
    pub site_id: String,
    pub date: NaiveDate,
    pub values: Vec<F>,
    pub granularity: Granularity,
    /// Set when the raw series was constant; `values` is then all zeros.
    pub degenerate: bool,
}

impl<F: Scalar> Profile<F> {
    pub fn new(
        site_id: impl Into<String>,
        date: NaiveDate,
        values: Vec<F>,
        granularity: Granularity,
        degenerate: bool,
    ) -> Result<Self> {
        if values.len() != granularity.len() {
            return Err(Error::DimensionMismatch {
                expected: granularity.len(),
                found: values.len(),
            });
        }
        if let Some(v) = values
            .iter()
            .find(|v| !(**v >= F::zero() && **v <= F::one()))
        {
            return Err(Error::InvalidInput(format!(
                "profile value {v} outside [0,1]"
            )));
        }
        Ok(Profile {
            site_id: site_id.into(),
            date,
            values,
            granularity,
            degenerate,
        })
    }

    /// Profile of an arbitrary non-negative daily vector (e.g. a forecast).
    pub fn from_loads(
        site_id: impl Into<String>,
        date: NaiveDate,
        loads: &[F],
        granularity: Granularity,
    ) -> Result<Self> {
        if loads.len() != granularity.len() {
            return Err(Error::DimensionMismatch {
                expected: granularity.len(),
                found: loads.len(),
            });
        }
        let (values, degenerate) = min_max(loads);
        Ok(Profile {
            site_id: site_id.into(),
            date,
            values,
            granularity,
            degenerate,
        })
    }
}

/// `(v − min) / (max − min)`; a constant input maps to zeros and reports
/// `true` as degenerate.
pub fn min_max<F: Scalar>(values: &[F]) -> (Vec<F>, bool) {
    let lo = values.iter().copied().fold(F::infinity(), F::min);
    let hi = values.iter().copied().fold(F::neg_infinity(), F::max);
    if values.is_empty() || !(hi > lo) {
        return (vec![F::zero(); values.len()], true);
    }
    let range = hi - lo;
    (values.iter().map(|&v| (v - lo) / range).collect(), false)
}

pub fn normalize<F: Scalar>(series: &LoadSeries) -> Profile<F> {
    let raw: Vec<F> = series.bins.iter().map(|&b| F::lit(b as f64)).collect();
    let (values, degenerate) = min_max(&raw);
    Profile {
        site_id: series.site_id.clone(),
        date: series.date,
        values,
        granularity: Granularity::TenMin,
        degenerate,
    }
}

pub fn aggregate_hourly<F: Scalar>(series: &LoadSeries) -> Profile<F> {
    let raw: Vec<F> = series
        .hourly_sums()
        .into_iter()
        .map(|s| F::lit(s as f64))
        .collect();
    let (values, degenerate) = min_max(&raw);
    Profile {
        site_id: series.site_id.clone(),
        date: series.date,
        values,
        granularity: Granularity::Hourly,
        degenerate,
    }
}

pub fn profile_at<F: Scalar>(series: &LoadSeries, granularity: Granularity) -> Profile<F> {
    match granularity {
        Granularity::TenMin => normalize(series),
        Granularity::Hourly => aggregate_hourly(series),
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::InvalidInput(format!("bad date {s:?}: {e}")))
}

/// Write series as `site_id,date,b0,…,b143`.
pub fn write_series<'a, W, I>(out: W, series: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a LoadSeries>,
{
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["site_id".to_owned(), "date".to_owned()];
    header.extend((0..BINS_PER_DAY).map(|b| format!("b{b}")));
    w.write_record(&header)?;
    for s in series {
        let mut row = vec![s.site_id.clone(), s.date.to_string()];
        row.extend(s.bins.iter().map(u32::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(input: R) -> Result<Vec<LoadSeries>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != BINS_PER_DAY + 2 {
            return Err(Error::InvalidInput(format!(
                "series row {}: expected {} fields, found {}",
                i + 2,
                BINS_PER_DAY + 2,
                rec.len()
            )));
        }
        let bins = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.trim().parse::<u32>().map_err(|_| {
                    Error::InvalidInput(format!("series row {}: bad count {v:?}", i + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(LoadSeries::new(&rec[0], parse_date(&rec[1])?, bins)?);
    }
    Ok(out)
}

/// Write profiles as `site_id,date,granularity,degenerate,v0,…`.
pub fn write_profiles<'a, F, W, I>(out: W, profiles: I) -> Result<()>
where
    F: Scalar,
    W: Write,
    I: IntoIterator<Item = &'a Profile<F>>,
{
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for p in profiles {
        let mut row = vec![
            p.site_id.clone(),
            p.date.to_string(),
            p.granularity.as_str().to_owned(),
            p.degenerate.to_string(),
        ];
        row.extend(p.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles<F: Scalar, R: Read>(input: R) -> Result<Vec<Profile<F>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 4 {
            return Err(Error::InvalidInput("profile row too short".into()));
        }
        let granularity: Granularity = rec[2].parse()?;
        let degenerate = rec[3]
            .parse::<bool>()
            .map_err(|_| Error::InvalidInput(format!("bad degenerate flag {:?}", &rec[3])))?;
        let values = rec
            .iter()
            .skip(4)
            .map(|v| {
                v.parse::<f64>()
                    .map(F::lit)
                    .map_err(|_| Error::InvalidInput(format!("bad profile value {v:?}")))
            })
            .collect::<Result<Vec<F>>>()?;
        out.push(Profile::new(
            &rec[0],
            parse_date(&rec[1])?,
            values,
            granularity,
            degenerate,
        )?);
    }
    Ok(out)
}
