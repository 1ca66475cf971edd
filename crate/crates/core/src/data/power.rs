//! Reader for the per-minute household power consumption log.

use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{Error, Result};

/// Measurement columns, in file order.
pub const FEATURE_NAMES: [&str; 7] = [
    "global_active_power",
    "global_reactive_power",
    "voltage",
    "global_intensity",
    "sub_metering_1",
    "sub_metering_2",
    "sub_metering_3",
];

pub const VOLTAGE: usize = 2;

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// One minute of measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    pub values: [f64; 7],
    /// The measurements were absent in the file and copied from the
    /// preceding record.
    pub imputed: bool,
}

/// Gap-filled record stream plus bookkeeping about what was filled.
#[derive(Clone, Debug, Default)]
pub struct PowerLog {
    pub records: Vec<RawRecord>,
    /// Rows present in the file whose measurements were missing.
    pub missing_rows: usize,
    /// Minutes absent from the file altogether, inserted as copies.
    pub inserted_rows: usize,
    /// Missing rows before the first complete record, dropped.
    pub leading_dropped: usize,
}

impl PowerLog {
    /// Fraction of records whose values were imputed.
    pub fn filled_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.imputed).count() as f64 / self.records.len() as f64
    }
}

pub fn parse_power_csv(path: impl AsRef<Path>) -> Result<PowerLog> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_power_reader(std::io::BufReader::with_capacity(1 << 20, file))
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let mut it = s.split('/');
    let d = it.next()?.trim().parse().ok()?;
    let m = it.next()?.trim().parse().ok()?;
    let y = it.next()?.trim().parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    NaiveDate::from_ymd_opt(y, m, d)
}

fn parse_time(s: &str) -> Option<NaiveTime> {
    let mut it = s.split(':');
    let h = it.next()?.trim().parse().ok()?;
    let m = it.next()?.trim().parse().ok()?;
    let sec = it.next().map_or(Some(0), |v| v.trim().parse().ok())?;
    NaiveTime::from_hms_opt(h, m, sec)
}

/// Parse the semicolon-separated log (`Date;Time;` followed by the seven
/// measurements; `?` or an empty field marks a missing value).
///
/// A row with any missing measurement takes all values of the record
/// immediately preceding it; absent minutes are inserted the same way.
pub fn parse_power_reader<R: Read>(reader: R) -> Result<PowerLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let mut log = PowerLog::default();
    let mut row = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut row).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        if row.len() < 9 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 9 fields, found {}", row.len()),
            });
        }
        let date = parse_date(&row[0]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad date `{}`", &row[0]),
        })?;
        let time = parse_time(&row[1]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad time `{}`", &row[1]),
        })?;
        let timestamp = date.and_time(time);

        let mut values = [0.0f64; 7];
        let mut missing = false;
        for (k, v) in values.iter_mut().enumerate() {
            let field = row[k + 2].trim();
            if field.is_empty() || field == "?" {
                missing = true;
                continue;
            }
            *v = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad value `{field}` in column {}", FEATURE_NAMES[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value in column {}", FEATURE_NAMES[k]),
                });
            }
        }

        let Some(prev) = log.records.last() else {
            if missing {
                log.leading_dropped += 1;
            } else {
                log.records.push(RawRecord {
                    timestamp,
                    values,
                    imputed: false,
                });
            }
            continue;
        };
        let step = (timestamp - prev.timestamp).num_seconds();
        if step <= 0 {
            return Err(Error::Data(format!(
                "line {line}: timestamp {timestamp} does not follow {}",
                prev.timestamp
            )));
        }
        if step % 60 != 0 {
            return Err(Error::Data(format!(
                "line {line}: timestamp {timestamp} is not on the one-minute grid"
            )));
        }
        let prev_values = prev.values;
        let prev_ts = prev.timestamp;
        for gap in 1..step / 60 {
            log.inserted_rows += 1;
            log.records.push(RawRecord {
                timestamp: prev_ts + chrono::Duration::minutes(gap),
                values: prev_values,
                imputed: true,
            });
        }
        if missing {
            log.missing_rows += 1;
            values = prev_values;
        }
        log.records.push(RawRecord {
            timestamp,
            values,
            imputed: missing,
        });
    }
    Ok(log)
}
