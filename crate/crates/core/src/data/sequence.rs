//! Turning one long record stream into training sequences: windowing,
//! subsampling, sparsification, static features and labels.

use chrono::{Datelike, NaiveDateTime, Timelike};
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Rng;

/// How records are subsampled from a window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// First record plus a uniform random subset of the rest.
    #[default]
    Random,
    /// Non-overlapping runs of five consecutive records.
    Group5,
}

/// Which records the sequence-level voltage mean is taken over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceAverage {
    /// All records of the window.
    #[default]
    Window,
    /// Only the subsampled records.
    Kept,
}

pub const GROUP_SIZE: usize = 5;
/// First candidate centre offset for groups after the first.
pub const GROUP_REGION_START: usize = 8;
pub const GROUP_REJECTION_BUDGET: usize = 1000;

/// Start indices of every full window of `sample_time` records, advancing
/// by `shift`.
pub fn window_starts(n_records: usize, sample_time: usize, shift: usize) -> Vec<usize> {
    if sample_time == 0 || shift == 0 || sample_time > n_records {
        return Vec::new();
    }
    (0..=n_records - sample_time).step_by(shift).collect()
}

/// Full windows of `sample_time` consecutive items.
pub fn window<T>(records: &[T], sample_time: usize, shift: usize) -> Vec<&[T]> {
    window_starts(records.len(), sample_time, shift)
        .into_iter()
        .map(|s| &records[s..s + sample_time])
        .collect()
}

/// Offsets of the kept records: 0 plus `keep - 1` offsets drawn uniformly
/// without replacement from `1..sample_time`, in increasing order.
pub fn subsample_random(sample_time: usize, keep: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if keep == 0 || keep > sample_time {
        return Err(Error::invalid(format!(
            "cannot keep {keep} of {sample_time} records"
        )));
    }
    let mut offsets: Vec<usize> = index::sample(rng, sample_time - 1, keep - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    offsets.push(0);
    offsets.sort_unstable();
    Ok(offsets)
}

/// Group sampling: records `0..5` plus `keep / 5 - 1` further runs of five
/// consecutive records. Each run is centred on an offset drawn from
/// `[8, sample_time)` and rejected if it leaves the window or overlaps an
/// earlier run.
///
/// Returns the sorted run start offsets.
pub fn subsample_group_starts(sample_time: usize, keep: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if keep == 0 || keep % GROUP_SIZE != 0 {
        return Err(Error::invalid(format!(
            "group sampling needs a positive multiple of {GROUP_SIZE} records, got {keep}"
        )));
    }
    if keep > sample_time || sample_time < GROUP_SIZE {
        return Err(Error::invalid(format!(
            "cannot keep {keep} of {sample_time} records"
        )));
    }
    let groups = keep / GROUP_SIZE;
    let mut starts = vec![0usize];
    if groups > 1 && sample_time <= GROUP_REGION_START {
        return Err(Error::invalid("window too short for more than one group"));
    }
    for g in 1..groups {
        let mut placed = false;
        for _ in 0..GROUP_REJECTION_BUDGET {
            let centre = rng.gen_range(GROUP_REGION_START..sample_time);
            let start = centre - 2;
            if centre + 2 >= sample_time {
                continue;
            }
            if starts
                .iter()
                .any(|&s| start < s + GROUP_SIZE && s < start + GROUP_SIZE)
            {
                continue;
            }
            starts.push(start);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::RejectionBudget {
                group: g,
                budget: GROUP_REJECTION_BUDGET,
            });
        }
    }
    starts.sort_unstable();
    Ok(starts)
}

/// Offsets of the kept records under group sampling, in increasing order.
pub fn subsample_group(sample_time: usize, keep: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    Ok(subsample_group_starts(sample_time, keep, rng)?
        .into_iter()
        .flat_map(|s| s..s + GROUP_SIZE)
        .collect())
}

pub fn subsample(sampling: Sampling, sample_time: usize, keep: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    match sampling {
        Sampling::Random => subsample_random(sample_time, keep, rng),
        Sampling::Group5 => subsample_group(sample_time, keep, rng),
    }
}

/// Minutes between adjacent kept records (`0` for the first).
pub fn deltas(offsets: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(offsets.len());
    let mut prev = offsets.first().copied().unwrap_or(0);
    for &o in offsets {
        out.push((o - prev) as f64);
        prev = o;
    }
    out
}

/// Sparse stream for the columns `subset` of a `T x d` block.
///
/// `mask[0]` is always on; later masks are on independently with the
/// feature's ratio. Values are the reading where the mask is on and 0
/// elsewhere.
pub fn sparsify(
    rows: &[Vec<f64>],
    subset: &[usize],
    ratios: &[f64],
    rng: &mut Rng,
) -> Result<(Vec<Vec<bool>>, Vec<Vec<f64>>)> {
    if subset.len() != ratios.len() {
        return Err(Error::invalid("one sparse ratio per sparse feature is required"));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::invalid(format!("sparse ratio {r} outside (0, 1]")));
    }
    let mut masks = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (t, row) in rows.iter().enumerate() {
        let mut m = Vec::with_capacity(subset.len());
        let mut v = Vec::with_capacity(subset.len());
        for (&col, &ratio) in subset.iter().zip(ratios) {
            let on = t == 0 || rng.gen_bool(ratio);
            m.push(on);
            v.push(if on { row[col] } else { 0.0 });
        }
        masks.push(m);
        values.push(v);
    }
    Ok((masks, values))
}

/// Class indices of the three-way trend target.
pub const DOWN: usize = 0;
pub const FLAT: usize = 1;
pub const UP: usize = 2;

/// Compare the future mean against the sequence mean in units of `sigma`.
pub fn trend_class(sequence_mean: f64, future_mean: f64, sigma: f64) -> usize {
    let diff = future_mean - sequence_mean;
    if diff > sigma / 2.0 {
        UP
    } else if diff < -sigma / 2.0 {
        DOWN
    } else {
        FLAT
    }
}

/// Label of the window starting at `start`.
///
/// The sequence mean covers the window records (or only the kept ones);
/// the future mean covers the `horizon` records strictly after the
/// prediction time `start + sample_time`. Returns `None` when the series
/// ends before the horizon.
pub fn label(
    series: &[f64],
    start: usize,
    sample_time: usize,
    kept: &[usize],
    horizon: usize,
    sigma: f64,
    average: SequenceAverage,
) -> Option<usize> {
    let predict = start + sample_time;
    if horizon == 0 || predict + horizon >= series.len() {
        return None;
    }
    let seq_mean = match average {
        SequenceAverage::Window => mean(&series[start..predict]),
        SequenceAverage::Kept => kept.iter().map(|&o| series[start + o]).sum::<f64>() / kept.len() as f64,
    };
    let future_mean = mean(&series[predict + 1..=predict + horizon]);
    Some(trend_class(seq_mean, future_mean, sigma))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub const DAY_OF_WEEK: usize = 7;
pub const DAY_OF_MONTH: usize = 31;
pub const TIME_OF_DAY: usize = 4;
pub const STATIC_DENSE_WIDTH: usize = DAY_OF_WEEK + DAY_OF_MONTH + TIME_OF_DAY;

/// Time-of-day bin: night `[0, 6)`, morning `[6, 12)`, afternoon
/// `[12, 18)`, evening `[18, 24)`.
pub fn time_of_day(ts: &NaiveDateTime) -> usize {
    ts.hour() as usize / 6
}

/// Concatenated one-hots: day of week (Monday first), day of month, time of day.
pub fn static_dense(first: &NaiveDateTime) -> Vec<f64> {
    let mut v = vec![0.0; STATIC_DENSE_WIDTH];
    v[first.weekday().num_days_from_monday() as usize] = 1.0;
    v[DAY_OF_WEEK + first.day0() as usize] = 1.0;
    v[DAY_OF_WEEK + DAY_OF_MONTH + time_of_day(first)] = 1.0;
    v
}

/// Minutes from the last kept record to the prediction time.
pub fn static_delta(sample_time: usize, kept: &[usize]) -> f64 {
    (sample_time - kept.last().copied().unwrap_or(0)) as f64
}
