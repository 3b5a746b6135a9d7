//! Small delimited files exchanged between subcommands.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context};
use cellplan::ingest::{min_max, Profile};
use cellplan::{ClassLabel, Granularity, BINS_PER_DAY};
use chrono::NaiveDate;

pub type DayKey = (String, NaiveDate);

fn parse_date(s: &str) -> anyhow::Result<NaiveDate> {
    s.trim().parse().with_context(|| format!("bad date {s:?}"))
}

/// `site_id,date,class`
pub fn write_classes(rows: &BTreeMap<DayKey, ClassLabel>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["site_id", "date", "class"])?;
    for ((site, date), class) in rows {
        w.write_record([site.clone(), date.to_string(), class.to_string()])?;
    }
    Ok(w.into_inner()?)
}

pub fn read_classes(bytes: &[u8]) -> anyhow::Result<BTreeMap<DayKey, ClassLabel>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            bail!(cellplan::Error::InvalidInput(format!(
                "class rows need 3 fields, got {}",
                rec.len()
            )));
        }
        let key = (rec[0].to_owned(), parse_date(&rec[1])?);
        if out
            .insert(key.clone(), rec[2].parse::<ClassLabel>()?)
            .is_some()
        {
            bail!(cellplan::Error::InvalidInput(format!(
                "duplicate label for {} {}",
                key.0, key.1
            )));
        }
    }
    Ok(out)
}

/// Forecasts grouped by site and day, indexed by interval − 1.
pub fn read_predictions(bytes: &[u8]) -> anyhow::Result<BTreeMap<DayKey, Vec<f64>>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut cells: BTreeMap<DayKey, BTreeMap<usize, f64>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            bail!(cellplan::Error::InvalidInput(format!(
                "prediction rows need 5 fields, got {}",
                rec.len()
            )));
        }
        let k: usize = rec[2]
            .parse()
            .with_context(|| format!("bad interval {:?}", &rec[2]))?;
        let v: f64 = rec[3]
            .parse()
            .with_context(|| format!("bad prediction {:?}", &rec[3]))?;
        cells
            .entry((rec[0].to_owned(), parse_date(&rec[1])?))
            .or_default()
            .insert(k, v);
    }
    cells
        .into_iter()
        .map(|(key, bins)| {
            if !bins.keys().copied().eq(1..=BINS_PER_DAY) {
                return Err(anyhow!(cellplan::Error::InvalidInput(format!(
                    "forecast for {} {} does not cover intervals 1..={BINS_PER_DAY}",
                    key.0, key.1
                ))));
            }
            Ok((key, bins.into_values().collect()))
        })
        .collect()
}

/// Re-express a profile at a coarser granularity. Min-max normalization is
/// invariant under the affine map from raw to normalized bins, so summing
/// normalized bins and normalizing again equals profiling hourly raw sums.
pub fn regranulate(p: &Profile<f64>, target: Granularity) -> anyhow::Result<Profile<f64>> {
    match (p.granularity, target) {
        (a, b) if a == b => Ok(p.clone()),
        (Granularity::TenMin, Granularity::Hourly) => {
            let sums: Vec<f64> = p
                .values
                .chunks(BINS_PER_DAY / 24)
                .map(|c| c.iter().sum())
                .collect();
            let (values, degenerate) = min_max(&sums);
            Ok(Profile::new(
                &p.site_id, p.date, values, target, degenerate,
            )?)
        }
        _ => bail!(cellplan::Error::DimensionMismatch {
            expected: target.len(),
            found: p.values.len(),
        }),
    }
}
