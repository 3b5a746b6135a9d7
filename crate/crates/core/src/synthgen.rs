//! Seeded synthetic stand-ins for real CDR traces: three class templates,
//! noisy daily series drawn from them, and CDR text whose ingestion
//! reproduces a target series exactly.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LoadSeries, BINS_PER_DAY};
use crate::svc::ClassLabel;

/// First day used when no start date is given: a Monday in ISO week 2.
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 1, 7).expect("valid date")
}

/// Parametric daily shape: a constant base plus a circular Gaussian bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub base: f64,
    pub amplitude: f64,
    pub center_hour: f64,
    pub width_hours: f64,
}

impl ShapeParams {
    /// Intensity of each 10-minute bin, sampled at the bin midpoint.
    pub fn render(&self) -> Vec<f64> {
        (0..BINS_PER_DAY)
            .map(|b| {
                let hour = (b as f64 + 0.5) / 6.0;
                let mut d = (hour - self.center_hour).abs() % 24.0;
                d = d.min(24.0 - d);
                let z = d / self.width_hours;
                self.base + self.amplitude * (-0.5 * z * z).exp()
            })
            .collect()
    }
}

/// Template of one load class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub class: ClassLabel,
    /// Base intensities in [0, 1], one per 10-minute bin.
    pub shape: Vec<f64>,
    /// Standard deviation of the multiplicative Gaussian noise.
    pub noise_sigma: f64,
    /// Peak user count.
    pub volume: f64,
}

/// Key-value template configuration, one table per class.
///
/// ```toml
/// [class1]
/// volume = 60.0
/// noise_sigma = 0.15
/// base = 0.85
/// amplitude = 0.15
/// center_hour = 17.0
/// width_hours = 3.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateConfig {
    pub class1: TemplateParams,
    pub class2: TemplateParams,
    pub class3: TemplateParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateParams {
    pub volume: f64,
    pub noise_sigma: f64,
    #[serde(flatten)]
    pub shape: ShapeParams,
}

pub const DEFAULT_NOISE_SIGMA: f64 = 0.15;

impl Default for TemplateConfig {
    fn default() -> Self {
        let p = |volume, base, amplitude, center_hour, width_hours| TemplateParams {
            volume,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            shape: ShapeParams {
                base,
                amplitude,
                center_hour,
                width_hours,
            },
        };
        TemplateConfig {
            class1: p(60.0, 0.85, 0.15, 17.0, 3.0),
            class2: p(80.0, 0.1, 0.9, 11.0, 1.5),
            class3: p(70.0, 0.1, 0.9, 23.0, 2.5),
        }
    }
}

impl TemplateConfig {
    pub fn with_noise(mut self, sigma: f64) -> Self {
        for p in [&mut self.class1, &mut self.class2, &mut self.class3] {
            p.noise_sigma = sigma;
        }
        self
    }

    pub fn template(&self, class: ClassLabel) -> ClassTemplate {
        let p = match class {
            ClassLabel::AlwaysLoaded => &self.class1,
            ClassLabel::MorningPeak => &self.class2,
            ClassLabel::EveningPeak => &self.class3,
        };
        let raw = p.shape.render();
        let peak = raw.iter().copied().fold(0.0, f64::max);
        ClassTemplate {
            class,
            shape: raw.iter().map(|v| v / peak).collect(),
            noise_sigma: p.noise_sigma,
            volume: p.volume,
        }
    }

    pub fn templates(&self) -> [ClassTemplate; 3] {
        ClassLabel::ALL.map(|c| self.template(c))
    }
}

impl ClassTemplate {
    /// `round(volume · shape · (1 + noise))`, noise clamped at −1.
    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<u32> {
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("finite sigma");
        self.shape
            .iter()
            .map(|&s| {
                let n = if self.noise_sigma > 0.0 {
                    noise.sample(rng).max(-1.0)
                } else {
                    0.0
                };
                (self.volume * s * (1.0 + n)).round().max(0.0) as u32
            })
            .collect()
    }

    pub fn series<R: Rng>(&self, site_id: &str, date: NaiveDate, rng: &mut R) -> LoadSeries {
        LoadSeries::new(site_id, date, self.draw(rng)).expect("144 bins")
    }
}

/// `count` labeled single-day series from one template, named
/// `c{class}-{i:04}`.
pub fn gen_profiles(
    template: &ClassTemplate,
    count: usize,
    seed: u64,
) -> Vec<(LoadSeries, ClassLabel)> {
    gen_profiles_on(template, count, default_start(), seed)
}

pub fn gen_profiles_on(
    template: &ClassTemplate,
    count: usize,
    date: NaiveDate,
    seed: u64,
) -> Vec<(LoadSeries, ClassLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let site = format!("c{}-{i:04}", template.class.id());
            (template.series(&site, date, &mut rng), template.class)
        })
        .collect()
}

/// Class sizes for `total` stations in equal thirds (remainder to the lower
/// classes).
pub fn class_counts(total: usize) -> [usize; 3] {
    std::array::from_fn(|k| total / 3 + usize::from(k < total % 3))
}

/// A labeled station set mixing all three classes in equal thirds. Each class
/// draws from its own stream derived from `seed`.
pub fn gen_labeled_set(
    config: &TemplateConfig,
    total: usize,
    seed: u64,
) -> Vec<(LoadSeries, ClassLabel)> {
    let counts = class_counts(total);
    config
        .templates()
        .iter()
        .zip(counts)
        .flat_map(|(t, n)| {
            gen_profiles(
                t,
                n,
                seed.wrapping_mul(31).wrapping_add(t.class.id() as u64),
            )
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SiteSpec {
    pub site_id: String,
    pub template: ClassTemplate,
}

/// Write CDR lines (`user,site,ISO-8601`) whose ingestion yields exactly the
/// returned series.
///
/// Each bin's target count is capped at `users_per_site`; that many distinct
/// users from the site's pool each emit one to three events inside the bin.
pub fn gen_cdr<W: Write>(
    out: &mut W,
    sites: &[SiteSpec],
    start: NaiveDate,
    days: usize,
    users_per_site: usize,
    seed: u64,
) -> Result<Vec<LoadSeries>> {
    if users_per_site == 0 && days > 0 && !sites.is_empty() {
        return Err(Error::InvalidParameter(
            "users_per_site must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intended = Vec::with_capacity(sites.len() * days);
    for d in 0..days {
        let date = start + Days::new(d as u64);
        for site in sites {
            let mut bins = site.template.draw(&mut rng);
            for b in bins.iter_mut() {
                *b = (*b).min(users_per_site as u32);
            }
            let series = LoadSeries::new(&site.site_id, date, bins)?;
            write_events(out, &series, users_per_site, &mut rng)?;
            intended.push(series);
        }
    }
    Ok(intended)
}

/// CDR lines for ready-made series, with every bin capped at
/// `users_per_site`. Returns the capped series that ingestion reproduces.
pub fn cdr_for_series<W: Write>(
    out: &mut W,
    series: &[LoadSeries],
    users_per_site: usize,
    seed: u64,
) -> Result<Vec<LoadSeries>> {
    if users_per_site == 0 && !series.is_empty() {
        return Err(Error::InvalidParameter(
            "users_per_site must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    series
        .iter()
        .map(|s| {
            let bins = s
                .bins()
                .iter()
                .map(|&b| b.min(users_per_site as u32))
                .collect();
            let capped = LoadSeries::new(&s.site_id, s.date, bins)?;
            write_events(out, &capped, users_per_site, &mut rng)?;
            Ok(capped)
        })
        .collect()
}

/// CDR lines reproducing an existing series.
pub fn write_events<W: Write, R: Rng>(
    out: &mut W,
    series: &LoadSeries,
    users_per_site: usize,
    rng: &mut R,
) -> Result<()> {
    let midnight = series
        .date
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc();
    for (b, &count) in series.bins().iter().enumerate() {
        let count = count as usize;
        if count > users_per_site {
            return Err(Error::InvalidParameter(format!(
                "bin {b} needs {count} users, pool has {users_per_site}"
            )));
        }
        let mut events = Vec::new();
        for u in sample(rng, users_per_site, count) {
            for _ in 0..rng.random_range(1..=3) {
                events.push((rng.random_range(0..600u32), u));
            }
        }
        events.sort_unstable();
        for (offset, u) in events {
            let t = midnight + chrono::Duration::seconds((b * 600) as i64 + offset as i64);
            writeln!(
                out,
                "u{}-{u},{},{}",
                series.site_id,
                series.site_id,
                t.format("%Y-%m-%dT%H:%M:%SZ")
            )?;
        }
    }
    Ok(())
}

/// Classes by ISO weekday, Monday first.
pub type WeekdayClassMap = [ClassLabel; 7];

/// Weekdays class 2, Sunday class 1.
pub const WORKWEEK_MAP: WeekdayClassMap = [
    ClassLabel::MorningPeak,
    ClassLabel::MorningPeak,
    ClassLabel::MorningPeak,
    ClassLabel::MorningPeak,
    ClassLabel::MorningPeak,
    ClassLabel::MorningPeak,
    ClassLabel::AlwaysLoaded,
];

/// `weeks` consecutive weeks of one site starting on Monday `start`, each day
/// drawn from its weekday's template.
pub fn gen_weekly(
    site_id: &str,
    map: &WeekdayClassMap,
    config: &TemplateConfig,
    start: NaiveDate,
    weeks: usize,
    seed: u64,
) -> Result<Vec<(LoadSeries, ClassLabel)>> {
    if start.weekday() != Weekday::Mon {
        return Err(Error::InvalidParameter(format!(
            "weekly series must start on a Monday, got {start}"
        )));
    }
    let templates: BTreeMap<ClassLabel, ClassTemplate> = ClassLabel::ALL
        .iter()
        .map(|&c| (c, config.template(c)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..weeks * 7)
        .map(|d| {
            let class = map[d % 7];
            let date = start + Days::new(d as u64);
            (templates[&class].series(site_id, date, &mut rng), class)
        })
        .collect())
}
