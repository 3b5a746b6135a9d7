use std::collections::BTreeMap;

use cellplan::ingest::{
    aggregate_hourly, build_load_series, normalize, parse_cdr, read_series, write_series,
    CdrFormat, LoadSeries,
};
use cellplan_testkit::{count_well_formed, distinct_counts, hourly_resum, Event};
use chrono::{DateTime, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T0: i64 = 1_362_355_200; // 2013-03-04T00:00:00Z

fn iso(t: i64) -> String {
    DateTime::from_timestamp(t, 0)
        .unwrap()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

fn random_line(rng: &mut ChaCha8Rng) -> String {
    let t = T0 + rng.random_range(0..2 * 86_400);
    let user = format!("u{}", rng.random_range(0..50));
    let site = format!("s{}", rng.random_range(0..4));
    match rng.random_range(0..100) {
        0 => format!("{user},{site}"),
        1 => format!(",{site},{}", iso(t)),
        2 => format!("{user},{site},2013-13-04T10:00:00Z"),
        3 => format!("{user},{site},2013-04-31T10:00:00Z"),
        4 => format!("{user},{site},yesterday"),
        5 => format!("{user},{site},{},1,2,3", iso(t)),
        6 => format!("{user},{site},{},-4.3,15.2", iso(t)),
        7 => format!("{user},,{}", iso(t)),
        8 => "# a comment".to_string(),
        9 => String::new(),
        _ => format!("{user},{site},{}", iso(t)),
    }
}

#[test]
fn record_count_matches_line_reparse() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text: String = (0..1000).map(|_| random_line(&mut rng) + "\n").collect();
        let format = CdrFormat {
            max_error_fraction: 1.0,
            ..CdrFormat::default()
        };
        let parsed = parse_cdr(text.as_bytes(), &format).unwrap();
        assert_eq!(
            parsed.records.len(),
            count_well_formed(&text, false),
            "seed {seed}"
        );
        assert_eq!(
            parsed.records.len() + parsed.errors.len(),
            parsed.data_lines
        );
    }
}

#[test]
fn malformed_fraction_threshold() {
    let mut text = String::new();
    for i in 0..99 {
        text += &format!("u{i},s1,{}\n", iso(T0 + i));
    }
    text += "broken\n";
    assert!(parse_cdr(text.as_bytes(), &CdrFormat::default()).is_ok());
    text += "broken again\n";
    let err = parse_cdr(text.as_bytes(), &CdrFormat::default()).unwrap_err();
    assert!(matches!(
        err,
        cellplan::Error::TooManyMalformed {
            malformed: 2,
            total: 101,
            ..
        }
    ));
}

#[test]
fn epoch_files_parse_like_iso() {
    let text = format!(
        "# timestamp=epoch\nu1,s1,{}\nu2,s1,{}\n",
        T0 + 600,
        T0 + 610
    );
    let parsed = parse_cdr(text.as_bytes(), &CdrFormat::default()).unwrap();
    assert_eq!(count_well_formed(&text, true), 2);
    let series = build_load_series(&parsed.records);
    assert_eq!(series.values().next().unwrap().bins()[1], 2);
}

fn random_events(rng: &mut ChaCha8Rng, n: usize) -> Vec<Event> {
    (0..n)
        .map(|_| Event {
            user: format!("u{}", rng.random_range(0..40)),
            site: format!("s{}", rng.random_range(0..3)),
            time: T0 + rng.random_range(0..2 * 86_400),
        })
        .collect()
}

fn to_cdr(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| format!("{},{},{}\n", e.user, e.site, iso(e.time)))
        .collect()
}

fn oracle_series(events: &[Event]) -> BTreeMap<(String, NaiveDate), Vec<u32>> {
    distinct_counts(events)
        .into_iter()
        .map(|((site, day), bins)| {
            let date = DateTime::from_timestamp(day * 86_400, 0)
                .unwrap()
                .date_naive();
            ((site, date), bins)
        })
        .collect()
}

#[test]
fn distinct_counts_match_set_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let events = random_events(&mut rng, 1000);
    let parsed = parse_cdr(to_cdr(&events).as_bytes(), &CdrFormat::default()).unwrap();
    let built = build_load_series(&parsed.records);
    let expected = oracle_series(&events);
    assert_eq!(built.len(), expected.len());
    for (key, series) in &built {
        assert_eq!(series.bins(), expected[key].as_slice(), "{key:?}");
    }
}

#[test]
fn series_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let events = random_events(&mut rng, 300);
    let parsed = parse_cdr(to_cdr(&events).as_bytes(), &CdrFormat::default()).unwrap();
    let built = build_load_series(&parsed.records);
    let mut buf = Vec::new();
    write_series(&mut buf, built.values()).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("site_id,date,b0,b1,"));
    let back = read_series(buf.as_slice()).unwrap();
    assert_eq!(back, built.into_values().collect::<Vec<_>>());
}

fn bins_strategy() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..200, 144)
}

proptest! {
    #[test]
    fn hourly_sums_match_resummation(bins in bins_strategy()) {
        let s = LoadSeries::new("s", NaiveDate::from_ymd_opt(2013, 1, 7).unwrap(), bins.clone()).unwrap();
        prop_assert_eq!(s.hourly_sums(), hourly_resum(&bins));
        let p = aggregate_hourly::<f64>(&s);
        prop_assert_eq!(p.values.len(), 24);
    }

    #[test]
    fn normalize_spans_unit_interval(bins in bins_strategy()) {
        let s = LoadSeries::new("s", NaiveDate::from_ymd_opt(2013, 1, 7).unwrap(), bins).unwrap();
        let p = normalize::<f64>(&s);
        if p.degenerate {
            prop_assert!(p.values.iter().all(|&v| v == 0.0));
        } else {
            prop_assert_eq!(p.values.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(p.values.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
            let again = cellplan::ingest::min_max(&p.values).0;
            for (a, b) in again.iter().zip(&p.values) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn hourly_ignores_event_order_within_an_hour(seed in 0u64..1000, hour in 0i64..24) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let events = random_events(&mut rng, 300);
        let slots: Vec<usize> = (0..events.len())
            .filter(|&i| (events[i].time - T0).rem_euclid(86_400) / 3600 == hour)
            .collect();
        let mut moved = slots.clone();
        moved.shuffle(&mut rng);
        let mut permuted = events.clone();
        for (&to, &from) in slots.iter().zip(&moved) {
            permuted[to] = events[from].clone();
        }
        let hourly = |ev: &[Event]| -> Vec<Vec<f64>> {
            let parsed = parse_cdr(to_cdr(ev).as_bytes(), &CdrFormat::default()).unwrap();
            build_load_series(&parsed.records).values().map(|s| aggregate_hourly::<f64>(s).values).collect()
        };
        prop_assert_eq!(hourly(&events), hourly(&permuted));
    }

    #[test]
    fn ingestion_is_deterministic(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = to_cdr(&random_events(&mut rng, 150));
        let a = build_load_series(&parse_cdr(text.as_bytes(), &CdrFormat::default()).unwrap().records);
        let b = build_load_series(&parse_cdr(text.as_bytes(), &CdrFormat::default()).unwrap().records);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn load_never_exceeds_distinct_pairs(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let events = random_events(&mut rng, 200);
        let parsed = parse_cdr(to_cdr(&events).as_bytes(), &CdrFormat::default()).unwrap();
        for ((site, date), s) in build_load_series(&parsed.records) {
            let pairs: std::collections::BTreeSet<(String, i64)> = events
                .iter()
                .filter(|e| e.site == site && DateTime::from_timestamp(e.time, 0).unwrap().date_naive() == date)
                .map(|e| (e.user.clone(), e.time / 600))
                .collect();
            prop_assert!(s.bins().iter().map(|&b| b as usize).sum::<usize>() <= pairs.len());
        }
    }
}
