//! Historical rebase data: ingestion, realized loss, and counterfactual
//! replay under alternative (possibly time-varying) policy parameters.
//!
//! Input is UTF-8 CSV with the header `timestamp,price,supply`. Each row is
//! one policy step regardless of the wall-clock spacing between rows.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::gbm::{generate_cap_path, PathSeed};
use crate::model::{InvalidParam, LossBreakdown, LossWeights, MarketParams, PolicyParams, SimPath};
use crate::simulate::{run_path_with, SimError};

pub const HEADER: [&str; 3] = ["timestamp", "price", "supply"];

#[derive(Debug, Error)]
pub enum HistError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp is not after the previous row")]
    Order { line: u64 },
    #[error("line {line}: {field} must be finite and > 0 (got {value})")]
    Value { line: u64, field: &'static str, value: f64 },
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("policy schedule must be non-empty with strictly increasing dates")]
    BadSchedule,
    #[error(transparent)]
    InvalidParam(#[from] InvalidParam),
    #[error("replay failed: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RebaseRecord {
    pub timestamp: DateTime<Utc>,
    pub price: f64,
    pub supply: f64,
}

impl RebaseRecord {
    pub fn market_cap(&self) -> f64 {
        self.price * self.supply
    }
}

/// Accepts RFC 3339, a naive `YYYY-MM-DDTHH:MM:SS[.f]` (taken as UTC), or a
/// bare `YYYY-MM-DD` (midnight UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(Utc.from_utc_datetime(&t));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| Utc.from_utc_datetime(&t))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_positive(raw: &str, line: u64, field: &'static str) -> Result<f64, HistError> {
    let value: f64 = raw.parse().map_err(|_| HistError::Parse {
        line,
        message: format!("{field} {raw:?} is not a decimal number"),
    })?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(HistError::Value { line, field, value });
    }
    Ok(value)
}

/// Parses and validates a history. Line numbers in errors are 1-based and
/// count the header as line 1.
pub fn load_history<R: Read>(input: R) -> Result<Vec<RebaseRecord>, HistError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| HistError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(HEADER) {
        return Err(HistError::Parse {
            line: 1,
            message: format!("header must be exactly `{}`", HEADER.join(",")),
        });
    }

    let mut records: Vec<RebaseRecord> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| HistError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let timestamp = parse_timestamp(&row[0]).ok_or_else(|| HistError::Parse {
            line,
            message: format!("timestamp {:?} is not ISO-8601", &row[0]),
        })?;
        let price = parse_positive(&row[1], line, "price")?;
        let supply = parse_positive(&row[2], line, "supply")?;
        if records.last().is_some_and(|prev| prev.timestamp >= timestamp) {
            return Err(HistError::Order { line });
        }
        records.push(RebaseRecord {
            timestamp,
            price,
            supply,
        });
    }
    Ok(records)
}

pub fn load_history_file(path: impl AsRef<Path>) -> Result<Vec<RebaseRecord>, HistError> {
    load_history(File::open(path)?)
}

pub fn write_history<W: Write>(records: &[RebaseRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for r in records {
        writeln!(out, "{},{},{}", format_timestamp(&r.timestamp), r.price, r.supply)?;
    }
    Ok(())
}

/// Exports a simulated path as a history with evenly spaced timestamps.
pub fn history_from_path(path: &SimPath, start: DateTime<Utc>, spacing: Duration) -> Vec<RebaseRecord> {
    path.price
        .iter()
        .zip(&path.supply)
        .enumerate()
        .map(|(t, (&price, &supply))| RebaseRecord {
            timestamp: start + spacing * t as i32,
            price,
            supply,
        })
        .collect()
}

/// Deviation series realized in a history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedSeries {
    /// dP at t = 0.
    pub initial_d_price: f64,
    /// dP_t for t = 1..=n.
    pub d_price: Vec<f64>,
    /// dS_t for t = 1..=n.
    pub d_supply: Vec<f64>,
    /// Y_t = price_t * supply_t for t = 0..=n.
    pub market_cap: Vec<f64>,
}

pub fn realized_series(records: &[RebaseRecord], target_price: f64) -> Result<RealizedSeries, HistError> {
    if records.len() < 2 {
        return Err(HistError::TooFewRecords(records.len()));
    }
    let dev = |price: f64| (price - target_price) / target_price;
    Ok(RealizedSeries {
        initial_d_price: dev(records[0].price),
        d_price: records[1..].iter().map(|r| dev(r.price)).collect(),
        d_supply: records
            .windows(2)
            .map(|w| (w[1].supply - w[0].supply) / w[0].supply)
            .collect(),
        market_cap: records.iter().map(RebaseRecord::market_cap).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub effective_from: DateTime<Utc>,
    pub policy: PolicyParams,
}

/// Piecewise-constant policy over time. The entry in force at a timestamp is
/// the last one whose `effective_from` is not after it; timestamps before the
/// first entry use the first entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySchedule {
    entries: Vec<ScheduleEntry>,
}

impl PolicySchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self, HistError> {
        if entries.is_empty() || entries.windows(2).any(|w| w[0].effective_from >= w[1].effective_from) {
            return Err(HistError::BadSchedule);
        }
        Ok(Self { entries })
    }

    pub fn constant(policy: PolicyParams) -> Self {
        Self {
            entries: vec![ScheduleEntry {
                effective_from: DateTime::<Utc>::MIN_UTC,
                policy,
            }],
        }
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn policy_at(&self, t: &DateTime<Utc>) -> &PolicyParams {
        let idx = self.entries.partition_point(|e| e.effective_from <= *t);
        &self.entries[idx.saturating_sub(1)].policy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesLoss {
    pub d_price: Vec<f64>,
    pub d_supply: Vec<f64>,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub lambda: f64,
    pub target_price: f64,
    /// Timestamps of steps t = 1..=n, shared by both series.
    pub timestamps: Vec<String>,
    pub historical: SeriesLoss,
    pub counterfactual: Option<SeriesLoss>,
    pub counterfactual_policy: Option<PolicySchedule>,
}

impl ReplayReport {
    /// Columns `t,dP_hist,dS_hist,dP_cf,dS_cf`; counterfactual columns are
    /// empty when no alternative policy was replayed.
    pub fn write_series_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,dP_hist,dS_hist,dP_cf,dS_cf")?;
        for i in 0..self.historical.d_price.len() {
            write!(
                out,
                "{},{},{},",
                i + 1,
                self.historical.d_price[i],
                self.historical.d_supply[i]
            )?;
            match &self.counterfactual {
                Some(cf) => writeln!(out, "{},{}", cf.d_price[i], cf.d_supply[i])?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// Reruns the rule on the history's own market caps, starting from the
/// recorded initial supply, with the schedule's policy at each step.
pub fn replay_path(records: &[RebaseRecord], schedule: &PolicySchedule) -> Result<SimPath, HistError> {
    if records.len() < 2 {
        return Err(HistError::TooFewRecords(records.len()));
    }
    let caps: Vec<f64> = records.iter().map(RebaseRecord::market_cap).collect();
    Ok(run_path_with(&caps, records[0].supply, |t| {
        schedule.policy_at(&records[t].timestamp)
    })?)
}

/// Historical loss, plus the counterfactual loss when a schedule is given.
pub fn replay(
    records: &[RebaseRecord],
    target_price: f64,
    w: LossWeights,
    schedule: Option<&PolicySchedule>,
) -> Result<ReplayReport, HistError> {
    let realized = realized_series(records, target_price)?;
    let historical = SeriesLoss {
        loss: LossBreakdown::from_series(&realized.d_price, &realized.d_supply, w),
        d_price: realized.d_price,
        d_supply: realized.d_supply,
    };
    let counterfactual = schedule
        .map(|s| {
            replay_path(records, s).map(|path| SeriesLoss {
                loss: LossBreakdown::from_series(&path.d_price, &path.d_supply, w),
                d_price: path.d_price,
                d_supply: path.d_supply,
            })
        })
        .transpose()?;
    Ok(ReplayReport {
        lambda: w.lambda(),
        target_price,
        timestamps: records[1..].iter().map(|r| format_timestamp(&r.timestamp)).collect(),
        historical,
        counterfactual,
        counterfactual_policy: schedule.cloned(),
    })
}

/// Replays the history under one fixed alternative policy.
pub fn counterfactual_replay(
    records: &[RebaseRecord],
    p_alt: &PolicyParams,
    w: LossWeights,
) -> Result<ReplayReport, HistError> {
    replay(
        records,
        p_alt.target_price(),
        w,
        Some(&PolicySchedule::constant(*p_alt)),
    )
}

/// Generator settings for the bundled synthetic history: a year of daily
/// rebases with A = 0.05 and B = 30, switching to B = 10 on 2019-10-30.
pub mod synthetic {
    use super::*;

    pub const SEED: u64 = 20_191_030;
    pub const ROWS: usize = 365;
    pub const MU: f64 = 0.0;
    pub const SIGMA: f64 = 0.05;
    pub const INITIAL_CAP: f64 = 100e6;

    pub fn start() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 7, 1, 0, 0, 0).unwrap()
    }

    pub fn schedule() -> PolicySchedule {
        let p = |b| PolicyParams::new(0.05, b, 1.0).expect("valid preset");
        PolicySchedule::new(vec![
            ScheduleEntry {
                effective_from: start(),
                policy: p(30.0),
            },
            ScheduleEntry {
                effective_from: Utc.with_ymd_and_hms(2019, 10, 30, 0, 0, 0).unwrap(),
                policy: p(10.0),
            },
        ])
        .expect("dates increase")
    }

    pub fn market() -> MarketParams {
        MarketParams::new(MU, SIGMA, INITIAL_CAP, ROWS - 1).expect("valid preset")
    }

    /// The generating simulation, from parity.
    pub fn path() -> SimPath {
        let caps = generate_cap_path(&market(), PathSeed::new(SEED, 0));
        let schedule = schedule();
        let stamps: Vec<DateTime<Utc>> = (0..ROWS).map(|t| start() + Duration::days(t as i64)).collect();
        run_path_with(&caps, caps[0] / 1.0, |t| schedule.policy_at(&stamps[t])).expect("B >= 1 never degenerates")
    }

    pub fn history() -> Vec<RebaseRecord> {
        history_from_path(&path(), start(), Duration::days(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::run_path;
    use proptest::prelude::*;

    fn lam(x: f64) -> LossWeights {
        LossWeights::new(x).unwrap()
    }

    #[test]
    fn loads_well_formed_rows() {
        let csv =
            "timestamp,price,supply\n2020-01-01T00:00:00Z,1.0,100\n2020-01-02,1.1,100\n2020-01-03T00:00:00,0.9,105.5\n";
        let r = load_history(csv.as_bytes()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[2].supply, 105.5);
        assert_eq!(format_timestamp(&r[1].timestamp), "2020-01-02T00:00:00Z");
    }

    #[test]
    fn zero_supply_is_a_value_error() {
        let csv = "timestamp,price,supply\n2020-01-01,1.0,100\n2020-01-02,1.0,0\n";
        match load_history(csv.as_bytes()) {
            Err(HistError::Value { line, field, .. }) => assert_eq!((line, field), (3, "supply")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let csv = "timestamp,price,supply\n2020-01-02,1.0,100\n2020-01-02,1.0,100\n";
        assert!(matches!(
            load_history(csv.as_bytes()),
            Err(HistError::Order { line: 3 })
        ));
    }

    #[test]
    fn malformed_rows_report_line() {
        let bad_num = "timestamp,price,supply\n2020-01-01,1.0,100\n2020-01-02,abc,100\n";
        assert!(matches!(
            load_history(bad_num.as_bytes()),
            Err(HistError::Parse { line: 3, .. })
        ));
        let bad_time = "timestamp,price,supply\nyesterday,1.0,100\n";
        assert!(matches!(
            load_history(bad_time.as_bytes()),
            Err(HistError::Parse { line: 2, .. })
        ));
        let thousands = "timestamp,price,supply\n2020-01-01,1.0,1,000\n";
        assert!(matches!(
            load_history(thousands.as_bytes()),
            Err(HistError::Parse { line: 2, .. })
        ));
        let header = "time,price,supply\n";
        assert!(matches!(
            load_history(header.as_bytes()),
            Err(HistError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn constant_history_has_zero_series() {
        let csv = "timestamp,price,supply\n2020-01-01,1,50\n2020-01-02,1,50\n2020-01-03,1,50\n";
        let s = realized_series(&load_history(csv.as_bytes()).unwrap(), 1.0).unwrap();
        assert!(s.d_price.iter().chain(&s.d_supply).all(|&d| d == 0.0));
    }

    #[test]
    fn realized_series_arithmetic() {
        let csv = "timestamp,price,supply\n2020-01-01,1.0,100\n2020-01-02,1.2,104\n";
        let s = realized_series(&load_history(csv.as_bytes()).unwrap(), 1.0).unwrap();
        assert_eq!(s.initial_d_price, 0.0);
        assert!((s.d_price[0] - 0.2).abs() < 1e-12);
        assert!((s.d_supply[0] - 0.04).abs() < 1e-12);
        assert!((s.market_cap[1] - 124.8).abs() < 1e-9);
    }

    #[test]
    fn too_few_records() {
        let csv = "timestamp,price,supply\n2020-01-01,1.0,100\n";
        let r = load_history(csv.as_bytes()).unwrap();
        assert!(matches!(realized_series(&r, 1.0), Err(HistError::TooFewRecords(1))));
    }

    #[test]
    fn schedule_lookup() {
        let s = synthetic::schedule();
        let at = |y, m, d| *s.policy_at(&Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap());
        assert_eq!(at(2019, 6, 1).adjust_divisor(), 30.0);
        assert_eq!(at(2019, 10, 29).adjust_divisor(), 30.0);
        assert_eq!(at(2019, 10, 30).adjust_divisor(), 10.0);
        assert_eq!(at(2020, 6, 1).adjust_divisor(), 10.0);
        assert!(PolicySchedule::new(vec![]).is_err());
    }

    #[test]
    fn generating_schedule_is_a_fixed_point() {
        let records = synthetic::history();
        let report = replay(&records, 1.0, lam(1.0), Some(&synthetic::schedule())).unwrap();
        let cf = report.counterfactual.as_ref().unwrap();
        for (h, c) in report.historical.d_price.iter().zip(&cf.d_price) {
            assert!((h - c).abs() <= 1e-9 * h.abs().max(1e-12));
        }
        let (h, c) = (report.historical.loss.total, cf.loss.total);
        assert!((h - c).abs() <= 1e-9 * h);
    }

    #[test]
    fn smaller_divisor_improves_price_stability() {
        let records = synthetic::history();
        let report = counterfactual_replay(&records, &PolicyParams::new(0.05, 5.0, 1.0).unwrap(), lam(1.0)).unwrap();
        let cf = report.counterfactual.unwrap();
        assert!(cf.loss.price_component < report.historical.loss.price_component);
    }

    #[test]
    fn counterfactual_smoke() {
        let records = synthetic::history();
        let report = counterfactual_replay(&records, &PolicyParams::new(0.05, 10.0, 1.0).unwrap(), lam(1.0)).unwrap();
        assert_eq!(report.timestamps.len(), records.len() - 1);
        assert_eq!(
            report.counterfactual.unwrap().d_price.len(),
            report.historical.d_price.len()
        );
    }

    #[test]
    fn series_csv_without_counterfactual() {
        let csv = "timestamp,price,supply\n2020-01-01,1.0,100\n2020-01-02,1.5,100\n";
        let report = replay(&load_history(csv.as_bytes()).unwrap(), 1.0, lam(1.0), None).unwrap();
        let mut buf = Vec::new();
        report.write_series_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,dP_hist,dS_hist,dP_cf,dS_cf\n1,0.5,0,,\n"
        );
    }

    proptest! {
        #[test]
        fn exported_history_round_trips(
            steps in prop::collection::vec(-0.2f64..0.2, 1..40),
            a in 0.0f64..0.1,
            b in 1.0f64..15.0,
        ) {
            let mut y = 5e7;
            let mut caps = vec![y];
            for r in steps {
                y *= f64::exp(r);
                caps.push(y);
            }
            let path = run_path(&caps, &PolicyParams::new(a, b, 1.0).unwrap()).unwrap();
            let mut buf = Vec::new();
            write_history(&history_from_path(&path, synthetic::start(), Duration::hours(8)), &mut buf).unwrap();
            let back = load_history(buf.as_slice()).unwrap();
            let s = realized_series(&back, 1.0).unwrap();
            prop_assert_eq!(&s.d_price, &path.d_price);
            prop_assert_eq!(&s.d_supply, &path.d_supply);
        }
    }
}
