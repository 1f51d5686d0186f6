//! Synthetic cycle/period series.
//!
//! Each record draws a cycle length and a period length as
//! `mean + std * z`, `z ~ N(0, 1)`, rounds to whole days and redraws until the
//! value lands inside the configured bounds (a discretized truncated normal).
//! Where the period sits inside its cycle is fixed by the [`Anchor`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::stats;

pub const DEFAULT_N_CYCLES: usize = 120;
pub const DEFAULT_SEED: u64 = 1;
/// Draw budget per record and channel before the bounds are declared unreachable.
pub const MAX_DRAWS: usize = 10_000;

const CYCLE_ENVELOPE: (u32, u32) = (21, 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::Case1, CaseId::Case2, CaseId::Case3];

    pub fn number(self) -> u8 {
        match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
            CaseId::Case3 => 3,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case{}", self.number())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches("case") {
            "1" => Ok(CaseId::Case1),
            "2" => Ok(CaseId::Case2),
            "3" => Ok(CaseId::Case3),
            _ => Err(Error::InvalidConfig(format!("unknown case `{s}`, expected 1, 2 or 3"))),
        }
    }
}

/// Placement of the bleeding phase inside its cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Anchor {
    CycleStart,
    CycleEnd,
    MidCycle,
}

impl Anchor {
    pub fn as_str(self) -> &'static str {
        match self {
            Anchor::CycleStart => "cycle_start",
            Anchor::CycleEnd => "cycle_end",
            Anchor::MidCycle => "mid_cycle",
        }
    }

    /// 1-based day of the cycle on which the period starts.
    pub fn period_start_day(self, cycle_length: u32, period_length: u32) -> u32 {
        let last_valid = cycle_length - period_length + 1;
        match self {
            Anchor::CycleStart => 1,
            Anchor::CycleEnd => last_valid,
            Anchor::MidCycle => {
                let day = (cycle_length / 2) as i64 - (period_length / 2) as i64;
                day.clamp(1, last_valid as i64) as u32
            }
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Anchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cycle_start" => Ok(Anchor::CycleStart),
            "cycle_end" => Ok(Anchor::CycleEnd),
            "mid_cycle" => Ok(Anchor::MidCycle),
            other => Err(Error::InvalidConfig(format!("unknown anchor `{other}`"))),
        }
    }
}

/// Inclusive interval of whole days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DayBounds {
    pub lo: u32,
    pub hi: u32,
}

impl DayBounds {
    pub fn new(lo: u32, hi: u32) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: i64) -> bool {
        v >= self.lo as i64 && v <= self.hi as i64
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo as f64 + self.hi as f64) / 2.0
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub cycle_mean: f64,
    pub cycle_std: f64,
    pub period_mean: f64,
    pub period_std: f64,
    pub cycle_bounds: DayBounds,
    pub period_bounds: DayBounds,
    pub anchor: Anchor,
    pub n_cycles: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn with_n_cycles(mut self, n_cycles: usize) -> Self {
        self.n_cycles = n_cycles;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("cycle_mean", self.cycle_mean),
            ("cycle_std", self.cycle_std),
            ("period_mean", self.period_mean),
            ("period_std", self.period_std),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.cycle_std < 0.0 || self.period_std < 0.0 {
            return bad("standard deviations must be non-negative".into());
        }
        if self.cycle_bounds.lo > self.cycle_bounds.hi || self.period_bounds.lo > self.period_bounds.hi {
            return bad("bounds must satisfy lo <= hi".into());
        }
        if self.period_bounds.lo < 1 {
            return bad("period_bounds.lo must be at least 1".into());
        }
        if self.period_bounds.hi >= self.cycle_bounds.lo {
            return bad(format!(
                "period_bounds.hi ({}) must be below cycle_bounds.lo ({})",
                self.period_bounds.hi, self.cycle_bounds.lo
            ));
        }
        if self.cycle_bounds.lo < CYCLE_ENVELOPE.0 || self.cycle_bounds.hi > CYCLE_ENVELOPE.1 {
            return bad(format!(
                "cycle_bounds must lie within [{}, {}]",
                CYCLE_ENVELOPE.0, CYCLE_ENVELOPE.1
            ));
        }
        if self.n_cycles == 0 {
            return bad("n_cycles must be positive".into());
        }
        Ok(())
    }

    /// Flat `key=value` text, one field per line, LF endings.
    pub fn to_kv(&self) -> String {
        format!(
            "cycle_mean={}\ncycle_std={}\nperiod_mean={}\nperiod_std={}\n\
             cycle_bounds={},{}\nperiod_bounds={},{}\nanchor={}\nn_cycles={}\nseed={}\n",
            self.cycle_mean,
            self.cycle_std,
            self.period_mean,
            self.period_std,
            self.cycle_bounds.lo,
            self.cycle_bounds.hi,
            self.period_bounds.lo,
            self.period_bounds.hi,
            self.anchor,
            self.n_cycles,
            self.seed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let kv = crate::kv::KvMap::parse(text)?;
        let bounds = |key: &str| -> Result<DayBounds> {
            let v: Vec<u32> = kv.list(key)?;
            match v.as_slice() {
                [lo, hi] => Ok(DayBounds::new(*lo, *hi)),
                _ => Err(kv.field_error(key, "expected `lo,hi`")),
            }
        };
        let config = GeneratorConfig {
            cycle_mean: kv.get("cycle_mean")?,
            cycle_std: kv.get("cycle_std")?,
            period_mean: kv.get("period_mean")?,
            period_std: kv.get("period_std")?,
            cycle_bounds: bounds("cycle_bounds")?,
            period_bounds: bounds("period_bounds")?,
            anchor: kv.get("anchor")?,
            n_cycles: kv.get("n_cycles")?,
            seed: kv.get("seed")?,
        };
        config.validate()?;
        Ok(config)
    }

    /// The case whose bounds, anchor and moments this config carries, if any.
    pub fn matching_case(&self) -> Option<CaseId> {
        CaseId::ALL.into_iter().find(|&case| {
            let p = case_preset(case);
            p.cycle_bounds == self.cycle_bounds
                && p.period_bounds == self.period_bounds
                && p.anchor == self.anchor
                && p.cycle_mean == self.cycle_mean
                && p.cycle_std == self.cycle_std
                && p.period_mean == self.period_mean
                && p.period_std == self.period_std
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CycleRecord {
    pub cycle_length: u32,
    pub period_length: u32,
    pub period_start_day: u32,
}

impl CycleRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.period_length < 1 || self.period_length >= self.cycle_length {
            return Err(format!(
                "period_length {} must be in [1, cycle_length {})",
                self.period_length, self.cycle_length
            ));
        }
        let last_valid = self.cycle_length - self.period_length + 1;
        if self.period_start_day < 1 || self.period_start_day > last_valid {
            return Err(format!(
                "period_start_day {} must be in [1, {last_valid}]",
                self.period_start_day
            ));
        }
        Ok(())
    }

    pub fn as_pair(&self) -> [f64; 2] {
        [self.cycle_length as f64, self.period_length as f64]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Generated(GeneratorConfig),
    External,
}

/// Ordered, non-empty sequence of validated cycle records.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSeries {
    records: Vec<CycleRecord>,
    provenance: Provenance,
}

pub const CSV_HEADER: &str = "index,cycle_length,period_length,period_start_day";

impl CycleSeries {
    pub fn new(records: Vec<CycleRecord>, provenance: Provenance) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("cycle series"));
        }
        for (index, r) in records.iter().enumerate() {
            r.validate().map_err(|reason| Error::InvalidRecord { index, reason })?;
        }
        Ok(Self { records, provenance })
    }

    /// Builds an external series from (cycle, period) pairs with the period
    /// anchored at the cycle start.
    pub fn from_lengths(pairs: &[(u32, u32)]) -> Result<Self> {
        let records = pairs
            .iter()
            .map(|&(cycle_length, period_length)| CycleRecord {
                cycle_length,
                period_length,
                period_start_day: 1,
            })
            .collect();
        Self::new(records, Provenance::External)
    }

    pub fn records(&self) -> &[CycleRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cycle_lengths(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cycle_length as f64).collect()
    }

    pub fn period_lengths(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.period_length as f64).collect()
    }

    /// `(cycle, period)` pairs in days, the form every forecaster consumes.
    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.records.iter().map(CycleRecord::as_pair).collect()
    }

    /// First `n` records as a new series with the same provenance.
    pub fn head(&self, n: usize) -> Result<Self> {
        Self::new(self.records[..n.min(self.len())].to_vec(), self.provenance.clone())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                r.cycle_length, r.period_length, r.period_start_day
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end_matches('\r') == CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    line: 1,
                    field: "header".into(),
                    reason: format!("expected `{CSV_HEADER}`, found `{header}`"),
                })
            }
            None => return Err(Error::EmptyInput("series CSV")),
        }
        let names = ["index", "cycle_length", "period_length", "period_start_day"];
        let mut records = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: line_no,
                    field: "row".into(),
                    reason: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            let mut values = [0u32; 4];
            for (k, (raw, name)) in fields.iter().zip(names).enumerate() {
                values[k] = raw.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    field: name.into(),
                    reason: format!("`{raw}` is not a non-negative integer"),
                })?;
            }
            let record = CycleRecord {
                cycle_length: values[1],
                period_length: values[2],
                period_start_day: values[3],
            };
            record.validate().map_err(|reason| Error::Parse {
                line: line_no,
                field: "record".into(),
                reason,
            })?;
            records.push(record);
        }
        Self::new(records, Provenance::External)
    }
}

/// Bounds, anchor and moments for one of the three regularity regimes.
///
/// Means are the interval midpoints and standard deviations are one sixth of
/// the interval width.
pub fn case_preset(case: CaseId) -> GeneratorConfig {
    let (cycle, period, anchor) = match case {
        CaseId::Case1 => (DayBounds::new(28, 30), DayBounds::new(5, 5), Anchor::CycleStart),
        CaseId::Case2 => (DayBounds::new(28, 35), DayBounds::new(5, 6), Anchor::CycleEnd),
        CaseId::Case3 => (DayBounds::new(28, 49), DayBounds::new(4, 8), Anchor::MidCycle),
    };
    GeneratorConfig {
        cycle_mean: cycle.midpoint(),
        cycle_std: cycle.width() / 6.0,
        period_mean: period.midpoint(),
        period_std: period.width() / 6.0,
        cycle_bounds: cycle,
        period_bounds: period,
        anchor,
        n_cycles: DEFAULT_N_CYCLES,
        seed: DEFAULT_SEED,
    }
}

fn draw_days(
    rng: &mut SeededRng,
    mean: f64,
    std: f64,
    bounds: DayBounds,
    channel: &'static str,
) -> Result<u32> {
    for _ in 0..MAX_DRAWS {
        let v = (mean + std * rng.standard_normal()).round();
        if v.is_finite() && bounds.contains(v as i64) {
            return Ok(v as u32);
        }
    }
    Err(Error::DistributionInfeasible {
        channel,
        bounds: (bounds.lo, bounds.hi),
        draws: MAX_DRAWS,
    })
}

pub fn generate(config: &GeneratorConfig) -> Result<CycleSeries> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let mut records = Vec::with_capacity(config.n_cycles);
    for _ in 0..config.n_cycles {
        let cycle_length = draw_days(
            &mut rng,
            config.cycle_mean,
            config.cycle_std,
            config.cycle_bounds,
            "cycle",
        )?;
        let period_length = draw_days(
            &mut rng,
            config.period_mean,
            config.period_std,
            config.period_bounds,
            "period",
        )?;
        records.push(CycleRecord {
            cycle_length,
            period_length,
            period_start_day: config.anchor.period_start_day(cycle_length, period_length),
        });
    }
    CycleSeries::new(records, Provenance::Generated(config.clone()))
}

/// Moments and order statistics of one channel.
///
/// `std` is the population standard deviation; quartiles use midpoint
/// interpolation between the two bracketing order statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl ChannelSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("channel values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            mean: stats::mean(values),
            std: stats::population_std(values),
            min: sorted[0],
            q1: stats::quantile_midpoint(&sorted, 0.25),
            median: stats::quantile_midpoint(&sorted, 0.5),
            q3: stats::quantile_midpoint(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSummary {
    pub cycle: ChannelSummary,
    pub period: ChannelSummary,
}

pub fn summarize(series: &CycleSeries) -> Result<SeriesSummary> {
    Ok(SeriesSummary {
        cycle: ChannelSummary::of(&series.cycle_lengths())?,
        period: ChannelSummary::of(&series.period_lengths())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_config(n: usize) -> GeneratorConfig {
        GeneratorConfig {
            cycle_mean: 29.0,
            cycle_std: 0.0,
            period_mean: 5.0,
            period_std: 0.0,
            cycle_bounds: DayBounds::new(28, 30),
            period_bounds: DayBounds::new(5, 5),
            anchor: Anchor::CycleStart,
            n_cycles: n,
            seed: 0,
        }
    }

    #[test]
    fn presets_match_case_definitions() {
        let c1 = case_preset(CaseId::Case1);
        assert_eq!(c1.cycle_bounds, DayBounds::new(28, 30));
        assert_eq!(c1.period_bounds, DayBounds::new(5, 5));
        assert_eq!(c1.anchor, Anchor::CycleStart);

        let c2 = case_preset(CaseId::Case2);
        assert_eq!(c2.cycle_bounds, DayBounds::new(28, 35));
        assert_eq!(c2.period_bounds, DayBounds::new(5, 6));
        assert_eq!(c2.anchor, Anchor::CycleEnd);
        assert_eq!(c2.cycle_mean, 31.5);
        assert!((c2.cycle_std - 7.0 / 6.0).abs() < 1e-15);

        let c3 = case_preset(CaseId::Case3);
        assert_eq!(c3.cycle_bounds, DayBounds::new(28, 49));
        assert_eq!(c3.period_bounds, DayBounds::new(4, 8));
        assert_eq!(c3.anchor, Anchor::MidCycle);
        for case in CaseId::ALL {
            case_preset(case).validate().unwrap();
            assert_eq!(case_preset(case).matching_case(), Some(case));
        }
    }

    #[test]
    fn zero_noise_is_degenerate() {
        let series = generate(&flat_config(4)).unwrap();
        assert_eq!(series.len(), 4);
        for r in series.records() {
            assert_eq!((r.cycle_length, r.period_length, r.period_start_day), (29, 5, 1));
        }
    }

    #[test]
    fn case1_bounds_hold() {
        let series = generate(&case_preset(CaseId::Case1).with_n_cycles(100).with_seed(7)).unwrap();
        for r in series.records() {
            assert!((28..=30).contains(&r.cycle_length));
            assert_eq!(r.period_length, 5);
            assert_eq!(r.period_start_day, 1);
        }
    }

    #[test]
    fn anchors_place_period() {
        assert_eq!(Anchor::CycleStart.period_start_day(30, 5), 1);
        assert_eq!(Anchor::CycleEnd.period_start_day(30, 5), 26);
        assert_eq!(Anchor::MidCycle.period_start_day(30, 5), 13);
        assert_eq!(Anchor::MidCycle.period_start_day(29, 6), 11);
    }

    #[test]
    fn unreachable_bounds_are_infeasible() {
        let mut config = flat_config(3);
        config.cycle_mean = 45.0;
        let err = generate(&config).unwrap_err();
        assert!(matches!(err, Error::DistributionInfeasible { channel: "cycle", .. }));
    }

    #[test]
    fn config_validation() {
        let mut c = flat_config(0);
        assert!(c.validate().is_err());
        c.n_cycles = 3;
        c.period_bounds = DayBounds::new(5, 28);
        assert!(c.validate().is_err());
        c.period_bounds = DayBounds::new(5, 5);
        c.cycle_bounds = DayBounds::new(20, 30);
        assert!(c.validate().is_err());
        c.cycle_bounds = DayBounds::new(28, 30);
        c.cycle_std = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_kv_round_trip() {
        let config = case_preset(CaseId::Case2).with_seed(99).with_n_cycles(17);
        let text = config.to_kv();
        assert!(text.starts_with("cycle_mean=31.5\n"));
        assert!(text.contains("\ncycle_bounds=28,35\n"));
        assert!(text.contains("\nanchor=cycle_end\n"));
        assert_eq!(GeneratorConfig::from_kv(&text).unwrap(), config);
    }

    #[test]
    fn csv_round_trip_and_format() {
        let series = generate(&case_preset(CaseId::Case3).with_n_cycles(5).with_seed(2)).unwrap();
        let csv = series.to_csv();
        assert!(csv.starts_with("index,cycle_length,period_length,period_start_day\n0,"));
        assert!(!csv.contains('\r'));
        assert!(csv.lines().all(|l| !l.ends_with(',')));
        let back = CycleSeries::from_csv(&csv).unwrap();
        assert_eq!(back.records(), series.records());
    }

    #[test]
    fn csv_errors_name_row_and_field() {
        let bad = "index,cycle_length,period_length,period_start_day\n0,29,5,1\n1,x,5,1\n";
        match CycleSeries::from_csv(bad).unwrap_err() {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "cycle_length");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(CycleSeries::from_csv("a,b\n").is_err());
        let invalid = "index,cycle_length,period_length,period_start_day\n0,29,30,1\n";
        assert!(CycleSeries::from_csv(invalid).is_err());
    }

    #[test]
    fn summary_of_constant_series() {
        let series = CycleSeries::from_lengths(&[(29, 5); 4]).unwrap();
        let s = summarize(&series).unwrap();
        for (ch, v) in [(s.cycle, 29.0), (s.period, 5.0)] {
            assert_eq!(ch.mean, v);
            assert_eq!(ch.std, 0.0);
            assert_eq!([ch.min, ch.q1, ch.median, ch.q3, ch.max], [v; 5]);
        }
    }

    #[test]
    fn summary_arithmetic() {
        let series = CycleSeries::from_lengths(&[(28, 5), (29, 5), (30, 5), (31, 5)]).unwrap();
        let s = summarize(&series).unwrap().cycle;
        assert_eq!(s.mean, 29.5);
        assert_eq!(s.min, 28.0);
        assert_eq!(s.max, 31.0);
        // midpoint convention: position 0.75 -> (28 + 29) / 2
        assert_eq!(s.q1, 28.5);
        assert_eq!(s.median, 29.5);
        assert_eq!(s.q3, 30.5);
    }

    #[test]
    fn summary_rejects_empty() {
        assert!(matches!(ChannelSummary::of(&[]), Err(Error::EmptyInput(_))));
        assert!(CycleSeries::new(vec![], Provenance::External).is_err());
    }

    #[test]
    fn case3_sample_within_bounds() {
        let series = generate(&case_preset(CaseId::Case3).with_n_cycles(1000).with_seed(1)).unwrap();
        let s = summarize(&series).unwrap();
        assert!(s.cycle.min >= 28.0 && s.cycle.max <= 49.0);
        assert!(s.period.min >= 4.0 && s.period.max <= 8.0);
    }
}
