//! One-minute bid/ask bars: parsing, daily session slicing, normalization and a
//! synthetic generator.
//!
//! Bar files are delimited text with the header
//! `timestamp,bid_open,bid_high,bid_low,bid_close,ask_open,ask_high,ask_low,ask_close,bid_volume,ask_volume`
//! and timestamps such as `2021-06-03T14:05Z` (UTC, minute resolution).

use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal};

use crate::error::{Error, Result};
use crate::par;

pub const MINUTES_PER_SESSION: usize = 1440;

/// Trading days per year used for annualization and volatility scaling.
pub const TRADING_DAYS_PER_YEAR: f64 = 260.0;

pub const BAR_COLUMNS: [&str; 11] = [
    "timestamp",
    "bid_open",
    "bid_high",
    "bid_low",
    "bid_close",
    "ask_open",
    "ask_high",
    "ask_low",
    "ask_close",
    "bid_volume",
    "ask_volume",
];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%MZ";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ohlc {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl Ohlc {
    pub fn flat(price: f64) -> Self {
        Ohlc {
            open: price,
            high: price,
            low: price,
            close: price,
        }
    }

    fn check(&self, side: &str) -> std::result::Result<(), String> {
        let all = [self.open, self.high, self.low, self.close];
        if all.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(format!("{side} prices must be positive and finite"));
        }
        if !(self.low <= self.open && self.open <= self.high && self.low <= self.close && self.close <= self.high) {
            return Err(format!("{side} prices violate low <= open, close <= high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawBar {
    /// Minute start, UTC.
    pub timestamp: NaiveDateTime,
    pub bid: Ohlc,
    pub ask: Ohlc,
    pub bid_volume: f64,
    pub ask_volume: f64,
}

impl RawBar {
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.bid.check("bid")?;
        self.ask.check("ask")?;
        if self.ask.close < self.bid.close {
            return Err(format!(
                "crossed quote: bid_close {} > ask_close {}",
                self.bid.close, self.ask.close
            ));
        }
        for v in [self.bid_volume, self.ask_volume] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("volumes must be nonnegative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn mid_close(&self) -> f64 {
        0.5 * (self.bid.close + self.ask.close)
    }

    /// Zero-volume bar that holds this bar's closing quotes at `timestamp`.
    fn carried_forward(&self, timestamp: NaiveDateTime) -> RawBar {
        RawBar {
            timestamp,
            bid: Ohlc::flat(self.bid.close),
            ask: Ohlc::flat(self.ask.close),
            bid_volume: 0.0,
            ask_volume: 0.0,
        }
    }

    fn back_filled(&self, timestamp: NaiveDateTime) -> RawBar {
        RawBar {
            timestamp,
            bid: Ohlc::flat(self.bid.open),
            ask: Ohlc::flat(self.ask.open),
            bid_volume: 0.0,
            ask_volume: 0.0,
        }
    }
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    if let Ok(ts) = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT) {
        return Ok(ts);
    }
    match NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ") {
        Ok(ts) if ts.and_utc().timestamp() % 60 == 0 => Ok(ts),
        Ok(_) => Err(format!("timestamp {s:?} is not on a minute boundary")),
        Err(_) => Err(format!("bad timestamp {s:?}, expected YYYY-MM-DDTHH:MMZ")),
    }
}

/// Layout knobs for bar files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BarFormat {
    pub delimiter: u8,
}

impl Default for BarFormat {
    fn default() -> Self {
        BarFormat { delimiter: b',' }
    }
}

/// Parses a bar file. Bars must be strictly increasing in time.
pub fn parse_bars<R: Read>(input: R, format: &BarFormat) -> Result<Vec<RawBar>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let mut bars: Vec<RawBar> = Vec::new();

    match records.next() {
        None => return Ok(bars),
        Some(header) => {
            let header = header.map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?;
            let names: Vec<&str> = header.iter().collect();
            if names != BAR_COLUMNS {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header must be exactly {}", BAR_COLUMNS.join(",")),
                });
            }
        }
    }

    for record in records {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != BAR_COLUMNS.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                BAR_COLUMNS.len(),
                record.len()
            )));
        }
        let timestamp = parse_timestamp(&record[0]).map_err(parse_err)?;
        let mut vals = [0.0f64; 10];
        for (i, slot) in vals.iter_mut().enumerate() {
            let field = &record[i + 1];
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_err(format!("column {}: cannot parse {field:?}", BAR_COLUMNS[i + 1])))?;
        }
        let bar = RawBar {
            timestamp,
            bid: Ohlc {
                open: vals[0],
                high: vals[1],
                low: vals[2],
                close: vals[3],
            },
            ask: Ohlc {
                open: vals[4],
                high: vals[5],
                low: vals[6],
                close: vals[7],
            },
            bid_volume: vals[8],
            ask_volume: vals[9],
        };
        bar.validate().map_err(parse_err)?;
        if let Some(prev) = bars.last() {
            if bar.timestamp <= prev.timestamp {
                return Err(Error::Ordering {
                    line,
                    message: format!(
                        "{} does not follow {}",
                        format_timestamp(&bar.timestamp),
                        format_timestamp(&prev.timestamp)
                    ),
                });
            }
        }
        bars.push(bar);
    }
    Ok(bars)
}

/// Writes bars in the format read by [`parse_bars`]. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_bars<W: Write>(out: W, bars: &[RawBar], format: &BarFormat) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().delimiter(format.delimiter).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(BAR_COLUMNS).map_err(io)?;
    for bar in bars {
        let row = [
            format_timestamp(&bar.timestamp),
            bar.bid.open.to_string(),
            bar.bid.high.to_string(),
            bar.bid.low.to_string(),
            bar.bid.close.to_string(),
            bar.ask.open.to_string(),
            bar.ask.high.to_string(),
            bar.ask.low.to_string(),
            bar.ask.close.to_string(),
            bar.bid_volume.to_string(),
            bar.ask_volume.to_string(),
        ];
        writer.write_record(&row).map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlicePolicy {
    /// Days with fewer real bars than this are dropped.
    pub min_real_bars: usize,
    /// Session start relative to UTC midnight, in minutes.
    pub day_offset_minutes: i64,
}

impl Default for SlicePolicy {
    fn default() -> Self {
        SlicePolicy {
            min_real_bars: 1000,
            day_offset_minutes: 0,
        }
    }
}

/// A complete 1440-minute day of raw bars, gaps already filled.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub date: NaiveDate,
    pub bars: Vec<RawBar>,
    pub real_bars: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub real_bars: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SliceReport {
    pub sessions: Vec<RawSession>,
    pub dropped: Vec<DroppedDay>,
}

fn session_start(date: NaiveDate, offset: i64) -> NaiveDateTime {
    date.and_hms_opt(0, 0, 0).expect("midnight") + Duration::minutes(offset)
}

/// Groups time-ordered bars into daily sessions.
///
/// Missing minutes repeat the previous close with zero volume; minutes before
/// the first real bar of a day repeat that bar's open.
pub fn slice_sessions(bars: &[RawBar], policy: &SlicePolicy) -> SliceReport {
    let offset = Duration::minutes(policy.day_offset_minutes);
    let mut report = SliceReport::default();
    let mut i = 0;
    while i < bars.len() {
        let date = (bars[i].timestamp - offset).date();
        let mut j = i;
        while j < bars.len() && (bars[j].timestamp - offset).date() == date {
            j += 1;
        }
        let day = &bars[i..j];
        i = j;
        if day.len() < policy.min_real_bars {
            report.dropped.push(DroppedDay {
                date,
                real_bars: day.len(),
            });
            continue;
        }
        let start = session_start(date, policy.day_offset_minutes);
        let mut filled = Vec::with_capacity(MINUTES_PER_SESSION);
        let mut next = day.iter().peekable();
        let mut last: Option<RawBar> = None;
        for minute in 0..MINUTES_PER_SESSION {
            let ts = start + Duration::minutes(minute as i64);
            let bar = match next.peek() {
                Some(b) if b.timestamp == ts => {
                    let b = **b;
                    next.next();
                    b
                }
                Some(b) => match &last {
                    Some(prev) => prev.carried_forward(ts),
                    None => b.back_filled(ts),
                },
                None => last.expect("day has at least one bar").carried_forward(ts),
            };
            last = Some(bar);
            filled.push(bar);
        }
        report.sessions.push(RawSession {
            date,
            bars: filled,
            real_bars: day.len(),
        });
    }
    report
}

/// One normalized minute: prices relative to the session's first mid, volumes
/// as shares of the session total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedBar {
    pub p_mid: f64,
    pub p_bid: f64,
    pub p_ask: f64,
    pub v_bid: f64,
    pub v_ask: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pair: String,
    date: NaiveDate,
    bars: Vec<NormalizedBar>,
}

impl Session {
    pub fn new(pair: impl Into<String>, date: NaiveDate, bars: Vec<NormalizedBar>) -> Result<Self> {
        if bars.len() != MINUTES_PER_SESSION {
            return Err(Error::DegenerateSession(format!(
                "a session needs {MINUTES_PER_SESSION} bars, got {}",
                bars.len()
            )));
        }
        Ok(Session {
            pair: pair.into(),
            date,
            bars,
        })
    }

    pub fn pair(&self) -> &str {
        &self.pair
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn bars(&self) -> &[NormalizedBar] {
        &self.bars
    }

    /// Close-to-open return of the normalized mid, `p_N − p_0`.
    pub fn mid_return(&self) -> f64 {
        self.bars[self.bars.len() - 1].p_mid - self.bars[0].p_mid
    }
}

/// Normalizes prices by the first close mid and volumes by the session total.
pub fn normalize_session(raw: &RawSession, pair: &str) -> Result<Session> {
    if raw.bars.len() != MINUTES_PER_SESSION {
        return Err(Error::DegenerateSession(format!(
            "{}: expected {MINUTES_PER_SESSION} bars, got {}",
            raw.date,
            raw.bars.len()
        )));
    }
    let mid0 = raw.bars[0].mid_close();
    let total: f64 =
        raw.bars.iter().map(|b| b.bid_volume).sum::<f64>() + raw.bars.iter().map(|b| b.ask_volume).sum::<f64>();
    if !(total > 0.0) {
        return Err(Error::DegenerateSession(format!("{}: total volume is zero", raw.date)));
    }
    let bars = raw
        .bars
        .iter()
        .map(|b| NormalizedBar {
            p_mid: b.mid_close() / mid0,
            p_bid: b.bid.close / mid0,
            p_ask: b.ask.close / mid0,
            v_bid: b.bid_volume / total,
            v_ask: b.ask_volume / total,
        })
        .collect();
    Session::new(pair, raw.date, bars)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_sessions: usize,
    /// Annualized volatility of the mid; per-minute volatility is
    /// `daily_vol / sqrt(260 · 1440)`.
    pub daily_vol: f64,
    pub half_spread_bp: f64,
    /// Log-normal sigma of per-minute volume draws.
    pub volume_concentration: f64,
    pub start_price: f64,
    pub start_date: NaiveDate,
    pub pair: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_sessions: 1,
            daily_vol: 0.10,
            half_spread_bp: 0.5,
            volume_concentration: 1.0,
            start_price: 1.25,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            pair: "EURUSD".to_string(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sessions == 0 {
            return Err(Error::invalid("n_sessions must be positive"));
        }
        if !(self.daily_vol.is_finite() && self.daily_vol >= 0.0) {
            return Err(Error::invalid("daily_vol must be nonnegative"));
        }
        if !(self.half_spread_bp.is_finite() && (0.0..10_000.0).contains(&self.half_spread_bp)) {
            return Err(Error::invalid("half_spread_bp must lie in [0, 10000)"));
        }
        if !(self.volume_concentration.is_finite() && self.volume_concentration > 0.0) {
            return Err(Error::invalid("volume_concentration must be positive"));
        }
        if !(self.start_price.is_finite() && self.start_price > 0.0) {
            return Err(Error::invalid("start_price must be positive"));
        }
        Ok(())
    }

    /// Per-minute log volatility of the mid.
    pub fn minute_vol(&self) -> f64 {
        self.daily_vol / (TRADING_DAYS_PER_YEAR * MINUTES_PER_SESSION as f64).sqrt()
    }
}

/// Weekday dates starting at `start` (itself moved forward past a weekend).
fn trading_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

fn synth_one(cfg: &SynthConfig, index: usize, date: NaiveDate) -> RawSession {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let sigma = cfg.minute_vol();
    let half = cfg.half_spread_bp * 1e-4;
    let volumes = LogNormal::new(0.0, cfg.volume_concentration).expect("validated sigma");
    let start = session_start(date, 0);

    let mut mid = cfg.start_price;
    let mut prev: Option<(f64, f64)> = None;
    let mut bars = Vec::with_capacity(MINUTES_PER_SESSION);
    for minute in 0..MINUTES_PER_SESSION {
        if minute > 0 {
            let z: f64 = rng.sample(StandardNormal);
            mid *= (sigma * z - 0.5 * sigma * sigma).exp();
        }
        let (bid_close, ask_close) = (mid * (1.0 - half), mid * (1.0 + half));
        let (bid_open, ask_open) = prev.unwrap_or((bid_close, ask_close));
        prev = Some((bid_close, ask_close));
        let bid_volume = 1e3 * rng.sample(volumes);
        let ask_volume = 1e3 * rng.sample(volumes);
        bars.push(RawBar {
            timestamp: start + Duration::minutes(minute as i64),
            bid: Ohlc {
                open: bid_open,
                high: bid_open.max(bid_close),
                low: bid_open.min(bid_close),
                close: bid_close,
            },
            ask: Ohlc {
                open: ask_open,
                high: ask_open.max(ask_close),
                low: ask_open.min(ask_close),
                close: ask_close,
            },
            bid_volume,
            ask_volume,
        });
    }
    RawSession {
        date,
        bars,
        real_bars: MINUTES_PER_SESSION,
    }
}

/// Synthetic raw sessions: a geometric random walk mid with a fixed
/// proportional spread and log-normal minute volumes. Each session draws from
/// its own ChaCha stream, so generation order does not matter.
pub fn synth_raw_sessions(cfg: &SynthConfig) -> Result<Vec<RawSession>> {
    cfg.validate()?;
    let dates = trading_dates(cfg.start_date, cfg.n_sessions);
    Ok(par::map_ordered(&dates, |i, date| synth_one(cfg, i, *date)))
}

pub fn synth_sessions(cfg: &SynthConfig) -> Result<Vec<Session>> {
    synth_raw_sessions(cfg)?
        .iter()
        .map(|raw| normalize_session(raw, &cfg.pair))
        .collect()
}
