//! Intraday pool simulation over one-minute sessions.
//!
//! Each minute `n`:
//! 1. the bid volume redeems foreign tokens and the ask volume redeems domestic
//!    tokens, both quoted exact-out against the pool as it stood after minute
//!    `n−1`;
//! 2. fill rates and spreads against the minute's mid are recorded;
//! 3. the arbitrageur sizes a one-sided trade on the previous minute's mid and
//!    is filled off-chain at the current mid;
//! 4. balances roll forward.
//!
//! The pool is reset at the start of every session.

use crate::analytics::{volume_variance, VolumeVariance};
use crate::arbitrage::{optimal_arb, profit_of_fill, ArbConfig, ArbDirection, ArbSolution};
use crate::cfmm::{apply_fill, check_fee, quote_exact_out, CfmmRule, Fill, PoolState, RuleKind, Side};
use crate::error::{Error, Result};
use crate::market_data::{NormalizedBar, Session};
use crate::par;
use crate::table::{Cell, Table};

/// How the two client orders of a minute hit the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderMode {
    /// Both quoted against the lagged state, balance changes summed.
    Joint,
    /// Foreign redemption first, then the domestic redemption on the updated pool.
    Sequential,
}

/// Which mid the arbitrage trade is sized with. It is always filled at the
/// current minute's mid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArbPricing {
    Lagged,
    Current,
}

/// Volume weights of the session spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadWeighting {
    /// `Σ v_bid·s_bid + Σ v_ask·s_ask`. The bid spread comes from the order of
    /// size `v_ask`, so each side is weighted by the opposite order.
    AsPrinted,
    /// Each spread weighted by the size of the order that produced it:
    /// `Σ v_ask·s_bid + Σ v_bid·s_ask`.
    ByFill,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub rule: CfmmRule,
    /// Client fee ε.
    pub fee: f64,
    /// Scales the initial balances; volumes stay unit-mass.
    pub liquidity_multiple: f64,
    pub arb_enabled: bool,
    /// Arbitrage settings, including the arbitrageur's fee ε′.
    pub arb: ArbConfig,
    pub order_mode: OrderMode,
    pub arb_pricing: ArbPricing,
    pub spread_weighting: SpreadWeighting,
    /// Keep per-minute [`StepRecord`]s on the result.
    pub record_steps: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rule: CfmmRule::mixed(5.0, 1.0).expect("valid rule"),
            fee: 1e-4,
            liquidity_multiple: 1.0,
            arb_enabled: true,
            arb: ArbConfig::default(),
            order_mode: OrderMode::Joint,
            arb_pricing: ArbPricing::Lagged,
            spread_weighting: SpreadWeighting::ByFill,
            record_steps: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_fee(self.fee)?;
        if !(self.liquidity_multiple.is_finite() && self.liquidity_multiple > 0.0) {
            return Err(Error::invalid("liquidity_multiple must be positive"));
        }
        self.arb.validate()?;
        if self.arb_enabled && self.rule.kind() == RuleKind::Sum {
            return Err(Error::Unsupported(
                "arbitrage against a constant-sum pool is unbounded; disable arbitrage".into(),
            ));
        }
        Ok(())
    }
}

/// Fresh pool for a session: `x₀ = y₀ = liquidity_multiple`.
pub fn init_pool(cfg: &SimConfig) -> Result<PoolState> {
    cfg.validate()?;
    let l = cfg.liquidity_multiple;
    PoolState::new(cfg.rule, l, l, cfg.fee)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub p_mid: f64,
    pub v_bid: f64,
    pub v_ask: f64,
    /// Balances at the end of the minute.
    pub x: f64,
    pub y: f64,
    /// Order of size `v_bid` redeeming foreign tokens.
    pub foreign_fill: Option<Fill>,
    /// Order of size `v_ask` redeeming domestic tokens.
    pub domestic_fill: Option<Fill>,
    /// Domestic redeemed per foreign deposited.
    pub amm_bid: Option<f64>,
    /// Domestic deposited per foreign redeemed.
    pub amm_ask: Option<f64>,
    pub spread_bid: Option<f64>,
    pub spread_ask: Option<f64>,
    /// Arbitrage as sized (profit at the sizing price).
    pub arb: ArbSolution,
    pub arb_fill: Option<Fill>,
    /// Arbitrage profit filled at this minute's mid.
    pub arb_profit: f64,
    /// Client fees of this minute in domestic units.
    pub fees: f64,
}

impl StepRecord {
    /// Value balance of the minute at `p_mid`: pool value change plus client
    /// gains, arbitrage profit and all fees. Zero up to rounding.
    pub fn conservation_residual(&self, x_before: f64, y_before: f64) -> f64 {
        let p = self.p_mid;
        let mut total = (self.x - x_before) + p * (self.y - y_before);
        for fill in [self.foreign_fill, self.domestic_fill, self.arb_fill]
            .into_iter()
            .flatten()
        {
            let fee_value = match fill.side {
                Side::RedeemDomestic => p * fill.fee_paid,
                Side::RedeemForeign => fill.fee_paid,
            };
            total += profit_of_fill(&fill, p) + fee_value;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    /// Volume-weighted AMM spread in basis points.
    pub spread_bp: f64,
    pub arb_pnl: f64,
    pub fees: f64,
    pub lp_pnl: f64,
    pub lp_pnl_hedged: f64,
    pub x_initial: f64,
    pub y_initial: f64,
    pub x_final: f64,
    pub y_final: f64,
    pub p_initial: f64,
    pub p_final: f64,
    pub steps: Vec<StepRecord>,
}

fn quote_order(pool: &PoolState, side: Side, size: f64) -> Result<Option<Fill>> {
    if size > 0.0 {
        quote_exact_out(pool, side, size).map(Some)
    } else {
        Ok(None)
    }
}

/// Runs one minute. `prev_bar` supplies the lagged mid used to size arbitrage.
pub fn step(
    pool: &PoolState,
    bar: &NormalizedBar,
    prev_bar: &NormalizedBar,
    cfg: &SimConfig,
    index: usize,
) -> Result<(PoolState, StepRecord)> {
    step_inner(pool, bar, prev_bar, cfg, index).map_err(|e| Error::Step {
        session: 0,
        step: index,
        source: Box::new(e),
    })
}

fn step_inner(
    pool: &PoolState,
    bar: &NormalizedBar,
    prev_bar: &NormalizedBar,
    cfg: &SimConfig,
    index: usize,
) -> Result<(PoolState, StepRecord)> {
    let foreign_fill = quote_order(pool, Side::RedeemForeign, bar.v_bid)?;
    let (domestic_fill, mut state) = match cfg.order_mode {
        OrderMode::Joint => {
            let domestic_fill = quote_order(pool, Side::RedeemDomestic, bar.v_ask)?;
            let mut x = pool.x();
            let mut y = pool.y();
            if let Some(f) = &foreign_fill {
                x += f.credited();
                y -= f.amount_out;
            }
            if let Some(f) = &domestic_fill {
                x -= f.amount_out;
                y += f.credited();
            }
            if !(x > 0.0 && y > 0.0) {
                return Err(Error::Inconsistent(format!(
                    "client orders drain the pool: x={x}, y={y}"
                )));
            }
            // the summed update leaves the pool slightly off its curve
            (domestic_fill, pool.with_balances(x, y).releveled()?)
        }
        OrderMode::Sequential => {
            let mut state = *pool;
            if let Some(f) = &foreign_fill {
                state = apply_fill(&state, f)?;
            }
            let domestic_fill = quote_order(&state, Side::RedeemDomestic, bar.v_ask)?;
            if let Some(f) = &domestic_fill {
                state = apply_fill(&state, f)?;
            }
            (domestic_fill, state)
        }
    };

    let p = bar.p_mid;
    let amm_ask = foreign_fill.map(|f| f.rate());
    let amm_bid = domestic_fill.map(|f| f.rate());
    let fees = foreign_fill.map_or(0.0, |f| f.fee_paid) + p * domestic_fill.map_or(0.0, |f| f.fee_paid);

    let mut arb = ArbSolution::none();
    let mut arb_fill = None;
    let mut arb_profit = 0.0;
    if cfg.arb_enabled {
        let sizing_price = match cfg.arb_pricing {
            ArbPricing::Lagged => prev_bar.p_mid,
            ArbPricing::Current => bar.p_mid,
        };
        arb = optimal_arb(&state, sizing_price, &cfg.arb)?;
        if let Some(fill) = arb.fill(cfg.arb.arb_fee) {
            arb_profit = profit_of_fill(&fill, p);
            state = apply_fill(&state, &fill)?;
            arb_fill = Some(fill);
        }
    }

    let record = StepRecord {
        index,
        p_mid: p,
        v_bid: bar.v_bid,
        v_ask: bar.v_ask,
        x: state.x(),
        y: state.y(),
        foreign_fill,
        domestic_fill,
        amm_bid,
        amm_ask,
        spread_bid: amm_bid.map(|r| p - r),
        spread_ask: amm_ask.map(|r| r - p),
        arb,
        arb_fill,
        arb_profit,
        fees,
    };
    Ok((state, record))
}

/// Simulates a full session from a freshly initialized pool.
pub fn run_session(session: &Session, cfg: &SimConfig) -> Result<SessionResult> {
    let pool0 = init_pool(cfg)?;
    let bars = session.bars();
    let first = bars.first().ok_or(Error::EmptyInput("session has no bars"))?;

    let mut pool = pool0;
    let mut weighted_spread = 0.0;
    let mut arb_pnl = 0.0;
    let mut fees = 0.0;
    let mut steps = Vec::with_capacity(if cfg.record_steps { bars.len() } else { 0 });
    for (n, bar) in bars.iter().enumerate() {
        let prev = if n == 0 { first } else { &bars[n - 1] };
        let (next, rec) = step(&pool, bar, prev, cfg, n)?;
        pool = next;
        // a side without an order contributes nothing
        let (w_bid, w_ask) = match cfg.spread_weighting {
            SpreadWeighting::AsPrinted => (bar.v_bid, bar.v_ask),
            SpreadWeighting::ByFill => (bar.v_ask, bar.v_bid),
        };
        weighted_spread += w_bid * rec.spread_bid.unwrap_or(0.0) + w_ask * rec.spread_ask.unwrap_or(0.0);
        arb_pnl += rec.arb_profit;
        fees += rec.fees;
        if cfg.record_steps {
            steps.push(rec);
        }
    }

    let p0 = first.p_mid;
    let pn = bars[bars.len() - 1].p_mid;
    let (x0, y0) = (pool0.x(), pool0.y());
    let value_end = pool.x() + pn * pool.y();
    Ok(SessionResult {
        spread_bp: 10_000.0 / 2.0 * weighted_spread,
        arb_pnl,
        fees,
        lp_pnl: value_end - (x0 + p0 * y0) + fees,
        lp_pnl_hedged: value_end - (x0 + pn * y0) + fees,
        x_initial: x0,
        y_initial: y0,
        x_final: pool.x(),
        y_final: pool.y(),
        p_initial: p0,
        p_final: pn,
        steps,
    })
}

/// Runs independent sessions in parallel; results keep the input order and
/// failures stay per-session.
pub fn run_batch(sessions: &[Session], cfg: &SimConfig) -> Vec<Result<SessionResult>> {
    par::map_ordered(sessions, |i, s| run_session(s, cfg).map_err(|e| e.in_session(i)))
}

/// Single-threaded [`run_batch`].
pub fn run_batch_sequential(sessions: &[Session], cfg: &SimConfig) -> Vec<Result<SessionResult>> {
    par::map_ordered_sequential(sessions, |i, s| run_session(s, cfg).map_err(|e| e.in_session(i)))
}

pub const STEP_COLUMNS: [&str; 17] = [
    "minute",
    "p_mid",
    "amm_bid",
    "amm_ask",
    "x",
    "y",
    "spread_bid",
    "spread_ask",
    "v_bid",
    "v_ask",
    "il",
    "il_hedged",
    "fees",
    "arb_pnl",
    "arb_direction",
    "pool_product",
    "pool_sum",
];

/// Per-minute records of a result recorded with `record_steps`.
///
/// `il` and `il_hedged` are the LP P&L without fees, `fees` and `arb_pnl` are
/// cumulative, `pool_product = x·y` and `pool_sum = (x + y)/2`. Missing rates
/// are empty cells.
pub fn step_table(result: &SessionResult) -> Table {
    let mut t = Table::new(&STEP_COLUMNS);
    let (x0, y0, p0) = (result.x_initial, result.y_initial, result.p_initial);
    let mut fees = 0.0;
    let mut arb = 0.0;
    for r in &result.steps {
        fees += r.fees;
        arb += r.arb_profit;
        let value = r.x + r.p_mid * r.y;
        let direction = match r.arb.direction {
            ArbDirection::BuyDomestic => "buy_domestic",
            ArbDirection::BuyForeign => "buy_foreign",
            ArbDirection::None => "none",
        };
        t.push(vec![
            r.index.into(),
            r.p_mid.into(),
            r.amm_bid.into(),
            r.amm_ask.into(),
            r.x.into(),
            r.y.into(),
            r.spread_bid.into(),
            r.spread_ask.into(),
            r.v_bid.into(),
            r.v_ask.into(),
            (value - (x0 + p0 * y0)).into(),
            (value - (x0 + r.p_mid * y0)).into(),
            fees.into(),
            arb.into(),
            direction.into(),
            (r.x * r.y).into(),
            (0.5 * (r.x + r.y)).into(),
        ]);
    }
    t
}

pub const RESULT_COLUMNS: [&str; 14] = [
    "session",
    "date",
    "pair",
    "spread_bp",
    "arb_pnl",
    "fees",
    "lp_pnl",
    "lp_pnl_hedged",
    "x_final",
    "y_final",
    "p_final",
    "mid_return",
    "volume_variance",
    "error",
];

/// Daily (not annualized) session metrics, one row per session. Failed
/// sessions keep their row with the error text.
pub fn result_table(sessions: &[Session], results: &[Result<SessionResult>]) -> Table {
    let mut t = Table::new(&RESULT_COLUMNS);
    for (i, (s, r)) in sessions.iter().zip(results).enumerate() {
        let mut row: Vec<Cell> = vec![i.into(), s.date().to_string().into(), s.pair().into()];
        match r {
            Ok(r) => {
                row.extend(
                    [
                        r.spread_bp,
                        r.arb_pnl,
                        r.fees,
                        r.lp_pnl,
                        r.lp_pnl_hedged,
                        r.x_final,
                        r.y_final,
                        r.p_final,
                    ]
                    .map(Cell::from),
                );
                row.push(s.mid_return().into());
                row.push(volume_variance(s, VolumeVariance::Net).into());
                row.push(Cell::Empty);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(Cell::Empty, 10));
                row.push(e.to_string().into());
            }
        }
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfmm::marginal_rate;
    use chrono::NaiveDate;

    fn bar(p: f64, vb: f64, va: f64) -> NormalizedBar {
        NormalizedBar {
            p_mid: p,
            p_bid: p,
            p_ask: p,
            v_bid: vb,
            v_ask: va,
        }
    }

    fn session(bars: Vec<NormalizedBar>) -> Session {
        Session::new("TEST", NaiveDate::from_ymd_opt(2021, 6, 3).unwrap(), bars).unwrap()
    }

    fn sum_cfg() -> SimConfig {
        SimConfig {
            rule: CfmmRule::sum(1.0).unwrap(),
            arb_enabled: false,
            ..SimConfig::default()
        }
    }

    #[test]
    fn init_pool_examples() {
        let pool = init_pool(&SimConfig::default()).unwrap();
        assert_eq!((pool.x(), pool.y(), pool.pi0(), pool.sigma0()), (1.0, 1.0, 1.0, 2.0));
        let cfg = SimConfig {
            liquidity_multiple: 4.0,
            ..SimConfig::default()
        };
        let pool = init_pool(&cfg).unwrap();
        assert_eq!((pool.pi0(), pool.sigma0()), (16.0, 8.0));
        assert_eq!(pool.value_at(1.0), 8.0);
    }

    #[test]
    fn empty_step_leaves_pool_alone() {
        let cfg = SimConfig {
            arb_enabled: false,
            ..SimConfig::default()
        };
        let pool = init_pool(&cfg).unwrap();
        let b = bar(1.0, 0.0, 0.0);
        let (next, rec) = step(&pool, &b, &b, &cfg, 0).unwrap();
        assert_eq!(next, pool);
        assert_eq!((rec.spread_bid, rec.spread_ask), (None, None));
        assert_eq!(rec.fees, 0.0);
    }

    #[test]
    fn sum_rule_spreads_equal_fee_terms() {
        let cfg = sum_cfg();
        let pool = init_pool(&cfg).unwrap();
        let b = bar(1.0, 0.5, 0.5);
        let (_, rec) = step(&pool, &b, &b, &cfg, 0).unwrap();
        let eps: f64 = 1e-4;
        assert!((rec.spread_ask.unwrap() - (1.0 / (1.0 - eps) - 1.0)).abs() < 1e-15);
        assert!((rec.spread_bid.unwrap() - eps).abs() < 1e-15);
    }

    #[test]
    fn product_arbitrage_restores_flat_price() {
        let cfg = SimConfig {
            rule: CfmmRule::product(1.0).unwrap(),
            arb: ArbConfig {
                arb_fee: 0.0,
                ..ArbConfig::default()
            },
            ..SimConfig::default()
        };
        let pool = init_pool(&cfg).unwrap();
        let b = bar(1.0, 0.01, 0.003);
        let (next, rec) = step(&pool, &b, &b, &cfg, 0).unwrap();
        assert!(rec.arb.is_trade());
        assert!((marginal_rate(&next).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quotes_ignore_current_price() {
        let cfg = SimConfig::default();
        let pool = init_pool(&cfg).unwrap();
        let prev = bar(1.0, 0.0, 0.0);
        let (_, a) = step(&pool, &bar(1.0, 0.002, 0.001), &prev, &cfg, 1).unwrap();
        let (_, b) = step(&pool, &bar(1.03, 0.002, 0.001), &prev, &cfg, 1).unwrap();
        assert_eq!(a.foreign_fill, b.foreign_fill);
        assert_eq!(a.domestic_fill, b.domestic_fill);
        // arbitrage is sized on the lagged price, only its valuation moves
        assert_eq!(a.arb.trade_in, b.arb.trade_in);
        assert_ne!(a.arb_profit, b.arb_profit);
    }

    #[test]
    fn sequential_mode_stays_on_curve() {
        let cfg = SimConfig {
            rule: CfmmRule::product(1.0).unwrap(),
            fee: 0.0,
            arb_enabled: false,
            order_mode: OrderMode::Sequential,
            ..SimConfig::default()
        };
        let pool = init_pool(&cfg).unwrap();
        let b = bar(1.0, 0.05, 0.04);
        let (next, _) = step(&pool, &b, &b, &cfg, 0).unwrap();
        assert!(next.residual().abs() < 1e-12);
    }

    #[test]
    fn oversized_order_reports_step() {
        let cfg = sum_cfg();
        let pool = init_pool(&cfg).unwrap();
        let b = bar(1.0, 1.5, 0.0);
        match step(&pool, &b, &b, &cfg, 17) {
            Err(Error::Step { step, source, .. }) => {
                assert_eq!(step, 17);
                assert!(matches!(*source, Error::InsufficientLiquidity { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_volume_session_is_quiet() {
        let cfg = SimConfig::default();
        let s = session(vec![bar(1.0, 0.0, 0.0); 1440]);
        let r = run_session(&s, &cfg).unwrap();
        assert_eq!((r.fees, r.lp_pnl, r.spread_bp, r.arb_pnl), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn flat_sum_session_spread_is_half_a_basis_point() {
        let cfg = sum_cfg();
        let s = session(vec![bar(1.0, 0.5 / 1440.0, 0.5 / 1440.0); 1440]);
        let r = run_session(&s, &cfg).unwrap();
        // (10000/2)·(ε·½ + (1/(1−ε) − 1)·½)
        let eps: f64 = 1e-4;
        let expected = 5000.0 * 0.5 * (eps + (1.0 / (1.0 - eps) - 1.0));
        assert!((r.spread_bp - expected).abs() < 1e-9, "{}", r.spread_bp);
        assert!((r.spread_bp - 0.5).abs() < 0.005);
        assert!((r.fees - 2.0 * eps * 0.5 / (1.0 - eps)).abs() < 1e-12);
    }

    #[test]
    fn hedged_identity_and_recorded_steps() {
        let cfg = SimConfig {
            record_steps: true,
            ..SimConfig::default()
        };
        let bars: Vec<_> = (0..1440)
            .map(|i| bar(1.0 + 0.002 * ((i as f64) / 50.0).sin(), 3e-4, 4e-4))
            .collect();
        let r = run_session(&session(bars), &cfg).unwrap();
        assert_eq!(r.steps.len(), 1440);
        let diff = r.lp_pnl - r.lp_pnl_hedged - (r.p_final - r.p_initial) * r.y_initial;
        assert!(diff.abs() < 1e-15);
        let mut prev = (r.x_initial, r.y_initial);
        for s in &r.steps {
            assert!(s.conservation_residual(prev.0, prev.1).abs() < 1e-12);
            assert!(!(s.foreign_fill.is_none() && s.amm_ask.is_some()));
            prev = (s.x, s.y);
        }
        let table = step_table(&r);
        assert_eq!(table.rows.len(), 1440);
        assert_eq!(table.columns[..3], ["minute", "p_mid", "amm_bid"]);
        let fees: Vec<_> = table.column("fees").unwrap().collect();
        assert_eq!(fees[1439], &Cell::Num(r.fees));
    }

    #[test]
    fn sum_rule_with_arbitrage_is_rejected() {
        let cfg = SimConfig {
            arb_enabled: true,
            ..sum_cfg()
        };
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
    }
}
