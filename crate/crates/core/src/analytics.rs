//! Annualized key variables, distribution statistics, parameter sweeps and the
//! P&L regression, plus the delimited tables they are exported as.

use crate::cfmm::CfmmRule;
use crate::error::{Error, Result};
use crate::market_data::{Session, TRADING_DAYS_PER_YEAR};
use crate::par;
use crate::simulator::{run_session, SessionResult, SimConfig};
use crate::table::{Cell, Table};

/// Per-session headline figures. P&L values are annualized (`× 260`) and
/// expressed in units of the initial foreign notional; the spread is the
/// session's volume-weighted spread in basis points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyVariables {
    pub spread_bp: f64,
    pub arb_pnl_annual: f64,
    pub fees_annual: f64,
    pub lp_pnl_annual: f64,
    pub lp_pnl_hedged_annual: f64,
}

impl KeyVariables {
    pub fn from_session(r: &SessionResult) -> Self {
        KeyVariables {
            spread_bp: r.spread_bp,
            arb_pnl_annual: TRADING_DAYS_PER_YEAR * r.arb_pnl,
            fees_annual: TRADING_DAYS_PER_YEAR * r.fees,
            lp_pnl_annual: TRADING_DAYS_PER_YEAR * r.lp_pnl,
            lp_pnl_hedged_annual: TRADING_DAYS_PER_YEAR * r.lp_pnl_hedged,
        }
    }

    pub fn get(&self, v: Variable) -> f64 {
        match v {
            Variable::SpreadBp => self.spread_bp,
            Variable::ArbPnl => self.arb_pnl_annual,
            Variable::Fees => self.fees_annual,
            Variable::LpPnl => self.lp_pnl_annual,
            Variable::LpPnlHedged => self.lp_pnl_hedged_annual,
        }
    }
}

pub fn annualize(results: &[SessionResult]) -> Vec<KeyVariables> {
    results.iter().map(KeyVariables::from_session).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    SpreadBp,
    ArbPnl,
    Fees,
    LpPnl,
    LpPnlHedged,
}

impl Variable {
    pub const ALL: [Variable; 5] = [
        Variable::SpreadBp,
        Variable::ArbPnl,
        Variable::Fees,
        Variable::LpPnl,
        Variable::LpPnlHedged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::SpreadBp => "spread_bp",
            Variable::ArbPnl => "arb_pnl_annual",
            Variable::Fees => "fees_annual",
            Variable::LpPnl => "lp_pnl_annual",
            Variable::LpPnlHedged => "lp_pnl_hedged_annual",
        }
    }
}

/// Boxplot summary. Whiskers reach the most extreme data within 1.5×IQR of the
/// quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistStats {
    pub count: usize,
    pub median: f64,
    pub mad: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

impl DistStats {
    pub fn quartiles(&self) -> [f64; 3] {
        [self.q1, self.median, self.q3]
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn dist_stats(values: &[f64]) -> Result<DistStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput("distribution statistics of an empty sample"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite sample value {bad}")));
    }
    let sorted = sorted_copy(values);
    let median = quantile_sorted(&sorted, 0.5);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let deviations: Vec<f64> = sorted.iter().map(|v| (v - median).abs()).collect();
    let mad = quantile_sorted(&sorted_copy(&deviations), 0.5);
    let reach = 1.5 * (q3 - q1);
    let whisker_low = sorted.iter().copied().find(|&v| v >= q1 - reach).unwrap_or(q1);
    let whisker_high = sorted.iter().rev().copied().find(|&v| v <= q3 + reach).unwrap_or(q3);
    Ok(DistStats {
        count: values.len(),
        median,
        mad,
        q1,
        q3,
        whisker_low,
        whisker_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Weight of the sum term; the base rule's `s` is kept.
    Alpha,
    /// Client fee ε. The arbitrage fee is left as configured.
    Fee,
    Liquidity,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Fee => "fee",
            SweepAxis::Liquidity => "liquidity",
        }
    }

    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut cfg = *base;
        match self {
            SweepAxis::Alpha => cfg.rule = CfmmRule::mixed(value, base.rule.s())?,
            SweepAxis::Fee => cfg.fee = value,
            SweepAxis::Liquidity => cfg.liquidity_multiple = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    /// One entry per input session, in input order.
    pub sessions: Vec<Result<KeyVariables>>,
}

impl SweepCell {
    pub fn successes(&self) -> impl Iterator<Item = &KeyVariables> {
        self.sessions.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.sessions.iter().filter(|r| r.is_err()).count()
    }

    /// Distribution of `v` over the sessions that completed.
    pub fn stats(&self, v: Variable) -> Result<DistStats> {
        let values: Vec<f64> = self.successes().map(|k| k.get(v)).collect();
        dist_stats(&values)
    }
}

/// Re-runs the batch for every value of `axis`. All (value, session) cells run
/// in parallel; per-session failures stay in their cell.
pub fn sweep(sessions: &[Session], base: &SimConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepCell>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values"));
    }
    let configs: Vec<Result<SimConfig>> = values.iter().map(|&v| axis.apply(base, v)).collect();
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|c| (0..sessions.len()).map(move |s| (c, s)))
        .collect();
    let mut outcomes = par::map_ordered(&jobs, |_, &(c, s)| {
        let cfg = configs[c].clone()?;
        run_session(&sessions[s], &cfg)
            .map(|r| KeyVariables::from_session(&r))
            .map_err(|e| e.in_session(s))
    })
    .into_iter();
    Ok(values
        .iter()
        .map(|&value| SweepCell {
            value,
            sessions: outcomes.by_ref().take(sessions.len()).collect(),
        })
        .collect())
}

/// Which intraday volume dispersion enters the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeVariance {
    /// Variance of `v_bid − v_ask`.
    #[default]
    Net,
    /// Variance of `v_bid + v_ask`.
    Total,
    /// Mean of the two per-side variances.
    PerSide,
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Population variance over the session's minutes.
pub fn volume_variance(session: &Session, measure: VolumeVariance) -> f64 {
    let bars = session.bars();
    match measure {
        VolumeVariance::Net => variance(bars.iter().map(|b| b.v_bid - b.v_ask)),
        VolumeVariance::Total => variance(bars.iter().map(|b| b.v_bid + b.v_ask)),
        VolumeVariance::PerSide => {
            0.5 * (variance(bars.iter().map(|b| b.v_bid)) + variance(bars.iter().map(|b| b.v_ask)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub beta_return: f64,
    pub beta_volvar: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionResult {
    pub fn predict(&self, ret: f64, volvar: f64) -> f64 {
        self.intercept + self.beta_return * ret + self.beta_volvar * volvar
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// OLS of `y` on an intercept and two regressors, through the centered 2×2
/// normal equations.
pub fn ols(y: &[f64], returns: &[f64], volvar: &[f64]) -> Result<RegressionResult> {
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptyInput("regression sample"));
    }
    if returns.len() != n || volvar.len() != n {
        return Err(Error::invalid("regression columns differ in length"));
    }
    if y.iter().chain(returns).chain(volvar).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite regression input"));
    }
    let (my, m1, m2) = (mean(y), mean(returns), mean(volvar));
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b, c) = (returns[i] - m1, volvar[i] - m2, y[i] - my);
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * c;
        s2y += b * c;
        syy += c * c;
    }
    let det = s11 * s22 - s12 * s12;
    if !(s11 > 0.0 && s22 > 0.0) || det <= 1e-12 * s11 * s22 {
        return Err(Error::RankDeficient);
    }
    let beta_return = (s22 * s1y - s12 * s2y) / det;
    let beta_volvar = (s11 * s2y - s12 * s1y) / det;
    let intercept = my - beta_return * m1 - beta_volvar * m2;
    let ssr: f64 = (0..n)
        .map(|i| {
            let e = y[i] - intercept - beta_return * returns[i] - beta_volvar * volvar[i];
            e * e
        })
        .sum();
    // a constant target is fitted by the intercept alone; report no explained variance
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionResult {
        beta_return,
        beta_volvar,
        intercept,
        r_squared,
        n,
    })
}

/// Regresses daily LP P&L (unhedged, hedged) on the session return `p_N − p_0`
/// and the intraday volume variance.
pub fn regress_pnl(
    results: &[SessionResult],
    sessions: &[Session],
    measure: VolumeVariance,
) -> Result<(RegressionResult, RegressionResult)> {
    if results.len() != sessions.len() {
        return Err(Error::invalid(format!(
            "{} results for {} sessions",
            results.len(),
            sessions.len()
        )));
    }
    let returns: Vec<f64> = sessions.iter().map(Session::mid_return).collect();
    let volvar: Vec<f64> = sessions.iter().map(|s| volume_variance(s, measure)).collect();
    let unhedged: Vec<f64> = results.iter().map(|r| r.lp_pnl).collect();
    let hedged: Vec<f64> = results.iter().map(|r| r.lp_pnl_hedged).collect();
    Ok((ols(&unhedged, &returns, &volvar)?, ols(&hedged, &returns, &volvar)?))
}

pub const SESSION_COLUMNS: [&str; 9] = [
    "session",
    "date",
    "pair",
    "spread_bp",
    "arb_pnl_annual",
    "fees_annual",
    "lp_pnl_annual",
    "lp_pnl_hedged_annual",
    "error",
];

pub const DISTRIBUTION_COLUMNS: [&str; 12] = [
    "axis",
    "value",
    "variable",
    "count",
    "failed",
    "median",
    "mad",
    "q1",
    "q3",
    "whisker_low",
    "whisker_high",
    "mean",
];

pub const REGRESSION_COLUMNS: [&str; 7] = [
    "target",
    "volume_measure",
    "beta_return",
    "beta_volvar",
    "intercept",
    "r_squared",
    "n",
];

/// Per-session annualized key variables; failed sessions keep their row with
/// the error.
pub fn session_table(sessions: &[Session], rows: &[Result<KeyVariables>]) -> Table {
    let mut t = Table::new(&SESSION_COLUMNS);
    for (i, (s, row)) in sessions.iter().zip(rows).enumerate() {
        let mut rec: Vec<Cell> = vec![i.into(), s.date().to_string().into(), s.pair().into()];
        match row {
            Ok(k) => {
                rec.extend(Variable::ALL.iter().map(|&v| Cell::from(k.get(v))));
                rec.push(Cell::Empty);
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(Cell::Empty, Variable::ALL.len()));
                rec.push(e.to_string().into());
            }
        }
        t.push(rec);
    }
    t
}

/// One row per (cell, variable). Cells with no successful session get empty
/// statistics.
pub fn distribution_table(axis: &str, cells: &[SweepCell]) -> Table {
    let mut t = Table::new(&DISTRIBUTION_COLUMNS);
    for cell in cells {
        for v in Variable::ALL {
            let values: Vec<f64> = cell.successes().map(|k| k.get(v)).collect();
            let mut rec: Vec<Cell> = vec![
                axis.into(),
                cell.value.into(),
                v.name().into(),
                values.len().into(),
                cell.failures().into(),
            ];
            match dist_stats(&values) {
                Ok(d) => rec.extend(
                    [
                        d.median,
                        d.mad,
                        d.q1,
                        d.q3,
                        d.whisker_low,
                        d.whisker_high,
                        mean(&values),
                    ]
                    .map(Cell::from),
                ),
                Err(_) => rec.extend(std::iter::repeat_n(Cell::Empty, 7)),
            }
            t.push(rec);
        }
    }
    t
}

pub fn regression_table(measure: VolumeVariance, unhedged: &RegressionResult, hedged: &RegressionResult) -> Table {
    let mut t = Table::new(&REGRESSION_COLUMNS);
    let measure = match measure {
        VolumeVariance::Net => "net",
        VolumeVariance::Total => "total",
        VolumeVariance::PerSide => "per_side",
    };
    for (target, r) in [("lp_pnl", unhedged), ("lp_pnl_hedged", hedged)] {
        t.push(vec![
            target.into(),
            measure.into(),
            r.beta_return.into(),
            r.beta_volvar.into(),
            r.intercept.into(),
            r.r_squared.into(),
            r.n.into(),
        ]);
    }
    t
}
