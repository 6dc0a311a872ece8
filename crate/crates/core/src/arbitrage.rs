//! Optimal one-sided arbitrage between a pool and an external FX mid price.
//!
//! Two directions exist. `BuyDomestic` deposits foreign tokens bought off-chain
//! at the mid and redeems domestic tokens; `BuyForeign` is the mirror image.
//! Profit is measured in domestic units at the mid price:
//!
//! ```text
//! BuyDomestic:  Ω(Δy) = Δx̄(Δy) − p·Δy
//! BuyForeign:   Ω(Δx) = p·Δȳ(Δx) − Δx
//! ```
//!
//! The constant-product optimum has a closed form, the mixed rule is solved by
//! Newton–Raphson on the first-order condition, and [`oracle_arb_grid`] is a
//! brute-force cross-check that only evaluates Ω.

use crate::cfmm::{check_fee, partner, quote_exact_in_at, Fill, PoolState, RuleKind, Side};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbConfig {
    /// Pool fee charged to the arbitrageur (ε′).
    pub arb_fee: f64,
    /// Newton stops once `|step| <= newton_tol * max(1, balance)`.
    pub newton_tol: f64,
    pub max_iters: usize,
    pub oracle_grid: usize,
}

impl Default for ArbConfig {
    fn default() -> Self {
        ArbConfig {
            arb_fee: 1e-4,
            newton_tol: 1e-12,
            max_iters: 50,
            oracle_grid: 10_000,
        }
    }
}

impl ArbConfig {
    pub fn validate(&self) -> Result<()> {
        check_fee(self.arb_fee)?;
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol must be positive"));
        }
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.oracle_grid < 2 {
            return Err(Error::invalid("oracle_grid must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArbDirection {
    /// Deposit foreign, redeem domestic (pool overprices the foreign token).
    BuyDomestic,
    /// Deposit domestic, redeem foreign.
    BuyForeign,
    None,
}

impl ArbDirection {
    /// The pool side redeemed by this direction.
    pub fn side(self) -> Option<Side> {
        match self {
            ArbDirection::BuyDomestic => Some(Side::RedeemDomestic),
            ArbDirection::BuyForeign => Some(Side::RedeemForeign),
            ArbDirection::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbSolution {
    pub direction: ArbDirection,
    /// Deposited amount (Δy* or Δx*).
    pub trade_in: f64,
    /// Matched redemption (Δx̄* or Δȳ*).
    pub trade_out: f64,
    /// Ω at the price the trade was sized with.
    pub profit: f64,
    /// Newton iterations used; zero for closed-form and grid solutions.
    pub iterations: usize,
}

impl ArbSolution {
    pub fn none() -> Self {
        ArbSolution {
            direction: ArbDirection::None,
            trade_in: 0.0,
            trade_out: 0.0,
            profit: 0.0,
            iterations: 0,
        }
    }

    pub fn is_trade(&self) -> bool {
        self.direction != ArbDirection::None
    }

    /// The pool fill realising this trade at fee `arb_fee`.
    pub fn fill(&self, arb_fee: f64) -> Option<Fill> {
        let side = self.direction.side()?;
        Some(Fill {
            side,
            amount_out: self.trade_out,
            amount_in: self.trade_in,
            fee_paid: arb_fee * self.trade_in,
        })
    }
}

fn check_price(fx_mid: f64) -> Result<()> {
    if fx_mid.is_finite() && fx_mid > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("fx_mid must be positive, got {fx_mid}")))
    }
}

/// Profit of a trade given its fill, valued at `fx_mid`.
pub fn profit_of_fill(fill: &Fill, fx_mid: f64) -> f64 {
    match fill.side {
        Side::RedeemDomestic => fill.amount_out - fx_mid * fill.amount_in,
        Side::RedeemForeign => fx_mid * fill.amount_out - fill.amount_in,
    }
}

/// Arbitrage P&L Ω of depositing `trade_in` in `direction`.
pub fn arb_profit(pool: &PoolState, direction: ArbDirection, trade_in: f64, fx_mid: f64, arb_fee: f64) -> Result<f64> {
    check_price(fx_mid)?;
    check_fee(arb_fee)?;
    if !(trade_in >= 0.0) {
        return Err(Error::domain(format!("trade_in must be nonnegative, got {trade_in}")));
    }
    let side = match direction.side() {
        Some(side) if trade_in > 0.0 => side,
        _ => return Ok(0.0),
    };
    let fill = quote_exact_in_at(pool, side, trade_in, arb_fee)?;
    Ok(profit_of_fill(&fill, fx_mid))
}

fn solution_for(
    pool: &PoolState,
    direction: ArbDirection,
    trade_in: f64,
    fx_mid: f64,
    arb_fee: f64,
    iterations: usize,
) -> Result<ArbSolution> {
    let side = direction.side().expect("trading direction");
    let fill = quote_exact_in_at(pool, side, trade_in, arb_fee)?;
    Ok(ArbSolution {
        direction,
        trade_in,
        trade_out: fill.amount_out,
        profit: profit_of_fill(&fill, fx_mid),
        iterations,
    })
}

/// Closed-form optimum for the constant-product rule.
///
/// ```text
/// Δy* = sqrt(Π₀ / (s(1−ε′)p)) − y/(1−ε′)
/// Δx* = sqrt(pΠ₀ / (s(1−ε′))) − x/(1−ε′)
/// ```
pub fn optimal_arb_product(pool: &PoolState, fx_mid: f64, arb_fee: f64) -> Result<ArbSolution> {
    check_price(fx_mid)?;
    check_fee(arb_fee)?;
    let rule = pool.rule();
    if !rule.is_product_curve() {
        return Err(Error::Unsupported(format!(
            "closed-form arbitrage needs the product rule, got {:?}",
            rule.kind()
        )));
    }
    let k = 1.0 - arb_fee;
    let s = rule.s();
    let pi0 = pool.pi0();
    let dy = (pi0 / (s * k * fx_mid)).sqrt() - pool.y() / k;
    let dx = (fx_mid * pi0 / (s * k)).sqrt() - pool.x() / k;

    let buy_domestic = if dy > 0.0 {
        Some(solution_for(pool, ArbDirection::BuyDomestic, dy, fx_mid, arb_fee, 0)?)
    } else {
        None
    };
    let buy_foreign = if dx > 0.0 {
        Some(solution_for(pool, ArbDirection::BuyForeign, dx, fx_mid, arb_fee, 0)?)
    } else {
        None
    };
    Ok(match (buy_domestic, buy_foreign) {
        (Some(a), Some(b)) => {
            if a.profit >= b.profit {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => ArbSolution::none(),
    })
}

/// Interval of external prices with no profitable constant-product arbitrage.
///
/// On the curve this is `[(1−ε′)·x/y, x/((1−ε′)·y)]`. The bounds are written
/// through `Π₀` so that they coincide exactly with the sign changes of the
/// closed-form trade sizes.
pub fn no_arb_band(pool: &PoolState, arb_fee: f64) -> Result<(f64, f64)> {
    check_fee(arb_fee)?;
    let rule = pool.rule();
    if !rule.is_product_curve() {
        return Err(Error::Unsupported(
            "no-arbitrage band is defined for the product rule".into(),
        ));
    }
    let k = 1.0 - arb_fee;
    let s = rule.s();
    let (x, y, pi0) = (pool.x(), pool.y(), pool.pi0());
    Ok((k * pi0 / (s * y * y), s * x * x / (k * pi0)))
}

/// Newton–Raphson on the first-order condition of one direction.
///
/// The unknown is the post-trade pool balance `v` of the deposited token.
/// `g(v)` is the slope of the redeemed balance along the curve plus the
/// price term, increasing in `v`; a trade exists iff `g(v₀) < 0`.
fn newton_direction(
    pool: &PoolState,
    direction: ArbDirection,
    fx_mid: f64,
    cfg: &ArbConfig,
) -> Result<Option<(f64, usize)>> {
    let rule = pool.rule();
    let (sigma0, pi0, s) = (pool.sigma0(), pool.pi0(), rule.s());
    let k = 1.0 - cfg.arb_fee;
    let eval = |v: f64| -> (f64, f64) {
        match direction {
            // x₁(y) = b(s·y):  g = s·b′ + p/(1−ε′),  g′ = s²·b″
            ArbDirection::BuyDomestic => {
                let b = partner(rule, sigma0, pi0, s * v);
                (s * b.d1 + fx_mid / k, s * s * b.d2)
            }
            // y₁(x) = b(x)/s:  g = b′/s + 1/(p(1−ε′)),  g′ = b″/s
            ArbDirection::BuyForeign => {
                let b = partner(rule, sigma0, pi0, v);
                (b.d1 / s + 1.0 / (fx_mid * k), b.d2 / s)
            }
            ArbDirection::None => unreachable!(),
        }
    };
    let v0 = match direction {
        ArbDirection::BuyDomestic => pool.y(),
        _ => pool.x(),
    };
    let (g0, _) = eval(v0);
    if !(g0 < 0.0) {
        return Ok(None);
    }

    let scale = v0.abs().max(1.0);
    let (mut lo, mut hi) = (v0, f64::INFINITY);
    let mut v = v0;
    let mut last_step = f64::INFINITY;
    for iter in 1..=cfg.max_iters {
        let (g, dg) = eval(v);
        if g == 0.0 {
            return Ok(Some((v, iter)));
        }
        if g < 0.0 {
            lo = lo.max(v);
        } else {
            hi = hi.min(v);
        }
        let newton = g / dg;
        if newton.abs() <= cfg.newton_tol * scale {
            return Ok(Some((v - newton, iter)));
        }
        let mut next = v - newton;
        // Keep the iterate inside the bracket; bisect (or expand) otherwise.
        if !(next.is_finite() && next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
        }
        last_step = next - v;
        v = next;
        if last_step.abs() <= cfg.newton_tol * scale {
            return Ok(Some((v, iter)));
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        last_step,
    })
}

/// Newton–Raphson optimum for the mixed rule (also valid for the product rule).
pub fn optimal_arb_mixed(pool: &PoolState, fx_mid: f64, cfg: &ArbConfig) -> Result<ArbSolution> {
    check_price(fx_mid)?;
    cfg.validate()?;
    if pool.rule().kind() == RuleKind::Sum {
        return Err(Error::Unsupported(
            "the sum rule has a linear profit with no interior optimum".into(),
        ));
    }
    let k = 1.0 - cfg.arb_fee;
    for direction in [ArbDirection::BuyDomestic, ArbDirection::BuyForeign] {
        if let Some((v_star, iters)) = newton_direction(pool, direction, fx_mid, cfg)? {
            let v0 = match direction {
                ArbDirection::BuyDomestic => pool.y(),
                _ => pool.x(),
            };
            let trade_in = (v_star - v0) / k;
            if trade_in > 0.0 {
                return solution_for(pool, direction, trade_in, fx_mid, cfg.arb_fee, iters);
            }
        }
    }
    Ok(ArbSolution::none())
}

/// Dispatches to the closed form (product) or Newton (mixed).
pub fn optimal_arb(pool: &PoolState, fx_mid: f64, cfg: &ArbConfig) -> Result<ArbSolution> {
    if pool.rule().is_product_curve() {
        return optimal_arb_product(pool, fx_mid, cfg.arb_fee);
    }
    match pool.rule().kind() {
        RuleKind::Product | RuleKind::Mixed => optimal_arb_mixed(pool, fx_mid, cfg),
        RuleKind::Sum => Err(Error::Unsupported(
            "arbitrage against a constant-sum pool is unbounded; disable arbitrage".into(),
        )),
    }
}

/// Brute-force optimum of Ω over a uniform grid of `grid` sizes in
/// `(0, 0.9 × deposited-token balance]`, both directions.
pub fn oracle_arb_grid(pool: &PoolState, fx_mid: f64, arb_fee: f64, grid: usize) -> Result<ArbSolution> {
    check_price(fx_mid)?;
    check_fee(arb_fee)?;
    if grid < 2 {
        return Err(Error::invalid("oracle grid needs at least 2 points"));
    }
    let mut best = ArbSolution::none();
    for direction in [ArbDirection::BuyDomestic, ArbDirection::BuyForeign] {
        let balance = match direction {
            ArbDirection::BuyDomestic => pool.y(),
            _ => pool.x(),
        };
        let step = 0.9 * balance / grid as f64;
        let found = par::argmax(grid, |i| {
            let size = (i + 1) as f64 * step;
            arb_profit(pool, direction, size, fx_mid, arb_fee).ok()
        });
        if let Some((i, profit)) = found {
            if profit > best.profit {
                let size = (i + 1) as f64 * step;
                best = solution_for(pool, direction, size, fx_mid, arb_fee, 0)?;
            }
        }
    }
    Ok(best)
}

/// Grid step used by [`oracle_arb_grid`] for the given direction.
pub fn oracle_step(pool: &PoolState, direction: ArbDirection, grid: usize) -> f64 {
    let balance = match direction {
        ArbDirection::BuyDomestic => pool.y(),
        _ => pool.x(),
    };
    0.9 * balance / grid as f64
}
