//! Two-token constant-function market maker: pool invariants and quoting.
//!
//! Balances are `x` (domestic token) and `y` (foreign token). The pool keeps the
//! invariant constants `Σ₀ = x₀ + s·y₀` and `Π₀ = s·x₀·y₀` fixed from creation.
//! Trades credit the pool with `(1 − ε)` of the deposited amount; the fee share
//! is reported on the [`Fill`] and accounted for outside the pool balances.
//!
//! All three rules are evaluated in "sum-term" coordinates: with one side of the
//! pool given as `a` (either `x` or `s·y`), the partner term `b` solves the
//! invariant and `a + b` is the sum term while `a·b` is the product term. The
//! mixed rule is symmetric under `(x, s·y) → (s·x, y)`, so a single root
//! function serves both directions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Sum,
    Product,
    Mixed,
}

/// Pool invariant with its equilibrium conversion rate `s` (domestic per foreign).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfmmRule {
    kind: RuleKind,
    alpha: f64,
    s: f64,
}

impl CfmmRule {
    pub fn new(kind: RuleKind, alpha: f64, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid(format!("equilibrium rate s must be positive, got {s}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be nonnegative, got {alpha}")));
        }
        Ok(CfmmRule { kind, alpha, s })
    }

    pub fn sum(s: f64) -> Result<Self> {
        Self::new(RuleKind::Sum, 0.0, s)
    }

    pub fn product(s: f64) -> Result<Self> {
        Self::new(RuleKind::Product, 0.0, s)
    }

    pub fn mixed(alpha: f64, s: f64) -> Result<Self> {
        Self::new(RuleKind::Mixed, alpha, s)
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    /// Weight of the sum term. Only meaningful for [`RuleKind::Mixed`].
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// True for the product rule and for the mixed rule at `α = 0`, which
    /// traces the same curve.
    pub fn is_product_curve(&self) -> bool {
        match self.kind {
            RuleKind::Product => true,
            RuleKind::Mixed => self.alpha == 0.0,
            RuleKind::Sum => false,
        }
    }
}

/// Which token leaves the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    RedeemDomestic,
    RedeemForeign,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::RedeemDomestic => Side::RedeemForeign,
            Side::RedeemForeign => Side::RedeemDomestic,
        }
    }
}

/// A quoted trade. `amount_in` is the gross deposit; the pool is credited
/// `amount_in - fee_paid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub side: Side,
    pub amount_out: f64,
    pub amount_in: f64,
    pub fee_paid: f64,
}

impl Fill {
    /// Deposit that actually lands in the pool.
    pub fn credited(&self) -> f64 {
        self.amount_in - self.fee_paid
    }

    /// Exchange rate of the fill in domestic units per foreign unit.
    pub fn rate(&self) -> f64 {
        match self.side {
            Side::RedeemDomestic => self.amount_out / self.amount_in,
            Side::RedeemForeign => self.amount_in / self.amount_out,
        }
    }
}

/// One known balance, used to solve for the other along the invariant curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Known {
    X(f64),
    Y(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    x: f64,
    y: f64,
    sigma0: f64,
    pi0: f64,
    fee: f64,
    rule: CfmmRule,
}

impl PoolState {
    /// Creates a pool with balances `(x0, y0)`; the invariant constants are
    /// derived from them and only change through [`PoolState::releveled`].
    pub fn new(rule: CfmmRule, x0: f64, y0: f64, fee: f64) -> Result<Self> {
        if !(x0.is_finite() && x0 > 0.0 && y0.is_finite() && y0 > 0.0) {
            return Err(Error::invalid(format!(
                "initial balances must be positive, got x={x0}, y={y0}"
            )));
        }
        check_fee(fee)?;
        let s = rule.s();
        Ok(PoolState {
            x: x0,
            y: y0,
            sigma0: x0 + s * y0,
            pi0: s * x0 * y0,
            fee,
            rule,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn fee(&self) -> f64 {
        self.fee
    }

    pub fn rule(&self) -> CfmmRule {
        self.rule
    }

    /// Balance of the token that `side` redeems.
    pub fn outgoing_balance(&self, side: Side) -> f64 {
        match side {
            Side::RedeemDomestic => self.x,
            Side::RedeemForeign => self.y,
        }
    }

    /// Pool value in domestic units at the price `p` (total value locked).
    pub fn value_at(&self, p: f64) -> f64 {
        self.x + p * self.y
    }

    pub fn residual(&self) -> f64 {
        raw_residual(self.rule, self.sigma0, self.pi0, self.x, self.y)
    }

    /// Rescales the invariant constants homothetically (`Σ → λΣ₀`, `Π → λ²Π₀`)
    /// so that the curve passes through the current balances. Used when
    /// simultaneous fills leave the pool off its curve.
    pub fn releveled(&self) -> Result<PoolState> {
        let (x, y) = (self.x, self.y);
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::domain(format!("balances must be positive, got x={x}, y={y}")));
        }
        let s = self.rule.s();
        let (sigma, pi) = match self.rule.kind() {
            _ if self.rule.is_product_curve() => {
                let pi = s * x * y;
                (self.sigma0 * (pi / self.pi0).sqrt(), pi)
            }
            RuleKind::Sum => {
                let lambda = (x + s * y) / self.sigma0;
                (x + s * y, lambda * lambda * self.pi0)
            }
            RuleKind::Product | RuleKind::Mixed => {
                let lambda = mixed_level(self.rule.alpha(), self.pi0 / (s * x * y), (x + s * y) / self.sigma0)?;
                (lambda * self.sigma0, lambda * lambda * self.pi0)
            }
        };
        Ok(PoolState {
            sigma0: sigma,
            pi0: pi,
            ..*self
        })
    }

    pub(crate) fn with_balances(&self, x: f64, y: f64) -> PoolState {
        PoolState { x, y, ..*self }
    }
}

/// Positive root of `g(u) = a·u² − 1 − α(c/u − 1)`, which is increasing in `u`.
fn mixed_level(alpha: f64, a: f64, c: f64) -> Result<f64> {
    let g = |u: f64| a * u * u - 1.0 - alpha * (c / u - 1.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::domain("cannot place the pool on a rescaled curve"));
        }
    }
    let mut u = 1.0;
    for _ in 0..200 {
        let gu = g(u);
        if gu == 0.0 {
            return Ok(u);
        }
        if gu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let slope = 2.0 * a * u + alpha * c / (u * u);
        let mut next = u - gu / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * u {
            return Ok(next);
        }
        u = next;
    }
    Err(Error::NoConvergence {
        iterations: 200,
        last_step: hi - lo,
    })
}

pub(crate) fn check_fee(fee: f64) -> Result<()> {
    if fee.is_finite() && (0.0..1.0).contains(&fee) {
        Ok(())
    } else {
        Err(Error::invalid(format!("fee must lie in [0, 1), got {fee}")))
    }
}

fn check_constants(sigma0: f64, pi0: f64) -> Result<()> {
    if sigma0.is_finite() && sigma0 > 0.0 && pi0.is_finite() && pi0 > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "invariant constants must be positive, got sigma0={sigma0}, pi0={pi0}"
        )))
    }
}

fn raw_residual(rule: CfmmRule, sigma0: f64, pi0: f64, x: f64, y: f64) -> f64 {
    let s = rule.s();
    match rule.kind() {
        RuleKind::Sum => x + s * y - sigma0,
        RuleKind::Product => s * x * y - pi0,
        RuleKind::Mixed => (pi0 / (s * x * y) - 1.0) - rule.alpha() * ((x + s * y) / sigma0 - 1.0),
    }
}

/// Evaluates the pool invariant `F(x, y)`; zero on the curve.
pub fn invariant_residual(rule: CfmmRule, sigma0: f64, pi0: f64, x: f64, y: f64) -> Result<f64> {
    check_constants(sigma0, pi0)?;
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(format!("balances must be positive, got x={x}, y={y}")));
    }
    Ok(raw_residual(rule, sigma0, pi0, x, y))
}

/// First two derivatives of the partner sum-term `b(a)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Partner {
    pub d1: f64,
    pub d2: f64,
}

/// Solves the invariant for the partner term `b` given `a`, where `{a, b}` is
/// `{x, s·y}` in either order. For the sum rule `b` may come out nonpositive;
/// callers decide whether that is a domain or a liquidity error.
pub(crate) fn partner_value(rule: CfmmRule, sigma0: f64, pi0: f64, a: f64) -> f64 {
    match rule.kind() {
        RuleKind::Sum => sigma0 - a,
        RuleKind::Product => pi0 / a,
        RuleKind::Mixed => {
            let alpha = rule.alpha();
            let at = alpha / sigma0;
            let b_lin = (1.0 - alpha) + at * a;
            let sq = (b_lin * b_lin + 4.0 * at * pi0 / a).sqrt();
            // +sqrt(D) root; pick the cancellation-free form for the sign of B.
            if b_lin >= 0.0 {
                2.0 * pi0 / (a * (b_lin + sq))
            } else {
                (sq - b_lin) / (2.0 * at)
            }
        }
    }
}

/// `db/da` and `d²b/da²` of [`partner_value`], differentiated from
/// the closed-form root.
pub(crate) fn partner(rule: CfmmRule, sigma0: f64, pi0: f64, a: f64) -> Partner {
    match rule.kind() {
        RuleKind::Sum => Partner { d1: -1.0, d2: 0.0 },
        RuleKind::Product => Partner {
            d1: -pi0 / (a * a),
            d2: 2.0 * pi0 / (a * a * a),
        },
        RuleKind::Mixed => {
            let alpha = rule.alpha();
            let at = alpha / sigma0;
            let b_lin = (1.0 - alpha) + at * a;
            let disc = b_lin * b_lin + 4.0 * at * pi0 / a;
            let sq = disc.sqrt();
            let n = b_lin - 2.0 * pi0 / (a * a);
            let dn = at + 4.0 * pi0 / (a * a * a);
            Partner {
                d1: 0.5 * (-1.0 + n / sq),
                d2: 0.5 * (dn / sq - at * n * n / (sq * disc)),
            }
        }
    }
}

/// Returns the other balance such that the invariant holds at the given one.
pub fn solve_counterparty_balance(rule: CfmmRule, sigma0: f64, pi0: f64, known: Known) -> Result<f64> {
    check_constants(sigma0, pi0)?;
    let s = rule.s();
    let (a, scale) = match known {
        Known::X(x) if x > 0.0 => (x, 1.0 / s),
        Known::Y(y) if y > 0.0 => (s * y, 1.0),
        _ => return Err(Error::domain(format!("known balance must be positive, got {known:?}"))),
    };
    let b = partner_value(rule, sigma0, pi0, a);
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain(format!(
            "no positive counterparty balance for {known:?} (sum term {sigma0})"
        )));
    }
    Ok(b * scale)
}

/// Curve point reached after moving the pool to a new balance on one side.
fn counterparty_raw(pool: &PoolState, known: Known) -> f64 {
    let s = pool.rule.s();
    match known {
        Known::X(x) => partner_value(pool.rule, pool.sigma0, pool.pi0, x) / s,
        Known::Y(y) => partner_value(pool.rule, pool.sigma0, pool.pi0, s * y),
    }
}

fn check_amount(amount: f64, what: &str) -> Result<()> {
    if amount.is_finite() && amount > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive, got {amount}")))
    }
}

/// Quote for redeeming exactly `amount_out` of the `side` token.
pub fn quote_exact_out(pool: &PoolState, side: Side, amount_out: f64) -> Result<Fill> {
    quote_exact_out_at(pool, side, amount_out, pool.fee)
}

pub(crate) fn quote_exact_out_at(pool: &PoolState, side: Side, amount_out: f64, fee: f64) -> Result<Fill> {
    check_amount(amount_out, "amount_out")?;
    let available = pool.outgoing_balance(side);
    if amount_out >= available {
        return Err(Error::InsufficientLiquidity {
            requested: amount_out,
            available,
        });
    }
    // Pool-side change on the deposited token, before fee grossing.
    let net_in = match side {
        Side::RedeemDomestic => counterparty_raw(pool, Known::X(pool.x - amount_out)) - pool.y,
        Side::RedeemForeign => counterparty_raw(pool, Known::Y(pool.y - amount_out)) - pool.x,
    };
    if !(net_in > 0.0) || !net_in.is_finite() {
        return Err(Error::Inconsistent(format!(
            "redeeming {amount_out} requires a nonpositive deposit ({net_in}); pool is off its curve"
        )));
    }
    let amount_in = net_in / (1.0 - fee);
    Ok(Fill {
        side,
        amount_out,
        amount_in,
        fee_paid: fee * amount_in,
    })
}

/// Quote for depositing exactly `amount_in` and redeeming the `side` token.
pub fn quote_exact_in(pool: &PoolState, side: Side, amount_in: f64) -> Result<Fill> {
    quote_exact_in_at(pool, side, amount_in, pool.fee)
}

pub(crate) fn quote_exact_in_at(pool: &PoolState, side: Side, amount_in: f64, fee: f64) -> Result<Fill> {
    check_amount(amount_in, "amount_in")?;
    let net_in = (1.0 - fee) * amount_in;
    let available = pool.outgoing_balance(side);
    let remaining = match side {
        Side::RedeemDomestic => counterparty_raw(pool, Known::Y(pool.y + net_in)),
        Side::RedeemForeign => counterparty_raw(pool, Known::X(pool.x + net_in)),
    };
    let amount_out = available - remaining;
    if !(remaining > 0.0) {
        return Err(Error::InsufficientLiquidity {
            requested: amount_out,
            available,
        });
    }
    if !(amount_out > 0.0) || !amount_out.is_finite() {
        return Err(Error::Inconsistent(format!(
            "depositing {amount_in} yields a nonpositive redemption ({amount_out}); pool is off its curve"
        )));
    }
    Ok(Fill {
        side,
        amount_out,
        amount_in,
        fee_paid: fee * amount_in,
    })
}

/// Applies a fill and returns the new pool state.
pub fn apply_fill(pool: &PoolState, fill: &Fill) -> Result<PoolState> {
    if !(fill.amount_in > 0.0 && fill.amount_out > 0.0 && fill.fee_paid >= 0.0) {
        return Err(Error::Inconsistent(format!("malformed fill {fill:?}")));
    }
    let credited = fill.credited();
    let (x, y) = match fill.side {
        Side::RedeemDomestic => (pool.x - fill.amount_out, pool.y + credited),
        Side::RedeemForeign => (pool.x + credited, pool.y - fill.amount_out),
    };
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Inconsistent(format!(
            "fill would leave nonpositive balances x={x}, y={y}"
        )));
    }
    Ok(pool.with_balances(x, y))
}

/// Fee-free marginal exchange rate of the pool, domestic per foreign.
///
/// Uses implicit differentiation of the invariant at the current balances, so
/// it is exact even if rounding has moved the pool slightly off its curve.
pub fn marginal_rate(pool: &PoolState) -> Result<f64> {
    let (x, y) = (pool.x, pool.y);
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(format!("balances must be positive, got x={x}, y={y}")));
    }
    let rule = pool.rule;
    let s = rule.s();
    if rule.is_product_curve() {
        return Ok(x / y);
    }
    Ok(match rule.kind() {
        RuleKind::Sum => s,
        RuleKind::Product | RuleKind::Mixed => {
            let at = rule.alpha() / pool.sigma0;
            let pi0 = pool.pi0;
            s * (pi0 / (s * s * y * y * x) + at) / (pi0 / (s * y * x * x) + at)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn product_unit() -> PoolState {
        PoolState::new(CfmmRule::product(1.0).unwrap(), 1.0, 1.0, 0.0).unwrap()
    }

    /// Bisection on the invariant residual, independent of the closed-form root.
    fn bisect_y(rule: CfmmRule, sigma0: f64, pi0: f64, x: f64) -> f64 {
        let f = |y: f64| raw_residual(rule, sigma0, pi0, x, y);
        let (mut lo, mut hi) = (1e-9, 1e3);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn residual_examples() {
        let sum = CfmmRule::sum(1.25).unwrap();
        assert_eq!(invariant_residual(sum, 22500.0, 1.0, 12500.0, 8000.0).unwrap(), 0.0);
        let prod = CfmmRule::product(1.0).unwrap();
        assert_eq!(invariant_residual(prod, 2.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        let mixed = CfmmRule::mixed(5.0, 1.0).unwrap();
        let r = invariant_residual(mixed, 2.0, 1.0, 0.9, 1.10296).unwrap();
        assert!(r.abs() < 1e-5, "{r}");
    }

    #[test]
    fn residual_rejects_nonpositive_balances() {
        let prod = CfmmRule::product(1.0).unwrap();
        assert!(matches!(
            invariant_residual(prod, 2.0, 1.0, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            invariant_residual(prod, 2.0, 1.0, 1.0, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn counterparty_examples() {
        let prod = CfmmRule::product(1.0).unwrap();
        assert_relative_eq!(solve_counterparty_balance(prod, 2.0, 1.0, Known::X(0.5)).unwrap(), 2.0);

        let m0 = CfmmRule::mixed(0.0, 1.0).unwrap();
        let y0 = solve_counterparty_balance(m0, 2.0, 1.0, Known::X(0.8)).unwrap();
        let yp = solve_counterparty_balance(prod, 2.0, 1.0, Known::X(0.8)).unwrap();
        assert_eq!(y0, yp);
        assert_relative_eq!(y0, 1.25, max_relative = 1e-15);

        let m5 = CfmmRule::mixed(5.0, 1.0).unwrap();
        let y = solve_counterparty_balance(m5, 2.0, 1.0, Known::X(0.9)).unwrap();
        let oracle = bisect_y(m5, 2.0, 1.0, 0.9);
        assert!((y - oracle).abs() < 1e-12, "{y} vs {oracle}");
        // mpmath reference root of the mixed invariant at x = 0.9
        assert!((y - 1.102_957_133_205_101).abs() < 1e-12);
        assert!(raw_residual(m5, 2.0, 1.0, 0.9, y).abs() < 1e-9);
    }

    #[test]
    fn counterparty_symmetric_in_known_side() {
        let m = CfmmRule::mixed(3.0, 1.25).unwrap();
        let pool = PoolState::new(m, 12500.0, 10000.0, 0.0).unwrap();
        let y = solve_counterparty_balance(m, pool.sigma0(), pool.pi0(), Known::X(11000.0)).unwrap();
        let x = solve_counterparty_balance(m, pool.sigma0(), pool.pi0(), Known::Y(y)).unwrap();
        assert_relative_eq!(x, 11000.0, max_relative = 1e-12);
    }

    #[test]
    fn counterparty_domain_errors() {
        let sum = CfmmRule::sum(1.0).unwrap();
        assert!(solve_counterparty_balance(sum, 2.0, 1.0, Known::X(2.0)).is_err());
        assert!(solve_counterparty_balance(sum, 2.0, 1.0, Known::Y(2.5)).is_err());
        assert!(solve_counterparty_balance(sum, 2.0, 1.0, Known::X(1.5)).is_ok());
        let prod = CfmmRule::product(1.0).unwrap();
        assert!(solve_counterparty_balance(prod, 2.0, 1.0, Known::X(0.0)).is_err());
        assert!(solve_counterparty_balance(prod, 2.0, 1.0, Known::Y(-1.0)).is_err());
    }

    #[test]
    fn mixed_partner_derivatives_match_finite_differences() {
        for &alpha in &[0.0, 0.5, 5.0, 100.0] {
            let rule = CfmmRule::mixed(alpha, 1.0).unwrap();
            for &a in &[0.3, 0.9, 1.0, 1.4] {
                let p = partner(rule, 2.0, 1.0, a);
                let h = 1e-5;
                let fp = partner_value(rule, 2.0, 1.0, a + h);
                let fm = partner_value(rule, 2.0, 1.0, a - h);
                let d1 = (fp - fm) / (2.0 * h);
                let d2 = (fp - 2.0 * partner_value(rule, 2.0, 1.0, a) + fm) / (h * h);
                assert_relative_eq!(p.d1, d1, max_relative = 1e-8);
                assert_relative_eq!(p.d2, d2, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn exact_out_examples() {
        let sum = CfmmRule::sum(1.25).unwrap();
        let pool = PoolState::new(sum, 12500.0, 10000.0, 0.0).unwrap();
        let fill = quote_exact_out(&pool, Side::RedeemDomestic, 1.25).unwrap();
        assert_relative_eq!(fill.amount_in, 1.0, max_relative = 1e-12);
        assert_eq!(fill.fee_paid, 0.0);

        let pool = PoolState::new(sum, 12500.0, 10000.0, 1e-4).unwrap();
        let fill = quote_exact_out(&pool, Side::RedeemDomestic, 1.25).unwrap();
        assert_relative_eq!(fill.amount_in, 1.25 / (1.25 * 0.9999), max_relative = 1e-12);
        assert_relative_eq!(fill.amount_in, 1.000_100_010_001, max_relative = 1e-12);
        assert_eq!(fill.fee_paid, 1e-4 * fill.amount_in);

        let fill = quote_exact_out(&product_unit(), Side::RedeemDomestic, 0.5).unwrap();
        assert_relative_eq!(fill.amount_in, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn exact_out_errors() {
        let pool = product_unit();
        assert!(matches!(
            quote_exact_out(&pool, Side::RedeemForeign, 1.0),
            Err(Error::InsufficientLiquidity { .. })
        ));
        assert!(matches!(
            quote_exact_out(&pool, Side::RedeemForeign, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            quote_exact_out(&pool, Side::RedeemForeign, -0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn exact_in_examples() {
        let fill = quote_exact_in(&product_unit(), Side::RedeemDomestic, 1.0).unwrap();
        assert_relative_eq!(fill.amount_out, 0.5, max_relative = 1e-15);

        let sum = CfmmRule::sum(1.25).unwrap();
        let pool = PoolState::new(sum, 12500.0, 10000.0, 1e-4).unwrap();
        for size in [1.0, 10.0, 100.0, 1000.0] {
            let fill = quote_exact_in(&pool, Side::RedeemDomestic, size).unwrap();
            assert_relative_eq!(fill.amount_out / size, 1.249875, max_relative = 1e-9);
        }
    }

    #[test]
    fn exact_in_errors() {
        let sum = CfmmRule::sum(1.0).unwrap();
        let pool = PoolState::new(sum, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            quote_exact_in(&pool, Side::RedeemDomestic, 1.0),
            Err(Error::InsufficientLiquidity { .. })
        ));
        assert!(quote_exact_in(&pool, Side::RedeemDomestic, 0.5).is_ok());
        assert!(matches!(
            quote_exact_in(&pool, Side::RedeemForeign, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn relevel_puts_pool_back_on_curve() {
        for rule in [
            CfmmRule::sum(1.0).unwrap(),
            CfmmRule::product(1.25).unwrap(),
            CfmmRule::mixed(5.0, 1.0).unwrap(),
            CfmmRule::mixed(0.3, 1.1).unwrap(),
        ] {
            let pool = PoolState::new(rule, 1.0, 1.0, 0.0).unwrap();
            let same = pool.releveled().unwrap();
            assert_relative_eq!(same.pi0(), pool.pi0(), max_relative = 1e-14);
            assert_relative_eq!(same.sigma0(), pool.sigma0(), max_relative = 1e-14);
            let off = pool.with_balances(1.003, 0.9995).releveled().unwrap();
            assert!(off.residual().abs() < 1e-13, "{rule:?} {}", off.residual());
            // homothetic: Π/Σ² is preserved
            assert_relative_eq!(
                off.pi0() / (off.sigma0() * off.sigma0()),
                pool.pi0() / (pool.sigma0() * pool.sigma0()),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn apply_fill_keeps_zero_fee_pool_on_curve() {
        let pool = product_unit();
        let fill = quote_exact_in(&pool, Side::RedeemForeign, 0.3).unwrap();
        let next = apply_fill(&pool, &fill).unwrap();
        assert!(next.residual().abs() < 1e-12);
        assert_eq!(next.sigma0(), pool.sigma0());
        assert_eq!(next.pi0(), pool.pi0());
        // input is untouched
        assert_eq!(pool.x(), 1.0);
    }

    #[test]
    fn apply_fill_rejects_overdraw() {
        let pool = product_unit();
        let fill = Fill {
            side: Side::RedeemDomestic,
            amount_out: 1.5,
            amount_in: 1.0,
            fee_paid: 0.0,
        };
        assert!(matches!(apply_fill(&pool, &fill), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn marginal_rate_examples() {
        assert_eq!(marginal_rate(&product_unit()).unwrap(), 1.0);
        let prod = CfmmRule::product(1.0).unwrap();
        let pool = PoolState::new(prod, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(marginal_rate(&pool).unwrap(), 2.0);
        let sum = CfmmRule::sum(1.25).unwrap();
        let pool = PoolState::new(sum, 3.0, 7.0, 0.0).unwrap();
        assert_eq!(marginal_rate(&pool).unwrap(), 1.25);
    }

    #[test]
    fn marginal_rate_is_limit_of_small_quotes() {
        let rule = CfmmRule::mixed(5.0, 1.0).unwrap();
        let pool = PoolState::new(rule, 1.0, 1.0, 0.0).unwrap();
        let pool = apply_fill(&pool, &quote_exact_in(&pool, Side::RedeemDomestic, 0.2).unwrap()).unwrap();
        let h = 1e-7;
        let fill = quote_exact_in(&pool, Side::RedeemDomestic, h).unwrap();
        assert_relative_eq!(fill.rate(), marginal_rate(&pool).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn invalid_rules_and_pools() {
        assert!(CfmmRule::sum(0.0).is_err());
        assert!(CfmmRule::mixed(-1.0, 1.0).is_err());
        let prod = CfmmRule::product(1.0).unwrap();
        assert!(PoolState::new(prod, 1.0, 1.0, 1.0).is_err());
        assert!(PoolState::new(prod, 0.0, 1.0, 0.0).is_err());
    }
}
