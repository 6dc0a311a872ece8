use std::path::PathBuf;

use fxamm::analytics::{
    distribution_table, regress_pnl, regression_table, KeyVariables, SweepAxis, SweepCell, VolumeVariance,
};
use fxamm::arbitrage::ArbConfig;
use fxamm::cfmm::{quote_exact_in, quote_exact_out};
use fxamm::market_data::{
    normalize_session, parse_bars, slice_sessions, synth_raw_sessions, synth_sessions, write_bars, BarFormat, Session,
    SlicePolicy, SynthConfig,
};
use fxamm::simulator::{
    result_table, run_batch, run_session, step_table, ArbPricing, OrderMode, SimConfig, SpreadWeighting,
};
use fxamm::table::{Cell, Table};
use fxamm::{CfmmRule, PoolState, RuleKind, Side};

use crate::error::CliError;
use crate::output::{Fingerprint, Format, Outputs};
use crate::settings::{parse_list, Resolver};
use crate::{
    Cli, Command, CommonArgs, GenDataArgs, ModelArgs, QuoteArgs, SimulateArgs, SourceArgs, SweepArgs, SynthArgs,
};

pub const QUOTE_COLUMNS: [&str; 9] = [
    "rule",
    "alpha",
    "size",
    "util_foreign",
    "bid_dom_per_for",
    "ask_dom_per_for",
    "util_domestic",
    "bid_for_per_dom",
    "ask_for_per_dom",
];

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Quote(a) => quote(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::GenData(a) => gen_data(a),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

struct Common {
    format: Format,
    output: Option<PathBuf>,
    seed: u64,
}

fn common(r: &mut Resolver, c: &CommonArgs) -> Result<Common, CliError> {
    let json = r.switch("json", c.json)?;
    let output = r.path("output", c.output.clone())?;
    let seed = r.value("seed", c.seed, 0u64)?;
    let threads = r.local("threads", c.threads)?;
    init_threads(threads)?;
    Ok(Common {
        format: if json { Format::Json } else { Format::Csv },
        output,
        seed,
    })
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(invalid("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(format!("thread pool: {e}"))),
        None => Ok(()),
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(invalid("--threads must be at least 1")),
        _ => Ok(()),
    }
}

fn rule_kind(r: &mut Resolver, c: &CommonArgs) -> Result<RuleKind, CliError> {
    let name = r.value("rule", c.rule.clone(), "mixed".to_string())?;
    match name.as_str() {
        "sum" => Ok(RuleKind::Sum),
        "product" => Ok(RuleKind::Product),
        "mixed" => Ok(RuleKind::Mixed),
        other => Err(invalid(format!("unknown rule `{other}`"))),
    }
}

/// Alphas only mean something for the mixed rule.
fn alphas(r: &mut Resolver, c: &CommonArgs, kind: RuleKind) -> Result<Vec<f64>, CliError> {
    if kind != RuleKind::Mixed {
        if c.alpha.is_some() {
            return Err(invalid("--alpha only applies to --rule mixed"));
        }
        return Ok(vec![0.0]);
    }
    let raw = r.value("alpha", c.alpha.clone(), "5".to_string())?;
    parse_list("alpha", &raw)
}

fn bp(v: f64) -> f64 {
    v / 10_000.0
}

fn choice(
    r: &mut Resolver,
    key: &str,
    flag: Option<String>,
    default: &str,
    allowed: &[&str],
) -> Result<String, CliError> {
    let v = r.value(key, flag, default.to_string())?;
    if !allowed.contains(&v.as_str()) {
        return Err(invalid(format!(
            "--{key}: expected one of {}, got `{v}`",
            allowed.join(", ")
        )));
    }
    Ok(v)
}

fn sim_config(
    r: &mut Resolver,
    c: &CommonArgs,
    m: &ModelArgs,
    kind: RuleKind,
    alpha: f64,
) -> Result<SimConfig, CliError> {
    let fee_bp = r.value("fee-bp", c.fee_bp, 1.0)?;
    let arb_fee_bp = r.value("arb-fee-bp", c.arb_fee_bp, fee_bp)?;
    let liquidity = r.value("liquidity", c.liquidity, 1.0)?;
    let no_arb = r.switch("no-arb", m.no_arb)?;
    let order_mode = match choice(r, "order-mode", m.order_mode.clone(), "joint", &["joint", "sequential"])?.as_str() {
        "joint" => OrderMode::Joint,
        _ => OrderMode::Sequential,
    };
    let arb_pricing = match choice(
        r,
        "arb-pricing",
        m.arb_pricing.clone(),
        "lagged",
        &["lagged", "current"],
    )?
    .as_str()
    {
        "lagged" => ArbPricing::Lagged,
        _ => ArbPricing::Current,
    };
    let weighting = choice(
        r,
        "spread-weighting",
        m.spread_weighting.clone(),
        "by-fill",
        &["by-fill", "as-printed"],
    )?;
    let spread_weighting = if weighting == "by-fill" {
        SpreadWeighting::ByFill
    } else {
        SpreadWeighting::AsPrinted
    };
    let cfg = SimConfig {
        rule: CfmmRule::new(kind, alpha, 1.0)?,
        fee: bp(fee_bp),
        liquidity_multiple: liquidity,
        arb_enabled: !no_arb,
        arb: ArbConfig {
            arb_fee: bp(arb_fee_bp),
            ..ArbConfig::default()
        },
        order_mode,
        arb_pricing,
        spread_weighting,
        record_steps: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn synth_config(r: &mut Resolver, s: &SynthArgs, seed: u64) -> Result<SynthConfig, CliError> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        seed,
        n_sessions: r.value("sessions", s.sessions, 780)?,
        daily_vol: r.value("daily-vol", s.daily_vol, d.daily_vol)?,
        half_spread_bp: r.value("half-spread-bp", s.half_spread_bp, d.half_spread_bp)?,
        volume_concentration: r.value("volume-concentration", s.volume_concentration, d.volume_concentration)?,
        pair: r.value("pair", s.pair.clone(), d.pair.clone())?,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

fn any_synth_flag(s: &SynthArgs) -> bool {
    s.sessions.is_some() || s.daily_vol.is_some() || s.half_spread_bp.is_some() || s.volume_concentration.is_some()
}

/// Sessions from `--input` or `--synthetic`, plus the input fingerprint.
fn load_sessions(
    r: &mut Resolver,
    src: &SourceArgs,
    seed: u64,
) -> Result<(Vec<Session>, Option<Fingerprint>), CliError> {
    let synthetic = r.switch("synthetic", src.synthetic)?;
    let input = r.path("input", src.input.clone())?;
    match (synthetic, input) {
        (true, Some(_)) => Err(invalid("--input and --synthetic are mutually exclusive")),
        (false, None) => Err(invalid("one of --input or --synthetic is required")),
        (true, None) => {
            let cfg = synth_config(r, &src.synth, seed)?;
            Ok((synth_sessions(&cfg)?, None))
        }
        (false, Some(path)) => {
            if any_synth_flag(&src.synth) {
                return Err(invalid("synthetic-data flags require --synthetic"));
            }
            let pair = r.value("pair", src.synth.pair.clone(), SynthConfig::default().pair)?;
            let policy = SlicePolicy {
                min_real_bars: r.value("min-bars", src.min_bars, SlicePolicy::default().min_real_bars)?,
                ..SlicePolicy::default()
            };
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let bars = parse_bars(&bytes[..], &BarFormat::default()).map_err(|e| match CliError::from(e) {
                CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
                other => other,
            })?;
            let report = slice_sessions(&bars, &policy);
            for d in &report.dropped {
                eprintln!("fxamm: dropped {} ({} real bars)", d.date, d.real_bars);
            }
            if report.sessions.is_empty() {
                return Err(invalid(format!("{}: no complete sessions", path.display())));
            }
            let sessions = report
                .sessions
                .iter()
                .map(|s| normalize_session(s, &pair))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((sessions, Some(Fingerprint::of(&path, &bytes))))
        }
    }
}

fn volume_measure(r: &mut Resolver, flag: Option<String>) -> Result<VolumeVariance, CliError> {
    Ok(
        match choice(r, "volume-measure", flag, "net", &["net", "total", "per-side"])?.as_str() {
            "net" => VolumeVariance::Net,
            "total" => VolumeVariance::Total,
            _ => VolumeVariance::PerSide,
        },
    )
}

fn rule_label(kind: RuleKind) -> &'static str {
    match kind {
        RuleKind::Sum => "sum",
        RuleKind::Product => "product",
        RuleKind::Mixed => "mixed",
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let common = common(&mut r, &a.common)?;
    let kind = rule_kind(&mut r, &a.common)?;
    let alpha = match alphas(&mut r, &a.common, kind)?.as_slice() {
        [one] => *one,
        _ => return Err(invalid("simulate takes a single --alpha; use sweep for several")),
    };
    let cfg = sim_config(&mut r, &a.common, &a.model, kind, alpha)?;
    let (sessions, input) = load_sessions(&mut r, &a.source, common.seed)?;
    let summary = r.path("summary", a.summary.clone())?;
    let regression = r.path("regression", a.regression.clone())?;
    let measure = volume_measure(&mut r, a.volume_measure.clone())?;
    let dump = r.path("dump-steps", a.dump_steps.clone())?;
    let dump_session = r.local("dump-session", a.dump_session)?;
    if dump.is_none() && dump_session.is_some() {
        return Err(invalid("--dump-session requires --dump-steps"));
    }
    let dump_session = dump_session.unwrap_or(0);
    if dump.is_some() && dump_session >= sessions.len() {
        return Err(invalid(format!(
            "--dump-session {dump_session} out of range ({} sessions)",
            sessions.len()
        )));
    }
    let config = r.finish()?;

    let results = run_batch(&sessions, &cfg);
    let failed = results.iter().filter(|r| r.is_err()).count();
    eprintln!("fxamm: {} sessions, {failed} failed", sessions.len());

    let mut out = Outputs::new(common.format, common.output);
    out.primary(&result_table(&sessions, &results))?;
    if let Some(path) = summary {
        let cell = SweepCell {
            value: alpha,
            sessions: results
                .iter()
                .map(|r| r.as_ref().map(KeyVariables::from_session).map_err(Clone::clone))
                .collect(),
        };
        out.extra(path, &distribution_table(rule_label(kind), &[cell]))?;
    }
    if let Some(path) = regression {
        let (ok_results, ok_sessions): (Vec<_>, Vec<_>) = results
            .iter()
            .zip(&sessions)
            .filter_map(|(r, s)| r.as_ref().ok().map(|r| (r.clone(), s.clone())))
            .unzip();
        let (u, h) = regress_pnl(&ok_results, &ok_sessions, measure)?;
        out.extra(path, &regression_table(measure, &u, &h))?;
    }
    if let Some(path) = dump {
        let step_cfg = SimConfig {
            record_steps: true,
            ..cfg
        };
        let rec = run_session(&sessions[dump_session], &step_cfg).map_err(|e| e.in_session(dump_session))?;
        out.extra(path, &step_table(&rec))?;
    }
    out.finish("simulate", Some(common.seed), config, input)
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let common = common(&mut r, &a.common)?;
    let axis = match choice(&mut r, "axis", a.axis.clone(), "alpha", &["alpha", "fee", "liquidity"])?.as_str() {
        "alpha" => SweepAxis::Alpha,
        "fee" => SweepAxis::Fee,
        _ => SweepAxis::Liquidity,
    };
    let kind = rule_kind(&mut r, &a.common)?;
    let base_alpha = if axis == SweepAxis::Alpha {
        if kind != RuleKind::Mixed {
            return Err(invalid("--axis alpha requires --rule mixed"));
        }
        if a.common.alpha.is_some() {
            return Err(invalid("--axis alpha takes its grid from --values"));
        }
        0.0
    } else {
        match alphas(&mut r, &a.common, kind)?.as_slice() {
            [one] => *one,
            _ => return Err(invalid("sweep takes a single --alpha unless --axis alpha")),
        }
    };
    let default_values = match axis {
        SweepAxis::Alpha => "0,1,5,25",
        SweepAxis::Fee => "0,1,5,10",
        SweepAxis::Liquidity => "0.5,1,2,4",
    };
    let values = parse_list(
        "values",
        &r.value("values", a.values.clone(), default_values.to_string())?,
    )?;
    let base = sim_config(&mut r, &a.common, &a.model, kind, base_alpha)?;
    let (sessions, input) = load_sessions(&mut r, &a.source, common.seed)?;
    let config = r.finish()?;

    let (label, grid): (&str, Vec<f64>) = match axis {
        SweepAxis::Fee => ("fee_bp", values.iter().map(|&v| bp(v)).collect()),
        other => (other.name(), values.clone()),
    };
    let mut cells = fxamm::analytics::sweep(&sessions, &base, axis, &grid)?;
    for (cell, &v) in cells.iter_mut().zip(&values) {
        cell.value = v;
        if cell.failures() > 0 {
            eprintln!(
                "fxamm: {label}={v}: {} of {} sessions failed",
                cell.failures(),
                sessions.len()
            );
        }
    }
    let mut out = Outputs::new(common.format, common.output);
    out.primary(&distribution_table(label, &cells))?;
    out.finish("sweep", Some(common.seed), config, input)
}

fn quote_row(pool: &PoolState, kind: RuleKind, alpha: f64, size: f64) -> Vec<Cell> {
    let rate = |f: fxamm::Result<fxamm::Fill>, dom_per_for: bool| -> Cell {
        f.ok()
            .map(|f| if dom_per_for { f.rate() } else { 1.0 / f.rate() })
            .into()
    };
    vec![
        rule_label(kind).into(),
        if kind == RuleKind::Mixed {
            alpha.into()
        } else {
            Cell::Empty
        },
        size.into(),
        (size / pool.y()).into(),
        // client sells `size` foreign
        rate(quote_exact_in(pool, Side::RedeemDomestic, size), true),
        // client buys `size` foreign
        rate(quote_exact_out(pool, Side::RedeemForeign, size), true),
        (size / pool.x()).into(),
        // client sells `size` domestic
        rate(quote_exact_in(pool, Side::RedeemForeign, size), false),
        // client buys `size` domestic
        rate(quote_exact_out(pool, Side::RedeemDomestic, size), false),
    ]
}

fn reject(given: bool, flag: &str, command: &str) -> Result<(), CliError> {
    if given {
        return Err(invalid(format!("--{flag} is not used by {command}")));
    }
    Ok(())
}

fn quote(a: QuoteArgs) -> Result<(), CliError> {
    let c = &a.common;
    reject(c.arb_fee_bp.is_some(), "arb-fee-bp", "quote")?;
    let mut r = Resolver::new(c.config.as_deref())?;
    let common = common(&mut r, c)?;
    let kind = rule_kind(&mut r, c)?;
    let alphas = alphas(&mut r, c, kind)?;
    let fee = bp(r.value("fee-bp", c.fee_bp, 1.0)?);
    let liquidity = r.value("liquidity", c.liquidity, 1.0)?;
    let s = r.value("s", a.s, 1.25)?;
    let n0 = r.value("n0", a.n0, 10_000.0)?;
    let sizes = parse_list("sizes", &r.value("sizes", a.sizes.clone(), "1..100".to_string())?)?;
    let config = r.finish()?;
    if sizes.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(invalid("--sizes must be positive"));
    }
    let y0 = n0 * liquidity;
    let mut table = Table::new(&QUOTE_COLUMNS);
    for &alpha in &alphas {
        let pool = PoolState::new(CfmmRule::new(kind, alpha, s)?, s * y0, y0, fee)?;
        for &size in &sizes {
            table.push(quote_row(&pool, kind, alpha, size));
        }
    }
    let mut out = Outputs::new(common.format, common.output);
    out.primary(&table)?;
    out.finish("quote", Some(common.seed), config, None)
}

fn gen_data(a: GenDataArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(a.config.as_deref())?;
    let output = r.path("output", a.output.clone())?;
    let seed = r.value("seed", a.seed, 0u64)?;
    let cfg = synth_config(&mut r, &a.synth, seed)?;
    let config = r.finish()?;
    let bars: Vec<_> = synth_raw_sessions(&cfg)?.into_iter().flat_map(|s| s.bars).collect();
    let mut buf = Vec::new();
    write_bars(&mut buf, &bars, &BarFormat::default())?;
    let mut out = Outputs::new(Format::Csv, output.clone());
    match output {
        Some(path) => out.raw(path, buf),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(&buf)?;
        }
    }
    out.finish("gen-data", Some(seed), config, None)
}
