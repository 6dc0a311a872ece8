use fxamm::market_data::{
    normalize_session, parse_bars, slice_sessions, synth_raw_sessions, synth_sessions, write_bars, BarFormat,
    SlicePolicy, SynthConfig, MINUTES_PER_SESSION,
};
use fxamm::Error;

#[test]
fn synthetic_sessions_are_deterministic_and_prefix_stable() {
    let cfg = SynthConfig {
        seed: 42,
        n_sessions: 5,
        ..SynthConfig::default()
    };
    let a = synth_sessions(&cfg).unwrap();
    let b = synth_sessions(&cfg).unwrap();
    assert_eq!(a, b);
    let longer = synth_sessions(&SynthConfig {
        n_sessions: 8,
        ..cfg.clone()
    })
    .unwrap();
    assert_eq!(&longer[..5], &a[..]);
    let other = synth_sessions(&SynthConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(other[0], a[0]);
    for s in &a {
        assert_eq!(s.bars().len(), MINUTES_PER_SESSION);
        assert_eq!(s.bars()[0].p_mid, 1.0);
        let mass: f64 = s.bars().iter().map(|b| b.v_bid + b.v_ask).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(s.date().format("%a").to_string() != "Sat");
    }
}

#[test]
fn csv_file_round_trip_reproduces_sessions() {
    let cfg = SynthConfig {
        seed: 7,
        n_sessions: 3,
        ..SynthConfig::default()
    };
    let raw = synth_raw_sessions(&cfg).unwrap();
    let bars: Vec<_> = raw.iter().flat_map(|s| s.bars.iter().cloned()).collect();
    let dir = std::env::temp_dir().join(format!("fxamm-md-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bars.csv");
    write_bars(std::fs::File::create(&path).unwrap(), &bars, &BarFormat::default()).unwrap();

    let parsed = parse_bars(std::fs::File::open(&path).unwrap(), &BarFormat::default()).unwrap();
    assert_eq!(parsed, bars);
    let report = slice_sessions(&parsed, &SlicePolicy::default());
    assert!(report.dropped.is_empty());
    let sessions: Vec<_> = report
        .sessions
        .iter()
        .map(|r| normalize_session(r, &cfg.pair).unwrap())
        .collect();
    assert_eq!(sessions, synth_sessions(&cfg).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn malformed_rows_report_their_line() {
    let text =
        "timestamp,bid_open,bid_high,bid_low,bid_close,ask_open,ask_high,ask_low,ask_close,bid_volume,ask_volume\n\
                2021-06-03T00:00Z,1.2,1.2,1.2,1.2,1.2001,1.2001,1.2001,1.2001,1,1\n\
                2021-06-03T00:01Z,1.2,1.2,1.2,1.2,oops,1.2001,1.2001,1.2001,1,1\n";
    match parse_bars(text.as_bytes(), &BarFormat::default()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}
