use equibound::bounds::{BoundName, Units};
use equibound::cli::{parse_config, render_config, render_csv, run_report, GaussianSpec, RunConfig};
use equibound::flem::FlemConfig;
use equibound::Error;

fn gaussian_config() -> RunConfig {
    RunConfig {
        samples: 4_000,
        seed: 9,
        flem: None,
        gaussian: Some(GaussianSpec {
            prior: Some(vec![0.5, 0.3, 0.2]),
            means: vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.5, 1.5]],
            variance: 0.8,
        }),
        ..RunConfig::default()
    }
}

#[test]
fn rendered_configs_parse_back_unchanged() {
    let flem = RunConfig {
        depth: Some(3),
        psbr_grid: Some(vec![0.5, 1.0]),
        flem: Some(FlemConfig { psbr: 2.5, ring_offset: 0.25, ..FlemConfig::default() }),
        ..RunConfig::default()
    };
    for config in [RunConfig::default(), flem, gaussian_config()] {
        let text = render_config(&config).unwrap();
        assert_eq!(parse_config(&text).unwrap(), config, "{text}");
    }
}

#[test]
fn unknown_keys_are_reported_with_their_path() {
    let err = parse_config("samples = 10\n[flem]\npsbr = 1.0\nimagerz = 4\n").unwrap_err();
    match err {
        Error::Config { key, .. } => assert!(key.starts_with("flem"), "{key}"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn bits_are_nats_over_ln2() {
    let report = run_report(&gaussian_config()).unwrap();
    for row in &report.rows {
        if row.failed() {
            continue;
        }
        let nats = row.value_in(Units::Nats);
        let bits = row.value_in(Units::Bits);
        if row.kind.is_information() {
            assert!((bits - nats / std::f64::consts::LN_2).abs() <= 1e-12 * nats.abs().max(1.0), "{}", row.name);
        } else {
            assert_eq!(bits, nats, "{} is a probability", row.name);
        }
    }
    let csv_bits = render_csv(&report, Units::Bits).unwrap();
    let csv_nats = render_csv(&report, Units::Nats).unwrap();
    let ee = |text: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with("EE,")).unwrap();
        line.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert!((ee(&csv_bits) - ee(&csv_nats) / std::f64::consts::LN_2).abs() < 1e-12);
    assert!((report.value(BoundName::Ee) - ee(&csv_nats)).abs() < 1e-15);
}
