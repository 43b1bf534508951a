use std::fs;

use kelly_core::approx::{approximate, ApproxMethod};
use kelly_core::drawdown::{
    expected_drawdown_mc, maximize_growth_constrained, sample_drawdowns, ConstrainedConfig, ConstrainedMethod,
    ConstraintSpec, MonteCarloConfig,
};
use kelly_core::gamble::{independent, make_coin};
use kelly_core::growth::{log_growth, maximize_growth};
use kelly_core::market::{load_prices, to_returns};
use kelly_core::{Execution, GambleModel};

fn write_prices(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("prices.csv");
    let mut text = String::from("date,AAA,BBB\n");
    let (mut a, mut b) = (50.0f64, 80.0f64);
    for i in 0..120u64 {
        let day = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i);
        let f = i as f64;
        a *= 1.0 + 0.004 + 0.02 * (f * 1.7).sin();
        b *= 1.0 + 0.001 + 0.01 * (f * 0.6).cos();
        // one missing quote that must drop the whole row
        let b_text = if i == 40 { String::new() } else { format!("{b:.4}") };
        text.push_str(&format!("{day},{a:.4},{b_text}\n"));
    }
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn prices_to_model_file_to_optimizer() {
    let dir = tempfile::tempdir().unwrap();
    let report = load_prices(write_prices(dir.path()), None).unwrap();
    assert_eq!(report.dropped_rows, vec![41]);
    let pmf = to_returns(&report.series).unwrap();
    assert_eq!(pmf.model.atom_count(), 118);

    let model_path = dir.path().join("model.json");
    fs::write(&model_path, pmf.to_json()).unwrap();
    let model = GambleModel::load_json(&model_path).unwrap();
    assert_eq!(model.atoms(), pmf.model.atoms());

    let best = maximize_growth(&model, 1e-12).unwrap();
    assert!(best.converged);
    for method in [ApproxMethod::Taylor, ApproxMethod::Gbm] {
        let sol = approximate(&model, method).unwrap();
        assert!(best.g_star >= log_growth(&sol.k_repaired, &model).unwrap() - 1e-12);
    }
}

#[test]
fn execution_modes_agree_bitwise() {
    let c = make_coin(1.0, -1.0, 0.7).unwrap();
    let m = independent(&[c.clone(), c]).unwrap();
    let seq = MonteCarloConfig::new(3_000, 9).with_execution(Execution::Sequential);
    let par = MonteCarloConfig::new(3_000, 9).with_execution(Execution::Parallel);
    let a = sample_drawdowns(&m, &[0.2, 0.3], 60, &seq).unwrap();
    let b = sample_drawdowns(&m, &[0.2, 0.3], 60, &par).unwrap();
    assert_eq!(a, b);
    let ea = expected_drawdown_mc(&m, &[0.2, 0.3], 60, &seq).unwrap();
    let eb = expected_drawdown_mc(&m, &[0.2, 0.3], 60, &par).unwrap();
    assert_eq!(ea.value.to_bits(), eb.value.to_bits());
}

#[test]
fn constrained_two_coins_attaches_probe() {
    let c = make_coin(1.0, -1.0, 0.9).unwrap();
    let m = independent(&[c.clone(), c]).unwrap();
    let spec = ConstraintSpec::expected(0.5).unwrap();
    let r = maximize_growth_constrained(&m, 100, &spec, &ConstrainedConfig::new(MonteCarloConfig::new(1_000, 3)))
        .unwrap();
    assert_eq!(r.method, ConstrainedMethod::GridScan);
    assert!(r.slack >= 0.0);
    assert!(r.growth.g_star <= r.unconstrained.g_star);
    let probe = r.probe.expect("two-gamble scan carries a probe");
    assert_eq!(probe.grid.len(), 231);
    // the returned point is the best admitted grid point
    for p in probe.grid.iter().filter(|p| p.in_set) {
        assert!(log_growth(&p.k, &m).unwrap() <= r.growth.g_star + 1e-15);
    }
}

#[test]
fn result_serializes() {
    let coin = make_coin(0.15, -0.95, 0.95).unwrap();
    let spec = ConstraintSpec::probabilistic(0.5, 0.2).unwrap();
    let r = maximize_growth_constrained(&coin, 50, &spec, &ConstrainedConfig::new(MonteCarloConfig::new(500, 1)))
        .unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"method\""));
    let back: kelly_core::drawdown::ConstrainedResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back.growth, r.growth);
    assert_eq!(back.method, r.method);
}
