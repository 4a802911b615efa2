//! Estimators on the bundled fixture against scikit-learn reference values
//! (generated by python/reference_values.py), plus CSV round trips.

mod common;

use common::*;
use kardinal::market_data::{
    estimate_moments, ledoit_wolf, ledoit_wolf_with_intensity, read_prices, sample_covariance, synth_prices,
    window_returns, SynthParams, TRADING_DAYS,
};

const LW_SHRINKAGE: f64 = 0.03128786772174222;
const LW_COV: [f64; 100] = [0.00033242866507399307, 0.00015339381593999936, 0.0001834318348414645, 0.00020606891223508002, 7.293082738864395e-05, 4.9959034022675885e-05, 0.0003575737977199319, 8.117025105531163e-05, 0.00012256904457475233, 7.023061177761341e-05, 0.00015339381593999936, 0.00023932348286105675, 0.00016946490563557419, 0.00018339252734735873, 6.289051374418431e-05, 4.023676611903155e-05, 0.00030273612605550925, 4.2289214593637735e-05, 6.369195452066959e-05, 7.205693316797481e-05, 0.0001834318348414645, 0.00016946490563557419, 0.0003507477217899055, 0.00021033840893605068, 8.942283372034973e-05, 5.99139254621452e-05, 0.000344352297378217, 4.745752371756427e-05, 7.798366850019822e-05, 8.559745646464111e-05, 0.00020606891223508002, 0.00018339252734735873, 0.00021033840893605068, 0.00038760281682048144, 6.593007647522665e-05, 3.8680577813707006e-05, 0.0003475212486578142, 5.298319054596735e-05, 9.847913228665833e-05, 5.137520144946005e-05, 7.293082738864395e-05, 6.289051374418431e-05, 8.942283372034973e-05, 6.593007647522665e-05, 0.00020386547828091903, 0.00010329114687691602, 0.0001630487364427165, 4.177464147920644e-05, 5.5578796858903544e-05, 5.24340802870785e-05, 4.9959034022675885e-05, 4.023676611903155e-05, 5.99139254621452e-05, 3.8680577813707006e-05, 0.00010329114687691602, 0.000161260516914585, 0.00011626806995825304, 3.802505256413961e-05, 6.019607927808775e-05, 4.8384315418559066e-05, 0.0003575737977199319, 0.00030273612605550925, 0.000344352297378217, 0.0003475212486578142, 0.0001630487364427165, 0.00011626806995825304, 0.0011600645314625677, 0.00014126772001423217, 0.00020196087762560644, 0.00014931308017580156, 8.117025105531163e-05, 4.2289214593637735e-05, 4.745752371756427e-05, 5.298319054596735e-05, 4.177464147920644e-05, 3.802505256413961e-05, 0.00014126772001423217, 0.00022573860212494958, 0.0001616282709939528, 3.920924794224773e-05, 0.00012256904457475233, 6.369195452066959e-05, 7.798366850019822e-05, 9.847913228665833e-05, 5.5578796858903544e-05, 6.019607927808775e-05, 0.00020196087762560644, 0.0001616282709939528, 0.000358975601803119, 7.189218781392081e-05, 7.023061177761341e-05, 7.205693316797481e-05, 8.559745646464111e-05, 5.137520144946005e-05, 5.24340802870785e-05, 4.8384315418559066e-05, 0.00014931308017580156, 3.920924794224773e-05, 7.189218781392081e-05, 0.0002709470804659308];

#[test]
fn fixture_shape() {
    let panel = fixture();
    assert_eq!(panel.n_assets(), 10);
    assert_eq!(panel.n_rows(), 523);
    let r = window_returns(&panel, date("2025-01-02"), 180).unwrap();
    assert_eq!(r.shape(), (180, 10));
}

#[test]
fn ledoit_wolf_matches_sklearn() {
    let r = window_returns(&fixture(), date("2025-01-01"), 180).unwrap();
    let (cov, delta) = ledoit_wolf_with_intensity(&r).unwrap();
    assert!((delta - LW_SHRINKAGE).abs() < 1e-10, "{delta}");
    for (a, b) in cov.transpose().iter().zip(LW_COV.iter()) {
        assert!((a - b).abs() <= 1e-10 * b.abs(), "{a} vs {b}");
    }
    assert_eq!(ledoit_wolf(&r).unwrap(), cov);
}

#[test]
fn annualization_scales_daily_estimates() {
    let panel = fixture();
    let asof = date("2025-01-01");
    let m = estimate_moments(&panel, asof, 180).unwrap();
    let r = window_returns(&panel, asof, 180).unwrap();
    for i in 0..10 {
        let mean = r.column(i).mean();
        assert!((m.mu_ann[i] - mean * TRADING_DAYS).abs() < 1e-13);
    }
    assert!((m.sigma_ann[(3, 6)] - LW_COV[3 * 10 + 6] * TRADING_DAYS).abs() < 1e-12);
    assert_eq!(m.lookback_days, 180);
}

#[test]
fn sample_covariance_matches_two_pass_formula() {
    let r = window_returns(&fixture(), date("2025-06-02"), 60).unwrap();
    let s = sample_covariance(&r).unwrap();
    let n = r.nrows() as f64;
    for i in 0..10 {
        for j in 0..10 {
            let (mi, mj) = (r.column(i).mean(), r.column(j).mean());
            let c: f64 = (0..r.nrows()).map(|t| (r[(t, i)] - mi) * (r[(t, j)] - mj)).sum::<f64>() / (n - 1.0);
            assert!((s[(i, j)] - c).abs() < 1e-15);
        }
    }
}

#[test]
fn window_uses_only_rows_before_asof() {
    let mut panel = fixture();
    let asof = date("2025-03-03");
    let before = window_returns(&panel, asof, 100).unwrap();
    let row = panel.date_index(asof).unwrap();
    let rows = panel.n_rows();
    for t in row..rows {
        for i in 0..10 {
            panel.prices_mut()[(t, i)] *= 1.5;
        }
    }
    assert_eq!(window_returns(&panel, asof, 100).unwrap(), before);
}

#[test]
fn csv_round_trip_is_exact() {
    let panel = fixture();
    let mut buf = Vec::new();
    panel.write_csv(&mut buf).unwrap();
    let back = read_prices(buf.as_slice(), &[]).unwrap();
    assert_eq!(back, panel);
    assert_eq!(std::fs::read(fixture_path()).unwrap(), buf);
}

#[test]
fn fixture_is_synth_seed_42() {
    assert_eq!(synth_prices(42, &SynthParams::default()).unwrap(), fixture());
}
