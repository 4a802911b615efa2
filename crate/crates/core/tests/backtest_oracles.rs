//! Walk-forward accounting against hand computation, plus look-ahead and
//! determinism checks on the fixture with a reduced solver budget.

mod common;

use common::*;
use kardinal::backtest::{
    holding_return, max_drawdown, run_walk_forward, BacktestConfig, BacktestResult, SaSettings, Strategy,
};
use kardinal::qaoa::QaoaConfig;
use kardinal::report::to_json_string;

/// Sample variance of simple returns over `prices`.
fn var(prices: &[f64]) -> f64 {
    let r: Vec<f64> = prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let m = r.iter().sum::<f64>() / r.len() as f64;
    r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() as f64 - 1.0)
}

#[test]
fn micro_case_by_hand() {
    let res = run_walk_forward(&micro_panel(), &micro_config()).unwrap();
    assert_eq!(res.per_month.len(), 2);
    assert_eq!(res.per_month[0].date, date("2025-01-02"));
    assert_eq!(res.per_month[0].hold_until, date("2025-02-03"));
    assert_eq!(res.per_month[1].hold_until, date("2025-03-03"));

    let g1 = [121.0 / 105.0 - 1.0, 52.0 / 50.5 - 1.0];
    let g2 = [0.1, 0.0];
    let tau = 0.001;

    // K = N forces the full selection and the 0.5 cap forces equal weights.
    for s in [Strategy::QaoaXy, Strategy::Sa] {
        let m0 = &res.per_month[0].strategies[&s];
        let m1 = &res.per_month[1].strategies[&s];
        assert_eq!(m0.selection.unwrap().to_string(), "11");
        for m in [m0, m1] {
            assert!((m.weights[0] - 0.5).abs() < 1e-12 && (m.weights[1] - 0.5).abs() < 1e-12);
        }
        let v1 = 1000.0 * (1.0 + 0.5 * (g1[0] + g1[1]) - tau);
        let v2 = v1 * (1.0 + 0.5 * (g2[0] + g2[1]) - tau * m1.turnover);
        assert!((m0.turnover - 1.0).abs() < 1e-12);
        assert!(m1.turnover < 1e-11);
        assert!((res.values[&s][1] - v1).abs() < 1e-9);
        assert!((res.values[&s][2] - v2).abs() < 1e-9);
    }

    // Two-asset HRP is inverse variance on the lookback window.
    let a = [100.0, 102.0, 100.0, 103.0, 101.0, 105.0, 110.0, 121.0];
    let b = [50.0, 49.0, 50.0, 51.0, 50.0, 50.5, 52.0, 52.0];
    let w1 = var(&b[..5]) / (var(&a[..5]) + var(&b[..5]));
    let w2 = var(&b[2..7]) / (var(&a[2..7]) + var(&b[2..7]));
    let h0 = &res.per_month[0].strategies[&Strategy::Hrp];
    let h1 = &res.per_month[1].strategies[&Strategy::Hrp];
    assert!((h0.weights[0] - w1).abs() < 1e-12);
    assert!((h1.weights[0] - w2).abs() < 1e-12);
    let to2 = 2.0 * (w2 - w1).abs();
    assert!((h1.turnover - to2).abs() < 1e-12);
    let v1 = 1000.0 * (1.0 + w1 * g1[0] + (1.0 - w1) * g1[1] - tau);
    let v2 = v1 * (1.0 + w2 * g2[0] - tau * to2);
    assert!((res.values[&Strategy::Hrp][2] - v2).abs() < 1e-9);

    let m = res.summary[&Strategy::Hrp].as_ref().unwrap();
    assert!((m.total_return - (v2 / 1000.0 - 1.0)).abs() < 1e-12);
}

#[test]
fn free_initial_fill_skips_first_cost() {
    let config = BacktestConfig { free_initial_fill: true, ..micro_config() };
    let res = run_walk_forward(&micro_panel(), &config).unwrap();
    for s in Strategy::ALL {
        let m = &res.per_month[0].strategies[&s];
        assert_eq!(m.turnover, 0.0);
        assert_eq!(m.net_return, m.gross_return);
    }
}

fn cheap(start: &str, end: &str) -> BacktestConfig {
    BacktestConfig {
        start: date(start),
        end: date(end),
        seed: 7,
        qaoa: QaoaConfig { p_max: 2, max_iterations: 30, ..QaoaConfig::default() },
        sa: SaSettings { num_reads: 200, num_sweeps: 100, ..SaSettings::default() },
        ..BacktestConfig::default()
    }
}

pub fn check_accounting(res: &BacktestResult) {
    for s in Strategy::ALL {
        let path = &res.values[&s];
        assert_eq!(path[0], res.config.initial_capital);
        let prod: f64 = res.per_month.iter().map(|m| 1.0 + m.strategies[&s].net_return).product();
        assert!((path.last().unwrap() / (path[0] * prod) - 1.0).abs() < 1e-10);
        for (t, m) in res.per_month.iter().enumerate() {
            let sm = &m.strategies[&s];
            assert!((sm.net_return - (sm.gross_return - res.config.tau * sm.turnover)).abs() < 1e-15);
            assert_eq!(sm.value, path[t + 1]);
            assert!((sm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            if s != Strategy::Hrp {
                assert_eq!(sm.selection.unwrap().count_ones(), res.config.k);
            }
        }
    }
}

#[test]
fn fixture_accounting_identities() {
    let res = run_walk_forward(&fixture(), &cheap("2025-01-01", "2025-04-30")).unwrap();
    assert_eq!(res.per_month.len(), 4);
    check_accounting(&res);

    let panel = fixture();
    let m = &res.per_month[1];
    let w = &m.strategies[&Strategy::Hrp].weights;
    let (a, b) = (panel.date_index(m.date).unwrap(), panel.date_index(m.hold_until).unwrap());
    let by_hand: f64 = (0..10).map(|i| w[i] * (panel.price(b, i) / panel.price(a, i) - 1.0)).sum();
    assert!((holding_return(w, &panel, m.date, m.hold_until).unwrap() - by_hand).abs() < 1e-12);

    for s in Strategy::ALL {
        let path = &res.values[&s];
        let mut worst: f64 = 0.0;
        for t in 0..path.len() {
            for u in 0..=t {
                worst = worst.min(path[t] / path[u] - 1.0);
            }
        }
        assert!((max_drawdown(path).unwrap() - worst).abs() < 1e-15);

        let net: Vec<f64> = res.per_month.iter().map(|m| m.strategies[&s].net_return).collect();
        let n = net.len() as f64;
        let mean = net.iter().sum::<f64>() / n;
        let sd = (net.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        let metrics = res.summary[&s].as_ref().unwrap();
        assert!((metrics.ann_vol - sd * 12f64.sqrt()).abs() < 1e-10);
        assert!((metrics.sharpe - mean * 12.0 / (sd * 12f64.sqrt())).abs() < 1e-10);
        assert!((metrics.total_return - (path[path.len() - 1] / path[0] - 1.0)).abs() < 1e-10);
        assert!(metrics.max_drawdown <= 0.0);
    }
}

#[test]
fn zero_cost_equals_gross_compounding() {
    let config = BacktestConfig { tau: 0.0, ..cheap("2025-01-01", "2025-03-31") };
    let res = run_walk_forward(&fixture(), &config).unwrap();
    for s in Strategy::ALL {
        let gross: f64 = res.per_month.iter().map(|m| 1.0 + m.strategies[&s].gross_return).product();
        assert_eq!(*res.values[&s].last().unwrap(), res.per_month.iter().fold(config.initial_capital, |v, m| v * (1.0 + m.strategies[&s].gross_return)));
        assert!((res.values[&s].last().unwrap() / config.initial_capital - gross).abs() < 1e-12);
    }
}

#[test]
fn decisions_ignore_future_prices() {
    let config = cheap("2025-01-01", "2025-03-31");
    let base = run_walk_forward(&fixture(), &config).unwrap();
    let t = date("2025-03-03");
    let mut panel = fixture();
    let row = panel.date_index(t).unwrap();
    for r in row..panel.n_rows() {
        for i in 0..10 {
            panel.prices_mut()[(r, i)] *= 1.0 + 0.03 * ((r * 7 + i * 3) % 11) as f64;
        }
    }
    let mutated = run_walk_forward(&panel, &config).unwrap();
    for (a, b) in base.per_month.iter().zip(&mutated.per_month) {
        assert!(a.date <= t);
        for s in Strategy::ALL {
            assert_eq!(a.strategies[&s].weights, b.strategies[&s].weights, "{} {}", a.date, s.name());
            assert_eq!(a.strategies[&s].selection, b.strategies[&s].selection);
        }
    }
}

#[test]
fn result_is_identical_across_thread_counts() {
    let config = cheap("2025-01-01", "2025-03-31");
    let panel = fixture();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| to_json_string(&run_walk_forward(&panel, &config).unwrap()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    let back: BacktestResult = serde_json::from_str(&one).unwrap();
    assert_eq!(to_json_string(&back).unwrap(), one);
}

#[test]
fn calendar_errors() {
    let config = BacktestConfig { start: date("2027-01-01"), end: date("2027-12-31"), ..micro_config() };
    assert!(matches!(run_walk_forward(&micro_panel(), &config), Err(kardinal::backtest::BacktestError::Calendar(_))));
    let config = BacktestConfig { lookback: 50, ..micro_config() };
    assert!(matches!(run_walk_forward(&micro_panel(), &config), Err(kardinal::backtest::BacktestError::Calendar(_))));
}
