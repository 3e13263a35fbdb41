use proxitrace_core::classifier::ThresholdClassifier;
use proxitrace_core::protocol::Mode;
use proxitrace_core::sim::{
    ground_truth_contacts, rss_at, run_scenario, Agent, PairDay, PathLossModel, ScenarioConfig,
    Waypoint, BENCHMARK_SCENARIO,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn benchmark() -> ScenarioConfig {
    BENCHMARK_SCENARIO.parse().unwrap()
}

fn correct(cfg: &ScenarioConfig) -> ThresholdClassifier {
    ThresholdClassifier {
        cutoff_dbm: cfg.default_cutoff_dbm(),
    }
}

#[test]
fn benchmark_ground_truth() {
    let cfg = benchmark();
    let truth = ground_truth_contacts(
        &cfg.agents,
        cfg.cutoff_m,
        cfg.risk_threshold_s,
        cfg.scan_interval_s,
        cfg.duration_s,
    );
    let pairs: Vec<(u32, u32)> = truth.iter().map(|p| (p.agent_a, p.agent_b)).collect();
    assert_eq!(pairs, vec![(0, 1), (0, 5), (1, 5)]);
}

#[test]
fn noiseless_correct_classifier_finds_every_contact() {
    let mut cfg = benchmark();
    cfg.channel.sigma_dbm = 0.0;
    for mode in [Mode::Centralized, Mode::Decentralized] {
        cfg.mode = mode;
        let m = run_scenario(&cfg, &correct(&cfg)).unwrap();
        assert_eq!(m.sensitivity, 1.0);
        assert_eq!(m.specificity, 1.0);
        assert_eq!(m.alerted_pairs, m.true_contact_pairs);
        assert_eq!(m.true_contact_pairs.len(), 2);
    }
}

#[test]
fn modes_alert_identically() {
    let mut cfg = benchmark();
    let mut runs = Vec::new();
    for mode in [Mode::Centralized, Mode::Decentralized] {
        cfg.mode = mode;
        runs.push(run_scenario(&cfg, &correct(&cfg)).unwrap());
    }
    assert_eq!(runs[0].alerted_pairs, runs[1].alerted_pairs);
    assert_eq!(runs[0].rows, runs[1].rows);
}

#[test]
fn noise_never_helps_threshold_classifier() {
    let base = benchmark();
    let score = |sigma: f64, seed: u64| {
        let cfg = ScenarioConfig {
            rng_seed: seed,
            channel: PathLossModel {
                sigma_dbm: sigma,
                ..base.channel
            },
            ..base.clone()
        };
        let m = run_scenario(&cfg, &correct(&cfg)).unwrap();
        m.sensitivity + m.specificity
    };
    let clean = score(0.0, 0);
    let worst = (0..20u64)
        .into_par_iter()
        .flat_map(|seed| {
            [2.0, 4.0, 6.0, 8.0]
                .into_par_iter()
                .map(move |s| score(s, seed))
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    assert!(worst <= clean + 0.02, "noisy {worst} vs clean {clean}");
}

#[test]
fn two_stationary_agents_half_hour() {
    let mut cfg = ScenarioConfig::empty(1800, 5, Mode::Decentralized);
    cfg.channel.sigma_dbm = 0.0;
    cfg.agents = vec![
        Agent::stationary(7, 0.0, 0.0),
        Agent::stationary(9, 1.0, 0.0),
    ];
    cfg.diagnoses = vec![proxitrace_core::sim::Diagnosis {
        agent: 7,
        time_s: 1800,
        consent: true,
    }];
    let m = run_scenario(&cfg, &correct(&cfg)).unwrap();
    assert_eq!(
        m.alerted_pairs.into_iter().collect::<Vec<_>>(),
        vec![PairDay {
            agent_a: 7,
            agent_b: 9,
            day: 0
        }]
    );
    assert_eq!(m.sensitivity, 1.0);
}

#[test]
fn truth_examples() {
    let far = [
        Agent::stationary(0, 0.0, 0.0),
        Agent::stationary(1, 3.0, 0.0),
    ];
    assert!(ground_truth_contacts(&far, 2.0, 900, 1, 3600).is_empty());
    // Crosses the 2 m disc around the origin at 1 m/s along y = 1: inside for ~3.5 s.
    let passer = Agent {
        id: 1,
        waypoints: vec![
            Waypoint {
                t_s: 0.0,
                x_m: -30.0,
                y_m: 1.0,
            },
            Waypoint {
                t_s: 60.0,
                x_m: 30.0,
                y_m: 1.0,
            },
        ],
    };
    let near = [Agent::stationary(0, 0.0, 0.0), passer];
    assert!(ground_truth_contacts(&near, 2.0, 900, 1, 3600).is_empty());
}

#[test]
fn shadowing_statistics() {
    let m = PathLossModel {
        p0_dbm: -60.0,
        n_exp: 2.0,
        sigma_dbm: 5.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| rss_at(&m, 3.0, &mut rng).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((mean - m.mean_rss(3.0)).abs() <= 3.0 * m.sigma_dbm / (n as f64).sqrt());
    assert!((std - m.sigma_dbm).abs() <= 0.05 * m.sigma_dbm);
}
