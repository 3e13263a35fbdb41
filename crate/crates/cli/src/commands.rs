use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;

use proxitrace_core::classifier::table2::{
    combination_split, reproduce_table2, Combination, ExperimentParams, Table2Config,
};
use proxitrace_core::classifier::{
    evaluate, evaluate_with, train_tree, tree_from_json, tree_to_json, EvalReport,
    ThresholdClassifier,
};
use proxitrace_core::dataset::{
    parse_dataset, write_canonical, MalformedRow, PositionPair, RssSample, SchemaMap,
};
use proxitrace_core::protocol::Mode;
use proxitrace_core::report::sha256_hex;
use proxitrace_core::sim::{
    check_world, run_scenario, ScenarioConfig, SimMetrics, WorldCheck, BENCHMARK_SCENARIO,
};

use crate::error::{CliError, Exit};
use crate::output::Outputs;
use crate::{Cli, Command, ModeArg};

pub fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Ingest { dataset, schema } => ingest(cli, dataset, schema),
        Command::Train {
            dataset,
            schema,
            combination,
        } => train(cli, dataset, schema, combination),
        Command::Eval {
            tree,
            dataset,
            schema,
            combination,
        } => eval(cli, tree, dataset, schema, combination),
        Command::Table2 => table2(cli),
        Command::Simulate { scenario, mode } => simulate(cli, scenario.as_deref(), *mode),
        Command::ProtocolCheck { worlds } => protocol_check(cli, *worlds),
    }
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn load_samples(
    out: &mut Outputs,
    dataset: &Path,
    schema: &Path,
) -> Result<(Vec<RssSample>, Vec<MalformedRow>, usize), CliError> {
    let schema_bytes = out.input(schema)?;
    let schema: SchemaMap = String::from_utf8_lossy(&schema_bytes).parse()?;
    let data = out.input(dataset)?;
    let parsed = parse_dataset(data.as_slice(), &schema)?;
    Ok((parsed.samples, parsed.malformed, parsed.rows_read))
}

#[derive(Serialize)]
struct StratumCount {
    position_pair: PositionPair,
    distance_m: f64,
    count: usize,
}

#[derive(Serialize)]
struct IngestSummary {
    rows_read: usize,
    samples: usize,
    malformed: Vec<MalformedRow>,
    strata: Vec<StratumCount>,
}

fn ingest(cli: &Cli, dataset: &Path, schema: &Path) -> Result<ExitCode, CliError> {
    let mut out = Outputs::create(&cli.out, "ingest")?;
    let (samples, malformed, rows_read) = load_samples(&mut out, dataset, schema)?;
    let mut counts = BTreeMap::new();
    for s in &samples {
        *counts.entry(s.stratum()).or_insert(0usize) += 1;
    }
    let summary = IngestSummary {
        rows_read,
        samples: samples.len(),
        malformed,
        strata: counts
            .into_iter()
            .map(|(k, count)| StratumCount {
                position_pair: k.position_pair,
                distance_m: k.distance_m(),
                count,
            })
            .collect(),
    };
    let mut canon = Vec::new();
    write_canonical(&samples, &mut canon)?;
    out.write("canonical.csv", &canon)?;
    out.write("ingest_summary.json", &json(&summary))?;
    for s in &summary.strata {
        println!(
            "{:<3} {:>5.2} m {:>8}",
            s.position_pair.as_str(),
            s.distance_m,
            s.count
        );
    }
    println!(
        "total {} samples, {} malformed rows skipped",
        summary.samples,
        summary.malformed.len()
    );
    out.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn experiment_params(cli: &Cli, out: &mut Outputs) -> Result<ExperimentParams, CliError> {
    let mut params = match &cli.config {
        Some(path) => {
            let bytes = out.config(path)?;
            toml::from_str::<ExperimentParams>(&String::from_utf8_lossy(&bytes)).map_err(|e| {
                CliError::new(Exit::Config, format!("{}: {}", path.display(), e.message()))
            })?
        }
        None => ExperimentParams::default(),
    };
    params.tree.validate()?;
    if let Some(seed) = cli.seed {
        params.seed = seed;
    }
    out.manifest.seed = Some(params.seed);
    Ok(params)
}

fn combination(name: &str) -> Result<Combination, CliError> {
    name.parse()
        .map_err(|e: String| CliError::new(Exit::Config, e))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    combination: &'a str,
    n_train: usize,
    n_test: usize,
    depth: usize,
    leaves: usize,
    train_accuracy: f64,
    params: &'a ExperimentParams,
}

fn train(cli: &Cli, dataset: &Path, schema: &Path, name: &str) -> Result<ExitCode, CliError> {
    let mut out = Outputs::create(&cli.out, "train")?;
    let combo = combination(name)?;
    let params = experiment_params(cli, &mut out)?;
    let (samples, _, _) = load_samples(&mut out, dataset, schema)?;
    let halves = combination_split(combo, &samples, &params)?;
    let tree = train_tree(&halves.train, &params.tree)?;
    let fit = evaluate(&tree, &halves.train)?;
    let summary = TrainSummary {
        combination: combo.name(),
        n_train: halves.train.len(),
        n_test: halves.test.len(),
        depth: tree.depth(),
        leaves: tree.leaf_count(),
        train_accuracy: fit.accuracy,
        params: &params,
    };
    out.write("tree.json", tree_to_json(&tree).as_bytes())?;
    out.write("train_summary.json", &json(&summary))?;
    println!(
        "{}: {} training windows, depth {}, {} leaves, training accuracy {:.2}%",
        summary.combination,
        summary.n_train,
        summary.depth,
        summary.leaves,
        fit.accuracy * 100.0
    );
    out.finish()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    combination: &'a str,
    tree: EvalReport,
    baseline_cutoff_dbm: f64,
    baseline: EvalReport,
}

fn eval(
    cli: &Cli,
    tree_path: &Path,
    dataset: &Path,
    schema: &Path,
    name: &str,
) -> Result<ExitCode, CliError> {
    let mut out = Outputs::create(&cli.out, "eval")?;
    let combo = combination(name)?;
    let params = experiment_params(cli, &mut out)?;
    let tree_bytes = out.input(tree_path)?;
    let tree = tree_from_json(&String::from_utf8_lossy(&tree_bytes))?;
    let (samples, _, _) = load_samples(&mut out, dataset, schema)?;
    let halves = combination_split(combo, &samples, &params)?;
    let report = evaluate(&tree, &halves.test)?;
    let baseline = evaluate_with(
        &ThresholdClassifier {
            cutoff_dbm: params.baseline_cutoff_dbm,
        },
        &halves.test,
    )?;
    println!(
        "{}: tree accuracy {:.2}% (FN rate {:.4}), threshold {} dBm accuracy {:.2}% (FN rate {:.4}) on {} test windows",
        combo.name(),
        report.accuracy * 100.0,
        report.false_negative_rate,
        params.baseline_cutoff_dbm,
        baseline.accuracy * 100.0,
        baseline.false_negative_rate,
        report.n_test
    );
    let summary = EvalSummary {
        combination: combo.name(),
        tree: report,
        baseline_cutoff_dbm: params.baseline_cutoff_dbm,
        baseline,
    };
    out.write("eval.json", &json(&summary))?;
    out.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn table2(cli: &Cli) -> Result<ExitCode, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::new(Exit::Config, "table2 needs --config <table.toml>"))?;
    let mut out = Outputs::create(&cli.out, "table2")?;
    out.config(path)?;
    let (mut cfg, base) = Table2Config::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    out.manifest.seed = Some(cfg.experiment.seed);
    let mut corpora = Vec::new();
    for source in [&cfg.smartphone, &cfg.smartwatch] {
        let loaded = source.load(&base)?;
        out.manifest
            .add_input(loaded.path.display().to_string(), &loaded.bytes);
        out.manifest.add_input(
            base.join(&source.schema).display().to_string(),
            &loaded.schema_bytes,
        );
        corpora.push(loaded.parsed.samples);
    }
    let report = reproduce_table2(&corpora[0], &corpora[1], &cfg.experiment)?;
    let table = report.to_table();
    print!("{table}");
    out.write("table2.json", &json(&report))?;
    out.write("table2.txt", table.as_bytes())?;
    out.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn simulate(
    cli: &Cli,
    scenario: Option<&Path>,
    mode: Option<ModeArg>,
) -> Result<ExitCode, CliError> {
    let mut out = Outputs::create(&cli.out, "simulate")?;
    let path = scenario
        .map(Path::to_path_buf)
        .or_else(|| cli.config.clone());
    let (text, base) = match &path {
        Some(p) => {
            let bytes = out.config(p)?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (String::from_utf8_lossy(&bytes).into_owned(), base)
        }
        None => (BENCHMARK_SCENARIO.to_string(), PathBuf::new()),
    };
    if path.is_none() {
        out.manifest.config_digest = Some(sha256_hex(text.as_bytes()));
    }
    let mut cfg: ScenarioConfig = text.parse()?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    out.manifest.seed = Some(cfg.rng_seed);
    let classifier = cfg.build_classifier(&base)?;
    let modes = match mode {
        None => vec![cfg.mode],
        Some(ModeArg::Centralized) => vec![Mode::Centralized],
        Some(ModeArg::Decentralized) => vec![Mode::Decentralized],
        Some(ModeArg::Both) => vec![Mode::Centralized, Mode::Decentralized],
    };
    let mut runs: Vec<SimMetrics> = Vec::new();
    for m in modes {
        let run_cfg = ScenarioConfig {
            mode: m,
            ..cfg.clone()
        };
        let metrics = run_scenario(&run_cfg, classifier.as_ref())?;
        out.write(
            &format!("metrics_{m}.json"),
            (metrics.to_json() + "\n").as_bytes(),
        )?;
        out.write(
            &format!("pairs_{m}.csv"),
            metrics.pair_table_csv().as_bytes(),
        )?;
        println!(
            "{m}: sensitivity {:.4}, specificity {:.4}, {} alerted / {} true pair-days",
            metrics.sensitivity,
            metrics.specificity,
            metrics.alerted_pairs.len(),
            metrics.true_contact_pairs.len()
        );
        runs.push(metrics);
    }
    let mut code = ExitCode::SUCCESS;
    if let [c, d] = runs.as_slice() {
        let identical = c.alerted_pairs == d.alerted_pairs;
        #[derive(Serialize)]
        struct Equivalence {
            identical: bool,
            centralized_alerted: usize,
            decentralized_alerted: usize,
        }
        let eq = Equivalence {
            identical,
            centralized_alerted: c.alerted_pairs.len(),
            decentralized_alerted: d.alerted_pairs.len(),
        };
        out.write("equivalence.json", &json(&eq))?;
        println!(
            "equivalence: {} ({} vs {} alerted pair-days)",
            if identical { "PASS" } else { "FAIL" },
            eq.centralized_alerted,
            eq.decentralized_alerted
        );
        if !identical {
            code = ExitCode::from(Exit::Failure as u8);
        }
    }
    out.finish()?;
    Ok(code)
}

#[derive(Serialize)]
struct CheckReport {
    worlds: usize,
    failing_seeds: Vec<u64>,
    worlds_with_alerts: usize,
    checks: Vec<WorldCheck>,
}

fn protocol_check(cli: &Cli, worlds: u64) -> Result<ExitCode, CliError> {
    let mut out = Outputs::create(&cli.out, "protocol-check")?;
    let base = cli.seed.unwrap_or(0);
    out.manifest.seed = Some(base);
    let checks = (base..base + worlds)
        .map(check_world)
        .collect::<Result<Vec<_>, _>>()?;
    let report = CheckReport {
        worlds: checks.len(),
        failing_seeds: checks.iter().filter(|c| !c.ok()).map(|c| c.seed).collect(),
        worlds_with_alerts: checks.iter().filter(|c| c.alerts > 0).count(),
        checks,
    };
    out.write("protocol_check.json", &json(&report))?;
    let ok = report.failing_seeds.is_empty();
    println!(
        "protocol-check: {} ({} worlds, {} with alerts, failing seeds {:?})",
        if ok { "PASS" } else { "FAIL" },
        report.worlds,
        report.worlds_with_alerts,
        report.failing_seeds
    );
    out.finish()?;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(Exit::Failure as u8)
    })
}
