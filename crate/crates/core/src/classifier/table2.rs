//! Per-combination accuracy table for the smartphone and smartwatch corpora.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    evaluate, evaluate_with, train_tree, ClassifierError, EvalReport, ThresholdClassifier,
    TreeParams,
};
use crate::dataset::{
    parse_dataset, split, window_corpus, DatasetError, DeviceKind, ParsedDataset, PositionGroup,
    PositionPair, RssSample, SchemaMap, SplitDataset, WindowSpec, DEFAULT_CUTOFF_M,
};

/// One row of the accuracy table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Combination {
    Phone(PositionPair),
    Watch(PositionGroup),
}

impl Combination {
    pub const ALL: [Combination; 8] = [
        Combination::Phone(PositionPair::HH),
        Combination::Phone(PositionPair::HP),
        Combination::Phone(PositionPair::HB),
        Combination::Phone(PositionPair::PB),
        Combination::Phone(PositionPair::PP),
        Combination::Phone(PositionPair::BB),
        Combination::Watch(PositionGroup::Direct),
        Combination::Watch(PositionGroup::Crosswise),
    ];

    /// Published accuracy in percent.
    pub fn reference_accuracy_pct(self) -> f64 {
        match self {
            Combination::Phone(PositionPair::HH) => 85.82,
            Combination::Phone(PositionPair::HP) => 90.75,
            Combination::Phone(PositionPair::HB) => 81.44,
            Combination::Phone(PositionPair::PB) => 87.51,
            Combination::Phone(PositionPair::PP) => 87.26,
            Combination::Phone(PositionPair::BB) => 90.85,
            Combination::Watch(PositionGroup::Direct) => 94.16,
            Combination::Watch(PositionGroup::Crosswise) => 90.59,
            Combination::Phone(_) => f64::NAN,
        }
    }

    pub fn device_kind(self) -> DeviceKind {
        match self {
            Combination::Phone(_) => DeviceKind::Smartphone,
            Combination::Watch(_) => DeviceKind::Smartwatch,
        }
    }

    pub fn contains(self, p: PositionPair) -> bool {
        match self {
            Combination::Phone(q) => p == q,
            Combination::Watch(g) => p.group() == Some(g),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Combination::Phone(p) => p.long_name(),
            Combination::Watch(PositionGroup::Direct) => "direct",
            Combination::Watch(PositionGroup::Crosswise) => "crosswise",
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combination {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Combination::Watch(PositionGroup::Direct)),
            "crosswise" => Ok(Combination::Watch(PositionGroup::Crosswise)),
            other => match other.parse::<PositionPair>()? {
                p if p.device_kind() == DeviceKind::Smartphone => Ok(Combination::Phone(p)),
                p => Err(format!(
                    "{p} is a smartwatch pair; use `direct` or `crosswise`"
                )),
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Table2Error {
    #[error("combination {0} has no samples")]
    EmptyCombination(Combination),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("{0}")]
    Io(String),
    #[error("invalid table config: {0}")]
    Config(String),
}

/// Training and evaluation protocol shared by all rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub cutoff_m: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub window: WindowSpec,
    pub tree: TreeParams,
    /// Allowed deviation from the published accuracy, in percentage points.
    pub tolerance_pp: f64,
    pub baseline_cutoff_dbm: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            cutoff_m: DEFAULT_CUTOFF_M,
            train_fraction: 0.8,
            seed: 7,
            window: WindowSpec::default(),
            tree: TreeParams::default(),
            tolerance_pp: 3.0,
            baseline_cutoff_dbm: super::DEFAULT_CUTOFF_DBM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub combination: String,
    pub device_kind: DeviceKind,
    pub reference_accuracy_pct: f64,
    pub accuracy_pct: f64,
    pub verdict: Verdict,
    pub n_train: usize,
    pub tree_depth: usize,
    pub tree_leaves: usize,
    pub report: EvalReport,
    /// The -80 dBm style threshold applied to the same test windows.
    pub baseline: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Report {
    pub params: ExperimentParams,
    pub rows: Vec<Table2Row>,
}

impl Table2Report {
    pub fn passes(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Pass)
            .count()
    }

    /// Fixed-width text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:<22} {:>9} {:>9} {:>7} {:>8} {:>8} {:>6}\n",
            "approach",
            "combination",
            "accuracy",
            "reference",
            "n_test",
            "fn_rate",
            "base_fn",
            "verdict"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:<22} {:>8.2}% {:>8.2}% {:>7} {:>8.4} {:>8.4} {:>6}\n",
                r.device_kind.to_string(),
                r.combination,
                r.accuracy_pct,
                r.reference_accuracy_pct,
                r.report.n_test,
                r.report.false_negative_rate,
                r.baseline.false_negative_rate,
                r.verdict
            ));
        }
        out.push_str(&format!(
            "{} of {} rows within ±{} pp\n",
            self.passes(),
            self.rows.len(),
            self.params.tolerance_pp
        ));
        out
    }
}

/// One corpus file and the schema map that reads it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub path: PathBuf,
    pub schema: PathBuf,
}

/// Inputs of a full table run. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table2Config {
    pub smartphone: CorpusSource,
    pub smartwatch: CorpusSource,
    #[serde(default)]
    pub experiment: ExperimentParams,
}

/// A corpus as loaded, with the raw bytes kept for digests.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub schema_bytes: Vec<u8>,
    pub parsed: ParsedDataset,
}

fn read(path: &Path) -> Result<Vec<u8>, Table2Error> {
    std::fs::read(path).map_err(|e| Table2Error::Io(format!("{}: {e}", path.display())))
}

impl CorpusSource {
    pub fn load(&self, base: &Path) -> Result<LoadedCorpus, Table2Error> {
        let path = base.join(&self.path);
        let schema_bytes = read(&base.join(&self.schema))?;
        let schema: SchemaMap = String::from_utf8_lossy(&schema_bytes).parse()?;
        let bytes = read(&path)?;
        let parsed = parse_dataset(bytes.as_slice(), &schema)?;
        Ok(LoadedCorpus {
            path,
            bytes,
            schema_bytes,
            parsed,
        })
    }
}

impl Table2Config {
    pub fn from_toml(text: &str) -> Result<Self, Table2Error> {
        let cfg: Table2Config =
            toml::from_str(text).map_err(|e| Table2Error::Config(e.message().to_string()))?;
        cfg.experiment.tree.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), Table2Error> {
        let text = read(path)?;
        let cfg = Self::from_toml(&String::from_utf8_lossy(&text))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }
}

/// Windowed, stratified train/test split of one combination's samples.
pub fn combination_split(
    combination: Combination,
    samples: &[RssSample],
    params: &ExperimentParams,
) -> Result<SplitDataset, Table2Error> {
    let own: Vec<RssSample> = samples
        .iter()
        .filter(|s| {
            s.device_kind == combination.device_kind() && combination.contains(s.position_pair)
        })
        .cloned()
        .collect();
    if own.is_empty() {
        return Err(Table2Error::EmptyCombination(combination));
    }
    let windows = window_corpus(&own, params.window, params.cutoff_m)?;
    Ok(split(&windows, params.train_fraction, params.seed)?)
}

/// Trains and scores one combination on its own samples only.
pub fn run_combination(
    combination: Combination,
    samples: &[RssSample],
    params: &ExperimentParams,
) -> Result<Table2Row, Table2Error> {
    let halves = combination_split(combination, samples, params)?;
    let tree = train_tree(&halves.train, &params.tree)?;
    let report = evaluate(&tree, &halves.test)?;
    let baseline = evaluate_with(
        &ThresholdClassifier {
            cutoff_dbm: params.baseline_cutoff_dbm,
        },
        &halves.test,
    )?;
    let accuracy_pct = report.accuracy * 100.0;
    let reference = combination.reference_accuracy_pct();
    let verdict = if (accuracy_pct - reference).abs() <= params.tolerance_pp {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(Table2Row {
        combination: combination.name().to_string(),
        device_kind: combination.device_kind(),
        reference_accuracy_pct: reference,
        accuracy_pct,
        verdict,
        n_train: halves.train.len(),
        tree_depth: tree.depth(),
        tree_leaves: tree.leaf_count(),
        report,
        baseline,
    })
}

/// All eight rows; combinations are independent and trained in parallel.
pub fn reproduce_table2(
    smartphone: &[RssSample],
    smartwatch: &[RssSample],
    params: &ExperimentParams,
) -> Result<Table2Report, Table2Error> {
    let rows = Combination::ALL
        .par_iter()
        .map(|&c| {
            let samples = match c.device_kind() {
                DeviceKind::Smartphone => smartphone,
                DeviceKind::Smartwatch => smartwatch,
            };
            run_combination(c, samples, params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Table2Report {
        params: params.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let got: Vec<f64> = Combination::ALL
            .iter()
            .map(|c| c.reference_accuracy_pct())
            .collect();
        assert_eq!(
            got,
            vec![85.82, 90.75, 81.44, 87.51, 87.26, 90.85, 94.16, 90.59]
        );
    }

    #[test]
    fn combination_names_parse() {
        for c in Combination::ALL {
            assert_eq!(c.name().parse::<Combination>().unwrap(), c);
        }
        assert_eq!(
            "HB".parse::<Combination>().unwrap(),
            Combination::Phone(PositionPair::HB)
        );
        assert!("LR".parse::<Combination>().is_err());
    }

    #[test]
    fn watch_groups_cover_pairs() {
        let direct = Combination::Watch(PositionGroup::Direct);
        assert!(direct.contains(PositionPair::LR) && direct.contains(PositionPair::RL));
        assert!(!direct.contains(PositionPair::LL));
    }

    #[test]
    fn empty_combination_is_reported() {
        let err = run_combination(
            Combination::Phone(PositionPair::BB),
            &[],
            &ExperimentParams::default(),
        );
        assert_eq!(
            err,
            Err(Table2Error::EmptyCombination(Combination::Phone(
                PositionPair::BB
            )))
        );
    }

    #[test]
    fn example_config_parses() {
        let cfg = Table2Config::from_toml(include_str!("../../../../data/table2.example.toml")).unwrap();
        assert_eq!(cfg.experiment, ExperimentParams::default());
        for schema in [
            include_str!("../../../../data/smartphone.schema"),
            include_str!("../../../../data/smartwatch.schema"),
        ] {
            schema.parse::<SchemaMap>().unwrap();
        }
    }
}
