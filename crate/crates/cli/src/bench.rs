//! Seeded experiment matrices: every (scenario, model, seed) triple trains
//! one model and writes one result file; tables are assembled from whatever
//! result files exist.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use uplift_core::datagen::{generate, ScenarioKind, ScenarioSpec};
use uplift_core::eval::{mqini, mqini_from_predictions, TieMode};
use uplift_core::exec::Exec;
use uplift_core::heads::HeadKind;
use uplift_core::model::{train, Backbone, DiscKind, ModelSpec, Preset, TrainConfig, UpliftModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub with_iv: bool,
}

impl ScenarioEntry {
    pub fn new(kind: ScenarioKind, with_iv: bool) -> Self {
        ScenarioEntry { kind, with_iv }
    }

    pub fn spec(&self, cfg: &ExperimentConfig, seed: u64) -> ScenarioSpec {
        ScenarioSpec::new(self.kind, self.with_iv, seed).with_sizes(cfg.n_train, cfg.n_test)
    }

    pub fn label(&self) -> String {
        ScenarioSpec::new(self.kind, self.with_iv, 0).label()
    }

    pub fn slug(&self) -> String {
        ScenarioSpec::new(self.kind, self.with_iv, 0).slug()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub backbone: Backbone,
    pub head: HeadKind,
    #[serde(default = "no_disc")]
    pub disc: DiscKind,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub degree: Option<usize>,
}

fn no_disc() -> DiscKind {
    DiscKind::None
}

impl ModelEntry {
    pub fn new(backbone: Backbone, head: HeadKind, disc: DiscKind) -> Self {
        ModelEntry {
            backbone,
            head,
            disc,
            lambda2: None,
            degree: None,
        }
    }

    pub fn spec(&self, seed: u64) -> ModelSpec {
        let mut spec = ModelSpec::preset(self.backbone, self.head, self.disc, Preset::Synthetic).with_seed(seed);
        if let Some(l) = self.lambda2 {
            spec.lambda2 = l;
        }
        spec.degree = self.degree;
        spec
    }

    /// Table row label; includes λ2 and degree when they differ from defaults.
    pub fn label(&self) -> String {
        let mut s = self.spec(0).label();
        if let (Some(l), true) = (self.lambda2, self.disc != DiscKind::None) {
            s.push_str(&format!(" (λ2={l})"));
        }
        if let Some(p) = self.degree {
            s.push_str(&format!(" (p={p})"));
        }
        s
    }

    pub fn slug(&self) -> String {
        let mut s = self
            .spec(0)
            .label()
            .to_ascii_lowercase()
            .replace('+', "_")
            .replace('-', "");
        if let (Some(l), true) = (self.lambda2, self.disc != DiscKind::None) {
            s.push_str(&format!("_l{l}"));
        }
        if let Some(p) = self.degree {
            s.push_str(&format!("_p{p}"));
        }
        s
    }
}

/// A seeded experiment matrix. Loaded from JSON; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioEntry>,
    pub models: Vec<ModelEntry>,
    pub seeds: Vec<u64>,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub val_fraction: f64,
    pub patience: usize,
    /// Every model with a balancing term is run once per value.
    pub lambda_grid: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            scenarios: vec![
                ScenarioEntry::new(ScenarioKind::Rct, false),
                ScenarioEntry::new(ScenarioKind::RctNoise, false),
                ScenarioEntry::new(ScenarioKind::RctNm, false),
            ],
            models: default_models(),
            seeds: (1..=5).collect(),
            n_train: 10_000,
            n_test: 10_000,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            val_fraction: t.val_fraction,
            patience: t.patience,
            lambda_grid: Vec::new(),
            out_dir: PathBuf::from("bench-out"),
        }
    }
}

/// The six variants compared on the synthetic RCT scenarios.
pub fn default_models() -> Vec<ModelEntry> {
    use Backbone::*;
    use HeadKind::*;
    [
        (Slearner, Fa),
        (Bnn, Fa),
        (TarnetCfrnet, Sa),
        (Drcfr, Sa),
        (TarnetCfrnet, Ofa),
        (Drcfr, Ofa),
    ]
    .into_iter()
    .map(|(b, h)| ModelEntry::new(b, h, DiscKind::None))
    .collect()
}

/// Balancing-loss variants compared on the observational and mixed scenarios.
pub fn balancing_models() -> Vec<ModelEntry> {
    use Backbone::*;
    use DiscKind::*;
    use HeadKind::*;
    [
        (Bnn, Fa, Wass),
        (Bnn, Fa, Mmd),
        (TarnetCfrnet, Sa, Wass),
        (TarnetCfrnet, Sa, Mmd),
        (Drcfr, Sa, Wass),
        (Drcfr, Sa, Mmd),
        (TarnetCfrnet, Ofa, None),
        (TarnetCfrnet, Ofa, Wass),
        (TarnetCfrnet, Ofa, Mmd),
        (Drcfr, Ofa, Wass),
        (Drcfr, Ofa, Mmd),
    ]
    .into_iter()
    .map(|(b, h, d)| ModelEntry::new(b, h, d))
    .collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            val_fraction: self.val_fraction,
            patience: self.patience,
        }
    }

    /// Models after expanding the λ grid.
    pub fn expanded_models(&self) -> Vec<ModelEntry> {
        let mut out = Vec::new();
        for m in &self.models {
            if m.disc == DiscKind::None || self.lambda_grid.is_empty() {
                out.push(m.clone());
            } else {
                for &l in &self.lambda_grid {
                    out.push(ModelEntry {
                        lambda2: Some(l),
                        ..m.clone()
                    });
                }
            }
        }
        out
    }

    /// All triples in table order: scenario, then model, then seed.
    pub fn triples(&self) -> Vec<Triple> {
        let models = self.expanded_models();
        let mut out = Vec::new();
        for s in &self.scenarios {
            for m in &models {
                for &seed in &self.seeds {
                    out.push(Triple {
                        scenario: s.clone(),
                        model: m.clone(),
                        seed,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        anyhow::ensure!(!self.scenarios.is_empty(), "config lists no scenarios");
        anyhow::ensure!(!self.models.is_empty(), "config lists no models");
        anyhow::ensure!(!self.seeds.is_empty(), "config lists no seeds");
        self.train_config().validate()?;
        for m in self.expanded_models() {
            m.spec(0).validate().with_context(|| format!("model {}", m.label()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub scenario: ScenarioEntry,
    pub model: ModelEntry,
    pub seed: u64,
}

impl Triple {
    pub fn result_path(&self, out_dir: &Path) -> PathBuf {
        out_dir
            .join("runs")
            .join(self.scenario.slug())
            .join(self.model.slug())
            .join(format!("seed{}.json", self.seed))
    }

    fn error_path(&self, out_dir: &Path) -> PathBuf {
        self.result_path(out_dir).with_extension("error.txt")
    }
}

/// Outcome of one triple. Holds nothing run-dependent beyond the seed, so
/// reruns reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub model: String,
    pub seed: u64,
    pub mqini: f64,
    pub arm_qini: Vec<f64>,
    /// mQini of the true response surface on the same test split.
    pub oracle_mqini: f64,
    pub param_count: usize,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
}

/// Trains and scores one triple.
pub fn run_triple(cfg: &ExperimentConfig, triple: &Triple) -> Result<RunResult> {
    let (train_set, test_set) = generate(&triple.scenario.spec(cfg, triple.seed))?;
    let spec = triple.model.spec(triple.seed);
    let mut model = UpliftModel::build(&spec, train_set.covariates(), train_set.arms)?;
    let history = train(&mut model, &train_set, &cfg.train_config())?;
    let report = mqini(&model, &test_set, 0)?;
    let truth = test_set.truth.as_ref().context("synthetic test split without truth")?;
    let oracle = mqini_from_predictions(truth, &test_set.t, &test_set.y, 0, TieMode::Stable, Exec::default())?;
    Ok(RunResult {
        scenario: triple.scenario.label(),
        model: triple.model.label(),
        seed: triple.seed,
        mqini: report.mqini,
        arm_qini: report.arms.iter().map(|a| a.qini).collect(),
        oracle_mqini: oracle.mqini,
        param_count: model.param_count(),
        epochs_run: history.epochs.len(),
        best_epoch: history.best_epoch,
    })
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn run_and_store(cfg: &ExperimentConfig, triple: &Triple) -> bool {
    let path = triple.result_path(&cfg.out_dir);
    let label = format!(
        "{} / {} / seed {}",
        triple.scenario.label(),
        triple.model.label(),
        triple.seed
    );
    match run_triple(cfg, triple) {
        Ok(r) => {
            log::info!("{label}: mqini {:.4} (oracle {:.4})", r.mqini, r.oracle_mqini);
            let _ = fs::remove_file(triple.error_path(&cfg.out_dir));
            let json = serde_json::to_string_pretty(&r).expect("result serializes");
            match write_atomic(&path, &json) {
                Ok(()) => true,
                Err(e) => {
                    log::error!("{label}: {e:#}");
                    false
                }
            }
        }
        Err(e) => {
            log::error!("{label}: {e:#}");
            let _ = write_atomic(&triple.error_path(&cfg.out_dir), &format!("{e:#}\n"));
            false
        }
    }
}

/// Number of triples run, skipped (already complete) and failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunCounts {
    pub ran: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every triple lacking a result file on up to `workers` threads.
pub fn run_pending(cfg: &ExperimentConfig, workers: usize) -> Result<RunCounts> {
    cfg.validate()?;
    let all = cfg.triples();
    let pending: Vec<&Triple> = all.iter().filter(|t| !t.result_path(&cfg.out_dir).exists()).collect();
    let skipped = all.len() - pending.len();
    log::info!("{} triples, {} already complete", all.len(), skipped);
    let ok = run_pool(workers.max(1), &pending, |t| run_and_store(cfg, t))?;
    let succeeded = ok.iter().filter(|&&b| b).count();
    Ok(RunCounts {
        ran: succeeded,
        skipped,
        failed: pending.len() - succeeded,
    })
}

#[cfg(feature = "parallel")]
fn run_pool<F>(workers: usize, items: &[&Triple], f: F) -> Result<Vec<bool>>
where
    F: Fn(&Triple) -> bool + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(|| items.par_iter().map(|t| f(t)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_pool<F>(_workers: usize, items: &[&Triple], f: F) -> Result<Vec<bool>>
where
    F: Fn(&Triple) -> bool,
{
    Ok(items.iter().map(|t| f(t)).collect())
}

/// Per-seed results of one (scenario, model) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scenario: String,
    pub model: String,
    pub results: Vec<RunResult>,
    pub missing: Vec<u64>,
}

impl Cell {
    pub fn mean(&self) -> Option<f64> {
        (!self.results.is_empty())
            .then(|| self.results.iter().map(|r| r.mqini).sum::<f64>() / self.results.len() as f64)
    }

    /// Sample standard deviation; 0 for a single seed.
    pub fn std(&self) -> Option<f64> {
        let mean = self.mean()?;
        let n = self.results.len();
        if n < 2 {
            return Some(0.0);
        }
        let ss: f64 = self.results.iter().map(|r| (r.mqini - mean).powi(2)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    }
}

/// Reads result files into cells, rows ordered as in the config.
pub fn collect(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let models = cfg.expanded_models();
    let mut cells = Vec::new();
    for s in &cfg.scenarios {
        for m in &models {
            let mut cell = Cell {
                scenario: s.label(),
                model: m.label(),
                results: Vec::new(),
                missing: Vec::new(),
            };
            for &seed in &cfg.seeds {
                let t = Triple {
                    scenario: s.clone(),
                    model: m.clone(),
                    seed,
                };
                let path = t.result_path(&cfg.out_dir);
                if path.exists() {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    cell.results
                        .push(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?);
                } else {
                    cell.missing.push(seed);
                }
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

fn cell_text(cell: &Cell) -> String {
    match (cell.mean(), cell.std()) {
        (Some(m), Some(s)) if cell.missing.is_empty() => format!("{m:.4} ± {s:.4}"),
        (Some(m), Some(s)) => format!(
            "{m:.4} ± {s:.4} ({}/{} seeds)",
            cell.results.len(),
            cell.results.len() + cell.missing.len()
        ),
        _ => "—".to_string(),
    }
}

/// Markdown table: one row per model, one column per scenario.
pub fn markdown_table(cfg: &ExperimentConfig, cells: &[Cell]) -> String {
    let scenarios: Vec<String> = cfg.scenarios.iter().map(ScenarioEntry::label).collect();
    let models: Vec<String> = cfg.expanded_models().iter().map(ModelEntry::label).collect();
    let mut out = String::from("| Model |");
    for s in &scenarios {
        out.push_str(&format!(" {s} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(scenarios.len()));
    out.push('\n');
    for m in &models {
        out.push_str(&format!("| {m} |"));
        for s in &scenarios {
            let text = cells
                .iter()
                .find(|c| &c.scenario == s && &c.model == m)
                .map_or_else(|| "—".to_string(), cell_text);
            out.push_str(&format!(" {text} |"));
        }
        out.push('\n');
    }
    out
}

/// CSV with one line per cell: `scenario,model,seeds,mean,std,missing`.
pub fn csv_table(cells: &[Cell]) -> String {
    let mut out = String::from("scenario,model,seeds,mean,std,missing\n");
    for c in cells {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        let missing: Vec<String> = c.missing.iter().map(u64::to_string).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.scenario,
            c.model,
            c.results.len(),
            fmt(c.mean()),
            fmt(c.std()),
            missing.join(";")
        ));
    }
    out
}

/// Runs pending triples, then writes `table.md` and `table.csv` to the output
/// directory. Returns the cells.
pub fn run_bench(cfg: &ExperimentConfig, workers: usize) -> Result<(RunCounts, Vec<Cell>)> {
    let counts = run_pending(cfg, workers)?;
    let cells = collect(cfg)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    write_atomic(&cfg.out_dir.join("table.md"), &markdown_table(cfg, &cells))?;
    write_atomic(&cfg.out_dir.join("table.csv"), &csv_table(&cells))?;
    Ok((counts, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matrix_has_eighteen_cells() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.scenarios.len() * cfg.expanded_models().len(), 18);
        assert_eq!(cfg.triples().len(), 90);
        assert_eq!(cfg.lr, 1e-4);
        cfg.validate().unwrap();
    }

    #[test]
    fn lambda_grid_expands_balanced_models_only() {
        let cfg = ExperimentConfig {
            models: vec![
                ModelEntry::new(Backbone::TarnetCfrnet, HeadKind::Sa, DiscKind::None),
                ModelEntry::new(Backbone::TarnetCfrnet, HeadKind::Ofa, DiscKind::Mmd),
            ],
            lambda_grid: vec![0.1, 1.0],
            ..ExperimentConfig::default()
        };
        let labels: Vec<String> = cfg.expanded_models().iter().map(ModelEntry::label).collect();
        assert_eq!(
            labels,
            ["TARNet+SA", "CFRNet+OFA+MMD (λ2=0.1)", "CFRNet+OFA+MMD (λ2=1)"]
        );
    }

    #[test]
    fn config_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"scenarios":[{"kind":"obs","with_iv":true}],"models":[{"backbone":"drcfr","head":"ofa","disc":"wass"}],"seeds":[3]}"#,
        )
        .unwrap();
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.scenarios[0].label(), "OBS w/ IV");
        assert_eq!(cfg.models[0].label(), "DR-CFR+OFA+WASS");
        assert_eq!(cfg.models[0].slug(), "drcfr_ofa_wass");
    }

    #[test]
    fn gaps_are_marked() {
        let cfg = ExperimentConfig {
            scenarios: vec![ScenarioEntry::new(ScenarioKind::Rct, false)],
            models: vec![ModelEntry::new(Backbone::TarnetCfrnet, HeadKind::Sa, DiscKind::None)],
            seeds: vec![1, 2],
            ..ExperimentConfig::default()
        };
        let result = |seed, mqini| RunResult {
            scenario: "RCT".into(),
            model: "TARNet+SA".into(),
            seed,
            mqini,
            arm_qini: vec![],
            oracle_mqini: 0.0,
            param_count: 0,
            epochs_run: 0,
            best_epoch: None,
        };
        let empty = vec![Cell {
            scenario: "RCT".into(),
            model: "TARNet+SA".into(),
            results: vec![],
            missing: vec![1, 2],
        }];
        assert!(markdown_table(&cfg, &empty).contains("| TARNet+SA | — |"));
        let partial = vec![Cell {
            results: vec![result(1, 0.02)],
            missing: vec![2],
            ..empty[0].clone()
        }];
        assert!(markdown_table(&cfg, &partial).contains("0.0200 ± 0.0000 (1/2 seeds)"));
        assert_eq!(
            csv_table(&partial).lines().nth(1).unwrap(),
            "RCT,TARNet+SA,1,0.020000,0.000000,2"
        );
        let full = Cell {
            results: vec![result(1, 0.01), result(2, 0.03)],
            missing: vec![],
            ..empty[0].clone()
        };
        assert!((full.mean().unwrap() - 0.02).abs() < 1e-15);
        assert!((full.std().unwrap() - 0.02f64.sqrt() / 10.0 * 1.0).abs() < 1e-12);
    }
}
