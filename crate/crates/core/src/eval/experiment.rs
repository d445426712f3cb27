use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{fmt4, report_with_abstentions, ClassificationReport};
use crate::crf::{self, TrainConfig};
use crate::error::{Error, Result};
use crate::labels::{ApproachAngle, Formation, JointClass};
use crate::pipeline::{
    augmented_group_samples, crf_chains, detect_with_bundle, gold_group_samples, load_models, rule_classify,
    save_models, train_svm, Detection, ModelBundle, SvmTask, SvmTrainConfig,
};
use crate::pose::{read_scenes_file, write_scenes_file, GroupLabel, Scene};
use crate::synth::{generate_dataset, grid_entries, split_by_formation, GridSpec};

/// Where the experiment's scenes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Generated grid, split per formation by `train_fraction`.
    Synthetic(GridSpec),
    /// Labeled JSONL files.
    Jsonl { train: Option<PathBuf>, test: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Table {
    I,
    II,
    III,
    IV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset generation seed.
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub train_fraction: f64,
    /// Evaluate these saved models instead of training.
    pub models: Option<PathBuf>,
    pub crf: TrainConfig,
    pub svm: SvmTrainConfig,
    /// Train the SVMs on outlier-contaminated groups as well as gold groups.
    pub augment: bool,
    pub tables: Vec<Table>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            dataset: DatasetSpec::Synthetic(GridSpec::default()),
            train_fraction: 0.8,
            models: None,
            crf: TrainConfig::default(),
            svm: SvmTrainConfig::default(),
            augment: true,
            tables: vec![Table::I, Table::II, Table::III, Table::IV],
        }
    }
}

/// Learned and rule accuracy for one (formation, angle) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub formation: Formation,
    pub angle_deg: ApproachAngle,
    pub n: usize,
    pub learned_accuracy: Option<f64>,
    /// Share of the cell where the rule baseline names the right formation.
    pub rule_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub rows: Vec<CellRow>,
    /// Unweighted mean over non-empty cells.
    pub average_learned: f64,
    pub average_rule: f64,
    /// Pooled over every test scene.
    pub overall_learned: f64,
}

impl JointTable {
    pub fn cell(&self, formation: Formation, angle: ApproachAngle) -> Option<&CellRow> {
        self.rows.iter().find(|r| r.formation == formation && r.angle_deg == angle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRecord {
    pub task: SvmTask,
    pub gamma: f64,
    pub fallback: bool,
    pub cv_scores: Vec<(f64, f64)>,
}

/// Headline numbers plus everything needed to rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub cv_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub membership_weighted_f1: Option<f64>,
    pub formation_weighted_f1: Option<f64>,
    pub rule_formation_weighted_f1: Option<f64>,
    pub angle_weighted_f1: Option<f64>,
    pub joint_accuracy: Option<f64>,
    pub gamma: Vec<GammaRecord>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub summary: Summary,
    pub membership: Option<ClassificationReport>,
    pub formation: Option<ClassificationReport>,
    pub rule_formation: Option<ClassificationReport>,
    pub angle: Option<ClassificationReport>,
    pub joint: Option<JointTable>,
    pub models: ModelBundle,
    pub test: Vec<Scene>,
}

fn load_split(cfg: &ExperimentConfig) -> Result<(Vec<Scene>, Vec<Scene>)> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(grid) => {
            let scenes = generate_dataset(&grid_entries(grid)?, cfg.seed)?;
            let split = split_by_formation(&scenes, cfg.train_fraction)?;
            Ok((split.train, split.test))
        }
        DatasetSpec::Jsonl { train, test } => {
            let train = match train {
                Some(p) => read_scenes_file(p)?,
                None => Vec::new(),
            };
            Ok((train, read_scenes_file(test)?))
        }
    }
}

/// Trains a CRF and the three SVMs.
pub fn train_models(train: &[Scene], cfg: &ExperimentConfig) -> Result<(ModelBundle, Vec<GammaRecord>)> {
    if train.is_empty() {
        return Err(Error::Config("no training scenes and no saved models".into()));
    }
    let crf_model = crf::train(&crf_chains(train)?, &cfg.crf)?;
    let samples = if cfg.augment {
        augmented_group_samples(train, &crf_model)?
    } else {
        gold_group_samples(train)?
    };
    let mut bundle = ModelBundle {
        crf: Some(crf_model),
        ..ModelBundle::default()
    };
    let mut gammas = Vec::new();
    for task in SvmTask::ALL {
        let (model, sel) = train_svm(task, &samples, &cfg.svm)?;
        bundle.set_svm(task, model);
        gammas.push(GammaRecord {
            task,
            gamma: sel.gamma,
            fallback: sel.fallback,
            cv_scores: sel.cv_scores,
        });
    }
    Ok((bundle, gammas))
}

struct SceneResult {
    learned: Detection,
    rule: Option<Detection>,
}

fn evaluate_scenes(scenes: &[Scene], models: &ModelBundle) -> Result<Vec<SceneResult>> {
    scenes
        .par_iter()
        .map(|s| {
            let learned = detect_with_bundle(s, models)?;
            let rule = if s.poses.len() >= 2 { Some(rule_classify(s)?) } else { None };
            Ok(SceneResult { learned, rule })
        })
        .collect()
}

fn names<T: ToString>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|x| x.to_string()).collect()
}

fn membership_report(test: &[Scene], results: &[SceneResult]) -> Result<Option<ClassificationReport>> {
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for (s, r) in test.iter().zip(results) {
        if let Some(m) = s.membership() {
            gold.extend(m.iter().map(|g| g.index()));
            pred.extend(r.learned.membership.iter().map(|g| Some(g.index())));
        }
    }
    if gold.is_empty() {
        return Ok(None);
    }
    report_with_abstentions(&gold, &pred, &names(GroupLabel::ALL.iter().map(|g| format!("{g:?}")))).map(Some)
}

fn formation_reports(
    test: &[Scene],
    results: &[SceneResult],
) -> Result<(Option<ClassificationReport>, Option<ClassificationReport>)> {
    let (mut gold, mut learned, mut rule) = (Vec::new(), Vec::new(), Vec::new());
    for (s, r) in test.iter().zip(results) {
        if let Some(f) = s.formation() {
            gold.push(f.index());
            learned.push(r.learned.formation.map(Formation::index));
            rule.push(r.rule.as_ref().and_then(|d| d.formation).map(Formation::index));
        }
    }
    if gold.is_empty() {
        return Ok((None, None));
    }
    let classes = names(Formation::ALL);
    Ok((
        Some(report_with_abstentions(&gold, &learned, &classes)?),
        Some(report_with_abstentions(&gold, &rule, &classes)?),
    ))
}

fn angle_report(test: &[Scene], results: &[SceneResult]) -> Result<Option<ClassificationReport>> {
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for (s, r) in test.iter().zip(results) {
        if let Some(a) = s.angle() {
            gold.push(a.index());
            pred.push(r.learned.angle_deg.map(ApproachAngle::index));
        }
    }
    if gold.is_empty() {
        return Ok(None);
    }
    report_with_abstentions(&gold, &pred, &names(ApproachAngle::ALL)).map(Some)
}

fn joint_table(test: &[Scene], results: &[SceneResult]) -> Option<JointTable> {
    let mut counts = vec![(0usize, 0usize, 0usize); JointClass::COUNT];
    for (s, r) in test.iter().zip(results) {
        let (Some(formation), Some(angle)) = (s.formation(), s.angle()) else {
            continue;
        };
        let cell = JointClass { formation, angle };
        let c = &mut counts[cell.encode()];
        c.0 += 1;
        if r.learned.joint == Some(cell) {
            c.1 += 1;
        }
        if r.rule.as_ref().and_then(|d| d.formation) == Some(formation) {
            c.2 += 1;
        }
    }
    let n: usize = counts.iter().map(|c| c.0).sum();
    if n == 0 {
        return None;
    }
    let rows: Vec<CellRow> = JointClass::all()
        .map(|j| {
            let (n, l, r) = counts[j.encode()];
            let acc = |k: usize| (n > 0).then(|| k as f64 / n as f64);
            CellRow {
                formation: j.formation,
                angle_deg: j.angle,
                n,
                learned_accuracy: acc(l),
                rule_accuracy: acc(r),
            }
        })
        .collect();
    let mean = |f: fn(&CellRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    Some(JointTable {
        average_learned: mean(|r| r.learned_accuracy),
        average_rule: mean(|r| r.rule_accuracy),
        overall_learned: counts.iter().map(|c| c.1).sum::<usize>() as f64 / n as f64,
        rows,
    })
}

fn opt4(x: Option<f64>) -> String {
    x.map(fmt4).unwrap_or_default()
}

fn write_joint_table(t: &JointTable, dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("table4_joint.csv"))?;
    w.write_record(["formation", "angle_deg", "n", "learned_accuracy", "rule_accuracy"])?;
    for r in &t.rows {
        w.write_record([
            r.formation.to_string(),
            r.angle_deg.to_string(),
            r.n.to_string(),
            opt4(r.learned_accuracy),
            opt4(r.rule_accuracy),
        ])?;
    }
    w.write_record([
        "average".to_string(),
        String::new(),
        t.rows.iter().map(|r| r.n).sum::<usize>().to_string(),
        fmt4(t.average_learned),
        fmt4(t.average_rule),
    ])?;
    w.flush()?;
    std::fs::write(dir.join("table4_joint.json"), serde_json::to_string_pretty(t)?)?;
    Ok(())
}

fn write_formation_table(learned: &ClassificationReport, rule: &ClassificationReport, dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("table2_formation.csv"))?;
    w.write_record([
        "class",
        "learned_precision",
        "learned_recall",
        "learned_f1",
        "rule_precision",
        "rule_recall",
        "rule_f1",
        "support",
    ])?;
    for (l, r) in learned.per_class.iter().zip(&rule.per_class) {
        w.write_record([
            l.class.clone(),
            fmt4(l.precision),
            fmt4(l.recall),
            fmt4(l.f1),
            fmt4(r.precision),
            fmt4(r.recall),
            fmt4(r.f1),
            l.support.to_string(),
        ])?;
    }
    let (a, b) = (learned.weighted, rule.weighted);
    w.write_record([
        "weighted avg".to_string(),
        fmt4(a.precision),
        fmt4(a.recall),
        fmt4(a.f1),
        fmt4(b.precision),
        fmt4(b.recall),
        fmt4(b.f1),
        learned.total.to_string(),
    ])?;
    w.write_record([
        "accuracy".to_string(),
        String::new(),
        String::new(),
        fmt4(learned.accuracy),
        String::new(),
        String::new(),
        fmt4(rule.accuracy),
        learned.total.to_string(),
    ])?;
    w.flush()?;
    #[derive(Serialize)]
    struct Pair<'a> {
        learned: &'a ClassificationReport,
        rule: &'a ClassificationReport,
    }
    std::fs::write(
        dir.join("table2_formation.json"),
        serde_json::to_string_pretty(&Pair { learned, rule })?,
    )?;
    Ok(())
}

/// Trains (unless `models` is set), evaluates on the test scenes and, when
/// `out_dir` is given, writes the requested tables as CSV + JSON, the summary,
/// the models and the test split.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    if cfg.tables.is_empty() {
        return Err(Error::Config("no tables requested".into()));
    }
    let (train, test) = load_split(cfg)?;
    if test.is_empty() {
        return Err(Error::Config("no test scenes".into()));
    }
    let (models, gamma) = match &cfg.models {
        Some(dir) => (load_models(dir)?, Vec::new()),
        None => train_models(&train, cfg)?,
    };
    let results = evaluate_scenes(&test, &models)?;
    let want = |t: Table| cfg.tables.contains(&t);

    let membership = if want(Table::I) { membership_report(&test, &results)? } else { None };
    let (formation, rule_formation) = if want(Table::II) {
        formation_reports(&test, &results)?
    } else {
        (None, None)
    };
    let angle = if want(Table::III) { angle_report(&test, &results)? } else { None };
    let joint = if want(Table::IV) { joint_table(&test, &results) } else { None };

    let summary = Summary {
        seed: cfg.seed,
        cv_seed: cfg.svm.cv_seed,
        n_train: train.len(),
        n_test: test.len(),
        membership_weighted_f1: membership.as_ref().map(|r| r.weighted.f1),
        formation_weighted_f1: formation.as_ref().map(|r| r.weighted.f1),
        rule_formation_weighted_f1: rule_formation.as_ref().map(|r| r.weighted.f1),
        angle_weighted_f1: angle.as_ref().map(|r| r.weighted.f1),
        joint_accuracy: joint.as_ref().map(|t| t.overall_learned),
        gamma,
        config: cfg.clone(),
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        if let Some(r) = &membership {
            r.save(&dir.join("table1_membership.csv"), &dir.join("table1_membership.json"))?;
        }
        if let (Some(l), Some(r)) = (&formation, &rule_formation) {
            write_formation_table(l, r, dir)?;
        }
        if let Some(r) = &angle {
            r.save(&dir.join("table3_angle.csv"), &dir.join("table3_angle.json"))?;
        }
        if let Some(t) = &joint {
            write_joint_table(t, dir)?;
        }
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        if cfg.models.is_none() {
            save_models(&models, &dir.join("models"))?;
        }
        write_scenes_file(&dir.join("test.jsonl"), &test)?;
    }

    Ok(ExperimentOutcome {
        summary,
        membership,
        formation,
        rule_formation,
        angle,
        joint,
        models,
        test,
    })
}
