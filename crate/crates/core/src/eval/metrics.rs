use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages.
    pub weighted: Averages,
    pub accuracy: f64,
    pub total: usize,
    /// `confusion[gold][pred]`.
    pub confusion: Vec<Vec<usize>>,
    /// Per gold class, samples that received no prediction.
    pub abstained: Vec<usize>,
    /// Some precision or recall had a zero denominator and was set to 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report(gold: &[usize], pred: &[usize], classes: &[String]) -> Result<ClassificationReport> {
    let pred: Vec<Option<usize>> = pred.iter().map(|&p| Some(p)).collect();
    report_with_abstentions(gold, &pred, classes)
}

/// Like [`report`], with `None` predictions counted as misses that no class
/// receives.
pub fn report_with_abstentions(gold: &[usize], pred: &[Option<usize>], classes: &[String]) -> Result<ClassificationReport> {
    if gold.len() != pred.len() {
        return Err(Error::Input(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Input("cannot score an empty label set".into()));
    }
    let k = classes.len();
    let out_of_range = gold.iter().chain(pred.iter().flatten()).find(|&&c| c >= k);
    if let Some(c) = out_of_range {
        return Err(Error::Input(format!("label {c} outside the {k} classes")));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    let mut abstained = vec![0usize; k];
    for (&g, p) in gold.iter().zip(pred) {
        match p {
            Some(p) => confusion[g][*p] += 1,
            None => abstained[g] += 1,
        }
    }
    let total = gold.len();
    let mut zero_division = false;
    let mut per_class = Vec::with_capacity(k);
    let mut weighted = Averages {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    for c in 0..k {
        let tp = confusion[c][c];
        let predicted: usize = (0..k).map(|g| confusion[g][c]).sum();
        let support = confusion[c].iter().sum::<usize>() + abstained[c];
        let precision = ratio(tp, predicted, &mut zero_division);
        let recall = ratio(tp, support, &mut zero_division);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = support as f64 / total as f64;
        weighted.precision += w * precision;
        weighted.recall += w * recall;
        weighted.f1 += w * f1;
        per_class.push(ClassMetrics {
            class: classes[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(ClassificationReport {
        per_class,
        weighted,
        accuracy: correct as f64 / total as f64,
        total,
        confusion,
        abstained,
        zero_division,
    })
}

impl ClassificationReport {
    /// CSV with one row per class, then `weighted avg` and `accuracy` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["class", "precision", "recall", "f1", "support"])?;
        for m in &self.per_class {
            out.write_record([
                m.class.clone(),
                fmt4(m.precision),
                fmt4(m.recall),
                fmt4(m.f1),
                m.support.to_string(),
            ])?;
        }
        let a = self.weighted;
        out.write_record([
            "weighted avg".into(),
            fmt4(a.precision),
            fmt4(a.recall),
            fmt4(a.f1),
            self.total.to_string(),
        ])?;
        out.write_record(["accuracy".into(), String::new(), String::new(), fmt4(self.accuracy), self.total.to_string()])?;
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(json_path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Fixed four-decimal rendering used in every CSV.
pub fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}
