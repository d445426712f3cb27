use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SvmTask;
use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::features::FEATURE_CATALOG_VERSION;
use crate::svm::SvmModel;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const CRF_FILE: &str = "crf.json";

/// Any subset of the trained models, stored as one directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelBundle {
    pub crf: Option<CrfModel>,
    pub formation: Option<SvmModel>,
    pub angle: Option<SvmModel>,
    pub joint: Option<SvmModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    feature_catalog_version: String,
    crf: Option<String>,
    formation: Option<String>,
    angle: Option<String>,
    joint: Option<String>,
}

fn svm_file(task: SvmTask) -> String {
    format!("svm_{task}.json")
}

impl ModelBundle {
    pub fn svm(&self, task: SvmTask) -> Option<&SvmModel> {
        match task {
            SvmTask::Formation => self.formation.as_ref(),
            SvmTask::Angle => self.angle.as_ref(),
            SvmTask::Joint => self.joint.as_ref(),
        }
    }

    pub fn set_svm(&mut self, task: SvmTask, model: SvmModel) {
        let slot = match task {
            SvmTask::Formation => &mut self.formation,
            SvmTask::Angle => &mut self.angle,
            SvmTask::Joint => &mut self.joint,
        };
        *slot = Some(model);
    }
}

fn check_version(found: &str, what: &str) -> Result<()> {
    if found != FEATURE_CATALOG_VERSION {
        return Err(Error::VersionMismatch {
            expected: FEATURE_CATALOG_VERSION.to_string(),
            found: format!("{found} ({what})"),
        });
    }
    Ok(())
}

/// Writes every present model plus a manifest into `dir`, creating it if needed.
pub fn save_models(bundle: &ModelBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        format_version: BUNDLE_FORMAT_VERSION,
        feature_catalog_version: FEATURE_CATALOG_VERSION.to_string(),
        crf: None,
        formation: None,
        angle: None,
        joint: None,
    };
    if let Some(crf) = &bundle.crf {
        check_version(crf.feature_catalog_version(), "crf")?;
        crf.save(&dir.join(CRF_FILE))?;
        manifest.crf = Some(CRF_FILE.to_string());
    }
    for task in SvmTask::ALL {
        if let Some(model) = bundle.svm(task) {
            check_version(model.feature_catalog_version(), task.as_str())?;
            let name = svm_file(task);
            model.save(&dir.join(&name))?;
            let slot = match task {
                SvmTask::Formation => &mut manifest.formation,
                SvmTask::Angle => &mut manifest.angle,
                SvmTask::Joint => &mut manifest.joint,
            };
            *slot = Some(name);
        }
    }
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a directory written by [`save_models`], checking catalog versions
/// and class lists.
pub fn load_models(dir: &Path) -> Result<ModelBundle> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::CorruptModel {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: BUNDLE_FORMAT_VERSION.to_string(),
            found: manifest.format_version.to_string(),
        });
    }
    check_version(&manifest.feature_catalog_version, "manifest")?;
    let mut bundle = ModelBundle::default();
    if let Some(name) = &manifest.crf {
        let crf = CrfModel::load(&dir.join(name))?;
        check_version(crf.feature_catalog_version(), "crf")?;
        bundle.crf = Some(crf);
    }
    let entries = [
        (SvmTask::Formation, &manifest.formation),
        (SvmTask::Angle, &manifest.angle),
        (SvmTask::Joint, &manifest.joint),
    ];
    for (task, name) in entries {
        let Some(name) = name else { continue };
        let file = dir.join(name);
        let model = SvmModel::load(&file)?;
        check_version(model.feature_catalog_version(), task.as_str())?;
        if model.classes() != task.classes().as_slice() {
            return Err(Error::CorruptModel {
                path: file,
                message: format!("class list does not match the {task} task"),
            });
        }
        bundle.set_svm(task, model);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::GROUP_DIM;
    use crate::svm::{train_one_vs_rest, RbfKernelParams, SmoConfig};

    fn toy_svm(task: SvmTask) -> SvmModel {
        let classes = task.classes();
        let xs: Vec<Vec<f64>> = (0..classes.len())
            .map(|k| {
                let mut v = vec![0.0; GROUP_DIM];
                v[k % GROUP_DIM] = 1.0;
                v
            })
            .collect();
        let ys: Vec<usize> = (0..classes.len()).collect();
        train_one_vs_rest(&xs, &ys, classes, RbfKernelParams::new(0.5).unwrap(), &SmoConfig::default()).unwrap()
    }

    fn bundle() -> ModelBundle {
        let node_dim = crate::features::NODE_DIM;
        ModelBundle {
            crf: Some(CrfModel::zeros(node_dim, FEATURE_CATALOG_VERSION)),
            formation: Some(toy_svm(SvmTask::Formation)),
            angle: None,
            joint: Some(toy_svm(SvmTask::Joint)),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle();
        save_models(&b, dir.path()).unwrap();
        assert_eq!(load_models(dir.path()).unwrap(), b);
    }

    #[test]
    fn truncated_model_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        save_models(&bundle(), dir.path()).unwrap();
        let f = dir.path().join(svm_file(SvmTask::Joint));
        let text = std::fs::read_to_string(&f).unwrap();
        std::fs::write(&f, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_models(dir.path()), Err(Error::CorruptModel { .. })));
    }

    #[test]
    fn stale_catalog_names_both_versions() {
        let dir = tempfile::tempdir().unwrap();
        save_models(&bundle(), dir.path()).unwrap();
        let f = dir.path().join(CRF_FILE);
        let text = std::fs::read_to_string(&f).unwrap().replace(FEATURE_CATALOG_VERSION, "kp17-old");
        std::fs::write(&f, text).unwrap();
        match load_models(dir.path()) {
            Err(e @ Error::VersionMismatch { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains(FEATURE_CATALOG_VERSION) && msg.contains("kp17-old"), "{msg}");
                assert!(e.is_config());
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn wrong_task_classes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_models(&bundle(), dir.path()).unwrap();
        std::fs::copy(
            dir.path().join(svm_file(SvmTask::Formation)),
            dir.path().join(svm_file(SvmTask::Joint)),
        )
        .unwrap();
        assert!(matches!(load_models(dir.path()), Err(Error::CorruptModel { .. })));
    }
}
