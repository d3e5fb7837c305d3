use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use pcl_core::model::file::ProblemFile;
use pcl_core::model::ProblemModel;
use pcl_core::problems::{builtin, BUILTIN};
use serde::Serialize;

use crate::context::GlobalFeatures;

/// A problem sessions can be opened on.
#[derive(Debug)]
pub struct Problem {
    pub id: String,
    pub model: Arc<ProblemModel>,
    pub globals: GlobalFeatures,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemInfo {
    pub id: String,
    pub kind: Option<String>,
    pub variables: usize,
    pub features: usize,
    pub global_features: usize,
    pub constraints: usize,
    pub parts: Vec<String>,
}

/// The problem catalog, keyed by id.
#[derive(Debug, Default)]
pub struct Registry {
    problems: BTreeMap<String, Arc<Problem>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in benchmarks (`grid`, `training`, `hotel`).
    pub fn with_builtins() -> pcl_core::Result<Self> {
        let mut r = Self::empty();
        for name in BUILTIN {
            r.insert(name, builtin(name)?);
        }
        Ok(r)
    }

    pub fn insert(&mut self, id: impl Into<String>, model: ProblemModel) {
        let id = id.into();
        let globals = GlobalFeatures::of(&model);
        let problem = Problem {
            id: id.clone(),
            model: Arc::new(model),
            globals,
        };
        self.problems.insert(id, Arc::new(problem));
    }

    /// Registers every `*.json` problem file in `dir` under its file stem.
    pub fn load_dir(&mut self, dir: &Path) -> pcl_core::Result<usize> {
        let mut n = 0;
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let id = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                self.insert(id, ProblemFile::load(&path)?.into_model()?);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Problem>> {
        self.problems.get(id).cloned()
    }

    pub fn catalog(&self) -> Vec<ProblemInfo> {
        self.problems
            .values()
            .map(|p| {
                let m = &p.model;
                ProblemInfo {
                    id: p.id.clone(),
                    kind: m.metadata().get("kind").and_then(|k| k.as_str()).map(String::from),
                    variables: m.num_vars(),
                    features: m.num_features(),
                    global_features: p.globals.len(),
                    constraints: m.constraints().len(),
                    parts: m.parts().iter().map(|bp| bp.name.clone()).collect(),
                }
            })
            .collect()
    }
}
