//! A small content-addressed DAG runner.
//!
//! Each step writes into `<root>/<step>/<key>/`, where the key hashes the
//! step name, its configuration, the output hashes of its dependencies and
//! the contents of its input files. A directory holding a completion marker
//! is reused instead of re-running the step.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{hash_file, sha256_hex, write_json};

pub const COMPLETE_MARKER: &str = ".complete";
pub const RUN_MANIFEST: &str = "run_manifest.json";
const KEY_LEN: usize = 16;

/// What a step sees while running.
pub struct StepContext<'a> {
    pub name: &'a str,
    pub out_dir: &'a Path,
    deps: &'a BTreeMap<String, PathBuf>,
}

impl StepContext<'_> {
    /// Output directory of dependency `name`.
    pub fn dep(&self, name: &str) -> Result<&Path> {
        self.deps
            .get(name)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::InvalidArgument(format!("step {} has no dependency {name}", self.name)))
    }

    pub fn output(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }
}

type StepFn = Box<dyn Fn(&StepContext) -> Result<()> + Send + Sync>;

pub struct Step {
    pub name: String,
    pub deps: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    run: StepFn,
}

impl Step {
    pub fn new(
        name: impl Into<String>,
        deps: &[&str],
        config: serde_json::Value,
        inputs: Vec<PathBuf>,
        run: impl Fn(&StepContext) -> Result<()> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            deps: deps.iter().map(|d| d.to_string()).collect(),
            config,
            inputs,
            run: Box::new(run),
        }
    }
}

/// One entry of `run_manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub key: String,
    /// Output directory relative to the run root.
    pub dir: String,
    pub output_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub records: Vec<StepRecord>,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
}

impl RunSummary {
    pub fn dir_of(&self, root: &Path, step: &str) -> Option<PathBuf> {
        self.records.iter().find(|r| r.name == step).map(|r| root.join(&r.dir))
    }
}

#[derive(Default)]
pub struct Dag {
    steps: Vec<Step>,
}

/// Hash over the sorted relative paths and contents of every file under `dir`.
pub fn hash_tree(dir: &Path) -> Result<String> {
    fn walk(dir: &Path, base: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, base, out)?;
            } else if path.file_name().is_some_and(|n| n != COMPLETE_MARKER) {
                let rel = path.strip_prefix(base).expect("walk stays under base");
                out.push((rel.to_string_lossy().replace('\\', "/"), path));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    let mut listing = String::new();
    for (rel, path) in files {
        listing.push_str(&format!("{rel}\0{}\n", hash_file(&path)?));
    }
    Ok(sha256_hex(listing.as_bytes()))
}

impl Dag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, step: Step) -> Result<()> {
        if self.steps.iter().any(|s| s.name == step.name) {
            return Err(Error::InvalidArgument(format!("duplicate step {}", step.name)));
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn step_names(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.name.as_str()).collect()
    }

    /// Keeps only `targets` and everything they transitively depend on.
    pub fn prune(&mut self, targets: &[&str]) -> Result<()> {
        let mut keep: BTreeSet<String> = BTreeSet::new();
        let mut stack: Vec<String> = Vec::new();
        for t in targets {
            if !self.steps.iter().any(|s| s.name == *t) {
                return Err(Error::InvalidArgument(format!("unknown step {t}")));
            }
            stack.push(t.to_string());
        }
        while let Some(name) = stack.pop() {
            if keep.insert(name.clone()) {
                if let Some(step) = self.steps.iter().find(|s| s.name == name) {
                    stack.extend(step.deps.iter().cloned());
                }
            }
        }
        self.steps.retain(|s| keep.contains(&s.name));
        Ok(())
    }

    /// Groups steps into waves whose dependencies all lie in earlier waves.
    fn waves(&self) -> Result<Vec<Vec<usize>>> {
        let names: BTreeMap<&str, usize> = self.steps.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        for s in &self.steps {
            if let Some(missing) = s.deps.iter().find(|d| !names.contains_key(d.as_str())) {
                return Err(Error::InvalidArgument(format!("step {} depends on unknown step {missing}", s.name)));
            }
        }
        let mut done: BTreeSet<usize> = BTreeSet::new();
        let mut waves = Vec::new();
        while done.len() < self.steps.len() {
            let ready: Vec<usize> = (0..self.steps.len())
                .filter(|i| !done.contains(i))
                .filter(|&i| self.steps[i].deps.iter().all(|d| done.contains(&names[d.as_str()])))
                .collect();
            if ready.is_empty() {
                let stuck: Vec<&str> = (0..self.steps.len())
                    .filter(|i| !done.contains(i))
                    .map(|i| self.steps[i].name.as_str())
                    .collect();
                return Err(Error::InvalidArgument(format!("dependency cycle among {stuck:?}")));
            }
            done.extend(&ready);
            waves.push(ready);
        }
        Ok(waves)
    }

    fn key(&self, step: &Step, dep_hashes: &BTreeMap<String, String>) -> Result<String> {
        let deps: BTreeMap<&str, &str> = step
            .deps
            .iter()
            .map(|d| (d.as_str(), dep_hashes[d].as_str()))
            .collect();
        let inputs = step.inputs.iter().map(|p| hash_file(p)).collect::<Result<Vec<_>>>()?;
        let material = serde_json::json!({
            "step": step.name,
            "config": step.config,
            "deps": deps,
            "inputs": inputs,
        });
        Ok(sha256_hex(material.to_string().as_bytes())[..KEY_LEN].to_string())
    }

    /// Runs one step unless a completed output directory already exists;
    /// returns (record, executed).
    fn run_step(
        &self,
        root: &Path,
        step: &Step,
        dep_hashes: &BTreeMap<String, String>,
        dep_dirs: &BTreeMap<String, PathBuf>,
    ) -> Result<(StepRecord, bool)> {
        let key = self.key(step, dep_hashes)?;
        let rel = format!("{}/{}", step.name, key);
        let final_dir = root.join(&rel);
        let marker = final_dir.join(COMPLETE_MARKER);
        if marker.is_file() {
            let output_hash = std::fs::read_to_string(&marker).map_err(|e| Error::io(&marker, e))?;
            log::info!("step {}: up to date ({key})", step.name);
            let record = StepRecord { name: step.name.clone(), key, dir: rel, output_hash: output_hash.trim().to_string() };
            return Ok((record, false));
        }
        log::info!("step {}: running ({key})", step.name);
        let tmp = root.join(&step.name).join(format!(".tmp-{key}"));
        for stale in [&tmp, &final_dir] {
            if stale.exists() {
                std::fs::remove_dir_all(stale).map_err(|e| Error::io(stale, e))?;
            }
        }
        std::fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let deps: BTreeMap<String, PathBuf> =
            step.deps.iter().map(|d| (d.clone(), dep_dirs[d].clone())).collect();
        let ctx = StepContext { name: &step.name, out_dir: &tmp, deps: &deps };
        (step.run)(&ctx)?;
        let output_hash = hash_tree(&tmp)?;
        let tmp_marker = tmp.join(COMPLETE_MARKER);
        std::fs::write(&tmp_marker, format!("{output_hash}\n")).map_err(|e| Error::io(&tmp_marker, e))?;
        std::fs::rename(&tmp, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
        Ok((StepRecord { name: step.name.clone(), key, dir: rel, output_hash }, true))
    }

    /// Executes every step in dependency order, `jobs` at a time within a
    /// wave, and writes `run_manifest.json` under `root`. The first failing
    /// step aborts the run before any later wave starts.
    pub fn run(&self, root: &Path, jobs: usize) -> Result<RunSummary> {
        let waves = self.waves()?;
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

        let mut hashes: BTreeMap<String, String> = BTreeMap::new();
        let mut dirs: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut summary = RunSummary { records: Vec::new(), executed: Vec::new(), skipped: Vec::new() };
        for wave in waves {
            let results: Vec<(usize, Result<(StepRecord, bool)>)> = pool.install(|| {
                wave.par_iter()
                    .map(|&i| (i, self.run_step(root, &self.steps[i], &hashes, &dirs)))
                    .collect()
            });
            for (i, result) in results {
                let name = &self.steps[i].name;
                let (record, executed) = result.map_err(|cause| Error::Step {
                    step: name.clone(),
                    cause: Box::new(cause),
                })?;
                hashes.insert(name.clone(), record.output_hash.clone());
                dirs.insert(name.clone(), root.join(&record.dir));
                if executed {
                    summary.executed.push(name.clone());
                } else {
                    summary.skipped.push(name.clone());
                }
                summary.records.push(record);
            }
        }
        write_json(&root.join(RUN_MANIFEST), &summary.records)?;
        Ok(summary)
    }
}
