//! Workspace layout and manifest.
//!
//! ```text
//! <root>/
//!   manifest.json   versioned list of artifacts with sha256 and size, config, seeds
//!   scenes/         one directory per scene, truth.json, buoys.csv, speckle_floor.json
//!   patches/        candidates.jsonl, patches.jsonl, <patch id>.f32
//!   plans/          balance_plan.json, histograms.csv
//!   splits/         assignment.json, trace.csv, leakage.json
//!   stats/          stats.json
//!   reports/        evaluation tables (csv + txt) and summary.json
//! ```
//!
//! Every file goes through [`Workspace::write`], which writes to a temporary
//! sibling, renames it into place and records its hash. The manifest itself
//! is replaced the same way.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use log::{debug, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::patches::{PatchClass, PatchRecord, Subset};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const LAYOUT: [&str; 6] = ["scenes", "patches", "plans", "splits", "stats", "reports"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Stages completed, in run order.
    pub stages: Vec<String>,
    /// Relative path (forward slashes) to content hash.
    pub artifacts: BTreeMap<String, Artifact>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            stages: Vec::new(),
            artifacts: BTreeMap::new(),
        }
    }
}

impl Manifest {
    /// sha256 of the canonical manifest bytes.
    pub fn digest(&self) -> String {
        sha256_hex(&manifest_bytes(self))
    }
}

fn manifest_bytes(m: &Manifest) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(m).expect("manifest serializes");
    b.push(b'\n');
    b
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    pub manifest: Manifest,
}

impl Workspace {
    /// Opens `root`, creating the layout and an empty manifest if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for d in LAYOUT {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let mpath = root.join(MANIFEST);
        let manifest = if mpath.exists() {
            let bytes = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
            let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::json(&mpath, e))?;
            if m.version != MANIFEST_VERSION {
                return Err(Error::Data(format!(
                    "{}: manifest version {} is not {MANIFEST_VERSION}",
                    mpath.display(),
                    m.version
                )));
            }
            m
        } else {
            Manifest::default()
        };
        Ok(Workspace { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.manifest.artifacts.contains_key(rel)
    }

    /// Atomically writes `rel` and records its hash.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        atomic_write(&path, bytes)?;
        self.manifest.artifacts.insert(
            rel.to_string(),
            Artifact {
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut b = serde_json::to_vec_pretty(value).map_err(|e| Error::json(self.path(rel), e))?;
        b.push(b'\n');
        self.write(rel, &b)
    }

    pub fn read(&self, rel: &str) -> Result<Vec<u8>> {
        let path = self.path(rel);
        fs::read(&path).map_err(|e| Error::io(&path, e))
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let bytes = self.read(rel)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::json(self.path(rel), e))
    }

    /// Fails with a stage-named error when `rel` has not been produced.
    pub fn require(&self, stage: &'static str, rel: &str, hint: &str) -> Result<()> {
        if self.exists(rel) && self.path(rel).exists() {
            Ok(())
        } else {
            Err(Error::MissingArtifact {
                stage,
                artifact: rel.to_string(),
                hint: hint.to_string(),
            })
        }
    }

    /// Deletes every tracked artifact under `prefix` (a directory, no trailing slash).
    pub fn clear(&mut self, prefix: &str) -> Result<()> {
        let dir = format!("{prefix}/");
        self.remove_where(|rel| rel.starts_with(&dir) || rel == prefix)
    }

    /// Deletes every tracked artifact whose path satisfies `pred`.
    pub fn remove_where(&mut self, pred: impl Fn(&str) -> bool) -> Result<()> {
        let doomed: Vec<String> = self
            .manifest
            .artifacts
            .keys()
            .filter(|k| pred(k))
            .cloned()
            .collect();
        for rel in doomed {
            let p = self.path(&rel);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
            self.manifest.artifacts.remove(&rel);
            debug!("removed {rel}");
        }
        Ok(())
    }

    /// Records a file written by another tool.
    pub fn adopt(&mut self, rel: &str) -> Result<()> {
        let bytes = self.read(rel)?;
        self.manifest.artifacts.insert(
            rel.to_string(),
            Artifact {
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn mark_stage(&mut self, stage: &str) {
        self.manifest.stages.retain(|s| s != stage);
        self.manifest.stages.push(stage.to_string());
    }

    /// Stages and everything downstream are forgotten when a stage reruns.
    pub fn forget_stages_from(&mut self, stage: &str) {
        if let Some(i) = self.manifest.stages.iter().position(|s| s == stage) {
            self.manifest.stages.truncate(i);
        }
    }

    pub fn save_manifest(&self) -> Result<()> {
        atomic_write(&self.path(MANIFEST), &manifest_bytes(&self.manifest))
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Catalog lines from a file, parsed line by line.
pub fn read_catalog_file(path: &Path) -> Result<Vec<PatchRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::with_capacity(1 << 20, f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub patches: usize,
    pub scenes: usize,
    pub by_class: BTreeMap<PatchClass, usize>,
    pub by_subset: BTreeMap<Subset, usize>,
}

pub fn summarize_catalog(records: &[PatchRecord]) -> CatalogSummary {
    let mut s = CatalogSummary {
        patches: records.len(),
        ..CatalogSummary::default()
    };
    let mut scenes = BTreeSet::new();
    for r in records {
        scenes.insert(r.scene_id.as_str());
        *s.by_class.entry(r.class).or_insert(0) += 1;
        if let Some(sub) = r.subset {
            *s.by_subset.entry(sub).or_insert(0) += 1;
        }
    }
    s.scenes = scenes.len();
    s
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub missing: Vec<String>,
    pub modified: Vec<String>,
    pub untracked: Vec<String>,
    pub inconsistencies: Vec<String>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.missing.is_empty() && self.modified.is_empty() && self.inconsistencies.is_empty()
    }
}

/// Recomputes every artifact hash and cross-checks catalog, plan and split counts.
pub fn verify_workspace(root: &Path) -> Result<VerifyReport> {
    let mpath = root.join(MANIFEST);
    if !mpath.exists() {
        return Err(Error::MissingArtifact {
            stage: "verify",
            artifact: MANIFEST.to_string(),
            hint: "run a pipeline stage first".to_string(),
        });
    }
    let ws = Workspace::open(root)?;
    let mut report = VerifyReport::default();
    for (rel, art) in &ws.manifest.artifacts {
        report.checked += 1;
        let path = ws.path(rel);
        match fs::read(&path) {
            Err(_) => report.missing.push(rel.clone()),
            Ok(bytes) => {
                if bytes.len() as u64 != art.bytes || sha256_hex(&bytes) != art.sha256 {
                    report.modified.push(rel.clone());
                }
            }
        }
    }
    for d in LAYOUT {
        collect_untracked(
            root,
            &root.join(d),
            &ws.manifest.artifacts,
            &mut report.untracked,
        )?;
    }
    for f in &report.untracked {
        warn!("untracked file {f}");
    }
    cross_check(&ws, &mut report)?;
    Ok(report)
}

fn collect_untracked(
    root: &Path,
    dir: &Path,
    tracked: &BTreeMap<String, Artifact>,
    out: &mut Vec<String>,
) -> Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    let mut entries: Vec<_> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_untracked(root, &p, tracked, out)?;
        } else {
            let rel = p
                .strip_prefix(root)
                .expect("under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            if !tracked.contains_key(&rel) {
                out.push(rel);
            }
        }
    }
    Ok(())
}

fn cross_check(ws: &Workspace, report: &mut VerifyReport) -> Result<()> {
    const CATALOG: &str = "patches/patches.jsonl";
    if !ws.exists(CATALOG) || report.missing.iter().any(|m| m == CATALOG) {
        return Ok(());
    }
    let catalog = read_catalog_file(&ws.path(CATALOG))?;
    let summary = summarize_catalog(&catalog);
    for r in &catalog {
        let t = format!(
            "patches/{}",
            crate::patches::tensor_file_name(&r.scene_id, r.row0, r.col0)
        );
        if !ws.exists(&t) || !ws.path(&t).is_file() {
            report
                .inconsistencies
                .push(format!("catalog entry {} has no tensor {t}", r.id()));
        }
    }
    if ws.exists("plans/balance_plan.json") {
        let plan: crate::balance::BalancePlan = ws.read_json("plans/balance_plan.json")?;
        let count = |c| summary.by_class.get(&c).copied().unwrap_or(0);
        if plan.n_plus != count(PatchClass::Rain) || plan.n_minus != count(PatchClass::Rainless) {
            report.inconsistencies.push(format!(
                "plan selects {}+{} patches, catalog holds {}+{}",
                plan.n_plus,
                plan.n_minus,
                count(PatchClass::Rain),
                count(PatchClass::Rainless)
            ));
        }
    }
    if ws.exists("splits/assignment.json") {
        let a: crate::split::SplitAssignment = ws.read_json("splits/assignment.json")?;
        let mut expected: BTreeMap<Subset, usize> = BTreeMap::new();
        for r in &catalog {
            *expected.entry(a.subset_of(&r.scene_id)).or_insert(0) += 1;
            if r.subset != Some(a.subset_of(&r.scene_id)) {
                report.inconsistencies.push(format!(
                    "patch {} subset {:?} disagrees with its scene",
                    r.id(),
                    r.subset
                ));
            }
        }
        for (sub, n) in expected {
            let got = summary.by_subset.get(&sub).copied().unwrap_or(0);
            if got != n {
                report.inconsistencies.push(format!(
                    "{sub}: catalog lists {got} patches, assignment implies {n}"
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_verify_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        ws.write("plans/a.txt", b"hello").unwrap();
        ws.write_json("stats/b.json", &vec![1, 2]).unwrap();
        ws.save_manifest().unwrap();
        let r = verify_workspace(dir.path()).unwrap();
        assert!(r.pass() && r.checked == 2, "{r:?}");

        let p = dir.path().join("plans/a.txt");
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 1;
        fs::write(&p, bytes).unwrap();
        fs::write(dir.path().join("reports/stray.txt"), b"x").unwrap();
        let r = verify_workspace(dir.path()).unwrap();
        assert_eq!(r.modified, vec!["plans/a.txt".to_string()]);
        assert_eq!(r.untracked, vec!["reports/stray.txt".to_string()]);
        assert!(!r.pass());
    }

    #[test]
    fn reopen_keeps_manifest_and_clear_removes() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        ws.write("patches/x.f32", &[0, 1, 2, 3]).unwrap();
        ws.write("patches/y.f32", &[4]).unwrap();
        ws.save_manifest().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        assert!(ws.exists("patches/x.f32"));
        ws.clear("patches").unwrap();
        assert!(ws.manifest.artifacts.is_empty());
        assert!(!dir.path().join("patches/x.f32").exists());
        let e = ws
            .require("split", "patches/patches.jsonl", "run `balance` first")
            .unwrap_err();
        assert!(e.to_string().contains("split") && e.to_string().contains("balance"));
    }
}
