//! File formats: trees, corpora, model parameters, fits and run manifests.
//!
//! All files are UTF-8 with LF line endings. Structured objects are JSON,
//! corpora are line-oriented text (one document per line, dense token lists
//! or sparse `word:count` pairs), reports are CSV. Node and word ids are
//! 1-based on disk.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drt::Drt;
use crate::error::IoError;
use crate::geometry::{HierarchyParams, TopicMap};
use crate::gibbs::Hyper;
use crate::model::{Corpus, ModelParams};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::File {
        path: path_str(path),
        source: e,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), IoError> {
    fs::write(path, content).map_err(|e| IoError::File {
        path: path_str(path),
        source: e,
    })
}

/// On-disk tree: a root id and a child-to-parent map.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TreeFile {
    pub root: usize,
    pub parents: BTreeMap<usize, usize>,
}

impl TreeFile {
    pub fn from_drt(drt: &Drt) -> Self {
        TreeFile {
            root: drt.root(),
            parents: drt.parent_map(),
        }
    }

    pub fn to_drt(&self) -> Result<Drt, IoError> {
        Ok(Drt::build(&self.parents, self.root)?)
    }
}

/// Reads a JSON tree file and validates it into a [`Drt`].
pub fn parse_tree(path: &Path) -> Result<Drt, IoError> {
    let text = read_file(path)?;
    let tf: TreeFile = serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path_str(path),
        detail: e.to_string(),
    })?;
    tf.to_drt()
}

pub fn write_tree(drt: &Drt, path: &Path) -> Result<(), IoError> {
    let tf = TreeFile::from_drt(drt);
    let text = serde_json::to_string_pretty(&tf).expect("tree serializes");
    write_file(path, &text)
}

/// Reads a corpus: one document per line. Dense lines are whitespace-
/// separated word ids; sparse lines use `word:count` pairs. A `#V=n` header
/// pins the vocabulary size, otherwise the maximum id is used. Blank and
/// other `#`-prefixed lines are skipped.
pub fn parse_corpus(path: &Path) -> Result<Corpus, IoError> {
    let text = read_file(path)?;
    parse_corpus_str(&text, &path_str(path))
}

fn parse_corpus_str(text: &str, origin: &str) -> Result<Corpus, IoError> {
    let mut declared_v: Option<usize> = None;
    let mut docs: Vec<Vec<usize>> = Vec::new();
    let mut max_id = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("V=") {
                let v: usize = v.trim().parse().map_err(|_| IoError::Format {
                    path: origin.into(),
                    line: lineno + 1,
                    detail: format!("bad vocabulary header '{line}'"),
                })?;
                declared_v = Some(v);
            }
            continue;
        }
        let sparse = line.contains(':');
        let mut doc = Vec::new();
        for tok in line.split_whitespace() {
            if sparse {
                let (id_s, count_s) = tok.split_once(':').ok_or_else(|| IoError::Format {
                    path: origin.into(),
                    line: lineno + 1,
                    detail: format!("expected word:count, got '{tok}'"),
                })?;
                let id: usize = id_s.parse().map_err(|_| IoError::Format {
                    path: origin.into(),
                    line: lineno + 1,
                    detail: format!("bad word id '{id_s}'"),
                })?;
                let count: usize = count_s.parse().map_err(|_| IoError::Format {
                    path: origin.into(),
                    line: lineno + 1,
                    detail: format!("bad count '{count_s}'"),
                })?;
                check_id(id, declared_v, origin, lineno + 1)?;
                max_id = max_id.max(id);
                doc.extend(std::iter::repeat(id).take(count));
            } else {
                let id: usize = tok.parse().map_err(|_| IoError::Format {
                    path: origin.into(),
                    line: lineno + 1,
                    detail: format!("bad word id '{tok}'"),
                })?;
                check_id(id, declared_v, origin, lineno + 1)?;
                max_id = max_id.max(id);
                doc.push(id);
            }
        }
        docs.push(doc);
    }

    let vocab = declared_v.unwrap_or(max_id);
    if vocab == 0 {
        return Err(IoError::Invalid {
            path: origin.into(),
            detail: "corpus has no words and no #V header".into(),
        });
    }
    Corpus::from_docs(vocab, docs).map_err(|e| IoError::Invalid {
        path: origin.into(),
        detail: e.to_string(),
    })
}

fn check_id(id: usize, declared: Option<usize>, origin: &str, line: usize) -> Result<(), IoError> {
    if id == 0 {
        return Err(IoError::IdOutOfRange {
            path: origin.into(),
            line,
            id,
            vocab: declared.unwrap_or(0),
        });
    }
    if let Some(v) = declared {
        if id > v {
            return Err(IoError::IdOutOfRange {
                path: origin.into(),
                line,
                id,
                vocab: v,
            });
        }
    }
    Ok(())
}

/// Writes a corpus with an explicit vocabulary header. Sparse mode loses the
/// word order inside documents but preserves the counts.
pub fn write_corpus(corpus: &Corpus, path: &Path, sparse: bool) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("#V={}\n", corpus.vocab_size));
    if sparse {
        for counts in &corpus.counts {
            let toks: Vec<String> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(v, &c)| format!("{}:{}", v + 1, c))
                .collect();
            out.push_str(&toks.join(" "));
            out.push('\n');
        }
    } else {
        for doc in &corpus.docs {
            let toks: Vec<String> = doc.iter().map(|w| w.to_string()).collect();
            out.push_str(&toks.join(" "));
            out.push('\n');
        }
    }
    write_file(path, &out)
}

/// Per-path concentration, either one shared scalar or one value per path.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlphaSpec {
    Scalar(f64),
    PerPath(Vec<f64>),
}

/// On-disk model parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub tree: TreeFile,
    /// `K x V` topic table, row `k` belongs to node `k + 1`.
    pub topics: Vec<Vec<f64>>,
    /// Path probabilities in canonical path order.
    pub pi: Vec<f64>,
    pub alpha: AlphaSpec,
}

impl ParamsFile {
    pub fn from_model(params: &ModelParams) -> Self {
        ParamsFile {
            tree: TreeFile::from_drt(&params.hierarchy.drt),
            topics: params.hierarchy.topic_map.topics().to_vec(),
            pi: params.hierarchy.pi.clone(),
            alpha: AlphaSpec::PerPath(params.alpha.clone()),
        }
    }

    pub fn to_model(&self) -> Result<ModelParams, IoError> {
        let drt = self.tree.to_drt()?;
        let tm = TopicMap::new(self.topics.clone()).map_err(|e| IoError::Invalid {
            path: "<params>".into(),
            detail: e.to_string(),
        })?;
        let h = HierarchyParams::new(drt, tm, self.pi.clone()).map_err(|e| IoError::Invalid {
            path: "<params>".into(),
            detail: e.to_string(),
        })?;
        let res = match &self.alpha {
            AlphaSpec::Scalar(a) => ModelParams::with_scalar_alpha(h, *a),
            AlphaSpec::PerPath(v) => ModelParams::new(h, v.clone()),
        };
        res.map_err(|e| IoError::Invalid {
            path: "<params>".into(),
            detail: e.to_string(),
        })
    }
}

pub fn parse_params(path: &Path) -> Result<ModelParams, IoError> {
    let text = read_file(path)?;
    let pf: ParamsFile = serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path_str(path),
        detail: e.to_string(),
    })?;
    pf.to_model()
}

pub fn write_params(params: &ModelParams, path: &Path) -> Result<(), IoError> {
    let pf = ParamsFile::from_model(params);
    let text = serde_json::to_string_pretty(&pf).expect("params serialize");
    write_file(path, &text)
}

/// On-disk hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HyperFile {
    pub alpha: f64,
    pub eta: f64,
    pub pi0: f64,
}

impl From<Hyper> for HyperFile {
    fn from(h: Hyper) -> Self {
        HyperFile {
            alpha: h.alpha,
            eta: h.eta,
            pi0: h.pi0,
        }
    }
}

impl HyperFile {
    pub fn to_hyper(self) -> Result<Hyper, IoError> {
        Hyper::new(self.alpha, self.eta, self.pi0).map_err(|e| IoError::Invalid {
            path: "<hyper>".into(),
            detail: e.to_string(),
        })
    }
}

/// Fitted-model output. The per-iteration log-likelihood trace lives in a CSV
/// sidecar named by [`trace_sidecar`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitFile {
    pub tree: TreeFile,
    pub theta_hat: Vec<Vec<f64>>,
    pub pi_hat: Vec<f64>,
    pub seed: u64,
    pub hyper: HyperFile,
    pub harmonic_mean_loglik: f64,
}

pub fn trace_sidecar(fit_path: &Path) -> PathBuf {
    let stem = fit_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "fit".into());
    fit_path.with_file_name(format!("{stem}_trace.csv"))
}

pub fn write_fit(fit: &FitFile, trace: &[f64], path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(fit).expect("fit serializes");
    write_file(path, &text)?;
    let mut csv = String::from("iteration,joint_loglik\n");
    for (i, v) in trace.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, format_float(*v)));
    }
    write_file(&trace_sidecar(path), &csv)
}

pub fn parse_fit(path: &Path) -> Result<FitFile, IoError> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path_str(path),
        detail: e.to_string(),
    })
}

/// 17 significant digits, enough to reproduce any f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A run manifest: configuration snapshot, seeds and SHA-256 checksums of
/// the files a run read and wrote.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// File name (relative to the manifest) to hex SHA-256.
    pub checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value) -> Self {
        RunManifest {
            version: ARTIFACT_VERSION.into(),
            config,
            seeds: BTreeMap::new(),
            checksums: BTreeMap::new(),
        }
    }

    pub fn record_seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.into(), seed);
    }

    /// Hashes `dir/name` and records it.
    pub fn record_file(&mut self, dir: &Path, name: &str) -> Result<(), IoError> {
        let digest = sha256_file(&dir.join(name))?;
        self.checksums.insert(name.into(), digest);
        Ok(())
    }

    /// Recomputes every checksum; any mismatch or unreadable file fails.
    pub fn verify(&self, dir: &Path) -> Result<(), IoError> {
        for (name, expected) in &self.checksums {
            let actual = sha256_file(&dir.join(name))?;
            if &actual != expected {
                return Err(IoError::Checksum {
                    path: path_str(&dir.join(name)),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(&dir.join("manifest.json"), &text)
    }

    pub fn load(dir: &Path) -> Result<Self, IoError> {
        let path = dir.join("manifest.json");
        let text = read_file(&path)?;
        serde_json::from_str(&text).map_err(|e| IoError::Json {
            path: path_str(&path),
            detail: e.to_string(),
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::File {
        path: path_str(path),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Appends CSV rows to a file, creating it with the header when absent.
pub fn append_csv_rows(path: &Path, header: &str, rows: &[String]) -> Result<(), IoError> {
    let exists = path.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| IoError::File {
            path: path_str(path),
            source: e,
        })?;
    let mut out = String::new();
    if !exists {
        out.push_str(header);
        out.push('\n');
    }
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    file.write_all(out.as_bytes()).map_err(|e| IoError::File {
        path: path_str(path),
        source: e,
    })
}
