//! Versioned binary checkpoints with a JSON sidecar.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic "TRCK" | version u32
//! classes u64 | features u64 | weights f64 x classes*features | bias f64 x classes
//! vocab: count u64 | (len u32, utf8, doc_freq u64) x count
//!        n_docs u64 | min_frequency u64 | mode u8 | max_tokens u64 | built_from str
//! candidates: count u64 | str x count
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use triage_core::learn::{FeatureMode, Featurizer, LearnedAssigner, LinearModel, Objective, TrainingConfig, Vocabulary};
use triage_core::{CandidateSet, DeveloperId};

use crate::error::{BenchError, Result};

const MAGIC: &[u8; 4] = b"TRCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub name: String,
    pub project: String,
    pub objective: Objective,
    pub epoch: usize,
    pub config: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub sidecar: Sidecar,
    pub model: LinearModel,
    pub featurizer: Featurizer,
    pub candidates: CandidateSet,
}

impl Checkpoint {
    pub fn assigner(&self) -> LearnedAssigner {
        LearnedAssigner {
            name: self.sidecar.name.clone(),
            model: self.model.clone(),
            featurizer: self.featurizer.clone(),
        }
    }
}

/// Path of the JSON sidecar next to a binary checkpoint.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode(model: &LinearModel, featurizer: &Featurizer, candidates: &CandidateSet) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u64(&mut buf, model.classes() as u64);
    put_u64(&mut buf, model.features() as u64);
    for &w in model.params() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    let vocab = &featurizer.vocab;
    put_u64(&mut buf, vocab.len() as u64);
    for (token, &df) in vocab.tokens().zip(vocab.doc_freq()) {
        put_str(&mut buf, token);
        put_u64(&mut buf, df as u64);
    }
    put_u64(&mut buf, vocab.n_docs() as u64);
    put_u64(&mut buf, vocab.min_frequency() as u64);
    buf.push(match featurizer.mode {
        FeatureMode::Count => 0,
        FeatureMode::Tfidf => 1,
    });
    put_u64(&mut buf, featurizer.max_tokens as u64);
    put_str(&mut buf, vocab.built_from());
    put_u64(&mut buf, candidates.len() as u64);
    for id in candidates.members() {
        put_str(&mut buf, id.raw());
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> std::result::Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|e| e.to_string())
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| e.to_string())
    }
}

/// Inverse of [`encode`].
pub fn decode(project: &str, bytes: &[u8]) -> std::result::Result<(LinearModel, Featurizer, CandidateSet), String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a checkpoint file".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let classes = r.usize()?;
    let features = r.usize()?;
    let n_weights = classes.checked_mul(features).ok_or("dimension overflow")?;
    if n_weights.saturating_add(classes).saturating_mul(8) > bytes.len() {
        return Err("dimensions exceed file size".into());
    }
    let weights = (0..n_weights).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    let bias = (0..classes).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    let n_tokens = r.usize()?;
    let mut tokens = Vec::new();
    let mut doc_freq = Vec::new();
    for _ in 0..n_tokens {
        tokens.push(r.string()?);
        doc_freq.push(r.usize()?);
    }
    let n_docs = r.usize()?;
    let min_frequency = r.usize()?;
    let mode = match r.u8()? {
        0 => FeatureMode::Count,
        1 => FeatureMode::Tfidf,
        other => return Err(format!("unknown feature mode {other}")),
    };
    let max_tokens = r.usize()?;
    let built_from = r.string()?;
    let n_candidates = r.usize()?;
    let mut ids = Vec::new();
    for _ in 0..n_candidates {
        ids.push(DeveloperId::normalize(&r.string()?).map_err(|e| e.to_string())?);
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    let model = LinearModel::from_parts(classes, features, weights, bias).map_err(|e| e.to_string())?;
    let vocab = Vocabulary::from_parts(tokens, doc_freq, n_docs, min_frequency, built_from).map_err(|e| e.to_string())?;
    let candidates = CandidateSet::from_identifiers(project, &ids).map_err(|e| e.to_string())?;
    if candidates.len() != classes || vocab.len() != features {
        return Err("checkpoint dimensions disagree with its vocabulary or candidates".into());
    }
    Ok((model, Featurizer { vocab, mode, max_tokens }, candidates))
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = encode(&checkpoint.model, &checkpoint.featurizer, &checkpoint.candidates);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| BenchError::io(path, e))?;
    super::write_json(&sidecar_path(path), &checkpoint.sidecar)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let sidecar: Sidecar = super::read_json(&sidecar_path(path))?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(BenchError::format(path, format!("unsupported sidecar version {}", sidecar.format_version)));
    }
    let bytes = fs::read(path).map_err(|e| BenchError::io(path, e))?;
    let (model, featurizer, candidates) = decode(&sidecar.project, &bytes).map_err(|m| BenchError::format(path, m))?;
    Ok(Checkpoint {
        sidecar,
        model,
        featurizer,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use triage_core::learn::train;
    use triage_core::IssueReport;

    fn sample() -> Checkpoint {
        let reports: Vec<IssueReport> = (0..12)
            .map(|i| IssueReport {
                id: i.to_string(),
                created_at: i,
                title: "t".into(),
                description: if i % 2 == 0 { "alpha beta" } else { "gamma delta" }.into(),
                assignee: DeveloperId::normalize(if i % 2 == 0 { "A@x" } else { "b@x" }).unwrap(),
                interactions: None,
            })
            .collect();
        let refs: Vec<&IssueReport> = reports.iter().collect();
        let ids: Vec<DeveloperId> = reports.iter().map(|r| r.assignee.clone()).collect();
        let candidates = CandidateSet::from_identifiers("p", &ids).unwrap();
        let config = TrainingConfig {
            learning_rate: 0.1,
            feature_mode: FeatureMode::Tfidf,
            ..TrainingConfig::default()
        };
        let out = train(&refs, &[], &candidates, &config, Objective::Softmax, |_, _, _| {}).unwrap();
        Checkpoint {
            sidecar: Sidecar {
                format_version: FORMAT_VERSION,
                name: "sft".into(),
                project: "p".into(),
                objective: Objective::Softmax,
                epoch: 3,
                config,
            },
            model: out.model,
            featurizer: out.featurizer,
            candidates,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt/epoch-3.bin");
        let ck = sample();
        write_checkpoint(&path, &ck).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.candidates.member(0).unwrap().raw(), "A@x");
    }

    #[test]
    fn rejects_corruption() {
        let ck = sample();
        let bytes = encode(&ck.model, &ck.featurizer, &ck.candidates);
        assert!(decode("p", &bytes).is_ok());
        assert!(decode("p", &bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode("p", &bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode("p", &bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode("p", &long).is_err());
    }
}
