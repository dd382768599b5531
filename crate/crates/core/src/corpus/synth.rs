//! Synthetic corpora with planted convergence structure.
//!
//! IPC subclasses are grouped into technology fields. Every code's semantic
//! vector is its field centroid plus noise, so codes within a field are close
//! and codes across fields are nearly orthogonal. Patents belong to one of two
//! planted groups:
//!
//! * `high`: several secondary codes, mostly drawn from other fields;
//! * `low`: at most two secondary codes from the main code's own field, some
//!   patents with none.
//!
//! The planted convergence of a patent is the index evaluated on these
//! ground-truth semantic vectors, and the quality fields are linear in it:
//! `first_claims = base + β·c + γ·controls + year effect + ε`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CorpusData, CorpusFormat, PatentRecord, MAX_TOPICS};
use crate::embed::{EmbeddingKind, EmbeddingTable};
use crate::index::{compose_all, solve_weights};
use crate::metrics::{breadth_normalized, breadth_raw, corpus_depths, BreadthInputs, MetricsConfig};

const SECTIONS: [char; 8] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patents: usize,
    pub n_fields: usize,
    pub codes_per_field: usize,
    pub dim: usize,
    /// Spread of code vectors around their field centroid.
    pub field_noise: f64,
    pub high_fraction: f64,
    /// Share of low-group patents without secondary codes.
    pub single_fraction: f64,
    /// Secondary-code count range of the high group.
    pub high_secondaries: (usize, usize),
    /// Probability that a high-group secondary stays in the main field.
    pub high_same_field: f64,
    pub year_min: i32,
    pub year_max: i32,
    pub topics_per_field: usize,
    pub n_applicants: usize,
    /// Coefficient of the planted convergence in `first_claims`.
    pub beta: f64,
    /// Coefficient of the planted convergence in `forward_citations`.
    pub beta_forward: f64,
    pub noise_sd: f64,
    pub year_effect: f64,
    pub gamma_pages: f64,
    pub gamma_claims: f64,
    pub gamma_bcite: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_patents: 2000,
            n_fields: 10,
            codes_per_field: 8,
            dim: 32,
            field_noise: 0.4,
            high_fraction: 0.5,
            single_fraction: 0.2,
            high_secondaries: (2, 6),
            high_same_field: 0.25,
            year_min: 2010,
            year_max: 2019,
            topics_per_field: 6,
            n_applicants: 60,
            beta: 0.5,
            beta_forward: 2.0,
            noise_sd: 1.0,
            year_effect: 0.1,
            gamma_pages: 0.01,
            gamma_claims: 0.02,
            gamma_bcite: 0.03,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("invalid synthetic corpus configuration: {0}")]
pub struct SynthError(pub String);

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError(m.to_string()));
        if self.n_patents < 1 {
            return bad("n_patents must be at least 1");
        }
        if self.n_fields < 2 || self.n_fields > 90 {
            return bad("n_fields must be between 2 and 90");
        }
        if self.codes_per_field < 3 || self.codes_per_field > 26 {
            return bad("codes_per_field must be between 3 and 26");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        let (lo, hi) = self.high_secondaries;
        if lo < 1 || hi < lo || hi > (self.n_fields - 1) + (self.codes_per_field - 1) {
            return bad("high_secondaries must be a nonempty range within the code inventory");
        }
        for (name, p) in [
            ("high_fraction", self.high_fraction),
            ("single_fraction", self.single_fraction),
            ("high_same_field", self.high_same_field),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.year_max < self.year_min || self.year_min < super::MIN_YEAR || self.year_max > super::MAX_YEAR {
            return bad("year range is invalid");
        }
        if !(self.noise_sd >= 0.0) || !self.field_noise.is_finite() || self.field_noise < 0.0 {
            return bad("noise parameters must be finite and non-negative");
        }
        if self.n_applicants < 1 || self.topics_per_field < 1 {
            return bad("n_applicants and topics_per_field must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    High,
    Low,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::High => "high",
            Group::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub patent_id: String,
    pub group: Group,
    pub planted_beta: f64,
    /// Planted convergence value; kept in memory, not written to the truth file.
    pub convergence: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: CorpusData,
    /// Semantic vectors of every IPC code and topic.
    pub embeddings: EmbeddingTable,
    pub truth: Vec<TruthRow>,
}

impl SyntheticCorpus {
    pub fn write_truth<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "patent_id\tgroup\tplanted_beta")?;
        for t in &self.truth {
            writeln!(out, "{}\t{}\t{}", t.patent_id, t.group, t.planted_beta)?;
        }
        Ok(())
    }

    /// Writes `corpus.<ext>`, `ipc_texts.tsv`, `embeddings.tsv` and `truth.tsv`.
    pub fn save(&self, dir: &Path, format: CorpusFormat) -> io::Result<()> {
        self.corpus.save(dir, format)?;
        self.embeddings.save(&dir.join("embeddings.tsv"))?;
        let mut buf = Vec::new();
        self.write_truth(&mut buf)?;
        std::fs::write(dir.join("truth.tsv"), buf)
    }
}

/// Parses a truth file into `(patent_id, group, planted_beta)` rows.
pub fn parse_truth(text: &str) -> Result<Vec<(String, Group, f64)>, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(format!("line {}: expected 3 fields", i + 1));
        }
        let group = match f[1] {
            "high" => Group::High,
            "low" => Group::Low,
            g => return Err(format!("line {}: unknown group '{g}'", i + 1)),
        };
        let beta = f[2].parse().map_err(|_| format!("line {}: invalid planted_beta", i + 1))?;
        rows.push((f[0].to_string(), group, beta));
    }
    Ok(rows)
}

fn code_name(field: usize, j: usize) -> String {
    format!("{}{:02}{}", SECTIONS[field % SECTIONS.len()], 10 + field, (b'A' + j as u8) as char)
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Deterministic for a fixed `(config, seed)`.
pub fn generate_synthetic_corpus(config: &SynthConfig, seed: u64) -> Result<SyntheticCorpus, SynthError> {
    config.validate()?;
    let c = config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let centroids: Vec<Vec<f64>> = (0..c.n_fields).map(|_| unit(gaussian(&mut rng, c.dim))).collect();
    let scale = c.field_noise / (c.dim as f64).sqrt();
    let mut embeddings = EmbeddingTable::new(c.dim, EmbeddingKind::Semantic);
    let mut ipc_texts = BTreeMap::new();
    for (f, centroid) in centroids.iter().enumerate() {
        for j in 0..c.codes_per_field {
            let noise = gaussian(&mut rng, c.dim);
            let v: Vec<f64> = centroid.iter().zip(&noise).map(|(a, e)| a + scale * e).collect();
            let code = code_name(f, j);
            ipc_texts.insert(code.clone(), format!("synthetic field {f} subclass {j}"));
            embeddings.insert(code, v).map_err(|e| SynthError(e.to_string()))?;
        }
        for t in 0..c.topics_per_field {
            let noise = gaussian(&mut rng, c.dim);
            let v: Vec<f64> = centroid.iter().zip(&noise).map(|(a, e)| a + 2.0 * scale * e).collect();
            embeddings.insert(format!("topic:field{f}-topic{t}"), v).map_err(|e| SynthError(e.to_string()))?;
        }
    }
    let applicant_field: Vec<usize> = (0..c.n_applicants).map(|a| a % c.n_fields).collect();

    let mut records = Vec::with_capacity(c.n_patents);
    let mut groups = Vec::with_capacity(c.n_patents);
    let width = c.n_patents.to_string().len().max(6);
    for i in 0..c.n_patents {
        let group = if rng.random::<f64>() < c.high_fraction { Group::High } else { Group::Low };
        let field = rng.random_range(0..c.n_fields);
        let main_j = rng.random_range(0..c.codes_per_field);
        let mut used: BTreeSet<(usize, usize)> = BTreeSet::from([(field, main_j)]);
        let mut secondary = Vec::new();
        let pick_in = |f: usize, rng: &mut ChaCha8Rng, used: &mut BTreeSet<(usize, usize)>| {
            let free: Vec<usize> = (0..c.codes_per_field).filter(|j| !used.contains(&(f, *j))).collect();
            if free.is_empty() {
                return None;
            }
            let j = free[rng.random_range(0..free.len())];
            used.insert((f, j));
            Some(code_name(f, j))
        };
        match group {
            Group::High => {
                let n = rng.random_range(c.high_secondaries.0..=c.high_secondaries.1);
                let mut other_fields: Vec<usize> = (0..c.n_fields).filter(|&f| f != field).collect();
                for _ in 0..n {
                    let same = rng.random::<f64>() < c.high_same_field || other_fields.is_empty();
                    let code = if same {
                        pick_in(field, &mut rng, &mut used)
                    } else {
                        let k = rng.random_range(0..other_fields.len());
                        let f = other_fields.swap_remove(k);
                        pick_in(f, &mut rng, &mut used)
                    };
                    secondary.extend(code);
                }
            }
            Group::Low => {
                let n = if rng.random::<f64>() < c.single_fraction { 0 } else { rng.random_range(1..=2) };
                for _ in 0..n {
                    secondary.extend(pick_in(field, &mut rng, &mut used));
                }
            }
        }

        let n_topics = rng.random_range(1..=3usize.min(MAX_TOPICS));
        let topic_ids = sample(&mut rng, c.topics_per_field, n_topics.min(c.topics_per_field));
        let topics: Vec<String> = topic_ids.iter().map(|t| format!("field{field}-topic{t}")).collect();
        let candidates: Vec<usize> = (0..c.n_applicants).filter(|&a| applicant_field[a] == field).collect();
        let applicant = if candidates.is_empty() {
            rng.random_range(0..c.n_applicants)
        } else {
            candidates[rng.random_range(0..candidates.len())]
        };
        let year = rng.random_range(c.year_min..=c.year_max);
        let pages = rng.random_range(5..=40u32);
        let claims = rng.random_range(1..=30u32);
        let backward = rng.random_range(0..=25u64);

        records.push(PatentRecord {
            patent_id: format!("SYN{:0width$}", i + 1, width = width),
            year,
            main_ipc: code_name(field, main_j),
            secondary_ipcs: secondary,
            applicants: vec![format!("applicant-{applicant:03}")],
            topics,
            first_claims: 0.0,
            forward_citations: 0,
            backward_citations: backward,
            pages,
            claims,
        });
        groups.push(group);
    }

    let mut corpus = CorpusData::new(records, ipc_texts).map_err(|e| SynthError(e.to_string()))?;
    let convergence = planted_convergence(&corpus, &embeddings)?;

    for (rec, &cv) in corpus.records.iter_mut().zip(&convergence) {
        let controls = c.gamma_pages * rec.pages as f64
            + c.gamma_claims * rec.claims as f64
            + c.gamma_bcite * rec.backward_citations as f64;
        let year = c.year_effect * (rec.year - c.year_min) as f64;
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        // bases keep both outcomes away from zero so no clamping is needed in practice
        let base = 5.0 * c.noise_sd.max(0.2);
        rec.first_claims = (base + c.beta * cv + controls + year + c.noise_sd * e1).max(0.0);
        let fc = 2.0 * base + c.beta_forward * cv + controls + year + c.noise_sd * e2;
        rec.forward_citations = fc.round().max(0.0) as u64;
    }

    let truth = corpus
        .records
        .iter()
        .zip(groups)
        .zip(convergence)
        .map(|((r, group), convergence)| TruthRow {
            patent_id: r.patent_id.clone(),
            group,
            planted_beta: c.beta,
            convergence,
        })
        .collect();
    Ok(SyntheticCorpus { corpus, embeddings, truth })
}

/// The index computed on the ground-truth semantic vectors.
fn planted_convergence(corpus: &CorpusData, semantic: &EmbeddingTable) -> Result<Vec<f64>, SynthError> {
    let cfg = MetricsConfig::default();
    let depths = corpus_depths(corpus, semantic, &cfg, None).map_err(|e| SynthError(e.to_string()))?;
    let raw: Vec<f64> = corpus
        .records
        .iter()
        .map(|r| breadth_raw(&BreadthInputs::new(r.patent_id.clone(), r.category_counts(cfg.ipc_level))))
        .collect();
    let (d1, d2): (Vec<f64>, Vec<f64>) = depths.into_iter().unzip();
    let cols = vec![d1, d2, breadth_normalized(&raw)];
    if corpus.len() < 2 {
        return Ok(vec![0.0; corpus.len()]);
    }
    let (_, w) = solve_weights(&cols).map_err(|e| SynthError(e.to_string()))?;
    Ok(compose_all(&cols, &w))
}
