//! Seeded synthetic tuning/test corpora with correlated features, and the
//! frozen adversarial fixture on which coordinate descent gets stuck.
//!
//! Generation model, per sentence:
//!
//! * reference 0 is a random sequence over the vocabulary `w0..w{V-1}`;
//!   further references replace each of its tokens with probability 0.2;
//! * every hypothesis draws a latent quality `q ~ U(0, 1)` and copies the
//!   first `round(q·L)` positions of a fixed per-sentence permutation of
//!   reference 0, filling the other positions with noise tokens `u*` that
//!   never occur in a reference (so clipped matches grow with `q`);
//! * feature `m` is `loading_m·z + sqrt(1 - loading_m²)·noise`, with `z` the
//!   standardized quality; a correlated pair `(i, j, ρ)` then overwrites
//!   feature `j` with `ρ·x_i + sqrt(1 - ρ²)·noise`.
//!
//! Randomness comes from ChaCha8 streams keyed by (seed, split, sentence), so
//! every sentence can be generated independently.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{build_corpus, parse_nbest, parse_references, synthetic_feature_names, Hypothesis, NbestList, Tokens, TuningCorpus};
use crate::error::{Error, Result};

/// Decimal places kept in generated feature values.
const FEATURE_DECIMALS: i32 = 6;
const REFERENCE_EDIT_RATE: f64 = 0.2;
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub sentences: usize,
    pub hyps_per_sentence: usize,
    pub features: usize,
    /// `(i, j, ρ)`: feature `j` is drawn with correlation ρ to feature `i`.
    pub correlated_pairs: Vec<(usize, usize, f64)>,
    pub vocab_size: usize,
    pub ref_count: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            sentences: 100,
            hyps_per_sentence: 20,
            features: 3,
            correlated_pairs: vec![(0, 1, 0.6)],
            vocab_size: 200,
            ref_count: 4,
            min_len: 8,
            max_len: 20,
            seed: 2011,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::SpecInvalid(msg));
        for (name, v) in [
            ("sentences", self.sentences),
            ("hyps_per_sentence", self.hyps_per_sentence),
            ("features", self.features),
            ("vocab_size", self.vocab_size),
            ("ref_count", self.ref_count),
            ("min_len", self.min_len),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if self.max_len < self.min_len {
            return invalid(format!("max_len {} is below min_len {}", self.max_len, self.min_len));
        }
        let mut targets = HashSet::new();
        for &(i, j, rho) in &self.correlated_pairs {
            if i >= self.features || j >= self.features || i == j {
                return invalid(format!("correlated pair ({i}, {j}) is not a pair of distinct features"));
            }
            if !(-1.0..=1.0).contains(&rho) {
                return invalid(format!("correlation {rho} outside [-1, 1]"));
            }
            if !targets.insert(j) {
                return invalid(format!("feature {j} is the target of more than one correlated pair"));
            }
        }
        Ok(())
    }

    /// `key = value` header describing this spec.
    pub fn header(&self) -> String {
        let pairs: Vec<String> = self
            .correlated_pairs
            .iter()
            .map(|(i, j, r)| format!("{i}:{j}:{r}"))
            .collect();
        let mut out = String::from("# synthetic corpus spec (ChaCha8 streams keyed by seed, split, sentence)\n");
        let _ = writeln!(out, "sentences = {}", self.sentences);
        let _ = writeln!(out, "hyps_per_sentence = {}", self.hyps_per_sentence);
        let _ = writeln!(out, "features = {}", self.features);
        let _ = writeln!(out, "correlated_pairs = {}", pairs.join(","));
        let _ = writeln!(out, "vocab_size = {}", self.vocab_size);
        let _ = writeln!(out, "ref_count = {}", self.ref_count);
        let _ = writeln!(out, "min_len = {}", self.min_len);
        let _ = writeln!(out, "max_len = {}", self.max_len);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }

    /// Spec from `key = value` settings using the header's keys; missing keys
    /// keep their defaults. The result is validated.
    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut spec = SynthSpec::default();
        for (key, value) in kv {
            let bad = || Error::SpecInvalid(format!("{key} = {value:?} is not a valid value"));
            let int = || value.parse::<usize>().map_err(|_| bad());
            match key.as_str() {
                "sentences" => spec.sentences = int()?,
                "hyps_per_sentence" => spec.hyps_per_sentence = int()?,
                "features" => spec.features = int()?,
                "correlated_pairs" => spec.correlated_pairs = parse_pairs(value)?,
                "vocab_size" => spec.vocab_size = int()?,
                "ref_count" => spec.ref_count = int()?,
                "min_len" => spec.min_len = int()?,
                "max_len" => spec.max_len = int()?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                _ => return Err(Error::SpecInvalid(format!("unknown setting {key:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses `i:j:rho` items separated by commas.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            let bad = || Error::SpecInvalid(format!("correlated pair {item:?} is not i:j:rho"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok((
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
                parts[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    Closed = 0,
    Open = 1,
}

/// Generated data for one sentence.
#[derive(Debug, Clone)]
struct SynthSentence {
    references: Vec<Tokens>,
    hypotheses: Vec<(Tokens, Vec<f64>)>,
    qualities: Vec<f64>,
}

/// Closed/open corpora plus the latent qualities of each hypothesis.
#[derive(Debug, Clone)]
pub struct SynthCorpora {
    pub closed: TuningCorpus,
    pub open: TuningCorpus,
    /// `closed_quality[s][k]` is the latent quality of closed hypothesis `k` of sentence `s`.
    pub closed_quality: Vec<Vec<f64>>,
}

fn sentence_rng(seed: u64, split: Split, sentence: usize, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((split as u64) << 62) | ((attempt as u64) << 40) | sentence as u64);
    rng
}

/// Loading of feature `m` on the latent quality.
fn quality_loading(m: usize) -> f64 {
    0.8 * (-0.7f64).powi(m as i32)
}

fn round_feature(x: f64) -> f64 {
    let scale = 10f64.powi(FEATURE_DECIMALS);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn generate_sentence(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> SynthSentence {
    let len = rng.random_range(spec.min_len..=spec.max_len);
    let base: Tokens = (0..len)
        .map(|_| format!("w{}", rng.random_range(0..spec.vocab_size)))
        .collect();
    let mut references = vec![base.clone()];
    for _ in 1..spec.ref_count {
        references.push(
            base.iter()
                .map(|t| {
                    if rng.random_bool(REFERENCE_EDIT_RATE) {
                        format!("w{}", rng.random_range(0..spec.vocab_size))
                    } else {
                        t.clone()
                    }
                })
                .collect(),
        );
    }

    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);

    let mut hypotheses = Vec::with_capacity(spec.hyps_per_sentence);
    let mut qualities = Vec::with_capacity(spec.hyps_per_sentence);
    for _ in 0..spec.hyps_per_sentence {
        let q: f64 = rng.random();
        let copied = (q * len as f64).round() as usize;
        let mut keep = vec![false; len];
        for &p in &order[..copied] {
            keep[p] = true;
        }
        let tokens: Tokens = base
            .iter()
            .zip(&keep)
            .map(|(t, &k)| {
                if k {
                    t.clone()
                } else {
                    format!("u{}", rng.random_range(0..spec.vocab_size))
                }
            })
            .collect();

        // U(0, 1) has variance 1/12
        let z = (q - 0.5) * 12f64.sqrt();
        let mut x: Vec<f64> = (0..spec.features)
            .map(|m| {
                let l = quality_loading(m);
                let e: f64 = rng.sample(StandardNormal);
                l * z + (1.0 - l * l).sqrt() * e
            })
            .collect();
        for &(i, j, rho) in &spec.correlated_pairs {
            let e: f64 = rng.sample(StandardNormal);
            x[j] = rho * x[i] + (1.0 - rho * rho).sqrt() * e;
        }
        hypotheses.push((tokens, x.into_iter().map(round_feature).collect()));
        qualities.push(q);
    }

    SynthSentence {
        references,
        hypotheses,
        qualities,
    }
}

fn generate_split(spec: &SynthSpec, split: Split, avoid: &HashSet<Tokens>) -> Result<Vec<SynthSentence>> {
    (0..spec.sentences)
        .map(|s| {
            for attempt in 0..MAX_RESAMPLES {
                let sentence = generate_sentence(spec, &mut sentence_rng(spec.seed, split, s, attempt));
                if sentence.references.iter().all(|r| !avoid.contains(r)) {
                    return Ok(sentence);
                }
            }
            Err(Error::SpecInvalid(format!(
                "could not draw a test sentence distinct from the tuning set after {MAX_RESAMPLES} tries; \
                 increase vocab_size or sentence length"
            )))
        })
        .collect()
}

fn to_corpus(spec: &SynthSpec, sentences: &[SynthSentence]) -> Result<TuningCorpus> {
    let mut nbest = NbestList {
        feature_names: synthetic_feature_names(spec.features),
        sentences: BTreeMap::new(),
    };
    let mut refs = BTreeMap::new();
    for (s, sentence) in sentences.iter().enumerate() {
        let hyps = sentence
            .hypotheses
            .iter()
            .enumerate()
            .map(|(k, (tokens, features))| Hypothesis {
                sentence_id: s,
                rank: k,
                tokens: tokens.clone(),
                features: features.clone(),
            })
            .collect();
        nbest.sentences.insert(s, hyps);
        refs.insert(s, sentence.references.clone());
    }
    build_corpus(nbest, refs)
}

/// Deterministic closed (tuning) and open (test) corpora for `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpora> {
    spec.validate()?;
    let closed = generate_split(spec, Split::Closed, &HashSet::new())?;
    let seen: HashSet<Tokens> = closed.iter().flat_map(|s| s.references.iter().cloned()).collect();
    let open = generate_split(spec, Split::Open, &seen)?;
    Ok(SynthCorpora {
        closed: to_corpus(spec, &closed)?,
        open: to_corpus(spec, &open)?,
        closed_quality: closed.into_iter().map(|s| s.qualities).collect(),
    })
}

/// Reference file contents, one string per reference index.
pub fn reference_files(corpus: &TuningCorpus) -> Vec<String> {
    let n = corpus.entries().iter().map(|e| e.references.len()).max().unwrap_or(0);
    (0..n)
        .map(|j| {
            let mut out = String::new();
            for e in corpus.entries() {
                if let Some(r) = e.references.get(j) {
                    out.push_str(&r.join(" "));
                }
                out.push('\n');
            }
            out
        })
        .collect()
}

/// Sample Pearson correlation of features `i` and `j` over all hypotheses.
pub fn feature_correlation(corpus: &TuningCorpus, i: usize, j: usize) -> f64 {
    let pairs: Vec<(f64, f64)> = corpus
        .entries()
        .iter()
        .flat_map(|e| e.hypotheses.iter().map(|h| (h.features[i], h.features[j])))
        .collect();
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Files of the frozen adversarial fixture.
pub mod adversarial {
    pub const NBEST: &str = include_str!("../fixtures/adversarial_v1/nbest.txt");
    pub const REFERENCES: &str = include_str!("../fixtures/adversarial_v1/ref0.txt");
    pub const INIT_WEIGHTS: &str = include_str!("../fixtures/adversarial_v1/init.txt");
    pub const CERTIFIED: &str = include_str!("../fixtures/adversarial_v1/certified.txt");
}

/// Oracle-certified values shipped with the adversarial fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedValues {
    /// BLEU (×100) plain coordinate descent converges to from the designated start.
    pub kcd_bleu100: f64,
    /// Best BLEU (×100) reachable by any weight vector.
    pub global_best_bleu100: f64,
}

/// The frozen two-feature corpus on which coordinate descent from
/// [`adversarial_init`] stops short of the global optimum.
pub fn adversarial_instance() -> TuningCorpus {
    let nbest = parse_nbest(adversarial::NBEST).expect("adversarial fixture N-best parses");
    let refs = parse_references(&[adversarial::REFERENCES]).expect("adversarial fixture references parse");
    build_corpus(nbest, refs).expect("adversarial fixture is a valid corpus")
}

pub fn adversarial_init() -> Vec<f64> {
    crate::config::parse_weights(adversarial::INIT_WEIGHTS).expect("adversarial fixture weights parse")
}

pub fn adversarial_certified() -> CertifiedValues {
    let kv = crate::config::parse_key_values(adversarial::CERTIFIED).expect("certified values parse");
    let get = |k: &str| -> f64 {
        kv.get(k)
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| panic!("certified value {k} missing"))
    };
    CertifiedValues {
        kcd_bleu100: get("kcd_bleu"),
        global_best_bleu100: get("global_best_bleu"),
    }
}
