//! N-best lists, reference sets and the validated tuning corpus.
//!
//! The N-best format is the one Moses writes:
//!
//! ```text
//! 0 ||| the cat sat ||| lm: -12.5 d: -2 w: -3 ||| -17.5
//! ```
//!
//! Feature values may be preceded by `name:` labels; a label names every value
//! that follows it until the next label. The trailing total score is ignored.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

const DELIMITER: &str = "|||";

pub type Tokens = Vec<String>;

/// One candidate translation of a source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub sentence_id: usize,
    /// Position in the original N-best list of its sentence.
    pub rank: usize,
    pub tokens: Tokens,
    pub features: Vec<f64>,
}

impl Hypothesis {
    pub fn score(&self, weights: &[f64]) -> f64 {
        dot(weights, &self.features)
    }

    fn same_content(&self, other: &Hypothesis) -> bool {
        self.tokens == other.tokens
            && self.features.len() == other.features.len()
            && self
                .features
                .iter()
                .zip(&other.features)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEntry {
    pub sentence_id: usize,
    pub hypotheses: Vec<Hypothesis>,
    pub references: Vec<Tokens>,
}

/// Parsed N-best file: hypotheses grouped by sentence id, plus the feature labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NbestList {
    pub feature_names: Vec<String>,
    pub sentences: BTreeMap<usize, Vec<Hypothesis>>,
}

impl NbestList {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }
}

/// Aligned N-best lists and reference sets for sentences `0..S`.
///
/// Immutable once built; sentence ids equal their position in `entries`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningCorpus {
    entries: Vec<SentenceEntry>,
    feature_names: Vec<String>,
}

impl TuningCorpus {
    pub fn entries(&self) -> &[SentenceEntry] {
        &self.entries
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Feature dimensionality M.
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of a feature by label, or by its numeric position.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < self.dim()))
    }

    /// Splits the corpus back into its N-best list and reference map.
    pub fn to_parts(&self) -> (NbestList, BTreeMap<usize, Vec<Tokens>>) {
        let nbest = NbestList {
            feature_names: self.feature_names.clone(),
            sentences: self
                .entries
                .iter()
                .map(|e| (e.sentence_id, e.hypotheses.clone()))
                .collect(),
        };
        let refs = self
            .entries
            .iter()
            .map(|e| (e.sentence_id, e.references.clone()))
            .collect();
        (nbest, refs)
    }
}

pub fn synthetic_feature_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("f{i}")).collect()
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        line,
        reason: reason.into(),
    }
}

/// Parses a Moses-style N-best list. Line numbers in errors are 1-based.
pub fn parse_nbest(text: &str) -> Result<NbestList> {
    let mut list = NbestList::default();
    let mut dim: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(DELIMITER).map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(
                line_no,
                format!("expected 4 '|||'-separated fields, found {}", fields.len()),
            ));
        }
        let sentence_id: usize = fields[0]
            .parse()
            .map_err(|_| malformed(line_no, format!("bad sentence id {:?}", fields[0])))?;
        let tokens: Tokens = fields[1].split_whitespace().map(str::to_owned).collect();
        if tokens.is_empty() {
            return Err(malformed(line_no, "empty translation"));
        }

        let (features, names) = parse_feature_field(fields[2], line_no)?;
        match dim {
            None => {
                dim = Some(features.len());
                list.feature_names = names;
            }
            Some(expected) if expected != features.len() => {
                return Err(Error::InconsistentFeatureCount {
                    line: line_no,
                    expected,
                    found: features.len(),
                });
            }
            Some(_) => {}
        }

        let group = list.sentences.entry(sentence_id).or_default();
        let rank = group.len();
        group.push(Hypothesis {
            sentence_id,
            rank,
            tokens,
            features,
        });
    }
    Ok(list)
}

/// Returns the feature values of one line and a name for each of them.
fn parse_feature_field(field: &str, line: usize) -> Result<(Vec<f64>, Vec<String>)> {
    // (label, values carrying it)
    let mut groups: Vec<(Option<String>, usize)> = Vec::new();
    let mut values = Vec::new();
    for tok in field.split_whitespace() {
        if let Some(label) = tok.strip_suffix(':') {
            groups.push((Some(label.to_owned()), 0));
            continue;
        }
        let v: f64 = tok.parse().map_err(|_| Error::NonNumericFeature {
            line,
            token: tok.to_owned(),
        })?;
        if !v.is_finite() {
            return Err(Error::NonNumericFeature {
                line,
                token: tok.to_owned(),
            });
        }
        match groups.last_mut() {
            Some((_, n)) => *n += 1,
            None => groups.push((None, 1)),
        }
        values.push(v);
    }

    let mut names = Vec::with_capacity(values.len());
    for (label, n) in groups {
        match label {
            Some(label) if n == 1 => names.push(label),
            Some(label) => names.extend((0..n).map(|i| format!("{label}_{i}"))),
            None => names.extend((names.len()..names.len() + n).map(|i| format!("f{i}"))),
        }
    }
    Ok((values, names))
}

/// Serializes hypotheses back into the N-best wire format.
///
/// Labels are written when `labeled` is set; the total field carries the
/// model score under `weights`, or 0 when none are given.
pub fn write_nbest(list: &NbestList, labeled: bool, weights: Option<&[f64]>) -> String {
    let mut out = String::new();
    for hyps in list.sentences.values() {
        for h in hyps {
            let _ = write!(out, "{} {} {} {}", h.sentence_id, DELIMITER, h.tokens.join(" "), DELIMITER);
            for (name, v) in list.feature_names.iter().zip(&h.features) {
                if labeled {
                    let _ = write!(out, " {name}:");
                }
                let _ = write!(out, " {v}");
            }
            let total = weights.map_or(0.0, |w| h.score(w));
            let _ = writeln!(out, " {DELIMITER} {total}");
        }
    }
    out
}

/// Parses one or more reference streams; line `i` of stream `j` is reference
/// `j` of sentence `i`. Blank lines contribute no reference.
pub fn parse_references<S: AsRef<str>>(streams: &[S]) -> Result<BTreeMap<usize, Vec<Tokens>>> {
    let streams: Vec<Vec<&str>> = streams.iter().map(|s| s.as_ref().lines().collect()).collect();
    let Some(expected) = streams.first().map(Vec::len) else {
        return Ok(BTreeMap::new());
    };
    for (j, lines) in streams.iter().enumerate() {
        if lines.len() != expected {
            return Err(Error::LengthMismatch {
                stream: j,
                expected,
                found: lines.len(),
            });
        }
    }

    let mut refs = BTreeMap::new();
    for i in 0..expected {
        let sentence_refs: Vec<Tokens> = streams
            .iter()
            .map(|lines| lines[i].split_whitespace().map(str::to_owned).collect::<Tokens>())
            .filter(|t| !t.is_empty())
            .collect();
        if sentence_refs.is_empty() {
            return Err(Error::NoReferences { sentence: i });
        }
        refs.insert(i, sentence_refs);
    }
    Ok(refs)
}

/// Validates and joins N-best lists with references, dropping exact duplicate
/// hypotheses (same tokens and bitwise-identical features).
pub fn build_corpus(nbest: NbestList, mut refs: BTreeMap<usize, Vec<Tokens>>) -> Result<TuningCorpus> {
    if nbest.sentences.is_empty() && refs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let nbest_ids: Vec<usize> = nbest.sentences.keys().copied().collect();
    let ref_ids: Vec<usize> = refs.keys().copied().collect();
    if nbest_ids != ref_ids {
        return Err(Error::IdMismatch(format!(
            "N-best covers {} sentences {}, references cover {} sentences {}",
            nbest_ids.len(),
            id_summary(&nbest_ids),
            ref_ids.len(),
            id_summary(&ref_ids)
        )));
    }
    if let Some((pos, &id)) = nbest_ids.iter().enumerate().find(|(pos, &id)| *pos != id) {
        return Err(Error::IdMismatch(format!(
            "sentence ids must be dense from 0; position {pos} holds id {id}"
        )));
    }

    let m = nbest.dim();
    let mut entries = Vec::with_capacity(nbest_ids.len());
    for (id, hyps) in nbest.sentences {
        if hyps.is_empty() {
            return Err(Error::IdMismatch(format!("sentence {id} has no hypotheses")));
        }
        let mut kept: Vec<Hypothesis> = Vec::with_capacity(hyps.len());
        for h in hyps {
            if h.features.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: h.features.len(),
                });
            }
            if h.sentence_id != id {
                return Err(Error::IdMismatch(format!(
                    "hypothesis for sentence {} filed under {id}",
                    h.sentence_id
                )));
            }
            if !kept.iter().any(|k| k.same_content(&h)) {
                kept.push(h);
            }
        }
        let references = refs.remove(&id).unwrap_or_default();
        entries.push(SentenceEntry {
            sentence_id: id,
            hypotheses: kept,
            references,
        });
    }

    Ok(TuningCorpus {
        entries,
        feature_names: nbest.feature_names,
    })
}

fn id_summary(ids: &[usize]) -> String {
    match (ids.first(), ids.last()) {
        (Some(a), Some(b)) => format!("[{a}..={b}]"),
        _ => "[]".to_owned(),
    }
}

/// Checks that two corpora share the same feature dimensionality.
pub fn check_same_dim(a: &TuningCorpus, b: &TuningCorpus) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Distinct reference sequences of a corpus.
pub fn reference_set(corpus: &TuningCorpus) -> HashSet<&Tokens> {
    corpus.entries.iter().flat_map(|e| e.references.iter()).collect()
}
