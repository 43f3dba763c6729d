//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the envelope, sweep, or BLEU code it is used to check.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rssmert::corpus::{build_corpus, Hypothesis, NbestList, TuningCorpus};
use rssmert::envelope::ScoreLine;

/// Coalescing tolerance the oracle applies to merged boundaries.
pub const TOL: f64 = 1e-9;

/// Naive clipped-precision BLEU counts: ([matches; 4], [totals; 4], hyp_len, ref_len).
pub type NaiveStats = ([u64; 4], [u64; 4], u64, u64);

fn count(tokens: &[String], gram: &[String]) -> u64 {
    if gram.len() > tokens.len() {
        return 0;
    }
    tokens.windows(gram.len()).filter(|w| *w == gram).count() as u64
}

pub fn naive_stats(hyp: &[String], refs: &[Vec<String>]) -> NaiveStats {
    let mut matches = [0u64; 4];
    let mut totals = [0u64; 4];
    for n in 1..=4 {
        if hyp.len() < n {
            continue;
        }
        totals[n - 1] = (hyp.len() - n + 1) as u64;
        let mut seen: Vec<&[String]> = Vec::new();
        for g in hyp.windows(n) {
            if seen.contains(&g) {
                continue;
            }
            seen.push(g);
            let in_hyp = count(hyp, g);
            let in_ref = refs.iter().map(|r| count(r, g)).max().unwrap_or(0);
            matches[n - 1] += in_hyp.min(in_ref);
        }
    }
    // closest reference length, shorter on ties
    let mut best: Option<usize> = None;
    for r in refs {
        let l = r.len();
        best = Some(match best {
            None => l,
            Some(b) => {
                let (db, dl) = (b.abs_diff(hyp.len()), l.abs_diff(hyp.len()));
                if dl < db || (dl == db && l < b) {
                    l
                } else {
                    b
                }
            }
        });
    }
    (matches, totals, hyp.len() as u64, best.unwrap_or(0) as u64)
}

pub fn naive_sum(parts: &[NaiveStats]) -> NaiveStats {
    let mut acc: NaiveStats = ([0; 4], [0; 4], 0, 0);
    for p in parts {
        for n in 0..4 {
            acc.0[n] += p.0[n];
            acc.1[n] += p.1[n];
        }
        acc.2 += p.2;
        acc.3 += p.3;
    }
    acc
}

pub fn naive_bleu(s: &NaiveStats) -> f64 {
    let (m, t, h, r) = s;
    if *h == 0 || m.contains(&0) || t.contains(&0) {
        return 0.0;
    }
    let mut prod = 1.0f64;
    for n in 0..4 {
        prod *= m[n] as f64 / t[n] as f64;
    }
    let bp = if h > r { 1.0 } else { (1.0 - *r as f64 / *h as f64).exp() };
    bp * prod.powf(0.25)
}

/// Corpus BLEU of a selection, computed from scratch.
pub fn selection_bleu(corpus: &TuningCorpus, selection: &[usize]) -> f64 {
    let parts: Vec<NaiveStats> = corpus
        .entries()
        .iter()
        .zip(selection)
        .map(|(e, &k)| naive_stats(&e.hypotheses[k].tokens, &e.references))
        .collect();
    naive_bleu(&naive_sum(&parts))
}

/// Direct argmax over hypotheses at weights `w`, lowest index on ties.
pub fn direct_selection(corpus: &TuningCorpus, w: &[f64]) -> Vec<usize> {
    corpus
        .entries()
        .iter()
        .map(|e| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (k, h) in e.hypotheses.iter().enumerate() {
                let mut s = 0.0;
                for (a, b) in w.iter().zip(&h.features) {
                    s += a * b;
                }
                if s > best_score {
                    best = k;
                    best_score = s;
                }
            }
            best
        })
        .collect()
}

/// O(K²) envelope: every pairwise crossing is a candidate; the winner on each
/// gap is found by evaluating all lines at the gap's midpoint. Crossings that
/// chain within `TOL` count as one candidate (concurrent lines rarely cross
/// at bitwise the same γ), placed at the cluster's lower end.
pub fn pairwise_envelope(lines: &[ScoreLine]) -> (Vec<f64>, Vec<usize>) {
    let mut raw = Vec::new();
    for i in 0..lines.len() {
        for j in 0..lines.len() {
            let (p, q) = (lines[i], lines[j]);
            if p.slope < q.slope {
                raw.push((p.intercept - q.intercept) / (q.slope - p.slope));
            }
        }
    }
    let clusters = merge_boundaries(raw);
    let candidates: Vec<f64> = clusters.iter().map(|c| c.0).collect();
    let upper = |i: usize| clusters[i].1;

    let winner = |g: f64| {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, l) in lines.iter().enumerate() {
            let v = l.intercept + g * l.slope;
            if v > best_v || (v == best_v && l.hyp_index < lines[best].hyp_index) {
                best = k;
                best_v = v;
            }
        }
        lines[best].hyp_index
    };
    let probe = |i: usize| -> f64 {
        match (i, candidates.len()) {
            (_, 0) => 0.0,
            (0, _) => candidates[0] - 1.0,
            (i, n) if i == n => upper(n - 1) + 1.0,
            (i, _) => 0.5 * (upper(i - 1) + candidates[i]),
        }
    };

    let mut breakpoints = Vec::new();
    let mut segments = vec![winner(probe(0))];
    for i in 1..=candidates.len() {
        let w = winner(probe(i));
        if w != *segments.last().unwrap() {
            breakpoints.push(candidates[i - 1]);
            segments.push(w);
        }
    }
    (breakpoints, segments)
}

/// Merges raw breakpoints the way the sweep contract prescribes, returning
/// (lower, upper) of each coalesced group.
pub fn merge_boundaries(mut raw: Vec<f64>) -> Vec<(f64, f64)> {
    raw.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for g in raw {
        match groups.last_mut() {
            Some(last) if g - last.1 <= TOL => last.1 = g,
            _ => groups.push((g, g)),
        }
    }
    groups
}

/// Probe points inside each merged interval.
pub fn interval_probes(groups: &[(f64, f64)]) -> Vec<f64> {
    if groups.is_empty() {
        return vec![0.0];
    }
    let mut probes = vec![groups[0].0 - 1.0];
    for w in groups.windows(2) {
        probes.push(0.5 * (w[0].1 + w[1].0));
    }
    probes.push(groups.last().unwrap().1 + 1.0);
    probes
}

/// Random corpus with small integer features (lots of exact ties) and short
/// token sequences over a small vocabulary.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_s: usize, max_k: usize, max_m: usize) -> TuningCorpus {
    let s = rng.random_range(1..=max_s);
    let m = rng.random_range(1..=max_m);
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let word = |rng: &mut ChaCha8Rng| vocab[rng.random_range(0..vocab.len())].to_owned();
    let mut sentences = BTreeMap::new();
    let mut refs = BTreeMap::new();
    for id in 0..s {
        let k = rng.random_range(1..=max_k);
        let reference: Vec<String> = (0..rng.random_range(4..=9)).map(|_| word(rng)).collect();
        let hyps = (0..k)
            .map(|rank| {
                let len = rng.random_range(3..=reference.len());
                let tokens: Vec<String> = reference[..len]
                    .iter()
                    .map(|t| if rng.random_bool(0.6) { t.clone() } else { word(rng) })
                    .collect();
                Hypothesis {
                    sentence_id: id,
                    rank,
                    tokens,
                    features: (0..m).map(|_| rng.random_range(-4i32..=4) as f64).collect(),
                }
            })
            .collect();
        sentences.insert(id, hyps);
        refs.insert(id, vec![reference]);
    }
    let nbest = NbestList {
        feature_names: (0..m).map(|i| format!("f{i}")).collect(),
        sentences,
    };
    build_corpus(nbest, refs).expect("random corpus is valid")
}

pub fn random_vector(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All selections reachable on an `n × n` grid over `[lo, hi]²`, with their BLEU.
pub fn grid_selections(corpus: &TuningCorpus, lo: f64, hi: f64, n: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut found = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let y = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            let sel = direct_selection(corpus, &[x, y]);
            if let std::collections::btree_map::Entry::Vacant(slot) = found.entry(sel) {
                let b = selection_bleu(corpus, slot.key());
                slot.insert(b);
            }
        }
    }
    found
}

/// Parses `key = value` lines of a certified-values file.
pub fn certified(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

pub fn parse_selection(v: &str) -> Vec<usize> {
    v.split(',').map(|x| x.trim().parse().unwrap()).collect()
}

/// Oracle statistics of every hypothesis, `[sentence][hypothesis]`.
pub fn naive_table(corpus: &TuningCorpus) -> Vec<Vec<NaiveStats>> {
    corpus
        .entries()
        .iter()
        .map(|e| e.hypotheses.iter().map(|h| naive_stats(&h.tokens, &e.references)).collect())
        .collect()
}

pub fn table_sum(table: &[Vec<NaiveStats>], selection: &[usize]) -> NaiveStats {
    let parts: Vec<NaiveStats> = table.iter().zip(selection).map(|(t, &k)| t[k]).collect();
    naive_sum(&parts)
}

pub fn to_stats(n: &NaiveStats) -> rssmert::BleuStats {
    rssmert::BleuStats {
        matches: n.0,
        totals: n.1,
        hyp_len: n.2,
        ref_len: n.3,
    }
}
