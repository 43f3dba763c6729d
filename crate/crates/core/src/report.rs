//! Tab-separated trace and report output.

use std::fmt::Write as _;

use crate::kcd::KcdTrace;
use crate::metrics::ErrorValue;
use crate::rss::RssResult;

/// BLEU ×100 with two decimals.
pub fn bleu100(e: &ErrorValue) -> String {
    format!("{:.2}", e.bleu100())
}

/// Signed rendering of α: `+0.3`, `-0.7`, `+1.0`, and `0.0` for zero.
pub fn signed_alpha(alpha: f64) -> String {
    if alpha == 0.0 {
        "0.0".to_owned()
    } else if alpha.fract() == 0.0 {
        format!("{alpha:+.1}")
    } else {
        format!("{alpha:+}")
    }
}

/// One row per applied step: iter, dim, gamma, error, bleu, then the weights.
pub fn trace_tsv(trace: &KcdTrace, feature_names: &[String]) -> String {
    let mut out = String::from("iter\tdim\tgamma\terror\tbleu");
    for name in feature_names {
        let _ = write!(out, "\tw_{name}");
    }
    out.push('\n');
    for s in &trace.steps {
        let _ = write!(out, "{}\t{}\t{}\t{}\t{}", s.iter, s.dim, s.gamma, s.error.error, bleu100(&s.error));
        for w in &s.weights {
            let _ = write!(out, "\t{w}");
        }
        out.push('\n');
    }
    out
}

/// One row per grid point: alpha, closed and open BLEU, final weights.
pub fn rss_report_tsv(result: &RssResult, feature_names: &[String]) -> String {
    let mut out = String::from("alpha\tclosed_bleu\topen_bleu");
    for name in feature_names {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    for r in &result.records {
        let _ = write!(out, "{}\t{}\t{}", signed_alpha(r.alpha), bleu100(&r.closed), bleu100(&r.open));
        for w in &r.weights {
            let _ = write!(out, "\t{w}");
        }
        out.push('\n');
    }
    out
}

/// Baseline against the selected α, laid out with one column per system:
///
/// ```text
///              baseline   lm to d
/// alpha                   +0.3
/// open test    17.86      18.14
/// closed test  15.68      15.80
/// ```
pub fn rss_summary(result: &RssResult, movement: &str) -> String {
    let base = result.baseline();
    let best = result.selected();
    format!(
        "\tbaseline\t{movement}\nalpha\t\t{}\nopen test\t{}\t{}\nclosed test\t{}\t{}\n",
        signed_alpha(best.alpha),
        bleu100(&base.open),
        bleu100(&best.open),
        bleu100(&base.closed),
        bleu100(&best.closed),
    )
}
