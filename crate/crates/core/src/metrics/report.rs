//! Per-language metric reports and their text tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{bleu, cider_d, tokenize, AttributionCounts, MetricError};
use crate::Language;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapScores {
    pub p1: f64,
    pub p4: f64,
    pub r1: f64,
    pub r4: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageScores {
    pub bleu1: f64,
    pub bleu4: f64,
    pub cider_d: f64,
    /// Absent when no embedder was configured.
    pub ref_siglip: Option<f64>,
    pub items: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution: Option<AttributionCounts>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub languages: BTreeMap<Language, LanguageScores>,
}

/// BLEU-1, BLEU-4 and CIDEr-D for one language's corpus of raw strings.
pub fn score_corpus(
    candidates: &[String],
    references: &[Vec<String>],
    language: Language,
) -> Result<LanguageScores, MetricError> {
    let tok = |s: &String| tokenize(s, language).tokens;
    let cands: Vec<Vec<String>> = candidates.iter().map(tok).collect();
    let refs: Vec<Vec<Vec<String>>> = references.iter().map(|rs| rs.iter().map(tok).collect()).collect();
    Ok(LanguageScores {
        bleu1: bleu(&cands, &refs, 1)?,
        bleu4: bleu(&cands, &refs, 4)?,
        cider_d: cider_d(&cands, &refs)?,
        ref_siglip: None,
        items: cands.len(),
        overlap: None,
        attribution: None,
    })
}

impl MetricReport {
    pub fn new(dataset: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            languages: BTreeMap::new(),
        }
    }

    /// Mean over the non-English rows, when there are at least two.
    fn average(&self) -> Option<LanguageScores> {
        let rows: Vec<&LanguageScores> = self
            .languages
            .iter()
            .filter(|(l, _)| **l != Language::English)
            .map(|(_, s)| s)
            .collect();
        if rows.len() < 2 {
            return None;
        }
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&LanguageScores) -> f64| rows.iter().map(|s| f(s)).sum::<f64>() / n;
        let siglip = rows
            .iter()
            .map(|s| s.ref_siglip)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        Some(LanguageScores {
            bleu1: mean(&|s| s.bleu1),
            bleu4: mean(&|s| s.bleu4),
            cider_d: mean(&|s| s.cider_d),
            ref_siglip: siglip,
            items: rows.iter().map(|s| s.items).sum(),
            overlap: None,
            attribution: None,
        })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

const SCORE_COLS: [&str; 4] = ["BLEU1", "BLEU4", "CIDEr", "SigLIP"];
const COL: usize = 7;

/// Languages as rows, one BLEU1/BLEU4/CIDEr/SigLIP column group per report.
pub fn render_score_table(reports: &[MetricReport]) -> String {
    let mut langs: Vec<Language> = reports.iter().flat_map(|r| r.languages.keys().copied()).collect();
    langs.sort();
    langs.dedup();
    let group = SCORE_COLS.len() * (COL + 1) - 1;

    let mut out = String::new();
    let _ = write!(out, "{:<6}", "");
    for r in reports {
        let _ = write!(out, " | {:^group$}", r.dataset);
    }
    out.push('\n');
    let _ = write!(out, "{:<6}", "Lang");
    for _ in reports {
        out.push_str(" |");
        for c in SCORE_COLS {
            let _ = write!(out, " {c:>COL$}");
        }
    }
    out.push('\n');
    out.push_str(&"-".repeat(6 + reports.len() * (group + 3)));
    out.push('\n');

    let row = |out: &mut String, label: &str, get: &dyn Fn(&MetricReport) -> Option<LanguageScores>| {
        let _ = write!(out, "{label:<6}");
        for r in reports {
            out.push_str(" |");
            match get(r) {
                Some(s) => {
                    for v in [s.bleu1, s.bleu4, s.cider_d] {
                        let _ = write!(out, " {v:>COL$.3}");
                    }
                    let _ = write!(out, " {:>COL$}", fmt_opt(s.ref_siglip));
                }
                None => {
                    for _ in SCORE_COLS {
                        let _ = write!(out, " {:>COL$}", "-");
                    }
                }
            }
        }
        out.push('\n');
    };
    for lang in &langs {
        row(&mut out, lang.code(), &|r| r.languages.get(lang).cloned());
    }
    if reports.iter().any(|r| r.average().is_some()) {
        row(&mut out, "AVG", &|r| r.average());
    }
    out
}

/// Prompt/reference overlap rows (percentages), one per dataset and language.
pub fn render_overlap_table(reports: &[MetricReport]) -> String {
    let width = reports.iter().map(|r| r.dataset.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$} {:<4} {:>8} {:>8} {:>8} {:>8}\n",
        "Dataset", "Lang", "P 1-gram", "P 4-gram", "R 1-gram", "R 4-gram"
    );
    for r in reports {
        for (lang, s) in &r.languages {
            if let Some(o) = s.overlap {
                let _ = writeln!(
                    out,
                    "{:<width$} {:<4} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                    r.dataset,
                    lang.code(),
                    o.p1 * 100.0,
                    o.p4 * 100.0,
                    o.r1 * 100.0,
                    o.r4 * 100.0
                );
            }
        }
    }
    out
}

/// Counts of unique generated 1-grams by validity and prompt presence.
pub fn render_attribution_table(reports: &[MetricReport]) -> String {
    let width = reports.iter().map(|r| r.dataset.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$} {:<4} {:>10} {:>10} {:>10} {:>10}\n",
        "Dataset", "Lang", "valid-in", "invalid-in", "valid-out", "invalid-out"
    );
    for r in reports {
        for (lang, s) in &r.languages {
            if let Some(a) = s.attribution {
                let _ = writeln!(
                    out,
                    "{:<width$} {:<4} {:>10} {:>10} {:>10} {:>10}",
                    r.dataset,
                    lang.code(),
                    a.valid_in,
                    a.invalid_in,
                    a.valid_out,
                    a.invalid_out
                );
            }
        }
    }
    out
}

/// All tables that have data, separated by blank lines.
pub fn render_report(reports: &[MetricReport]) -> String {
    let mut out = render_score_table(reports);
    let has = |f: &dyn Fn(&LanguageScores) -> bool| reports.iter().any(|r| r.languages.values().any(f));
    if has(&|s| s.overlap.is_some()) {
        out.push('\n');
        out.push_str(&render_overlap_table(reports));
    }
    if has(&|s| s.attribution.is_some()) {
        out.push('\n');
        out.push_str(&render_attribution_table(reports));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(b: f64, siglip: Option<f64>) -> LanguageScores {
        LanguageScores {
            bleu1: b,
            bleu4: b / 2.0,
            cider_d: b * 2.0,
            ref_siglip: siglip,
            items: 10,
            overlap: None,
            attribution: None,
        }
    }

    #[test]
    fn identity_corpus_scores_one() {
        let c = vec!["a plane is parked".to_string(), "two green trees".to_string()];
        let r: Vec<Vec<String>> = c.iter().map(|x| vec![x.clone()]).collect();
        let s = score_corpus(&c, &r, Language::English).unwrap();
        assert_eq!(s.bleu1, 1.0);
        assert_eq!(s.bleu4, 1.0);
        assert!(s.cider_d > 0.0);
    }

    #[test]
    fn table_layout() {
        let mut r = MetricReport::new("synthetic");
        r.languages.insert(Language::English, scores(0.6, Some(0.25)));
        r.languages.insert(Language::German, scores(0.4, Some(0.2)));
        r.languages.insert(Language::Portuguese, scores(0.5, None));
        let t = render_score_table(&[r.clone()]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].contains("synthetic"));
        assert!(lines[1].contains("BLEU1") && lines[1].contains("SigLIP"));
        assert!(lines[3].starts_with("en "));
        assert!(lines[3].contains("0.600") && lines[3].contains("0.250"));
        assert!(lines[4].starts_with("pt ") && lines[4].trim_end().ends_with('-'));
        let avg = lines.last().unwrap();
        assert!(avg.starts_with("AVG") && avg.contains("0.450"));
        // Every data line has the same width.
        assert!(lines[1..].iter().all(|l| l.len() == lines[1].len()));

        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"en\""));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn overlap_table_rows() {
        let mut r = MetricReport::new("ucm");
        let mut s = scores(0.5, None);
        s.overlap = Some(OverlapScores {
            p1: 0.5,
            p4: 0.25,
            r1: 2.0 / 3.0,
            r4: 0.0,
        });
        s.attribution = Some(AttributionCounts {
            valid_in: 3,
            invalid_in: 1,
            valid_out: 0,
            invalid_out: 2,
        });
        r.languages.insert(Language::English, s);
        let full = render_report(&[r]);
        assert!(full.contains("50.00") && full.contains("66.67"));
        assert!(full.contains("valid-in"));
    }
}
