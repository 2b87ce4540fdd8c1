//! CIDEr-D, following the COCO caption evaluation scorer.

use std::collections::{BTreeMap, HashSet};

use super::tokenize::ngrams;
use super::MetricError;

const MAX_N: usize = 4;
const SIGMA: f64 = 6.0;

type Grams<'a> = [BTreeMap<&'a [String], f64>; MAX_N];

fn term_counts(tokens: &[String]) -> Grams<'_> {
    let mut out: Grams<'_> = Default::default();
    for (n, slot) in out.iter_mut().enumerate() {
        for g in ngrams(tokens, n + 1) {
            *slot.entry(g).or_insert(0.0) += 1.0;
        }
    }
    out
}

struct Weighted<'a> {
    vec: Grams<'a>,
    norms: [f64; MAX_N],
    /// The reference scorer measures length as the bigram count.
    length: f64,
}

fn weigh<'a>(tokens: &'a [String], df: &BTreeMap<&[String], f64>, log_corpus: f64) -> Weighted<'a> {
    let mut vec = term_counts(tokens);
    let mut norms = [0.0; MAX_N];
    for (n, grams) in vec.iter_mut().enumerate() {
        for (g, tf) in grams.iter_mut() {
            let d = df.get(g).copied().unwrap_or(0.0).max(1.0).ln();
            *tf *= log_corpus - d;
            norms[n] += *tf * *tf;
        }
        norms[n] = norms[n].sqrt();
    }
    Weighted {
        vec,
        norms,
        length: tokens.len().saturating_sub(1) as f64,
    }
}

fn similarity(hyp: &Weighted<'_>, reference: &Weighted<'_>) -> [f64; MAX_N] {
    let delta = hyp.length - reference.length;
    let penalty = (-(delta * delta) / (2.0 * SIGMA * SIGMA)).exp();
    std::array::from_fn(|n| {
        let mut dot = 0.0;
        for (g, vh) in &hyp.vec[n] {
            if let Some(vr) = reference.vec[n].get(g) {
                dot += vh.min(*vr) * vr;
            }
        }
        if hyp.norms[n] != 0.0 && reference.norms[n] != 0.0 {
            dot /= hyp.norms[n] * reference.norms[n];
        }
        dot * penalty
    })
}

/// Per-item CIDEr-D scores. Document frequencies come from the reference
/// sets of the whole corpus, so a single-item corpus always scores 0.
pub fn cider_d_items(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<Vec<f64>, MetricError> {
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(MetricError::MissingReferences(i));
    }

    let mut df: BTreeMap<&[String], f64> = BTreeMap::new();
    for refs in references {
        let mut seen: HashSet<&[String]> = HashSet::new();
        for r in refs {
            for n in 1..=MAX_N {
                seen.extend(ngrams(r, n));
            }
        }
        for g in seen {
            *df.entry(g).or_insert(0.0) += 1.0;
        }
    }
    let log_corpus = (references.len() as f64).ln();

    Ok(candidates
        .iter()
        .zip(references)
        .map(|(cand, refs)| {
            let hyp = weigh(cand, &df, log_corpus);
            let mut acc = [0.0; MAX_N];
            for r in refs {
                let sims = similarity(&hyp, &weigh(r, &df, log_corpus));
                for (a, s) in acc.iter_mut().zip(sims) {
                    *a += s;
                }
            }
            let mean_n = acc.iter().sum::<f64>() / MAX_N as f64;
            (mean_n / refs.len() as f64 * 10.0).max(0.0)
        })
        .collect())
}

/// Corpus CIDEr-D: the mean of the per-item scores.
pub fn cider_d(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64, MetricError> {
    let items = cider_d_items(candidates, references)?;
    Ok(items.iter().sum::<f64>() / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn single_item_corpus_scores_zero() {
        let c = vec![t("a plane is parked")];
        assert_eq!(cider_d(&c, &[vec![t("a plane is parked")]]).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_is_zero() {
        let c = vec![t("x y z"), t("a plane")];
        let r = vec![vec![t("a b c")], vec![t("green trees")]];
        assert_eq!(cider_d(&c, &r).unwrap(), 0.0);
    }

    #[test]
    fn identity_beats_partial() {
        let r = vec![
            vec![t("a plane is parked here")],
            vec![t("many green trees near a river")],
        ];
        let same = cider_d(&[t("a plane is parked here"), t("many green trees near a river")], &r).unwrap();
        let partial = cider_d(&[t("a plane is here"), t("many trees near a road")], &r).unwrap();
        assert!(same > partial && partial > 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(cider_d(&[], &[]), Err(MetricError::EmptyCorpus)));
        assert!(matches!(
            cider_d(&[t("a")], &[vec![]]),
            Err(MetricError::MissingReferences(0))
        ));
    }
}
