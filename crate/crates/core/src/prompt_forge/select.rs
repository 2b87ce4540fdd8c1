//! Repetition-free choice of input captions and few-shot examples.
//!
//! Combinations of `k` retrieved captions are tried in descending order of
//! their summed scores (ties: lexicographic index order). For each, the
//! images are walked in rank order; an image yields an example when it has a
//! gold caption not yet used and at least `k` of its similar captions survive
//! the mask of everything already placed in the prompt. The first combination
//! producing `N` examples wins. If none does, `N` is lowered one step at a
//! time.

use std::collections::HashSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{normalize_text, PoolCaption, PromptError, ReRankedPool};

/// Upper bound on enumerated combinations (C(20, 10) is ~185k).
const MAX_COMBINATIONS: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedExample {
    pub image_id: String,
    pub captions: Vec<PoolCaption>,
    pub gold: PoolCaption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionWarning {
    /// No repetition-free prompt had the requested number of examples.
    ReducedExamples { requested: usize, achieved: usize },
    /// Fewer than `k` distinct texts among the retrieved captions; the top-`k`
    /// captions are used as they are.
    DuplicateInputCaptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub input_captions: Vec<PoolCaption>,
    pub examples: Vec<SelectedExample>,
    /// Indices into the pool's retrieved-caption list.
    pub combination: Vec<usize>,
    /// 0-based position of `combination` in the enumeration order.
    pub combination_rank: usize,
    pub warnings: Vec<SelectionWarning>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Combinations sorted by descending summed score; the sort is stable, so
/// equal sums stay in lexicographic order.
pub(crate) fn ranked_combinations(captions: &[PoolCaption], k: usize) -> Vec<Vec<usize>> {
    let mut combos: Vec<(f64, Vec<usize>)> = combinations(captions.len(), k)
        .into_iter()
        .map(|c| (c.iter().map(|&i| captions[i].score()).sum(), c))
        .collect();
    combos.sort_by(|a, b| b.0.total_cmp(&a.0));
    combos.into_iter().map(|(_, c)| c).collect()
}

/// Tries to complete `n_examples` examples around a fixed caption combination.
fn build_examples(pool: &ReRankedPool, combo: &[usize], n_examples: usize, k: usize) -> Option<Vec<SelectedExample>> {
    let retrieved = &pool.pool.retrieved_captions;
    let mut used: HashSet<String> = HashSet::new();
    for &i in combo {
        if !used.insert(normalize_text(&retrieved[i].text)) {
            return None;
        }
    }

    let mut examples = Vec::with_capacity(n_examples);
    for image in &pool.pool.similar_images {
        if examples.len() == n_examples {
            break;
        }
        let Some(gold) = image
            .gold_captions
            .iter()
            .find(|g| !used.contains(&normalize_text(&g.text)))
        else {
            continue;
        };
        let gold_key = normalize_text(&gold.text);

        let mut survivors: Vec<&PoolCaption> = Vec::with_capacity(k);
        let mut survivor_keys: HashSet<String> = HashSet::new();
        for c in &image.similar_captions {
            if survivors.len() == k {
                break;
            }
            let key = normalize_text(&c.text);
            if used.contains(&key) || key == gold_key || survivor_keys.contains(&key) {
                continue;
            }
            survivor_keys.insert(key);
            survivors.push(c);
        }
        if survivors.len() < k {
            continue;
        }
        used.insert(gold_key);
        used.extend(survivor_keys);
        examples.push(SelectedExample {
            image_id: image.image_id.clone(),
            captions: survivors.into_iter().cloned().collect(),
            gold: gold.clone(),
        });
    }
    (examples.len() == n_examples).then_some(examples)
}

/// Picks `k` input captions and `n_examples` few-shot examples from a ranked pool.
pub fn select_prompt_content(pool: &ReRankedPool, n_examples: usize, k: usize) -> Result<Selection, PromptError> {
    if k == 0 {
        return Err(PromptError::ZeroK);
    }
    let retrieved = &pool.pool.retrieved_captions;
    if k > retrieved.len() {
        return Err(PromptError::InsufficientCandidates {
            needed: k,
            available: retrieved.len(),
        });
    }
    let total = binomial(retrieved.len(), k);
    if total > MAX_COMBINATIONS {
        return Err(PromptError::TooManyCombinations(total));
    }
    let combos = ranked_combinations(retrieved, k);

    for target in (0..=n_examples).rev() {
        for (rank, combo) in combos.iter().enumerate() {
            let Some(examples) = build_examples(pool, combo, target, k) else {
                continue;
            };
            let mut warnings = Vec::new();
            if target < n_examples {
                warn!(
                    "query {}: no repetition-free prompt with {n_examples} examples, using {target}",
                    pool.pool.query_id
                );
                warnings.push(SelectionWarning::ReducedExamples {
                    requested: n_examples,
                    achieved: target,
                });
            }
            return Ok(Selection {
                input_captions: combo.iter().map(|&i| retrieved[i].clone()).collect(),
                examples,
                combination: combo.clone(),
                combination_rank: rank,
                warnings,
            });
        }
    }

    // Only reachable when every combination repeats a text.
    warn!(
        "query {}: fewer than {k} distinct retrieved captions, prompt will repeat text",
        pool.pool.query_id
    );
    let combo = combos[0].clone();
    let mut warnings = vec![SelectionWarning::DuplicateInputCaptions];
    if n_examples > 0 {
        warnings.insert(
            0,
            SelectionWarning::ReducedExamples {
                requested: n_examples,
                achieved: 0,
            },
        );
    }
    Ok(Selection {
        input_captions: combo.iter().map(|&i| retrieved[i].clone()).collect(),
        examples: Vec::new(),
        combination: combo,
        combination_rank: 0,
        warnings,
    })
}
