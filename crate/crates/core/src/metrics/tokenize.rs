//! Caption tokenization.
//!
//! Latin and Cyrillic scripts use the mteval-13a rules (case preserved):
//! symbols are padded with spaces, periods and commas split off unless they
//! sit between digits, and a dash after a digit is split. Chinese and Korean
//! are split per character; runs of other alphanumerics stay whole words.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::Language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedCaption {
    pub tokens: Vec<String>,
    pub language: Language,
}

struct Rules13a {
    symbols: Regex,
    period_comma_after_nondigit: Regex,
    period_comma_before_nondigit: Regex,
    dash_after_digit: Regex,
}

fn rules() -> &'static Rules13a {
    static RULES: OnceLock<Rules13a> = OnceLock::new();
    RULES.get_or_init(|| Rules13a {
        symbols: Regex::new(r"([{-~\[-` -&(-+:-@/])").unwrap(),
        period_comma_after_nondigit: Regex::new(r"([^0-9])([.,])").unwrap(),
        period_comma_before_nondigit: Regex::new(r"([.,])([^0-9])").unwrap(),
        dash_after_digit: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let r = rules();
    let line = format!(" {line} ");
    let line = r.symbols.replace_all(&line, " $1 ");
    let line = r.period_comma_after_nondigit.replace_all(&line, "$1 $2 ");
    let line = r.period_comma_before_nondigit.replace_all(&line, " $1 $2");
    let line = r.dash_after_digit.replace_all(&line, "$1 $2 ");
    line.split_whitespace().map(str::to_string).collect()
}

fn is_cjk_char(c: char) -> bool {
    matches!(c as u32,
        0x1100..=0x11FF     // Hangul Jamo
        | 0x2E80..=0x2FDF   // CJK radicals
        | 0x3000..=0x303F   // CJK symbols and punctuation
        | 0x3040..=0x30FF   // Hiragana, Katakana
        | 0x3130..=0x318F   // Hangul compatibility Jamo
        | 0x3400..=0x4DBF   // CJK extension A
        | 0x4E00..=0x9FFF   // CJK unified ideographs
        | 0xA960..=0xA97F
        | 0xAC00..=0xD7AF   // Hangul syllables
        | 0xF900..=0xFAFF
        | 0xFF00..=0xFFEF   // full-width forms
        | 0x20000..=0x2FA1F)
}

fn tokenize_cjk(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    let flush = |run: &mut String, tokens: &mut Vec<String>| {
        if !run.is_empty() {
            tokens.push(std::mem::take(run));
        }
    };
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut run, &mut tokens);
        } else if !is_cjk_char(c) && c.is_alphanumeric() {
            run.push(c);
        } else {
            flush(&mut run, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut run, &mut tokens);
    tokens
}

pub fn tokenize(text: &str, language: Language) -> TokenizedCaption {
    let tokens = if language.is_cjk() {
        tokenize_cjk(text)
    } else {
        tokenize_13a(text)
    };
    TokenizedCaption { tokens, language }
}

/// All contiguous `n`-grams of `tokens`, in order.
pub(crate) fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = &[String]> {
    let count = if n == 0 { 0 } else { tokens.len().saturating_sub(n - 1) };
    (0..count).map(move |i| &tokens[i..i + n])
}
