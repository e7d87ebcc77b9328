// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation of steered generation: target-language accuracy, BLEU over
//! the successful samples, and their product.

mod bleu;
mod langid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bleu::{bleu, BleuStats, MAX_ORDER};
pub use langid::{classify, train_langid, LangIdModel};

/// Classifier score a sample must exceed to count as the target language.
pub const SUCCESS_THRESHOLD: f64 = 0.5;

/// How text is split into BLEU tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerPolicy {
    /// Split on whitespace.
    #[default]
    Whitespace,
    /// Every non-whitespace character is a token (zh, ja).
    Character,
}

impl std::str::FromStr for TokenizerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(Self::Whitespace),
            "character" | "char" => Ok(Self::Character),
            other => Err(Error::config(format!("unknown tokenizer policy {other:?}"))),
        }
    }
}

impl TokenizerPolicy {
    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            Self::Whitespace => text.split_whitespace().map(str::to_string).collect(),
            Self::Character => text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Fraction of samples generated in the target language.
    pub acc: f64,
    /// BLEU over the successful samples only.
    pub bleu: f64,
    pub acc_bleu: f64,
    pub n_samples: usize,
    pub n_success: usize,
}

impl EvalResult {
    /// True when no sample reached the target language, in which case BLEU
    /// is reported as zero.
    pub fn no_success(&self) -> bool {
        self.n_success == 0
    }

    /// Arithmetic mean of several results. Sample counts are summed.
    pub fn mean(results: &[EvalResult]) -> Option<EvalResult> {
        if results.is_empty() {
            return None;
        }
        let n = results.len() as f64;
        Some(EvalResult {
            acc: results.iter().map(|r| r.acc).sum::<f64>() / n,
            bleu: results.iter().map(|r| r.bleu).sum::<f64>() / n,
            acc_bleu: results.iter().map(|r| r.acc_bleu).sum::<f64>() / n,
            n_samples: results.iter().map(|r| r.n_samples).sum(),
            n_success: results.iter().map(|r| r.n_success).sum(),
        })
    }

    /// Mean weighted by `n_samples`; equal to [`EvalResult::mean`] when every
    /// result has the same number of samples.
    pub fn weighted_mean(results: &[EvalResult]) -> Option<EvalResult> {
        let total: usize = results.iter().map(|r| r.n_samples).sum();
        if results.is_empty() || total == 0 {
            return None;
        }
        if results.iter().all(|r| r.n_samples == results[0].n_samples) {
            return Self::mean(results);
        }
        let w =
            |f: fn(&EvalResult) -> f64| results.iter().map(|r| f(r) * r.n_samples as f64).sum::<f64>() / total as f64;
        Some(EvalResult {
            acc: w(|r| r.acc),
            bleu: w(|r| r.bleu),
            acc_bleu: w(|r| r.acc_bleu),
            n_samples: total,
            n_success: results.iter().map(|r| r.n_success).sum(),
        })
    }
}

/// Whether a classified sample counts as the target language.
pub fn is_success(predicted: &str, score: f64, target_lang: &str) -> bool {
    predicted == target_lang && score > SUCCESS_THRESHOLD
}

/// Score steered generations against reference translations.
pub fn evaluate_control<O: AsRef<str>, R: AsRef<str>>(
    outputs: &[O],
    references: &[R],
    target_lang: &str,
    langid: &LangIdModel,
    tokenizer: TokenizerPolicy,
) -> Result<EvalResult> {
    if outputs.is_empty() {
        return Err(Error::Input("no generations to evaluate".into()));
    }
    if outputs.len() != references.len() {
        return Err(Error::Input(format!(
            "{} generations but {} references",
            outputs.len(),
            references.len()
        )));
    }
    if !langid.languages().iter().any(|l| l == target_lang) {
        return Err(Error::config(format!(
            "the language classifier does not know {target_lang:?}"
        )));
    }
    let mut stats = BleuStats::default();
    let mut n_success = 0;
    for (out, reference) in outputs.iter().zip(references) {
        let out = out.as_ref();
        let hit = match langid.classify(out) {
            Ok((lang, score)) => is_success(lang, score, target_lang),
            Err(Error::Input(_)) => false,
            Err(e) => return Err(e),
        };
        if hit {
            n_success += 1;
            stats.add(&tokenizer.tokenize(out), &tokenizer.tokenize(reference.as_ref()));
        }
    }
    let n_samples = outputs.len();
    let acc = n_success as f64 / n_samples as f64;
    let bleu = if n_success == 0 { 0.0 } else { stats.score() };
    Ok(EvalResult {
        acc,
        bleu,
        acc_bleu: acc * bleu,
        n_samples,
        n_success,
    })
}

/// CSV header matching [`csv_row`].
pub const EVAL_CSV_HEADER: &str = "lang,layer,alpha,acc,bleu,acc_bleu,n_samples,seed";

pub fn csv_row(lang: &str, layer: usize, alpha: f64, result: &EvalResult, seed: u64) -> String {
    format!(
        "{lang},{layer},{alpha},{},{},{},{},{seed}",
        result.acc, result.bleu, result.acc_bleu, result.n_samples
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LangIdModel {
        train_langid(&[
            ("toyA".to_string(), vec!["bada kitu", "mupa tuka dimi"]),
            ("toyB".to_string(), vec!["fesy horo", "lewe zyvo safe"]),
        ])
        .unwrap()
    }

    #[test]
    fn all_exact_in_target() {
        let refs = ["fesy horo", "zyvo safe lewe"];
        let r = evaluate_control(&refs, &refs, "toyB", &model(), TokenizerPolicy::Whitespace).unwrap();
        assert_eq!(r.acc, 1.0);
        assert_eq!(r.bleu, 100.0);
        assert_eq!(r.acc_bleu, 100.0);
        assert_eq!((r.n_samples, r.n_success), (2, 2));
    }

    #[test]
    fn bleu_only_over_successes() {
        let outs = ["fesy horo", "bada kitu", ""];
        let refs = ["fesy horo", "zyvo safe", "lewe"];
        let r = evaluate_control(&outs, &refs, "toyB", &model(), TokenizerPolicy::Whitespace).unwrap();
        assert_eq!(r.n_success, 1);
        assert!((r.acc - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.bleu, 100.0);
        assert!((r.acc_bleu - r.acc * r.bleu).abs() < 1e-12);
    }

    #[test]
    fn zero_success_flagged() {
        let r = evaluate_control(&["bada"], &["fesy"], "toyB", &model(), TokenizerPolicy::Whitespace).unwrap();
        assert!(r.no_success());
        assert_eq!((r.acc, r.bleu, r.acc_bleu), (0.0, 0.0, 0.0));
    }

    #[test]
    fn threshold_semantics() {
        assert!(is_success("fr", 0.51, "fr"));
        assert!(!is_success("fr", 0.5, "fr"));
        assert!(!is_success("es", 0.99, "fr"));
    }

    #[test]
    fn evaluation_errors() {
        let m = model();
        assert!(evaluate_control::<&str, &str>(&[], &[], "toyB", &m, TokenizerPolicy::Whitespace).is_err());
        assert!(evaluate_control(&["a"], &["a", "b"], "toyB", &m, TokenizerPolicy::Whitespace).is_err());
        assert!(matches!(
            evaluate_control(&["a"], &["a"], "fr", &m, TokenizerPolicy::Whitespace),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn character_tokens() {
        assert_eq!(TokenizerPolicy::Character.tokenize("猫が 寝"), vec!["猫", "が", "寝"]);
        assert_eq!(TokenizerPolicy::Whitespace.tokenize(" a  b "), vec!["a", "b"]);
    }

    #[test]
    fn weighted_mean_reduces_to_plain_mean() {
        let r = |acc: f64, n: usize| EvalResult {
            acc,
            bleu: 10.0 * acc,
            acc_bleu: 10.0 * acc * acc,
            n_samples: n,
            n_success: 0,
        };
        let equal = [r(1.0, 4), r(0.0, 4)];
        assert_eq!(EvalResult::weighted_mean(&equal), EvalResult::mean(&equal));
        let skewed = EvalResult::weighted_mean(&[r(1.0, 3), r(0.0, 1)]).unwrap();
        assert_eq!(skewed.acc, 0.75);
        assert_eq!(skewed.n_samples, 4);
        assert!(EvalResult::weighted_mean(&[]).is_none());
    }

    #[test]
    fn csv_format() {
        let r = EvalResult {
            acc: 1.0,
            bleu: 100.0,
            acc_bleu: 100.0,
            n_samples: 4,
            n_success: 4,
        };
        assert_eq!(csv_row("toyB", 6, 0.4, &r, 1), "toyB,6,0.4,1,100,100,4,1");
    }
}
