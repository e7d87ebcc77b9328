// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::store::LangCode;

/// One of the two toy languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToyLang {
    A,
    B,
}

impl ToyLang {
    pub const ALL: [ToyLang; 2] = [ToyLang::A, ToyLang::B];

    pub fn tag(self) -> &'static str {
        match self {
            Self::A => "toyA",
            Self::B => "toyB",
        }
    }

    pub fn code(self) -> LangCode {
        LangCode::new(self.tag()).expect("static tag is valid")
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "toyA" => Some(Self::A),
            "toyB" => Some(Self::B),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::A => Self::B,
            Self::B => Self::A,
        }
    }
}

const A_CONSONANTS: &[u8] = b"bdgkmnpt";
const A_VOWELS: &[u8] = b"aiu";
const B_CONSONANTS: &[u8] = b"fhlrsvwz";
const B_VOWELS: &[u8] = b"eoy";

fn syllable(consonants: &[u8], vowels: &[u8], i: usize) -> [u8; 2] {
    [consonants[i / vowels.len()], vowels[i % vowels.len()]]
}

/// Word `i` of a language: the base-24 digits of `i` (at least two) spelled
/// as consonant-vowel syllables drawn from the language's own letters.
fn spell(consonants: &[u8], vowels: &[u8], mut i: usize) -> String {
    let base = consonants.len() * vowels.len();
    let mut out = Vec::new();
    let mut digits = 0;
    while digits < 2 || i > 0 {
        out.extend_from_slice(&syllable(consonants, vowels, i % base));
        i /= base;
        digits += 1;
    }
    String::from_utf8(out).expect("ASCII letters")
}

/// Two disjoint toy vocabularies of `m` words each. Token `i < m` is the
/// toyA word for content `i`; token `m + i` is its toyB translation.
#[derive(Debug, Clone)]
pub struct ToyVocab {
    content_size: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl ToyVocab {
    pub fn new(content_size: usize) -> Self {
        let mut words = Vec::with_capacity(2 * content_size);
        for i in 0..content_size {
            words.push(spell(A_CONSONANTS, A_VOWELS, i));
        }
        for i in 0..content_size {
            words.push(spell(B_CONSONANTS, B_VOWELS, i));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self {
            content_size,
            words,
            index,
        }
    }

    /// Words per language.
    pub fn content_size(&self) -> usize {
        self.content_size
    }

    /// Total number of tokens.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn token(&self, lang: ToyLang, content: usize) -> u32 {
        debug_assert!(content < self.content_size);
        match lang {
            ToyLang::A => content as u32,
            ToyLang::B => (self.content_size + content) as u32,
        }
    }

    pub fn lang_of(&self, token: u32) -> Result<ToyLang> {
        let t = token as usize;
        if t < self.content_size {
            Ok(ToyLang::A)
        } else if t < 2 * self.content_size {
            Ok(ToyLang::B)
        } else {
            Err(Error::Vocabulary(format!("token {token} is outside the vocabulary")))
        }
    }

    pub fn content_of(&self, token: u32) -> Result<usize> {
        self.lang_of(token)?;
        Ok(token as usize % self.content_size)
    }

    pub fn word(&self, token: u32) -> Result<&str> {
        self.words
            .get(token as usize)
            .map(String::as_str)
            .ok_or_else(|| Error::Vocabulary(format!("token {token} is outside the vocabulary")))
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace()
            .map(|w| {
                self.index
                    .get(w)
                    .copied()
                    .ok_or_else(|| Error::Vocabulary(format!("unknown word {w:?}")))
            })
            .collect()
    }

    pub fn decode(&self, tokens: &[u32]) -> Result<String> {
        let words = tokens.iter().map(|&t| self.word(t)).collect::<Result<Vec<_>>>()?;
        Ok(words.join(" "))
    }

    /// Render content ids in one language.
    pub fn render(&self, lang: ToyLang, content: &[usize]) -> String {
        content
            .iter()
            .map(|&c| self.words[self.token(lang, c) as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn alphabets_are_disjoint() {
        let v = ToyVocab::new(700);
        let letters = |lang: ToyLang| -> HashSet<char> {
            (0..700)
                .flat_map(|i| v.word(v.token(lang, i)).unwrap().chars().collect::<Vec<_>>())
                .collect()
        };
        assert!(letters(ToyLang::A).is_disjoint(&letters(ToyLang::B)));
        let unique: HashSet<&String> = v.words.iter().collect();
        assert_eq!(unique.len(), 1400);
    }

    #[test]
    fn encode_decode() {
        let v = ToyVocab::new(64);
        let text = v.render(ToyLang::B, &[3, 0, 63]);
        let ids = v.encode(&text).unwrap();
        assert_eq!(ids, vec![67, 64, 127]);
        assert_eq!(v.decode(&ids).unwrap(), text);
        assert_eq!(v.content_of(127).unwrap(), 63);
        assert_eq!(v.lang_of(5).unwrap(), ToyLang::A);
        assert!(v.encode("nope").is_err());
        assert!(v.lang_of(128).is_err());
    }
}
