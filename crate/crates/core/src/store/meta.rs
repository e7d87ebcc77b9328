// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sentence metadata as one JSON object per line:
//!
//! ```text
//! {"id":0,"lang":"en","text":"The cat sleeps.","pair_id":0}
//! {"id":1,"lang":"ja","text":"猫が寝ている。","pair_id":0}
//! ```

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceMeta {
    #[serde(rename = "id")]
    pub sentence_id: u32,
    pub lang: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<u32>,
}

/// Parse metadata lines. Blank lines are skipped; order is preserved.
pub fn read_meta<R: BufRead>(mut source: R) -> Result<Vec<SentenceMeta>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut pair_langs: HashMap<u32, HashSet<String>> = HashMap::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if source.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("invalid UTF-8: {e}"),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let meta: SentenceMeta = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if meta.lang.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty language tag".into(),
            });
        }
        if !seen.insert(meta.sentence_id) {
            return Err(Error::Validation(format!(
                "duplicate sentence id {} on line {line_no}",
                meta.sentence_id
            )));
        }
        if let Some(pair) = meta.pair_id {
            if !pair_langs.entry(pair).or_default().insert(meta.lang.clone()) {
                return Err(Error::Validation(format!(
                    "pair {pair} has two sentences in language {:?} (line {line_no})",
                    meta.lang
                )));
            }
        }
        out.push(meta);
    }
    Ok(out)
}

pub fn write_meta<W: Write>(records: &[SentenceMeta], mut sink: W) -> Result<()> {
    for meta in records {
        let line = serde_json::to_string(meta).map_err(|e| Error::Validation(e.to_string()))?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines() {
        let src = "{\"id\":0,\"lang\":\"en\",\"text\":\"a b\"}\n{\"id\":1,\"lang\":\"en\",\"text\":\"c\"}\n";
        let metas = read_meta(src.as_bytes()).unwrap();
        assert_eq!(metas.len(), 2);
        assert_eq!(metas[1].sentence_id, 1);
        assert_eq!(metas[0].pair_id, None);
    }

    #[test]
    fn duplicate_id() {
        let src = "{\"id\":0,\"lang\":\"en\",\"text\":\"a\"}\n{\"id\":0,\"lang\":\"ja\",\"text\":\"b\"}\n";
        assert!(matches!(read_meta(src.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn pair_linking() {
        let src = concat!(
            "{\"id\":0,\"lang\":\"en\",\"text\":\"cat\",\"pair_id\":4}\n",
            "{\"id\":1,\"lang\":\"ja\",\"text\":\"猫\",\"pair_id\":4}\n",
        );
        let metas = read_meta(src.as_bytes()).unwrap();
        assert!(metas.iter().all(|m| m.pair_id == Some(4)));
        assert_eq!(metas[1].text, "猫");
    }

    #[test]
    fn same_language_twice_in_pair() {
        let src = concat!(
            "{\"id\":0,\"lang\":\"en\",\"text\":\"cat\",\"pair_id\":4}\n",
            "{\"id\":1,\"lang\":\"en\",\"text\":\"dog\",\"pair_id\":4}\n",
        );
        assert!(matches!(read_meta(src.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_line_number() {
        let src = "{\"id\":0,\"lang\":\"en\",\"text\":\"a\"}\n\n{\"id\":1,\"lang\":\n";
        match read_meta(src.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_read() {
        let metas = vec![
            SentenceMeta {
                sentence_id: 3,
                lang: "toyA".into(),
                text: "bada kitu".into(),
                pair_id: Some(1),
            },
            SentenceMeta {
                sentence_id: 4,
                lang: "toyB".into(),
                text: "fese holy".into(),
                pair_id: Some(1),
            },
        ];
        let mut buf = Vec::new();
        write_meta(&metas, &mut buf).unwrap();
        assert_eq!(read_meta(buf.as_slice()).unwrap(), metas);
    }
}
