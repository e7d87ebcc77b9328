// SPDX-License-Identifier: MIT OR Apache-2.0

//! LDIM: a minimal little-endian stream of per-layer, per-token hidden states.
//!
//! ```text
//! header:  "LDIM" | version u32 | d u32 | n_layers u32 | layer u32 * n_layers | dtype u8
//! record:  sentence_id u32 | lang [u8; 8] | num_tokens u32 | f32 * (n_layers * num_tokens * d)
//! ```
//!
//! Records follow the header back to back until end of stream, sorted by
//! strictly ascending `sentence_id`. Record payloads are layer-major, then
//! token-major, then dimension-major.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::store::LangCode;

pub const MAGIC: [u8; 4] = *b"LDIM";
pub const VERSION: u32 = 1;
/// Layer indices must be below this bound.
pub const MAX_LAYER_INDEX: u32 = 1024;
/// Default ceiling on any single allocation driven by a length field.
pub const DEFAULT_ALLOC_CAP: u64 = 2 << 30;

const RECORD_PREFIX_LEN: u64 = 4 + 8 + 4;

/// Element type of the payload. Version 1 only defines binary32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[repr(u8)]
pub enum Dtype {
    #[default]
    F32 = 0,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationFileHeader {
    pub hidden_size: u32,
    pub layer_indices: Vec<u32>,
    pub dtype: Dtype,
}

impl ActivationFileHeader {
    pub fn new(hidden_size: u32, layer_indices: Vec<u32>) -> Result<Self> {
        let header = Self {
            hidden_size,
            layer_indices,
            dtype: Dtype::F32,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::Validation("hidden size must be at least 1".into()));
        }
        check_layers(&self.layer_indices).map_err(Error::Validation)
    }

    /// Serialized size of the header in bytes.
    pub fn encoded_len(&self) -> u64 {
        4 + 4 + 4 + 4 + 4 * self.layer_indices.len() as u64 + 1
    }

    pub fn num_layers(&self) -> usize {
        self.layer_indices.len()
    }

    /// Position of `layer` within the stored layers.
    pub fn layer_slot(&self, layer: u32) -> Result<usize> {
        self.layer_indices
            .binary_search(&layer)
            .map_err(|_| Error::MissingLayer(layer))
    }

    /// Number of floats a record with `num_tokens` tokens carries.
    pub fn record_len(&self, num_tokens: u32) -> u64 {
        self.layer_indices.len() as u64 * u64::from(num_tokens) * u64::from(self.hidden_size)
    }
}

fn check_layers(layers: &[u32]) -> Result<(), String> {
    if layers.is_empty() {
        return Err("at least one layer must be stored".into());
    }
    if let Some(&bad) = layers.iter().find(|&&l| l >= MAX_LAYER_INDEX) {
        return Err(format!("layer index {bad} exceeds {}", MAX_LAYER_INDEX - 1));
    }
    if layers.windows(2).any(|w| w[0] >= w[1]) {
        return Err("layer indices must be strictly ascending".into());
    }
    Ok(())
}

/// Hidden states of one sentence at every stored layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceActivationRecord {
    pub sentence_id: u32,
    pub lang: LangCode,
    pub num_tokens: u32,
    /// `num_layers * num_tokens * d` values, layer-major.
    pub data: Vec<f32>,
}

impl SentenceActivationRecord {
    /// Token-by-dimension block for the layer stored at `slot`.
    pub fn layer_block(&self, slot: usize, hidden_size: usize) -> &[f32] {
        let stride = self.num_tokens as usize * hidden_size;
        &self.data[slot * stride..(slot + 1) * stride]
    }

    /// Hidden state of one token at the layer stored at `slot`.
    pub fn token(&self, slot: usize, token: usize, hidden_size: usize) -> &[f32] {
        let block = self.layer_block(slot, hidden_size);
        &block[token * hidden_size..(token + 1) * hidden_size]
    }

    fn check(&self, header: &ActivationFileHeader) -> Result<()> {
        if self.num_tokens == 0 {
            return Err(Error::Validation(format!(
                "sentence {} has no tokens",
                self.sentence_id
            )));
        }
        let expected = header.record_len(self.num_tokens);
        if self.data.len() as u64 != expected {
            return Err(Error::DimensionMismatch {
                expected: expected as usize,
                got: self.data.len(),
            });
        }
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::DataIntegrity(format!(
                "non-finite value in sentence {} at element {pos}",
                self.sentence_id
            )));
        }
        Ok(())
    }
}

/// A header together with its records.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCorpus {
    pub header: ActivationFileHeader,
    pub records: Vec<SentenceActivationRecord>,
}

impl ActivationCorpus {
    pub fn hidden_size(&self) -> usize {
        self.header.hidden_size as usize
    }

    pub fn record(&self, sentence_id: u32) -> Option<&SentenceActivationRecord> {
        self.records
            .binary_search_by_key(&sentence_id, |r| r.sentence_id)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn final_layer(&self) -> u32 {
        *self
            .header
            .layer_indices
            .last()
            .expect("validated header stores at least one layer")
    }

    pub fn write_to<W: Write>(&self, sink: W) -> Result<u64> {
        write_corpus(&self.records, &self.header, sink)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}

/// Serialize `records` under `header`. Everything is validated before the
/// first byte is written. Returns the number of bytes written.
pub fn write_corpus<W: Write>(
    records: &[SentenceActivationRecord],
    header: &ActivationFileHeader,
    mut sink: W,
) -> Result<u64> {
    header.validate()?;
    for rec in records {
        rec.check(header)?;
    }
    if let Some(w) = records.windows(2).find(|w| w[0].sentence_id >= w[1].sentence_id) {
        return Err(Error::Validation(format!(
            "records must be sorted by strictly ascending sentence id ({} then {})",
            w[0].sentence_id, w[1].sentence_id
        )));
    }

    let mut head = Vec::with_capacity(header.encoded_len() as usize);
    head.extend_from_slice(&MAGIC);
    head.extend_from_slice(&VERSION.to_le_bytes());
    head.extend_from_slice(&header.hidden_size.to_le_bytes());
    head.extend_from_slice(&(header.layer_indices.len() as u32).to_le_bytes());
    for layer in &header.layer_indices {
        head.extend_from_slice(&layer.to_le_bytes());
    }
    head.push(header.dtype as u8);
    sink.write_all(&head)?;
    let mut written = head.len() as u64;

    let mut buf = Vec::new();
    for rec in records {
        buf.clear();
        buf.reserve(RECORD_PREFIX_LEN as usize + 4 * rec.data.len());
        buf.extend_from_slice(&rec.sentence_id.to_le_bytes());
        buf.extend_from_slice(rec.lang.as_padded());
        buf.extend_from_slice(&rec.num_tokens.to_le_bytes());
        for v in &rec.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
        written += buf.len() as u64;
    }
    sink.flush()?;
    Ok(written)
}

#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    /// Largest payload, in bytes, the reader will accept for one record.
    pub alloc_cap: u64,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            alloc_cap: DEFAULT_ALLOC_CAP,
        }
    }
}

/// Read a complete LDIM stream with default options.
pub fn read_corpus<R: Read>(source: R) -> Result<ActivationCorpus> {
    read_corpus_with(source, &ReadOptions::default())
}

pub fn read_corpus_with<R: Read>(source: R, opts: &ReadOptions) -> Result<ActivationCorpus> {
    let mut rd = Tracked {
        inner: source,
        offset: 0,
    };

    let mut magic = [0u8; 4];
    rd.fill(&mut magic, None)?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:02x?}")));
    }
    let at = rd.offset;
    let version = rd.u32(None)?;
    if version != VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let at = rd.offset;
    let hidden_size = rd.u32(None)?;
    if hidden_size == 0 {
        return Err(Error::format(at, "hidden size must be at least 1"));
    }
    let at = rd.offset;
    let num_layers = rd.u32(None)?;
    if num_layers == 0 || num_layers > MAX_LAYER_INDEX {
        return Err(Error::format(at, format!("invalid layer count {num_layers}")));
    }
    let at = rd.offset;
    let mut layer_indices = Vec::with_capacity(num_layers as usize);
    for _ in 0..num_layers {
        layer_indices.push(rd.u32(None)?);
    }
    check_layers(&layer_indices).map_err(|m| Error::format(at, m))?;
    let at = rd.offset;
    let mut code = [0u8; 1];
    rd.fill(&mut code, None)?;
    if code[0] != Dtype::F32 as u8 {
        return Err(Error::format(at, format!("unknown dtype code {}", code[0])));
    }
    let header = ActivationFileHeader {
        hidden_size,
        layer_indices,
        dtype: Dtype::F32,
    };

    let mut records = Vec::new();
    let mut prev_id: Option<u32> = None;
    loop {
        let start = rd.offset;
        let mut id_bytes = [0u8; 4];
        let got = rd.fill_partial(&mut id_bytes)?;
        if got == 0 {
            break;
        }
        if got < id_bytes.len() {
            return Err(Error::Truncated {
                offset: rd.offset,
                sentence_id: None,
            });
        }
        let sentence_id = u32::from_le_bytes(id_bytes);
        if prev_id.is_some_and(|p| p >= sentence_id) {
            return Err(Error::format(start, format!("sentence id {sentence_id} out of order")));
        }
        let at = rd.offset;
        let mut raw_lang = [0u8; 8];
        rd.fill(&mut raw_lang, Some(sentence_id))?;
        let lang = LangCode::from_padded(raw_lang)
            .ok_or_else(|| Error::format(at, format!("malformed language tag {raw_lang:02x?}")))?;
        let at = rd.offset;
        let num_tokens = rd.u32(Some(sentence_id))?;
        if num_tokens == 0 {
            return Err(Error::format(at, format!("sentence {sentence_id} has zero tokens")));
        }
        let payload_bytes = header
            .record_len(num_tokens)
            .checked_mul(4)
            .filter(|&n| n <= opts.alloc_cap)
            .ok_or_else(|| {
                Error::format(
                    at,
                    format!(
                        "sentence {sentence_id}: {num_tokens} tokens exceed the {} byte allocation cap",
                        opts.alloc_cap
                    ),
                )
            })?;

        // Grows with the bytes actually present, not with the length field.
        let mut raw = Vec::new();
        (&mut rd.inner).take(payload_bytes).read_to_end(&mut raw)?;
        rd.offset += raw.len() as u64;
        if (raw.len() as u64) < payload_bytes {
            return Err(Error::Truncated {
                offset: rd.offset,
                sentence_id: Some(sentence_id),
            });
        }
        let mut data = Vec::with_capacity(raw.len() / 4);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(Error::DataIntegrity(format!(
                    "non-finite value in sentence {sentence_id} at element {i}"
                )));
            }
            data.push(v);
        }
        records.push(SentenceActivationRecord {
            sentence_id,
            lang,
            num_tokens,
            data,
        });
        prev_id = Some(sentence_id);
    }

    Ok(ActivationCorpus { header, records })
}

struct Tracked<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Tracked<R> {
    /// Read as many bytes as are available up to `buf.len()`.
    fn fill_partial(&mut self, buf: &mut [u8]) -> Result<usize> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => {
                    filled += n;
                    self.offset += n as u64;
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(filled)
    }

    fn fill(&mut self, buf: &mut [u8], sentence_id: Option<u32>) -> Result<()> {
        if self.fill_partial(buf)? < buf.len() {
            return Err(Error::Truncated {
                offset: self.offset,
                sentence_id,
            });
        }
        Ok(())
    }

    fn u32(&mut self, sentence_id: Option<u32>) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, sentence_id)?;
        Ok(u32::from_le_bytes(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(tag: &str) -> LangCode {
        LangCode::new(tag).unwrap()
    }

    fn small() -> ActivationCorpus {
        let header = ActivationFileHeader::new(4, vec![0, 2]).unwrap();
        let rec = SentenceActivationRecord {
            sentence_id: 7,
            lang: lang("en"),
            num_tokens: 2,
            data: (0..16).map(|i| i as f32 * 0.5 - 3.0).collect(),
        };
        ActivationCorpus {
            header,
            records: vec![rec],
        }
    }

    #[test]
    fn byte_layout() {
        let corpus = small();
        let bytes = corpus.to_bytes().unwrap();
        let header_len = 4 + 4 + 4 + 4 + 8 + 1;
        assert_eq!(corpus.header.encoded_len(), header_len);
        assert_eq!(bytes.len() as u64, header_len + (4 + 8 + 4) + 2 * 2 * 4 * 4);
        assert_eq!(&bytes[..4], b"LDIM");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &4u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &0u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &2u32.to_le_bytes());
        assert_eq!(bytes[24], 0);
        assert_eq!(&bytes[25..29], &7u32.to_le_bytes());
        assert_eq!(&bytes[29..37], b"en\0\0\0\0\0\0");
        assert_eq!(&bytes[37..41], &2u32.to_le_bytes());
        assert_eq!(&bytes[41..45], &(-3.0f32).to_le_bytes());
    }

    #[test]
    fn header_only_file() {
        let header = ActivationFileHeader::new(3, vec![5]).unwrap();
        let mut buf = Vec::new();
        let n = write_corpus(&[], &header, &mut buf).unwrap();
        assert_eq!(n, header.encoded_len());
        let back = read_corpus(buf.as_slice()).unwrap();
        assert_eq!(back.header, header);
        assert!(back.records.is_empty());
    }

    #[test]
    fn roundtrip_small() {
        let corpus = small();
        let bytes = corpus.to_bytes().unwrap();
        assert_eq!(read_corpus(bytes.as_slice()).unwrap(), corpus);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = small().to_bytes().unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            read_corpus(bytes.as_slice()),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn truncation_inside_payload_names_sentence() {
        let bytes = small().to_bytes().unwrap();
        let cut = bytes.len() - 5;
        match read_corpus(&bytes[..cut]) {
            Err(Error::Truncated { offset, sentence_id }) => {
                assert_eq!(offset, cut as u64);
                assert_eq!(sentence_id, Some(7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncation_inside_header() {
        let bytes = small().to_bytes().unwrap();
        assert!(matches!(
            read_corpus(&bytes[..14]),
            Err(Error::Truncated {
                offset: 14,
                sentence_id: None
            })
        ));
    }

    #[test]
    fn trailing_garbage_rejected() {
        let mut bytes = small().to_bytes().unwrap();
        bytes.extend_from_slice(&[0xff, 0xff]);
        assert!(matches!(
            read_corpus(bytes.as_slice()),
            Err(Error::Truncated { sentence_id: None, .. })
        ));
    }

    #[test]
    fn non_finite_rejected_both_ways() {
        let mut corpus = small();
        corpus.records[0].data[3] = f32::NAN;
        assert!(matches!(corpus.to_bytes(), Err(Error::DataIntegrity(_))));

        let mut bytes = small().to_bytes().unwrap();
        let off = 41 + 4 * 3;
        bytes[off..off + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(read_corpus(bytes.as_slice()), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn inconsistent_dimensions() {
        let mut corpus = small();
        corpus.records[0].data.pop();
        assert!(matches!(
            corpus.to_bytes(),
            Err(Error::DimensionMismatch { expected: 16, got: 15 })
        ));
    }

    #[test]
    fn unsorted_records_rejected() {
        let mut corpus = small();
        let mut second = corpus.records[0].clone();
        second.sentence_id = 3;
        corpus.records.push(second);
        assert!(matches!(corpus.to_bytes(), Err(Error::Validation(_))));
    }

    #[test]
    fn header_invariants() {
        assert!(ActivationFileHeader::new(0, vec![0]).is_err());
        assert!(ActivationFileHeader::new(4, vec![2, 2]).is_err());
        assert!(ActivationFileHeader::new(4, vec![3, 1]).is_err());
        assert!(ActivationFileHeader::new(4, vec![1024]).is_err());
        assert!(ActivationFileHeader::new(4, vec![]).is_err());
        assert!(ActivationFileHeader::new(4, vec![0, 1023]).is_ok());
    }

    #[test]
    fn alloc_cap_checked_before_reading_payload() {
        let mut bytes = small().to_bytes().unwrap();
        // Claim an enormous token count.
        bytes[37..41].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            read_corpus(bytes.as_slice()),
            Err(Error::Format { offset: 37, .. })
        ));
        let opts = ReadOptions { alloc_cap: 64 };
        let ok = small().to_bytes().unwrap();
        assert!(read_corpus_with(ok.as_slice(), &opts).is_ok());
        let tight = ReadOptions { alloc_cap: 63 };
        assert!(read_corpus_with(ok.as_slice(), &tight).is_err());
    }

    #[test]
    fn token_accessors() {
        let corpus = small();
        let rec = &corpus.records[0];
        assert_eq!(rec.token(0, 1, 4), &[-1.0, -0.5, 0.0, 0.5]);
        assert_eq!(rec.token(1, 0, 4), &[1.0, 1.5, 2.0, 2.5]);
        assert_eq!(corpus.header.layer_slot(2).unwrap(), 1);
        assert!(matches!(corpus.header.layer_slot(1), Err(Error::MissingLayer(1))));
    }
}
