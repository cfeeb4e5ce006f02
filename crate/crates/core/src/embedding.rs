//! Core data types and their on-disk representations.
//!
//! * `EMB1` binary embedding matrices (plus a CSV form for hand-written fixtures),
//! * label sidecar JSON mapping item ids to classes,
//! * odd-one-out triplet CSV,
//! * `AFT1` binary affine transforms.
//!
//! Joins between embeddings, labels and triplets always go through item ids,
//! never through row positions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const AFT1_MAGIC: &[u8; 4] = b"AFT1";
pub const FORMAT_VERSION: u32 = 1;
/// magic + version + n + d
pub const EMB1_HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Provenance strings attached to embeddings and transforms.
pub type Meta = BTreeMap<String, String>;

/// On-disk representation of an [`EmbeddingSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Emb1,
    Csv,
}

impl EmbeddingFormat {
    /// Guess from the file extension; anything that is not `.csv` is treated as EMB1.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Emb1,
        }
    }
}

/// One layer's representations: an `n x d` row-major matrix with one item id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    items: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    pub meta: Meta,
}

impl EmbeddingSet {
    /// Validates shape, id uniqueness and finiteness.
    pub fn new(items: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        Self::with_meta(items, dim, data, Meta::new())
    }

    pub fn with_meta(items: Vec<String>, dim: usize, data: Vec<f32>, meta: Meta) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Validation("embedding set must contain at least one item".into()));
        }
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        if data.len() != items.len() * dim {
            return Err(Error::Validation(format!(
                "data length {} does not match {} items x {} dims",
                data.len(),
                items.len(),
                dim
            )));
        }
        let mut seen = HashSet::with_capacity(items.len());
        for id in &items {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate item id `{id}`")));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {} at row {} (item `{}`), column {}",
                data[pos],
                pos / dim,
                items[pos / dim],
                pos % dim
            )));
        }
        Ok(Self {
            items,
            dim,
            data,
            meta,
        })
    }

    /// Builds a set from rows, naming items `0`, `1`, ... when no ids are given.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Validation("rows have differing lengths".into()));
        }
        let items = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(items, dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Map from item id to row index.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Same items and meta, new data of the same shape (re-validated).
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::with_meta(self.items.clone(), self.dim, data, self.meta.clone())
    }

    /// Subset of rows in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let items = rows.iter().map(|&r| self.items[r].clone()).collect();
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self::with_meta(items, self.dim, data, self.meta.clone())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Little-endian byte cursor over an in-memory file.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::Format(format!(
                "{}: truncated at byte {} (need {} more, have {})",
                self.what,
                self.pos,
                len,
                self.remaining()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Format(format!("{}: invalid UTF-8 string at byte {}", self.what, self.pos)))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes_len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("{}: data block size overflows", self.what)))?;
        let raw = self.take(bytes_len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(Error::Format(format!(
                "{}: bad magic {:?}, expected {:?}",
                self.what,
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("{}: unsupported version {version}", self.what)));
        }
        Ok(())
    }

    /// Optional trailing meta block: u32 count, then (key, value) string pairs.
    fn meta_trailer(&mut self) -> Result<Meta> {
        let mut meta = Meta::new();
        if self.remaining() == 0 {
            return Ok(meta);
        }
        let count = self.u32()?;
        for _ in 0..count {
            let key = self.string()?;
            let value = self.string()?;
            meta.insert(key, value);
        }
        if self.remaining() != 0 {
            return Err(Error::Format(format!(
                "{}: {} unexpected trailing bytes",
                self.what,
                self.remaining()
            )));
        }
        Ok(meta)
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_meta_trailer(out: &mut Vec<u8>, meta: &Meta) {
    if meta.is_empty() {
        return;
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    for (k, v) in meta {
        put_string(out, k);
        put_string(out, v);
    }
}

/// Serializes to EMB1: `EMB1 | u32 version | u64 n | u64 d | n x (u32 len, utf8 id) | n*d f32`,
/// all little-endian, followed by the meta trailer when meta is non-empty.
pub fn encode_emb1(set: &EmbeddingSet) -> Vec<u8> {
    let id_bytes: usize = set.items.iter().map(|s| 4 + s.len()).sum();
    let mut out = Vec::with_capacity(EMB1_HEADER_LEN + id_bytes + 4 * set.data.len());
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&(set.dim as u64).to_le_bytes());
    for id in &set.items {
        put_string(&mut out, id);
    }
    for v in &set.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_meta_trailer(&mut out, &set.meta);
    out
}

pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut r = Reader::new(bytes, "EMB1");
    r.magic(EMB1_MAGIC)?;
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    // Each id needs at least its 4-byte length prefix; reject absurd counts before allocating.
    if n.saturating_mul(4) > r.remaining() {
        return Err(Error::Format(format!("EMB1: header claims {n} items but file is too short")));
    }
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        items.push(r.string()?);
    }
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("EMB1: n*d overflows".into()))?;
    let data = r.f32s(count)?;
    let meta = r.meta_trailer()?;
    EmbeddingSet::with_meta(items, d, data, meta)
}

fn encode_csv(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((0..set.dim).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (id, row) in set.items.iter().zip(set.rows()) {
        let mut record = Vec::with_capacity(set.dim + 1);
        record.push(id.clone());
        // f32 Display prints the shortest string that parses back to the same value.
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.into_inner()
        .map_err(|e| Error::Format(format!("csv flush failed: {e}")))
}

fn decode_csv(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") || header.len() < 2 {
        return Err(Error::Format("embedding CSV header must be `id,f0,...,f{d-1}`".into()));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::Format(format!(
                "embedding CSV header column {} is `{name}`, expected `f{j}`",
                j + 1
            )));
        }
    }
    let dim = header.len() - 1;
    let mut items = Vec::new();
    let mut data = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::Format(format!(
                "embedding CSV row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                dim + 1
            )));
        }
        items.push(record[0].to_string());
        for cell in record.iter().skip(1) {
            let v: f32 = cell.trim().parse().map_err(|_| {
                Error::Format(format!("embedding CSV row {}: cannot parse `{cell}`", line + 1))
            })?;
            data.push(v);
        }
    }
    EmbeddingSet::new(items, dim, data)
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    let bytes = read_file(path)?;
    match format {
        EmbeddingFormat::Emb1 => decode_emb1(&bytes),
        EmbeddingFormat::Csv => decode_csv(&bytes),
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let bytes = match format {
        EmbeddingFormat::Emb1 => encode_emb1(set),
        EmbeddingFormat::Csv => encode_csv(set)?,
    };
    write_file(path, &bytes)
}

/// Item id to class id, with class names indexed by class id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    #[serde(rename = "classes")]
    pub class_names: Vec<String>,
    #[serde(rename = "items")]
    pub entries: BTreeMap<String, u32>,
}

impl LabelMap {
    pub fn new(class_names: Vec<String>, entries: BTreeMap<String, u32>) -> Result<Self> {
        let map = Self {
            class_names,
            entries,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        for (item, &class) in &self.entries {
            if class as usize >= self.class_names.len() {
                return Err(Error::Validation(format!(
                    "item `{item}` has class {class}, but only {} classes are named",
                    self.class_names.len()
                )));
            }
        }
        Ok(())
    }

    pub fn class_of(&self, item: &str) -> Option<u32> {
        self.entries.get(item).copied()
    }

    /// Class id of every row of `set`, in row order.
    pub fn vertex_classes(&self, set: &EmbeddingSet) -> Result<Vec<u32>> {
        set.items()
            .iter()
            .map(|id| {
                self.class_of(id).ok_or_else(|| Error::Join {
                    item: id.clone(),
                    source_name: "labels".into(),
                })
            })
            .collect()
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let map: LabelMap = serde_json::from_slice(bytes)?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    LabelMap::from_json(&read_file(path)?)
}

pub fn save_labels(labels: &LabelMap, path: &Path) -> Result<()> {
    write_file(path, labels.to_json()?.as_bytes())
}

/// One human odd-one-out judgment over three items.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub items: [String; 3],
    /// Position (0, 1 or 2) of the item judged to be the odd one out.
    pub odd: u8,
}

impl Triplet {
    pub fn new(i: impl Into<String>, j: impl Into<String>, k: impl Into<String>, odd: u8) -> Result<Self> {
        let t = Self {
            items: [i.into(), j.into(), k.into()],
            odd,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.odd > 2 {
            return Err(Error::Validation(format!("odd index {} not in {{0,1,2}}", self.odd)));
        }
        let [i, j, k] = &self.items;
        if i == j || i == k || j == k {
            return Err(Error::Validation(format!("triplet ({i},{j},{k}) repeats an item")));
        }
        Ok(())
    }

    /// The two items judged most similar.
    pub fn pair(&self) -> (&str, &str) {
        match self.odd {
            0 => (&self.items[1], &self.items[2]),
            1 => (&self.items[0], &self.items[2]),
            _ => (&self.items[0], &self.items[1]),
        }
    }

    pub fn odd_item(&self) -> &str {
        &self.items[self.odd as usize]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
}

/// A triplet resolved to row indices of a particular [`EmbeddingSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedTriplet {
    pub rows: [usize; 3],
    pub odd: u8,
}

impl TripletSet {
    pub fn new(triplets: Vec<Triplet>) -> Result<Self> {
        for t in &triplets {
            t.validate()?;
        }
        Ok(Self { triplets })
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Resolves every id against `set`; the first missing id is a join error.
    pub fn resolve(&self, set: &EmbeddingSet) -> Result<Vec<IndexedTriplet>> {
        let index = set.index();
        self.triplets
            .iter()
            .map(|t| {
                let mut rows = [0usize; 3];
                for (slot, id) in rows.iter_mut().zip(&t.items) {
                    *slot = *index.get(id.as_str()).ok_or_else(|| Error::Join {
                        item: id.clone(),
                        source_name: "embeddings".into(),
                    })?;
                }
                Ok(IndexedTriplet { rows, odd: t.odd })
            })
            .collect()
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = rdr.headers()?;
        if header.iter().collect::<Vec<_>>() != ["i", "j", "k", "odd"] {
            return Err(Error::Format("triplet CSV header must be `i,j,k,odd`".into()));
        }
        let mut triplets = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Format(format!("triplet CSV row {} must have 4 fields", line + 1)));
            }
            let odd: u8 = record[3].trim().parse().map_err(|_| {
                Error::Validation(format!("triplet row {}: odd `{}` not in {{0,1,2}}", line + 1, &record[3]))
            })?;
            let t = Triplet::new(&record[0], &record[1], &record[2], odd)
                .map_err(|e| Error::Validation(format!("triplet row {}: {e}", line + 1)))?;
            triplets.push(t);
        }
        Ok(Self { triplets })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["i", "j", "k", "odd"])?;
        for t in &self.triplets {
            w.write_record([&t.items[0], &t.items[1], &t.items[2], &t.odd.to_string()])?;
        }
        w.into_inner()
            .map_err(|e| Error::Format(format!("csv flush failed: {e}")))
    }
}

pub fn load_triplets(path: &Path) -> Result<TripletSet> {
    TripletSet::from_csv(&read_file(path)?)
}

pub fn save_triplets(triplets: &TripletSet, path: &Path) -> Result<()> {
    write_file(path, &triplets.to_csv()?)
}

/// Affine map `x -> W x + b` with square `W`.
///
/// Parameters are kept in `f64` for optimization; the `AFT1` file stores them as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    dim: usize,
    /// Row-major `dim x dim`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub meta: Meta,
}

impl AffineTransform {
    pub fn new(dim: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if dim == 0 || w.len() != dim * dim || b.len() != dim {
            return Err(Error::Parameter(format!(
                "affine transform of dim {dim} needs {} weights and {dim} biases, got {} and {}",
                dim * dim,
                w.len(),
                b.len()
            )));
        }
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Validation("affine transform has non-finite parameters".into()));
        }
        Ok(Self {
            dim,
            w,
            b,
            meta: Meta::new(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        Self {
            dim,
            w,
            b: vec![0.0; dim],
            meta: Meta::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `W x + b` in f64.
    pub fn apply_row(&self, x: &[f32], out: &mut [f64]) {
        let d = self.dim;
        for (r, o) in out.iter_mut().enumerate() {
            let w_row = &self.w[r * d..(r + 1) * d];
            let mut acc = self.b[r];
            for (w, &xv) in w_row.iter().zip(x) {
                acc += w * xv as f64;
            }
            *o = acc;
        }
    }
}

/// `AFT1 | u32 version | u64 d | d*d f32 (W row-major) | d f32 (b)` plus optional meta trailer.
pub fn encode_aft1(t: &AffineTransform) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * (t.w.len() + t.b.len()));
    out.extend_from_slice(AFT1_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.dim as u64).to_le_bytes());
    for v in t.w.iter().chain(&t.b) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    put_meta_trailer(&mut out, &t.meta);
    out
}

pub fn decode_aft1(bytes: &[u8]) -> Result<AffineTransform> {
    let mut r = Reader::new(bytes, "AFT1");
    r.magic(AFT1_MAGIC)?;
    let d = r.u64()? as usize;
    let count = d
        .checked_mul(d)
        .and_then(|dd| dd.checked_add(d))
        .ok_or_else(|| Error::Format("AFT1: dimension overflows".into()))?;
    let values = r.f32s(count)?;
    let meta = r.meta_trailer()?;
    let (w, b) = values.split_at(d * d);
    let mut t = AffineTransform::new(
        d,
        w.iter().map(|&v| v as f64).collect(),
        b.iter().map(|&v| v as f64).collect(),
    )?;
    t.meta = meta;
    Ok(t)
}

pub fn load_transform(path: &Path) -> Result<AffineTransform> {
    decode_aft1(&read_file(path)?)
}

pub fn save_transform(t: &AffineTransform, path: &Path) -> Result<()> {
    write_file(path, &encode_aft1(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingSet {
        EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn emb1_round_trip_is_bit_exact() {
        let set = sample();
        let back = decode_emb1(&encode_emb1(&set)).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.row(2), &[1.0, 1.0]);
    }

    #[test]
    fn emb1_meta_trailer_round_trips() {
        let mut set = sample();
        set.meta.insert("model".into(), "vit-base".into());
        set.meta.insert("layer".into(), "3".into());
        let back = decode_emb1(&encode_emb1(&set)).unwrap();
        assert_eq!(back.meta, set.meta);
    }

    #[test]
    fn emb1_size_without_meta() {
        let n = 1000;
        let d = 768;
        let items: Vec<String> = (0..n).map(|i| format!("item{i}")).collect();
        let id_block: usize = items.iter().map(|s| 4 + s.len()).sum();
        let set = EmbeddingSet::new(items, d, vec![0.5; n * d]).unwrap();
        let bytes = encode_emb1(&set);
        assert_eq!(bytes.len(), 24 + id_block + 4 * n * d);
    }

    #[test]
    fn emb1_rejects_bad_magic_and_truncation() {
        let mut bytes = encode_emb1(&sample());
        assert!(matches!(decode_emb1(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_emb1(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn emb1_rejects_nan() {
        let set = sample();
        let mut bytes = encode_emb1(&set);
        let len = bytes.len();
        bytes[len - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_emb1(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_parse_direct() {
        let set = decode_csv(b"id,f0,f1\na,1,0\nb,0,1").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 2);
        assert_eq!(set.items(), ["a", "b"]);
        assert_eq!(set.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn csv_nan_cell_is_validation_error() {
        let err = decode_csv(b"id,f0,f1\na,NaN,0\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn csv_round_trip_preserves_f32_values() {
        let set = EmbeddingSet::from_rows(&[vec![0.1, -3.25e-7], vec![1.0e30, 7.0]]).unwrap();
        let back = decode_csv(&encode_csv(&set).unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(matches!(
            EmbeddingSet::new(vec!["a".into(), "a".into()], 1, vec![0.0, 1.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(EmbeddingSet::new(vec![], 1, vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn triplet_rows_parse() {
        let set = TripletSet::from_csv(b"i,j,k,odd\na,b,c,2\n").unwrap();
        assert_eq!(set.triplets[0].pair(), ("a", "b"));
        assert_eq!(set.triplets[0].odd_item(), "c");

        let four = TripletSet::from_csv(b"i,j,k,odd\na,b,c,2\na,b,c,0\nc,d,a,1\nb,d,c,0\n").unwrap();
        assert_eq!(four.len(), 4);
    }

    #[test]
    fn triplet_validation() {
        assert!(matches!(
            TripletSet::from_csv(b"i,j,k,odd\na,a,c,2\n"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            TripletSet::from_csv(b"i,j,k,odd\na,b,c,3\n"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(TripletSet::from_csv(b"x,y,z,odd\na,b,c,0\n"), Err(Error::Format(_))));
    }

    #[test]
    fn labels_json_and_join() {
        let json = br#"{"classes": ["animal", "tool"], "items": {"0": 0, "1": 1}}"#;
        let labels = LabelMap::from_json(json).unwrap();
        let set = sample();
        let err = labels.vertex_classes(&set).unwrap_err();
        assert!(matches!(err, Error::Join { ref item, .. } if item == "2"));
        assert!(LabelMap::from_json(br#"{"classes": ["a"], "items": {"x": 3}}"#).is_err());
    }

    #[test]
    fn aft1_round_trip() {
        let mut t = AffineTransform::new(2, vec![1.5, -2.0, 0.25, 3.0], vec![0.5, -0.5]).unwrap();
        t.meta.insert("lambda".into(), "0.001".into());
        let back = decode_aft1(&encode_aft1(&t)).unwrap();
        assert_eq!(back, t);
        let id = AffineTransform::identity(3);
        assert_eq!(id.w, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(id.b, vec![0.0; 3]);
    }
}
