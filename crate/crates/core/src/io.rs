//! Binary tensor files and model containers.
//!
//! A tensor file (`STNT`) is: the 4 magic bytes `STNT`, a little-endian
//! `u32` version (1), a `u8` order `N`, `N` little-endian `u64` dims, then the
//! entries as little-endian `f64`, first index fastest.
//!
//! A model container (`STNM`) is: the magic `STNM`, a `u32` version (1), a
//! `u32` manifest length, the manifest as UTF-8 JSON, then one tensor file
//! per section in manifest order: cores `0..N`, then the diagonals in
//! lexicographic edge order as order-1 tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{self, RankMatrix, SvdInsTnModel};
use crate::tensor::DenseTensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"STNT";
pub const MODEL_MAGIC: &[u8; 4] = b"STNM";
pub const FORMAT_VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn read_array<const K: usize>(r: &mut impl Read, what: &str) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => format_err(format!("truncated {what}")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    let order = u8::try_from(t.order()).map_err(|_| format_err("order exceeds 255"))?;
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[order])?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * 8);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one tensor; trailing bytes are left in the reader.
pub fn read_tensor(r: &mut impl Read) -> Result<DenseTensor> {
    let magic: [u8; 4] = read_array(r, "magic")?;
    if &magic != TENSOR_MAGIC {
        return Err(format_err(format!("bad magic {magic:?}, expected \"STNT\"")));
    }
    let version = u32::from_le_bytes(read_array(r, "version")?);
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let [order] = read_array::<1>(r, "order")?;
    if order == 0 {
        return Err(format_err("order must be at least 1"));
    }
    let mut shape = Vec::with_capacity(order as usize);
    let mut len: usize = 1;
    for _ in 0..order {
        let d = u64::from_le_bytes(read_array(r, "dims")?);
        let d = usize::try_from(d).map_err(|_| format_err("dimension too large"))?;
        if d == 0 {
            return Err(format_err("dimensions must be positive"));
        }
        len = len
            .checked_mul(d)
            .filter(|n| n.checked_mul(8).is_some())
            .ok_or_else(|| format_err("tensor size overflows"))?;
        shape.push(d);
    }
    let mut bytes = Vec::new();
    r.take((len * 8) as u64).read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(format_err(format!(
            "payload holds {} bytes, dims need {}",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseTensor::new(shape, data).map_err(|e| format_err(e.to_string()))
}

fn expect_end(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(format_err("unexpected trailing bytes"));
    }
    Ok(())
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

/// Reads a file holding exactly one tensor.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let t = read_tensor(&mut r)?;
    expect_end(&mut r)?;
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionInfo {
    /// `"core"` or `"diagonal"`.
    pub kind: String,
    /// Core index, or the edge `[t, l]` for a diagonal.
    pub index: Vec<usize>,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub order: usize,
    pub dims: Vec<usize>,
    /// Upper triangle of the rank matrix, lexicographic edge order.
    pub ranks: Vec<usize>,
    pub core_count: usize,
    pub diagonal_count: usize,
    pub sections: Vec<SectionInfo>,
}

impl ModelManifest {
    pub fn of(model: &SvdInsTnModel) -> Self {
        let mut sections: Vec<SectionInfo> = model
            .cores()
            .iter()
            .enumerate()
            .map(|(k, c)| SectionInfo {
                kind: "core".into(),
                index: vec![k],
                shape: c.shape().to_vec(),
            })
            .collect();
        sections.extend(model.ranks().edges().map(|(t, l)| SectionInfo {
            kind: "diagonal".into(),
            index: vec![t, l],
            shape: vec![model.ranks().get(t, l)],
        }));
        Self {
            order: model.order(),
            dims: model.dims().to_vec(),
            ranks: model.ranks().entries().to_vec(),
            core_count: model.order(),
            diagonal_count: model.ranks().edge_count(),
            sections,
        }
    }
}

pub fn write_model(w: &mut impl Write, model: &SvdInsTnModel) -> Result<()> {
    let manifest = serde_json::to_vec(&ModelManifest::of(model)).map_err(|e| format_err(e.to_string()))?;
    let len = u32::try_from(manifest.len()).map_err(|_| format_err("manifest too large"))?;
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&manifest)?;
    for core in model.cores() {
        write_tensor(w, core)?;
    }
    for s in model.diagonals() {
        write_tensor(w, &DenseTensor::new(vec![s.len()], s.clone())?)?;
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<SvdInsTnModel> {
    let magic: [u8; 4] = read_array(r, "magic")?;
    if &magic != MODEL_MAGIC {
        return Err(format_err(format!("bad magic {magic:?}, expected \"STNM\"")));
    }
    let version = u32::from_le_bytes(read_array(r, "version")?);
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(read_array(r, "manifest length")?) as usize;
    let mut raw = Vec::new();
    r.take(len as u64).read_to_end(&mut raw)?;
    if raw.len() != len {
        return Err(format_err("truncated manifest"));
    }
    let manifest: ModelManifest = serde_json::from_slice(&raw).map_err(|e| format_err(format!("manifest: {e}")))?;
    let ranks = RankMatrix::new(manifest.order, manifest.ranks.clone()).map_err(|e| format_err(e.to_string()))?;
    if manifest.sections.len() != manifest.core_count + manifest.diagonal_count
        || manifest.core_count != manifest.order
        || manifest.diagonal_count != ranks.edge_count()
    {
        return Err(format_err("manifest section counts are inconsistent"));
    }
    let mut cores = Vec::with_capacity(manifest.core_count);
    let mut diagonals = Vec::with_capacity(manifest.diagonal_count);
    for (i, section) in manifest.sections.iter().enumerate() {
        let t = read_tensor(r)?;
        if t.shape() != section.shape.as_slice() {
            return Err(format_err(format!("section {i} shape does not match the manifest")));
        }
        match (section.kind.as_str(), i < manifest.core_count) {
            ("core", true) => cores.push(t),
            ("diagonal", false) => diagonals.push(t.into_data()),
            _ => return Err(format_err(format!("section {i} has unexpected kind '{}'", section.kind))),
        }
    }
    SvdInsTnModel::new(manifest.dims, ranks, cores, diagonals).map_err(|e| format_err(e.to_string()))
}

pub fn save_model(path: impl AsRef<Path>, model: &SvdInsTnModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvdInsTnModel> {
    let mut r = BufReader::new(File::open(path)?);
    let model = read_model(&mut r)?;
    expect_end(&mut r)?;
    Ok(model)
}

/// Parses comma-separated numbers: one record gives an order-1 tensor,
/// several records a matrix with one record per row. Blank lines are skipped.
pub fn parse_csv(text: &str) -> Result<DenseTensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format_err(format!("csv: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| format_err(format!("line {line}: '{f}' is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    match rows.len() {
        0 => Err(format_err("no data rows")),
        1 => DenseTensor::new(vec![rows[0].len()], rows.remove(0)).map_err(|e| format_err(e.to_string())),
        m => {
            let n = rows[0].len();
            let data = (0..n).flat_map(|j| rows.iter().map(move |r| r[j])).collect();
            DenseTensor::new(vec![m, n], data).map_err(|e| format_err(e.to_string()))
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DenseTensor> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Parses a rank matrix written as `N` rows of `N` integers separated by
/// commas or whitespace. The matrix must be symmetric; diagonal entries are
/// ignored. Lines starting with `#` are comments.
pub fn parse_rank_matrix(text: &str) -> Result<RankMatrix> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .map(|f| f.parse::<usize>().map_err(|_| format_err(format!("'{f}' is not a rank"))))
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(format_err(format!("row {} has {} entries, expected {n}", bad + 1, rows[bad].len())));
    }
    if let Some((t, l)) = network::edge_pairs(n).find(|&(t, l)| rows[t][l] != rows[l][t]) {
        return Err(format_err(format!("rank matrix is not symmetric at ({t}, {l})")));
    }
    RankMatrix::from_fn(n, |t, l| rows[t][l]).map_err(|e| format_err(e.to_string()))
}

pub fn load_rank_matrix(path: impl AsRef<Path>) -> Result<RankMatrix> {
    parse_rank_matrix(&std::fs::read_to_string(path)?)
}
