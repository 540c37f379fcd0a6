//! EMBD and HEAD binary formats.
//!
//! Both formats are little-endian throughout and store floats as IEEE-754
//! binary32. Layouts:
//!
//! ```text
//! EMBD: magic "EMBD" | version u32 | dim u32 | num_classes u32 |
//!       num_samples u64 | labels M×u32 | features M×F f32 row-major
//! HEAD: magic "HEAD" | version u32 | kind u8 | dim u32 | num_classes u32 |
//!       scale f32 | weights N×F f32, one class column after another
//! ```
//!
//! HEAD kind bytes: 0 cosine, 1 dot-product, 2 prototype (scale stored as 1),
//! 3 hybrid, 4 continual.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::core::{ClassifierHead, EmbeddingDataset, HeadKind, PrototypeSet, PrototypeSource, EPS};
use crate::error::{Error, Result};

pub const EMBD_MAGIC: [u8; 4] = *b"EMBD";
pub const HEAD_MAGIC: [u8; 4] = *b"HEAD";
pub const FORMAT_VERSION: u32 = 1;

/// Classifier kind byte stored in a HEAD file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoredKind {
    Cosine,
    DotProduct,
    Prototype,
    Hybrid,
    Continual,
}

impl StoredKind {
    pub fn to_byte(self) -> u8 {
        match self {
            StoredKind::Cosine => 0,
            StoredKind::DotProduct => 1,
            StoredKind::Prototype => 2,
            StoredKind::Hybrid => 3,
            StoredKind::Continual => 4,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(StoredKind::Cosine),
            1 => Ok(StoredKind::DotProduct),
            2 => Ok(StoredKind::Prototype),
            3 => Ok(StoredKind::Hybrid),
            4 => Ok(StoredKind::Continual),
            other => Err(Error::BadKind(other)),
        }
    }
}

/// Decoded contents of a HEAD file: any classifier-shaped F×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadFile {
    pub kind: StoredKind,
    pub scale: f64,
    /// F×N, one column per class.
    pub weights: Array2<f64>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::TruncatedFile);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::TrailingBytes {
                extra: self.remaining(),
            });
        }
        Ok(())
    }
}

fn check_magic(cur: &mut Cursor<'_>, expected: [u8; 4]) -> Result<()> {
    let found: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

fn check_version(cur: &mut Cursor<'_>) -> Result<()> {
    let v = cur.u32()?;
    if v != FORMAT_VERSION {
        return Err(Error::BadVersion(v));
    }
    Ok(())
}

/// Guards payload size arithmetic against overflow before any allocation.
fn expect_payload(cur: &Cursor<'_>, elements: &[(u64, u64)]) -> Result<usize> {
    let mut need: u64 = 0;
    for &(count, size) in elements {
        let bytes = count.checked_mul(size).ok_or(Error::TruncatedFile)?;
        need = need.checked_add(bytes).ok_or(Error::TruncatedFile)?;
    }
    if (cur.remaining() as u64) < need {
        return Err(Error::TruncatedFile);
    }
    Ok(need as usize)
}

pub fn save_embd(path: impl AsRef<Path>, dataset: &EmbeddingDataset) -> Result<()> {
    let m = dataset.len();
    let f = dataset.dim();
    let mut buf = Vec::with_capacity(24 + 4 * m + 4 * m * f);
    buf.extend_from_slice(&EMBD_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(f as u32).to_le_bytes());
    buf.extend_from_slice(&(dataset.num_classes() as u32).to_le_bytes());
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    for &l in dataset.labels() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for row in dataset.features().rows() {
        for &x in row {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Loads an EMBD file. Per-class counts are tallied from the stored labels;
/// evaluation against a different split should take its counts from the
/// training split instead.
pub fn load_embd(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let buf = fs::read(path)?;
    let mut cur = Cursor::new(&buf);
    check_magic(&mut cur, EMBD_MAGIC)?;
    check_version(&mut cur)?;
    let dim = cur.u32()? as usize;
    let num_classes = cur.u32()? as usize;
    let m = cur.u64()?;
    expect_payload(&cur, &[(m, 4), (m.checked_mul(dim as u64).ok_or(Error::TruncatedFile)?, 4)])?;
    let m = m as usize;

    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let l = cur.u32()?;
        if (l as usize) >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: l,
                num_classes: num_classes as u32,
            });
        }
        labels.push(l);
    }
    let mut flat = Vec::with_capacity(m * dim);
    for _ in 0..m * dim {
        flat.push(cur.f32()? as f64);
    }
    cur.finish()?;
    let features = Array2::from_shape_vec((m, dim), flat).expect("shape checked above");
    EmbeddingDataset::new(features, labels, num_classes)
}

pub fn save_head(path: impl AsRef<Path>, head: &HeadFile) -> Result<()> {
    let f = head.weights.nrows();
    let n = head.weights.ncols();
    let mut buf = Vec::with_capacity(21 + 4 * n * f);
    buf.extend_from_slice(&HEAD_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(head.kind.to_byte());
    buf.extend_from_slice(&(f as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(head.scale as f32).to_le_bytes());
    for class in head.weights.columns() {
        for &x in class {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_head(path: impl AsRef<Path>) -> Result<HeadFile> {
    let buf = fs::read(path)?;
    let mut cur = Cursor::new(&buf);
    check_magic(&mut cur, HEAD_MAGIC)?;
    check_version(&mut cur)?;
    let kind = StoredKind::from_byte(cur.u8()?)?;
    let dim = cur.u32()? as u64;
    let n = cur.u32()? as u64;
    let scale = cur.f32()? as f64;
    expect_payload(&cur, &[(n.checked_mul(dim).ok_or(Error::TruncatedFile)?, 4)])?;
    let (dim, n) = (dim as usize, n as usize);

    let mut weights = Array2::zeros((dim, n));
    for class in 0..n {
        for row in 0..dim {
            weights[(row, class)] = cur.f32()? as f64;
        }
    }
    cur.finish()?;
    Ok(HeadFile {
        kind,
        scale,
        weights,
    })
}

pub fn save_classifier(path: impl AsRef<Path>, head: &ClassifierHead) -> Result<()> {
    let kind = match head.kind() {
        HeadKind::Cosine => StoredKind::Cosine,
        HeadKind::DotProduct => StoredKind::DotProduct,
    };
    save_head(
        path,
        &HeadFile {
            kind,
            scale: head.scale(),
            weights: head.weights().to_owned(),
        },
    )
}

/// Loads a HEAD file holding a trained classifier (kind byte 0 or 1).
pub fn load_classifier(path: impl AsRef<Path>) -> Result<ClassifierHead> {
    let file = load_head(path)?;
    let kind = match file.kind {
        StoredKind::Cosine => HeadKind::Cosine,
        StoredKind::DotProduct => HeadKind::DotProduct,
        other => return Err(Error::BadKind(other.to_byte())),
    };
    ClassifierHead::new(file.weights, file.scale, kind)
}

/// Persists prototypes in the HEAD format (kind byte 2, scale stored as 1).
/// Absent classes are stored as all-zero columns.
pub fn save_prototypes(path: impl AsRef<Path>, protos: &PrototypeSet) -> Result<()> {
    save_head(
        path,
        &HeadFile {
            kind: StoredKind::Prototype,
            scale: 1.0,
            weights: protos.matrix().to_owned(),
        },
    )
}

/// Loads a prototype HEAD file; all-zero columns become absent classes.
/// The source tag is not stored in the format and is supplied by the caller.
pub fn load_prototypes(path: impl AsRef<Path>, source: PrototypeSource) -> Result<PrototypeSet> {
    let file = load_head(path)?;
    if file.kind != StoredKind::Prototype {
        return Err(Error::BadKind(file.kind.to_byte()));
    }
    let present = file
        .weights
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt() > EPS)
        .collect();
    PrototypeSet::new(file.weights, source, present)
}
