//! Binary model container.
//!
//! Layout (all integers `u32` little-endian, strings length-prefixed UTF-8):
//!
//! ```text
//! magic   "BDMMODEL"
//! version 1
//! dims    V D H C L
//! labels  count, then C strings
//! vocab   count, then V strings in index order (index 1 first)
//! tensors count, then per tensor: name, ndim, shape[ndim], f64 LE values row-major
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::lstm::{Dims, Matrix, ModelParams, TENSOR_NAMES};
use super::{BeliefModel, ClassifierError};
use crate::text::Vocabulary;

pub const MAGIC: &[u8; 8] = b"BDMMODEL";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn write_model(model: &BeliefModel, w: &mut impl Write) -> Result<(), ClassifierError> {
    let d = model.params.dims;
    w.write_all(MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    for v in [d.vocab, d.embed, d.hidden, d.classes, model.seq_len] {
        put_u32(w, v as u32)?;
    }
    put_u32(w, model.labels.len() as u32)?;
    for l in &model.labels {
        put_str(w, l)?;
    }
    put_u32(w, model.vocab.len() as u32)?;
    for word in model.vocab.words() {
        put_str(w, word)?;
    }
    let shapes = ModelParams::shapes(d);
    put_u32(w, TENSOR_NAMES.len() as u32)?;
    for ((name, shape), data) in TENSOR_NAMES.iter().zip(&shapes).zip(model.params.tensors()) {
        put_str(w, name)?;
        put_u32(w, shape.len() as u32)?;
        for &s in shape {
            put_u32(w, s as u32)?;
        }
        for x in data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8], ClassifierError> {
        if self.buf.len() - self.pos < n {
            return Err(ClassifierError::Truncated { field: field.to_string() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32, ClassifierError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self, field: &str) -> Result<String, ClassifierError> {
        let n = self.u32(field)? as usize;
        let b = self.take(n, field)?;
        String::from_utf8(b.to_vec()).map_err(|_| ClassifierError::Format(format!("{field} is not valid UTF-8")))
    }

    fn f64s(&mut self, n: usize, field: &str) -> Result<Vec<f64>, ClassifierError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| ClassifierError::Format(format!("{field} too large")))?, field)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn read_model(r: &mut impl Read) -> Result<BeliefModel, ClassifierError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(ClassifierError::Format("bad magic header; not a belief model file".into()));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(ClassifierError::Version { found: version, expected: FORMAT_VERSION });
    }
    let mut header = [0usize; 5];
    for (slot, name) in header.iter_mut().zip(["dims.V", "dims.D", "dims.H", "dims.C", "dims.L"]) {
        *slot = cur.u32(name)? as usize;
    }
    let [vocab_size, embed, hidden, classes, seq_len] = header;
    let dims = Dims::new(vocab_size, embed, hidden, classes);

    let n_labels = cur.u32("labels.count")? as usize;
    if n_labels != classes {
        return Err(ClassifierError::Shape(format!("labels: header declares C={classes} but file lists {n_labels}")));
    }
    let labels = (0..n_labels).map(|i| cur.string(&format!("labels[{i}]"))).collect::<Result<Vec<_>, _>>()?;

    let n_words = cur.u32("vocab.count")? as usize;
    if n_words != vocab_size {
        return Err(ClassifierError::Shape(format!("vocab: header declares V={vocab_size} but file lists {n_words}")));
    }
    let words = (0..n_words).map(|i| cur.string(&format!("vocab[{i}]"))).collect::<Result<Vec<_>, _>>()?;
    let vocab = Vocabulary::from_words(words);
    if vocab.len() != n_words {
        return Err(ClassifierError::Format("vocab contains duplicate words".into()));
    }

    let n_tensors = cur.u32("tensors.count")? as usize;
    let mut tensors: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
    for i in 0..n_tensors {
        let name = cur.string(&format!("tensors[{i}].name"))?;
        let ndim = cur.u32(&format!("{name}.ndim"))? as usize;
        if ndim > 2 {
            return Err(ClassifierError::Shape(format!("tensor {name} has {ndim} dimensions")));
        }
        let shape = (0..ndim).map(|_| cur.u32(&format!("{name}.shape")).map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = shape.iter().product();
        let values = cur.f64s(count, &name)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::Format(format!("tensor {name} contains non-finite values")));
        }
        tensors.insert(name, (shape, values));
    }
    if cur.pos != buf.len() {
        return Err(ClassifierError::Format(format!("{} trailing bytes after tensors", buf.len() - cur.pos)));
    }

    let expected = ModelParams::shapes(dims);
    let mut take = |idx: usize| -> Result<Vec<f64>, ClassifierError> {
        let name = TENSOR_NAMES[idx];
        let (shape, values) = tensors
            .remove(name)
            .ok_or_else(|| ClassifierError::Format(format!("missing tensor {name}")))?;
        if shape != expected[idx] {
            return Err(ClassifierError::Shape(format!("tensor {name}: expected shape {:?}, found {shape:?}", expected[idx])));
        }
        Ok(values)
    };
    let mat = |idx: usize, data: Vec<f64>| Matrix { rows: expected[idx][0], cols: expected[idx][1], data };
    let params = ModelParams {
        dims,
        embedding: mat(0, take(0)?),
        lstm_w: mat(1, take(1)?),
        lstm_u: mat(2, take(2)?),
        lstm_b: take(3)?,
        dense_w: mat(4, take(4)?),
        dense_b: take(5)?,
    };
    BeliefModel::new(labels, vocab, params, seq_len)
}

pub fn save_model(model: &BeliefModel, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BeliefModel, ClassifierError> {
    read_model(&mut BufReader::new(File::open(path)?))
}
