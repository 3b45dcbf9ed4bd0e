//! Named parameter storage with a stable flat layout, and the checkpoint
//! format: a plain-text manifest followed by little-endian `f64` values.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    /// Uniform in `±bound`.
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    specs: Vec<ParamSpec>,
    index: HashMap<String, ParamId>,
    values: Vec<f64>,
    grads: Vec<f64>,
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore {
            specs: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
            grads: Vec::new(),
        }
    }

    /// Registers a parameter; names must be unique.
    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init, rng: &mut ChaCha8Rng) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(BenoError::InvalidParameter(format!("duplicate parameter {name:?}")));
        }
        let offset = self.values.len();
        let n = rows * cols;
        match init {
            Init::Zeros => self.values.extend(std::iter::repeat_n(0.0, n)),
            Init::Ones => self.values.extend(std::iter::repeat_n(1.0, n)),
            Init::Xavier => {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                self.values.extend((0..n).map(|_| rng.gen_range(-bound..=bound)));
            }
            Init::Uniform(bound) => {
                self.values.extend((0..n).map(|_| rng.gen_range(-bound..=bound)));
            }
        }
        self.grads.extend(std::iter::repeat_n(0.0, n));
        let id = ParamId(self.specs.len());
        self.specs.push(ParamSpec {
            name: name.to_string(),
            rows,
            cols,
            offset,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn spec(&self, id: ParamId) -> &ParamSpec {
        &self.specs[id.0]
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        let s = &self.specs[id.0];
        &self.values[s.offset..s.offset + s.len()]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        let s = &self.specs[id.0];
        &mut self.values[s.offset..s.offset + s.len()]
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        let s = &self.specs[id.0];
        &self.grads[s.offset..s.offset + s.len()]
    }

    /// Total scalar count.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Adds a flat gradient buffer (as returned by a backward pass).
    pub fn accumulate(&mut self, grad: &[f64]) -> Result<()> {
        if grad.len() != self.grads.len() {
            return Err(BenoError::ShapeMismatch(format!(
                "gradient of length {} for {} parameters",
                grad.len(),
                self.grads.len()
            )));
        }
        for (a, g) in self.grads.iter_mut().zip(grad) {
            *a += g;
        }
        Ok(())
    }

    /// Flat index to `(name, offset within the parameter)`.
    pub fn locate(&self, flat: usize) -> Option<(&str, usize)> {
        let k = self.specs.partition_point(|s| s.offset + s.len() <= flat);
        let s = self.specs.get(k)?;
        (flat >= s.offset).then(|| (s.name.as_str(), flat - s.offset))
    }

    pub fn flat_index(&self, name: &str, offset: usize) -> Option<usize> {
        let s = &self.specs[self.id(name)?.0];
        (offset < s.len()).then_some(s.offset + offset)
    }

    /// Writes the checkpoint: text header, `end` line, then raw values.
    /// `meta` lines are stored verbatim in the header.
    pub fn write_checkpoint<W: Write>(&self, mut w: W, meta: &[String]) -> Result<()> {
        writeln!(w, "beno-checkpoint 1")?;
        for line in meta {
            if line.contains('\n') {
                return Err(BenoError::InvalidParameter("metadata line contains a newline".into()));
            }
            writeln!(w, "meta {line}")?;
        }
        for s in &self.specs {
            writeln!(w, "param {} {}x{} {}", s.name, s.rows, s.cols, s.offset)?;
        }
        writeln!(w, "values {}", self.values.len())?;
        writeln!(w, "end")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a checkpoint, returning the store and its `meta` lines.
    pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(ParamStore, Vec<String>)> {
        let mut line = String::new();
        let bad = |m: &str| BenoError::Parse(format!("checkpoint: {m}"));
        r.read_line(&mut line)?;
        if line.trim_end() != "beno-checkpoint 1" {
            return Err(bad("missing magic line"));
        }
        let mut store = ParamStore::new();
        let mut meta = Vec::new();
        let mut total = None;
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(bad("unexpected end of header"));
            }
            let l = line.trim_end_matches('\n');
            if l == "end" {
                break;
            } else if let Some(m) = l.strip_prefix("meta ") {
                meta.push(m.to_string());
            } else if let Some(p) = l.strip_prefix("param ") {
                let parts: Vec<&str> = p.split(' ').collect();
                if parts.len() != 3 {
                    return Err(bad(&format!("bad param line {l:?}")));
                }
                let (rows, cols) = parts[1].split_once('x').ok_or_else(|| bad("bad shape"))?;
                let rows: usize = rows.parse().map_err(|_| bad("bad rows"))?;
                let cols: usize = cols.parse().map_err(|_| bad("bad cols"))?;
                let offset: usize = parts[2].parse().map_err(|_| bad("bad offset"))?;
                if offset != store.values.len() {
                    return Err(bad(&format!("non-contiguous offset for {}", parts[0])));
                }
                let id = ParamId(store.specs.len());
                store.specs.push(ParamSpec {
                    name: parts[0].to_string(),
                    rows,
                    cols,
                    offset,
                });
                store.index.insert(parts[0].to_string(), id);
                store.values.resize(offset + rows * cols, 0.0);
            } else if let Some(n) = l.strip_prefix("values ") {
                total = Some(n.parse::<usize>().map_err(|_| bad("bad value count"))?);
            } else {
                return Err(bad(&format!("unknown header line {l:?}")));
            }
        }
        if total != Some(store.values.len()) {
            return Err(bad("value count disagrees with manifest"));
        }
        let mut buf = [0u8; 8];
        for v in store.values.iter_mut() {
            r.read_exact(&mut buf).map_err(|_| bad("truncated value block"))?;
            *v = f64::from_le_bytes(buf);
        }
        store.grads = vec![0.0; store.values.len()];
        Ok((store, meta))
    }
}

pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
