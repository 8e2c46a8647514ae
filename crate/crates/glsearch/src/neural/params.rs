//! Named parameter blocks with aligned gradient and optimizer buffers.

use super::tensor::Mat;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct BlockDef {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// The learnable parameters: a list of named matrices. Values are shared
/// with tapes through `Arc`, so reading a block is free and updates
/// copy-on-write only while a tape still holds the old version.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    defs: Vec<BlockDef>,
    values: Vec<Arc<Mat>>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    /// Registers a block filled by `init(row, col)` and returns its id.
    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: &mut dyn FnMut(usize, usize) -> f64) -> usize {
        assert!(!self.by_name.contains_key(name), "duplicate block {name}");
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, init(i, j));
            }
        }
        let id = self.defs.len();
        self.defs.push(BlockDef { name: name.to_string(), rows, cols });
        self.values.push(Arc::new(m));
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn block_count(&self) -> usize {
        self.defs.len()
    }

    pub fn def(&self, id: usize) -> &BlockDef {
        &self.defs[id]
    }

    pub fn id(&self, name: &str) -> usize {
        *self.by_name.get(name).unwrap_or_else(|| panic!("unknown block {name}"))
    }

    pub fn value(&self, id: usize) -> Arc<Mat> {
        Arc::clone(&self.values[id])
    }

    pub fn set_coord(&mut self, id: usize, flat_idx: usize, v: f64) {
        Arc::make_mut(&mut self.values[id]).data[flat_idx] = v;
    }

    pub fn apply_update(&mut self, id: usize, update: impl Fn(usize, f64) -> f64) {
        let m = Arc::make_mut(&mut self.values[id]);
        for (idx, x) in m.data.iter_mut().enumerate() {
            *x = update(idx, *x);
        }
    }

    pub fn copy_from(&mut self, other: &ParamSet) {
        assert_eq!(self.defs.len(), other.defs.len());
        for (mine, theirs) in self.values.iter_mut().zip(other.values.iter()) {
            *mine = Arc::clone(theirs);
        }
    }

    pub fn total_len(&self) -> usize {
        self.defs.iter().map(|d| d.rows * d.cols).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BlockDef, &Arc<Mat>)> {
        self.defs.iter().zip(self.values.iter())
    }
}

/// Per-block gradient accumulator matching a [`ParamSet`] layout.
#[derive(Debug, Clone)]
pub struct GradBuf {
    mats: Vec<Mat>,
}

impl GradBuf {
    pub fn like(params: &ParamSet) -> GradBuf {
        GradBuf {
            mats: params.defs.iter().map(|d| Mat::zeros(d.rows, d.cols)).collect(),
        }
    }

    pub fn zero(&mut self) {
        for m in &mut self.mats {
            m.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn accumulate(&mut self, block: usize, g: &Mat) {
        self.mats[block].add_assign(g);
    }

    pub fn value(&self, block: usize) -> &Mat {
        &self.mats[block]
    }

    pub fn scale(&mut self, c: f64) {
        for m in &mut self.mats {
            m.data.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.mats.iter().map(Mat::max_abs).fold(0.0, f64::max)
    }
}
