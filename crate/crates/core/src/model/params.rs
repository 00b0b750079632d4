//! Flat parameter storage. Every tensor lives in one contiguous buffer so
//! the optimizer and gradient buffers can work on plain slices.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

pub(crate) enum Init {
    Zeros,
    Ones,
    Uniform(f64),
}

/// Named tensors over one flat `f64` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    specs: Vec<TensorSpec>,
    values: Vec<f64>,
}

impl ParamStore {
    pub(crate) fn new() -> Self {
        Self {
            specs: Vec::new(),
            values: Vec::new(),
        }
    }

    pub(crate) fn add<R: Rng>(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut R) -> usize {
        let spec = TensorSpec {
            name: name.to_owned(),
            shape: shape.to_vec(),
            offset: self.values.len(),
        };
        let n = spec.len();
        match init {
            Init::Zeros => self.values.extend(std::iter::repeat_n(0.0, n)),
            Init::Ones => self.values.extend(std::iter::repeat_n(1.0, n)),
            Init::Uniform(a) => self
                .values
                .extend((0..n).map(|_| rng.random_range(-a..a))),
        }
        self.specs.push(spec);
        self.specs.len() - 1
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, id: usize) -> &[f64] {
        &self.values[self.specs[id].range()]
    }

    pub(crate) fn mat(&self, id: usize) -> ArrayView2<'_, f64> {
        let s = &self.specs[id];
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &self.values[s.range()]).unwrap()
    }

    pub(crate) fn vec(&self, id: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.tensor(id))
    }

    pub(crate) fn scalar(&self, id: usize) -> f64 {
        self.values[self.specs[id].offset]
    }

    /// Replaces the values of tensor `id`; `data` must have the same length.
    pub(crate) fn set_tensor(&mut self, id: usize, data: &[f64]) {
        let r = self.specs[id].range();
        self.values[r].copy_from_slice(data);
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }
}

/// A gradient buffer laid out like a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) values: Vec<f64>,
}

impl Gradients {
    pub(crate) fn zeros_like(store: &ParamStore) -> Self {
        Self {
            values: vec![0.0; store.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn mat_mut<'a>(&'a mut self, store: &ParamStore, id: usize) -> ArrayViewMut2<'a, f64> {
        let s = &store.specs[id];
        ArrayViewMut2::from_shape((s.shape[0], s.shape[1]), &mut self.values[s.range()]).unwrap()
    }

    pub(crate) fn vec_mut<'a>(&'a mut self, store: &ParamStore, id: usize) -> ArrayViewMut1<'a, f64> {
        let r = store.specs[id].range();
        ArrayViewMut1::from(&mut self.values[r])
    }

    pub(crate) fn scalar_mut(&mut self, store: &ParamStore, id: usize) -> &mut f64 {
        &mut self.values[store.specs[id].offset]
    }
}
