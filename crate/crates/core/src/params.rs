//! Named parameter blocks and matching gradient buffers.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> ParamId {
        assert_eq!(values.len(), shape.iter().product::<usize>());
        self.blocks.push(ParamBlock {
            name: name.into(),
            shape: shape.to_vec(),
            values,
        });
        ParamId(self.blocks.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.blocks[id.0].values
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.blocks[id.0].values
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Total scalar count.
    pub fn num_values(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            blocks: self.blocks.iter().map(|b| vec![0.0; b.values.len()]).collect(),
        }
    }

    /// Replaces every block's values, checking names and shapes match.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.blocks.len() != self.blocks.len() {
            return Err(Error::Compatibility(format!(
                "{} parameter blocks, expected {}",
                other.blocks.len(),
                self.blocks.len()
            )));
        }
        for (mine, theirs) in self.blocks.iter().zip(&other.blocks) {
            if mine.name != theirs.name || mine.shape != theirs.shape {
                return Err(Error::Compatibility(format!(
                    "block {} {:?} does not match {} {:?}",
                    theirs.name, theirs.shape, mine.name, mine.shape
                )));
            }
        }
        for (mine, theirs) in self.blocks.iter_mut().zip(&other.blocks) {
            mine.values.copy_from_slice(&theirs.values);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.values.iter().all(|v| v.is_finite()))
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    blocks: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.blocks[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.blocks
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.blocks.iter_mut().flatten() {
            *v *= factor;
        }
    }

    pub fn fill_zero(&mut self) {
        for b in &mut self.blocks {
            b.fill(0.0);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.blocks.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().flatten().all(|&v| v == 0.0)
    }
}
