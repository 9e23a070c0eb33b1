//! Named, ordered parameter collections and their binding onto a tape.

use indexmap::IndexMap;
use rand::Rng;

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::arg(format!("duplicate parameter name {name}")));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    /// Adds a tensor drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn insert_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<()> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound));
        self.insert(name, value)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.values_mut()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Applies `f` elementwise to every entry whose name satisfies `pred`.
    pub fn map_matching(&mut self, pred: impl Fn(&str) -> bool, f: impl Fn(f64) -> f64) {
        for (name, t) in self.entries.iter_mut() {
            if pred(name) {
                *t = t.map(&f);
            }
        }
    }

    /// Places every parameter on the tape; frozen stores become constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), tape.leaf(v.clone(), trainable)))
            .collect();
        Bound { vars }
    }

    /// Copies all entries of `other` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamStore) -> Result<()> {
        for (k, v) in other.iter() {
            self.insert(format!("{prefix}{k}"), v.clone())?;
        }
        Ok(())
    }

    /// Entries whose names start with `prefix`, with the prefix removed.
    pub fn strip_prefix(&self, prefix: &str) -> ParamStore {
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
            .collect();
        ParamStore { entries }
    }

    /// Checks that `self` has exactly the names and shapes of `reference`.
    pub fn check_layout(&self, reference: &ParamStore) -> Result<()> {
        let missing: Vec<&str> = reference.names().filter(|n| self.get(n).is_none()).collect();
        let extra: Vec<&str> = self.names().filter(|n| reference.get(n).is_none()).collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::config(format!(
                "parameter mismatch: missing [{}], extra [{}]",
                missing.join(", "),
                extra.join(", ")
            )));
        }
        for (name, t) in reference.iter() {
            let got = &self.entries[name];
            if got.shape() != t.shape() {
                return Err(Error::config(format!(
                    "parameter {name}: expected shape {:?}, got {:?}",
                    t.shape(),
                    got.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Tape handles of a bound [`ParamStore`], in store order.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: IndexMap<String, Var>,
}

impl Bound {
    /// Binds names to existing tape variables.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Var)>) -> Self {
        Bound {
            vars: pairs.into_iter().collect(),
        }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::State(format!("parameter {name} is not bound")))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars.values().copied()
    }

    /// Gradients in store order; entries without a gradient are zero-filled.
    pub fn gradients(&self, tape: &Tape, grads: &mut Gradients) -> Vec<Tensor> {
        self.vars
            .values()
            .map(|&v| {
                grads
                    .take(v)
                    .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape().to_vec()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamStore::new();
        p.insert("a", Tensor::scalar(1.0)).unwrap();
        assert!(p.insert("a", Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn uniform_init_respects_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut p = ParamStore::new();
        p.insert_uniform("w", vec![4, 9], 9, &mut rng).unwrap();
        assert!(p.get("w").unwrap().data().iter().all(|v| v.abs() < 1.0 / 3.0));
    }

    #[test]
    fn layout_check_lists_names() {
        let mut a = ParamStore::new();
        a.insert("x", Tensor::scalar(0.0)).unwrap();
        let mut b = ParamStore::new();
        b.insert("y", Tensor::scalar(0.0)).unwrap();
        let msg = a.check_layout(&b).unwrap_err().to_string();
        assert!(msg.contains("missing [y]") && msg.contains("extra [x]"), "{msg}");
    }
}
