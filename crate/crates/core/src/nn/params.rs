use crate::error::{Error, Result};
use crate::tensor::{Gradients, Tape, Tensor, Var};

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

/// Tape handles for a [`ParamSet`] bound for one forward/backward pass, in
/// the set's iteration order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<(String, Var)>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name:?}")))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars.iter().map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.vars.iter().map(|(n, _)| n.as_str())
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::Contract(format!("duplicate parameter name {name:?}")));
        }
        self.entries.push((name, tensor.with_requires_grad(true)));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Same names in the same order with the same per-name shapes.
    pub fn shape_compatible(&self, other: &ParamSet) -> bool {
        self.first_incompatibility(other).is_none()
    }

    pub(crate) fn first_incompatibility(&self, other: &ParamSet) -> Option<String> {
        for (i, (name, t)) in self.entries.iter().enumerate() {
            match other.entries.get(i) {
                Some((n, o)) if n == name && o.shape() == t.shape() => {}
                Some((n, o)) if n == name => {
                    return Some(format!(
                        "{name} has shapes {:?} and {:?}",
                        t.shape(),
                        o.shape()
                    ))
                }
                _ => return Some(name.clone()),
            }
        }
        other
            .entries
            .get(self.entries.len())
            .map(|(n, _)| n.clone())
    }

    /// Records every parameter as a gradient-requiring leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), tape.leaf(t.clone())))
                .collect(),
        }
    }

    /// Records every parameter as a constant, for inference.
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), tape.constant(t.clone())))
                .collect(),
        }
    }

    /// Copies gradients from a backward pass into each tensor's grad slot.
    pub fn attach_grads(&mut self, bound: &BoundParams, grads: &mut Gradients) -> Result<()> {
        for ((name, tensor), (bound_name, var)) in self.entries.iter_mut().zip(&bound.vars) {
            debug_assert_eq!(name, bound_name);
            let g = grads
                .take(*var)
                .ok_or_else(|| Error::Contract(format!("no gradient for {name}")))?;
            tensor.set_grad(g)?;
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for (_, t) in self.entries.iter_mut() {
            t.clear_grad();
        }
    }

    /// All values concatenated in iteration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|(_, t)| t.data().iter().copied())
            .collect()
    }

    /// Inverse of [`ParamSet::flatten`].
    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_scalars() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_scalars()
            )));
        }
        let mut offset = 0;
        for (_, t) in self.entries.iter_mut() {
            let n = t.numel();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Gradients concatenated in iteration order; missing slots read as zero.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|(_, t)| match t.grad() {
                Some(g) => g.to_vec(),
                None => vec![0.0; t.numel()],
            })
            .collect()
    }
}

/// Elementwise mean of two shape-compatible parameter sets.
pub fn average_weights(a: &ParamSet, b: &ParamSet) -> Result<ParamSet> {
    if let Some(name) = a.first_incompatibility(b) {
        return Err(Error::Contract(format!(
            "cannot average incompatible parameter sets: {name}"
        )));
    }
    let mut out = ParamSet::new();
    for ((name, ta), (_, tb)) in a.iter().zip(b.iter()) {
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x + y) / 2.0)
            .collect();
        out.insert(name, Tensor::new(ta.shape().to_vec(), data)?)?;
    }
    Ok(out)
}
