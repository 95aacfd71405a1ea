use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::array::Array;
use super::graph::{Graph, Tensor};
use crate::error::{Error, Result};

const PROJECTION_SEED: u64 = 0x6772_6164_6368_6b00;

/// Compares reverse-mode gradients against central finite differences.
///
/// `f` builds the function under test from leaf tensors holding `inputs`. A
/// non-scalar output is reduced to a scalar through a fixed pseudo-random
/// projection so every output element contributes with a distinct weight.
///
/// Returns the maximum over all input elements of
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn gradient_check<F>(f: F, inputs: &[Array], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Tensor]) -> Result<Tensor>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Contract(format!(
            "gradient_check epsilon must be in (0, 1e-2], got {epsilon}"
        )));
    }

    let mut graph = Graph::new();
    let leaves: Vec<Tensor> = inputs.iter().map(|a| graph.variable(a.clone())).collect();
    let out = f(&mut graph, &leaves)?;
    let projection = projection_weights(graph.value(out).len());
    let loss = project(&mut graph, out, &projection)?;
    check_finite(&graph, loss, "loss")?;
    let grads = graph.backward(loss)?;

    let mut worst: f64 = 0.0;
    for (which, input) in inputs.iter().enumerate() {
        let analytic = grads.get(leaves[which]).unwrap_or(&[]);
        for idx in 0..input.len() {
            let eval = |delta: f64| -> Result<f64> {
                let mut shifted = inputs.to_vec();
                shifted[which].data_mut()[idx] += delta;
                let mut g = Graph::new();
                let ls: Vec<Tensor> = shifted.into_iter().map(|a| g.variable(a)).collect();
                let out = f(&mut g, &ls)?;
                let loss = project(&mut g, out, &projection)?;
                let v = g.value(loss)[0];
                if !v.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss while perturbing input {which} element {idx}"
                    )));
                }
                Ok(v)
            };
            let numeric = (eval(epsilon)? - eval(-epsilon)?) / (2.0 * epsilon);
            let a = analytic.get(idx).copied().unwrap_or(0.0);
            if !a.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite analytic gradient at input {which} element {idx}"
                )));
            }
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn projection_weights(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    (0..n)
        .map(|_| {
            let m: f64 = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn project(graph: &mut Graph, out: Tensor, weights: &[f64]) -> Result<Tensor> {
    if weights.len() == 1 {
        return Ok(out);
    }
    let shape = graph.shape(out).to_vec();
    let w = graph.constant(Array::new(shape, weights.to_vec())?);
    let prod = graph.mul(out, w)?;
    Ok(graph.sum(prod))
}

fn check_finite(graph: &Graph, t: Tensor, what: &str) -> Result<()> {
    if graph.value(t).iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "non-finite value in {what} (node {})",
            t.id()
        )))
    }
}
