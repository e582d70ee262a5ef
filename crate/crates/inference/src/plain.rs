//! Plaintext reference pipelines: the exact integer network the blind one
//! must reproduce, and the float network it approximates.

use cmpswhe::modmath::div_round;
use cmpswhe::Rounding;
use num_bigint::BigInt;

use crate::fixed::fixed_pixel;
use crate::model::{FixedPointModel, FloatModel};
use crate::InferenceError;

/// Values at every layer boundary of the fixed-point network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedTrace {
    /// Encoded input, on the `10^n` grid.
    pub input: Vec<BigInt>,
    /// Per layer: dense output (scale `10^(2n)`).
    pub dense: Vec<Vec<BigInt>>,
    /// Per hidden layer: rescaled activation output (scale `10^n`).
    pub hidden: Vec<Vec<BigInt>>,
}

impl FixedTrace {
    pub fn output(&self) -> &[BigInt] {
        self.dense.last().expect("at least one layer")
    }
}

/// First index of the largest entry.
pub fn argmax<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_input(len: usize, want: usize) -> Result<(), InferenceError> {
    if len != want {
        return Err(InferenceError::Dimension(format!("input has {len} values, model takes {want}")));
    }
    Ok(())
}

pub fn trace_fixed(model: &FixedPointModel, pixels: &[u8]) -> Result<FixedTrace, InferenceError> {
    check_input(pixels.len(), model.input_len())?;
    let scale = model.scale();
    let mag = model.act.magnification();
    let input: Vec<BigInt> = pixels.iter().map(|&p| BigInt::from(fixed_pixel(p, model.n))).collect();
    let mut x = input.clone();
    let mut dense = Vec::new();
    let mut hidden = Vec::new();
    for (i, w) in model.layers.iter().enumerate() {
        let z: Vec<BigInt> = w.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        dense.push(z.clone());
        if model.is_hidden(i) {
            x = z
                .iter()
                .map(|v| {
                    let v = div_round(v, &scale, Rounding::Nearest);
                    div_round(&model.act.eval_fixed(&v), &mag, Rounding::Nearest)
                })
                .collect();
            hidden.push(x.clone());
        }
    }
    Ok(FixedTrace { input, dense, hidden })
}

pub fn predict_fixed(model: &FixedPointModel, pixels: &[u8]) -> Result<usize, InferenceError> {
    Ok(argmax(trace_fixed(model, pixels)?.output()))
}

/// Float forward pass with the fitted polynomial in place of ReLU.
pub fn forward_float(model: &FloatModel, pixels: &[u8]) -> Result<Vec<f64>, InferenceError> {
    check_input(pixels.len(), model.input_len())?;
    let fit = model.fit()?;
    let mut x: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let last = model.layers.len() - 1;
    for (i, w) in model.layers.iter().enumerate() {
        let z: Vec<f64> = w.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        x = if i < last { z.iter().map(|&v| fit.eval(v)).collect() } else { z };
    }
    Ok(x)
}

pub fn predict_float(model: &FloatModel, pixels: &[u8]) -> Result<usize, InferenceError> {
    Ok(argmax(&forward_float(model, pixels)?))
}
