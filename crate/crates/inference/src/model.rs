//! Model files and their fixed-point conversion.
//!
//! ```text
//! mlp v1
//! n 2
//! activation DEGREE LO HI
//! layers L
//! dense ROWS COLS
//! w w w ...        (ROWS lines of COLS floats)
//! ```
//!
//! Layers are bias-free. Every layer but the last is followed by the
//! activation.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::pow;

use crate::activation::{fit_relu_poly, PolyActivation, ReluFit};
use crate::fixed::to_fixed;
use crate::InferenceError;

const HEADER: &str = "mlp v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FloatModel {
    pub n: u32,
    pub degree: usize,
    pub interval: (f64, f64),
    /// `layers[i][row][col]`, mapping `cols` inputs to `rows` outputs.
    pub layers: Vec<Vec<Vec<f64>>>,
}

fn err(line: usize, message: impl Into<String>) -> InferenceError {
    InferenceError::Model {
        line,
        message: message.into(),
    }
}

impl FloatModel {
    pub fn parse(text: &str) -> Result<Self, InferenceError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("missing {what}")));

        let (ln, l) = next("header")?;
        if l != HEADER {
            return Err(err(ln, format!("expected `{HEADER}`")));
        }
        let field = |(ln, l): (usize, &str), key: &str, count: usize| -> Result<Vec<String>, InferenceError> {
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(err(ln, format!("expected `{key}`")));
            }
            let rest: Vec<String> = parts.map(str::to_owned).collect();
            if rest.len() != count {
                return Err(err(ln, format!("`{key}` takes {count} values")));
            }
            Ok(rest)
        };
        let num = |ln: usize, s: &str| s.parse::<f64>().map_err(|_| err(ln, format!("bad number `{s}`")));
        let int = |ln: usize, s: &str| s.parse::<usize>().map_err(|_| err(ln, format!("bad count `{s}`")));

        let l = next("n")?;
        let n = int(l.0, &field(l, "n", 1)?[0])? as u32;
        let l = next("activation")?;
        let a = field(l, "activation", 3)?;
        let degree = int(l.0, &a[0])?;
        let interval = (num(l.0, &a[1])?, num(l.0, &a[2])?);
        let l = next("layers")?;
        let count = int(l.0, &field(l, "layers", 1)?[0])?;
        if count == 0 {
            return Err(err(l.0, "no layers"));
        }

        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let l = next("dense")?;
            let d = field(l, "dense", 2)?;
            let (rows, cols) = (int(l.0, &d[0])?, int(l.0, &d[1])?);
            if let Some(prev) = layers.last().map(|p: &Vec<Vec<f64>>| p.len()) {
                if prev != cols {
                    return Err(err(l.0, format!("layer takes {cols} inputs, previous gives {prev}")));
                }
            }
            let mut m = Vec::with_capacity(rows);
            for _ in 0..rows {
                let (ln, row) = next("weights")?;
                let row: Vec<f64> = row.split_whitespace().map(|s| num(ln, s)).collect::<Result<_, _>>()?;
                if row.len() != cols {
                    return Err(err(ln, format!("expected {cols} weights, got {}", row.len())));
                }
                if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                    return Err(err(ln, format!("non-finite weight {bad}")));
                }
                m.push(row);
            }
            layers.push(m);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content"));
        }
        Ok(Self {
            n,
            degree,
            interval,
            layers,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, InferenceError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{HEADER}\nn {}\nactivation {} {:?} {:?}\nlayers {}\n",
            self.n,
            self.degree,
            self.interval.0,
            self.interval.1,
            self.layers.len()
        );
        for m in &self.layers {
            out.push_str(&format!("dense {} {}\n", m.len(), m.first().map_or(0, Vec::len)));
            for row in m {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].first().map_or(0, Vec::len)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, Vec::len)
    }

    pub fn fit(&self) -> Result<ReluFit, InferenceError> {
        fit_relu_poly(self.degree, self.interval.0, self.interval.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointModel {
    pub n: u32,
    /// `floor(10^n w)` per weight.
    pub layers: Vec<Vec<Vec<BigInt>>>,
    /// `l_i`: extra powers of `10^n` layer `i` adds beyond the weights'
    /// own. The activation degree for hidden layers, 0 for the output.
    pub ledger: Vec<u32>,
    pub act: PolyActivation,
}

impl FixedPointModel {
    pub fn from_float(model: &FloatModel) -> Result<Self, InferenceError> {
        let act = model.fit()?.to_fixed(model.n)?;
        let layers = model
            .layers
            .iter()
            .map(|m| {
                m.iter()
                    .map(|row| row.iter().map(|&w| to_fixed(w, model.n)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let last = model.layers.len() - 1;
        let ledger = (0..model.layers.len())
            .map(|i| if i < last { act.degree() as u32 } else { 0 })
            .collect();
        Ok(Self {
            n: model.n,
            layers,
            ledger,
            act,
        })
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].first().map_or(0, Vec::len)
    }

    /// `10^(n(1 + l_i))`: total divisor that brings layer `i`'s output back
    /// to the `10^n` grid. Applied as `10^n` after the dense product and
    /// `10^(n l_i)` after the activation.
    pub fn magnification(&self, layer: usize) -> BigInt {
        pow(BigInt::from(10), self.n as usize * (1 + self.ledger[layer] as usize))
    }

    pub fn scale(&self) -> BigInt {
        pow(BigInt::from(10), self.n as usize)
    }

    pub fn is_hidden(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len()
    }
}
