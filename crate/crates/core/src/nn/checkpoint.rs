//! Text checkpoints for Q-networks.
//!
//! ```text
//! kgtrader-qnet 1
//! network plain|dueling
//! mlp <name> <layer count>
//! layer <inputs> <outputs> <relu|identity>
//! weights <row-major values>
//! biases <values>
//! ...
//! end
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so loading
//! a checkpoint reproduces every parameter bit for bit.

use std::fmt::Write as _;

use crate::env::{NUM_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};

use super::layer::{Activation, DenseLayer, Mlp};
use super::qnet::{DuelingQNetwork, QModel, QNetwork};

const MAGIC: &str = "kgtrader-qnet 1";

fn write_mlp(out: &mut String, name: &str, mlp: &Mlp) {
    let _ = writeln!(out, "mlp {name} {}", mlp.layers.len());
    for l in &mlp.layers {
        let _ = writeln!(out, "layer {} {} {}", l.inputs, l.outputs, l.activation.name());
        out.push_str("weights");
        for w in &l.weights {
            let _ = write!(out, " {w}");
        }
        out.push_str("\nbiases");
        for b in &l.biases {
            let _ = write!(out, " {b}");
        }
        out.push('\n');
    }
}

pub fn to_text(model: &QModel) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    match model {
        QModel::Plain(n) => {
            out.push_str("network plain\n");
            write_mlp(&mut out, "net", &n.mlp);
        }
        QModel::Dueling(n) => {
            out.push_str("network dueling\n");
            write_mlp(&mut out, "trunk", &n.trunk);
            write_mlp(&mut out, "value", &n.value);
            write_mlp(&mut out, "advantage", &n.advantage);
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))
    }

    fn expect(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next()?;
        let mut parts = line.split_ascii_whitespace();
        if parts.next() != Some(keyword) {
            return Err(Error::Checkpoint(format!("line {n}: expected `{keyword}`")));
        }
        Ok((n, parts.collect()))
    }
}

fn parse_num<T: std::str::FromStr>(n: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Checkpoint(format!("line {n}: bad number `{s}`")))
}

fn parse_values(n: usize, parts: &[&str], expected: usize) -> Result<Vec<f64>> {
    if parts.len() != expected {
        return Err(Error::Checkpoint(format!(
            "line {n}: expected {expected} values, found {}",
            parts.len()
        )));
    }
    let values: Vec<f64> = parts.iter().map(|p| parse_num(n, p)).collect::<Result<_>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint(format!("line {n}: non-finite parameter")));
    }
    Ok(values)
}

fn read_mlp(lines: &mut Lines<'_>, name: &str) -> Result<Mlp> {
    let (n, head) = lines.expect("mlp")?;
    if head.len() != 2 || head[0] != name {
        return Err(Error::Checkpoint(format!("line {n}: expected `mlp {name} <count>`")));
    }
    let count: usize = parse_num(n, head[1])?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, spec) = lines.expect("layer")?;
        if spec.len() != 3 {
            return Err(Error::Checkpoint(format!("line {n}: malformed layer header")));
        }
        let inputs: usize = parse_num(n, spec[0])?;
        let outputs: usize = parse_num(n, spec[1])?;
        let activation = Activation::parse(spec[2])
            .ok_or_else(|| Error::Checkpoint(format!("line {n}: unknown activation `{}`", spec[2])))?;
        if let Some(prev) = layers.last().map(|l: &DenseLayer| l.outputs) {
            if prev != inputs {
                return Err(Error::Checkpoint(format!(
                    "line {n}: layer expects {inputs} inputs but previous layer has {prev} outputs"
                )));
            }
        }
        let (n, w) = lines.expect("weights")?;
        let weights = parse_values(n, &w, inputs * outputs)?;
        let (n, b) = lines.expect("biases")?;
        let biases = parse_values(n, &b, outputs)?;
        layers.push(DenseLayer {
            inputs,
            outputs,
            weights,
            biases,
            activation,
        });
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint(format!("mlp {name} has no layers")));
    }
    Ok(Mlp { layers })
}

fn check_dims(mlp: &Mlp, input: usize, output: usize, what: &str) -> Result<()> {
    if mlp.input_dim() != input || mlp.output_dim() != output {
        return Err(Error::Checkpoint(format!(
            "{what} has shape {}→{}, expected {input}→{output}",
            mlp.input_dim(),
            mlp.output_dim()
        )));
    }
    Ok(())
}

pub fn from_text(text: &str) -> Result<QModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, first) = lines.next()?;
    if first.trim() != MAGIC {
        return Err(Error::Checkpoint(format!("unsupported header `{first}`")));
    }
    let (n, kind) = lines.expect("network")?;
    let model = match kind.as_slice() {
        ["plain"] => {
            let mlp = read_mlp(&mut lines, "net")?;
            check_dims(&mlp, STATE_DIM, NUM_ACTIONS, "network")?;
            QModel::Plain(QNetwork { mlp })
        }
        ["dueling"] => {
            let trunk = read_mlp(&mut lines, "trunk")?;
            let value = read_mlp(&mut lines, "value")?;
            let advantage = read_mlp(&mut lines, "advantage")?;
            check_dims(&trunk, STATE_DIM, trunk.output_dim(), "trunk")?;
            check_dims(&value, trunk.output_dim(), 1, "value head")?;
            check_dims(&advantage, trunk.output_dim(), NUM_ACTIONS, "advantage head")?;
            QModel::Dueling(DuelingQNetwork {
                trunk,
                value,
                advantage,
            })
        }
        _ => return Err(Error::Checkpoint(format!("line {n}: unknown network kind"))),
    };
    lines.expect("end")?;
    Ok(model)
}
