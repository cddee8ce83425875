//! Batch optimizers over flat parameter vectors.

mod scg;
mod sgd;

pub use scg::{scg_minimize, ScgOutcome, ScgSettings, ScgState};
pub use sgd::{sgd_train, SgdConfig, SgdOutcome};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// `(loss, gradient)` at a parameter vector.
pub type Evaluation = (f64, Vec<f64>);

/// Renders a loss trace as two-column CSV (`iteration,loss`).
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, loss) in trace.iter().enumerate() {
        writeln!(out, "{i},{loss}").unwrap();
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_format() {
        assert_eq!(trace_csv(&[1.5, 0.25]), "iteration,loss\n0,1.5\n1,0.25\n");
    }
}
