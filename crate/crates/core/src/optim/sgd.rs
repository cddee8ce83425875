use rand::seq::SliceRandom;

use super::Evaluation;
use crate::error::{Error, Result};
use crate::nnet::ParamVector;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SgdOutcome {
    pub params: ParamVector,
    /// Mean batch loss of every epoch, measured before each batch's update.
    pub epoch_losses: Vec<f64>,
}

/// Plain minibatch gradient descent, `theta -= lr * g` per batch, with a
/// seeded shuffle of sample indices each epoch.
///
/// `objective_on_batch(params, indices)` returns the mean loss over the batch
/// and its gradient.
pub fn sgd_train<F>(
    mut objective_on_batch: F,
    init: ParamVector,
    config: &SgdConfig,
    dataset_size: usize,
) -> Result<SgdOutcome>
where
    F: FnMut(&[f64], &[usize]) -> Result<Evaluation>,
{
    config.validate()?;
    if dataset_size == 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut rng = rng::seeded(config.seed);
    let mut params = init;
    let mut order: Vec<usize> = (0..dataset_size).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, indices) in order.chunks(config.batch_size).enumerate() {
            let (loss, grad) = objective_on_batch(&params, indices)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, batch });
            }
            if grad.len() != params.len() {
                return Err(Error::DimensionMismatch(format!(
                    "gradient has {} entries for {} parameters",
                    grad.len(),
                    params.len()
                )));
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
            total += loss * indices.len() as f64;
        }
        epoch_losses.push(total / dataset_size as f64);
    }
    Ok(SgdOutcome {
        params,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(lr: f64, epochs: usize) -> SgdConfig {
        SgdConfig {
            learning_rate: lr,
            batch_size: 1,
            epochs,
            seed: 9,
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let init = ParamVector(vec![0.5, -2.0]);
        let out = sgd_train(
            |_, _| Ok((1.0, vec![0.0, 0.0])),
            init.clone(),
            &config(1e-300, 5),
            3,
        )
        .unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn converges_to_analytic_fixed_point() {
        let out = sgd_train(
            |p, _| Ok(((p[0] - 3.0).powi(2), vec![2.0 * (p[0] - 3.0)])),
            vec![0.0].into(),
            &config(0.1, 100),
            1,
        )
        .unwrap();
        assert!((out.params[0] - 3.0).abs() <= 1e-6);
    }

    #[test]
    fn same_seed_same_result() {
        let data: Vec<f64> = (0..17).map(|i| (i as f64 * 0.37).sin()).collect();
        let run = |seed| {
            let cfg = SgdConfig {
                learning_rate: 0.05,
                batch_size: 4,
                epochs: 6,
                seed,
            };
            sgd_train(
                |p, idx| {
                    let n = idx.len() as f64;
                    let loss = idx.iter().map(|&i| (p[0] - data[i]).powi(2)).sum::<f64>() / n;
                    let g = idx.iter().map(|&i| 2.0 * (p[0] - data[i])).sum::<f64>() / n;
                    Ok((loss, vec![g]))
                },
                vec![1.0].into(),
                &cfg,
                data.len(),
            )
            .unwrap()
        };
        let (a, b) = (run(1), run(1));
        assert_eq!(a.params[0].to_bits(), b.params[0].to_bits());
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_ne!(a.params[0].to_bits(), run(2).params[0].to_bits());
    }

    #[test]
    fn divergence_reports_batch() {
        let err = sgd_train(
            |p, _| Ok((if p[0] > 1.5 { f64::NAN } else { 1.0 }, vec![-1.0])),
            vec![0.0].into(),
            &SgdConfig {
                learning_rate: 1.0,
                batch_size: 1,
                epochs: 1,
                seed: 0,
            },
            4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 0, batch: 2 }));
    }

    #[test]
    fn invalid_config() {
        let bad = SgdConfig {
            learning_rate: 0.0,
            batch_size: 1,
            epochs: 1,
            seed: 0,
        };
        assert!(sgd_train(|_, _| Ok((0.0, vec![])), ParamVector::default(), &bad, 1).is_err());
        let bad = SgdConfig {
            learning_rate: 0.1,
            batch_size: 0,
            epochs: 1,
            seed: 0,
        };
        assert!(sgd_train(|_, _| Ok((0.0, vec![])), ParamVector::default(), &bad, 1).is_err());
    }
}
