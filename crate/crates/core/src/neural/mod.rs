//! Minimal recurrent network core with explicit backpropagation.

mod gradcheck;
mod layers;
mod loss;
mod network;
mod optim;
mod train;

pub use gradcheck::{gradient_check, relative_error, GradCheckReport, FD_STEP, REL_ERROR_FLOOR};
pub use layers::{layer_norm, sigmoid, softmax, Dense, LayerNorm, LayerNormCache, Lstm, LstmCache, LAYER_NORM_EPS};
pub use loss::{bce, mae, Loss, BCE_CLIP};
pub use network::{Activation, Network, SequenceModel};
pub use optim::{clip_global_norm, Adam, AdamConfig};
pub use train::{evaluate_loss, predict_all, train, EarlyStopping, EpochRecord, History, StopSignal, TrainConfig};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_rng;
    use rand::Rng;

    fn random_sequences(n: usize, len: usize, dim: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
        let mut rng = seeded_rng(seed, 0);
        (0..n)
            .map(|_| {
                (0..len)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn small_sequence_model_gradients() {
        let mut rng = seeded_rng(2, 0);
        for act in [Activation::Sigmoid, Activation::Identity] {
            let model = SequenceModel::new(3, 4, act, &mut rng);
            let data: Vec<_> = random_sequences(3, 5, 3, 9).into_iter().zip([0.2, 0.9, 0.6]).collect();
            let loss = if act == Activation::Sigmoid {
                Loss::Bce
            } else {
                Loss::Mae
            };
            let report = gradient_check(&model, &data, loss, FD_STEP).unwrap();
            assert!(report.passes(1e-4), "{act:?}: {}", report.max_rel_error);
        }
    }

    #[test]
    fn patience_trace() {
        let mut s = EarlyStopping::new(4);
        let signals: Vec<_> = [1.0, 0.9, 0.91, 0.92, 0.93, 0.94]
            .iter()
            .map(|&v| s.observe(v))
            .collect();
        assert_eq!(signals[5], StopSignal::Stop);
        assert!(signals[..5].iter().all(|&x| x != StopSignal::Stop));
        assert_eq!(s.best_epoch(), 2);
    }

    fn separable(n: usize, seed: u64) -> Vec<(Vec<Vec<f64>>, f64)> {
        random_sequences(n, 4, 2, seed)
            .into_iter()
            .map(|s| {
                let m: f64 = s.iter().flatten().sum();
                (s, if m > 0.0 { 1.0 } else { 0.0 })
            })
            .collect()
    }

    #[test]
    fn learns_sign_of_mean() {
        let data = separable(200, 4);
        let mut rng = seeded_rng(5, 0);
        let model = SequenceModel::new(2, 8, Activation::Sigmoid, &mut rng);
        let cfg = TrainConfig {
            max_epochs: 50,
            patience: 50,
            ..Default::default()
        };
        let (model, hist) = train(model, &data, &[], &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|(x, t)| (model.predict(x).unwrap() >= 0.5) as u8 as f64 == *t)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95, "{correct}");
        assert!(hist.epochs.len() <= 50);
    }

    #[test]
    fn seeded_training_is_bit_identical() {
        let data = separable(64, 1);
        let run = || {
            let mut rng = seeded_rng(3, 0);
            let model = SequenceModel::new(2, 4, Activation::Sigmoid, &mut rng);
            let cfg = TrainConfig {
                max_epochs: 5,
                ..Default::default()
            };
            train(model, &data[..48], &data[48..], &cfg).unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn sigmoid_head_in_open_interval() {
        let mut rng = seeded_rng(8, 0);
        let model = SequenceModel::new(2, 4, Activation::Sigmoid, &mut rng);
        for s in random_sequences(20, 3, 2, 3) {
            let big: Vec<Vec<f64>> = s.iter().map(|r| r.iter().map(|v| v * 10.0).collect()).collect();
            let y = model.predict(&big).unwrap();
            assert!(y > 0.0 && y < 1.0);
        }
    }

    #[test]
    fn invalid_learning_rate() {
        let mut rng = seeded_rng(8, 0);
        let model = SequenceModel::new(2, 4, Activation::Sigmoid, &mut rng);
        let cfg = TrainConfig {
            lr: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            train(model, &separable(4, 0), &[], &cfg),
            Err(crate::Error::Config(_))
        ));
    }
}
