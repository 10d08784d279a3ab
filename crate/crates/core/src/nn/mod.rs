//! The two-branch relationship classifier, trained from scratch.

mod gradcheck;
mod io;
pub mod kernels;
mod model;
mod tensor;
mod train;

pub use gradcheck::{gradient_check, relative_error, GradCheckReport, GRADCHECK_FLOOR};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION};
pub use model::{
    Activations, Architecture, ClassifierModel, DropoutMasks, DropoutRates, FeatureScaler, ModelConfig,
    Params, Shapes,
};
pub use tensor::Tensor;
pub use train::{train, Adam, EpochStats, TrainConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simmat::{PairFeatures, SimilarityMatrix};
    use crate::types::{PairExample, Provenance, RelationshipLabel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use RelationshipLabel::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            matrix_size: 10,
            pair_dim: 6,
            architecture: Architecture {
                conv1_filters: 2,
                conv2_filters: 3,
                kernel_size: 3,
                pair_hidden: 4,
                merge_hidden: 5,
            },
            dropout: DropoutRates::default(),
            classes: vec![SameWork, Contains, Different],
        }
    }

    fn random_inputs(rng: &mut ChaCha8Rng, side: usize, dim: usize) -> (SimilarityMatrix, PairFeatures) {
        let values = (0..side * side).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let matrix = SimilarityMatrix {
            size: side,
            left_chunks: side,
            right_chunks: side,
            values,
        };
        let vector = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        (matrix, PairFeatures { vector, d: dim / 2 })
    }

    #[test]
    fn shapes_follow_the_architecture() {
        let mut c = tiny_config();
        c.matrix_size = 32;
        let s = c.shapes().unwrap();
        assert_eq!((s.conv1, s.pool1, s.conv2, s.pool2), (30, 15, 13, 6));
        assert_eq!(s.flat, 3 * 36);
        c.matrix_size = 9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn softmax_output_sums_to_one_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = ClassifierModel::init(tiny_config(), &mut rng, 3).unwrap();
        let (m, p) = random_inputs(&mut rng, 10, 6);
        let a = model.forward(&m, &p, None).unwrap();
        let b = model.forward(&m, &p, None).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(a.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = ClassifierModel::init(tiny_config(), &mut rng, 3).unwrap();
        let (m, p) = random_inputs(&mut rng, 12, 6);
        assert!(model.forward(&m, &p, None).is_err());
        let (m, p) = random_inputs(&mut rng, 10, 8);
        assert!(model.forward(&m, &p, None).is_err());
    }

    #[test]
    fn zero_input_reduces_to_the_bias_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = ClassifierModel::init(tiny_config(), &mut rng, 11).unwrap();
        for b in [&mut model.params.conv1_b, &mut model.params.conv2_b, &mut model.params.pair_b] {
            for x in b.data.iter_mut() {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
        let c = model.config.clone();
        let s = c.shapes().unwrap();
        let a = c.architecture;
        let p = &model.params;
        let relu = |x: f64| x.max(0.0);

        // With a zero input every conv1 map is the constant relu(b1), so every
        // conv2 map is constant too.
        let h1: Vec<f64> = p.conv1_b.data.iter().map(|&b| relu(b)).collect();
        let h2: Vec<f64> = (0..a.conv2_filters)
            .map(|o| {
                let mut acc = p.conv2_b.data[o];
                for (c_in, h) in h1.iter().enumerate() {
                    for t in 0..9 {
                        acc += p.conv2_w.data[(o * a.conv1_filters + c_in) * 9 + t] * h;
                    }
                }
                relu(acc)
            })
            .collect();
        let mut merge_in = Vec::new();
        for h in &h2 {
            merge_in.extend(std::iter::repeat(*h).take(s.pool2 * s.pool2));
        }
        merge_in.extend(p.pair_b.data.iter().map(|&b| relu(b)));
        let n_in = merge_in.len();
        let hidden: Vec<f64> = (0..a.merge_hidden)
            .map(|o| {
                relu(
                    p.merge_b.data[o]
                        + (0..n_in).map(|i| p.merge_w.data[o * n_in + i] * merge_in[i]).sum::<f64>(),
                )
            })
            .collect();
        let logits: Vec<f64> = (0..c.classes.len())
            .map(|o| {
                p.out_b.data[o]
                    + (0..a.merge_hidden)
                        .map(|i| p.out_w.data[o * a.merge_hidden + i] * hidden[i])
                        .sum::<f64>()
            })
            .collect();
        let expected = kernels::softmax(&logits);

        let matrix = SimilarityMatrix {
            size: 10,
            left_chunks: 0,
            right_chunks: 0,
            values: vec![0.0; 100],
        };
        let pair = PairFeatures {
            vector: vec![0.0; 6],
            d: 3,
        };
        let got = model.forward(&matrix, &pair, None).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let model = ClassifierModel::init(tiny_config(), &mut rng, trial).unwrap();
            let (m, p) = random_inputs(&mut rng, 10, 6);
            let target = model.config.classes[trial as usize % 3];
            let report = gradient_check(&model, &m, &p, target, 1e-4).unwrap();
            assert!(report.checked > 0);
            assert!(report.max_relative_error < 1e-4, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn each_branch_passes_gradient_check_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = ClassifierModel::init(tiny_config(), &mut rng, 8).unwrap();
        let (m, p) = random_inputs(&mut rng, 10, 6);
        let zero_m = SimilarityMatrix {
            values: vec![0.0; 100],
            ..m.clone()
        };
        let zero_p = PairFeatures {
            vector: vec![0.0; 6],
            d: 3,
        };
        for (mm, pp) in [(&zero_m, &p), (&m, &zero_p)] {
            let report = gradient_check(&model, mm, pp, Contains, 1e-4).unwrap();
            assert!(report.max_relative_error < 1e-4, "{report:?}");
        }
    }

    #[test]
    fn gradient_check_rejects_nonpositive_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = ClassifierModel::init(tiny_config(), &mut rng, 1).unwrap();
        let (m, p) = random_inputs(&mut rng, 10, 6);
        assert!(gradient_check(&model, &m, &p, Contains, 0.0).is_err());
        assert!(gradient_check(&model, &m, &p, Contains, -1e-3).is_err());
    }

    #[test]
    fn scaling_the_loss_scales_the_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = ClassifierModel::init(tiny_config(), &mut rng, 2).unwrap();
        let (m, p) = random_inputs(&mut rng, 10, 6);
        let acts = model.forward_cached(&m, &p, None).unwrap();
        let mut g1 = Params::zeros(&model.config).unwrap();
        let mut g2 = g1.clone();
        model.backward(&acts, 1, 1.0, &mut g1);
        model.backward(&acts, 1, 2.0, &mut g2);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn confident_correct_prediction_has_no_output_bias_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = ClassifierModel::init(tiny_config(), &mut rng, 4).unwrap();
        model.params.out_w.fill(0.0);
        model.params.out_b.data = vec![-800.0, 800.0, -800.0];
        let (m, p) = random_inputs(&mut rng, 10, 6);
        let g = model.gradients(&m, &p, Contains).unwrap();
        assert!(g.out_b.data.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn predict_breaks_ties_toward_the_first_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = ClassifierModel::init(tiny_config(), &mut rng, 4).unwrap();
        model.params.out_w.fill(0.0);
        model.params.out_b.data = vec![0.3, 0.3, 0.1];
        let (m, p) = random_inputs(&mut rng, 10, 6);
        let (label, probs) = model.predict(&m, &p).unwrap();
        assert_eq!(label, SameWork);
        assert_eq!(probs[0], probs[1]);
        model.params.out_b.data = vec![0.1, 0.7, 0.2];
        assert_eq!(model.predict(&m, &p).unwrap().0, Contains);
        assert_eq!(kernels::argmax(&[0.5, 0.5]), 0);
    }

    /// Class 0 has a bright diagonal, class 1 a bright anti-diagonal.
    fn toy_set(n: usize, seed: u64) -> Vec<PairExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let diagonal = i % 2 == 0;
                let mut values = vec![0.0f32; 100];
                for r in 0..10 {
                    for c in 0..10 {
                        let on = if diagonal { r == c } else { r + c == 9 };
                        values[r * 10 + c] = if on { 0.9 } else { 0.0 } + rng.gen_range(0.0..0.2);
                    }
                }
                PairExample {
                    left_id: format!("l{i}"),
                    right_id: format!("r{i}"),
                    matrix: SimilarityMatrix {
                        size: 10,
                        left_chunks: 10,
                        right_chunks: 10,
                        values,
                    },
                    features: PairFeatures {
                        vector: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        d: 3,
                    },
                    label: if diagonal { Contains } else { Different },
                    provenance: Provenance::Real,
                }
            })
            .collect()
    }

    fn toy_train_config(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 50,
            batch_size: 4,
            learning_rate: 1e-2,
            seed,
            architecture: tiny_config().architecture,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data = toy_set(20, 1);
        let (model, history) = train(&data, &[Contains, Different], &toy_train_config(9)).unwrap();
        assert_eq!(history.len(), 50);
        let correct = data
            .iter()
            .filter(|e| model.predict(&e.matrix, &e.features).unwrap().0 == e.label)
            .count();
        assert!(correct as f64 / 20.0 >= 0.95, "{correct}/20");
        // Loss trends down: each 5-epoch window mean is no worse than the first.
        let window = |k: usize| history[k..k + 5].iter().map(|h| h.mean_loss).sum::<f64>() / 5.0;
        assert!(window(45) < window(0));
        for k in (5..=45).step_by(5) {
            assert!(window(k) <= window(0) + 1e-9, "window at {k}");
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = toy_set(12, 2);
        let mut cfg = toy_train_config(4);
        cfg.epochs = 3;
        let (a, ha) = train(&data, &[Contains, Different], &cfg).unwrap();
        let (b, hb) = train(&data, &[Contains, Different], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        cfg.seed = 5;
        let (c, _) = train(&data, &[Contains, Different], &cfg).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let data = toy_set(4, 2);
        let mut cfg = toy_train_config(1);
        let empty: Vec<PairExample> = Vec::new();
        assert!(train(&empty, &[Contains, Different], &cfg).is_err());
        assert!(train(&data, &[Contains, SameWork], &cfg).is_err());
        cfg.epochs = 0;
        assert!(train(&data, &[Contains, Different], &cfg).is_err());
        cfg.epochs = 1;
        cfg.learning_rate = 0.0;
        assert!(train(&data, &[Contains, Different], &cfg).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_non_finite_loss() {
        let data = toy_set(8, 3);
        let mut cfg = toy_train_config(1);
        cfg.learning_rate = 1e300;
        cfg.epochs = 5;
        match train(&data, &[Contains, Different], &cfg) {
            Err(crate::Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected a non-finite loss, got {other:?}"),
        }
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let data = toy_set(8, 3);
        let mut cfg = toy_train_config(1);
        cfg.epochs = 2;
        let (model, _) = train(&data, &[Different, Contains], &cfg).unwrap();
        let bytes = model_to_bytes(&model).unwrap();
        let back = model_from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.config.classes, vec![Different, Contains]);
        let e = &data[0];
        assert_eq!(
            back.forward(&e.matrix, &e.features, None).unwrap(),
            model.forward(&e.matrix, &e.features, None).unwrap()
        );

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn damaged_model_files_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = ClassifierModel::init(tiny_config(), &mut rng, 1).unwrap();
        let bytes = model_to_bytes(&model).unwrap();
        for cut in [0, 3, 10, 40, bytes.len() - 1] {
            assert!(model_from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(model_from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(model_from_bytes(&bad), Err(crate::Error::ModelFormat(_))));
        let mut long = bytes;
        long.push(0);
        assert!(model_from_bytes(&long).is_err());
    }
}
