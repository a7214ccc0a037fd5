use serde::{Deserialize, Serialize};

use super::config::compression_rate_percent;
use crate::dataset::{BinaryLabel, ImageSample};
use crate::error::Result;
use crate::models::train::eval_rng;
use crate::models::{predict_all, LinkConfig, ModelParams, Prediction};
use crate::nn::Real;

/// Test-set scores. Vehicle (a transmitter is present) is the positive
/// class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Rows are the true class, columns the predicted class, both in the
    /// order `[animal, vehicle]`.
    pub confusion: [[u64; 2]; 2],
    /// Vehicles classified as animals: `FN / (TP + FN)`.
    pub misdetection_rate: f64,
    /// Animals classified as vehicles: `FP / (TN + FP)`.
    pub false_alarm_rate: f64,
    /// Encoder-1 output size over 3,072, in percent.
    pub compression_rate: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_predictions(samples: &[ImageSample], preds: &[Prediction], output_size: usize) -> Self {
        let mut confusion = [[0u64; 2]; 2];
        for (s, p) in samples.iter().zip(preds) {
            confusion[s.label2().index()][p.label_hat.index()] += 1;
        }
        let [[tn, fp], [fn_, tp]] = confusion;
        let total = tn + fp + fn_ + tp;
        Metrics {
            accuracy: ratio(tn + tp, total),
            confusion,
            misdetection_rate: ratio(fn_, tp + fn_),
            false_alarm_rate: ratio(fp, tn + fp),
            compression_rate: compression_rate_percent(output_size),
            total,
        }
    }

    pub fn count(&self, truth: BinaryLabel, predicted: BinaryLabel) -> u64 {
        self.confusion[truth.index()][predicted.index()]
    }

    /// Compression rate with two decimals, e.g. `0.65%`.
    pub fn compression_label(&self) -> String {
        format!("{:.2}%", self.compression_rate)
    }
}

/// One pass over `testset` with channel draws from the fixed eval seed.
pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    testset: &[ImageSample],
    link: &LinkConfig,
    eval_seed: u64,
) -> Result<Metrics> {
    let preds = predict_all(params, testset, link, &mut eval_rng(eval_seed))?;
    Ok(Metrics::from_predictions(testset, &preds, params.config.n_c1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(label10: u8) -> ImageSample {
        ImageSample::from_hwc(vec![0; crate::dataset::IMAGE_BYTES], label10).unwrap()
    }

    fn pred(label: BinaryLabel) -> Prediction {
        Prediction {
            probs: [0.5, 0.5],
            label_hat: label,
        }
    }

    #[test]
    fn confusion_and_rates() {
        use BinaryLabel::*;
        // 3 animals (one false alarm), 2 vehicles (one misdetection).
        let samples = vec![sample(3), sample(4), sample(5), sample(1), sample(9)];
        let preds = vec![
            pred(Animal),
            pred(Animal),
            pred(Vehicle),
            pred(Vehicle),
            pred(Animal),
        ];
        let m = Metrics::from_predictions(&samples, &preds, 20);
        assert_eq!(m.confusion, [[2, 1], [1, 1]]);
        assert_eq!(m.total, 5);
        assert_eq!(m.accuracy, 3.0 / 5.0);
        assert_eq!(m.misdetection_rate, 0.5);
        assert_eq!(m.false_alarm_rate, 1.0 / 3.0);
        assert_eq!(m.count(Vehicle, Animal), 1);
        assert_eq!(m.compression_label(), "0.65%");
    }
}
