use std::time::Instant;

use sensecomm::dataset::synthetic;
use sensecomm::models::{train, ModelConfig, TrainConfig};

fn main() {
    let data = synthetic(5_000, 1_000, 1);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let (_, h) = train::<f32>(&data, &ModelConfig::default(), &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    println!("{h:?}");
    println!("{secs:.2}s for 5000 train + 1000 eval samples");
    println!(
        "projected 5-epoch CIFAR run: {:.1} min",
        secs / 6_000.0 * 5.0 * 60_000.0 / 60.0
    );
}
