use mvpose::losses::LossWeights;
use mvpose::skeleton::Skeleton;
use mvpose::synth::{generate_dataset, CaptureConfig};
use mvpose::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let frames: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(64);
    let noise: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(23.0);
    let total: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(8000);
    let hidden: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(64);
    let lr: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let augment: bool = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(true);
    let angle: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(30.0);

    let sk = Skeleton::default_human();
    let tc = CaptureConfig { n_subjects: 5, frames_per_subject: frames, noise_sigma_mm: noise, pose_angle_deg: angle, rng_seed: 42, ..CaptureConfig::default() };
    let vc = CaptureConfig { n_subjects: 2, frames_per_subject: frames, noise_sigma_mm: noise, pose_angle_deg: angle, rng_seed: 1042, ..CaptureConfig::default() };
    let ds = generate_dataset(&tc, &sk, &[0]).unwrap();
    let val = generate_dataset(&vc, &sk, &[0, 1]).unwrap().labeled;

    // supervised-only long run to see the learning curve
    let cfg = TrainConfig {
        pretrain_iterations: total,
        iterations: 0,
        eval_every: total / 16,
        hidden_dims: vec![hidden, hidden],
        learning_rate: lr,
        augment,
        rng_seed: 42,
        weights: LossWeights { supervised: 100.0, multiview: 0.0, regularizer: 0.0 },
        ..TrainConfig::default()
    };
    let out = train(&ds, &cfg, &val).unwrap();
    println!("frames {frames} noise {noise} hidden {hidden} lr {lr} augment {augment} angle {angle}");
    for row in &out.log.rows {
        println!("it {:6}  s {:10.5}  val {:8.3}", row.iteration, row.s, row.val_nmpjpe);
    }
}
