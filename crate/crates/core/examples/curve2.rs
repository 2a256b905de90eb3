use mvpose::losses::LossWeights;
use mvpose::skeleton::Skeleton;
use mvpose::synth::{generate_dataset, CaptureConfig};
use mvpose::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let frames: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(320);
    let pretrain: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let weak: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20000);
    let wr: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let hidden: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(128);
    let angle: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(15.0);

    let sk = Skeleton::default_human();
    let tc = CaptureConfig { n_subjects: 5, frames_per_subject: frames, noise_sigma_mm: 23.0, pose_angle_deg: angle, rng_seed: 42, ..CaptureConfig::default() };
    let vc = CaptureConfig { n_subjects: 2, frames_per_subject: 64, noise_sigma_mm: 23.0, pose_angle_deg: angle, rng_seed: 1042, ..CaptureConfig::default() };
    let ds = generate_dataset(&tc, &sk, &[0]).unwrap();
    let val = generate_dataset(&vc, &sk, &[0, 1]).unwrap().labeled;

    let cfg = TrainConfig {
        pretrain_iterations: pretrain, iterations: weak,
        eval_every: (pretrain + weak) / 20,
        hidden_dims: vec![hidden, hidden], augment: false, rng_seed: 42,
        weights: LossWeights { supervised: 100.0, multiview: 1.0, regularizer: wr },
        ..TrainConfig::default()
    };
    let out = train(&ds, &cfg, &val).unwrap();
    println!("wr = {wr}");
    for row in &out.log.rows {
        println!("it {:6}  m {:9.5}  s {:9.5}  r {:9.5}  val {:8.3}", row.iteration, row.m, row.s, row.r, row.val_nmpjpe);
    }
}
