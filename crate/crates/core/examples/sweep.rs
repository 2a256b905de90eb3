use mvpose::losses::LossWeights;
use mvpose::metrics;
use mvpose::skeleton::Skeleton;
use mvpose::synth::{generate_dataset, CaptureConfig};
use mvpose::trainer::{train, TrainConfig};
use mvpose::pose::Pose;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(23.0);
    let angle: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(30.0);
    let hidden: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(64);
    let total: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let augment: bool = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(true);

    let sk = Skeleton::default_human();
    let vc = CaptureConfig { n_subjects: 2, frames_per_subject: 64, noise_sigma_mm: noise, pose_angle_deg: angle, rng_seed: 1042, ..CaptureConfig::default() };
    let val = generate_dataset(&vc, &sk, &[0, 1]).unwrap().labeled;

    // chance level: mean label pose as constant prediction
    let n = val.len() as f64;
    let refs: Vec<&Pose> = val.iter().map(|s| &s.pose_mm).collect();
    let mean_pose = Pose::mean(&refs, sk.root()).unwrap();
    let chance: f64 = val.iter().map(|s| metrics::nmpjpe(&mean_pose, &s.pose_mm).unwrap()).sum::<f64>() / n;
    println!("noise {noise} angle {angle} hidden {hidden} total {total} augment {augment}; chance(mean-pose) NMPJPE = {chance:.1} mm");

    for frames in [64usize, 128, 256, 512, 1024] {
        let tc = CaptureConfig { n_subjects: 5, frames_per_subject: frames, noise_sigma_mm: noise, pose_angle_deg: angle, rng_seed: 42, ..CaptureConfig::default() };
        let ds = generate_dataset(&tc, &sk, &(0..5).collect::<Vec<_>>()).unwrap(); // ALL subjects labeled
        let cfg = TrainConfig {
            pretrain_iterations: total, iterations: 0, eval_every: total,
            hidden_dims: vec![hidden, hidden], augment, rng_seed: 42,
            weights: LossWeights { supervised: 100.0, multiview: 0.0, regularizer: 0.0 },
            ..TrainConfig::default()
        };
        let out = train(&ds, &cfg, &val).unwrap();
        println!("|L| {:5}: final val {:8.3} mm (min {:8.3})", ds.labeled.len(), out.log.final_val_nmpjpe().unwrap(), out.log.min_val_nmpjpe().unwrap());
    }
}
