use mvpose::calib::{calibrate, PredictionSource};
use mvpose::losses::LossWeights;
use mvpose::skeleton::Skeleton;
use mvpose::synth::{generate_dataset, CaptureConfig, Dataset, LabeledSample};
use mvpose::trainer::{train, RotationSource, TrainConfig};
use mvpose::PoseDistance;
use std::time::Instant;

fn benchmark_data(frames: usize, angle: f64) -> (Dataset, Vec<LabeledSample>) {
    let sk = Skeleton::default_human();
    let train_cfg = CaptureConfig {
        n_cameras: 4, n_subjects: 5, frames_per_subject: frames,
        noise_sigma_mm: 23.0, pose_angle_deg: angle, rng_seed: 42,
        ..CaptureConfig::default()
    };
    let val_cfg = CaptureConfig {
        n_cameras: 4, n_subjects: 2, frames_per_subject: 64,
        noise_sigma_mm: 23.0, pose_angle_deg: angle, rng_seed: 1042,
        ..CaptureConfig::default()
    };
    let ds = generate_dataset(&train_cfg, &sk, &[0]).unwrap();
    let val = generate_dataset(&val_cfg, &sk, &[0, 1]).unwrap().labeled;
    (ds, val)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let frames: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(320);
    let pretrain: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let weak: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let hidden: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(128);
    let augment: bool = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(false);
    let angle: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(15.0);

    let (ds, val) = benchmark_data(frames, angle);
    println!("frames {frames}, |L| {}, |U| {}, val {} ; P {pretrain} T {weak} hidden {hidden} augment {augment} angle {angle}", ds.labeled.len(), ds.unlabeled.len(), val.len());

    let base_cfg = TrainConfig {
        pretrain_iterations: pretrain,
        iterations: weak,
        eval_every: 100,
        hidden_dims: vec![hidden, hidden],
        augment,
        rng_seed: 42,
        ..TrainConfig::default()
    };

    let mut run = |name: &str, cfg: TrainConfig| -> (f64, f64) {
        let t0 = Instant::now();
        let out = train(&ds, &cfg, &val).unwrap();
        let fin = out.log.final_val_nmpjpe().unwrap();
        let min = out.log.min_val_nmpjpe().unwrap();
        println!(
            "{name:-14}: final {fin:8.3} mm, min {min:8.3} mm, final/min {:.3}, skipped {}, {:.1}s",
            fin / min,
            out.log.skipped_groups,
            t0.elapsed().as_secs_f64()
        );
        (fin, min)
    };

    let baseline = run("baseline", TrainConfig {
        weights: LossWeights { supervised: 100.0, multiview: 0.0, regularizer: 0.0 },
        ..base_cfg.clone()
    });
    let weak_known = run("weak-known", base_cfg.clone());
    let weak_est = run("weak-est", TrainConfig { rotations: RotationSource::Estimated, ..base_cfg.clone() });
    let noreg = run("weak-noreg", TrainConfig {
        weights: LossWeights { supervised: 100.0, multiview: 1.0, regularizer: 0.0 },
        ..base_cfg.clone()
    });
    let weak_se = run("weak-se", TrainConfig { distance: PoseDistance::Se, ..base_cfg.clone() });

    println!("\nC5 known-R improvement: {:.2}% (need >= 5%)", 100.0 * (baseline.0 - weak_known.0) / baseline.0);
    println!("C6 est-R improvement:   {:.2}% (need > 0 and <= known)", 100.0 * (baseline.0 - weak_est.0) / baseline.0);
    println!("C7 noreg final/min: {:.3} (need >= 1.10); full final/min: {:.3} (need <= 1.02)", noreg.0 / noreg.1, weak_known.0 / weak_known.1);
    println!("C8 nse {:.3} vs se {:.3} (need nse < se)", weak_known.0, weak_se.0);

    let calib_report = calibrate(&ds, PredictionSource::Oracle, None).unwrap();
    println!("C9 oracle calib at 23mm noise: mean {:.4} deg, median {:.4}, max {:.4}",
        calib_report.mean_deg.unwrap(), calib_report.median_deg.unwrap(), calib_report.max_deg.unwrap());
}
