use mvpose::losses::LossWeights;
use mvpose::skeleton::Skeleton;
use mvpose::synth::{generate_dataset, CaptureConfig};
use mvpose::trainer::{train, RotationSource, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let frames: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(320);
    let pretrain: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let weak: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(24000);
    let style: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(15.0);

    let sk = Skeleton::default_human();
    for hidden in [128usize, 256] {
        let tc = CaptureConfig { n_subjects: 5, frames_per_subject: frames, noise_sigma_mm: 23.0, pose_angle_deg: 15.0, style_angle_deg: style, rng_seed: 42, ..CaptureConfig::default() };
        let vc = CaptureConfig { n_subjects: 4, frames_per_subject: 48, noise_sigma_mm: 23.0, pose_angle_deg: 15.0, style_angle_deg: style, rng_seed: 1042, ..CaptureConfig::default() };
        let ds = generate_dataset(&tc, &sk, &[0]).unwrap();
        let val = generate_dataset(&vc, &sk, &[0, 1, 2, 3]).unwrap().labeled;
        let base_cfg = TrainConfig {
            pretrain_iterations: pretrain, iterations: weak, eval_every: 200,
            hidden_dims: vec![hidden, hidden], augment: true, rng_seed: 42,
            ..TrainConfig::default()
        };
        let t0 = Instant::now();
        let run = |cfg: TrainConfig| {
            let out = train(&ds, &cfg, &val).unwrap();
            (out.log.final_val_nmpjpe().unwrap(), out.log.min_val_nmpjpe().unwrap())
        };
        let baseline = run(TrainConfig { weights: LossWeights { supervised: 100.0, multiview: 0.0, regularizer: 0.0 }, ..base_cfg.clone() });
        let weak_known = run(base_cfg.clone());
        let noreg = run(TrainConfig { weights: LossWeights { supervised: 100.0, multiview: 1.0, regularizer: 0.0 }, ..base_cfg.clone() });
        let est = run(TrainConfig { rotations: RotationSource::Estimated, ..base_cfg.clone() });
        let se = run(TrainConfig { distance: mvpose::PoseDistance::Se, ..base_cfg.clone() });
        println!(
            "hidden {hidden:3}: base {:7.2}/{:.3} weak {:7.2}/{:.3} est {:7.2}/{:.3} noreg {:7.2}/{:.3} se {:7.2} | C5 {:+.2}% C6 {:+.2}% C7 {:.3}|{:.3} C8 {} | {:.0}s",
            baseline.0, baseline.0 / baseline.1,
            weak_known.0, weak_known.0 / weak_known.1,
            est.0, est.0 / est.1,
            noreg.0, noreg.0 / noreg.1,
            se.0,
            100.0 * (baseline.0 - weak_known.0) / baseline.0,
            100.0 * (baseline.0 - est.0) / baseline.0,
            noreg.0 / noreg.1, weak_known.0 / weak_known.1,
            if weak_known.0 < se.0 { "ok" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
        );
    }
}
