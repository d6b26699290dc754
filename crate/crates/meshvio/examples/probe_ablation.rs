use meshvio::config::{RawConfig, RunConfig};
use meshvio::pipeline::run_pipeline;

fn run(variant: &str, seed: u64, extra: &[(&str, &str)]) -> meshvio::pipeline::RunArtifacts {
    let mut raw = RawConfig::default();
    raw.set("pipeline", variant);
    raw.set("seed", &seed.to_string());
    raw.set("out", &format!("/tmp/probe_{variant}_{seed}"));
    raw.set("sim.num_keyframes", "50");
    raw.set("sim.pixel_noise_px", "1.0");
    raw.set("sim.gyro_noise", "2e-3");
    raw.set("sim.accel_noise", "2e-2");
    raw.set("sim.gyro_bias_rw", "1e-4");
    raw.set("sim.accel_bias_rw", "1e-3");
    raw.set("noise.gyro_sigma", "2e-3");
    raw.set("noise.accel_sigma", "2e-2");
    raw.set("noise.gyro_bias_rw_sigma", "1e-4");
    raw.set("noise.accel_bias_rw_sigma", "1e-3");
    raw.set("scene.density", "4.0");
    raw.set("noise.regularity_sigma_m", "0.005");
    for (k, v) in extra {
        raw.set(k, v);
    }
    let cfg = RunConfig::from_raw(&raw).unwrap();
    run_pipeline(&cfg).unwrap()
}

fn main() {
    let extra_sets: Vec<(&str, Vec<(&str, &str)>)> = vec![
        ("lag10", vec![("smoother.lag_keyframes", "10")]),
        ("lag8", vec![("smoother.lag_keyframes", "8")]),
    ];
    for (label, extra) in &extra_sets {
        let mut sp_med = Vec::new();
        let mut spr_med = Vec::new();
        for seed in 1..=8u64 {
            let sp = run("sp", seed, extra);
            let spr = run("spr", seed, extra);
            let linear_with_plane = spr
                .final_graph
                .iter()
                .filter(|l| l.starts_with("linear") && l.contains('p') && l.split('(').nth(1).map(|s| s.contains(",p") || s.starts_with('p')).unwrap_or(false))
                .count();
            println!(
                "[{label}] seed {}: sp {:.4} spr {:.4} planes {} reg {:.3?} prior-with-plane {}",
                seed, sp.ate.median, spr.ate.median, spr.planes_spawned,
                spr.max_regularity_residual_m, linear_with_plane
            );
            sp_med.push(sp.ate.median);
            spr_med.push(spr.ate.median);
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "[{label}] mean: sp {:.5} spr {:.5} improvement {:.1}%",
            avg(&sp_med), avg(&spr_med),
            100.0 * (1.0 - avg(&spr_med) / avg(&sp_med))
        );
    }
}
