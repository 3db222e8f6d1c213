//! Seeded synthetic datasets for tests, benchmarks and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::Matrix;

/// Standard normal draw by Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Inliers from N(0, I) in `dim` dimensions; anomalies at a uniformly random
/// direction and radius in `[radius, radius + 2]` plus noise of sd 0.5. Rows are
/// shuffled; flags mark anomalies.
pub fn far_anomalies(n: usize, anomaly_fraction: f64, dim: usize, radius: f64, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_out = (n as f64 * anomaly_fraction).round() as usize;
    let mut flags = vec![false; n - n_out];
    flags.resize(n, true);
    flags.shuffle(&mut rng);
    let mut x = Matrix::zeros(n, dim);
    for (i, &anomalous) in flags.iter().enumerate() {
        if anomalous {
            let dir: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let r = radius + 2.0 * rng.gen::<f64>();
            for (j, d) in dir.iter().enumerate() {
                x.set(i, j, d / norm * r + 0.5 * normal(&mut rng));
            }
        } else {
            for j in 0..dim {
                x.set(i, j, normal(&mut rng));
            }
        }
    }
    (x, flags)
}

const INLIER_LABELS: [&str; 4] = ["neptune", "smurf", "satan", "portsweep"];

/// Headerless NSL-KDD lines (41 features, label, difficulty). Attack rows
/// form a few tight traffic profiles; `normal` rows are broader. The label
/// convention that treats `normal` as the anomaly class sees
/// `anomaly_fraction` of the rows as anomalies.
pub fn nslkdd_lines(n: usize, anomaly_fraction: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let services = ["http", "private", "smtp", "ftp_data", "domain_u", "ecr_i", "other"];
    let mut out = String::new();
    for _ in 0..n {
        let normal_row = rng.gen::<f64>() < anomaly_fraction;
        let mut f: Vec<String> = Vec::with_capacity(43);
        let (label, proto, service, flag, bytes, count, rate) = if normal_row {
            let s = services[rng.gen_range(0..services.len())];
            let p = if s == "domain_u" { "udp" } else { "tcp" };
            (
                "normal",
                p,
                s,
                "SF",
                rng.gen_range(100.0..5000.0),
                rng.gen_range(1.0..20.0),
                rng.gen::<f64>() * 0.1,
            )
        } else {
            let k = rng.gen_range(0..INLIER_LABELS.len());
            let (p, s, fl) = match k {
                0 => ("tcp", "private", "S0"),
                1 => ("icmp", "ecr_i", "SF"),
                2 => ("tcp", "other", "REJ"),
                _ => ("tcp", "private", "RSTO"),
            };
            (
                INLIER_LABELS[k],
                p,
                s,
                fl,
                rng.gen_range(0.0..40.0),
                rng.gen_range(100.0..511.0),
                0.9 + rng.gen::<f64>() * 0.1,
            )
        };
        f.push("0".into());
        f.push(proto.into());
        f.push(service.into());
        f.push(flag.into());
        f.push(format!("{bytes:.0}"));
        f.push(format!(
            "{:.0}",
            if normal_row { rng.gen_range(0.0..20000.0) } else { 0.0 }
        ));
        for _ in 6..22 {
            f.push("0".into());
        }
        f.push(format!("{count:.0}"));
        f.push(format!("{:.0}", count * rng.gen_range(0.1..1.0)));
        for _ in 24..31 {
            f.push(format!("{:.2}", (rate + rng.gen::<f64>() * 0.05).min(1.0)));
        }
        f.push(format!("{:.0}", rng.gen_range(1.0..255.0)));
        f.push(format!("{:.0}", rng.gen_range(1.0..255.0)));
        for _ in 33..41 {
            f.push(format!("{:.2}", (rate + rng.gen::<f64>() * 0.05).min(1.0)));
        }
        f.push(label.into());
        f.push(rng.gen_range(10..22).to_string());
        out.push_str(&f.join(","));
        out.push('\n');
    }
    out
}
