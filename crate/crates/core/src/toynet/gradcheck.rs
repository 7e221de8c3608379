//! Central-difference check of the analytic gradient on small random networks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad_prepared, loss_prepared, prepare, NetworkConfig, NetworkParams, PreparedCloud, WeightedExample};
use crate::error::{Error, Result};
use crate::geometry::Seed;
use crate::synthdata::{gen_shape, ShapeKind, ShapeSpec};
use crate::wfa::AxisOrder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub configurations: usize,
    pub seed: Seed,
    /// Step is `step_scale · max(1, |θ|)`.
    pub step_scale: f64,
    /// Lower bound on the relative-error denominator.
    pub denominator_floor: f64,
    pub tolerance: f64,
    pub worst_tolerance: f64,
    pub required_fraction: f64,
    pub points_per_cloud: usize,
    pub batch_size: usize,
    /// Fresh probe clouds tried when a step crosses a ReLU or max-pool switch.
    pub max_regenerations: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            configurations: 10,
            seed: Seed(1),
            step_scale: 1e-6,
            denominator_floor: 1e-4,
            tolerance: 1e-5,
            worst_tolerance: 1e-3,
            required_fraction: 0.99,
            points_per_cloud: 128,
            batch_size: 2,
            max_regenerations: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationResult {
    pub network: NetworkConfig,
    pub probe_seed: Seed,
    pub regenerations: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub median_rel_error: f64,
    pub within_tolerance: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub configurations: Vec<ConfigurationResult>,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub median_rel_error: f64,
    pub fraction_within_tolerance: f64,
    pub passed: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A small random architecture; WFA on and off alternate.
fn random_network(index: usize, seed: Seed) -> NetworkConfig {
    let mut rng = seed.rng();
    let depth = rng.random_range(1..=2usize);
    let mut widths = vec![rng.random_range(4..=8usize)];
    if depth == 2 {
        widths.push(rng.random_range(4..=10usize));
    }
    NetworkConfig {
        num_queries: rng.random_range(4..=8),
        neighbors_per_query: rng.random_range(6..=10),
        radius: 0.4,
        hidden_widths: widths,
        num_classes: rng.random_range(2..=4),
        axis_order: AxisOrder::all()[rng.random_range(0..6usize)],
        use_wfa: index % 2 == 0,
        seed: seed.derive(1),
        ..Default::default()
    }
}

fn probe(cfg: &NetworkConfig, check: &GradCheckConfig, seed: Seed) -> Result<Vec<(PreparedCloud, usize)>> {
    (0..check.batch_size)
        .map(|b| {
            let s = seed.derive(b as u64);
            let kind = ShapeKind::ALL[(s.0 % 5) as usize];
            let cloud = gen_shape(&ShapeSpec {
                kind,
                n_points: check.points_per_cloud,
                noise_sigma: 0.02,
                with_normals: false,
                seed: s,
            })?;
            Ok((prepare(&cloud, cfg)?, b % cfg.num_classes))
        })
        .collect()
}

/// Errors for every coordinate, or `None` if some step changed the
/// activation pattern.
fn compare(params: &NetworkParams, cfg: &NetworkConfig, batch: &[WeightedExample], check: &GradCheckConfig) -> Result<Option<Vec<f64>>> {
    let wf = params.weight_frame(cfg)?;
    let (_, grad, base) = loss_and_grad_prepared(params, batch, cfg, &wf)?;
    let theta = params.flatten();
    let mut errors = Vec::with_capacity(theta.len());
    let mut shifted = theta.clone();
    for i in 0..theta.len() {
        let h = check.step_scale * theta[i].abs().max(1.0);
        shifted[i] = theta[i] + h;
        let (plus, plus_caches) = loss_prepared(&params.with_flat(&shifted)?, batch, cfg, &wf)?;
        shifted[i] = theta[i] - h;
        let (minus, minus_caches) = loss_prepared(&params.with_flat(&shifted)?, batch, cfg, &wf)?;
        shifted[i] = theta[i];
        let smooth = base
            .iter()
            .zip(plus_caches.iter().zip(&minus_caches))
            .all(|(b, (p, m))| b.same_pattern(p) && b.same_pattern(m));
        if !smooth {
            return Ok(None);
        }
        let fd = (plus - minus) / (2.0 * h);
        let denom = fd.abs().max(grad[i].abs()).max(check.denominator_floor);
        errors.push((fd - grad[i]).abs() / denom);
    }
    Ok(Some(errors))
}

pub fn gradient_check(check: &GradCheckConfig) -> Result<GradCheckReport> {
    if check.batch_size == 0 || check.points_per_cloud < 16 {
        return Err(Error::InvalidConfig("gradient check needs a batch and at least 16 points".into()));
    }
    let mut results = Vec::with_capacity(check.configurations);
    let mut all = Vec::new();
    for index in 0..check.configurations {
        let net_seed = check.seed.derive(index as u64);
        let cfg = random_network(index, net_seed);
        let params = NetworkParams::init(&cfg)?;
        let mut found = None;
        for attempt in 0..=check.max_regenerations {
            let probe_seed = net_seed.derive(1000 + attempt as u64);
            let clouds = probe(&cfg, check, probe_seed)?;
            let batch: Vec<WeightedExample> = clouds
                .iter()
                .map(|(c, label)| WeightedExample {
                    cloud: c,
                    label: *label,
                    weight: 1.0,
                })
                .collect();
            if let Some(errors) = compare(&params, &cfg, &batch, check)? {
                found = Some((attempt, probe_seed, errors));
                break;
            }
        }
        let (regenerations, probe_seed, errors) = found.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "configuration {index}: every probe cloud sat on an activation switch"
            ))
        })?;
        results.push(ConfigurationResult {
            network: cfg,
            probe_seed,
            regenerations,
            coordinates: errors.len(),
            max_rel_error: errors.iter().copied().fold(0.0, f64::max),
            median_rel_error: median(errors.clone()),
            within_tolerance: errors.iter().filter(|&&e| e <= check.tolerance).count(),
        });
        all.extend(errors);
    }
    let within = all.iter().filter(|&&e| e <= check.tolerance).count();
    let fraction = if all.is_empty() { 1.0 } else { within as f64 / all.len() as f64 };
    let max = all.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        configurations: results,
        coordinates: all.len(),
        max_rel_error: max,
        median_rel_error: median(all),
        fraction_within_tolerance: fraction,
        passed: fraction >= check.required_fraction && max <= check.worst_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_check_passes() {
        let report = gradient_check(&GradCheckConfig {
            configurations: 4,
            ..Default::default()
        })
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.configurations.len(), 4);
        assert!(report.coordinates > 100);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![]), 0.0);
    }
}
