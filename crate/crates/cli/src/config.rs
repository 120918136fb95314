use serde::{Deserialize, Serialize};
use stickynet::verify::VerifyConfig;

/// Everything a run depends on. Missing keys take the defaults below; the
/// resolved value (flags applied) is what gets echoed to `config.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub density: DensityConfig,
    pub sample: SampleConfig,
    pub pn: PnConfig,
    pub net: NetSection,
    pub dim: DimConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            density: DensityConfig::default(),
            sample: SampleConfig::default(),
            pn: PnConfig::default(),
            net: NetSection::default(),
            dim: DimConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            t: vec![0.01, 0.1, 1.0],
            x: vec![0.0, 0.5],
            y: (0..=60).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub paths: u64,
    pub horizon: f64,
    pub grid_dt: f64,
    pub mu: f64,
    pub theta: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { paths: 10, horizon: 1.0, grid_dt: 1e-3, mu: std::f64::consts::SQRT_2, theta: std::f64::consts::SQRT_2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PnConfig {
    pub n_min: u32,
    pub n_max: u32,
    pub reps: u64,
    pub a: f64,
    pub b: f64,
}

impl Default for PnConfig {
    fn default() -> Self {
        Self { n_min: 4, n_max: 10, reps: 1_000_000, a: 0.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub eps: f64,
    pub horizon: f64,
    pub width: f64,
    pub branch_coeff: f64,
    /// Net started from the even sites of `[-start_half, start_half]`.
    pub start_half: i64,
    pub a: f64,
    pub b: f64,
    pub level: u32,
    /// Output every `stride` lattice steps.
    pub stride: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            eps: 1.0 / 32.0,
            horizon: 1.0,
            width: 12.0,
            branch_coeff: 1.0,
            start_half: 32,
            a: 0.5,
            b: 1.0,
            level: 4,
            stride: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub grids: usize,
    pub a: f64,
    pub b: f64,
}

impl Default for DimConfig {
    fn default() -> Self {
        Self { k_min: 4, k_max: 12, grids: 200, a: 0.0, b: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: ExperimentConfig = toml::from_str("seed = 9\n[pn]\nreps = 100\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.pn.reps, 100);
        assert_eq!(c.pn.n_max, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("sede = 1\n").is_err());
    }
}
