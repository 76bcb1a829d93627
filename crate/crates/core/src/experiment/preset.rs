//! Built-in experiment campaigns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{AnalysisRequest, ExperimentConfig, RunPlan};
use super::runner::MANIFEST_FILE;
use crate::activation::ActivationKind;
use crate::dynamics::{Integrator, SimulationConfig};
use crate::error::{Error, Result};
use crate::matrix::SkewMatrix;
use crate::rng::{derive_seed, gaussian_state};
use crate::spectral::{frequency_response_config, frequency_template, DEFAULT_STFT_HOP, DEFAULT_STFT_WINDOW};

/// Weight standard deviations of the 2-D grids.
pub const GRID_WEIGHT_STDS: [f64; 3] = [0.1, 1.0, 10.0];
/// Initial-state standard deviations of the 2-D grids.
pub const GRID_STATE_STDS: [f64; 2] = [1.0, 10.0];
pub const ODD_ACTIVATIONS: [ActivationKind; 3] =
    [ActivationKind::Identity, ActivationKind::Tanh, ActivationKind::HardTanh];
pub const NON_ODD_ACTIVATIONS: [ActivationKind; 3] =
    [ActivationKind::Identity, ActivationKind::Sigmoid, ActivationKind::Relu];
pub const SPECTRAL_FREQS_HZ: [f64; 5] = [5.0, 10.0, 15.0, 20.0, 25.0];
pub const SPECTRAL_WEIGHT_MULTIPLIERS: [f64; 3] = [10.0, 25.0, 50.0];
pub const HIGH_DIMS: [usize; 3] = [2, 20, 40];

pub const DEFAULT_GRID_SEEDS: usize = 3;
pub const DEFAULT_HIGH_DIM_SEEDS: usize = 1;
/// Sample stride of the 2-D grid presets; keeps each trajectory file near 10⁴ rows.
pub const GRID_RECORD_STRIDE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    /// 2-D grid over weight scale, state scale and seed with odd activations.
    Fig1,
    /// Same grid with the non-odd activations.
    Fig2,
    /// Frequency responses of 2-D oscillators.
    Fig3,
    /// Higher-dimensional generation with STFT analysis.
    Fig4,
    /// Runs taken verbatim from a config file.
    Custom,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Fig1,
        PresetName::Fig2,
        PresetName::Fig3,
        PresetName::Fig4,
        PresetName::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig1 => "fig1",
            PresetName::Fig2 => "fig2",
            PresetName::Fig3 => "fig3",
            PresetName::Fig4 => "fig4",
            PresetName::Custom => "custom",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (expected fig1, fig2, fig3, fig4 or custom)")))
    }
}

/// Knobs that can be changed without editing a preset.
#[derive(Clone, Debug, Default)]
pub struct PresetOverrides {
    /// Global seed; for `custom` this takes precedence over the file's `seed`.
    pub seed: Option<u64>,
    /// Number of replicates for the grid and high-dimensional presets.
    pub seeds: Option<usize>,
    pub steps: Option<usize>,
    pub record_stride: Option<usize>,
    /// Required for `custom`.
    pub config: Option<ExperimentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub global_seed: u64,
    pub runs: Vec<RunPlan>,
}

impl ExperimentPreset {
    /// Every run is valid and no two runs (or the manifest) share an output file.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        seen.insert(MANIFEST_FILE.to_string());
        for run in &self.runs {
            run.validate()?;
            for file in run.output_files() {
                if !seen.insert(file.clone()) {
                    return Err(Error::Config(format!(
                        "output file `{file}` of run `{}` is not unique",
                        run.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compact decimal for run names: `0.1`, `10`, `2.5`.
fn num_label(v: f64) -> String {
    format!("{v}")
}

fn apply_overrides(cfg: &mut SimulationConfig, ov: &PresetOverrides) {
    if let Some(steps) = ov.steps {
        cfg.steps = steps;
    }
    if let Some(stride) = ov.record_stride {
        cfg.record_stride = stride;
    }
}

/// Replicate `r` uses the per-run seed `derive_seed(global, r)` for both the
/// matrix stream and the state stream, so all activations of a replicate
/// start from the same matrix and state.
fn grid(prefix: &str, activations: &[ActivationKind], global: u64, ov: &PresetOverrides) -> Result<Vec<RunPlan>> {
    let seeds = ov.seeds.unwrap_or(DEFAULT_GRID_SEEDS);
    let mut runs = Vec::new();
    for &w in &GRID_WEIGHT_STDS {
        for &xs in &GRID_STATE_STDS {
            for rep in 0..seeds {
                let seed = derive_seed(global, rep as u64);
                let matrix = SkewMatrix::random_gaussian(2, w, seed)?;
                let x0 = gaussian_state(2, xs, seed)?;
                for &act in activations {
                    let mut cfg = SimulationConfig::new(matrix.clone(), act, x0.clone())
                        .with_record_stride(GRID_RECORD_STRIDE);
                    apply_overrides(&mut cfg, ov);
                    let name = format!("{prefix}_w{}_x{}_s{rep}_{act}", num_label(w), num_label(xs));
                    runs.push(
                        RunPlan::new(name, cfg)
                            .with_label("weight_std", w)
                            .with_label("state_std", xs)
                            .with_label("replicate", rep)
                            .with_label("seed", seed),
                    );
                }
            }
        }
    }
    Ok(runs)
}

fn spectra(ov: &PresetOverrides) -> Result<Vec<RunPlan>> {
    let mut template = frequency_template();
    apply_overrides(&mut template, ov);
    let mut cases = vec![(ActivationKind::Identity, 1.0), (ActivationKind::Tanh, 1.0)];
    cases.extend(SPECTRAL_WEIGHT_MULTIPLIERS.iter().map(|&m| (ActivationKind::HardTanh, m)));

    let mut runs = Vec::new();
    for (act, w_m) in cases {
        for &f in &SPECTRAL_FREQS_HZ {
            let cfg = frequency_response_config(f, act, w_m, &template)?;
            let name = format!("fig3_{act}_wm{}_f{}", num_label(w_m), num_label(f));
            runs.push(
                RunPlan::new(name, cfg)
                    .with_analysis(AnalysisRequest::Spectrum { component: 0 })
                    .with_label("freq_hz", f)
                    .with_label("w_m", w_m)
                    .with_label("x0_scale", format!("1/{}", num_label(w_m))),
            );
        }
    }
    Ok(runs)
}

fn high_dim(global: u64, ov: &PresetOverrides) -> Result<Vec<RunPlan>> {
    let seeds = ov.seeds.unwrap_or(DEFAULT_HIGH_DIM_SEEDS);
    let mut runs = Vec::new();
    for rep in 0..seeds {
        let seed = derive_seed(global, rep as u64);
        for &dim in &HIGH_DIMS {
            let matrix = SkewMatrix::random_uniform_scaled(dim, seed)?;
            let x0 = gaussian_state(dim, 1.0, seed)?;
            let mut cfg = SimulationConfig::new(matrix, ActivationKind::Tanh, x0)
                .with_integrator(Integrator::ForwardEuler)
                .with_record_stride(1);
            apply_overrides(&mut cfg, ov);
            runs.push(
                RunPlan::new(format!("fig4_n{dim}_s{rep}"), cfg)
                    .with_analysis(AnalysisRequest::Component { component: 0 })
                    .with_analysis(AnalysisRequest::Stft {
                        component: 0,
                        window_len: DEFAULT_STFT_WINDOW,
                        hop: DEFAULT_STFT_HOP,
                    })
                    .with_label("dim", dim)
                    .with_label("replicate", rep)
                    .with_label("seed", seed),
            );
        }
    }
    Ok(runs)
}

pub fn build_preset(name: PresetName, overrides: &PresetOverrides) -> Result<ExperimentPreset> {
    let file_seed = overrides.config.as_ref().and_then(|c| c.seed);
    let global_seed = overrides.seed.or(file_seed).unwrap_or(0);
    let runs = match name {
        PresetName::Fig1 => grid("fig1", &ODD_ACTIVATIONS, global_seed, overrides)?,
        PresetName::Fig2 => grid("fig2", &NON_ODD_ACTIVATIONS, global_seed, overrides)?,
        PresetName::Fig3 => spectra(overrides)?,
        PresetName::Fig4 => high_dim(global_seed, overrides)?,
        PresetName::Custom => {
            let config = overrides
                .config
                .as_ref()
                .ok_or_else(|| Error::Config("the custom preset needs a config file".into()))?;
            if config.runs.is_empty() {
                return Err(Error::Config("config file defines no [[run]] entries".into()));
            }
            config
                .runs
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    let mut plan = spec.resolve(derive_seed(global_seed, i as u64))?;
                    apply_overrides(&mut plan.config, overrides);
                    Ok(plan)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let preset = ExperimentPreset {
        name,
        global_seed,
        runs,
    };
    preset.validate()?;
    Ok(preset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        for s in [1, 3] {
            let ov = PresetOverrides {
                seeds: Some(s),
                ..Default::default()
            };
            assert_eq!(build_preset(PresetName::Fig1, &ov).unwrap().runs.len(), 3 * 2 * s * 3);
            assert_eq!(build_preset(PresetName::Fig2, &ov).unwrap().runs.len(), 3 * 2 * s * 3);
        }
        let fig3 = build_preset(PresetName::Fig3, &PresetOverrides::default()).unwrap();
        assert_eq!(fig3.runs.len(), 25);
        let fig4 = build_preset(PresetName::Fig4, &PresetOverrides::default()).unwrap();
        let dims: Vec<usize> = fig4.runs.iter().map(|r| r.config.dim()).collect();
        assert_eq!(dims, vec![2, 20, 40]);
    }

    #[test]
    fn grid_follows_protocol() {
        let p = build_preset(PresetName::Fig1, &PresetOverrides::default()).unwrap();
        for run in &p.runs {
            assert_eq!(run.config.tau, 0.001);
            assert_eq!(run.config.steps, 100_000);
            assert_eq!(run.config.divergence_threshold, 100.0);
            assert_eq!(run.config.integrator, Integrator::ForwardEuler);
            assert!(ODD_ACTIVATIONS.contains(&run.config.activation));
        }
        // activations of one replicate share matrix and state
        let same: Vec<_> = p.runs.iter().filter(|r| r.name.starts_with("fig1_w1_x10_s2_")).collect();
        assert_eq!(same.len(), 3);
        assert!(same.windows(2).all(|w| w[0].config.matrix == w[1].config.matrix && w[0].config.x0 == w[1].config.x0));
    }

    #[test]
    fn adding_replicates_keeps_existing_runs() {
        let small = build_preset(PresetName::Fig2, &PresetOverrides { seeds: Some(1), ..Default::default() }).unwrap();
        let large = build_preset(PresetName::Fig2, &PresetOverrides { seeds: Some(4), ..Default::default() }).unwrap();
        for run in &small.runs {
            let twin = large.runs.iter().find(|r| r.name == run.name).unwrap();
            assert_eq!(twin.config, run.config);
        }
    }

    #[test]
    fn seed_changes_every_random_run() {
        let a = build_preset(PresetName::Fig1, &PresetOverrides { seed: Some(1), seeds: Some(1), ..Default::default() }).unwrap();
        let b = build_preset(PresetName::Fig1, &PresetOverrides { seed: Some(2), seeds: Some(1), ..Default::default() }).unwrap();
        assert!(a.runs.iter().zip(&b.runs).all(|(p, q)| p.name == q.name && p.config.x0 != q.config.x0));
    }

    #[test]
    fn custom_needs_config() {
        assert!(matches!(build_preset(PresetName::Custom, &PresetOverrides::default()), Err(Error::Config(_))));
    }

    #[test]
    fn custom_rejects_duplicate_names() {
        let text = r#"
[[run]]
name = "a"
activation = "tanh"
matrix = { kind = "block_diagonal", freqs = [1.0] }
x0 = { kind = "explicit", values = [1.0, 0.0] }
"#;
        let twice = format!("{text}{text}");
        let ov = PresetOverrides {
            config: Some(ExperimentConfig::from_toml_str(&twice).unwrap()),
            ..Default::default()
        };
        assert!(build_preset(PresetName::Custom, &ov).is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in PresetName::ALL {
            assert_eq!(p.as_str().parse::<PresetName>().unwrap(), p);
        }
        assert!("fig5".parse::<PresetName>().is_err());
    }
}
