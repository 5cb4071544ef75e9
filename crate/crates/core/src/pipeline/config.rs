use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::kinematics::PlanParams;
use crate::pathopt::PathOptParams;
use crate::stippling::StippleParams;
use crate::tsp::TspParams;

/// Seed offset between consecutive channels.
pub const CHANNEL_SEED_STRIDE: u64 = 1_000_003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ColorMode {
    Cmyk,
    Kmeans { k: usize },
}

/// Parameter replacement for one channel. Unset sections fall back to the
/// document-wide ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelOverride {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stipple: Option<StippleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tsp: Option<TspParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathopt: Option<PathOptParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrawingConfig {
    /// Drawing extent on paper. Unset sides follow the image aspect; with
    /// a robot and neither side set the drawing fills the fitted canvas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_mm: Option<f64>,
    pub stroke_width_mm: f64,
    /// Largest gap between consecutive program points.
    pub sample_spacing_mm: f64,
    pub preview_width: usize,
}

impl Default for DrawingConfig {
    fn default() -> Self {
        Self {
            width_mm: None,
            height_mm: None,
            stroke_width_mm: 0.5,
            sample_spacing_mm: 1.0,
            preview_width: 512,
        }
    }
}

/// Arm and drawing surface. Exactly one of `preset` and `chain_file`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_file: Option<PathBuf>,
    pub plane_point: [f64; 3],
    pub plane_normal: [f64; 3],
    /// Reachability lattice spacing (mm).
    pub lattice_step: f64,
    /// Half-width of the square lattice around `plane_point` (mm).
    pub half_extent: f64,
    /// Width / height of the per-base canvas.
    pub tile_aspect: f64,
    /// Inset of the fitted canvas on every side, in lattice steps. The fit
    /// only resolves the workspace boundary to half a step.
    pub canvas_margin_steps: f64,
    pub plan: PlanParams,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            preset: None,
            chain_file: None,
            plane_point: [0.0; 3],
            plane_normal: [0.0, 0.0, 1.0],
            lattice_step: 25.0,
            half_extent: 1000.0,
            tile_aspect: 1.0,
            canvas_margin_steps: 1.0,
            plan: PlanParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Concurrent channels; 0 uses every core.
    pub workers: usize,
    /// Longer image side after box downscaling.
    pub max_dimension: usize,
    pub color: ColorMode,
    /// Stipples shared among channels in proportion to their ink. Replaces
    /// the per-channel `target_count` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stipple_total: Option<usize>,
    pub stipple: StippleParams,
    pub tsp: TspParams,
    pub pathopt: PathOptParams,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub channel: Vec<ChannelOverride>,
    pub drawing: DrawingConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robot: Option<RobotConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("input.png"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            workers: 0,
            max_dimension: 1024,
            color: ColorMode::Cmyk,
            stipple_total: None,
            stipple: StippleParams::default(),
            tsp: TspParams::default(),
            pathopt: PathOptParams::default(),
            channel: Vec::new(),
            drawing: DrawingConfig::default(),
            robot: None,
        }
    }
}

/// Stage-specific offsets added to a channel's seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStage {
    Stipple = 1,
    Tour = 2,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Checks every nested parameter block; the message names the field.
    pub fn validate(&self) -> Result<(), String> {
        if self.max_dimension == 0 {
            return Err("max_dimension: must be at least 1".into());
        }
        if let ColorMode::Kmeans { k } = self.color {
            if k == 0 {
                return Err("color.k: must be at least 1".into());
            }
        }
        self.stipple.validate().map_err(|e| format!("stipple: {e}"))?;
        self.tsp.validate().map_err(|e| format!("tsp: {e}"))?;
        self.pathopt.validate().map_err(|e| format!("pathopt: {e}"))?;
        for o in &self.channel {
            if let Some(p) = &o.stipple {
                p.validate().map_err(|e| format!("channel[{}].stipple: {e}", o.index))?;
            }
            if let Some(p) = &o.tsp {
                p.validate().map_err(|e| format!("channel[{}].tsp: {e}", o.index))?;
            }
            if let Some(p) = &o.pathopt {
                p.validate().map_err(|e| format!("channel[{}].pathopt: {e}", o.index))?;
            }
        }
        let d = &self.drawing;
        for (name, v) in [("drawing.width_mm", d.width_mm), ("drawing.height_mm", d.height_mm)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("{name}: must be positive"));
                }
            }
        }
        if !(d.stroke_width_mm > 0.0 && d.stroke_width_mm.is_finite()) {
            return Err("drawing.stroke_width_mm: must be positive".into());
        }
        if !(d.sample_spacing_mm > 0.0 && d.sample_spacing_mm.is_finite()) {
            return Err("drawing.sample_spacing_mm: must be positive".into());
        }
        if d.preview_width < crate::output::MIN_PREVIEW_WIDTH {
            return Err(format!(
                "drawing.preview_width: must be at least {}",
                crate::output::MIN_PREVIEW_WIDTH
            ));
        }
        if let Some(r) = &self.robot {
            if r.preset.is_some() == r.chain_file.is_some() {
                return Err("robot: set exactly one of preset and chain_file".into());
            }
            if !(r.lattice_step > 0.0 && r.half_extent > 0.0 && r.tile_aspect > 0.0) {
                return Err("robot: lattice_step, half_extent and tile_aspect must be positive".into());
            }
            if !(r.canvas_margin_steps >= 0.0 && r.canvas_margin_steps.is_finite()) {
                return Err("robot.canvas_margin_steps: must be non-negative".into());
            }
            r.plan.validate().map_err(|e| format!("robot.plan: {e}"))?;
        }
        Ok(())
    }

    pub fn channel_seed(&self, channel: usize, stage: SeedStage) -> u64 {
        self.seed
            .wrapping_add(CHANNEL_SEED_STRIDE.wrapping_mul(channel as u64))
            .wrapping_add(stage as u64)
    }

    fn override_for(&self, channel: usize) -> Option<&ChannelOverride> {
        self.channel.iter().find(|o| o.index == channel)
    }

    /// Stippling parameters with the derived seed. `ink_share` is the
    /// channel's fraction of the total ink, used with `stipple_total`.
    pub fn stipple_params(&self, channel: usize, ink_share: f64) -> StippleParams {
        let mut p = self
            .override_for(channel)
            .and_then(|o| o.stipple.clone())
            .unwrap_or_else(|| self.stipple.clone());
        if let Some(total) = self.stipple_total {
            p.target_count = (total as f64 * ink_share).round() as usize;
        }
        p.rng_seed = self.channel_seed(channel, SeedStage::Stipple);
        p
    }

    pub fn tsp_params(&self, channel: usize) -> TspParams {
        let mut p = self
            .override_for(channel)
            .and_then(|o| o.tsp.clone())
            .unwrap_or_else(|| self.tsp.clone());
        p.rng_seed = self.channel_seed(channel, SeedStage::Tour);
        p
    }

    pub fn pathopt_params(&self, channel: usize) -> PathOptParams {
        self.override_for(channel)
            .and_then(|o| o.pathopt.clone())
            .unwrap_or_else(|| self.pathopt.clone())
    }

    /// Applies a TSP wall-clock budget to every channel.
    pub fn set_time_budget(&mut self, seconds: f64) {
        self.tsp.time_budget = seconds;
        for o in &mut self.channel {
            if let Some(t) = &mut o.tsp {
                t.time_budget = seconds;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn full_round_trips() {
        let mut cfg = PipelineConfig {
            seed: 7,
            color: ColorMode::Kmeans { k: 3 },
            stipple_total: Some(20_000),
            channel: vec![ChannelOverride {
                index: 1,
                stipple: None,
                tsp: Some(TspParams {
                    neighbor_k: 6,
                    ..Default::default()
                }),
                pathopt: Some(PathOptParams {
                    d_eps: 0.25,
                    ..Default::default()
                }),
            }],
            drawing: DrawingConfig {
                width_mm: Some(850.0),
                ..Default::default()
            },
            robot: Some(RobotConfig {
                preset: Some("ur5e-like".into()),
                plane_point: [-500.0, 0.0, 0.0],
                ..Default::default()
            }),
            ..Default::default()
        };
        cfg.set_time_budget(f64::INFINITY);
        let text = cfg.to_toml();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn invalid_fields_are_named() {
        let err = PipelineConfig::from_toml("[pathopt]\nd_eps = -1.0\n").unwrap_err();
        assert!(err.starts_with("pathopt:"), "{err}");
        let err = PipelineConfig::from_toml("bogus = 1\n").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        let err = PipelineConfig::from_toml("[robot]\nlattice_step = 10.0\n").unwrap_err();
        assert!(err.starts_with("robot:"), "{err}");
    }

    #[test]
    fn channel_seeds_differ() {
        let cfg = PipelineConfig {
            seed: 11,
            ..Default::default()
        };
        let seeds: Vec<u64> = (0..4).map(|c| cfg.stipple_params(c, 0.25).rng_seed).collect();
        assert!(seeds.windows(2).all(|w| w[0] != w[1]));
        assert_ne!(cfg.stipple_params(0, 1.0).rng_seed, cfg.tsp_params(0).rng_seed);
    }
}
