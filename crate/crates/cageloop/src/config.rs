//! TOML run configuration.
//!
//! Every knob has a default, so an empty file is a valid config. The raw
//! file text is kept alongside the parsed values and echoed byte-for-byte
//! into the run report, which makes a result directory self-describing.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gripper::GripperSpec;
use crate::pose::PoseParams;
use crate::refine::{RankWeights, RelaxParams, ResidualParams};
use crate::Vec3;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// voxels per grid side
    pub resolution: usize,
    /// base-point sample budget
    pub samples: usize,
    /// grid margin as a fraction of the cloud's bbox diagonal
    pub margin: f64,
    /// surface offset radius r; doubles as the finger sweep radius
    pub offset: f64,
    pub seed: u64,
    /// drop base samples whose neighborhood is convex (both principal
    /// curvatures negative); disable for spheres and other all-convex shapes
    pub curvature_filter: bool,
    pub gravity: [f64; 3],
    pub gripper: GripperConfig,
    pub relax: RelaxConfig,
    pub filter: FilterConfig,
    pub dedup: DedupConfig,
    pub rank: RankConfig,
    pub pose: PoseConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperConfig {
    /// finger length h; loops longer than 4h are unreachable
    pub h: f64,
    /// approach-cone height; defaults to h/2 when omitted
    pub approach_depth: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    pub iters: usize,
    pub step: f64,
    pub resample_every: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// keep loops whose local-shortest residual stays below this
    pub residual_max: f64,
    pub residual_iters: usize,
    pub window_frac: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    /// Hausdorff radius for near-duplicates, in voxel spacings
    pub tau_voxels: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    /// weights for (centroid, horizontality, length, residual)
    pub weights: [f64; 4],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseConfig {
    pub azimuths: usize,
    pub rings: usize,
    pub angle_tol: f64,
    pub min_angle: f64,
    pub spread_deg: f64,
    pub palm_offset_frac: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            resolution: 50,
            samples: 500,
            margin: 0.15,
            offset: 0.02,
            seed: 0,
            curvature_filter: true,
            gravity: [0.0, 0.0, -1.0],
            gripper: GripperConfig::default(),
            relax: RelaxConfig::default(),
            filter: FilterConfig::default(),
            dedup: DedupConfig::default(),
            rank: RankConfig::default(),
            pose: PoseConfig::default(),
        }
    }
}

impl Default for GripperConfig {
    fn default() -> Self {
        GripperConfig {
            h: 0.5,
            approach_depth: None,
        }
    }
}

impl Default for RelaxConfig {
    fn default() -> Self {
        let p = RelaxParams::default();
        RelaxConfig {
            iters: p.iters,
            step: p.step,
            resample_every: p.resample_every,
        }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = ResidualParams::default();
        FilterConfig {
            residual_max: 0.02,
            residual_iters: p.iters,
            window_frac: p.window_frac,
        }
    }
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig { tau_voxels: 2.0 }
    }
}

impl Default for RankConfig {
    fn default() -> Self {
        let w = RankWeights::default();
        RankConfig {
            weights: [w.centroid, w.horizontality, w.length, w.residual],
        }
    }
}

impl Default for PoseConfig {
    fn default() -> Self {
        let p = PoseParams::default();
        PoseConfig {
            azimuths: p.azimuths,
            rings: p.rings,
            angle_tol: p.angle_tol,
            min_angle: p.min_angle,
            spread_deg: p.spread_deg,
            palm_offset_frac: p.palm_offset_frac,
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML string; returns the parsed config paired with the raw
    /// text for byte-exact echoing.
    pub fn parse(text: &str, path: &str) -> Result<(Self, String)> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok((cfg, text.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 16 {
            return Err(Error::BadParams(format!(
                "resolution {} < 16",
                self.resolution
            )));
        }
        if self.samples == 0 {
            return Err(Error::BadParams("samples = 0".into()));
        }
        for (name, v) in [
            ("margin", self.margin),
            ("offset", self.offset),
            ("gripper.h", self.gripper.h),
            ("relax.step", self.relax.step),
            ("filter.residual_max", self.filter.residual_max),
            ("dedup.tau_voxels", self.dedup.tau_voxels),
            ("pose.angle_tol", self.pose.angle_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadParams(format!("{name} = {v} must be positive")));
            }
        }
        if self.relax.step > 1.0 {
            return Err(Error::BadParams(format!(
                "relax.step {} > 1 overshoots the midpoint",
                self.relax.step
            )));
        }
        if let Some(d) = self.gripper.approach_depth {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::BadParams(format!(
                    "gripper.approach_depth = {d} must be positive"
                )));
            }
        }
        let g = Vec3::from(self.gravity);
        if g.norm() < 1e-9 {
            return Err(Error::BadParams("gravity vector is zero".into()));
        }
        if self.rank.weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::BadParams(format!(
                "rank.weights {:?} must be non-negative",
                self.rank.weights
            )));
        }
        if self.pose.azimuths == 0 || self.pose.rings == 0 {
            return Err(Error::BadParams(
                "pose.azimuths and pose.rings must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn gripper_spec(&self) -> Result<GripperSpec> {
        let depth = self
            .gripper
            .approach_depth
            .unwrap_or(0.5 * self.gripper.h);
        GripperSpec::new(self.gripper.h, self.offset, depth)
    }

    pub fn gravity_vec(&self) -> Vec3 {
        Vec3::from(self.gravity).normalize()
    }

    pub fn relax_params(&self) -> RelaxParams {
        RelaxParams {
            iters: self.relax.iters,
            step: self.relax.step,
            resample_every: self.relax.resample_every.max(1),
        }
    }

    pub fn residual_params(&self) -> ResidualParams {
        ResidualParams {
            iters: self.filter.residual_iters,
            window_frac: self.filter.window_frac,
        }
    }

    pub fn rank_weights(&self) -> RankWeights {
        RankWeights {
            centroid: self.rank.weights[0],
            horizontality: self.rank.weights[1],
            length: self.rank.weights[2],
            residual: self.rank.weights[3],
        }
    }

    pub fn pose_params(&self) -> PoseParams {
        PoseParams {
            azimuths: self.pose.azimuths,
            rings: self.pose.rings,
            angle_tol: self.pose.angle_tol,
            min_angle: self.pose.min_angle,
            spread_deg: self.pose.spread_deg,
            palm_offset_frac: self.pose.palm_offset_frac,
        }
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let (cfg, raw) = PipelineConfig::parse("", "inline").unwrap();
        assert_eq!(cfg.resolution, 50);
        assert_eq!(cfg.samples, 500);
        assert_eq!(cfg.gravity, [0.0, 0.0, -1.0]);
        assert!(cfg.curvature_filter);
        assert_eq!(raw, "");
        let spec = cfg.gripper_spec().unwrap();
        assert_eq!(spec.h, 0.5);
        assert_eq!(spec.r, cfg.offset);
        assert_eq!(spec.approach_depth, 0.25); // h/2 when omitted
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let text = "resolution = 64\noffset = 0.05\n[gripper]\nh = 0.4\napproach_depth = 0.3\n";
        let (cfg, raw) = PipelineConfig::parse(text, "inline").unwrap();
        assert_eq!(cfg.resolution, 64);
        assert_eq!(cfg.offset, 0.05);
        assert_eq!(cfg.gripper.h, 0.4);
        assert_eq!(cfg.gripper_spec().unwrap().approach_depth, 0.3);
        assert_eq!(cfg.relax.iters, 200);
        assert_eq!(raw, text, "raw text survives byte-for-byte");
    }

    #[test]
    fn bad_values_are_rejected_with_context() {
        assert!(PipelineConfig::parse("resolution = 8", "x").is_err());
        assert!(PipelineConfig::parse("offset = -0.1", "x").is_err());
        assert!(PipelineConfig::parse("gravity = [0.0, 0.0, 0.0]", "x").is_err());
        assert!(PipelineConfig::parse("[relax]\nstep = 1.5", "x").is_err());
        // unknown keys are almost always typos; refuse them
        let err = PipelineConfig::parse("resolutoin = 50", "cfg.toml").unwrap_err();
        match err {
            Error::Parse { path, .. } => assert_eq!(path, "cfg.toml"),
            other => panic!("expected Parse, got {other:?}"),
        }
    }
}
