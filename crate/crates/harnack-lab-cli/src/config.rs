//! TOML experiment configuration: named sections with validated ranges.

use harnack_lab::{Error, GreenScale, ProcessModel, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelBlock,
    #[serde(default)]
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub capacity: CapacityBlock,
    #[serde(default)]
    pub constants: ConstantsBlock,
    #[serde(default)]
    pub harnack: HarnackBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: String,
    pub d: usize,
    pub alpha: Option<f64>,
    pub scale_file: Option<PathBuf>,
    /// Comparison constants for tabulated scales.
    pub c: Option<f64>,
    pub c_d: Option<f64>,
    pub alpha0: Option<f64>,
    pub eta0: Option<f64>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            kind: "stable".into(),
            d: 1,
            alpha: Some(1.0),
            scale_file: None,
            c: None,
            c_d: None,
            alpha0: None,
            eta0: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    /// Center of the main ball.
    pub x0: Option<Vec<f64>>,
    /// Main radius R.
    pub r: f64,
    pub target_radius: f64,
    pub target_center: Option<Vec<f64>>,
    pub domain_radius: f64,
    pub start: Option<Vec<f64>>,
    pub r_small: f64,
    pub r_large: f64,
    pub alpha_ratio: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        GeometryBlock {
            x0: None,
            r: 1.0,
            target_radius: 1.0,
            target_center: None,
            domain_radius: 4.0,
            start: None,
            r_small: 1.0,
            r_large: 2.0,
            alpha_ratio: 1.0 / 16.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub n: u64,
    pub seed: u64,
    pub max_steps: u64,
    pub boundary_shrink: f64,
    pub radial_bins: usize,
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock { n: 100_000, seed: 0, max_steps: 10_000, boundary_shrink: 0.5, radial_bins: 12 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityBlock {
    pub n_points: usize,
}

impl Default for CapacityBlock {
    fn default() -> Self {
        CapacityBlock { n_points: 512 }
    }
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConstantsBlock {
    /// Ball-capacity constant; derived from the volume-average comparison
    /// constant when absent.
    pub c0: Option<f64>,
    /// Jump-comparison constant; measured from the exit kernels when absent.
    pub cj: Option<f64>,
    /// Upper radius of validity of the jump comparison (infinite when absent).
    pub r1: Option<f64>,
    pub j_max: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackBlock {
    pub n_extreme: usize,
    pub grid_n: usize,
}

impl Default for HarnackBlock {
    fn default() -> Self {
        HarnackBlock { n_extreme: 200, grid_n: 4096 }
    }
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub format: Option<String>,
    pub path: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("config parse error in {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        match m.kind.as_str() {
            "stable" => {
                let a = m
                    .alpha
                    .ok_or_else(|| Error::Config("model.alpha is required for stable".into()))?;
                if !(a > 0.0 && a < 2.0) {
                    return Err(Error::Config(format!("model.alpha must lie in (0,2), got {a}")));
                }
            }
            "brownian" => {
                if m.d < 3 {
                    return Err(Error::Config("model.d must be >= 3 for brownian".into()));
                }
            }
            "tabulated" => {
                if m.scale_file.is_none() {
                    return Err(Error::Config("model.scale_file is required for tabulated".into()));
                }
                if let Some(p) = &m.scale_file {
                    if !p.exists() {
                        return Err(Error::Config(format!(
                            "model.scale_file {} does not exist",
                            p.display()
                        )));
                    }
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "model.kind must be stable | brownian | tabulated, got '{other}'"
                )))
            }
        }
        if m.d == 0 {
            return Err(Error::Config("model.d must be >= 1".into()));
        }
        let g = &self.geometry;
        for (name, v) in [
            ("geometry.r", g.r),
            ("geometry.target_radius", g.target_radius),
            ("geometry.domain_radius", g.domain_radius),
            ("geometry.r_small", g.r_small),
            ("geometry.r_large", g.r_large),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(g.alpha_ratio > 0.0 && g.alpha_ratio < 1.0) {
            return Err(Error::Config(format!(
                "geometry.alpha_ratio must lie in (0,1), got {}",
                g.alpha_ratio
            )));
        }
        if self.mc.n == 0 || self.mc.max_steps == 0 {
            return Err(Error::Config("mc.n and mc.max_steps must be >= 1".into()));
        }
        if !(self.mc.boundary_shrink > 0.0 && self.mc.boundary_shrink < 1.0) {
            return Err(Error::Config(format!(
                "mc.boundary_shrink must lie in (0,1), got {}",
                self.mc.boundary_shrink
            )));
        }
        if self.capacity.n_points < 8 {
            return Err(Error::Config("capacity.n_points must be >= 8".into()));
        }
        if let Some(c0) = self.constants.c0 {
            if !(c0 >= 1.0) {
                return Err(Error::Config(format!("constants.c0 must be >= 1, got {c0}")));
            }
        }
        if let Some(cj) = self.constants.cj {
            if !(cj > 0.0) {
                return Err(Error::Config(format!("constants.cj must be positive, got {cj}")));
            }
        }
        if let Some(f) = &self.output.format {
            if f != "json" && f != "csv" {
                return Err(Error::Config(format!("output.format must be json or csv, got '{f}'")));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ProcessModel> {
        let m = &self.model;
        match m.kind.as_str() {
            "stable" => ProcessModel::stable(m.d, m.alpha.expect("validated")),
            "brownian" => ProcessModel::brownian(m.d),
            "tabulated" => {
                let path = m.scale_file.as_ref().expect("validated");
                let scale = GreenScale::from_table_file(
                    path,
                    m.c_d.unwrap_or(2.0),
                    m.alpha0.unwrap_or(0.5),
                    m.eta0.unwrap_or(0.5),
                    m.c.unwrap_or(1.0),
                )?;
                ProcessModel::tabulated(m.d, scale)
            }
            _ => unreachable!("validated"),
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        self.geometry.x0.clone().unwrap_or_else(|| vec![0.0; self.model.d])
    }
}
