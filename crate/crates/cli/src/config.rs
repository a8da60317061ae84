//! JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::Deserialize;

use asdec::media::{presets, FeFunction, Medium, RasterMedium, Shape};
use asdec::mesh::{Mesh, Point, Rect};
use asdec::WeightSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub medium: MediumConfig,
    pub mesh: MeshConfig,
    pub epsilons: Vec<f64>,
    pub weight: WeightConfig,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// "pi", "q" or "auto" (default): Q when the background is nonzero.
    #[serde(default = "default_projector")]
    pub projector: String,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub dump_matrices: bool,
}

fn default_projector() -> String {
    "auto".into()
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumConfig {
    Preset {
        name: String,
    },
    Shapes {
        domain: [f64; 4],
        #[serde(default)]
        background_rest: f64,
        #[serde(default)]
        background: Vec<PieceConfig>,
        #[serde(default)]
        inclusions: Vec<PieceConfig>,
    },
    Raster {
        path: PathBuf,
        domain: [f64; 4],
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub shape: ShapeConfig,
    pub value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    Rectangle {
        min: [f64; 2],
        max: [f64; 2],
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    /// Angles in radians.
    SectorComplement {
        center: [f64; 2],
        radius: f64,
        angle_start: f64,
        angle_end: f64,
    },
    Star {
        center: [f64; 2],
        n_points: usize,
        r_outer: f64,
        r_inner: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h0: f64,
    pub levels: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    /// "q_power" or "max".
    pub form: String,
    #[serde(default = "default_q")]
    pub q: f64,
    /// "first" (default): sweeps over mesh levels use epsilons[0];
    /// "sweep": reserved for the epsilon sweep, which always walks the list.
    #[serde(default = "default_epsilon_policy")]
    pub epsilon_policy: String,
}

fn default_q() -> f64 {
    2.0
}

fn default_epsilon_policy() -> String {
    "first".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    #[serde(default = "default_iter_max")]
    pub iter_max: usize,
}

fn default_gamma() -> f64 {
    0.135
}

fn default_rho() -> f64 {
    0.04
}

fn default_tau_max() -> f64 {
    1.1
}

fn default_iter_max() -> usize {
    20
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            gamma: default_gamma(),
            rho: default_rho(),
            tau_max: default_tau_max(),
            iter_max: default_iter_max(),
        }
    }
}

/// Either a shape-based medium or raster data; both can be interpolated and
/// evaluated pointwise (rasters evaluate by nearest pixel).
pub enum LoadedMedium {
    Shapes(Medium),
    Raster(RasterMedium),
}

impl LoadedMedium {
    pub fn domain(&self) -> Rect {
        match self {
            LoadedMedium::Shapes(m) => m.domain(),
            LoadedMedium::Raster(r) => r.domain,
        }
    }

    pub fn value(&self, p: Point) -> f64 {
        match self {
            LoadedMedium::Shapes(m) => m.value_unchecked(p),
            LoadedMedium::Raster(r) => r.value_at(p),
        }
    }

    pub fn interpolate(&self, mesh: &Arc<Mesh>) -> asdec::Result<FeFunction> {
        match self {
            LoadedMedium::Shapes(m) => FeFunction::interpolate_medium(m, mesh),
            LoadedMedium::Raster(r) => FeFunction::interpolate_raster(r, mesh),
        }
    }

    pub fn background_is_zero(&self) -> bool {
        match self {
            LoadedMedium::Shapes(m) => m.background_is_zero(),
            LoadedMedium::Raster(_) => false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.mesh.levels.is_empty() {
            bail!("mesh.levels must be non-empty");
        }
        if self.epsilons.is_empty() {
            bail!("epsilons must be non-empty");
        }
        if !(self.mesh.h0 > 0.0) {
            bail!("mesh.h0 must be positive");
        }
        match self.weight.form.as_str() {
            "q_power" | "max" => {}
            other => bail!("weight.form must be 'q_power' or 'max', got '{other}'"),
        }
        match self.weight.epsilon_policy.as_str() {
            "first" | "sweep" => {}
            other => bail!("weight.epsilon_policy must be 'first' or 'sweep', got '{other}'"),
        }
        match self.projector.as_str() {
            "pi" | "q" | "auto" => {}
            other => bail!("projector must be 'pi', 'q' or 'auto', got '{other}'"),
        }
        for &e in &self.epsilons {
            if !(e > 0.0) {
                bail!("epsilons must be positive, got {e}");
            }
        }
        Ok(())
    }

    pub fn load_medium(&self, config_dir: &Path) -> anyhow::Result<LoadedMedium> {
        match &self.medium {
            MediumConfig::Preset { name } => {
                let m = match name.as_str() {
                    "disc" => presets::disc(),
                    "square" => presets::square(),
                    "pacman" => presets::pacman(),
                    "star" => presets::star(),
                    "four_squares" => presets::four_squares(),
                    "nonuniform_background" => presets::nonuniform_background(),
                    other => bail!("unknown medium preset '{other}'"),
                };
                Ok(LoadedMedium::Shapes(m))
            }
            MediumConfig::Shapes {
                domain,
                background_rest,
                background,
                inclusions,
            } => {
                let rect = Rect::new(domain[0], domain[1], domain[2], domain[3]);
                let mut medium = Medium::new(rect, *background_rest);
                for piece in background {
                    medium = medium.with_background_piece(piece.shape.build(), piece.value)?;
                }
                for piece in inclusions {
                    medium = medium.with_inclusion(piece.shape.build(), piece.value)?;
                }
                Ok(LoadedMedium::Shapes(medium))
            }
            MediumConfig::Raster { path, domain } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    config_dir.join(path)
                };
                let bytes = std::fs::read(&full)
                    .with_context(|| format!("cannot read raster {}", full.display()))?;
                let rect = Rect::new(domain[0], domain[1], domain[2], domain[3]);
                Ok(LoadedMedium::Raster(RasterMedium::from_pgm(&bytes, rect)?))
            }
        }
    }

    pub fn weight_spec(&self, epsilon: f64) -> asdec::Result<WeightSpec> {
        match self.weight.form.as_str() {
            "max" => WeightSpec::max_form(epsilon),
            _ => WeightSpec::q_power(self.weight.q, epsilon),
        }
    }

    /// Mesh for level `m`: cell size `h0 / 2^m` rounded to whole cells.
    pub fn mesh_for_level(&self, domain: Rect, level: u32) -> asdec::Result<Arc<Mesh>> {
        let h = self.mesh.h0 / f64::powi(2.0, level as i32);
        let nx = (domain.width() / h).round().max(1.0) as usize;
        let ny = (domain.height() / h).round().max(1.0) as usize;
        Ok(Arc::new(Mesh::uniform(domain, nx, ny)?))
    }

    /// Projector choice for this medium: true = affine Q, false = plain Pi.
    pub fn use_affine_projector(&self, medium: &LoadedMedium) -> bool {
        match self.projector.as_str() {
            "pi" => false,
            "q" => true,
            _ => !medium.background_is_zero(),
        }
    }
}

impl ShapeConfig {
    pub fn build(&self) -> Shape {
        match self {
            ShapeConfig::Disc { center, radius } => Shape::Disc {
                center: Point::new(center[0], center[1]),
                radius: *radius,
            },
            ShapeConfig::Rectangle { min, max } => {
                Shape::rectangle(min[0], min[1], max[0], max[1])
            }
            ShapeConfig::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| Point::new(v[0], v[1])).collect(),
            },
            ShapeConfig::SectorComplement {
                center,
                radius,
                angle_start,
                angle_end,
            } => Shape::SectorComplement {
                center: Point::new(center[0], center[1]),
                radius: *radius,
                angle_start: *angle_start,
                angle_end: *angle_end,
            },
            ShapeConfig::Star {
                center,
                n_points,
                r_outer,
                r_inner,
            } => Shape::Star {
                center: Point::new(center[0], center[1]),
                n_points: *n_points,
                r_outer: *r_outer,
                r_inner: *r_inner,
            },
        }
    }
}
