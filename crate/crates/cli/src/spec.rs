//! TOML experiment specification: one base configuration plus sweep axes.
//!
//! ```toml
//! version = 1
//! output = "rates.csv"
//!
//! [base]
//! scheduled_k = 4
//! trials = 2000
//!
//! [base.geometry]
//! type = "ura"
//! n_h = 8
//! n_v = 8
//!
//! [[sweep]]
//! param = "scheme"
//! values = ["RC", "TDC", "IQC"]
//! ```
//!
//! Every key is optional; missing keys take the defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tdcb_core::channel::{ArrayGeometry, ChannelProfile, CENTER_RANGE_H_DEG, CENTER_RANGE_V_DEG};
use tdcb_core::simulator::{Scheme, SimConfig, DEFAULT_RAY_DRAWS};

use crate::error::CliError;

pub const SPEC_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub base: BaseSpec,
    pub sweep: Vec<SweepAxis>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            version: SPEC_VERSION,
            output: None,
            base: BaseSpec::default(),
            sweep: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseSpec {
    pub scheduled_k: usize,
    /// Defaults to `scheduled_k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users_pool: Option<usize>,
    pub snr_db: f64,
    pub total_bits: u32,
    pub scheme: SchemeName,
    /// Defaults to the geometry's natural split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub ray_draws: usize,
    pub per_user_base: bool,
    pub geometry: GeometrySpec,
    pub profile: ProfileSpec,
}

impl Default for BaseSpec {
    fn default() -> Self {
        Self {
            scheduled_k: 4,
            users_pool: None,
            snr_db: 10.0,
            total_bits: 8,
            scheme: SchemeName(Scheme::Rc),
            n1: None,
            n2: None,
            trials: 1000,
            seed: 0,
            ray_draws: DEFAULT_RAY_DRAWS,
            per_user_base: false,
            geometry: GeometrySpec::default(),
            profile: ProfileSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometrySpec {
    Ura {
        n_h: usize,
        n_v: usize,
        #[serde(default = "half")]
        spacing_h: f64,
        #[serde(default = "half")]
        spacing_v: f64,
    },
    Ucca {
        rings: usize,
        per_ring: usize,
        /// Defaults to `0.5 j` wavelengths for ring `j`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radii: Option<Vec<f64>>,
    },
}

fn half() -> f64 {
    0.5
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self::Ura {
            n_h: 8,
            n_v: 8,
            spacing_h: 0.5,
            spacing_v: 0.5,
        }
    }
}

impl GeometrySpec {
    pub fn build(&self) -> Result<ArrayGeometry, CliError> {
        Ok(match self {
            Self::Ura {
                n_h,
                n_v,
                spacing_h,
                spacing_v,
            } => ArrayGeometry::ura(*n_h, *n_v, *spacing_h, *spacing_v)?,
            Self::Ucca { rings, per_ring, radii } => match radii {
                Some(r) => ArrayGeometry::ucca(*rings, *per_ring, r.clone())?,
                None => ArrayGeometry::ucca_default_radii(*rings, *per_ring)?,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSpec {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    pub sigma_deg: f64,
    pub ray_offset_rms_deg: f64,
    pub center_range_h_deg: f64,
    pub center_range_v_deg: f64,
    /// Defaults to `1 / (n_clusters * rays_per_cluster)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_variance: Option<f64>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        let p = ChannelProfile::default();
        Self {
            n_clusters: p.n_clusters,
            rays_per_cluster: p.rays_per_cluster,
            sigma_deg: p.cluster_rms,
            ray_offset_rms_deg: p.ray_offset_rms,
            center_range_h_deg: CENTER_RANGE_H_DEG,
            center_range_v_deg: CENTER_RANGE_V_DEG,
            gain_variance: None,
        }
    }
}

impl ProfileSpec {
    pub fn build(&self) -> ChannelProfile {
        ChannelProfile {
            n_clusters: self.n_clusters,
            rays_per_cluster: self.rays_per_cluster,
            center_range_h: self.center_range_h_deg,
            center_range_v: self.center_range_v_deg,
            cluster_rms: self.sigma_deg,
            ray_offset_rms: self.ray_offset_rms_deg,
            gain_variance: self.gain_variance,
        }
    }
}

/// Scheme written as `RC`, `TDC`, `IQC` or `perfect_cdi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SchemeName(pub Scheme);

impl TryFrom<String> for SchemeName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        Scheme::parse(&s)
            .map(SchemeName)
            .ok_or_else(|| format!("unknown scheme `{s}`, expected RC, TDC, IQC or perfect_cdi"))
    }
}

impl From<SchemeName> for String {
    fn from(s: SchemeName) -> String {
        s.0.as_str().to_owned()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "values", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAxis {
    ScheduledK(Vec<usize>),
    Sigma(Vec<f64>),
    TotalBits(Vec<u32>),
    SnrDb(Vec<f64>),
    Scheme(Vec<SchemeName>),
    Geometry(Vec<GeometrySpec>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ScheduledK(_) => "scheduled_k",
            Self::Sigma(_) => "sigma",
            Self::TotalBits(_) => "total_bits",
            Self::SnrDb(_) => "snr_db",
            Self::Scheme(_) => "scheme",
            Self::Geometry(_) => "geometry",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::ScheduledK(v) => v.len(),
            Self::Sigma(v) | Self::SnrDb(v) => v.len(),
            Self::TotalBits(v) => v.len(),
            Self::Scheme(v) => v.len(),
            Self::Geometry(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies value `i` of this axis to `cell`.
    fn apply(&self, i: usize, cell: &mut BaseSpec) {
        match self {
            Self::ScheduledK(v) => cell.scheduled_k = v[i],
            Self::Sigma(v) => cell.profile.sigma_deg = v[i],
            Self::TotalBits(v) => cell.total_bits = v[i],
            Self::SnrDb(v) => cell.snr_db = v[i],
            Self::Scheme(v) => cell.scheme = v[i],
            Self::Geometry(v) => cell.geometry = v[i].clone(),
        }
    }
}

impl BaseSpec {
    pub fn to_sim_config(&self) -> Result<SimConfig, CliError> {
        let geometry = self.geometry.build()?;
        let (nat1, nat2) = geometry.natural_split();
        let cfg = SimConfig {
            geometry,
            profile: self.profile.build(),
            users_pool: self.users_pool.unwrap_or(self.scheduled_k),
            scheduled_k: self.scheduled_k,
            snr_db: self.snr_db,
            total_bits: self.total_bits,
            scheme: self.scheme.0,
            n1: self.n1.unwrap_or(nat1),
            n2: self.n2.unwrap_or(nat2),
            trials: self.trials,
            seed: self.seed,
            ray_draws: self.ray_draws,
            per_user_base: self.per_user_base,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec is always serializable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != SPEC_VERSION {
            return Err(CliError::Config(format!(
                "unsupported spec version {}, expected {SPEC_VERSION}",
                self.version
            )));
        }
        for (i, axis) in self.sweep.iter().enumerate() {
            if axis.is_empty() {
                return Err(CliError::Config(format!(
                    "sweep axis {} (`{}`) has no values",
                    i + 1,
                    axis.name()
                )));
            }
            if self.sweep[..i].iter().any(|a| a.name() == axis.name()) {
                return Err(CliError::Config(format!("parameter `{}` is swept twice", axis.name())));
            }
        }
        for (index, cell) in self.cells().into_iter().enumerate() {
            cell.to_sim_config()
                .map_err(|e| CliError::Config(format!("cell {index}: {e}")))?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes, first axis slowest.
    pub fn cells(&self) -> Vec<BaseSpec> {
        let mut cells = vec![self.base.clone()];
        for axis in &self.sweep {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    (0..axis.len()).map(move |i| {
                        let mut c = c.clone();
                        axis.apply(i, &mut c);
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentSpec::parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_spec(spec: &ExperimentSpec, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, spec.to_toml()).map_err(|e| CliError::io(path, e))
}
