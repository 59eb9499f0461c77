//! JSON run configurations.
//!
//! Complex numbers are `[re, im]` pairs and polynomial terms are
//! `[[exponents...], re, im]` triples. Every section except `foliation` has defaults.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::brownian::SamplerConfig;
use crate::ergodic::{Binning, Seeding, TransitionConfig};
use crate::error::{Error, Result};
use crate::foliation::{AmbientKind, AmbientPoint, Classification, Foliation, LinearModel, SingularSeed, Tolerances};
use crate::heat::HeatTailConfig;
use crate::poly::Poly;
use crate::projection::ProjectionConfig;

pub type ComplexSpec = [f64; 2];

fn cx(c: ComplexSpec) -> Complex64 {
    Complex64::new(c[0], c[1])
}

/// A polynomial term: exponent tuple, real part, imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec(pub Vec<u32>, pub f64, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    #[serde(default)]
    pub chart: usize,
    pub coords: Vec<ComplexSpec>,
}

impl PointSpec {
    pub fn point(&self) -> AmbientPoint {
        let coords: Vec<Complex64> = self.coords.iter().map(|c| cx(*c)).collect();
        AmbientPoint::new(self.chart, &coords)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModelSpec {
    pub alpha: ComplexSpec,
    pub beta: ComplexSpec,
    #[serde(default)]
    pub gamma: Option<ComplexSpec>,
    /// Radius of validity; unbounded when absent.
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularSpec {
    pub seed: PointSpec,
    #[serde(default)]
    pub linear_model: Option<LinearModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    pub kind: AmbientKind,
    pub degree: usize,
    #[serde(default)]
    pub invariant_plane: bool,
    /// Affine: one polynomial per coordinate. Projective: the homogeneous field.
    pub components: Vec<Vec<TermSpec>>,
    pub singularities: Vec<SingularSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl FoliationSpec {
    pub fn build(&self) -> Result<Foliation> {
        let nvars = self.components.len();
        let mut polys = Vec::with_capacity(nvars);
        for (i, comp) in self.components.iter().enumerate() {
            for t in comp {
                if t.0.len() != nvars {
                    return Err(Error::Config(format!("component {i}: exponent tuple {:?} needs {nvars} entries", t.0)));
                }
            }
            polys.push(Poly::from_terms(nvars, comp.iter().map(|t| (t.0.clone(), Complex64::new(t.1, t.2)))));
        }
        let seeds: Vec<SingularSeed> = self
            .singularities
            .iter()
            .map(|s| SingularSeed {
                seed: s.seed.point(),
                linear_model: s.linear_model.as_ref().map(|m| LinearModel {
                    alpha: cx(m.alpha),
                    beta: cx(m.beta),
                    gamma: m.gamma.map(cx),
                    radius: m.radius.unwrap_or(f64::INFINITY),
                }),
            })
            .collect();
        match self.kind {
            AmbientKind::Affine => Foliation::affine(polys, self.degree, self.invariant_plane, &seeds, self.tolerances),
            AmbientKind::Projective => Foliation::projective(polys, self.degree, self.invariant_plane, &seeds, self.tolerances),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovExperiment {
    /// Expected exponents; derived from the degree when absent.
    pub expected_lambda: Option<f64>,
    pub expected_mu: Option<f64>,
    pub level: f64,
}

impl Default for LyapunovExperiment {
    fn default() -> Self {
        LyapunovExperiment { expected_lambda: None, expected_mu: None, level: 0.95 }
    }
}

/// The exponents `(d + 2) / (d - 1)` and `1 / (d + 1)` predicted for degree `d > 1`.
pub fn predicted_exponents(degree: usize) -> Option<(f64, f64)> {
    if degree < 2 {
        return None;
    }
    let d = degree as f64;
    Some(((d + 2.0) / (d - 1.0), 1.0 / (d + 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionExperiment {
    pub rho: f64,
    pub thetas: Vec<f64>,
}

impl Default for ContractionExperiment {
    fn default() -> Self {
        ContractionExperiment { rho: 0.1, thetas: vec![1e-3, 1e-2, 5e-2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupationExperiment {
    pub binning: Binning,
    pub horizons: Vec<f64>,
}

impl Default for OccupationExperiment {
    fn default() -> Self {
        OccupationExperiment { binning: Binning::default(), horizons: vec![1e2, 1e3, 1e4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityExperiment {
    /// Transverse offset of the second start.
    pub offset: f64,
    pub seeding: Seeding,
    pub transition: TransitionConfig,
    /// Offsets of the transition-similarity trend.
    pub offsets: Vec<f64>,
}

impl Default for SimilarityExperiment {
    fn default() -> Self {
        SimilarityExperiment {
            offset: 1e-3,
            seeding: Seeding::Matched,
            transition: TransitionConfig::default(),
            offsets: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NearPlaneExperiment {
    pub eps: f64,
    /// Distance to the plane of the start, along the last coordinate.
    pub start_offset: f64,
    pub horizons: Vec<f64>,
}

impl Default for NearPlaneExperiment {
    fn default() -> Self {
        NearPlaneExperiment { eps: 0.05, start_offset: 1e-2, horizons: vec![1e2, 1e3, 1e4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PesinExperiment {
    pub samples: usize,
    pub len: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Bound on the off-diagonal entries.
    pub m_bound: f64,
    pub eps: f64,
    pub spread: f64,
    /// Bound on the second derivatives of the perturbed maps.
    pub quadratic: f64,
    pub steps: usize,
}

impl Default for PesinExperiment {
    fn default() -> Self {
        PesinExperiment { samples: 1000, len: 400, lambda: 1.0, mu: 1.2, m_bound: 1.0, eps: 0.2, spread: 0.3, quadratic: 2.0, steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiments {
    pub lyapunov: LyapunovExperiment,
    pub contraction: ContractionExperiment,
    pub occupation: OccupationExperiment,
    pub similarity: SimilarityExperiment,
    pub near_plane: NearPlaneExperiment,
    pub heat_tail: HeatTailConfig,
    pub pesin: PesinExperiment,
}

fn default_paths() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub foliation: FoliationSpec,
    /// Allows non-hyperbolic singularities.
    #[serde(default)]
    pub exploratory: bool,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Start points, used cyclically by ensembles.
    pub starts: Vec<PointSpec>,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub experiments: Experiments,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    pub fn start_points(&self) -> Vec<AmbientPoint> {
        self.starts.iter().map(PointSpec::point).collect()
    }

    /// Builds the foliation and checks the run parameters.
    pub fn build(&self) -> Result<Foliation> {
        self.sampler.validate()?;
        self.projection.validate()?;
        if self.paths == 0 {
            return Err(Error::Config("paths must be positive".into()));
        }
        if self.starts.is_empty() {
            return Err(Error::Config("at least one start point is required".into()));
        }
        let f = self.foliation.build()?;
        if !self.exploratory {
            if let Some((i, _)) = f
                .singularities()
                .iter()
                .enumerate()
                .find(|(_, s)| s.classification != Classification::Hyperbolic)
            {
                return Err(Error::Config(format!("singularity {i} is not hyperbolic; mark the run exploratory to allow it")));
            }
        }
        for (i, p) in self.start_points().iter().enumerate() {
            if p.chart >= f.chart_count() || self.starts[i].coords.len() != f.dim() {
                return Err(Error::Config(format!("start {i} does not match the ambient space")));
            }
        }
        Ok(f)
    }
}
