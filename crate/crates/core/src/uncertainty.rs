//! Affine map-error model and the statistics that summarise sample ensembles.
//!
//! Each feature of a map is perturbed independently: a random linear map
//! (rotation, isotropic scale, shear) about the feature's centroid, then a
//! random translation. Drawing `N` such perturbations of a whole feature set
//! gives an ensemble of plausible maps.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CartesianLocation, TypedFeatureSet};
use crate::rng::{fnv1a, StreamRng};

const ENSEMBLE_DOMAIN: u64 = 0x656e_7365_6d62_6c65;

/// Error parameters for one feature type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorParams {
    /// Mean translation (east, north) in meters.
    pub translation_mean: [f64; 2],
    /// Translation covariance in m², row-major.
    pub translation_cov: [[f64; 2]; 2],
    /// Rotation standard deviation in radians.
    pub rotation_sigma: f64,
    /// Standard deviation of the isotropic scale factor around 1.
    pub scale_sigma: f64,
    /// Standard deviation of the horizontal shear factor around 0.
    pub shear_sigma: f64,
}

impl ErrorParams {
    /// Pure Gaussian translation with the given per-axis variance.
    pub fn translation(variance: f64) -> Self {
        ErrorParams {
            translation_cov: [[variance, 0.0], [0.0, variance]],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [[a, b], [c, d]] = self.translation_cov;
        let finite = self.translation_mean.iter().all(|v| v.is_finite())
            && [a, b, c, d].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("error parameters must be finite"));
        }
        if (b - c).abs() > 1e-12 * (1.0 + b.abs().max(c.abs())) {
            return Err(Error::config("translation covariance is not symmetric"));
        }
        if a < 0.0 || d < 0.0 || a * d - b * c < -1e-12 * (1.0 + (a * d).abs()) {
            return Err(Error::config(
                "translation covariance is not positive semi-definite",
            ));
        }
        for (name, s) in [
            ("rotation_sigma", self.rotation_sigma),
            ("scale_sigma", self.scale_sigma),
            ("shear_sigma", self.shear_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config(format!("{name} must be >= 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Lower-triangular factor of the translation covariance. Tolerates
    /// singular (semi-definite) matrices.
    fn cholesky(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.translation_cov;
        let l11 = a.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { b / l11 } else { 0.0 };
        let l22 = (d - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    }
}

/// Per-type error parameters with an optional fallback entry.
///
/// The JSON form is a map from type tag to [`ErrorParams`]; the key
/// `default` holds the fallback.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineErrorModel {
    #[serde(flatten)]
    entries: BTreeMap<String, ErrorParams>,
}

impl AffineErrorModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// A model whose default is a pure Gaussian translation.
    pub fn uniform_translation(variance: f64) -> Self {
        Self::new().with_default(ErrorParams::translation(variance))
    }

    pub fn with_default(self, params: ErrorParams) -> Self {
        self.with_type("default", params)
    }

    pub fn with_type(mut self, type_tag: impl Into<String>, params: ErrorParams) -> Self {
        self.entries.insert(type_tag.into(), params);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: AffineErrorModel = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("error model: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("error model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (tag, p) in &self.entries {
            p.validate()
                .map_err(|e| Error::config(format!("error model entry `{tag}`: {e}")))?;
        }
        Ok(())
    }

    pub fn params(&self, type_tag: &str) -> Result<&ErrorParams> {
        self.entries
            .get(type_tag)
            .or_else(|| self.entries.get("default"))
            .ok_or_else(|| {
                Error::config(format!(
                    "no error parameters for `{type_tag}` and no default entry"
                ))
            })
    }
}

/// One random linear map plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSample {
    pub transform: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl AffineSample {
    pub const IDENTITY: AffineSample = AffineSample {
        transform: [[1.0, 0.0], [0.0, 1.0]],
        translation: [0.0, 0.0],
    };

    /// Applies the linear part about `center`, then translates.
    ///
    /// Written as `v + (Φ - I)(v - center) + t` so that the identity map
    /// reproduces `v` bit for bit.
    pub fn apply(&self, v: CartesianLocation, center: CartesianLocation) -> CartesianLocation {
        let [[a, b], [c, d]] = self.transform;
        let (x, y) = (v.east - center.east, v.north - center.north);
        CartesianLocation::new(
            v.east + ((a - 1.0) * x + b * y) + self.translation[0],
            v.north + (c * x + (d - 1.0) * y) + self.translation[1],
        )
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sigma * z
}

/// Draws Φ = Rotation(θ)·Scale(s)·Shear(h) and t ~ N(mean, cov).
pub fn sample_affine<R: Rng + ?Sized>(
    model: &AffineErrorModel,
    type_tag: &str,
    rng: &mut R,
) -> Result<AffineSample> {
    let p = model.params(type_tag)?;
    Ok(draw(p, rng))
}

fn draw<R: Rng + ?Sized>(p: &ErrorParams, rng: &mut R) -> AffineSample {
    let theta = normal(rng, 0.0, p.rotation_sigma);
    let s = normal(rng, 1.0, p.scale_sigma);
    let h = normal(rng, 0.0, p.shear_sigma);
    let (sin, cos) = theta.sin_cos();
    // R·(sI)·[[1, h], [0, 1]]
    let transform = [[s * cos, s * (cos * h - sin)], [s * sin, s * (sin * h + cos)]];

    let l = p.cholesky();
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    let translation = [
        p.translation_mean[0] + l[0][0] * z0,
        p.translation_mean[1] + l[1][0] * z0 + l[1][1] * z1,
    ];
    AffineSample {
        transform,
        translation,
    }
}

/// `N` perturbed copies of one typed feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEnsemble {
    pub type_tag: String,
    pub samples: Vec<TypedFeatureSet>,
}

impl FeatureEnsemble {
    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn feature_count(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }
}

/// Perturbs every feature of `source` independently, `n` times.
///
/// Sample `k` of feature `i` draws from a stream keyed by
/// `(seed, type_tag, i, k)`, so the output does not depend on scheduling.
pub fn generate_ensemble(
    source: &TypedFeatureSet,
    model: &AffineErrorModel,
    n: usize,
    seed: u64,
) -> Result<FeatureEnsemble> {
    if n == 0 {
        return Err(Error::domain("ensemble size must be >= 1"));
    }
    let params = model.params(&source.type_tag)?;
    let tag_key = fnv1a(&source.type_tag);
    let centroids: Vec<_> = source.features.iter().map(|g| g.centroid()).collect();

    let samples = (0..n)
        .into_par_iter()
        .map(|k| {
            let features = source
                .features
                .iter()
                .zip(&centroids)
                .enumerate()
                .map(|(i, (g, &center))| {
                    let mut rng =
                        StreamRng::new(seed, &[ENSEMBLE_DOMAIN, tag_key, i as u64, k as u64]);
                    let a = draw(params, &mut rng);
                    g.with_vertices(g.vertices().iter().map(|&v| a.apply(v, center)).collect())
                })
                .collect();
            TypedFeatureSet {
                type_tag: source.type_tag.clone(),
                features,
                line_width: source.line_width,
            }
        })
        .collect();

    Ok(FeatureEnsemble {
        type_tag: source.type_tag.clone(),
        samples,
    })
}

/// Mean and variance of a normal distribution; `variance == 0` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::domain(format!("variance must be >= 0, got {variance}")));
        }
        Ok(GaussianParams { mean, variance })
    }
}

/// Sample mean and Bessel-corrected sample variance.
pub fn moment_match(values: &[f64]) -> Result<GaussianParams> {
    if values.is_empty() {
        return Err(Error::domain("moment matching needs at least one value"));
    }
    // Identical samples are a point mass; summing them can drift by an ulp.
    if values.iter().all(|&v| v == values[0]) {
        return Ok(GaussianParams {
            mean: values[0],
            variance: 0.0,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() == 1 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    Ok(GaussianParams { mean, variance })
}

/// Fraction of samples that hit.
pub fn occupancy_estimate(hits: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("occupancy needs at least one sample"));
    }
    if hits > n {
        return Err(Error::domain(format!("hits {hits} exceed sample count {n}")));
    }
    Ok(hits as f64 / n as f64)
}
