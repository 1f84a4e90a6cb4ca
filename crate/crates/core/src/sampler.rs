//! Design generators: rejection sampling through a trained tree, direct
//! sampling from template sets, and correlated free-pixel fills.

use faer::{Mat, Side};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sff::{featurize, ShapeLibrary};
use crate::template::{Template, TemplateSet};
use crate::tree::SparseTree;
use crate::unitcell::{irreducible_len, irreducible_pixels, UnitCell};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FreeLaw {
    Independent { p_stiff: f64 },
    /// Matern 3/2 correlated signs with length scale in pixels.
    Matern { length: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub resolution: usize,
    pub max_attempts: u64,
    pub law: FreeLaw,
}

impl SamplerConfig {
    pub fn new(seed: u64, resolution: usize) -> Self {
        Self {
            seed,
            resolution,
            max_attempts: 1_000_000,
            law: FreeLaw::Independent { p_stiff: 0.5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![10, 20, 40, 80].contains(&self.resolution) {
            return invalid(format!("resolution {} not in {{10, 20, 40, 80}}", self.resolution));
        }
        match self.law {
            FreeLaw::Independent { p_stiff } if !(0.0..=1.0).contains(&p_stiff) => {
                invalid("p_stiff must lie in [0, 1]")
            }
            FreeLaw::Matern { length } if !(length > 0.0) => invalid("Matern length must be > 0"),
            _ => Ok(()),
        }
    }
}

/// Random stream owned by one draw, so draws can run in any order.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniformly random symmetric cell.
pub fn uniform_cell(n: usize, rng: &mut impl Rng) -> Result<UnitCell> {
    let bits: Vec<bool> = (0..irreducible_len(n)).map(|_| rng.random_bool(0.5)).collect();
    UnitCell::from_bits(n, &bits)
}

/// First uniform cell accepted by the tree, with the number of attempts.
///
/// Features are coarse at `base_n` and fine above it.
pub fn sample_rejection_tree(
    tree: &SparseTree,
    lib: &ShapeLibrary,
    base_n: usize,
    cfg: &SamplerConfig,
    draw: u64,
) -> Result<(UnitCell, u64)> {
    cfg.validate()?;
    if lib.len() != tree.feature_names.len() {
        return Err(Error::DimensionMismatch {
            expected: tree.feature_names.len(),
            got: lib.len(),
        });
    }
    let mut rng = draw_rng(cfg.seed, draw);
    for attempt in 1..=cfg.max_attempts {
        let cell = uniform_cell(cfg.resolution, &mut rng)?;
        let sff = featurize(&cell, lib, base_n)?;
        if tree.predict(&sff)? == 1 {
            return Ok((cell, attempt));
        }
    }
    Err(Error::BudgetExhausted {
        attempts: cfg.max_attempts,
    })
}

/// Matern 3/2 kernel.
pub fn matern32(d: f64, length: f64) -> f64 {
    let s = 3f64.sqrt() * d / length;
    (1.0 + s) * (-s).exp()
}

/// Covariance entry after the `sin(pi k / 2)` rescaling.
pub fn sign_covariance(d: f64, length: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 * matern32(d, length)).sin()
}

/// Representative position of irreducible pixel `k`: its center in the
/// canonical quadrant.
pub fn pixel_center(n: usize, k: usize) -> (f64, f64) {
    let (r, c) = irreducible_pixels(n)[k];
    (r as f64 + 0.5, c as f64 + 0.5)
}

/// Gaussian sign field over the free entries of one template.
#[derive(Clone, Debug)]
pub struct MaternField {
    free: Vec<usize>,
    /// `C = F F^T` with clipped eigenvalues.
    factor: Mat<f64>,
}

impl MaternField {
    pub fn new(template: &Template, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return invalid("Matern length must be > 0");
        }
        let n = template.resolution();
        let free: Vec<usize> = (0..template.len()).filter(|&k| template.entry(k).is_none()).collect();
        let pos: Vec<(f64, f64)> = free.iter().map(|&k| pixel_center(n, k)).collect();
        let m = free.len();
        let cov = Mat::<f64>::from_fn(m, m, |i, j| {
            let d = ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt();
            sign_covariance(d, length)
        });
        let factor = if m == 0 {
            Mat::zeros(0, 0)
        } else {
            let eig = cov
                .as_ref()
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Consistency(format!("covariance factorization failed: {e:?}")))?;
            let s = eig.S();
            let u = eig.U();
            Mat::from_fn(m, m, |i, j| u[(i, j)] * s[j].max(0.0).sqrt())
        };
        Ok(Self { free, factor })
    }

    pub fn free_pixels(&self) -> &[usize] {
        &self.free
    }

    /// Correlation of the Gaussian coordinates at free positions `i`, `j`
    /// actually realized after clipping.
    pub fn realized_correlation(&self, i: usize, j: usize) -> f64 {
        let m = self.free.len();
        let dot = |a: usize, b: usize| (0..m).map(|k| self.factor[(a, k)] * self.factor[(b, k)]).sum::<f64>();
        dot(i, j) / (dot(i, i) * dot(j, j)).sqrt()
    }

    /// Correlated Gaussian coordinates, one per free pixel.
    pub fn gaussian(&self, rng: &mut impl Rng) -> Vec<f64> {
        let m = self.free.len();
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        (0..m)
            .map(|i| (0..m).map(|j| self.factor[(i, j)] * z[j]).sum())
            .collect()
    }

    /// Copies the template's fixed entries and thresholds the field at zero.
    pub fn fill(&self, template: &Template, rng: &mut impl Rng) -> Result<UnitCell> {
        let mut cell = fixed_part(template)?;
        for (&k, g) in self.free.iter().zip(self.gaussian(rng)) {
            cell.set(k, g > 0.0);
        }
        Ok(cell)
    }
}

fn fixed_part(template: &Template) -> Result<UnitCell> {
    let mut cell = UnitCell::soft(template.resolution())?;
    for k in 0..template.len() {
        if let Some(v) = template.entry(k) {
            cell.set(k, v);
        }
    }
    Ok(cell)
}

/// Free pixels drawn with the Matern sign law, fixed entries copied.
pub fn sample_matern_free(template: &Template, length: f64, rng: &mut impl Rng) -> Result<UnitCell> {
    MaternField::new(template, length)?.fill(template, rng)
}

/// Template-set sampler prepared for a target resolution.
#[derive(Clone, Debug)]
pub struct TemplateSampler {
    cfg: SamplerConfig,
    templates: Vec<Template>,
    choose: WeightedIndex<f64>,
    fields: Option<Vec<MaternField>>,
}

impl TemplateSampler {
    pub fn new(set: &TemplateSet, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if set.templates.is_empty() {
            return invalid("template set is empty");
        }
        if cfg.resolution % set.resolution != 0 {
            return invalid(format!(
                "resolution {} is not a multiple of the template resolution {}",
                cfg.resolution, set.resolution
            ));
        }
        let factor = cfg.resolution / set.resolution;
        let templates = set
            .templates
            .iter()
            .map(|t| t.transfer(factor))
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = set.supports.iter().map(|&s| s as f64).collect();
        let choose = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidArgument(format!("template supports: {e}")))?;
        let fields = match cfg.law {
            FreeLaw::Matern { length } => Some(
                templates
                    .iter()
                    .map(|t| MaternField::new(t, length))
                    .collect::<Result<Vec<_>>>()?,
            ),
            FreeLaw::Independent { .. } => None,
        };
        Ok(Self {
            cfg: *cfg,
            templates,
            choose,
            fields,
        })
    }

    /// One design and the index of the template it was drawn from.
    pub fn draw(&self, index: u64) -> Result<(UnitCell, usize)> {
        let mut rng = draw_rng(self.cfg.seed, index);
        let j = self.choose.sample(&mut rng);
        let t = &self.templates[j];
        let cell = match (&self.fields, self.cfg.law) {
            (Some(fields), _) => fields[j].fill(t, &mut rng)?,
            (None, FreeLaw::Independent { p_stiff }) => {
                let mut cell = fixed_part(t)?;
                for k in 0..t.len() {
                    if t.entry(k).is_none() {
                        cell.set(k, rng.random_bool(p_stiff));
                    }
                }
                cell
            }
            (None, FreeLaw::Matern { .. }) => unreachable!("fields prepared for Matern law"),
        };
        Ok((cell, j))
    }

    pub fn template(&self, j: usize) -> &Template {
        &self.templates[j]
    }
}

pub fn sample_template(set: &TemplateSet, cfg: &SamplerConfig, draw: u64) -> Result<UnitCell> {
    TemplateSampler::new(set, cfg)?.draw(draw).map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(matern32(0.0, 3.0), 1.0);
        assert!((sign_covariance(0.0, 3.0) - 1.0).abs() < 1e-15);
        assert!(sign_covariance(5.0, 1e-6) < 1e-12);
    }

    #[test]
    fn exact_template_is_reproduced() {
        let x = UnitCell::from_id(10, 999).unwrap();
        let set = TemplateSet {
            resolution: 10,
            templates: vec![Template::exact(&x)],
            supports: vec![3],
            precision: 1.0,
            support: 3,
            gap: 0.0,
            dataset_digest: String::new(),
            label: String::new(),
        };
        for law in [FreeLaw::Independent { p_stiff: 0.5 }, FreeLaw::Matern { length: 2.0 }] {
            let cfg = SamplerConfig { law, ..SamplerConfig::new(1, 10) };
            for d in 0..5 {
                assert_eq!(sample_template(&set, &cfg, d).unwrap(), x);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(0, 30).validate().is_err());
        let c = SamplerConfig { law: FreeLaw::Matern { length: 0.0 }, ..SamplerConfig::new(0, 20) };
        assert!(c.validate().is_err());
    }
}
