//! Bloch-Floquet dispersion analysis, band-gap extraction and labeling.

pub mod eigen;
pub mod fem;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::unitcell::{PhysicalConfig, UnitCell};

pub use eigen::EigenSettings;
pub use fem::FemAssembly;

/// Piecewise-linear path through wavevector space.
///
/// Each segment is split into `points_per_segment` equal intervals. Vertices
/// shared by consecutive segments are sampled once, so the default
/// three-segment path with 16 intervals yields 49 samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavevectorContour {
    pub vertices: Vec<(f64, f64)>,
    pub points_per_segment: usize,
}

impl WavevectorContour {
    /// Gamma -> X -> M -> Gamma for a square lattice of side `a`.
    pub fn irreducible(a: f64, points_per_segment: usize) -> Self {
        let p = PI / a;
        Self {
            vertices: vec![(0.0, 0.0), (p, 0.0), (p, p), (0.0, 0.0)],
            points_per_segment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 2 {
            return invalid("contour needs at least two vertices");
        }
        if self.points_per_segment == 0 {
            return invalid("points_per_segment must be >= 1");
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<(f64, f64)> {
        let k = self.points_per_segment;
        let mut out = vec![self.vertices[0]];
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            for i in 1..=k {
                let t = i as f64 / k as f64;
                out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        out
    }

    /// Cumulative path length at each sample.
    pub fn arclength(&self) -> Vec<f64> {
        let s = self.samples();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(s.len());
        out.push(0.0);
        for w in s.windows(2) {
            acc += ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            out.push(acc);
        }
        out
    }
}

/// Everything that determines a dispersion computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionConfig {
    pub phys: PhysicalConfig,
    pub points_per_segment: usize,
    pub num_bands: usize,
    pub elements_per_pixel: usize,
    pub f_max_report: f64,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            phys: PhysicalConfig::default(),
            points_per_segment: 16,
            num_bands: 10,
            elements_per_pixel: 1,
            f_max_report: 60_000.0,
        }
    }
}

impl DispersionConfig {
    pub fn contour(&self) -> WavevectorContour {
        WavevectorContour::irreducible(self.phys.cell_side, self.points_per_segment)
    }

    pub fn validate(&self) -> Result<()> {
        self.phys.validate()?;
        self.contour().validate()?;
        if self.num_bands < 2 {
            return invalid("num_bands must be >= 2");
        }
        if self.elements_per_pixel == 0 {
            return invalid("elements_per_pixel must be >= 1");
        }
        if !(self.f_max_report > 0.0) {
            return invalid("f_max_report must be positive");
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        crate::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    /// `[num_k][num_bands]` in Hz, ascending per row.
    pub frequencies: Vec<Vec<f64>>,
    /// Disjoint, sorted band-gap intervals in Hz.
    pub gaps: Vec<(f64, f64)>,
    pub config_digest: String,
}

impl DispersionResult {
    /// Plot-ready text table with a trailing gap summary.
    pub fn export_table(&self, contour: &WavevectorContour) -> String {
        let arc = contour.arclength();
        let bands = self.frequencies.first().map_or(0, |r| r.len());
        let mut out = String::from("# k_index arclength");
        for b in 1..=bands {
            let _ = write!(out, " f_{b}");
        }
        out.push('\n');
        for (i, row) in self.frequencies.iter().enumerate() {
            let _ = write!(out, "{i} {}", arc.get(i).copied().unwrap_or(f64::NAN));
            for f in row {
                let _ = write!(out, " {f}");
            }
            out.push('\n');
        }
        for (lo, hi) in &self.gaps {
            let _ = writeln!(out, "# gap {lo} {hi}");
        }
        out
    }
}

/// Band gaps from sampled band extrema, clipped to `[0, f_max]`.
pub fn extract_gaps(frequencies: &[Vec<f64>], f_max: f64) -> Vec<(f64, f64)> {
    let bands = frequencies.first().map_or(0, |r| r.len());
    let mut gaps = Vec::new();
    for b in 0..bands.saturating_sub(1) {
        let lo = frequencies.iter().map(|r| r[b]).fold(f64::NEG_INFINITY, f64::max);
        let hi = frequencies.iter().map(|r| r[b + 1]).fold(f64::INFINITY, f64::min);
        let (lo, hi) = (lo.max(0.0), hi.min(f_max));
        if hi > lo {
            gaps.push((lo, hi));
        }
    }
    gaps
}

/// Shift below the acoustic branch: the squared angular frequency of a shear
/// wave of 1% of the Brillouin-zone edge in the slowest phase, negated.
fn shift_for(phys: &PhysicalConfig) -> f64 {
    let cs = |e: f64, rho: f64| (e / (2.0 * (1.0 + phys.poisson)) / rho).sqrt();
    let c = cs(phys.e_soft, phys.rho_soft).min(cs(phys.e_stiff, phys.rho_stiff));
    let w = 2.0 * PI * 0.01 * c / phys.cell_side;
    -(w * w)
}

/// Lowest `num_bands` frequencies (Hz) of an assembled cell at one wavevector.
pub fn frequencies_at(
    fem: &FemAssembly,
    phys: &PhysicalConfig,
    gamma: (f64, f64),
    num_bands: usize,
    settings: &EigenSettings,
) -> Result<Vec<f64>> {
    if num_bands >= fem.dof() {
        return invalid(format!(
            "num_bands {num_bands} must be below the reduced dof count {}",
            fem.dof()
        ));
    }
    let (k, m) = fem.bloch_matrices(gamma);
    for (name, vals) in [("stiffness", &k), ("mass", &m)] {
        let defect = fem.topology.hermitian_defect(vals);
        if defect > 1e-8 {
            return Err(Error::Consistency(format!(
                "{name} matrix not Hermitian (relative defect {defect:.3e})"
            )));
        }
    }
    let lambdas = eigen::lowest_eigenvalues(&fem.topology, &k, &m, num_bands, shift_for(phys), settings)
        .map_err(|detail| Error::EigenNonConvergence {
            gx: gamma.0,
            gy: gamma.1,
            detail,
        })?;
    let lmax = lambdas.iter().copied().fold(0.0, f64::max);
    if let Some(&l0) = lambdas.first() {
        if l0 < -1e-6 * lmax {
            return Err(Error::Consistency(format!(
                "negative eigenvalue {l0:.6e} at ({:.6}, {:.6})",
                gamma.0, gamma.1
            )));
        }
    }
    Ok(lambdas.iter().map(|l| l.max(0.0).sqrt() / (2.0 * PI)).collect())
}

/// Band structure of a cell along the irreducible contour.
pub fn dispersion(cell: &UnitCell, cfg: &DispersionConfig) -> Result<DispersionResult> {
    dispersion_with(cell, cfg, &EigenSettings::default())
}

pub fn dispersion_with(
    cell: &UnitCell,
    cfg: &DispersionConfig,
    settings: &EigenSettings,
) -> Result<DispersionResult> {
    cfg.validate()?;
    let fem = FemAssembly::new(cell, &cfg.phys, cfg.elements_per_pixel)?;
    let frequencies = cfg
        .contour()
        .samples()
        .into_iter()
        .map(|g| frequencies_at(&fem, &cfg.phys, g, cfg.num_bands, settings))
        .collect::<Result<Vec<_>>>()?;
    let gaps = extract_gaps(&frequencies, cfg.f_max_report);
    Ok(DispersionResult {
        frequencies,
        gaps,
        config_digest: cfg.digest(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LabelMode {
    Intersect,
    MinWidth(f64),
    Cover,
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "intersect" => Ok(LabelMode::Intersect),
            "cover" => Ok(LabelMode::Cover),
            _ => match lower.strip_prefix("minwidth:") {
                Some(w) => {
                    let w = parse_freq(w)?;
                    if w <= 0.0 {
                        return invalid("minimum gap width must be positive");
                    }
                    Ok(LabelMode::MinWidth(w))
                }
                None => invalid(format!("unknown label policy '{s}'")),
            },
        }
    }
}

impl std::fmt::Display for LabelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelMode::Intersect => write!(f, "intersect"),
            LabelMode::Cover => write!(f, "cover"),
            LabelMode::MinWidth(w) => write!(f, "minwidth:{w}"),
        }
    }
}

/// Target frequency range `(lo, hi)` in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqRange {
    pub lo: f64,
    pub hi: f64,
}

impl FreqRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo) {
            return invalid(format!("invalid frequency range {lo}..{hi}"));
        }
        Ok(Self { lo, hi })
    }
}

/// Parses `"12000"`, `"12k"` or `"12.5k"` as Hz.
pub fn parse_freq(s: &str) -> Result<f64> {
    let s = s.trim();
    let (num, mult) = match s.strip_suffix(['k', 'K']) {
        Some(n) => (n, 1000.0),
        None => (s, 1.0),
    };
    num.parse::<f64>()
        .map(|v| v * mult)
        .map_err(|_| Error::InvalidArgument(format!("bad frequency '{s}'")))
}

impl FromStr for FreqRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("range '{s}' is not lo-hi")))?;
        FreqRange::new(parse_freq(a)?, parse_freq(b)?)
    }
}

impl std::fmt::Display for FreqRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let fmt = |v: f64| {
            if v % 1000.0 == 0.0 {
                format!("{}k", v / 1000.0)
            } else {
                format!("{v}")
            }
        };
        write!(f, "{}-{}", fmt(self.lo), fmt(self.hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    pub mode: LabelMode,
    pub range: FreqRange,
}

impl LabelPolicy {
    pub fn new(mode: LabelMode, range: FreqRange) -> Result<Self> {
        if let LabelMode::MinWidth(w) = mode {
            if !(w > 0.0) {
                return invalid("minimum gap width must be positive");
            }
        }
        FreqRange::new(range.lo, range.hi)?;
        Ok(Self { mode, range })
    }

    pub fn intersect(lo: f64, hi: f64) -> Result<Self> {
        Self::new(LabelMode::Intersect, FreqRange::new(lo, hi)?)
    }
}

/// Binary band-gap label of a gap list under a policy.
pub fn label_gaps(gaps: &[(f64, f64)], policy: &LabelPolicy) -> u8 {
    let (a, b) = (policy.range.lo, policy.range.hi);
    let hit = gaps.iter().any(|&(lo, hi)| match policy.mode {
        LabelMode::Intersect => lo.max(a) < hi.min(b),
        LabelMode::MinWidth(w) => hi.min(b) - lo.max(a) > w,
        LabelMode::Cover => lo <= a && hi >= b,
    });
    u8::from(hit)
}

pub fn label(result: &DispersionResult, policy: &LabelPolicy) -> u8 {
    label_gaps(&result.gaps, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_sample_count() {
        let c = WavevectorContour::irreducible(0.1, 16);
        assert_eq!(c.samples().len(), 49);
        let s = c.samples();
        assert_eq!(s[16], (PI / 0.1, 0.0));
        assert_eq!(s[48], (0.0, 0.0));
        let arc = c.arclength();
        let expect = (2.0 + 2f64.sqrt()) * PI / 0.1;
        assert!((arc[48] - expect).abs() < 1e-9);
    }

    #[test]
    fn label_set_logic() {
        let p = LabelPolicy::intersect(10e3, 20e3).unwrap();
        assert_eq!(label_gaps(&[], &p), 0);
        let g = [(12e3, 14e3)];
        assert_eq!(label_gaps(&g, &p), 1);
        let cover = LabelPolicy::new(LabelMode::Cover, p.range).unwrap();
        assert_eq!(label_gaps(&g, &cover), 0);
        assert_eq!(label_gaps(&[(9e3, 21e3)], &cover), 1);
        let mw = LabelPolicy::new(LabelMode::MinWidth(1000.0), p.range).unwrap();
        assert_eq!(label_gaps(&[(19.8e3, 20.3e3)], &mw), 0);
        assert_eq!(label_gaps(&[(18.5e3, 20.3e3)], &mw), 1);
        // touching at an endpoint has zero measure
        assert_eq!(label_gaps(&[(20e3, 21e3)], &p), 0);
    }

    #[test]
    fn parse_ranges_and_modes() {
        let r: FreqRange = "10k-20k".parse().unwrap();
        assert_eq!((r.lo, r.hi), (10e3, 20e3));
        assert_eq!(r.to_string(), "10k-20k");
        assert!("20k-10k".parse::<FreqRange>().is_err());
        assert_eq!("minwidth:1k".parse::<LabelMode>().unwrap(), LabelMode::MinWidth(1000.0));
        assert!("minwidth:0".parse::<LabelMode>().is_err());
        assert_eq!("Intersect".parse::<LabelMode>().unwrap(), LabelMode::Intersect);
    }

    #[test]
    fn gap_extraction() {
        let f = vec![vec![0.0, 5.0, 9.0], vec![3.0, 7.0, 12.0]];
        // band 0 max 3 < band 1 min 5; band 1 max 7 < band 2 min 9
        assert_eq!(extract_gaps(&f, 60e3), vec![(3.0, 5.0), (7.0, 9.0)]);
        assert_eq!(extract_gaps(&f, 8.0), vec![(3.0, 5.0), (7.0, 8.0)]);
        assert_eq!(extract_gaps(&f, 4.0), vec![(3.0, 4.0)]);
    }
}
