//! Labeled design datasets: generation through the dispersion oracle,
//! a checkpointed text file format, and seeded train/test splits.
//!
//! File layout:
//!
//! ```text
//! # format = pixmeta-dataset-v1
//! # resolution = 10
//! # ... more `# key = value` manifest lines ...
//! id,gaps,labels
//! 0,,0000000000
//! 5,4670.62:4818.70;6689.05:6730.75,0000000000
//! ```
//!
//! `gaps` is a `;`-separated list of `lo:hi` intervals in Hz, `labels` one
//! bit per configured policy in manifest order.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dispersion::{dispersion, label_gaps, DispersionConfig, FreqRange, LabelMode, LabelPolicy};
use crate::error::{invalid, Error, Result};
use crate::unitcell::{irreducible_len, PhysicalConfig, UnitCell};

pub const FORMAT: &str = "pixmeta-dataset-v1";
pub const CHECKPOINT_EVERY: usize = 256;

/// The ten default label ranges: five 10 kHz bins up to 50 kHz and five
/// 6 kHz bins up to 30 kHz, all with the intersect rule.
pub fn default_policies() -> Vec<LabelPolicy> {
    let mut out = Vec::new();
    for i in 0..5 {
        out.push(LabelPolicy::intersect(i as f64 * 10e3, (i + 1) as f64 * 10e3).unwrap());
    }
    for i in 0..5 {
        out.push(LabelPolicy::intersect(i as f64 * 6e3, (i + 1) as f64 * 6e3).unwrap());
    }
    out
}

pub fn format_policy(p: &LabelPolicy) -> String {
    format!("{}@{}", p.mode, p.range)
}

pub fn parse_policy(s: &str) -> Result<LabelPolicy> {
    let (mode, range) = s
        .trim()
        .split_once('@')
        .ok_or_else(|| Error::Format(format!("label policy '{s}' is not mode@range")))?;
    LabelPolicy::new(mode.parse::<LabelMode>()?, range.parse::<FreqRange>()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub resolution: usize,
    pub dispersion: DispersionConfig,
    pub policies: Vec<LabelPolicy>,
    pub version: String,
    /// Ids whose simulation failed; excluded from the records.
    pub failed: Vec<u64>,
}

impl DatasetManifest {
    pub fn new(resolution: usize, dispersion: DispersionConfig, policies: Vec<LabelPolicy>) -> Self {
        Self {
            resolution,
            dispersion,
            policies,
            version: env!("CARGO_PKG_VERSION").to_string(),
            failed: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::unitcell::check_resolution(self.resolution)?;
        if irreducible_len(self.resolution) > 63 {
            return invalid(format!(
                "datasets index designs by integer id; resolution {} has too many irreducible pixels",
                self.resolution
            ));
        }
        self.dispersion.validate()?;
        if self.policies.is_empty() {
            return invalid("at least one label policy is required");
        }
        Ok(())
    }

    pub fn space_size(&self) -> u64 {
        1u64 << irreducible_len(self.resolution)
    }

    /// Digest of everything that determines record contents.
    pub fn config_digest(&self) -> String {
        let mut s = self.header_lines(false).join("\n");
        s.push('\n');
        crate::sha256_hex(s.as_bytes())
    }

    fn header_lines(&self, with_status: bool) -> Vec<String> {
        let d = &self.dispersion;
        let p = &d.phys;
        let mut lines = vec![
            format!("format = {FORMAT}"),
            format!("resolution = {}", self.resolution),
            format!("cell_side = {}", p.cell_side),
            format!("e_soft = {}", p.e_soft),
            format!("rho_soft = {}", p.rho_soft),
            format!("e_stiff = {}", p.e_stiff),
            format!("rho_stiff = {}", p.rho_stiff),
            format!("poisson = {}", p.poisson),
            format!("plane_strain = {}", p.plane_strain),
            format!("kpts = {}", d.points_per_segment),
            format!("bands = {}", d.num_bands),
            format!("epp = {}", d.elements_per_pixel),
            format!("f_max = {}", d.f_max_report),
            format!(
                "labels = {}",
                self.policies.iter().map(format_policy).collect::<Vec<_>>().join(",")
            ),
        ];
        if with_status {
            lines.push(format!("version = {}", self.version));
            lines.push(format!("config_digest = {}", self.config_digest()));
            lines.push(format!(
                "failed = {}",
                self.failed.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
            ));
        }
        lines
    }

    pub fn header(&self) -> String {
        let mut out: String = self
            .header_lines(true)
            .iter()
            .map(|l| format!("# {l}\n"))
            .collect();
        out.push_str("id,gaps,labels\n");
        out
    }

    fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let get = |k: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Format(format!("manifest key '{k}' missing")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Format(format!("manifest key '{k}' has bad value '{v}'")))
        }
        if get("format")? != FORMAT {
            return Err(Error::Format(format!("unsupported dataset format '{}'", get("format")?)));
        }
        let phys = PhysicalConfig {
            cell_side: num("cell_side", get("cell_side")?)?,
            e_soft: num("e_soft", get("e_soft")?)?,
            rho_soft: num("rho_soft", get("rho_soft")?)?,
            e_stiff: num("e_stiff", get("e_stiff")?)?,
            rho_stiff: num("rho_stiff", get("rho_stiff")?)?,
            poisson: num("poisson", get("poisson")?)?,
            plane_strain: num("plane_strain", get("plane_strain")?)?,
        };
        let dispersion = DispersionConfig {
            phys,
            points_per_segment: num("kpts", get("kpts")?)?,
            num_bands: num("bands", get("bands")?)?,
            elements_per_pixel: num("epp", get("epp")?)?,
            f_max_report: num("f_max", get("f_max")?)?,
        };
        let policies = get("labels")?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_policy)
            .collect::<Result<Vec<_>>>()?;
        let failed = match pairs.iter().find(|(k, _)| k == "failed") {
            Some((_, v)) => v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| num::<u64>("failed", s.trim()))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let m = Self {
            resolution: num("resolution", get("resolution")?)?,
            dispersion,
            policies,
            version: get("version").unwrap_or("unknown").to_string(),
            failed,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: u64,
    pub gaps: Vec<(f64, f64)>,
    pub labels: Vec<u8>,
}

impl Record {
    pub fn to_line(&self) -> String {
        let gaps = self
            .gaps
            .iter()
            .map(|(lo, hi)| format!("{lo}:{hi}"))
            .collect::<Vec<_>>()
            .join(";");
        let labels: String = self.labels.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        format!("{},{},{}", self.id, gaps, labels)
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad record line: {line}"));
        let mut parts = line.trim().split(',');
        let id = parts.next().ok_or_else(bad)?.parse::<u64>().map_err(|_| bad())?;
        let gaps_s = parts.next().ok_or_else(bad)?;
        let labels_s = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let mut gaps = Vec::new();
        for g in gaps_s.split(';').filter(|s| !s.is_empty()) {
            let (lo, hi) = g.split_once(':').ok_or_else(bad)?;
            let lo = lo.parse::<f64>().map_err(|_| bad())?;
            let hi = hi.parse::<f64>().map_err(|_| bad())?;
            if !(hi > lo) {
                return Err(bad());
            }
            gaps.push((lo, hi));
        }
        let labels = labels_s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { id, gaps, labels })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub manifest: DatasetManifest,
    pub records: Vec<Record>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = self.manifest.header();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut records = Vec::new();
        let mut seen_columns = false;
        for line in text.lines() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    pairs.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if !seen_columns {
                if t != "id,gaps,labels" {
                    return Err(Error::Format(format!("expected column header, got: {t}")));
                }
                seen_columns = true;
                continue;
            }
            records.push(Record::parse_line(t)?);
        }
        if !seen_columns {
            return Err(Error::Format("dataset has no column header".into()));
        }
        let manifest = DatasetManifest::from_pairs(&pairs)?;
        let ds = Self { manifest, records };
        ds.check_shape()?;
        Ok(ds)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_text())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    fn check_shape(&self) -> Result<()> {
        let nl = self.manifest.policies.len();
        let space = self.manifest.space_size();
        for r in &self.records {
            if r.labels.len() != nl {
                return Err(Error::Format(format!(
                    "record {} has {} labels, manifest declares {nl}",
                    r.id,
                    r.labels.len()
                )));
            }
            if r.id >= space {
                return Err(Error::Format(format!("record id {} outside the design space", r.id)));
            }
        }
        Ok(())
    }

    /// Ids of records whose stored labels disagree with their stored gaps.
    pub fn label_mismatches(&self) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| {
                self.manifest
                    .policies
                    .iter()
                    .zip(&r.labels)
                    .any(|(p, &l)| label_gaps(&r.gaps, p) != l)
            })
            .map(|r| r.id)
            .collect()
    }

    pub fn policy_index(&self, range: &FreqRange, mode: Option<LabelMode>) -> Result<usize> {
        self.manifest
            .policies
            .iter()
            .position(|p| p.range == *range && mode.is_none_or(|m| m == p.mode))
            .ok_or_else(|| Error::InvalidArgument(format!("dataset has no label for range {range}")))
    }

    /// Labels for one policy, recomputed from the stored gaps.
    pub fn labels_for(&self, policy: &LabelPolicy) -> Vec<u8> {
        self.records.iter().map(|r| label_gaps(&r.gaps, policy)).collect()
    }

    pub fn cells(&self) -> Result<Vec<UnitCell>> {
        self.records
            .iter()
            .map(|r| UnitCell::from_id(self.manifest.resolution, r.id))
            .collect()
    }

    pub fn digest(&self) -> String {
        crate::sha256_hex(self.to_text().as_bytes())
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            manifest: self.manifest.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Seeded split into `(train, test)`; the test part holds
    /// `round(N * test_fraction)` records. Both keep id order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (train, test) = split_indices(self.len(), test_fraction, seed)?;
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Index form of [`LabeledDataset::split`].
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return invalid(format!("test fraction {test_fraction} outside (0, 1)"));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Simulates one design and labels it under every manifest policy.
pub fn simulate_record(id: u64, manifest: &DatasetManifest) -> Result<Record> {
    let cell = UnitCell::from_id(manifest.resolution, id)?;
    let result = dispersion(&cell, &manifest.dispersion)?;
    let labels = manifest
        .policies
        .iter()
        .map(|p| label_gaps(&result.gaps, p))
        .collect();
    Ok(Record {
        id,
        gaps: result.gaps,
        labels,
    })
}

#[derive(Clone, Debug)]
pub struct GenerateReport {
    pub dataset: LabeledDataset,
    /// Records simulated in this run (excluding resumed ones).
    pub simulated: usize,
    pub resumed: usize,
    pub failures: Vec<(u64, String)>,
}

/// Parses `"all"`, `"a..b"` (half-open), `"a..=b"` or a comma list.
pub fn parse_id_set(s: &str, space: u64) -> Result<Vec<u64>> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("bad id set '{s}'"));
    let ids: Vec<u64> = if s == "all" {
        (0..space).collect()
    } else if let Some((a, b)) = s.split_once("..=") {
        let (a, b) = (a.parse::<u64>().map_err(|_| bad())?, b.parse::<u64>().map_err(|_| bad())?);
        (a..=b).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.parse::<u64>().map_err(|_| bad())?, b.parse::<u64>().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if ids.is_empty() {
        return invalid("id set is empty");
    }
    if let Some(&bad_id) = ids.iter().find(|&&i| i >= space) {
        return invalid(format!("id {bad_id} outside the design space of size {space}"));
    }
    let unique: BTreeSet<u64> = ids.into_iter().collect();
    Ok(unique.into_iter().collect())
}

/// Uniform random sample of `count` distinct ids, sorted.
pub fn sample_ids(space: u64, count: usize, seed: u64) -> Result<Vec<u64>> {
    if count as u64 > space {
        return invalid(format!("cannot sample {count} distinct ids from {space}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u64> = rand::seq::index::sample(&mut rng, space as usize, count)
        .into_iter()
        .map(|i| i as u64)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Simulates `ids`, checkpointing to `out` every 256 records when given.
///
/// With `resume`, records already present in `out` (under an identical
/// configuration) are kept and skipped. Failed ids are reported, listed in
/// the manifest and excluded. The final file is rewritten sorted by id.
pub fn generate(
    ids: &[u64],
    manifest: &DatasetManifest,
    out: Option<&Path>,
    resume: bool,
) -> Result<GenerateReport> {
    manifest.validate()?;
    if ids.is_empty() {
        return invalid("no design ids requested");
    }
    let space = manifest.space_size();
    if let Some(&bad) = ids.iter().find(|&&i| i >= space) {
        return invalid(format!("id {bad} outside the design space of size {space}"));
    }
    let mut records: Vec<Record> = Vec::new();
    if let (Some(path), true) = (out, resume) {
        if path.exists() {
            let prev = read_checkpoint(path)?;
            if prev.manifest.config_digest() != manifest.config_digest() {
                return Err(Error::Consistency(format!(
                    "cannot resume {}: its configuration differs from the requested one",
                    path.display()
                )));
            }
            records = prev.records;
        }
    }
    let wanted: BTreeSet<u64> = ids.iter().copied().collect();
    records.retain(|r| wanted.contains(&r.id));
    records.sort_by_key(|r| r.id);
    records.dedup_by_key(|r| r.id);
    let resumed = records.len();
    let have: BTreeSet<u64> = records.iter().map(|r| r.id).collect();
    let todo: Vec<u64> = wanted.iter().copied().filter(|i| !have.contains(i)).collect();

    let mut writer = match out {
        Some(path) => {
            let base = LabeledDataset {
                manifest: manifest.clone(),
                records: records.clone(),
            };
            base.write(path)?;
            Some(BufWriter::new(OpenOptions::new().append(true).open(path)?))
        }
        None => None,
    };

    let mut failures = Vec::new();
    let mut simulated = 0usize;
    for chunk in todo.chunks(CHECKPOINT_EVERY) {
        let results: Vec<(u64, Result<Record>)> = chunk
            .par_iter()
            .map(|&id| (id, simulate_record(id, manifest)))
            .collect();
        for (id, res) in results {
            match res {
                Ok(r) => {
                    if let Some(w) = writer.as_mut() {
                        writeln!(w, "{}", r.to_line())?;
                    }
                    records.push(r);
                    simulated += 1;
                }
                Err(e) => {
                    log::warn!("design {id} failed: {e}");
                    failures.push((id, e.to_string()));
                }
            }
        }
        if let Some(w) = writer.as_mut() {
            w.flush()?;
        }
        log::info!("{} / {} designs done", simulated + failures.len(), todo.len());
    }
    drop(writer);

    records.sort_by_key(|r| r.id);
    let mut manifest = manifest.clone();
    manifest.failed = failures.iter().map(|f| f.0).collect();
    let dataset = LabeledDataset { manifest, records };
    if let Some(path) = out {
        dataset.write(path)?;
    }
    Ok(GenerateReport {
        dataset,
        simulated,
        resumed,
        failures,
    })
}

/// Reads a possibly interrupted dataset file, ignoring a truncated last line.
fn read_checkpoint(path: &Path) -> Result<LabeledDataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut text = String::new();
    let mut lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    if let Some(last) = lines.last() {
        if !last.starts_with('#') && last != "id,gaps,labels" && Record::parse_line(last).is_err() {
            lines.pop();
        }
    }
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    LabeledDataset::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> DatasetManifest {
        DatasetManifest::new(10, DispersionConfig::default(), default_policies())
    }

    #[test]
    fn record_round_trip() {
        let r = Record {
            id: 5,
            gaps: vec![(4670.626672579915, 4818.708813051539), (0.1, 0.30000000000000004)],
            labels: vec![0, 1, 0],
        };
        let line = r.to_line();
        assert_eq!(Record::parse_line(&line).unwrap(), r);
        let empty = Record { id: 0, gaps: vec![], labels: vec![0] };
        assert_eq!(empty.to_line(), "0,,0");
        assert!(Record::parse_line("1,5:3,0").is_err());
        assert!(Record::parse_line("x,,0").is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let m = manifest();
        let gaps = vec![(11e3, 12e3)];
        let labels = m.policies.iter().map(|p| label_gaps(&gaps, p)).collect();
        let ds = LabeledDataset {
            manifest: m,
            records: vec![Record { id: 3, gaps, labels }],
        };
        let back = LabeledDataset::parse(&ds.to_text()).unwrap();
        assert_eq!(back, ds);
        assert!(back.label_mismatches().is_empty());
        let mut bad = back.clone();
        bad.records[0].labels[0] ^= 1;
        assert_eq!(bad.label_mismatches(), vec![3]);
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(32768, 0.2, 1).unwrap();
        assert_eq!(te.len(), 6554);
        assert_eq!(tr.len(), 32768 - 6554);
        let (tr, te) = split_indices(10, 0.5, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (5, 5));
        assert_eq!(split_indices(100, 0.3, 9).unwrap(), split_indices(100, 0.3, 9).unwrap());
        assert!(split_indices(10, 1.0, 0).is_err());
        assert!(split_indices(10, 0.0, 0).is_err());
    }

    #[test]
    fn id_sets() {
        assert_eq!(parse_id_set("0..16", 32768).unwrap().len(), 16);
        assert_eq!(parse_id_set("3..=4", 32768).unwrap(), vec![3, 4]);
        assert_eq!(parse_id_set("7,2,7", 32768).unwrap(), vec![2, 7]);
        assert_eq!(parse_id_set("all", 32768).unwrap().len(), 32768);
        assert!(parse_id_set("32768", 32768).is_err());
        assert!(parse_id_set("5..5", 32768).is_err());
    }

    #[test]
    fn policy_strings() {
        for p in default_policies() {
            assert_eq!(parse_policy(&format_policy(&p)).unwrap(), p);
        }
        assert!(parse_policy("intersect").is_err());
    }
}
