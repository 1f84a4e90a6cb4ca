use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use pixmeta::dataset::{
    default_policies, format_policy, generate, parse_id_set, parse_policy, DatasetManifest, LabeledDataset,
};
use pixmeta::dispersion::{dispersion, DispersionConfig, FreqRange, LabelMode, LabelPolicy};
use pixmeta::evaluate::{evaluate_designs, PrecisionReport};
use pixmeta::sampler::{sample_rejection_tree, FreeLaw, SamplerConfig, TemplateSampler};
use pixmeta::sff::{FeatureTable, ShapeLibrary};
use pixmeta::template::{mine_templates, set_counts, MiningConfig, TemplateSet};
use pixmeta::tree::{binarize, fit_optimal_tree, FitConfig, Objective, SparseTree};
use pixmeta::unitcell::{PhysicalConfig, UnitCell};
use pixmeta::Error;

const DESIGNS_FORMAT: &str = "pixmeta-designs-v1";

#[derive(Parser)]
#[command(name = "pixmeta", version, about = "Inverse design of pixelated phononic unit cells")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate designs and write a labeled dataset.
    GenDataset(GenArgs),
    /// Shape-frequency features of every dataset design.
    Featurize(FeaturizeArgs),
    /// Fit an optimal sparse decision tree.
    TrainTree(TrainArgs),
    /// Mine a unit-cell template set.
    MineTemplates(MineArgs),
    /// Generate designs from a tree or template set.
    Sample(SampleArgs),
    /// Dispersion table of one design.
    Simulate(SimulateArgs),
    /// Simulate generated designs and report precision.
    Evaluate(EvaluateArgs),
    /// Train on coarse data, generate at a finer resolution, and evaluate.
    TransferEval(TransferArgs),
}

#[derive(Args, Clone)]
struct PhysArgs {
    /// Poisson ratio of both phases.
    #[arg(long, default_value_t = 0.3)]
    nu: f64,
    /// Plane stress instead of plane strain.
    #[arg(long)]
    plane_stress: bool,
    /// Contour points per segment, endpoints included.
    #[arg(long, default_value_t = 16)]
    kpts: usize,
    #[arg(long, default_value_t = 10)]
    bands: usize,
    /// Highest reported gap frequency.
    #[arg(long, default_value = "60k")]
    f_max: String,
}

impl PhysArgs {
    fn config(&self, epp: usize) -> Result<DispersionConfig> {
        let phys = PhysicalConfig {
            poisson: self.nu,
            plane_strain: !self.plane_stress,
            ..PhysicalConfig::default()
        };
        let cfg = DispersionConfig {
            phys,
            points_per_segment: self.kpts,
            num_bands: self.bands,
            elements_per_pixel: epp,
            f_max_report: pixmeta::dispersion::parse_freq(&self.f_max)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    epp: usize,
    #[command(flatten)]
    phys: PhysArgs,
    /// Comma-separated label policies such as `10k-20k` or `minwidth:1k@10k-20k`.
    #[arg(long)]
    ranges: Option<String>,
    /// `all`, `a..b`, `a..=b` or a comma list.
    #[arg(long, default_value = "all")]
    ids: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Shape library file (default: built-in library).
    #[arg(long)]
    shapes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    PrecSupport,
    BalancedAccuracy,
}

#[derive(Args, Clone)]
struct RangeArgs {
    /// Target range such as `10k-20k`.
    #[arg(long)]
    range: String,
    /// `intersect`, `minwidth:<w>` or `cover`.
    #[arg(long, default_value = "intersect")]
    policy: String,
}

impl RangeArgs {
    fn policy(&self) -> Result<LabelPolicy> {
        let range: FreqRange = self.range.parse()?;
        let mode: LabelMode = self.policy.parse()?;
        Ok(LabelPolicy::new(mode, range)?)
    }
}

#[derive(Args, Clone)]
struct SplitArgs {
    /// Hold out this fraction and report held-out metrics.
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct TreeArgs {
    #[arg(long, value_enum, default_value = "prec-support")]
    objective: ObjectiveArg,
    #[arg(long = "K", default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 0.005)]
    lambda: f64,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 64)]
    max_thresholds: usize,
    /// Seconds.
    #[arg(long)]
    tree_time_limit: Option<f64>,
}

impl TreeArgs {
    fn objective(&self) -> Result<Objective> {
        Ok(match self.objective {
            ObjectiveArg::PrecSupport => Objective::precision_support(self.k, self.eps, self.lambda)?,
            ObjectiveArg::BalancedAccuracy => Objective::balanced_accuracy(self.lambda)?,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    feats: PathBuf,
    /// Dataset providing the labels.
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    range: RangeArgs,
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TemplateArgs {
    #[arg(long = "s", default_value_t = 5)]
    s: usize,
    #[arg(long = "p", default_value_t = 0.98)]
    p: f64,
    #[arg(long, default_value_t = 10)]
    psi_pre: usize,
    /// Default: p - 0.05.
    #[arg(long)]
    p_pre: Option<f64>,
    /// Seconds.
    #[arg(long, default_value_t = 1800.0)]
    time_limit: f64,
}

impl TemplateArgs {
    fn config(&self) -> MiningConfig {
        let mut c = MiningConfig::new(self.s, self.p);
        c.pre_support = self.psi_pre;
        if let Some(pp) = self.p_pre {
            c.pre_precision = pp;
        }
        c.time_limit = Some(Duration::from_secs_f64(self.time_limit));
        c
    }
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    range: RangeArgs,
    #[command(flatten)]
    templates: TemplateArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Independent,
    Matern,
}

#[derive(Args, Clone)]
struct DrawArgs {
    #[arg(long, default_value_t = 20)]
    resolution: usize,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, value_enum, default_value = "independent")]
    law: LawArg,
    /// Matern length scale in pixels.
    #[arg(long, default_value_t = 6.0)]
    l: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_attempts: u64,
}

impl DrawArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            resolution: self.resolution,
            max_attempts: self.max_attempts,
            law: match self.law {
                LawArg::Independent => FreeLaw::Independent { p_stiff: 0.5 },
                LawArg::Matern => FreeLaw::Matern { length: self.l },
            },
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Tree model (`.json`) or template set file.
    #[arg(long)]
    model: PathBuf,
    /// Shape library for tree models (default: built-in library).
    #[arg(long)]
    shapes: Option<PathBuf>,
    #[command(flatten)]
    draw: DrawArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    id: Option<u64>,
    /// Irreducible pixels as a 0/1 string.
    #[arg(long)]
    bits: Option<String>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    epp: usize,
    #[command(flatten)]
    phys: PhysArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    designs: PathBuf,
    #[command(flatten)]
    range: RangeArgs,
    #[arg(long, default_value_t = 2)]
    epp: usize,
    #[command(flatten)]
    phys: PhysArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Templates,
    Tree,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    range: RangeArgs,
    #[arg(long, value_enum, default_value = "templates")]
    method: MethodArg,
    #[command(flatten)]
    templates: TemplateArgs,
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    draw: DrawArgs,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 2)]
    epp: usize,
    #[command(flatten)]
    phys: PhysArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Sidecar written next to every output file.
struct RunManifest {
    subcommand: &'static str,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
}

fn sha_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_artifact(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn write_manifest(out: &Path, m: &RunManifest, started: Instant, jobs: usize) -> Result<()> {
    let mut inputs = BTreeMap::new();
    for p in &m.inputs {
        inputs.insert(p.display().to_string(), sha_file(p)?);
    }
    let json = serde_json::json!({
        "subcommand": m.subcommand,
        "argv": std::env::args().collect::<Vec<_>>(),
        "inputs": inputs,
        "seed": m.seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "output_sha256": sha_file(out)?,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "workers": jobs,
    });
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest");
    fs::write(PathBuf::from(path), serde_json::to_string_pretty(&json)? + "\n")?;
    Ok(())
}

fn load_library(path: Option<&Path>) -> Result<ShapeLibrary> {
    match path {
        Some(p) => Ok(ShapeLibrary::parse(&fs::read_to_string(p).map_err(Error::from)?)?),
        None => Ok(ShapeLibrary::default_library()),
    }
}

fn parse_ranges(s: Option<&str>) -> Result<Vec<LabelPolicy>> {
    match s {
        None => Ok(default_policies()),
        Some(s) => s
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t.contains('@') {
                    Ok(parse_policy(t)?)
                } else {
                    Ok(LabelPolicy::new(LabelMode::Intersect, t.parse()?)?)
                }
            })
            .collect(),
    }
}

fn split_or_all(ds: &LabeledDataset, split: &SplitArgs) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    match split.test_fraction {
        Some(f) => {
            let (a, b) = ds.split(f, split.seed)?;
            Ok((a, Some(b)))
        }
        None => Ok((ds.clone(), None)),
    }
}

fn designs_text(resolution: usize, generator: &str, seed: u64, rows: &[(u64, u64, UnitCell)]) -> String {
    let mut out = format!(
        "# format = {DESIGNS_FORMAT}\n# resolution = {resolution}\n# generator = {generator}\n# seed = {seed}\ndraw,source,design\n"
    );
    for (d, s, c) in rows {
        out.push_str(&format!("{d},{s},{}\n", c.to_bitstring()));
    }
    out
}

fn parse_designs(text: &str) -> Result<Vec<UnitCell>> {
    let mut resolution = None;
    let mut cells = Vec::new();
    let mut header_seen = false;
    for (ln, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.split_once('=') {
                match k.trim() {
                    "format" if v.trim() != DESIGNS_FORMAT => {
                        return Err(Error::Format(format!("unknown designs format '{}'", v.trim())).into())
                    }
                    "resolution" => {
                        resolution = Some(
                            v.trim()
                                .parse::<usize>()
                                .map_err(|_| Error::Format("bad resolution".into()))?,
                        )
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line.starts_with("draw") {
                continue;
            }
        }
        let n = resolution.ok_or_else(|| Error::Format("designs file lacks resolution".into()))?;
        let field = line.rsplit(',').next().unwrap_or("").trim();
        let cell = if field.len() == pixmeta::unitcell::irreducible_len(n) && field.chars().all(|c| c == '0' || c == '1') {
            UnitCell::from_bitstring(n, field)
        } else {
            field
                .parse::<u64>()
                .map_err(|_| Error::Format(format!("designs line {}: bad design '{field}'", ln + 1)))
                .and_then(|id| UnitCell::from_id(n, id))
        }?;
        cells.push(cell);
    }
    Ok(cells)
}

enum Model {
    Tree(SparseTree),
    Templates(TemplateSet),
}

fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    if text.trim_start().starts_with('{') {
        Ok(Model::Tree(SparseTree::from_json(&text)?))
    } else {
        Ok(Model::Templates(TemplateSet::parse(&text)?))
    }
}

fn draw_designs(model: &Model, lib: &ShapeLibrary, cfg: &SamplerConfig, count: usize) -> Result<Vec<(u64, u64, UnitCell)>> {
    use rayon::prelude::*;
    match model {
        Model::Templates(set) => {
            let s = TemplateSampler::new(set, cfg)?;
            (0..count as u64)
                .into_par_iter()
                .map(|d| s.draw(d).map(|(c, j)| (d, j as u64, c)))
                .collect::<pixmeta::Result<Vec<_>>>()
                .map_err(Into::into)
        }
        Model::Tree(tree) => {
            let base = (tree.denom as f64).sqrt().round() as usize;
            if base * base != tree.denom as usize {
                bail!("tree denominator {} is not a square", tree.denom);
            }
            (0..count as u64)
                .into_par_iter()
                .map(|d| sample_rejection_tree(tree, lib, base, cfg, d).map(|(c, a)| (d, a, c)))
                .collect::<pixmeta::Result<Vec<_>>>()
                .map_err(Into::into)
        }
    }
}

fn report_json(report: &PrecisionReport, extra: serde_json::Value) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    if let (Some(obj), Some(more)) = (v.as_object_mut(), extra.as_object()) {
        for (k, x) in more {
            obj.insert(k.clone(), x.clone());
        }
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_artifact(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fit_tree_on(ds: &LabeledDataset, lib: &ShapeLibrary, policy: &LabelPolicy, args: &TreeArgs) -> Result<pixmeta::tree::FitResult> {
    let ids: Vec<u64> = ds.records.iter().map(|r| r.id).collect();
    let table = FeatureTable::from_ids(&ids, ds.manifest.resolution, lib)?;
    fit_tree_table(&table, &ds.labels_for(policy), args)
}

fn fit_tree_table(table: &FeatureTable, labels: &[u8], args: &TreeArgs) -> Result<pixmeta::tree::FitResult> {
    let bin = binarize(table, args.max_thresholds)?;
    let mut cfg = FitConfig::new(args.objective()?, args.depth);
    cfg.time_limit = args.tree_time_limit.map(Duration::from_secs_f64);
    let fit = fit_optimal_tree(&bin, labels, &cfg)?;
    eprintln!(
        "tree: {} leaves, depth {}, value {:.6}, proven optimal {}, gap {:.3e}, train TP {} FP {}",
        fit.tree.leaves(),
        fit.tree.depth(),
        fit.value,
        fit.proven_optimal,
        fit.gap,
        fit.confusion.tp,
        fit.confusion.fp
    );
    Ok(fit)
}

fn run(cli: Cli, jobs: usize) -> Result<()> {
    let started = Instant::now();
    match cli.cmd {
        Cmd::GenDataset(a) => {
            let manifest = DatasetManifest::new(a.n, a.phys.config(a.epp)?, parse_ranges(a.ranges.as_deref())?);
            manifest.validate()?;
            let ids = parse_id_set(&a.ids, manifest.space_size())?;
            let rep = generate(&ids, &manifest, Some(&a.out), a.resume)?;
            eprintln!(
                "{} records ({} simulated, {} resumed, {} failed)",
                rep.dataset.len(),
                rep.simulated,
                rep.resumed,
                rep.failures.len()
            );
            write_manifest(&a.out, &RunManifest { subcommand: "gen-dataset", inputs: vec![], seed: None }, started, jobs)?;
        }
        Cmd::Featurize(a) => {
            let ds = LabeledDataset::read(&a.dataset)?;
            let lib = load_library(a.shapes.as_deref())?;
            let ids: Vec<u64> = ds.records.iter().map(|r| r.id).collect();
            let table = FeatureTable::from_ids(&ids, ds.manifest.resolution, &lib)?;
            write_artifact(&a.out, &table.to_text(&lib.digest()))?;
            let mut inputs = vec![a.dataset.clone()];
            inputs.extend(a.shapes.clone());
            write_manifest(&a.out, &RunManifest { subcommand: "featurize", inputs, seed: None }, started, jobs)?;
        }
        Cmd::TrainTree(a) => {
            let ds = LabeledDataset::read(&a.labels)?;
            let (table, _) = FeatureTable::parse(&fs::read_to_string(&a.feats).map_err(Error::from)?)?;
            let policy = a.range.policy()?;
            let by_id: BTreeMap<u64, usize> = table.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            let (train, test) = split_or_all(&ds, &a.split)?;
            let rows = |d: &LabeledDataset| -> Result<Vec<usize>> {
                d.records
                    .iter()
                    .map(|r| by_id.get(&r.id).copied().ok_or_else(|| anyhow!(Error::Format(format!("design {} has no features", r.id)))))
                    .collect()
            };
            let fit = fit_tree_table(&table.subset(&rows(&train)?), &train.labels_for(&policy), &a.tree)?;
            if let Some(test) = test {
                let t = table.subset(&rows(&test)?);
                let labels = test.labels_for(&policy);
                let (mut sup, mut tp) = (0usize, 0usize);
                for (r, &y) in t.rows.iter().zip(&labels) {
                    if fit.tree.predict_counts(r, t.denom)? == 1 {
                        sup += 1;
                        tp += y as usize;
                    }
                }
                eprintln!("held-out precision {:.4} support {sup}", tp as f64 / sup.max(1) as f64);
            }
            write_artifact(&a.out, &(fit.tree.to_json()? + "\n"))?;
            write_manifest(
                &a.out,
                &RunManifest { subcommand: "train-tree", inputs: vec![a.feats, a.labels], seed: Some(a.split.seed) },
                started,
                jobs,
            )?;
        }
        Cmd::MineTemplates(a) => {
            let ds = LabeledDataset::read(&a.dataset)?;
            let policy = a.range.policy()?;
            let (train, test) = split_or_all(&ds, &a.split)?;
            let ids: Vec<u64> = train.records.iter().map(|r| r.id).collect();
            let (set, rep) = mine_templates(
                ds.manifest.resolution,
                &ids,
                &train.labels_for(&policy),
                &a.templates.config(),
                &ds.digest(),
                &format_policy(&policy),
            )?;
            eprintln!(
                "{} candidates, {} templates, training precision {:.4} support {}, proven optimal {}, gap {:.4}",
                rep.candidates,
                set.templates.len(),
                set.precision,
                set.support,
                rep.solution.proven_optimal,
                set.gap
            );
            if let Some(test) = test {
                let (sup, pos) = set_counts(&set, &test.cells()?, &test.labels_for(&policy))?;
                eprintln!("held-out precision {:.4} support {sup}", pos as f64 / sup.max(1) as f64);
            }
            write_artifact(&a.out, &set.to_text())?;
            write_manifest(
                &a.out,
                &RunManifest { subcommand: "mine-templates", inputs: vec![a.dataset], seed: Some(a.split.seed) },
                started,
                jobs,
            )?;
        }
        Cmd::Sample(a) => {
            let model = load_model(&a.model)?;
            let lib = load_library(a.shapes.as_deref())?;
            let cfg = a.draw.config();
            let rows = draw_designs(&model, &lib, &cfg, a.draw.count)?;
            let generator = match model {
                Model::Tree(_) => "tree",
                Model::Templates(_) => "templates",
            };
            write_artifact(&a.out, &designs_text(cfg.resolution, generator, cfg.seed, &rows))?;
            let mut inputs = vec![a.model];
            inputs.extend(a.shapes);
            write_manifest(&a.out, &RunManifest { subcommand: "sample", inputs, seed: Some(cfg.seed) }, started, jobs)?;
        }
        Cmd::Simulate(a) => {
            let cell = match (a.id, &a.bits) {
                (Some(id), None) => UnitCell::from_id(a.n, id)?,
                (None, Some(b)) => UnitCell::from_bitstring(a.n, b)?,
                _ => return Err(Error::InvalidArgument("give exactly one of --id or --bits".into()).into()),
            };
            let cfg = a.phys.config(a.epp)?;
            let result = dispersion(&cell, &cfg)?;
            emit(a.out.as_deref(), &result.export_table(&cfg.contour()))?;
            if let Some(out) = &a.out {
                write_manifest(out, &RunManifest { subcommand: "simulate", inputs: vec![], seed: None }, started, jobs)?;
            }
        }
        Cmd::Evaluate(a) => {
            let cells = parse_designs(&fs::read_to_string(&a.designs).map_err(Error::from)?)?;
            let cfg = a.phys.config(a.epp)?;
            let policy = a.range.policy()?;
            let report = evaluate_designs(&cells, &cfg, &policy)?;
            eprintln!(
                "precision {:.4} ({} / {}), 95% CI [{:.4}, {:.4}], {} failures",
                report.precision,
                report.positives,
                report.simulated,
                report.ci_low,
                report.ci_high,
                report.failures.len()
            );
            let text = report_json(&report, serde_json::json!({ "policy": format_policy(&policy), "epp": a.epp }))?;
            emit(a.out.as_deref(), &text)?;
            if let Some(out) = &a.out {
                write_manifest(out, &RunManifest { subcommand: "evaluate", inputs: vec![a.designs], seed: None }, started, jobs)?;
            }
        }
        Cmd::TransferEval(a) => {
            let ds = LabeledDataset::read(&a.dataset)?;
            let policy = a.range.policy()?;
            let (train, test) = ds.split(a.test_fraction, a.draw.seed)?;
            let lib = ShapeLibrary::default_library();
            let model = match a.method {
                MethodArg::Templates => {
                    let ids: Vec<u64> = train.records.iter().map(|r| r.id).collect();
                    let (set, _) = mine_templates(
                        ds.manifest.resolution,
                        &ids,
                        &train.labels_for(&policy),
                        &a.templates.config(),
                        &ds.digest(),
                        &format_policy(&policy),
                    )?;
                    let (sup, pos) = set_counts(&set, &test.cells()?, &test.labels_for(&policy))?;
                    eprintln!("templates: held-out precision {:.4} support {sup}", pos as f64 / sup.max(1) as f64);
                    Model::Templates(set)
                }
                MethodArg::Tree => Model::Tree(fit_tree_on(&train, &lib, &policy, &a.tree)?.tree),
            };
            let cfg = a.draw.config();
            let rows = draw_designs(&model, &lib, &cfg, a.draw.count)?;
            let cells: Vec<UnitCell> = rows.into_iter().map(|r| r.2).collect();
            let report = evaluate_designs(&cells, &a.phys.config(a.epp)?, &policy)?;
            eprintln!(
                "resolution {}: precision {:.4} ({} / {}), 95% CI [{:.4}, {:.4}]",
                cfg.resolution, report.precision, report.positives, report.simulated, report.ci_low, report.ci_high
            );
            let text = report_json(
                &report,
                serde_json::json!({
                    "policy": format_policy(&policy),
                    "resolution": cfg.resolution,
                    "method": match a.method { MethodArg::Templates => "templates", MethodArg::Tree => "tree" },
                    "epp": a.epp,
                }),
            )?;
            emit(a.out.as_deref(), &text)?;
            if let Some(out) = &a.out {
                write_manifest(
                    out,
                    &RunManifest { subcommand: "transfer-eval", inputs: vec![a.dataset], seed: Some(cfg.seed) },
                    started,
                    jobs,
                )?;
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_)) => 2,
        Some(Error::Infeasible(_) | Error::BudgetExhausted { .. }) => 4,
        Some(Error::EigenNonConvergence { .. } | Error::Consistency(_)) => 5,
        Some(_) => 3,
        None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        eprintln!("error: --jobs must be >= 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli, jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
