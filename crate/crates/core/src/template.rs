//! Ternary unit-cell templates, bitset pre-selection over every template of
//! the coarse space, and exact support-maximizing template-set selection.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bits::Bitset;
use crate::error::{invalid, Error, Result};
use crate::unitcell::{irreducible_len, UnitCell};

/// Ternary mask over the irreducible pixels: each entry is soft (`0`),
/// stiff (`1`) or free (`*`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    resolution: usize,
    care: Vec<u64>,
    value: Vec<u64>,
}

impl Template {
    /// All-free template.
    pub fn free(n: usize) -> Result<Self> {
        let words = UnitCell::soft(n)?.words().len();
        Ok(Self {
            resolution: n,
            care: vec![0; words],
            value: vec![0; words],
        })
    }

    /// Fully specified template equal to `cell`.
    pub fn exact(cell: &UnitCell) -> Self {
        let len = cell.len();
        let mut care = vec![0u64; cell.words().len()];
        for k in 0..len {
            care[k / 64] |= 1 << (k % 64);
        }
        Self {
            resolution: cell.resolution(),
            care,
            value: cell.words().to_vec(),
        }
    }

    /// Coarse template from single-word masks.
    pub fn from_masks(n: usize, care: u64, value: u64) -> Result<Self> {
        let len = irreducible_len(n);
        if len > 64 {
            return invalid("single-word masks need at most 64 irreducible pixels");
        }
        if value & !care != 0 || (len < 64 && care >> len != 0) {
            return invalid("value mask must lie inside the care mask");
        }
        let mut t = Self::free(n)?;
        t.care[0] = care;
        t.value[0] = value;
        Ok(t)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        irreducible_len(self.resolution)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn care(&self) -> &[u64] {
        &self.care
    }

    pub fn value(&self) -> &[u64] {
        &self.value
    }

    /// `None` for a free entry.
    pub fn entry(&self, k: usize) -> Option<bool> {
        let (w, b) = (k / 64, k % 64);
        ((self.care[w] >> b) & 1 == 1).then(|| (self.value[w] >> b) & 1 == 1)
    }

    pub fn set_entry(&mut self, k: usize, v: Option<bool>) {
        let (w, b) = (k / 64, k % 64);
        self.care[w] &= !(1 << b);
        self.value[w] &= !(1 << b);
        if let Some(v) = v {
            self.care[w] |= 1 << b;
            if v {
                self.value[w] |= 1 << b;
            }
        }
    }

    pub fn free_count(&self) -> usize {
        (0..self.len()).filter(|&k| self.entry(k).is_none()).count()
    }

    pub fn matches(&self, cell: &UnitCell) -> Result<bool> {
        if cell.resolution() != self.resolution {
            return Err(Error::DimensionMismatch {
                expected: self.resolution,
                got: cell.resolution(),
            });
        }
        Ok(cell
            .words()
            .iter()
            .zip(self.care.iter().zip(&self.value))
            .all(|(x, (c, v))| x & c == *v))
    }

    /// Each entry becomes a `factor x factor` block of the same symbol.
    pub fn transfer(&self, factor: usize) -> Result<Self> {
        let n = self.resolution;
        let mut care = UnitCell::soft(n)?;
        let mut value = UnitCell::soft(n)?;
        for k in 0..self.len() {
            if let Some(v) = self.entry(k) {
                care.set(k, true);
                value.set(k, v);
            }
        }
        let care = care.refine(factor)?;
        let value = value.refine(factor)?;
        Ok(Self {
            resolution: care.resolution(),
            care: care.words().to_vec(),
            value: value.words().to_vec(),
        })
    }

    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let s = s.trim();
        let mut t = Self::free(n)?;
        if s.chars().count() != t.len() {
            return Err(Error::Format(format!(
                "template '{s}' has {} entries, expected {}",
                s.chars().count(),
                t.len()
            )));
        }
        for (k, ch) in s.chars().enumerate() {
            let v = match ch {
                '0' => Some(false),
                '1' => Some(true),
                '*' => None,
                other => return Err(Error::Format(format!("invalid template character {other:?}"))),
            };
            t.set_entry(k, v);
        }
        Ok(t)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len() {
            let ch = match self.entry(k) {
                None => '*',
                Some(false) => '0',
                Some(true) => '1',
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

/// Coarse designs packed for bitset counting.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub resolution: usize,
    /// Irreducible bits of each design.
    pub designs: Vec<u64>,
    pub labels: Bitset,
    /// Per pixel, the designs in which it is stiff.
    pixel_sets: Vec<Bitset>,
}

impl DesignMatrix {
    pub fn new(n: usize, designs: Vec<u64>, labels: &[u8]) -> Result<Self> {
        let len = irreducible_len(n);
        if len > 63 {
            return invalid(format!("resolution {n} is too fine for template mining"));
        }
        if designs.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: designs.len(),
                got: labels.len(),
            });
        }
        let pixel_sets = (0..len)
            .map(|k| Bitset::from_fn(designs.len(), |i| (designs[i] >> k) & 1 == 1))
            .collect();
        Ok(Self {
            resolution: n,
            labels: Bitset::from_fn(labels.len(), |i| labels[i] == 1),
            designs,
            pixel_sets,
        })
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.count()
    }

    /// Designs matched by `t`.
    pub fn coverage(&self, t: &Template) -> Bitset {
        let (c, v) = (t.care[0], t.value[0]);
        Bitset::from_fn(self.designs.len(), |i| self.designs[i] & c == v)
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub template: Template,
    pub support: usize,
    pub positives: usize,
}

impl Candidate {
    pub fn precision(&self) -> f64 {
        if self.support == 0 {
            0.0
        } else {
            self.positives as f64 / self.support as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreselectReport {
    pub candidates: Vec<Candidate>,
    /// Search-tree nodes whose bitset was evaluated.
    pub visited: u64,
    pub elapsed: Duration,
}

/// Sequence number of a template in mixed-radix ternary counting, with
/// pixel 0 most significant and digits `*`, `0`, `1`.
fn ternary_rank(len: usize, care: u64, value: u64) -> u64 {
    (0..len).fold(0u64, |acc, k| {
        let d = if (care >> k) & 1 == 0 {
            0
        } else if (value >> k) & 1 == 0 {
            1
        } else {
            2
        };
        acc * 3 + d
    })
}

struct Sweep<'a> {
    dm: &'a DesignMatrix,
    len: usize,
    min_support: usize,
    min_precision: f64,
}

impl Sweep<'_> {
    fn visit(&self, k: usize, set: &Bitset, care: u64, value: u64, out: &mut Vec<Candidate>, visited: &mut u64) {
        *visited += 1;
        let support = set.count();
        if support < self.min_support.max(1) {
            return;
        }
        if k == self.len {
            let positives = set.and_count(&self.dm.labels);
            if positives as f64 >= self.min_precision * support as f64 {
                out.push(Candidate {
                    template: Template::from_masks(self.dm.resolution, care, value).expect("valid masks"),
                    support,
                    positives,
                });
            }
            return;
        }
        let bit = 1u64 << k;
        let stiff = &self.dm.pixel_sets[k];
        self.visit(k + 1, set, care, value, out, visited);
        self.visit(k + 1, &set.and_not(stiff), care | bit, value, out, visited);
        self.visit(k + 1, &set.and(stiff), care | bit, value | bit, out, visited);
    }
}

/// Every coarse template with support at least `min_support` and precision
/// at least `min_precision`, in ternary counting order.
///
/// Matching sets are refined pixel by pixel; a branch stops once its support
/// falls below the threshold since specializing never adds matches.
pub fn preselect(dm: &DesignMatrix, min_support: usize, min_precision: f64) -> Result<PreselectReport> {
    if !(0.0..=1.0).contains(&min_precision) {
        return invalid("min_precision must lie in [0, 1]");
    }
    let start = Instant::now();
    let len = irreducible_len(dm.resolution);
    let sweep = Sweep {
        dm,
        len,
        min_support,
        min_precision,
    };
    // shard on the first pixels
    let depth = len.min(4);
    let mut shards: Vec<(Bitset, u64, u64)> = vec![(Bitset::full(dm.len()), 0, 0)];
    for k in 0..depth {
        let bit = 1u64 << k;
        let stiff = &dm.pixel_sets[k];
        shards = shards
            .into_iter()
            .flat_map(|(s, c, v)| {
                [
                    (s.clone(), c, v),
                    (s.and_not(stiff), c | bit, v),
                    (s.and(stiff), c | bit, v | bit),
                ]
            })
            .collect();
    }
    let results: Vec<(Vec<Candidate>, u64)> = shards
        .par_iter()
        .map(|(s, c, v)| {
            let mut out = Vec::new();
            let mut visited = 0;
            sweep.visit(depth, s, *c, *v, &mut out, &mut visited);
            (out, visited)
        })
        .collect();
    let visited = results.iter().map(|r| r.1).sum();
    let mut candidates: Vec<Candidate> = results.into_iter().flat_map(|r| r.0).collect();
    candidates.sort_by_key(|c| ternary_rank(len, c.template.care[0], c.template.value[0]));
    Ok(PreselectReport {
        candidates,
        visited,
        elapsed: start.elapsed(),
    })
}

/// Set-selection problem: choose at most `max_templates` candidates whose
/// union of matches is as large as possible with precision at least
/// `min_precision`.
#[derive(Clone, Debug)]
pub struct IlpInstance {
    pub coverage: Vec<Bitset>,
    pub labels: Bitset,
    pub max_templates: usize,
    pub min_precision: f64,
}

impl IlpInstance {
    pub fn from_candidates(dm: &DesignMatrix, cands: &[Candidate], s: usize, p: f64) -> Self {
        Self {
            coverage: cands.par_iter().map(|c| dm.coverage(&c.template)).collect(),
            labels: dm.labels.clone(),
            max_templates: s,
            min_precision: p,
        }
    }

    /// Support and positives of the union of `chosen`.
    pub fn evaluate(&self, chosen: &[usize]) -> (usize, usize) {
        let mut u = Bitset::new(self.labels.len());
        for &j in chosen {
            u.or_assign(&self.coverage[j]);
        }
        (u.count(), u.and_count(&self.labels))
    }

    pub fn feasible(&self, support: usize, positives: usize) -> bool {
        support > 0 && positives as f64 >= self.min_precision * support as f64
    }
}

#[derive(Clone, Debug)]
pub struct IlpSolution {
    /// Indices into the instance's candidates, ascending.
    pub chosen: Vec<usize>,
    pub support: usize,
    pub positives: usize,
    pub proven_optimal: bool,
    /// Upper bound on the optimal support.
    pub upper_bound: f64,
    pub nodes: u64,
}

impl IlpSolution {
    pub fn precision(&self) -> f64 {
        self.positives as f64 / self.support.max(1) as f64
    }

    /// Relative gap between the bound and the incumbent.
    pub fn gap(&self) -> f64 {
        if self.proven_optimal || self.upper_bound <= 0.0 {
            0.0
        } else {
            ((self.upper_bound - self.support as f64) / self.upper_bound).max(0.0)
        }
    }
}

struct Bnb<'a> {
    inst: &'a IlpInstance,
    /// Candidates left after dominance elimination, ascending.
    order: Vec<usize>,
    /// Per search position, the largest supports and positive counts in
    /// the suffix, descending.
    suffix_top_sup: Vec<Vec<usize>>,
    suffix_top_pos: Vec<Vec<usize>>,
    best: (usize, usize, Vec<usize>),
    /// The incumbent came from the warm start; an equal set found by the
    /// search replaces it.
    warm: bool,
    deadline: Option<Instant>,
    timed_out: bool,
    nodes: u64,
}

impl Bnb<'_> {
    fn bound(&self, i: usize, slots: usize, union: usize, tp: usize) -> f64 {
        let cover: usize = union + self.suffix_top_sup[i].iter().take(slots).sum::<usize>();
        let pos: usize = tp + self.suffix_top_pos[i].iter().take(slots).sum::<usize>();
        let p = self.inst.min_precision;
        if p > 0.0 {
            (cover as f64).min(pos as f64 / p)
        } else {
            cover as f64
        }
    }

    fn hopeless(&self, bound: f64) -> bool {
        let best = self.best.0 as f64;
        if self.warm {
            bound < best
        } else {
            bound <= best
        }
    }

    fn dfs(&mut self, i: usize, chosen: &mut Vec<usize>, union: &Bitset, tp: usize) {
        let m = self.order.len();
        let slots = self.inst.max_templates - chosen.len();
        let base = union.count();
        for pos in i..m {
            if self.timed_out {
                return;
            }
            self.nodes += 1;
            if self.nodes % 1024 == 0 && self.deadline.is_some_and(|d| Instant::now() > d) {
                self.timed_out = true;
                return;
            }
            // suffix bounds only shrink further along
            if self.hopeless(self.bound(pos, slots, base, tp)) {
                break;
            }
            let j = self.order[pos];
            let cov = &self.inst.coverage[j];
            let gain = cov.andnot_count(union);
            if gain == 0 {
                continue;
            }
            let next = union.or(cov);
            let support = base + gain;
            let positives = next.and_count(&self.inst.labels);
            chosen.push(j);
            if self.inst.feasible(support, positives)
                && (support > self.best.0 || (self.warm && support == self.best.0))
            {
                self.best = (support, positives, chosen.clone());
                self.warm = false;
            }
            if slots > 1 {
                self.dfs(pos + 1, chosen, &next, positives);
            }
            chosen.pop();
        }
    }
}

/// Greedy feasible start: repeatedly add the candidate with the largest
/// coverage gain that keeps the union precise enough.
fn greedy(inst: &IlpInstance) -> (usize, usize, Vec<usize>) {
    let mut union = Bitset::new(inst.labels.len());
    let mut chosen = Vec::new();
    let mut best = (0, 0, Vec::new());
    for _ in 0..inst.max_templates {
        let mut pick: Option<(usize, usize)> = None;
        for (j, cov) in inst.coverage.iter().enumerate() {
            let gain = cov.andnot_count(&union);
            if gain == 0 || pick.is_some_and(|(_, g)| g >= gain) {
                continue;
            }
            let u = union.or(cov);
            if inst.feasible(u.count(), u.and_count(&inst.labels)) {
                pick = Some((j, gain));
            }
        }
        let Some((j, _)) = pick else { break };
        union.or_assign(&inst.coverage[j]);
        chosen.push(j);
        let (s, p) = (union.count(), union.and_count(&inst.labels));
        if s > best.0 {
            let mut ids = chosen.clone();
            ids.sort_unstable();
            best = (s, p, ids);
        }
    }
    best
}

/// Candidates that can be dropped without losing any optimum: `j` is
/// dominated by `k` when every match of `j` is a match of `k` and `k`
/// adds only positives. Swapping `j` for `k` in any set then keeps the
/// precision constraint and does not lower support.
pub fn dominated(inst: &IlpInstance) -> Vec<bool> {
    let m = inst.coverage.len();
    let sup: Vec<usize> = inst.coverage.iter().map(Bitset::count).collect();
    let neg: Vec<usize> = inst
        .coverage
        .iter()
        .zip(&sup)
        .map(|(c, &s)| s - c.and_count(&inst.labels))
        .collect();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by_key(|&j| (neg[j], std::cmp::Reverse(sup[j]), j));
    let mut out = vec![false; m];
    let mut start = 0;
    while start < m {
        let mut end = start;
        while end < m && neg[idx[end]] == neg[idx[start]] {
            end += 1;
        }
        let group = &idx[start..end];
        let flags: Vec<bool> = group
            .par_iter()
            .enumerate()
            .map(|(a, &j)| {
                group[..a].iter().any(|&k| {
                    inst.coverage[j].is_subset(&inst.coverage[k]) && (sup[k] > sup[j] || k < j)
                })
            })
            .collect();
        for (&j, f) in group.iter().zip(flags) {
            out[j] = f;
        }
        start = end;
    }
    out
}

/// Exact branch and bound over template subsets.
///
/// Subsets are searched in lexicographic order of their ascending index
/// lists and ties keep the first optimum found, so listing candidates by
/// decreasing support both speeds up the search and makes the result
/// favor large templates. On timeout the incumbent is returned with a bound.
pub fn select_ilp(inst: &IlpInstance, time_limit: Option<Duration>) -> Result<IlpSolution> {
    if inst.coverage.is_empty() {
        return invalid("no candidate templates");
    }
    if inst.max_templates == 0 {
        return invalid("template budget must be >= 1");
    }
    if !(0.0..=1.0).contains(&inst.min_precision) {
        return invalid("min_precision must lie in [0, 1]");
    }
    let start = Instant::now();
    let drop = dominated(inst);
    let order: Vec<usize> = (0..inst.coverage.len()).filter(|&j| !drop[j]).collect();
    let keep = inst.max_templates;
    let top_suffix = |vals: Vec<usize>| {
        let mut out = vec![Vec::new(); vals.len() + 1];
        for i in (0..vals.len()).rev() {
            let mut v = out[i + 1].clone();
            let at = v.partition_point(|&x: &usize| x >= vals[i]);
            v.insert(at, vals[i]);
            v.truncate(keep);
            out[i] = v;
        }
        out
    };
    let suffix_top_sup = top_suffix(order.iter().map(|&j| inst.coverage[j].count()).collect());
    let suffix_top_pos = top_suffix(
        order
            .iter()
            .map(|&j| inst.coverage[j].and_count(&inst.labels))
            .collect(),
    );
    let warm = greedy(inst);
    let mut bnb = Bnb {
        inst,
        order,
        suffix_top_sup,
        suffix_top_pos,
        warm: warm.0 > 0,
        best: warm,
        deadline: time_limit.map(|t| start + t),
        timed_out: false,
        nodes: 0,
    };
    let root_bound = bnb.bound(0, keep, 0, 0);
    let empty = Bitset::new(inst.labels.len());
    bnb.dfs(0, &mut Vec::new(), &empty, 0);
    let (support, positives, chosen) = bnb.best.clone();
    if support == 0 {
        if bnb.timed_out {
            return Err(Error::BudgetExhausted { attempts: bnb.nodes });
        }
        return Err(Error::Infeasible(format!(
            "no set of at most {} templates reaches precision {}",
            inst.max_templates, inst.min_precision
        )));
    }
    Ok(IlpSolution {
        chosen,
        support,
        positives,
        proven_optimal: !bnb.timed_out,
        upper_bound: if bnb.timed_out { root_bound } else { support as f64 },
        nodes: bnb.nodes,
    })
}

pub const TSET_FORMAT: &str = "pixmeta-templates-v1";

/// A disjunction of templates with its training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateSet {
    pub resolution: usize,
    pub templates: Vec<Template>,
    /// Training support of each template, used as sampling weight.
    pub supports: Vec<usize>,
    pub precision: f64,
    pub support: usize,
    pub gap: f64,
    pub dataset_digest: String,
    pub label: String,
}

impl TemplateSet {
    pub fn predict(&self, cell: &UnitCell) -> Result<u8> {
        for t in &self.templates {
            if t.matches(cell)? {
                return Ok(1);
            }
        }
        Ok(0)
    }

    pub fn transfer(&self, factor: usize) -> Result<Self> {
        let templates = self
            .templates
            .iter()
            .map(|t| t.transfer(factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            resolution: self.resolution * factor,
            templates,
            ..self.clone()
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# format = {TSET_FORMAT}\n# resolution = {}\n# label = {}\n# precision = {}\n# support = {}\n# gap = {}\n# dataset = {}\n",
            self.resolution, self.label, self.precision, self.support, self.gap, self.dataset_digest
        );
        for (t, s) in self.templates.iter().zip(&self.supports) {
            out.push_str(&format!("{t} {s}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut set = TemplateSet {
            resolution: 0,
            templates: Vec::new(),
            supports: Vec::new(),
            precision: 0.0,
            support: 0,
            gap: 0.0,
            dataset_digest: String::new(),
            label: String::new(),
        };
        let mut format_ok = false;
        for (ln, line) in text.lines().enumerate() {
            let bad = |m: &str| Error::Format(format!("template file line {}: {m}", ln + 1));
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h.split_once('=').ok_or_else(|| bad("header without '='"))?;
                let v = v.trim();
                match k.trim() {
                    "format" => {
                        if v != TSET_FORMAT {
                            return Err(bad("unknown format"));
                        }
                        format_ok = true;
                    }
                    "resolution" => set.resolution = v.parse().map_err(|_| bad("bad resolution"))?,
                    "label" => set.label = v.to_string(),
                    "precision" => set.precision = v.parse().map_err(|_| bad("bad precision"))?,
                    "support" => set.support = v.parse().map_err(|_| bad("bad support"))?,
                    "gap" => set.gap = v.parse().map_err(|_| bad("bad gap"))?,
                    "dataset" => set.dataset_digest = v.to_string(),
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if set.resolution == 0 {
                return Err(bad("resolution header must precede templates"));
            }
            let mut parts = line.split_whitespace();
            let t = Template::parse(set.resolution, parts.next().unwrap_or(""))?;
            let s = match parts.next() {
                Some(s) => s.parse().map_err(|_| bad("bad support"))?,
                None => 1,
            };
            set.templates.push(t);
            set.supports.push(s);
        }
        if !format_ok {
            return Err(Error::Format("template file lacks format header".into()));
        }
        Ok(set)
    }
}

#[derive(Clone, Debug)]
pub struct MiningConfig {
    pub max_templates: usize,
    pub min_precision: f64,
    pub pre_support: usize,
    pub pre_precision: f64,
    pub time_limit: Option<Duration>,
}

impl MiningConfig {
    pub fn new(max_templates: usize, min_precision: f64) -> Self {
        Self {
            max_templates,
            min_precision,
            pre_support: 10,
            pre_precision: (min_precision - 0.05).max(0.0),
            time_limit: Some(Duration::from_secs(1800)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MiningReport {
    pub candidates: usize,
    pub preselect_time: Duration,
    pub solution: IlpSolution,
}

/// Pre-selection followed by exact selection on one labeled design set.
///
/// Candidates enter the selection ordered by decreasing support, then
/// ternary counting order.
pub fn mine_templates(
    n: usize,
    designs: &[u64],
    labels: &[u8],
    cfg: &MiningConfig,
    dataset_digest: &str,
    label: &str,
) -> Result<(TemplateSet, MiningReport)> {
    let dm = DesignMatrix::new(n, designs.to_vec(), labels)?;
    let pre = preselect(&dm, cfg.pre_support, cfg.pre_precision)?;
    log::info!("pre-selection kept {} templates in {:?}", pre.candidates.len(), pre.elapsed);
    let mut cands = pre.candidates;
    if cands.is_empty() {
        return Err(Error::Infeasible(format!(
            "no template reaches support {} and precision {}",
            cfg.pre_support, cfg.pre_precision
        )));
    }
    cands.sort_by_key(|c| std::cmp::Reverse(c.support));
    let inst = IlpInstance::from_candidates(&dm, &cands, cfg.max_templates, cfg.min_precision);
    let sol = select_ilp(&inst, cfg.time_limit)?;
    let set = TemplateSet {
        resolution: n,
        templates: sol.chosen.iter().map(|&j| cands[j].template.clone()).collect(),
        supports: sol.chosen.iter().map(|&j| cands[j].support).collect(),
        precision: sol.precision(),
        support: sol.support,
        gap: sol.gap(),
        dataset_digest: dataset_digest.to_string(),
        label: label.to_string(),
    };
    Ok((
        set,
        MiningReport {
            candidates: cands.len(),
            preselect_time: pre.elapsed,
            solution: sol,
        },
    ))
}

/// Held-out (support, positives) of a template set.
pub fn set_counts(set: &TemplateSet, cells: &[UnitCell], labels: &[u8]) -> Result<(usize, usize)> {
    let mut support = 0;
    let mut positives = 0;
    for (c, &y) in cells.iter().zip(labels) {
        if set.predict(c)? == 1 {
            support += 1;
            positives += y as usize;
        }
    }
    Ok((support, positives))
}
