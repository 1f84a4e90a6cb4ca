//! Optimal sparse decision trees over thresholded shape-frequency features.
//!
//! The search is a dynamic program over subproblems (subsets of training
//! samples, represented as bitsets) and remaining depth. Every subproblem
//! yields the Pareto frontier of its achievable `(FP, FN, leaves)` triples.
//! Both supported objectives are non-increasing in each coordinate, so the
//! root frontier contains an optimal tree, and any partial tree can be
//! bounded by assuming its unresolved parts are classified perfectly up to
//! the equivalent-points floor.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bits::Bitset;
use crate::error::{invalid, Error, Result};
use crate::sff::{FeatureTable, SffVector};

/// One binary column: `value > num / den` for source feature `feature`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Threshold {
    pub feature: usize,
    pub num: u64,
    pub den: u64,
}

impl Threshold {
    /// Exact test of `count / denom > num / den`.
    pub fn exceeded_by(&self, count: u32, denom: u32) -> bool {
        count as u128 * self.den as u128 > self.num as u128 * denom as u128
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Clone, Debug)]
pub struct BinarizedFeatures {
    pub feature_names: Vec<String>,
    pub denom: u32,
    pub thresholds: Vec<Threshold>,
    /// Per column, the samples whose value exceeds the threshold.
    pub columns: Vec<Bitset>,
    pub n_samples: usize,
}

/// Thresholds at midpoints of consecutive distinct values. With more than
/// `max_thresholds` candidates, the `i`-th kept threshold sits just below
/// the value at rank `round(i * N / (cap + 1))` of the sorted sample.
pub fn binarize(table: &FeatureTable, max_thresholds: usize) -> Result<BinarizedFeatures> {
    if max_thresholds == 0 {
        return invalid("max_thresholds must be >= 1");
    }
    let n = table.rows.len();
    let mut thresholds = Vec::new();
    let mut columns = Vec::new();
    for f in 0..table.names.len() {
        let mut vals: Vec<u32> = table.rows.iter().map(|r| r[f]).collect();
        vals.sort_unstable();
        let mut distinct = vals.clone();
        distinct.dedup();
        if distinct.len() < 2 {
            log::info!("feature '{}' is constant; no columns", table.names[f]);
            continue;
        }
        let mids: Vec<(u32, u32)> = if distinct.len() - 1 <= max_thresholds {
            distinct.windows(2).map(|w| (w[0], w[1])).collect()
        } else {
            let mut out: Vec<(u32, u32)> = Vec::new();
            for i in 1..=max_thresholds {
                let rank = ((i * n) as f64 / (max_thresholds + 1) as f64).round() as usize;
                let u = vals[rank.clamp(1, n - 1)];
                let pos = distinct.binary_search(&u).expect("value present");
                let pos = pos.max(1);
                let pair = (distinct[pos - 1], distinct[pos]);
                if out.last() != Some(&pair) {
                    out.push(pair);
                }
            }
            out
        };
        for (a, b) in mids {
            let t = Threshold {
                feature: f,
                num: a as u64 + b as u64,
                den: 2 * table.denom as u64,
            };
            columns.push(Bitset::from_fn(n, |i| t.exceeded_by(table.rows[i][f], table.denom)));
            thresholds.push(t);
        }
    }
    Ok(BinarizedFeatures {
        feature_names: table.names.clone(),
        denom: table.denom,
        thresholds,
        columns,
        n_samples: n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    BalancedAccuracy,
    /// `TP/(TP+FP+eps) - K/(TP+eps)`
    PrecisionSupport { k: f64, eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    /// Penalty per leaf.
    pub lambda: f64,
}

impl Objective {
    pub fn precision_support(k: f64, eps: f64, lambda: f64) -> Result<Self> {
        if !(eps > 0.0) || !(k >= 0.0) || !(lambda >= 0.0) {
            return invalid("objective needs eps > 0, K >= 0, lambda >= 0");
        }
        Ok(Self {
            kind: ObjectiveKind::PrecisionSupport { k, eps },
            lambda,
        })
    }

    pub fn balanced_accuracy(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return invalid("lambda must be >= 0");
        }
        Ok(Self {
            kind: ObjectiveKind::BalancedAccuracy,
            lambda,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_predictions(pred: &[u8], labels: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &y) in pred.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }
}

/// Objective value without the leaf penalty.
pub fn objective_value(c: &Confusion, kind: &ObjectiveKind) -> f64 {
    match *kind {
        ObjectiveKind::BalancedAccuracy => {
            let p = (c.tp + c.fn_) as f64;
            let n = (c.fp + c.tn) as f64;
            let tpr = if p > 0.0 { c.tp as f64 / p } else { 0.0 };
            let tnr = if n > 0.0 { c.tn as f64 / n } else { 0.0 };
            0.5 * (tpr + tnr)
        }
        ObjectiveKind::PrecisionSupport { k, eps } => {
            let tp = c.tp as f64;
            tp / (tp + c.fp as f64 + eps) - k / (tp + eps)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: u8,
        pos: u64,
        neg: u64,
    },
    Split {
        /// Source feature (shape) name and index.
        shape: String,
        feature: usize,
        num: u64,
        den: u64,
        /// Taken when the value is at or below the threshold.
        low: Box<Node>,
        /// Taken when the value exceeds the threshold.
        high: Box<Node>,
    },
}

impl Node {
    fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { low, high, .. } => low.leaves() + high.leaves(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { low, high, .. } => 1 + low.depth().max(high.depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseTree {
    pub feature_names: Vec<String>,
    pub denom: u32,
    pub objective: Objective,
    pub root: Node,
}

impl SparseTree {
    pub fn constant(label: u8, feature_names: Vec<String>, denom: u32) -> Self {
        Self {
            feature_names,
            denom,
            objective: Objective {
                kind: ObjectiveKind::BalancedAccuracy,
                lambda: 0.0,
            },
            root: Node::Leaf { label, pos: 0, neg: 0 },
        }
    }

    pub fn leaves(&self) -> usize {
        self.root.leaves()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn predict_counts(&self, counts: &[u32], denom: u32) -> Result<u8> {
        if counts.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                got: counts.len(),
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Split { feature, num, den, low, high, .. } => {
                    let t = Threshold { feature: *feature, num: *num, den: *den };
                    node = if t.exceeded_by(counts[*feature], denom) { high } else { low };
                }
            }
        }
    }

    pub fn predict(&self, sff: &SffVector) -> Result<u8> {
        self.predict_counts(&sff.counts, sff.denom)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub objective: Objective,
    pub depth_limit: usize,
    pub time_limit: Option<Duration>,
    /// Abort (as on timeout) once this many subproblems are cached.
    pub max_subproblems: usize,
    pub trace: bool,
}

impl FitConfig {
    pub fn new(objective: Objective, depth_limit: usize) -> Self {
        Self {
            objective,
            depth_limit,
            time_limit: None,
            max_subproblems: 2_000_000,
            trace: false,
        }
    }
}

/// One bound check: the optimistic value of any tree containing a
/// subproblem, and the best value any of its computed subtrees admits.
#[derive(Clone, Copy, Debug)]
pub struct TraceEntry {
    pub bound: f64,
    pub best: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub tree: SparseTree,
    /// Objective minus leaf penalty on the training data.
    pub value: f64,
    pub confusion: Confusion,
    pub proven_optimal: bool,
    /// Upper bound on the optimum minus `value`; zero when proven.
    pub gap: f64,
    pub completed_depth: usize,
    pub subproblems: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug)]
enum Shape {
    Leaf(u8),
    Split(u32, Arc<Shape>, Arc<Shape>),
}

#[derive(Clone, Debug)]
struct Point {
    fp: u32,
    fn_: u32,
    leaves: u32,
    shape: Arc<Shape>,
}

/// Lower bounds on the part of the tree outside a subproblem.
#[derive(Clone, Copy, Debug, Default)]
struct Context {
    fp: u32,
    fn_: u32,
    /// Errors that land in FP or FN, split unknown.
    flex: u32,
    leaves: u32,
}

impl Context {
    fn plus(self, fp: u32, fn_: u32, flex: u32, leaves: u32) -> Self {
        Context {
            fp: self.fp + fp,
            fn_: self.fn_ + fn_,
            flex: self.flex + flex,
            leaves: self.leaves + leaves,
        }
    }

    fn le(&self, other: &Context) -> bool {
        self.fp <= other.fp
            && self.fn_ <= other.fn_
            && self.flex + self.fp + self.fn_ <= other.flex + other.fp + other.fn_
            && self.leaves <= other.leaves
    }
}

struct Entry {
    ctx: Context,
    frontier: Arc<Vec<Point>>,
}

struct Timeout;

struct Search<'a> {
    bin: &'a BinarizedFeatures,
    labels: &'a Bitset,
    obj: Objective,
    p: u32,
    n: u32,
    /// Equivalence class of each sample (identical binary rows).
    class_of: Vec<u32>,
    memo: HashMap<(Bitset, usize), Entry>,
    incumbent: f64,
    deadline: Option<Instant>,
    max_subproblems: usize,
    trace: Option<Vec<TraceEntry>>,
    ticks: u64,
}

impl Search<'_> {
    fn phi(&self, fp: u32, fn_: u32) -> f64 {
        let c = Confusion {
            tp: (self.p - fn_.min(self.p)) as u64,
            fp: fp as u64,
            fn_: fn_ as u64,
            tn: (self.n - fp.min(self.n)) as u64,
        };
        objective_value(&c, &self.obj.kind)
    }

    fn value(&self, fp: u32, fn_: u32, leaves: u32) -> f64 {
        self.phi(fp, fn_) - self.obj.lambda * leaves as f64
    }

    /// Best value over every split of `flex` unassigned errors.
    fn optimistic(&self, fp: u32, fn_: u32, flex: u32, leaves: u32) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for x in 0..=flex {
            best = best.max(self.phi(fp + x, fn_ + flex - x));
        }
        best - self.obj.lambda * leaves as f64
    }

    fn floor(&self, s: &Bitset, scratch: &mut HashMap<u32, (u32, u32)>) -> u32 {
        scratch.clear();
        for i in s.iter_ones() {
            let e = scratch.entry(self.class_of[i]).or_insert((0, 0));
            if self.labels.contains(i) {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        scratch.values().map(|&(a, b)| a.min(b)).sum()
    }

    fn check_budget(&mut self) -> std::result::Result<(), Timeout> {
        self.ticks += 1;
        if self.memo.len() > self.max_subproblems {
            return Err(Timeout);
        }
        if self.ticks % 256 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() > d {
                    return Err(Timeout);
                }
            }
        }
        Ok(())
    }

    fn solve(
        &mut self,
        s: &Bitset,
        depth: usize,
        ctx: Context,
    ) -> std::result::Result<Arc<Vec<Point>>, Timeout> {
        self.check_budget()?;
        let key = (s.clone(), depth);
        if let Some(e) = self.memo.get(&key) {
            if e.ctx.le(&ctx) {
                return Ok(e.frontier.clone());
            }
        }
        let pos = s.and_count(self.labels) as u32;
        let neg = s.count() as u32 - pos;
        let mut cand: Vec<(u32, u32, u32, Arc<Shape>)> = vec![
            (0, pos, 1, Arc::new(Shape::Leaf(0))),
            (neg, 0, 1, Arc::new(Shape::Leaf(1))),
        ];
        let mut scratch = HashMap::new();
        let own_floor = self.floor(s, &mut scratch);
        let bound = self.optimistic(ctx.fp, ctx.fn_, ctx.flex + own_floor, ctx.leaves + 1);
        let split_bound = self.optimistic(ctx.fp, ctx.fn_, ctx.flex + own_floor, ctx.leaves + 2);
        if depth > 0 && pos > 0 && neg > 0 && split_bound > self.incumbent {
            let mut seen: HashSet<Bitset> = HashSet::new();
            let mut low = Bitset::new(s.len());
            for (col, bits) in self.bin.columns.iter().enumerate() {
                s.and_into(bits, &mut low);
                let nh = low.count();
                if nh == 0 || nh == s.count() {
                    continue;
                }
                // `low` currently holds the high side
                let high = low.clone();
                let low_side = s.and_not(&high);
                if !seen.insert(high.clone()) {
                    continue;
                }
                let fl = self.floor(&low_side, &mut scratch);
                let fh = self.floor(&high, &mut scratch);
                if self.optimistic(ctx.fp, ctx.fn_, ctx.flex + fl + fh, ctx.leaves + 2) <= self.incumbent {
                    continue;
                }
                let fr_low = self.solve(&low_side, depth - 1, ctx.plus(0, 0, fh, 1))?;
                if fr_low.is_empty() {
                    continue;
                }
                let min_fp = fr_low.iter().map(|p| p.fp).min().unwrap_or(0);
                let min_fn = fr_low.iter().map(|p| p.fn_).min().unwrap_or(0);
                let min_l = fr_low.iter().map(|p| p.leaves).min().unwrap_or(1);
                let rest = fl.saturating_sub(min_fp + min_fn);
                let fr_high = self.solve(&high, depth - 1, ctx.plus(min_fp, min_fn, rest, min_l))?;
                for a in fr_low.iter() {
                    for b in fr_high.iter() {
                        let (fp, fn_, l) = (a.fp + b.fp, a.fn_ + b.fn_, a.leaves + b.leaves);
                        if self.optimistic(ctx.fp + fp, ctx.fn_ + fn_, ctx.flex, ctx.leaves + l)
                            <= self.incumbent
                        {
                            continue;
                        }
                        cand.push((fp, fn_, l, Arc::new(Shape::Split(col as u32, a.shape.clone(), b.shape.clone()))));
                    }
                }
            }
        }
        // drop hopeless points, then keep the Pareto set in generation order
        cand.retain(|c| self.optimistic(ctx.fp + c.0, ctx.fn_ + c.1, ctx.flex, ctx.leaves + c.2) > self.incumbent);
        let frontier = Arc::new(pareto(cand));
        if self.trace.is_some() {
            let best = frontier
                .iter()
                .map(|p| self.optimistic(ctx.fp + p.fp, ctx.fn_ + p.fn_, ctx.flex, ctx.leaves + p.leaves))
                .fold(f64::NEG_INFINITY, f64::max);
            if let Some(t) = self.trace.as_mut() {
                t.push(TraceEntry { bound, best });
            }
        }
        self.memo.insert(
            key,
            Entry {
                ctx,
                frontier: frontier.clone(),
            },
        );
        Ok(frontier)
    }
}

fn pareto(mut cand: Vec<(u32, u32, u32, Arc<Shape>)>) -> Vec<Point> {
    cand.sort_by_key(|c| (c.0, c.1, c.2));
    let max_l = cand.iter().map(|c| c.2).max().unwrap_or(0) as usize;
    let mut min_fn = vec![u32::MAX; max_l + 1];
    let mut out = Vec::new();
    for (fp, fn_, l, shape) in cand {
        let dominated = min_fn[..=l as usize].iter().any(|&m| m <= fn_);
        if dominated {
            continue;
        }
        min_fn[l as usize] = min_fn[l as usize].min(fn_);
        out.push(Point {
            fp,
            fn_,
            leaves: l,
            shape,
        });
    }
    out
}

fn build_node(
    shape: &Shape,
    samples: &Bitset,
    bin: &BinarizedFeatures,
    labels: &Bitset,
) -> Node {
    match shape {
        Shape::Leaf(label) => {
            let pos = samples.and_count(labels) as u64;
            Node::Leaf {
                label: *label,
                pos,
                neg: samples.count() as u64 - pos,
            }
        }
        Shape::Split(col, lo, hi) => {
            let col = *col as usize;
            let t = &bin.thresholds[col];
            let high = samples.and(&bin.columns[col]);
            let low = samples.and_not(&bin.columns[col]);
            Node::Split {
                shape: bin.feature_names[t.feature].clone(),
                feature: t.feature,
                num: t.num,
                den: t.den,
                low: Box::new(build_node(lo, &low, bin, labels)),
                high: Box::new(build_node(hi, &high, bin, labels)),
            }
        }
    }
}

/// Optimal tree within `depth_limit` splits per root-to-leaf path.
///
/// Depths are solved in increasing order; each completed depth seeds the
/// incumbent for the next. On timeout the best tree found so far is
/// returned together with an optimality gap.
pub fn fit_optimal_tree(bin: &BinarizedFeatures, labels: &[u8], cfg: &FitConfig) -> Result<FitResult> {
    if labels.len() != bin.n_samples {
        return Err(Error::DimensionMismatch {
            expected: bin.n_samples,
            got: labels.len(),
        });
    }
    if cfg.depth_limit == 0 {
        return invalid("depth_limit must be >= 1");
    }
    let label_bits = Bitset::from_fn(labels.len(), |i| labels[i] == 1);
    let p = label_bits.count() as u32;
    let n = labels.len() as u32 - p;
    if p == 0 || n == 0 {
        return invalid("training labels need at least one positive and one negative");
    }
    if bin.columns.is_empty() {
        return Err(Error::Infeasible("no binary features to split on".into()));
    }

    // equivalence classes of identical binary rows
    let mut class_of = vec![0u32; labels.len()];
    let mut ids: HashMap<Vec<u64>, u32> = HashMap::new();
    for (i, c) in class_of.iter_mut().enumerate() {
        let row = Bitset::from_fn(bin.columns.len(), |j| bin.columns[j].contains(i));
        let next = ids.len() as u32;
        *c = *ids.entry(row.words().to_vec()).or_insert(next);
    }

    let start = Instant::now();
    let mut search = Search {
        bin,
        labels: &label_bits,
        obj: cfg.objective,
        p,
        n,
        class_of,
        memo: HashMap::new(),
        incumbent: f64::NEG_INFINITY,
        deadline: cfg.time_limit.map(|t| start + t),
        max_subproblems: cfg.max_subproblems,
        trace: cfg.trace.then(Vec::new),
        ticks: 0,
    };
    let all = Bitset::full(labels.len());

    // depth 0: the better constant leaf
    let leaf0 = search.value(0, p, 1);
    let leaf1 = search.value(n, 0, 1);
    let mut best = if leaf1 > leaf0 {
        (leaf1, Arc::new(Shape::Leaf(1)))
    } else {
        (leaf0, Arc::new(Shape::Leaf(0)))
    };
    let mut completed = 0;
    let mut proven = true;
    for depth in 1..=cfg.depth_limit {
        // slightly below the incumbent so equal-valued trees stay visible
        search.incumbent = best.0 - 1e-12 * best.0.abs().max(1.0);
        search.memo.clear();
        match search.solve(&all, depth, Context::default()) {
            Ok(frontier) => {
                for pt in frontier.iter() {
                    let v = search.value(pt.fp, pt.fn_, pt.leaves);
                    if v > best.0 {
                        best = (v, pt.shape.clone());
                    }
                }
                completed = depth;
            }
            Err(Timeout) => {
                proven = false;
                break;
            }
        }
    }
    let subproblems = search.memo.len();
    let gap = if proven {
        0.0
    } else {
        let mut scratch = HashMap::new();
        let floor = search.floor(&all, &mut scratch);
        (search.optimistic(0, 0, floor, 1) - best.0).max(0.0)
    };
    let root = build_node(&best.1, &all, bin, &label_bits);
    let tree = SparseTree {
        feature_names: bin.feature_names.clone(),
        denom: bin.denom,
        objective: cfg.objective,
        root,
    };
    let pred: Vec<u8> = (0..labels.len())
        .map(|i| predict_binary(&tree.root, bin, i))
        .collect();
    let confusion = Confusion::from_predictions(&pred, labels);
    let value = objective_value(&confusion, &cfg.objective.kind) - cfg.objective.lambda * tree.leaves() as f64;
    Ok(FitResult {
        tree,
        value,
        confusion,
        proven_optimal: proven,
        gap,
        completed_depth: completed,
        subproblems,
        trace: search.trace.unwrap_or_default(),
    })
}

fn predict_binary(node: &Node, bin: &BinarizedFeatures, i: usize) -> u8 {
    match node {
        Node::Leaf { label, .. } => *label,
        Node::Split { feature, num, den, low, high, .. } => {
            let col = bin
                .thresholds
                .iter()
                .position(|t| t.feature == *feature && t.num == *num && t.den == *den)
                .expect("split column present");
            if bin.columns[col].contains(i) {
                predict_binary(high, bin, i)
            } else {
                predict_binary(low, bin, i)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<u32>>, denom: u32) -> FeatureTable {
        let d = rows[0].len();
        FeatureTable {
            names: (0..d).map(|i| format!("f{i}")).collect(),
            denom,
            ids: (0..rows.len() as u64).collect(),
            rows,
        }
    }

    #[test]
    fn binarize_midpoints() {
        let b = binarize(&table(vec![vec![2], vec![4], vec![2]], 10), 64).unwrap();
        assert_eq!(b.thresholds.len(), 1);
        assert!((b.thresholds[0].value() - 0.3).abs() < 1e-15);
        assert_eq!(b.columns[0].iter_ones().collect::<Vec<_>>(), vec![1]);
        let c = binarize(&table(vec![vec![7], vec![7]], 10), 64).unwrap();
        assert!(c.thresholds.is_empty());
    }

    #[test]
    fn binarize_quantile_cap() {
        // values 1..5 (over 10); cap 2 keeps ranks round(5/3)=2 and round(10/3)=3
        let rows = (1..=5).map(|v| vec![v]).collect();
        let b = binarize(&table(rows, 10), 2).unwrap();
        let v: Vec<f64> = b.thresholds.iter().map(Threshold::value).collect();
        assert_eq!(v.len(), 2);
        assert!((v[0] - 0.25).abs() < 1e-15 && (v[1] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn objective_examples() {
        let ps = ObjectiveKind::PrecisionSupport { k: 1.0, eps: 1e-9 };
        let c = Confusion { tp: 10, fp: 0, fn_: 0, tn: 5 };
        assert!((objective_value(&c, &ps) - 0.9).abs() < 1e-8);
        let c = Confusion { tp: 9, fp: 1, fn_: 1, tn: 5 };
        assert!((objective_value(&c, &ps) - (0.9 - 1.0 / 9.0)).abs() < 1e-8);
        let c = Confusion { tp: 0, fp: 0, fn_: 10, tn: 5 };
        assert!(objective_value(&c, &ps) < -1e8);
        let c = Confusion { tp: 3, fp: 1, fn_: 1, tn: 3 };
        assert!((objective_value(&c, &ObjectiveKind::BalancedAccuracy) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn perfect_single_feature() {
        let rows: Vec<Vec<u32>> = (0..20).map(|i| vec![(i % 2) as u32]).collect();
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let bin = binarize(&table(rows, 1), 8).unwrap();
        let obj = Objective::precision_support(1.0, 1e-9, 0.005).unwrap();
        let r = fit_optimal_tree(&bin, &labels, &FitConfig::new(obj, 3)).unwrap();
        assert!(r.proven_optimal);
        assert_eq!(r.tree.leaves(), 2);
        assert_eq!(r.confusion.tp, 10);
        assert_eq!(r.confusion.fp, 0);
    }

    #[test]
    fn predict_examples() {
        let names = vec!["plus".to_string()];
        let t = SparseTree::constant(0, names.clone(), 100);
        assert_eq!(t.predict_counts(&[55], 100).unwrap(), 0);
        let mut t = t;
        t.root = Node::Split {
            shape: "plus".into(),
            feature: 0,
            num: 20,
            den: 100,
            low: Box::new(Node::Leaf { label: 0, pos: 0, neg: 0 }),
            high: Box::new(Node::Leaf { label: 1, pos: 0, neg: 0 }),
        };
        assert_eq!(t.predict_counts(&[30], 100).unwrap(), 1);
        assert_eq!(t.predict_counts(&[20], 100).unwrap(), 0);
        assert!(t.predict_counts(&[1, 2], 100).is_err());
        let back = SparseTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
