//! Brute-force oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use pixmeta::bits::Bitset;
use pixmeta::sff::{FeatureTable, ShapeLibrary};
use pixmeta::template::{IlpInstance, Template};
use pixmeta::tree::{objective_value, BinarizedFeatures, Confusion, Objective};
use pixmeta::unitcell::PixelGrid;
use pixmeta::UnitCell;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Direct double loop over placements and offsets.
pub fn naive_counts(grid: &PixelGrid, lib: &ShapeLibrary) -> Vec<u32> {
    let n = grid.n();
    lib.shapes()
        .iter()
        .map(|s| {
            let mut hits = 0;
            for i in 0..n {
                for j in 0..n {
                    if s.offsets().iter().all(|&(r, c)| grid.get((i + r) % n, (j + c) % n) == 0) {
                        hits += 1;
                    }
                }
            }
            hits
        })
        .collect()
}

pub fn naive_matches(t: &Template, cell: &UnitCell) -> bool {
    (0..cell.len()).all(|k| match t.entry(k) {
        None => true,
        Some(v) => cell.get(k) == v,
    })
}

pub fn random_template(rng: &mut ChaCha8Rng, n: usize) -> Template {
    let mut t = Template::free(n).unwrap();
    let p_free = rng.random_range(0.3..0.95);
    for k in 0..t.len() {
        if !rng.random_bool(p_free) {
            t.set_entry(k, Some(rng.random_bool(0.5)));
        }
    }
    t
}

pub fn exhaustive_ilp(inst: &IlpInstance) -> Option<usize> {
    let m = inst.coverage.len();
    let mut best: Option<usize> = None;
    let mut consider = |set: &[usize]| {
        let (s, p) = inst.evaluate(set);
        if inst.feasible(s, p) && best.is_none_or(|b| s > b) {
            best = Some(s);
        }
    };
    for a in 0..m {
        consider(&[a]);
        if inst.max_templates >= 2 {
            for b in a + 1..m {
                consider(&[a, b]);
                if inst.max_templates >= 3 {
                    for c in b + 1..m {
                        consider(&[a, b, c]);
                    }
                }
            }
        }
    }
    best
}

pub fn random_ilp(rng: &mut ChaCha8Rng) -> IlpInstance {
    let n = rng.random_range(20..=200);
    let m = rng.random_range(1..=20);
    let labels = Bitset::from_fn(n, |_| rng.random_bool(0.4));
    let coverage = (0..m)
        .map(|_| {
            let size: f64 = rng.random_range(0.02..0.3);
            let purity = rng.random_range(0.5..1.0);
            Bitset::from_fn(n, |i| {
                let q = if labels.contains(i) { purity } else { 1.0 - purity };
                rng.random_bool((2.0 * size * q).min(1.0))
            })
        })
        .collect();
    IlpInstance {
        coverage,
        labels,
        max_templates: rng.random_range(1..=3),
        min_precision: [0.6, 0.75, 0.9][rng.random_range(0..3)],
    }
}

/// Brute force over every tree of depth at most two; returns the best
/// penalized objective.
pub fn exhaustive_depth2(bin: &BinarizedFeatures, labels: &[u8], obj: &Objective) -> f64 {
    let n = labels.len();
    let d = bin.columns.len();
    let col = |j: usize, i: usize| bin.columns[j].contains(i);
    let eval = |pred: &dyn Fn(usize) -> u8, leaves: usize| {
        let p: Vec<u8> = (0..n).map(pred).collect();
        let c = Confusion::from_predictions(&p, labels);
        objective_value(&c, &obj.kind) - obj.lambda * leaves as f64
    };
    let mut best = f64::NEG_INFINITY;
    for l in 0..2u8 {
        best = best.max(eval(&|_| l, 1));
    }
    // a subtree on one side: either a leaf or a stump
    let mut subtrees: Vec<(Option<usize>, u8, u8)> = vec![(None, 0, 0), (None, 1, 1)];
    for j in 0..d {
        for a in 0..2u8 {
            for b in 0..2u8 {
                subtrees.push((Some(j), a, b));
            }
        }
    }
    let apply = |t: &(Option<usize>, u8, u8), i: usize| match t.0 {
        None => t.1,
        Some(j) => {
            if col(j, i) {
                t.2
            } else {
                t.1
            }
        }
    };
    let leaves = |t: &(Option<usize>, u8, u8)| if t.0.is_some() { 2 } else { 1 };
    for root in 0..d {
        for lo in &subtrees {
            for hi in &subtrees {
                let v = eval(
                    &|i| if col(root, i) { apply(hi, i) } else { apply(lo, i) },
                    leaves(lo) + leaves(hi),
                );
                best = best.max(v);
            }
        }
    }
    best
}

pub fn random_tree_instance(rng: &mut ChaCha8Rng) -> (FeatureTable, Vec<u8>) {
    let n = rng.random_range(8..=64);
    let d = rng.random_range(1..=8);
    let density: f64 = rng.random_range(0.2..0.8);
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| (0..d).map(|_| u32::from(rng.random_bool(density))).collect())
        .collect();
    // labels loosely tied to the first two features, plus noise
    let mut labels: Vec<u8> = rows
        .iter()
        .map(|r| {
            let base = r[0] == 1 && r.get(1).is_none_or(|&v| v == 0);
            u8::from(base ^ rng.random_bool(0.15))
        })
        .collect();
    labels[0] = 1;
    labels[1] = 0;
    let table = FeatureTable {
        names: (0..d).map(|i| format!("f{i}")).collect(),
        denom: 1,
        ids: (0..n as u64).collect(),
        rows,
    };
    (table, labels)
}
