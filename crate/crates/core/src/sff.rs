//! Shape-frequency features: the fraction of toroidal placements at which an
//! offset pattern lies entirely in soft material.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::unitcell::{PixelGrid, UnitCell};

/// A sliding-window pattern given by pixel offsets from a reference pixel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub name: String,
    offsets: Vec<(usize, usize)>,
}

impl Shape {
    /// Deduplicates the offsets and shifts them so min row = min col = 0.
    pub fn new(name: impl Into<String>, offsets: &[(i64, i64)]) -> Result<Self> {
        let name = name.into();
        if offsets.is_empty() {
            return invalid(format!("shape '{name}' has no offsets"));
        }
        if name.is_empty() || name.contains([':', '\n']) {
            return invalid(format!("bad shape name '{name}'"));
        }
        let r0 = offsets.iter().map(|o| o.0).min().unwrap_or(0);
        let c0 = offsets.iter().map(|o| o.1).min().unwrap_or(0);
        let mut offs: Vec<(usize, usize)> = offsets
            .iter()
            .map(|&(r, c)| ((r - r0) as usize, (c - c0) as usize))
            .collect();
        offs.sort_unstable();
        offs.dedup();
        Ok(Self { name, offsets: offs })
    }

    pub fn rectangle(h: usize, w: usize) -> Self {
        let offs: Vec<(i64, i64)> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r as i64, c as i64)))
            .collect();
        Self::new(format!("rect{h}x{w}"), &offs).expect("nonempty rectangle")
    }

    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.offsets
    }

    /// Bounding box `(rows, cols)`.
    pub fn extent(&self) -> (usize, usize) {
        let h = self.offsets.iter().map(|o| o.0).max().unwrap_or(0) + 1;
        let w = self.offsets.iter().map(|o| o.1).max().unwrap_or(0) + 1;
        (h, w)
    }

    /// The same pattern rotated by 90 degrees.
    pub fn rotated(&self) -> Self {
        let offs: Vec<(i64, i64)> = self
            .offsets
            .iter()
            .map(|&(r, c)| (c as i64, -(r as i64)))
            .collect();
        Self::new(format!("{}_rot", self.name), &offs).expect("rotation keeps offsets")
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.name)?;
        for (r, c) in &self.offsets {
            write!(f, " ({r},{c})")?;
        }
        Ok(())
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// `name: (r,c) (r,c) ...`
    fn from_str(line: &str) -> Result<Self> {
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("shape line without ':': {line}")))?;
        let mut offs = Vec::new();
        for tok in rest.split(')') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let inner = tok
                .strip_prefix('(')
                .ok_or_else(|| Error::Format(format!("bad offset '{tok}' in: {line}")))?;
            let (r, c) = inner
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad offset '{tok}' in: {line}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Format(format!("bad offset '{tok}' in: {line}")))
            };
            offs.push((parse(r)?, parse(c)?));
        }
        Shape::new(name.trim(), &offs)
    }
}

/// Ordered shape collection; the order fixes the feature layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeLibrary {
    shapes: Vec<Shape>,
}

impl ShapeLibrary {
    pub fn new(shapes: Vec<Shape>) -> Result<Self> {
        if shapes.is_empty() {
            return invalid("shape library is empty");
        }
        let mut names: Vec<&str> = shapes.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate shape name '{}'", w[0]));
        }
        Ok(Self { shapes })
    }

    /// Solid rectangles up to 4x4, a plus, and pairs of parallel 1x4 bars.
    pub fn default_library() -> Self {
        let mut shapes = Vec::new();
        for h in 1..=4 {
            for w in 1..=4 {
                shapes.push(Shape::rectangle(h, w));
            }
        }
        shapes.push(Shape::new("plus", &[(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)]).unwrap());
        for gap in 1..=3i64 {
            let offs: Vec<(i64, i64)> = (0..4)
                .flat_map(|c| [(0, c), (gap + 1, c)])
                .collect();
            shapes.push(Shape::new(format!("bars1x4_gap{gap}"), &offs).unwrap());
        }
        Self::new(shapes).expect("default names are unique")
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.shapes.iter().map(|s| s.name.clone()).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let shapes = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<Vec<Shape>>>()?;
        Self::new(shapes)
    }

    pub fn to_text(&self) -> String {
        self.shapes.iter().map(|s| format!("{s}\n")).collect()
    }

    pub fn digest(&self) -> String {
        crate::sha256_hex(self.to_text().as_bytes())
    }
}

/// Feature vector stored as exact match counts over a common denominator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SffVector {
    pub counts: Vec<u32>,
    pub denom: u32,
    pub resolution: usize,
}

impl SffVector {
    pub fn values(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.denom as f64)
            .collect()
    }
}

fn soft_rows(grid: &PixelGrid) -> Vec<u128> {
    let n = grid.n();
    (0..n)
        .map(|i| {
            (0..n).fold(0u128, |acc, j| {
                if grid.get(i, j) == 0 {
                    acc | (1u128 << j)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// Cyclic right rotation within the low `n` bits: bit `j` of the result is
/// bit `(j + k) mod n` of `x`.
#[inline]
fn rotr(x: u128, k: usize, n: usize, full: u128) -> u128 {
    if k == 0 {
        x
    } else {
        ((x >> k) | (x << (n - k))) & full
    }
}

/// Match counts of every library shape on an arbitrary (not necessarily
/// symmetric) grid with toroidal indexing.
pub fn sff_grid(grid: &PixelGrid, lib: &ShapeLibrary) -> Result<SffVector> {
    let n = grid.n();
    if n == 0 || n > 128 {
        return invalid(format!("grid side {n} outside 1..=128"));
    }
    let rows = soft_rows(grid);
    let full = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let counts = lib
        .shapes()
        .iter()
        .map(|shape| {
            (0..n)
                .map(|i| {
                    shape
                        .offsets()
                        .iter()
                        .fold(full, |m, &(dr, dc)| m & rotr(rows[(i + dr) % n], dc % n, n, full))
                        .count_ones()
                })
                .sum::<u32>()
        })
        .collect();
    Ok(SffVector {
        counts,
        denom: (n * n) as u32,
        resolution: n,
    })
}

pub fn sff_coarse(cell: &UnitCell, lib: &ShapeLibrary) -> Result<SffVector> {
    sff_grid(&cell.expand(), lib)
}

/// Fine-resolution features against a coarse base grid.
///
/// Each offset pixel dilates to a `scale x scale` block and reference
/// positions stride by `scale`, so there are `base_n^2` placements. A
/// placement matches when its window holds fewer than `scale` stiff pixels.
pub fn sff_fine_grid(grid: &PixelGrid, lib: &ShapeLibrary, base_n: usize) -> Result<SffVector> {
    let m = grid.n();
    if base_n == 0 || m % base_n != 0 {
        return invalid(format!("resolution {m} is not a multiple of {base_n}"));
    }
    let scale = m / base_n;
    let mut blocks = vec![0u32; base_n * base_n];
    for i in 0..m {
        for j in 0..m {
            blocks[(i / scale) * base_n + j / scale] += u32::from(grid.get(i, j));
        }
    }
    let counts = lib
        .shapes()
        .iter()
        .map(|shape| {
            let mut hits = 0u32;
            for bi in 0..base_n {
                for bj in 0..base_n {
                    let stiff: u32 = shape
                        .offsets()
                        .iter()
                        .map(|&(dr, dc)| blocks[((bi + dr) % base_n) * base_n + (bj + dc) % base_n])
                        .sum();
                    if (stiff as usize) < scale {
                        hits += 1;
                    }
                }
            }
            hits
        })
        .collect();
    Ok(SffVector {
        counts,
        denom: (base_n * base_n) as u32,
        resolution: m,
    })
}

pub fn sff_fine(cell: &UnitCell, lib: &ShapeLibrary, base_n: usize) -> Result<SffVector> {
    sff_fine_grid(&cell.expand(), lib, base_n)
}

/// Coarse features at `base_n`, fine features above it.
pub fn featurize(cell: &UnitCell, lib: &ShapeLibrary, base_n: usize) -> Result<SffVector> {
    if cell.resolution() == base_n {
        sff_coarse(cell, lib)
    } else {
        sff_fine(cell, lib, base_n)
    }
}

pub const FEATS_FORMAT: &str = "pixmeta-feats-v1";

/// Integer feature matrix, one row per design, with a shared denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub denom: u32,
    pub ids: Vec<u64>,
    pub rows: Vec<Vec<u32>>,
}

impl FeatureTable {
    /// Coarse features for designs given by id at resolution `n`.
    pub fn from_ids(ids: &[u64], n: usize, lib: &ShapeLibrary) -> Result<Self> {
        use rayon::prelude::*;
        let rows = ids
            .par_iter()
            .map(|&id| sff_coarse(&UnitCell::from_id(n, id)?, lib).map(|v| v.counts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: lib.names(),
            denom: (n * n) as u32,
            ids: ids.to_vec(),
            rows,
        })
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            denom: self.denom,
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn to_text(&self, shapes_digest: &str) -> String {
        let mut out = format!(
            "# format = {FEATS_FORMAT}\n# denom = {}\n# shapes = {shapes_digest}\nid,{}\n",
            self.denom,
            self.names.join(",")
        );
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(&id.to_string());
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses the table and returns it with the recorded shapes digest.
    pub fn parse(text: &str) -> Result<(Self, String)> {
        let mut denom = None;
        let mut digest = String::new();
        let mut names = None;
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let bad = |m: &str| Error::Format(format!("feature file line {}: {m}", ln + 1));
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h.split_once('=').ok_or_else(|| bad("header without '='"))?;
                match k.trim() {
                    "format" if v.trim() != FEATS_FORMAT => return Err(bad("unknown format")),
                    "denom" => denom = Some(v.trim().parse::<u32>().map_err(|_| bad("bad denom"))?),
                    "shapes" => digest = v.trim().to_string(),
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            if names.is_none() {
                if cols.next() != Some("id") {
                    return Err(bad("expected column header starting with 'id'"));
                }
                names = Some(cols.map(str::to_string).collect::<Vec<_>>());
                continue;
            }
            let id = cols
                .next()
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| bad("bad id"))?;
            let row = cols
                .map(|s| s.parse::<u32>().map_err(|_| bad("bad count")))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != names.as_ref().map_or(0, Vec::len) {
                return Err(bad("column count mismatch"));
            }
            ids.push(id);
            rows.push(row);
        }
        let denom = denom.ok_or_else(|| Error::Format("feature file lacks denom".into()))?;
        if denom == 0 || rows.iter().flatten().any(|&c| c > denom) {
            return Err(Error::Format("feature counts exceed denominator".into()));
        }
        let names = names.ok_or_else(|| Error::Format("feature file lacks column header".into()))?;
        Ok((Self { names, denom, ids, rows }, digest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_table_round_trip() {
        let lib = ShapeLibrary::default_library();
        let t = FeatureTable::from_ids(&[0, 5, 32767], 10, &lib).unwrap();
        assert_eq!(t.rows[0], vec![100; lib.len()]);
        assert_eq!(t.rows[2], vec![0; lib.len()]);
        let (back, d) = FeatureTable::parse(&t.to_text(&lib.digest())).unwrap();
        assert_eq!(back, t);
        assert_eq!(d, lib.digest());
        assert_eq!(t.subset(&[2]).ids, vec![32767]);
    }

    #[test]
    fn shape_normalization_and_parse() {
        let s = Shape::new("x", &[(2, 3), (1, 1), (2, 3)]).unwrap();
        assert_eq!(s.offsets(), &[(0, 0), (1, 2)]);
        let text = s.to_string();
        assert_eq!(text, "x: (0,0) (1,2)");
        assert_eq!(text.parse::<Shape>().unwrap(), s);
        assert!(Shape::new("e", &[]).is_err());
        assert!("nocolon (0,0)".parse::<Shape>().is_err());
    }

    #[test]
    fn default_library_layout() {
        let lib = ShapeLibrary::default_library();
        assert_eq!(lib.len(), 20);
        let back = ShapeLibrary::parse(&lib.to_text()).unwrap();
        assert_eq!(back, lib);
        let dup = ShapeLibrary::new(vec![Shape::rectangle(1, 1), Shape::rectangle(1, 1)]);
        assert!(dup.is_err());
        assert!(ShapeLibrary::new(vec![]).is_err());
    }

    #[test]
    fn trivial_cells() {
        let lib = ShapeLibrary::default_library();
        let soft = sff_coarse(&UnitCell::soft(10).unwrap(), &lib).unwrap();
        assert!(soft.values().iter().all(|&v| v == 1.0));
        let stiff = sff_coarse(&UnitCell::stiff(10).unwrap(), &lib).unwrap();
        assert!(stiff.values().iter().all(|&v| v == 0.0));
        let cell = UnitCell::from_id(10, 0b1010_0110_0101).unwrap();
        let v = sff_coarse(&cell, &lib).unwrap();
        let soft_px = 100 - cell.expand().stiff_count();
        assert_eq!(v.counts[0], soft_px as u32);
    }

    #[test]
    fn single_stiff_pixel_at_scale_two() {
        let lib = ShapeLibrary::default_library();
        let mut g = PixelGrid::filled(20, 0);
        g.set(7, 11, 1);
        let v = sff_fine_grid(&g, &lib, 10).unwrap();
        assert!(v.values().iter().all(|&x| x == 1.0));
    }
}
