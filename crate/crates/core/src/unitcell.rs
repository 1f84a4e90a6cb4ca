//! Symmetric pixelated unit cells.
//!
//! A cell of resolution `n` (even) is stored by its irreducible pixels: the
//! pairs `(r, c)` with `r <= c < n/2` of the top-left quadrant, listed in
//! lexicographic order. Every other pixel is recovered through the eight
//! elements of the square's symmetry group (both mirror axes and both
//! diagonals). Bit value 1 is the stiff phase, 0 the soft phase.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Number of irreducible pixels for an `n x n` cell: `h(h+1)/2` with `h = n/2`.
pub fn irreducible_len(n: usize) -> usize {
    let h = n / 2;
    h * (h + 1) / 2
}

/// Position of canonical pixel `(r, c)` in the irreducible vector.
///
/// The pair is swapped if needed so that `r <= c`; both coordinates must lie
/// in the quadrant `0..n/2`.
pub fn irreducible_index(n: usize, r: usize, c: usize) -> Result<usize> {
    let h = n / 2;
    if n == 0 || n % 2 != 0 {
        return invalid(format!("resolution must be a positive even integer, got {n}"));
    }
    if r >= h || c >= h {
        return invalid(format!("pixel ({r},{c}) outside the {h}x{h} quadrant"));
    }
    let (r, c) = if r <= c { (r, c) } else { (c, r) };
    Ok(tri_index(h, r, c))
}

#[inline]
fn tri_index(h: usize, r: usize, c: usize) -> usize {
    // pairs in rows 0..r, then the offset within row r
    r * (2 * h + 1 - r) / 2 + (c - r)
}

/// Fold a full-grid pixel onto its canonical irreducible coordinates.
#[inline]
pub fn canonical(n: usize, i: usize, j: usize) -> (usize, usize) {
    let a = i.min(n - 1 - i);
    let b = j.min(n - 1 - j);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Canonical `(r, c)` pairs in irreducible order.
pub fn irreducible_pixels(n: usize) -> Vec<(usize, usize)> {
    let h = n / 2;
    let mut out = Vec::with_capacity(irreducible_len(n));
    for r in 0..h {
        for c in r..h {
            out.push((r, c));
        }
    }
    out
}

/// Map from every full-grid pixel (row-major) to its irreducible index.
pub fn pixel_orbit_map(n: usize) -> Vec<usize> {
    let h = n / 2;
    let mut map = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (r, c) = canonical(n, i, j);
            map.push(tri_index(h, r, c));
        }
    }
    map
}

/// Dense `n x n` two-phase pixel matrix, row-major, 1 = stiff.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PixelGrid {
    n: usize,
    data: Vec<u8>,
}

impl PixelGrid {
    pub fn new(n: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if data.iter().any(|&v| v > 1) {
            return invalid("pixel values must be 0 or 1");
        }
        Ok(Self { n, data })
    }

    pub fn filled(n: usize, value: u8) -> Self {
        Self {
            n,
            data: vec![value.min(1); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.data[i * self.n + j] = v.min(1);
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn stiff_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Cyclic translation by `(di, dj)`.
    pub fn translated(&self, di: usize, dj: usize) -> Self {
        let n = self.n;
        let mut out = Self::filled(n, 0);
        for i in 0..n {
            for j in 0..n {
                out.set((i + di) % n, (j + dj) % n, self.get(i, j));
            }
        }
        out
    }

    /// Apply one of the eight symmetries of the square.
    pub fn transformed(&self, g: D4) -> Self {
        let n = self.n;
        let mut out = Self::filled(n, 0);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = g.apply(n, i, j);
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    /// Nearest-neighbour block upsampling.
    pub fn upsampled(&self, factor: usize) -> Self {
        let m = self.n * factor;
        let mut out = Self::filled(m, 0);
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.get(i / factor, j / factor));
            }
        }
        out
    }
}

/// Elements of the dihedral group of the square acting on pixel indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum D4 {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipRows,
    FlipCols,
    Transpose,
    AntiTranspose,
}

impl D4 {
    pub const ALL: [D4; 8] = [
        D4::Identity,
        D4::Rot90,
        D4::Rot180,
        D4::Rot270,
        D4::FlipRows,
        D4::FlipCols,
        D4::Transpose,
        D4::AntiTranspose,
    ];

    #[inline]
    pub fn apply(self, n: usize, i: usize, j: usize) -> (usize, usize) {
        let m = n - 1;
        match self {
            D4::Identity => (i, j),
            D4::Rot90 => (j, m - i),
            D4::Rot180 => (m - i, m - j),
            D4::Rot270 => (m - j, i),
            D4::FlipRows => (m - i, j),
            D4::FlipCols => (i, m - j),
            D4::Transpose => (j, i),
            D4::AntiTranspose => (m - j, m - i),
        }
    }
}

/// A D4-symmetric two-phase unit cell stored by its irreducible pixels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnitCell {
    resolution: usize,
    bits: Vec<u64>,
}

impl UnitCell {
    /// All-soft cell.
    pub fn soft(n: usize) -> Result<Self> {
        check_resolution(n)?;
        let len = irreducible_len(n);
        Ok(Self {
            resolution: n,
            bits: vec![0; len.div_ceil(64)],
        })
    }

    /// All-stiff cell.
    pub fn stiff(n: usize) -> Result<Self> {
        let mut c = Self::soft(n)?;
        for k in 0..c.len() {
            c.set(k, true);
        }
        Ok(c)
    }

    pub fn from_bits(n: usize, bits: &[bool]) -> Result<Self> {
        let mut c = Self::soft(n)?;
        if bits.len() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: c.len(),
                got: bits.len(),
            });
        }
        for (k, &b) in bits.iter().enumerate() {
            c.set(k, b);
        }
        Ok(c)
    }

    /// Build from a design id: bit `k` of `id` is irreducible pixel `k`.
    pub fn from_id(n: usize, id: u64) -> Result<Self> {
        let mut c = Self::soft(n)?;
        let len = c.len();
        if len < 64 && id >> len != 0 {
            return invalid(format!("design id {id} out of range for resolution {n}"));
        }
        if len > 64 {
            return invalid(format!("resolution {n} has {len} irreducible pixels; ids need <= 64"));
        }
        c.bits[0] = id;
        Ok(c)
    }

    /// Parse a string of '0'/'1' characters in irreducible order.
    pub fn from_bitstring(n: usize, s: &str) -> Result<Self> {
        let bits: Result<Vec<bool>> = s
            .trim()
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("invalid pixel character {other:?}"))),
            })
            .collect();
        Self::from_bits(n, &bits?)
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.len())
            .map(|k| if self.get(k) { '1' } else { '0' })
            .collect()
    }

    /// Design id, available when the cell has at most 64 irreducible pixels.
    pub fn id(&self) -> Option<u64> {
        (self.len() <= 64).then(|| self.bits[0])
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of irreducible pixels.
    pub fn len(&self) -> usize {
        irreducible_len(self.resolution)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        (self.bits[k / 64] >> (k % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: bool) {
        let w = &mut self.bits[k / 64];
        if v {
            *w |= 1 << (k % 64);
        } else {
            *w &= !(1 << (k % 64));
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    pub fn stiff_irreducible(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Full `n x n` pixel matrix.
    pub fn expand(&self) -> PixelGrid {
        let n = self.resolution;
        let map = pixel_orbit_map(n);
        let data = map.iter().map(|&k| self.get(k) as u8).collect();
        PixelGrid { n, data }
    }

    /// Inverse of [`UnitCell::expand`]; rejects matrices that are not D4-symmetric.
    pub fn reduce(grid: &PixelGrid) -> Result<Self> {
        let n = grid.n();
        check_resolution(n)?;
        for g in [D4::FlipRows, D4::FlipCols, D4::Transpose] {
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = g.apply(n, i, j);
                    if grid.get(i, j) != grid.get(a, b) {
                        return Err(Error::SymmetryViolation {
                            r0: i,
                            c0: j,
                            r1: a,
                            c1: b,
                        });
                    }
                }
            }
        }
        let mut cell = Self::soft(n)?;
        for (k, (r, c)) in irreducible_pixels(n).into_iter().enumerate() {
            cell.set(k, grid.get(r, c) == 1);
        }
        Ok(cell)
    }

    /// Subdivide every pixel into a `factor x factor` block of the same phase.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return invalid("refinement factor must be >= 1");
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let m = self.resolution * factor;
        let mut out = Self::soft(m)?;
        for (k, (r, c)) in irreducible_pixels(m).into_iter().enumerate() {
            let coarse = tri_index(self.resolution / 2, (r / factor).min(c / factor), (r / factor).max(c / factor));
            out.set(k, self.get(coarse));
        }
        Ok(out)
    }
}

pub fn check_resolution(n: usize) -> Result<()> {
    if n == 0 || n % 2 != 0 {
        return invalid(format!("resolution must be a positive even integer, got {n}"));
    }
    if n > 128 {
        return invalid(format!("resolution {n} exceeds the supported maximum of 128"));
    }
    Ok(())
}

/// Material and geometry of the two-phase cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Cell side length in metres.
    pub cell_side: f64,
    pub e_soft: f64,
    pub rho_soft: f64,
    pub e_stiff: f64,
    pub rho_stiff: f64,
    pub poisson: f64,
    /// Plane strain when true, plane stress otherwise.
    pub plane_strain: bool,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            cell_side: 0.1,
            e_soft: 2e9,
            rho_soft: 1000.0,
            e_stiff: 200e9,
            rho_stiff: 8000.0,
            poisson: 0.3,
            plane_strain: true,
        }
    }
}

impl PhysicalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_side", self.cell_side),
            ("e_soft", self.e_soft),
            ("rho_soft", self.rho_soft),
            ("e_stiff", self.e_stiff),
            ("rho_stiff", self.rho_stiff),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return invalid(format!("poisson ratio must lie in (0, 0.5), got {}", self.poisson));
        }
        Ok(())
    }

    /// `(E, rho)` of a phase (true = stiff).
    pub fn phase(&self, stiff: bool) -> (f64, f64) {
        if stiff {
            (self.e_stiff, self.rho_stiff)
        } else {
            (self.e_soft, self.rho_soft)
        }
    }
}
