//! Bilinear-quadrilateral plane elasticity on a periodic square mesh.
//!
//! The mesh is `N x N` square elements (`N = n * elements_per_pixel`) over
//! `[0, a]^2`. Nodes on the right and top edges are eliminated in favour of
//! their periodic images on the left and bottom edges, carrying the Bloch
//! phase `exp(-i gamma . a_n)`. The reduced matrices are `P^H K P` and
//! `P^H M P`, assembled element by element into one fixed sparse pattern
//! shared by every cell of the same mesh size.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::c64;
use faer::sparse::linalg::solvers::SymbolicLlt;
use faer::sparse::SymbolicSparseColMat;
use faer::prelude::Reborrow;
use faer::Side;

use crate::error::{invalid, Error, Result};
use crate::unitcell::{PhysicalConfig, UnitCell};

pub type ElementMatrix = [[f64; 8]; 8];

/// Stiffness of a square bilinear element for unit Young's modulus.
///
/// Local node order is counter-clockwise from the lower-left corner, dofs
/// interleaved `(ux, uy)`. Closed form; independent of the element size.
pub fn element_stiffness_unit(poisson: f64, plane_strain: bool) -> ElementMatrix {
    // plane strain is plane stress with E' = E/(1-nu^2), nu' = nu/(1-nu)
    let (scale, nu) = if plane_strain {
        (1.0 / (1.0 - poisson * poisson), poisson / (1.0 - poisson))
    } else {
        (1.0, poisson)
    };
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    const PATTERN: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let factor = scale / (1.0 - nu * nu);
    let mut out = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[i][j] = factor * k[PATTERN[i][j]];
        }
    }
    out
}

/// Consistent mass of a square bilinear element for `rho * h^2 = 1`.
pub fn element_mass_unit() -> ElementMatrix {
    const S: [[f64; 4]; 4] = [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ];
    let mut out = [[0.0; 8]; 8];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..2 {
                out[2 * a + c][2 * b + c] = S[a][b] / 36.0;
            }
        }
    }
    out
}

/// Cell-independent part of a periodic mesh: sparsity pattern, element
/// scatter positions and the symbolic Cholesky factorization.
pub struct MeshTopology {
    pub elements_per_side: usize,
    pub dof: usize,
    pub symbolic: SymbolicSparseColMat<usize>,
    pub llt_symbolic: SymbolicLlt<usize>,
    /// Position of local entry `(i, j)` of element `e` in the value array.
    positions: Vec<[u32; 64]>,
    /// Position of the transposed entry for every stored entry.
    transpose: Vec<u32>,
    /// Wrap flags `(x, y)` per local node of each element.
    wraps: Vec<[(bool, bool); 4]>,
}

impl std::fmt::Debug for MeshTopology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeshTopology")
            .field("elements_per_side", &self.elements_per_side)
            .field("dof", &self.dof)
            .field("nnz", &self.transpose.len())
            .finish()
    }
}

impl MeshTopology {
    /// Shared topology for an `N x N` periodic mesh.
    pub fn shared(elements_per_side: usize) -> Result<Arc<MeshTopology>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<MeshTopology>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("topology cache poisoned").get(&elements_per_side) {
            return Ok(t.clone());
        }
        let topo = Arc::new(MeshTopology::build(elements_per_side)?);
        cache
            .lock()
            .expect("topology cache poisoned")
            .insert(elements_per_side, topo.clone());
        Ok(topo)
    }

    fn build(nel: usize) -> Result<MeshTopology> {
        if nel < 2 {
            return invalid("periodic mesh needs at least 2 elements per side");
        }
        let dof = 2 * nel * nel;
        let node = |ix: usize, iy: usize| (iy % nel) * nel + (ix % nel);
        let mut elem_dofs = Vec::with_capacity(nel * nel);
        let mut wraps = Vec::with_capacity(nel * nel);
        for ey in 0..nel {
            for ex in 0..nel {
                let corners = [(ex, ey), (ex + 1, ey), (ex + 1, ey + 1), (ex, ey + 1)];
                let mut d = [0usize; 8];
                let mut w = [(false, false); 4];
                for (a, &(ix, iy)) in corners.iter().enumerate() {
                    let nd = node(ix, iy);
                    d[2 * a] = 2 * nd;
                    d[2 * a + 1] = 2 * nd + 1;
                    w[a] = (ix == nel, iy == nel);
                }
                elem_dofs.push(d);
                wraps.push(w);
            }
        }

        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); dof];
        for d in &elem_dofs {
            for &r in d {
                for &c in d {
                    cols[c].push(r);
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(dof + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in cols.iter_mut() {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let find = |r: usize, c: usize| -> u32 {
            let (s, e) = (col_ptr[c], col_ptr[c + 1]);
            let k = row_idx[s..e].binary_search(&r).expect("entry present in pattern");
            (s + k) as u32
        };
        let positions: Vec<[u32; 64]> = elem_dofs
            .iter()
            .map(|d| {
                let mut p = [0u32; 64];
                for i in 0..8 {
                    for j in 0..8 {
                        p[8 * i + j] = find(d[i], d[j]);
                    }
                }
                p
            })
            .collect();
        let mut transpose = vec![0u32; row_idx.len()];
        for c in 0..dof {
            for p in col_ptr[c]..col_ptr[c + 1] {
                transpose[p] = find(c, row_idx[p]);
            }
        }
        let symbolic = SymbolicSparseColMat::new_checked(dof, dof, col_ptr, None, row_idx);
        let llt_symbolic = SymbolicLlt::try_new(symbolic.rb(), Side::Lower)
            .map_err(|e| Error::Consistency(format!("symbolic factorization failed: {e:?}")))?;
        Ok(MeshTopology {
            elements_per_side: nel,
            dof,
            symbolic,
            llt_symbolic,
            positions,
            transpose,
            wraps,
        })
    }

    pub fn nnz(&self) -> usize {
        self.transpose.len()
    }

    /// Largest `|A_ij - conj(A_ji)|` relative to the largest entry.
    pub fn hermitian_defect(&self, values: &[c64]) -> f64 {
        let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let worst = values
            .iter()
            .zip(&self.transpose)
            .map(|(v, &t)| (v - values[t as usize].conj()).norm())
            .fold(0.0, f64::max);
        worst / scale
    }
}

/// Finite-element model of one unit cell: mesh plus per-element materials.
#[derive(Clone, Debug)]
pub struct FemAssembly {
    pub topology: Arc<MeshTopology>,
    pub cell_side: f64,
    pub elements_per_pixel: usize,
    /// Young's modulus per element (row-major over the mesh, row = y).
    pub modulus: Vec<f64>,
    /// Density per element.
    pub density: Vec<f64>,
    ke_unit: ElementMatrix,
    me_unit: ElementMatrix,
}

impl FemAssembly {
    pub fn new(cell: &UnitCell, phys: &PhysicalConfig, elements_per_pixel: usize) -> Result<Self> {
        phys.validate()?;
        if elements_per_pixel == 0 {
            return invalid("elements_per_pixel must be >= 1");
        }
        let grid = cell.expand();
        let n = grid.n();
        let nel = n * elements_per_pixel;
        let topology = MeshTopology::shared(nel)?;
        let mut modulus = Vec::with_capacity(nel * nel);
        let mut density = Vec::with_capacity(nel * nel);
        for ey in 0..nel {
            for ex in 0..nel {
                let stiff = grid.get(ey / elements_per_pixel, ex / elements_per_pixel) == 1;
                let (e, rho) = phys.phase(stiff);
                modulus.push(e);
                density.push(rho);
            }
        }
        Ok(Self {
            topology,
            cell_side: phys.cell_side,
            elements_per_pixel,
            modulus,
            density,
            ke_unit: element_stiffness_unit(phys.poisson, phys.plane_strain),
            me_unit: element_mass_unit(),
        })
    }

    pub fn elements_per_side(&self) -> usize {
        self.topology.elements_per_side
    }

    pub fn element_count(&self) -> usize {
        self.modulus.len()
    }

    /// Geometric node count of the unreduced mesh.
    pub fn geometric_nodes(&self) -> usize {
        let n = self.elements_per_side() + 1;
        n * n
    }

    pub fn dof(&self) -> usize {
        self.topology.dof
    }

    pub fn element_stiffness(&self, e: usize) -> ElementMatrix {
        let mut k = self.ke_unit;
        k.iter_mut().flatten().for_each(|v| *v *= self.modulus[e]);
        k
    }

    pub fn element_mass(&self, e: usize) -> ElementMatrix {
        let h = self.cell_side / self.elements_per_side() as f64;
        let s = self.density[e] * h * h;
        let mut m = self.me_unit;
        m.iter_mut().flatten().for_each(|v| *v *= s);
        m
    }

    /// Reduced Bloch stiffness and mass values on the shared pattern.
    pub fn bloch_matrices(&self, gamma: (f64, f64)) -> (Vec<c64>, Vec<c64>) {
        let topo = &*self.topology;
        let nnz = topo.nnz();
        let mut k = vec![c64::new(0.0, 0.0); nnz];
        let mut m = vec![c64::new(0.0, 0.0); nnz];
        let a = self.cell_side;
        let px = c64::from_polar(1.0, -gamma.0 * a);
        let py = c64::from_polar(1.0, -gamma.1 * a);
        let one = c64::new(1.0, 0.0);
        let h = a / self.elements_per_side() as f64;
        for (e, pos) in topo.positions.iter().enumerate() {
            let mut phase = [one; 8];
            for (node, &(wx, wy)) in topo.wraps[e].iter().enumerate() {
                let mut p = one;
                if wx {
                    p *= px;
                }
                if wy {
                    p *= py;
                }
                phase[2 * node] = p;
                phase[2 * node + 1] = p;
            }
            let ek = self.modulus[e];
            let em = self.density[e] * h * h;
            for i in 0..8 {
                let ci = phase[i].conj();
                for j in 0..8 {
                    let f = ci * phase[j];
                    let p = pos[8 * i + j] as usize;
                    k[p] += f * (ek * self.ke_unit[i][j]);
                    let mu = self.me_unit[i][j];
                    if mu != 0.0 {
                        m[p] += f * (em * mu);
                    }
                }
            }
        }
        (k, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let cell = UnitCell::soft(10).unwrap();
        let fem = FemAssembly::new(&cell, &PhysicalConfig::default(), 1).unwrap();
        assert_eq!(fem.element_count(), 100);
        assert_eq!(fem.geometric_nodes(), 121);
        assert_eq!(fem.dof(), 200);
    }

    #[test]
    fn homogeneous_elements_identical() {
        let cell = UnitCell::soft(10).unwrap();
        let fem = FemAssembly::new(&cell, &PhysicalConfig::default(), 2).unwrap();
        let k0 = fem.element_stiffness(0);
        let m0 = fem.element_mass(0);
        for e in 1..fem.element_count() {
            assert_eq!(fem.element_stiffness(e), k0);
            assert_eq!(fem.element_mass(e), m0);
        }
    }

    #[test]
    fn element_matrices_are_symmetric_with_rigid_nullspace() {
        let k = element_stiffness_unit(0.3, true);
        for i in 0..8 {
            for j in 0..8 {
                assert!((k[i][j] - k[j][i]).abs() < 1e-14);
            }
            // translations produce no force
            let fx: f64 = (0..4).map(|a| k[i][2 * a]).sum();
            let fy: f64 = (0..4).map(|a| k[i][2 * a + 1]).sum();
            assert!(fx.abs() < 1e-13 && fy.abs() < 1e-13);
        }
        let m = element_mass_unit();
        let total: f64 = m.iter().flatten().sum();
        // two translational directions, each carrying the element mass
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bloch_matrices_hermitian() {
        let cell = UnitCell::from_id(10, 12345).unwrap();
        let fem = FemAssembly::new(&cell, &PhysicalConfig::default(), 1).unwrap();
        let (k, m) = fem.bloch_matrices((13.0, 7.5));
        assert!(fem.topology.hermitian_defect(&k) < 1e-14);
        assert!(fem.topology.hermitian_defect(&m) < 1e-14);
    }
}
