//! Lowest eigenpairs of the Hermitian pencil `(K, M)` by shift-invert block
//! Krylov iteration with Rayleigh-Ritz extraction in the `M` inner product.

use std::sync::Once;

use faer::c64;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::SparseColMatRef;
use faer::prelude::{Reborrow, ReborrowMut};
use faer::linalg::matmul::matmul;
use faer::{Accum, Conj, Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fem::MeshTopology;

const BLOCK: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct EigenSettings {
    /// Relative residual tolerance in the `M` norm.
    pub tol: f64,
    /// Krylov basis limit as a multiple of the requested count, plus 40.
    pub basis_factor: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            basis_factor: 6,
        }
    }
}

fn sequential_faer() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn one() -> c64 {
    c64::new(1.0, 0.0)
}

struct Pencil<'a> {
    topo: &'a MeshTopology,
    m: &'a [c64],
    llt: Llt<usize, c64>,
}

impl Pencil<'_> {
    fn mul_m(&self, x: &[c64], out: &mut [c64]) {
        out.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
        let sym = &self.topo.symbolic;
        let col_ptr = sym.col_ptr();
        let rows = sym.row_idx();
        for c in 0..self.topo.dof {
            let xc = x[c];
            for p in col_ptr[c]..col_ptr[c + 1] {
                out[rows[p]] += self.m[p] * xc;
            }
        }
    }

}

/// Lowest `nev` eigenvalues of `K u = lambda M u`, ascending.
///
/// `k` and `m` are value arrays on the topology's full Hermitian pattern.
/// `sigma` must lie strictly below the smallest eigenvalue so that
/// `K - sigma M` is positive definite.
pub fn lowest_eigenvalues(
    topo: &MeshTopology,
    k: &[c64],
    m: &[c64],
    nev: usize,
    sigma: f64,
    settings: &EigenSettings,
) -> std::result::Result<Vec<f64>, String> {
    sequential_faer();
    let n = topo.dof;
    if nev == 0 || nev >= n {
        return Err(format!("requested {nev} eigenvalues of a {n}-dof problem"));
    }
    let shifted: Vec<c64> = k.iter().zip(m).map(|(a, b)| a - b * sigma).collect();
    let mat = SparseColMatRef::new(topo.symbolic.rb(), &shifted);
    let llt = Llt::try_new_with_symbolic(topo.llt_symbolic.clone(), mat, Side::Lower)
        .map_err(|e| format!("shifted matrix not positive definite: {e:?}"))?;
    let pencil = Pencil { topo, m, llt };

    let cap = (settings.basis_factor * nev + 40).min(n);
    let zero = c64::new(0.0, 0.0);
    // basis V, M V, A V = (K - sigma M)^{-1} M V and H = (M V)^H A V
    let mut v = Mat::<c64>::zeros(n, cap);
    let mut mv = Mat::<c64>::zeros(n, cap);
    let mut av = Mat::<c64>::zeros(n, cap);
    let mut h = Mat::<c64>::zeros(cap, cap);
    let mut dim = 0usize;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b10c);
    let mut block = Mat::<c64>::from_fn(n, BLOCK, |_, _| {
        c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let mut z = Mat::<c64>::zeros(n, 1);
    let mut mz = vec![zero; n];
    let mut coef = Mat::<c64>::zeros(cap, 1);
    let mut next_rr = 2 * nev + 2 * BLOCK;

    loop {
        let start = dim;
        for b in 0..block.ncols() {
            z.col_as_slice_mut(0).copy_from_slice(block.col_as_slice(b));
            pencil.mul_m(z.col_as_slice(0), &mut mz);
            let norm0 = dot(z.col_as_slice(0), &mz).re.max(0.0).sqrt();
            if norm0 == 0.0 {
                continue;
            }
            // classical Gram-Schmidt, twice
            for _pass in 0..2 {
                if dim == 0 {
                    break;
                }
                let mut c = coef.as_mut().subrows_mut(0, dim);
                matmul(c.rb_mut(), Accum::Replace, mv.as_ref().subcols(0, dim).adjoint(), z.as_ref(), one(), Par::Seq);
                matmul(z.as_mut(), Accum::Add, v.as_ref().subcols(0, dim), c.as_ref(), -one(), Par::Seq);
            }
            pencil.mul_m(z.col_as_slice(0), &mut mz);
            let norm = dot(z.col_as_slice(0), &mz).re.max(0.0).sqrt();
            if norm <= 1e-10 * norm0 {
                continue;
            }
            let inv = 1.0 / norm;
            for (dst, src) in v.col_as_slice_mut(dim).iter_mut().zip(z.col_as_slice(0)) {
                *dst = src * inv;
            }
            for (dst, src) in mv.col_as_slice_mut(dim).iter_mut().zip(&mz) {
                *dst = src * inv;
            }
            dim += 1;
            if dim == cap {
                break;
            }
        }
        if dim > start {
            // A applied to the whole new block in one multi-rhs solve
            let nb = dim - start;
            let mut ab = av.as_mut().subcols_mut(start, nb);
            ab.copy_from(mv.as_ref().subcols(start, nb));
            pencil.llt.solve_in_place_with_conj(Conj::No, ab);
            let mut hb = Mat::<c64>::zeros(dim, nb);
            matmul(hb.as_mut(), Accum::Replace, mv.as_ref().subcols(0, dim).adjoint(), av.as_ref().subcols(start, nb), one(), Par::Seq);
            for jb in 0..nb {
                let j = start + jb;
                for i in 0..j {
                    h[(i, j)] = hb[(i, jb)];
                    h[(j, i)] = hb[(i, jb)].conj();
                }
                h[(j, j)] = c64::new(hb[(j, jb)].re, 0.0);
            }
        }
        let exhausted = dim == start || dim == cap;
        if dim >= next_rr || exhausted {
            next_rr = dim + (2 * BLOCK).max(nev / 2);
            let eig = h
                .as_ref()
                .submatrix(0, 0, dim, dim)
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| format!("projected eigenproblem failed: {e:?}"))?;
            let s = eig.S();
            let u = eig.U();
            // largest theta <-> smallest lambda; ascending order in S
            let want = nev.min(dim);
            let top = u.subcols(dim - want, want);
            let thetas: Vec<f64> = (0..want).map(|r| s[dim - want + r].re).collect();
            let mut converged = want == nev;
            if converged && dim < n {
                let mut res = Mat::<c64>::zeros(n, want);
                matmul(res.as_mut(), Accum::Replace, av.as_ref().subcols(0, dim), top, one(), Par::Seq);
                let mut vs = Mat::<c64>::zeros(n, want);
                matmul(vs.as_mut(), Accum::Replace, v.as_ref().subcols(0, dim), top, one(), Par::Seq);
                for r in (0..want).rev() {
                    let theta = thetas[r];
                    let col = res.col_as_slice_mut(r);
                    for (x, y) in col.iter_mut().zip(vs.col_as_slice(r)) {
                        *x -= y * theta;
                    }
                    pencil.mul_m(res.col_as_slice(r), &mut mz);
                    let rn = dot(res.col_as_slice(r), &mz).re.max(0.0).sqrt();
                    if !(rn <= settings.tol * theta.abs()) {
                        converged = false;
                        break;
                    }
                }
            }
            if converged {
                let mut lambdas: Vec<f64> = thetas.iter().map(|t| sigma + 1.0 / t).collect();
                lambdas.sort_by(|a, b| a.total_cmp(b));
                return Ok(lambdas);
            }
            if exhausted {
                return Err(format!(
                    "basis of {dim} vectors exhausted before {nev} Ritz pairs converged"
                ));
            }
        }
        block = av.as_ref().subcols(start, dim - start).to_owned();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::fem::FemAssembly;
    use crate::unitcell::{PhysicalConfig, UnitCell};

    #[test]
    fn converges_on_random_cell() {
        let cell = UnitCell::from_id(10, 4242).unwrap();
        let fem = FemAssembly::new(&cell, &PhysicalConfig::default(), 1).unwrap();
        let (k, m) = fem.bloch_matrices((5.0, 2.0));
        let l = lowest_eigenvalues(&fem.topology, &k, &m, 10, -1e3, &EigenSettings::default())
            .unwrap();
        assert_eq!(l.len(), 10);
        assert!(l.windows(2).all(|w| w[0] <= w[1]));
        assert!(l[0] > 0.0);
    }
}
