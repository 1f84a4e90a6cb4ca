use nalgebra::{Matrix3, SMatrix};
use pixmeta::dispersion::eigen::EigenSettings;
use pixmeta::dispersion::fem::{element_mass_unit, element_stiffness_unit, FemAssembly};
use pixmeta::dispersion::{dispersion, frequencies_at, label_gaps, DispersionConfig, LabelPolicy};
use pixmeta::{PhysicalConfig, UnitCell};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type M8 = SMatrix<f64, 8, 8>;

/// Bilinear shape function derivatives on the unit square at (x, y),
/// nodes counter-clockwise from the lower-left corner.
fn shape(x: f64, y: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let n = [(1.0 - x) * (1.0 - y), x * (1.0 - y), x * y, (1.0 - x) * y];
    let dx = [-(1.0 - y), 1.0 - y, y, -y];
    let dy = [-(1.0 - x), -x, x, 1.0 - x];
    (n, dx, dy)
}

fn constitutive(nu: f64, plane_strain: bool) -> Matrix3<f64> {
    if plane_strain {
        let f = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
        Matrix3::new(1.0 - nu, nu, 0.0, nu, 1.0 - nu, 0.0, 0.0, 0.0, (1.0 - 2.0 * nu) / 2.0) * f
    } else {
        let f = 1.0 / (1.0 - nu * nu);
        Matrix3::new(1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0) * f
    }
}

fn gauss_points() -> [(f64, f64); 4] {
    let g = 0.5 / 3f64.sqrt();
    [(0.5 - g, 0.5 - g), (0.5 + g, 0.5 - g), (0.5 + g, 0.5 + g), (0.5 - g, 0.5 + g)]
}

fn quadrature_stiffness(nu: f64, plane_strain: bool) -> M8 {
    let d = constitutive(nu, plane_strain);
    let mut k = M8::zeros();
    for (x, y) in gauss_points() {
        let (_, dx, dy) = shape(x, y);
        let mut b = SMatrix::<f64, 3, 8>::zeros();
        for a in 0..4 {
            b[(0, 2 * a)] = dx[a];
            b[(1, 2 * a + 1)] = dy[a];
            b[(2, 2 * a)] = dy[a];
            b[(2, 2 * a + 1)] = dx[a];
        }
        k += b.transpose() * d * b * 0.25;
    }
    k
}

fn quadrature_mass() -> M8 {
    let mut m = M8::zeros();
    for (x, y) in gauss_points() {
        let (n, _, _) = shape(x, y);
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..2 {
                    m[(2 * a + c, 2 * b + c)] += n[a] * n[b] * 0.25;
                }
            }
        }
    }
    m
}

fn max_diff(a: &[[f64; 8]; 8], b: &M8) -> f64 {
    (0..8)
        .flat_map(|i| (0..8).map(move |j| (i, j)))
        .map(|(i, j)| (a[i][j] - b[(i, j)]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn element_matrices_match_gauss_quadrature() {
    for (nu, ps) in [(0.0, true), (0.0, false), (0.3, true), (0.3, false), (0.45, true)] {
        let diff = max_diff(&element_stiffness_unit(nu, ps), &quadrature_stiffness(nu, ps));
        assert!(diff < 1e-12, "nu={nu} plane_strain={ps}: {diff}");
    }
    assert!(max_diff(&element_mass_unit(), &quadrature_mass()) < 1e-15);
}

#[test]
fn mesh_arithmetic() {
    let phys = PhysicalConfig::default();
    let fem = FemAssembly::new(&UnitCell::soft(10).unwrap(), &phys, 1).unwrap();
    assert_eq!(fem.element_count(), 100);
    assert_eq!(fem.geometric_nodes(), 121);
    assert_eq!(fem.dof(), 200);
    let e0 = fem.element_stiffness(0);
    assert!((0..100).all(|e| fem.element_stiffness(e) == e0));
}

#[test]
fn shear_wave_slope_matches_analytic_speed() {
    let phys = PhysicalConfig::default();
    let cs = (phys.e_soft / (2.0 * (1.0 + phys.poisson)) / phys.rho_soft).sqrt();
    assert!((cs - 877.0).abs() < 1.0);
    let fem = FemAssembly::new(&UnitCell::soft(10).unwrap(), &phys, 2).unwrap();
    let k = 0.02 * PI / phys.cell_side;
    let f = frequencies_at(&fem, &phys, (k, 0.0), 4, &EigenSettings::default()).unwrap();
    let slope = 2.0 * PI * f[0] / k;
    assert!((slope / cs - 1.0).abs() < 0.02, "slope {slope} vs {cs}");
    let cl = (phys.e_soft * (1.0 - phys.poisson) / ((1.0 + phys.poisson) * (1.0 - 2.0 * phys.poisson)) / phys.rho_soft).sqrt();
    let slope_l = 2.0 * PI * f[1] / k;
    assert!((slope_l / cl - 1.0).abs() < 0.02, "longitudinal {slope_l} vs {cl}");
}

#[test]
fn rigid_modes_at_gamma() {
    let phys = PhysicalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for id in [0u64, 32767, rng.random_range(1..32767), rng.random_range(1..32767)] {
        let fem = FemAssembly::new(&UnitCell::from_id(10, id).unwrap(), &phys, 1).unwrap();
        let f = frequencies_at(&fem, &phys, (0.0, 0.0), 4, &EigenSettings::default()).unwrap();
        assert!(f[0] < 1e-4 * f[2] && f[1] < 1e-4 * f[2], "id {id}: {f:?}");
    }
}

#[test]
fn homogeneous_cells_have_no_gaps_below_50k() {
    let mut cfg = DispersionConfig::default();
    cfg.num_bands = 24;
    cfg.f_max_report = 50e3;
    cfg.points_per_segment = 8;
    for cell in [UnitCell::soft(10).unwrap(), UnitCell::stiff(10).unwrap()] {
        let r = dispersion(&cell, &cfg).unwrap();
        assert!(r.gaps.is_empty(), "{:?}", r.gaps);
        let p = LabelPolicy::intersect(0.0, 50e3).unwrap();
        assert_eq!(label_gaps(&r.gaps, &p), 0);
    }
}

#[test]
fn time_reversal_symmetry() {
    let phys = PhysicalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let cell = UnitCell::from_id(10, rng.random_range(0..32768)).unwrap();
        let fem = FemAssembly::new(&cell, &phys, 1).unwrap();
        let g = (rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0));
        let a = frequencies_at(&fem, &phys, g, 6, &EigenSettings::default()).unwrap();
        let b = frequencies_at(&fem, &phys, (-g.0, -g.1), 6, &EigenSettings::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * x.max(1.0), "{a:?} vs {b:?}");
        }
    }
}

/// Pixel corners where two stiff pixels meet only diagonally.
fn corner_contacts(cell: &UnitCell) -> usize {
    let g = cell.expand();
    let n = g.n();
    let mut count = 0;
    for i in 0..n {
        for j in 0..n {
            let (i1, j1) = ((i + 1) % n, (j + 1) % n);
            let (a, b, c, d) = (g.get(i, j), g.get(i1, j1), g.get(i, j1), g.get(i1, j));
            if a == b && c == d && a != c {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn corner_contact_census() {
    assert_eq!(corner_contacts(&UnitCell::soft(10).unwrap()), 0);
    let checker = UnitCell::from_id(10, 17738).unwrap();
    assert_eq!(corner_contacts(&checker), 52);
}

/// Nested conforming meshes with consistent mass give eigenvalues that can
/// only decrease under refinement.
#[test]
fn mesh_refinement_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let base = DispersionConfig { num_bands: 5, points_per_segment: 8, ..DispersionConfig::default() };
    let (mut worst, mut worst_smooth): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let cell = UnitCell::from_id(10, rng.random_range(0..32768)).unwrap();
        let coarse = dispersion(&cell, &DispersionConfig { elements_per_pixel: 2, ..base.clone() }).unwrap();
        let fine = dispersion(&cell, &DispersionConfig { elements_per_pixel: 4, ..base.clone() }).unwrap();
        let mut change: f64 = 0.0;
        for (rc, rf) in coarse.frequencies.iter().zip(&fine.frequencies) {
            let scale = rf[rf.len() - 1];
            for (a, b) in rc.iter().zip(rf) {
                assert!(*b <= a * (1.0 + 1e-6) + 1e-6 * scale, "refined {b} above coarse {a}");
                // rigid modes at Gamma compare against the band scale
                change = change.max((a - b).abs() / b.max(1e-3 * scale));
            }
        }
        worst = worst.max(change);
        if corner_contacts(&cell) == 0 {
            worst_smooth = worst_smooth.max(change);
        }
    }
    println!("epp 2 vs 4: worst relative change {worst:.4}, without corner contacts {worst_smooth:.4}");
}
