mod common;

use common::naive_counts;
use pixmeta::sff::{sff_coarse, sff_fine, sff_grid, Shape, ShapeLibrary};
use pixmeta::unitcell::{D4, PixelGrid};
use pixmeta::UnitCell;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cell(n: usize, rng: &mut impl Rng) -> UnitCell {
    let bits: Vec<bool> = (0..pixmeta::unitcell::irreducible_len(n)).map(|_| rng.random_bool(0.5)).collect();
    UnitCell::from_bits(n, &bits).unwrap()
}

#[test]
fn bit_parallel_matches_naive_counter() {
    let lib = ShapeLibrary::default_library();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, count) in [(10, 1000), (20, 200)] {
        for _ in 0..count {
            let cell = random_cell(n, &mut rng);
            let f = sff_coarse(&cell, &lib).unwrap();
            assert_eq!(f.counts, naive_counts(&cell.expand(), &lib));
            assert_eq!(f.denom as usize, n * n);
        }
    }
}

#[test]
fn trivial_cells() {
    let lib = ShapeLibrary::default_library();
    let soft = sff_coarse(&UnitCell::soft(10).unwrap(), &lib).unwrap();
    assert!(soft.values().iter().all(|&v| v == 1.0));
    let stiff = sff_coarse(&UnitCell::stiff(10).unwrap(), &lib).unwrap();
    assert!(stiff.values().iter().all(|&v| v == 0.0));
    let one = ShapeLibrary::new(vec![Shape::rectangle(1, 1)]).unwrap();
    let cell = UnitCell::from_id(10, 12345).unwrap();
    let soft_pixels = 100 - cell.expand().stiff_count();
    assert_eq!(sff_coarse(&cell, &one).unwrap().counts, vec![soft_pixels as u32]);
}

#[test]
fn empty_library_rejected() {
    assert!(ShapeLibrary::new(vec![]).is_err());
}

#[test]
fn rotated_shapes_score_the_same_on_symmetric_cells() {
    let lib = ShapeLibrary::default_library();
    let rotated = ShapeLibrary::new(lib.shapes().iter().map(Shape::rotated).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let cell = random_cell(10, &mut rng);
        assert_eq!(sff_coarse(&cell, &lib).unwrap().counts, sff_coarse(&cell, &rotated).unwrap().counts);
    }
}

#[test]
fn refined_cells_reproduce_coarse_features() {
    let lib = ShapeLibrary::default_library();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let cell = random_cell(10, &mut rng);
        let coarse = sff_coarse(&cell, &lib).unwrap();
        for factor in [2, 4] {
            let fine = sff_fine(&cell.refine(factor).unwrap(), &lib, 10).unwrap();
            assert_eq!(fine.counts, coarse.counts, "factor {factor}");
            assert_eq!(fine.denom, coarse.denom);
        }
    }
}

#[test]
fn fine_window_tolerates_a_single_stiff_pixel() {
    let lib = ShapeLibrary::default_library();
    let mut grid = PixelGrid::filled(20, 0);
    grid.set(7, 3, 1);
    let f = pixmeta::sff::sff_fine_grid(&grid, &lib, 10).unwrap();
    assert!(f.values().iter().all(|&v| v == 1.0));
    let soft = sff_fine(&UnitCell::soft(20).unwrap(), &lib, 10).unwrap();
    assert!(soft.values().iter().all(|&v| v == 1.0));
    assert!(sff_fine(&UnitCell::soft(20).unwrap(), &lib, 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn translation_invariance(id in 0u64..32768, di in 0usize..10, dj in 0usize..10) {
        let lib = ShapeLibrary::default_library();
        let grid = UnitCell::from_id(10, id).unwrap().expand();
        let a = sff_grid(&grid, &lib).unwrap();
        let b = sff_grid(&grid.translated(di, dj), &lib).unwrap();
        prop_assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn asymmetric_grids_match_naive(data in proptest::collection::vec(0u8..2, 100)) {
        let lib = ShapeLibrary::default_library();
        let grid = PixelGrid::new(10, data).unwrap();
        prop_assert_eq!(sff_grid(&grid, &lib).unwrap().counts, naive_counts(&grid, &lib));
    }

    #[test]
    fn d4_images_of_cells_are_the_same_cell(id in 0u64..32768) {
        let grid = UnitCell::from_id(10, id).unwrap().expand();
        for g in D4::ALL {
            prop_assert_eq!(&grid.transformed(g), &grid);
        }
    }
}
