use pixmeta::sampler::{
    draw_rng, pixel_center, sample_matern_free, sample_rejection_tree, sign_covariance,
    uniform_cell, FreeLaw, MaternField, SamplerConfig, TemplateSampler,
};
use pixmeta::sff::{featurize, ShapeLibrary};
use pixmeta::template::{Template, TemplateSet};
use pixmeta::tree::{Node, SparseTree};
use pixmeta::unitcell::{irreducible_pixels, UnitCell};
use pixmeta::Error;

fn set_of(templates: Vec<Template>, supports: Vec<usize>) -> TemplateSet {
    TemplateSet {
        resolution: templates[0].resolution(),
        templates,
        supports,
        precision: 1.0,
        support: 0,
        gap: 0.0,
        dataset_digest: String::new(),
        label: String::new(),
    }
}

fn stump(lib: &ShapeLibrary, shape: &str, num: u64, den: u64) -> SparseTree {
    let mut t = SparseTree::constant(0, lib.names(), 100);
    let feature = lib.names().iter().position(|n| n == shape).unwrap();
    t.root = Node::Split {
        shape: shape.into(),
        feature,
        num,
        den,
        low: Box::new(Node::Leaf { label: 0, pos: 0, neg: 0 }),
        high: Box::new(Node::Leaf { label: 1, pos: 0, neg: 0 }),
    };
    t
}

#[test]
fn constant_trees() {
    let lib = ShapeLibrary::default_library();
    let cfg = SamplerConfig { max_attempts: 500, ..SamplerConfig::new(1, 10) };
    let yes = SparseTree::constant(1, lib.names(), 100);
    let (_, attempts) = sample_rejection_tree(&yes, &lib, 10, &cfg, 0).unwrap();
    assert_eq!(attempts, 1);
    let no = SparseTree::constant(0, lib.names(), 100);
    match sample_rejection_tree(&no, &lib, 10, &cfg, 0) {
        Err(Error::BudgetExhausted { attempts }) => assert_eq!(attempts, 500),
        other => panic!("expected budget exhaustion, got {other:?}"),
    }
}

#[test]
fn rejection_rate_matches_tree_positive_rate() {
    let lib = ShapeLibrary::default_library();
    // soft fraction above 0.55
    let tree = stump(&lib, "rect1x1", 55, 100);
    let mut rng = draw_rng(999, 0);
    let probe = 20_000;
    let mut hits = 0;
    for _ in 0..probe {
        let c = uniform_cell(10, &mut rng).unwrap();
        hits += tree.predict(&featurize(&c, &lib, 10).unwrap()).unwrap() as usize;
    }
    let rate = hits as f64 / probe as f64;
    let cfg = SamplerConfig::new(5, 10);
    let mut draws = 0u64;
    let mut attempts = 0u64;
    while attempts < 10_000 {
        let (cell, a) = sample_rejection_tree(&tree, &lib, 10, &cfg, draws).unwrap();
        assert_eq!(tree.predict(&featurize(&cell, &lib, 10).unwrap()).unwrap(), 1);
        attempts += a;
        draws += 1;
    }
    let observed = draws as f64 / attempts as f64;
    let sigma = (rate * (1.0 - rate) / attempts as f64).sqrt() + (rate * (1.0 - rate) / probe as f64).sqrt();
    assert!((observed - rate).abs() < 3.0 * sigma, "{observed} vs {rate}");
    // reproducible under the seed
    let a = sample_rejection_tree(&tree, &lib, 10, &cfg, 3).unwrap();
    let b = sample_rejection_tree(&tree, &lib, 10, &cfg, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejection_at_fine_resolution_uses_fine_features() {
    let lib = ShapeLibrary::default_library();
    let tree = stump(&lib, "rect1x1", 55, 100);
    let cfg = SamplerConfig::new(2, 20);
    let (cell, _) = sample_rejection_tree(&tree, &lib, 10, &cfg, 0).unwrap();
    assert_eq!(cell.resolution(), 20);
    assert_eq!(tree.predict(&featurize(&cell, &lib, 10).unwrap()).unwrap(), 1);
}

#[test]
fn template_choice_is_support_proportional() {
    let a = Template::parse(10, "0**************").unwrap();
    let b = Template::parse(10, "1**************").unwrap();
    let set = set_of(vec![a, b], vec![300, 100]);
    let s = TemplateSampler::new(&set, &SamplerConfig::new(8, 10)).unwrap();
    let n = 10_000;
    let mut first = 0;
    for d in 0..n {
        let (cell, j) = s.draw(d).unwrap();
        assert!(s.template(j).matches(&cell).unwrap());
        first += usize::from(j == 0);
    }
    let f = first as f64 / n as f64;
    let sigma = (0.75f64 * 0.25 / n as f64).sqrt();
    assert!((f - 0.75).abs() < 3.0 * sigma, "{f}");
}

#[test]
fn sampled_cells_match_their_templates_at_every_resolution() {
    let templates = vec![
        Template::parse(10, "01*1**0***1****").unwrap(),
        Template::parse(10, "***0*1******0**").unwrap(),
    ];
    let set = set_of(templates.clone(), vec![5, 7]);
    for m in [10, 20, 40] {
        for law in [FreeLaw::Independent { p_stiff: 0.5 }, FreeLaw::Matern { length: 6.0 }] {
            let cfg = SamplerConfig { law, ..SamplerConfig::new(3, m) };
            let s = TemplateSampler::new(&set, &cfg).unwrap();
            for d in 0..50 {
                let (cell, j) = s.draw(d).unwrap();
                assert_eq!(cell.resolution(), m);
                assert!(s.template(j).matches(&cell).unwrap());
                assert!(set.transfer(m / 10).unwrap().predict(&cell).unwrap() == 1);
                // symmetric by construction
                assert_eq!(UnitCell::reduce(&cell.expand()).unwrap(), cell);
                assert_eq!(s.draw(d).unwrap().0, cell);
            }
        }
    }
}

#[test]
fn matern_signs_follow_orthant_law_of_realized_covariance() {
    let t = Template::free(20).unwrap();
    let pix = irreducible_pixels(20);
    let idx = |r: usize, c: usize| pix.iter().position(|&p| p == (r, c)).unwrap();
    let pairs = [(idx(0, 3), idx(0, 4)), (idx(2, 5), idx(3, 5)), (idx(4, 7), idx(6, 9)), (idx(0, 0), idx(9, 9))];
    for l in [2.0, 6.0, 10.0] {
        let field = MaternField::new(&t, l).unwrap();
        let mut rng = draw_rng(17, l as u64);
        let draws = 10_000;
        let mut acc = vec![0f64; pairs.len()];
        for _ in 0..draws {
            let cell = field.fill(&t, &mut rng).unwrap();
            for (a, &(i, j)) in acc.iter_mut().zip(&pairs) {
                *a += if cell.get(i) == cell.get(j) { 1.0 } else { -1.0 };
            }
        }
        for (a, &(i, j)) in acc.iter().zip(&pairs) {
            let rho = field.realized_correlation(i, j);
            let expected = 1.0 - 2.0 * rho.acos() / std::f64::consts::PI;
            let got = a / draws as f64;
            assert!((got - expected).abs() < 0.03, "l={l}: {got} vs {expected}");
        }
        // clipping keeps the rescaled kernel's ordering: nearer pixels correlate more
        let (p, q) = (pixel_center(20, pairs[0].0), pixel_center(20, pairs[0].1));
        assert!((((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() - 1.0).abs() < 1e-12);
        assert!(field.realized_correlation(pairs[0].0, pairs[0].1) > field.realized_correlation(pairs[3].0, pairs[3].1));
        assert!(sign_covariance(1.0, l) > 0.0);
    }
}

#[test]
fn matern_keeps_fixed_entries_and_tiny_length_is_independent() {
    let t = Template::parse(10, "1*0*1*0*1*0*1*0").unwrap().transfer(2).unwrap();
    let mut rng = draw_rng(4, 0);
    for _ in 0..200 {
        let c = sample_matern_free(&t, 6.0, &mut rng).unwrap();
        assert!(t.matches(&c).unwrap());
    }
    let free = Template::free(10).unwrap();
    let field = MaternField::new(&free, 1e-6).unwrap();
    let mut same = 0;
    let draws = 4000;
    for _ in 0..draws {
        let c = field.fill(&free, &mut rng).unwrap();
        same += usize::from(c.get(0) == c.get(1));
    }
    let f = same as f64 / draws as f64;
    assert!((f - 0.5).abs() < 0.03, "{f}");
}
