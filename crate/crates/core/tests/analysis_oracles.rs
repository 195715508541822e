//! Adjacency, modes and level-set trees against brute-force oracles.

mod common;

use disctree::{
    build_adjacency_graph, build_level_set_tree, detect_modes, estimate_density, is_adjacent, sample_mixture,
    DensityCell, EstimatorConfig, HyperRect, MixtureSpec, PiecewiseDensity,
};
use proptest::prelude::*;

/// The center/width test written out literally.
fn adjacent_by_centers(a: &HyperRect, b: &HyperRect) -> bool {
    let (ca, cb) = (a.center(), b.center());
    (0..a.dim()).all(|k| (ca[k] - cb[k]).abs() <= (a.width(k) + b.width(k)) / 2.0)
}

/// Cells whose density beats every adjacent cell, by direct comparison.
fn brute_modes(pd: &PiecewiseDensity) -> Vec<usize> {
    let cells = pd.cells();
    (0..cells.len())
        .filter(|&i| {
            (0..cells.len()).all(|j| {
                j == i || !is_adjacent(&cells[i].rect, &cells[j].rect).unwrap() || cells[i].density > cells[j].density
            })
        })
        .collect()
}

fn dyadic_rect() -> impl Strategy<Value = HyperRect> {
    prop::collection::vec((0u32..8, 1u32..=8), 2).prop_map(|sides| {
        let (lo, hi): (Vec<f64>, Vec<f64>) = sides
            .iter()
            .map(|&(a, w)| {
                let a = a.min(7);
                let b = (a + w).min(8);
                (a as f64 / 8.0, b as f64 / 8.0)
            })
            .unzip();
        HyperRect::new(lo, hi).unwrap()
    })
}

#[test]
fn adjacency_examples() {
    let r = |lo: [f64; 2], hi: [f64; 2]| HyperRect::new(lo.to_vec(), hi.to_vec()).unwrap();
    assert!(is_adjacent(&r([0.0, 0.0], [0.5, 1.0]), &r([0.5, 0.0], [1.0, 1.0])).unwrap());
    assert!(!is_adjacent(&r([0.0, 0.0], [0.25, 0.25]), &r([0.75, 0.75], [1.0, 1.0])).unwrap());
    assert!(is_adjacent(&r([0.0, 0.0], [0.5, 0.5]), &r([0.5, 0.5], [1.0, 1.0])).unwrap());
    assert!(is_adjacent(&r([0.0, 0.0], [0.5, 0.5]), &HyperRect::unit(3)).is_err());
}

#[test]
fn single_and_two_cell_graphs() {
    let one = PiecewiseDensity::uniform(2);
    assert_eq!(detect_modes(&one), vec![0]);
    let g = build_adjacency_graph(&one);
    assert!(g.edges().is_empty() && g.virtual_node().is_none());
    let lst = build_level_set_tree(&one);
    assert_eq!(lst.roots(), vec![0]);

    let (l, r) = HyperRect::unit(2).split(0, 0.5).unwrap();
    let pd = PiecewiseDensity::new(2, vec![DensityCell::with_mass(l, 0.7, 7), DensityCell::with_mass(r, 0.3, 3)]).unwrap();
    assert_eq!(build_adjacency_graph(&pd).edges(), vec![(0, 1)]);
    assert_eq!(detect_modes(&pd), vec![0]);
}

proptest! {
    #[test]
    fn adjacency_matches_center_test(a in dyadic_rect(), b in dyadic_rect()) {
        prop_assert_eq!(is_adjacent(&a, &b).unwrap(), adjacent_by_centers(&a, &b));
        prop_assert_eq!(is_adjacent(&a, &b).unwrap(), is_adjacent(&b, &a).unwrap());
        prop_assert!(is_adjacent(&a, &a).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn modes_and_level_sets_on_estimates(seed in any::<u64>(), dim in 1usize..=3, n in 200usize..4000, theta in 0.3f64..2.0) {
        let spec = common::random_mixture(seed, dim);
        let samples = sample_mixture(&spec, n, seed ^ 0x5eed).unwrap();
        let est = estimate_density(&samples, &EstimatorConfig::with_theta(theta)).unwrap();
        let pd = &est.density;
        prop_assume!(pd.len() <= 200);

        let modes = detect_modes(pd);
        prop_assert_eq!(&modes, &brute_modes(pd));

        let lst = build_level_set_tree(pd);
        prop_assert!(lst.virtual_node().is_none());
        prop_assert_eq!(lst.roots().len(), 1);
        for i in 0..lst.node_count() {
            if let Some(p) = lst.parent(i) {
                prop_assert!(lst.color(p) <= lst.color(i));
            }
            prop_assert_eq!(lst.color(i), pd.cells()[i].density);
        }
        prop_assert_eq!(lst.leaves(), modes);
        if let Err(msg) = common::check_level_sets(pd, &lst) {
            prop_assert!(false, "{}", msg);
        }
    }
}

#[test]
fn disconnected_cells_get_a_virtual_root() {
    let r = |lo: f64, hi: f64| HyperRect::new(vec![lo, 0.0], vec![hi, 1.0]).unwrap();
    // A density that leaves a gap is not produced by the estimator, but the
    // graph still has to cope with it.
    let cells = vec![DensityCell::with_mass(r(0.0, 0.25), 0.5, 1), DensityCell::with_mass(r(0.75, 1.0), 0.5, 1)];
    let pd = PiecewiseDensity::new(2, cells).unwrap();
    let g = build_adjacency_graph(&pd);
    assert_eq!(g.virtual_node(), Some(2));
    assert_eq!(g.cell_components().len(), 2);
    let lst = build_level_set_tree(&pd);
    assert_eq!(lst.roots(), vec![2]);
    assert_eq!(lst.leaves(), vec![0, 1]);
    common::check_level_sets(&pd, &lst).unwrap();
}

#[test]
fn four_corner_estimate_has_four_leaves() {
    let samples = sample_mixture(&MixtureSpec::four_corners(2), 10_000, 21).unwrap();
    let est = estimate_density(&samples, &EstimatorConfig::default()).unwrap();
    let lst = build_level_set_tree(&est.density);
    assert_eq!(lst.leaves().len(), 4);
    assert_eq!(lst.to_dot().matches(" -> ").count(), est.density.len() - 1);
}
