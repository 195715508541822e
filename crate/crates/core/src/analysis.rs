//! Cell adjacency, modes and the level-set tree of a piecewise-constant density.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::geometry::HyperRect;
use crate::par::{self, Parallelism};
use crate::partition::PiecewiseDensity;

/// Two boxes are adjacent unless, in some dimension, their centers are
/// further apart than the mean of their widths. Shared faces and corners
/// count. The test is evaluated as closed-interval overlap, which is the same
/// condition without rounding in the center and width arithmetic.
pub fn is_adjacent(a: &HyperRect, b: &HyperRect) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.touches(b))
}

/// Cell adjacency graph, plus one virtual zero-density node when the cells
/// fall into several connected components.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    cells: usize,
    densities: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
    virtual_node: Option<usize>,
}

impl AdjacencyGraph {
    pub fn build(pd: &PiecewiseDensity) -> Self {
        Self::build_with(pd, Parallelism::Sequential)
    }

    pub fn build_with(pd: &PiecewiseDensity, mode: Parallelism) -> Self {
        let cells = pd.cells();
        let l = cells.len();
        let mut neighbors = par::map_range(mode, l, |i| {
            (0..l)
                .filter(|&j| j != i && cells[i].rect.touches(&cells[j].rect))
                .collect::<Vec<_>>()
        });
        let mut densities: Vec<f64> = cells.iter().map(|c| c.density).collect();

        let components = connected_components(&neighbors, |_| true);
        let virtual_node = if components.len() > 1 {
            let v = l;
            let mut links = Vec::with_capacity(components.len());
            for comp in &components {
                let lowest = *comp
                    .iter()
                    .min_by(|&&a, &&b| densities[a].total_cmp(&densities[b]).then(a.cmp(&b)))
                    .expect("components are non-empty");
                neighbors[lowest].push(v);
                links.push(lowest);
            }
            links.sort_unstable();
            neighbors.push(links);
            densities.push(0.0);
            Some(v)
        } else {
            None
        };
        Self { cells: l, densities, neighbors, virtual_node }
    }

    /// Number of partition cells (the virtual node excluded).
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn virtual_node(&self) -> Option<usize> {
        self.virtual_node
    }

    pub fn density(&self, node: usize) -> f64 {
        self.densities[node]
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Unordered edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    /// Connected components among the real cells only.
    pub fn cell_components(&self) -> Vec<Vec<usize>> {
        let cells = self.cells;
        connected_components(&self.neighbors[..cells], |j| j < cells)
    }
}

fn connected_components(neighbors: &[Vec<usize>], keep: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; neighbors.len()];
    let mut out = Vec::new();
    for start in 0..neighbors.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if keep(j) && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn build_adjacency_graph(pd: &PiecewiseDensity) -> AdjacencyGraph {
    AdjacencyGraph::build(pd)
}

/// Cells whose density is strictly larger than that of every adjacent cell.
pub fn detect_modes(pd: &PiecewiseDensity) -> Vec<usize> {
    modes_in(&AdjacencyGraph::build(pd))
}

pub fn modes_in(graph: &AdjacencyGraph) -> Vec<usize> {
    (0..graph.cells)
        .filter(|&i| {
            graph.neighbors[i]
                .iter()
                .filter(|&&j| Some(j) != graph.virtual_node)
                .all(|&j| graph.densities[i] > graph.densities[j])
        })
        .collect()
}

/// Parent links and colors of the level-set tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetTree {
    parent: Vec<Option<usize>>,
    color: Vec<f64>,
    order: Vec<usize>,
    virtual_node: Option<usize>,
}

impl LevelSetTree {
    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn color(&self, node: usize) -> f64 {
        self.color[node]
    }

    /// Nodes in insertion order (decreasing density, ties by id).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn virtual_node(&self) -> Option<usize> {
        self.virtual_node
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.parent[i].is_none()).collect()
    }

    /// Nodes that are nobody's parent.
    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.node_count()];
        for p in self.parent.iter().flatten() {
            has_child[*p] = true;
        }
        (0..self.node_count()).filter(|&i| !has_child[i]).collect()
    }

    /// Labels each node of color at least `level` with the highest ancestor
    /// reachable through parents of color at least `level`; two nodes share a
    /// label exactly when they are connected inside the level set.
    pub fn components_at(&self, level: f64) -> Vec<Option<usize>> {
        (0..self.node_count())
            .map(|i| {
                if self.color[i] < level {
                    return None;
                }
                let mut top = i;
                while let Some(p) = self.parent[top] {
                    if self.color[p] < level {
                        break;
                    }
                    top = p;
                }
                Some(top)
            })
            .collect()
    }

    /// Graphviz rendering; nodes are labeled `id:density`, edges run child to parent.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph levelset {\n");
        for i in 0..self.node_count() {
            let _ = writeln!(out, "  n{i} [label=\"{i}:{}\"];", self.color[i]);
        }
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                let _ = writeln!(out, "  n{i} -> n{p};");
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_doc(&self) -> LevelSetDoc {
        LevelSetDoc {
            nodes: (0..self.node_count())
                .map(|id| LevelSetNode {
                    id,
                    color: self.color[id],
                    parent: self.parent[id],
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetDoc {
    pub nodes: Vec<LevelSetNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetNode {
    pub id: usize,
    pub color: f64,
    pub parent: Option<usize>,
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

pub fn build_level_set_tree(pd: &PiecewiseDensity) -> LevelSetTree {
    level_set_tree_of(&AdjacencyGraph::build(pd))
}

/// Adds nodes in decreasing density. A node touching existing components
/// becomes the parent of each component's most recently added node and the
/// components merge; a node touching none starts a new component as a leaf.
pub fn level_set_tree_of(graph: &AdjacencyGraph) -> LevelSetTree {
    let n = graph.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| graph.densities[b].total_cmp(&graph.densities[a]).then(a.cmp(&b)));

    let mut sets = DisjointSets::new(n);
    let mut latest = vec![usize::MAX; n];
    let mut added = vec![false; n];
    let mut parent = vec![None; n];
    for &r in &order {
        let mut roots: Vec<usize> = graph.neighbors[r]
            .iter()
            .filter(|&&j| added[j])
            .map(|&j| sets.find(j))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        for root in roots {
            parent[latest[root]] = Some(r);
            sets.parent[root] = r;
        }
        added[r] = true;
        latest[r] = r;
    }
    LevelSetTree {
        parent,
        color: graph.densities.clone(),
        order,
        virtual_node: graph.virtual_node,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::DensityCell;

    fn rect(lo: &[f64], hi: &[f64]) -> HyperRect {
        HyperRect::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    /// 1D density with equal-width cells and the given relative heights.
    fn strip(heights: &[f64]) -> PiecewiseDensity {
        let l = heights.len() as f64;
        let total: f64 = heights.iter().sum();
        let cells = heights
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let r = rect(&[i as f64 / l], &[(i + 1) as f64 / l]);
                DensityCell::with_mass(r, h / total, 0)
            })
            .collect();
        PiecewiseDensity::new(1, cells).unwrap()
    }

    #[test]
    fn adjacency_cases() {
        let a = rect(&[0.0, 0.0], &[0.5, 1.0]);
        let b = rect(&[0.5, 0.0], &[1.0, 1.0]);
        assert!(is_adjacent(&a, &b).unwrap());
        let c = rect(&[0.0, 0.0], &[0.25, 0.25]);
        let d = rect(&[0.75, 0.75], &[1.0, 1.0]);
        assert!(!is_adjacent(&c, &d).unwrap());
        assert!(is_adjacent(&c, &c).unwrap());
        let corner = rect(&[0.25, 0.25], &[0.5, 0.5]);
        assert!(is_adjacent(&c, &corner).unwrap());
        assert!(is_adjacent(&c, &rect(&[0.1], &[0.2])).is_err());
    }

    #[test]
    fn graph_of_small_partitions() {
        let g = AdjacencyGraph::build(&PiecewiseDensity::uniform(2));
        assert_eq!((g.node_count(), g.edges().len()), (1, 0));
        let g = AdjacencyGraph::build(&strip(&[1.0, 2.0]));
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.virtual_node(), None);
    }

    #[test]
    fn virtual_node_joins_components() {
        let cells = vec![
            DensityCell::with_mass(rect(&[0.0, 0.0], &[0.5, 0.5]), 0.5, 0),
            DensityCell::with_mass(rect(&[0.75, 0.75], &[1.0, 1.0]), 0.25, 0),
            DensityCell::with_mass(rect(&[0.5, 0.9], &[0.75, 1.0]), 0.25, 0),
        ];
        let pd = PiecewiseDensity::new(2, cells).unwrap();
        let g = AdjacencyGraph::build(&pd);
        assert_eq!(g.virtual_node(), Some(3));
        assert_eq!(g.neighbors(3), &[0, 1]);
        assert_eq!(g.cell_components().len(), 2);
        let tree = level_set_tree_of(&g);
        assert_eq!(tree.roots(), vec![3]);
        assert_eq!(tree.color(3), 0.0);
    }

    #[test]
    fn modes_of_strips() {
        assert_eq!(detect_modes(&PiecewiseDensity::uniform(2)), vec![0]);
        assert_eq!(detect_modes(&strip(&[1.0, 3.0, 1.0])), vec![1]);
        assert_eq!(detect_modes(&strip(&[2.0, 2.0, 1.0])), Vec::<usize>::new());
    }

    #[test]
    fn merger_node_parents_both_peaks() {
        let tree = build_level_set_tree(&strip(&[3.0, 1.0, 2.0]));
        assert_eq!(tree.order(), &[0, 2, 1]);
        assert_eq!(tree.leaves(), vec![0, 2]);
        assert_eq!(tree.parent(0), Some(1));
        assert_eq!(tree.parent(2), Some(1));
        assert_eq!(tree.roots(), vec![1]);
        let single = build_level_set_tree(&PiecewiseDensity::uniform(1));
        assert_eq!((single.roots(), single.leaves()), (vec![0], vec![0]));
    }

    #[test]
    fn parent_attaches_to_latest_member() {
        // heights 5,4,1,3: the component {0,1} has latest member 1
        let tree = build_level_set_tree(&strip(&[5.0, 4.0, 1.0, 3.0]));
        assert_eq!(tree.parent(0), Some(1));
        assert_eq!(tree.parent(1), Some(2));
        assert_eq!(tree.parent(3), Some(2));
        let labels = tree.components_at(10.0 / 13.0);
        assert_eq!(labels, vec![Some(1), Some(1), None, Some(3)]);
    }

    #[test]
    fn dot_and_json() {
        let tree = build_level_set_tree(&strip(&[3.0, 1.0, 2.0]));
        let dot = tree.to_dot();
        assert!(dot.contains("n0 -> n1;") && dot.contains("n2 -> n1;"));
        assert!(dot.contains("[label=\"1:0.5\"]"));
        let doc = tree.to_doc();
        assert_eq!(doc.nodes[1].parent, None);
        assert_eq!(doc.nodes[0].parent, Some(1));
    }
}
