//! Binary partition trees and the piecewise-constant density they induce.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Error, Result};
use crate::geometry::HyperRect;

/// Tolerance used when validating user-supplied normalizations.
const NORMALIZATION_TOL: f64 = 1e-9;

/// Where and how an internal node was cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub dim: usize,
    pub loc: f64,
    pub left: usize,
    pub right: usize,
}

/// One node of a [`PartitionTree`]. Internal nodes keep the count and mass of
/// the cell they covered before being split.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub cell: HyperRect,
    pub depth: usize,
    pub count: usize,
    pub mass: f64,
    pub density: f64,
    pub split: Option<Split>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// A binary partition of `[0,1]^d` with per-leaf counts, masses and densities.
///
/// Nodes are stored in preorder; the root has id 0 and a node's left subtree
/// occupies the ids immediately after it.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    dim: usize,
    theta: f64,
    nodes: Vec<Node>,
}

impl PartitionTree {
    /// Builds a tree from an arena whose root is `root`; returns the tree and
    /// the map from arena index to preorder id.
    pub(crate) fn from_arena(
        dim: usize,
        theta: f64,
        arena: Vec<Node>,
        root: usize,
    ) -> (Self, Vec<usize>) {
        let mut order = Vec::with_capacity(arena.len());
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            order.push(id);
            if let Some(s) = arena[id].split {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        let mut remap = vec![usize::MAX; arena.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut slots: Vec<Option<Node>> = arena.into_iter().map(Some).collect();
        let nodes = order
            .iter()
            .map(|&old| {
                let mut node = slots[old].take().expect("arena node visited twice");
                if let Some(s) = node.split.as_mut() {
                    s.left = remap[s.left];
                    s.right = remap[s.right];
                }
                node
            })
            .collect();
        (Self { dim, theta, nodes }, remap)
    }

    /// Single-cell partition of the unit cube holding `count` points.
    pub fn trivial(dim: usize, theta: f64, count: usize) -> Self {
        let node = Node {
            cell: HyperRect::unit(dim),
            depth: 0,
            count,
            mass: 1.0,
            density: 1.0,
            split: None,
        };
        Self { dim, theta, nodes: vec![node] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Leaf ids in preorder (left to right).
    pub fn leaf_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_leaf())
            .map(|(i, _)| i)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_ids().count()
    }

    pub fn max_leaf_depth(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.depth).max().unwrap_or(0)
    }

    /// Descends from the root, going left when `x[j] < s` and right otherwise.
    pub fn locate_leaf(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        if !self.nodes[0].cell.contains(x) {
            return Err(domain(format!("point {x:?} lies outside the root cell")));
        }
        let mut id = 0;
        while let Some(s) = self.nodes[id].split {
            id = if x[s.dim] < s.loc { s.left } else { s.right };
        }
        Ok(id)
    }

    /// Density at `x`; `O(depth)` through the split records.
    pub fn density_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.nodes[self.locate_leaf(x)?].density)
    }

    /// True when no leaf is deeper than `max_depth`.
    pub fn max_depth_guard(&self, max_depth: usize) -> bool {
        self.max_leaf_depth() <= max_depth
    }

    /// Flattens the leaves into a [`PiecewiseDensity`], in preorder.
    pub fn to_density(&self) -> PiecewiseDensity {
        let cells = self
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| DensityCell {
                rect: n.cell.clone(),
                density: n.density,
                mass: n.mass,
                count: n.count,
            })
            .collect();
        PiecewiseDensity { dim: self.dim, cells }
    }

    /// Checks the structural invariants: children cut their parent's cell at
    /// the recorded plane, counts add up, leaf masses sum to one within `tol`
    /// and every leaf density equals mass over volume.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        if self.nodes.is_empty() {
            return fail("tree has no nodes".into());
        }
        let mut mass_sum = 0.0;
        for (id, node) in self.nodes.iter().enumerate() {
            check_dim(self.dim, node.cell.dim())?;
            match node.split {
                None => {
                    mass_sum += node.mass;
                    let expected = node.mass / node.cell.volume();
                    if (node.density - expected).abs() > tol * expected.abs().max(1.0) {
                        return fail(format!("leaf {id}: density {} != mass/volume {expected}", node.density));
                    }
                    if node.mass < 0.0 {
                        return fail(format!("leaf {id}: negative mass"));
                    }
                }
                Some(s) => {
                    if s.left >= self.nodes.len() || s.right >= self.nodes.len() || s.left <= id || s.right <= id {
                        return fail(format!("node {id}: child ids out of order"));
                    }
                    let (l, r) = (&self.nodes[s.left], &self.nodes[s.right]);
                    let (el, er) = node.cell.split(s.dim, s.loc)?;
                    if l.cell != el || r.cell != er {
                        return fail(format!("node {id}: children do not cut the cell at the split plane"));
                    }
                    if l.count + r.count != node.count {
                        return fail(format!("node {id}: child counts do not add up"));
                    }
                    if l.depth != node.depth + 1 || r.depth != node.depth + 1 {
                        return fail(format!("node {id}: child depth mismatch"));
                    }
                }
            }
        }
        if (mass_sum - 1.0).abs() > tol {
            return fail(format!("leaf masses sum to {mass_sum}"));
        }
        Ok(())
    }
}

/// One cell of a piecewise-constant density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCell {
    pub rect: HyperRect,
    pub density: f64,
    pub mass: f64,
    pub count: usize,
}

impl DensityCell {
    /// Cell with the given mass; density is mass over volume.
    pub fn with_mass(rect: HyperRect, mass: f64, count: usize) -> Self {
        let density = mass / rect.volume();
        Self { rect, density, mass, count }
    }
}

/// `p(x) = sum_i d_i 1{x in r_i}` over a list of interior-disjoint boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity {
    dim: usize,
    cells: Vec<DensityCell>,
}

impl PiecewiseDensity {
    /// Validates non-negativity and normalization (within 1e-9).
    pub fn new(dim: usize, cells: Vec<DensityCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(domain("a density needs at least one cell"));
        }
        for c in &cells {
            check_dim(dim, c.rect.dim())?;
            if !(c.density >= 0.0) || !c.density.is_finite() {
                return Err(domain(format!("cell density {} is not a finite non-negative value", c.density)));
            }
        }
        let total: f64 = cells.iter().map(|c| c.density * c.rect.volume()).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(domain(format!("densities integrate to {total}, not 1")));
        }
        Ok(Self { dim, cells })
    }

    /// The constant density 1 on the unit cube.
    pub fn uniform(dim: usize) -> Self {
        Self {
            dim,
            cells: vec![DensityCell::with_mass(HyperRect::unit(dim), 1.0, 0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[DensityCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the cell containing `x` under the half-open convention.
    pub fn cell_index(&self, x: &[f64]) -> Result<Option<usize>> {
        check_dim(self.dim, x.len())?;
        Ok(self.cells.iter().position(|c| c.rect.contains(x)))
    }

    /// `p(x)`; zero outside the union of the cells.
    pub fn density_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.cell_index(x)?.map_or(0.0, |i| self.cells[i].density))
    }

    /// Exact integral of the density over `query`.
    pub fn integrate_over_rect(&self, query: &HyperRect) -> Result<f64> {
        check_dim(self.dim, query.dim())?;
        Ok(self
            .cells
            .iter()
            .map(|c| c.density * c.rect.intersection_volume(query))
            .sum())
    }

    /// `sum_i d_i vol(r_i)`.
    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.density * c.rect.volume()).sum()
    }
}

/// Anything that can report a density value at a point.
pub trait DensityModel: Sync {
    fn dim(&self) -> usize;
    fn density_at(&self, x: &[f64]) -> Result<f64>;
}

impl DensityModel for PiecewiseDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density_at(&self, x: &[f64]) -> Result<f64> {
        PiecewiseDensity::density_at(self, x)
    }
}

impl DensityModel for PartitionTree {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density_at(&self, x: &[f64]) -> Result<f64> {
        PartitionTree::density_at(self, x)
    }
}

/// Serialized form of a [`PartitionTree`]; node ids are preorder indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub dimension: usize,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub split_dim: Option<usize>,
    pub split_loc: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub count: usize,
    pub mass: f64,
    pub density: f64,
}

impl PartitionDoc {
    pub fn from_tree(tree: &PartitionTree) -> Self {
        let nodes = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| NodeDoc {
                id,
                lower: n.cell.lower().to_vec(),
                upper: n.cell.upper().to_vec(),
                split_dim: n.split.map(|s| s.dim),
                split_loc: n.split.map(|s| s.loc),
                left: n.split.map(|s| s.left),
                right: n.split.map(|s| s.right),
                count: n.count,
                mass: n.mass,
                density: n.density,
            })
            .collect();
        Self {
            dimension: tree.dim,
            theta: tree.theta,
            metadata: None,
            nodes,
        }
    }

    /// Rebuilds and validates the tree. Depths are recomputed from the links.
    pub fn to_tree(&self) -> Result<PartitionTree> {
        let bad = |msg: String| Error::Format(msg);
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(bad(format!("node at position {i} has id {}", n.id)));
            }
            let split = match (n.split_dim, n.split_loc, n.left, n.right) {
                (None, None, None, None) => None,
                (Some(dim), Some(loc), Some(left), Some(right)) => Some(Split { dim, loc, left, right }),
                _ => return Err(bad(format!("node {i} has a partial split record"))),
            };
            nodes.push(Node {
                cell: HyperRect::new(n.lower.clone(), n.upper.clone())?,
                depth: 0,
                count: n.count,
                mass: n.mass,
                density: n.density,
                split,
            });
        }
        if nodes.is_empty() {
            return Err(bad("no nodes".into()));
        }
        for i in 0..nodes.len() {
            if let Some(s) = nodes[i].split {
                if s.left <= i || s.right <= i || s.left >= nodes.len() || s.right >= nodes.len() {
                    return Err(bad(format!("node {i} links to an invalid child")));
                }
                let depth = nodes[i].depth + 1;
                nodes[s.left].depth = depth;
                nodes[s.right].depth = depth;
            }
        }
        let tree = PartitionTree {
            dim: self.dimension,
            theta: self.theta,
            nodes,
        };
        tree.validate(NORMALIZATION_TOL)?;
        Ok(tree)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves(left_mass: f64) -> PiecewiseDensity {
        let (l, r) = HyperRect::unit(1).split(0, 0.5).unwrap();
        PiecewiseDensity::new(
            1,
            vec![
                DensityCell::with_mass(l, left_mass, 0),
                DensityCell::with_mass(r, 1.0 - left_mass, 0),
            ],
        )
        .unwrap()
    }

    fn one_split_tree() -> PartitionTree {
        let root = HyperRect::unit(2);
        let (l, r) = root.split(0, 0.5).unwrap();
        let arena = vec![
            Node { cell: l, depth: 1, count: 3, mass: 0.75, density: 1.5, split: None },
            Node { cell: r, depth: 1, count: 1, mass: 0.25, density: 0.5, split: None },
            Node {
                cell: root,
                depth: 0,
                count: 4,
                mass: 1.0,
                density: 1.0,
                split: Some(Split { dim: 0, loc: 0.5, left: 0, right: 1 }),
            },
        ];
        let (tree, remap) = PartitionTree::from_arena(2, 1.0, arena, 2);
        assert_eq!(remap, vec![1, 2, 0]);
        tree
    }

    #[test]
    fn density_lookup_follows_half_open_rule() {
        let u = PiecewiseDensity::uniform(2);
        assert_eq!(u.density_at(&[0.3, 0.7]).unwrap(), 1.0);
        let pd = halves(0.5);
        assert_eq!(pd.density_at(&[0.25]).unwrap(), 1.0);
        let skewed = halves(0.8);
        assert_eq!(skewed.density_at(&[0.5]).unwrap(), skewed.cells()[1].density);
        assert_eq!(skewed.density_at(&[1.0]).unwrap(), skewed.cells()[1].density);
        assert!(matches!(u.density_at(&[0.1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rectangle_integrals() {
        let u = PiecewiseDensity::uniform(2);
        let q = HyperRect::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert!((u.integrate_over_rect(&q).unwrap() - 0.25).abs() < 1e-15);
        assert!((u.integrate_over_rect(&HyperRect::unit(2)).unwrap() - 1.0).abs() < 1e-15);
        let pd = halves(0.8);
        let mid = HyperRect::new(vec![0.25], vec![0.75]).unwrap();
        assert!((pd.integrate_over_rect(&mid).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_cells() {
        let c = DensityCell::with_mass(HyperRect::unit(1), 0.5, 0);
        assert!(PiecewiseDensity::new(1, vec![c]).is_err());
    }

    #[test]
    fn locate_leaf_cases() {
        let single = PartitionTree::trivial(2, 1.0, 10);
        assert_eq!(single.locate_leaf(&[0.9, 0.1]).unwrap(), 0);
        let tree = one_split_tree();
        tree.validate(1e-12).unwrap();
        let left = tree.locate_leaf(&[0.2, 0.9]).unwrap();
        let right = tree.locate_leaf(&[0.5, 0.9]).unwrap();
        assert_eq!((left, right), (1, 2));
        assert!(tree.locate_leaf(&[1.2, 0.0]).is_err());
        assert!(tree.max_depth_guard(1));
        assert!(!tree.max_depth_guard(0));
    }

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let tree = one_split_tree();
        let text = PartitionDoc::from_tree(&tree).to_json();
        let back = PartitionDoc::from_json(&text).unwrap().to_tree().unwrap();
        assert_eq!(back, tree);
        assert_eq!(PartitionDoc::from_tree(&back).to_json(), text);
    }

    #[test]
    fn json_rejects_partial_split() {
        let mut doc = PartitionDoc::from_tree(&one_split_tree());
        doc.nodes[0].right = None;
        assert!(matches!(doc.to_tree(), Err(Error::Format(_))));
    }
}
