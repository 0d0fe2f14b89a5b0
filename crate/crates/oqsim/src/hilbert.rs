//! Composite Hilbert space bookkeeping and lattice connectivity.

use serde::{Deserialize, Serialize};

use crate::sparse::OperatorError;

/// Tensor product of per-site Hilbert spaces.
///
/// Site 0 is the leftmost (most significant) factor: the basis index of the
/// composite space is the mixed-radix number with site 0 highest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    site_dims: Vec<usize>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn new(site_dims: Vec<usize>) -> Result<Self, OperatorError> {
        if site_dims.is_empty() {
            return Err(OperatorError::InvalidSpace("no sites".into()));
        }
        if let Some(&d) = site_dims.iter().find(|&&d| d < 2) {
            return Err(OperatorError::InvalidSpace(format!(
                "site dimension {d} < 2"
            )));
        }
        let total_dim = site_dims.iter().product();
        Ok(Self {
            site_dims,
            total_dim,
        })
    }

    pub fn qubits(n: usize) -> Result<Self, OperatorError> {
        Self::new(vec![2; n])
    }

    pub fn uniform(n: usize, d: usize) -> Result<Self, OperatorError> {
        Self::new(vec![d; n])
    }

    pub fn n_sites(&self) -> usize {
        self.site_dims.len()
    }

    pub fn site_dims(&self) -> &[usize] {
        &self.site_dims
    }

    pub fn site_dim(&self, site: usize) -> usize {
        self.site_dims[site]
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Dimension of the factors left of `site` (product over sites < site).
    pub fn dim_left_of(&self, site: usize) -> usize {
        self.site_dims[..site].iter().product()
    }

    /// Dimension of the factors right of `site`.
    pub fn dim_right_of(&self, site: usize) -> usize {
        self.site_dims[site + 1..].iter().product()
    }

    /// Decompose a composite basis index into per-site indices.
    pub fn decode_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.n_sites()];
        for site in (0..self.n_sites()).rev() {
            let d = self.site_dims[site];
            out[site] = index % d;
            index /= d;
        }
        out
    }

    /// Compose per-site indices into a composite basis index.
    pub fn encode_index(&self, locals: &[usize]) -> usize {
        debug_assert_eq!(locals.len(), self.n_sites());
        let mut index = 0usize;
        for (site, &l) in locals.iter().enumerate() {
            index = index * self.site_dims[site] + l;
        }
        index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Undirected interaction graph over lattice sites.
///
/// Edges are stored canonically as (min, max) pairs with no duplicates and no
/// self-edges. When a rectangular `shape` is present the edge set equals the
/// nearest-neighbor graph of that grid under the stated boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGraph {
    n_sites: usize,
    edges: Vec<(usize, usize)>,
    shape: Option<(usize, usize)>,
    boundary: Boundary,
}

impl LatticeGraph {
    pub fn from_edges(
        n_sites: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        boundary: Boundary,
    ) -> Result<Self, OperatorError> {
        if n_sites == 0 {
            return Err(OperatorError::InvalidLattice("no sites".into()));
        }
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a >= n_sites || b >= n_sites {
                return Err(OperatorError::InvalidLattice(format!(
                    "edge ({a}, {b}) references a site out of range (n_sites = {n_sites})"
                )));
            }
            if a == b {
                return Err(OperatorError::InvalidLattice(format!("self-edge at site {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self {
            n_sites,
            edges: canon,
            shape: None,
            boundary,
        })
    }

    /// 1D chain; periodic boundaries close the ring.
    pub fn chain(n_sites: usize, boundary: Boundary) -> Result<Self, OperatorError> {
        Self::grid(n_sites, 1, boundary)
    }

    /// Rectangular Lx x Ly grid, row-major site order (x fastest along a row).
    pub fn grid(lx: usize, ly: usize, boundary: Boundary) -> Result<Self, OperatorError> {
        if lx == 0 || ly == 0 {
            return Err(OperatorError::InvalidLattice("zero grid extent".into()));
        }
        let site = |x: usize, y: usize| y * lx + x;
        let mut edges = Vec::new();
        for y in 0..ly {
            for x in 0..lx {
                if x + 1 < lx {
                    edges.push((site(x, y), site(x + 1, y)));
                } else if boundary == Boundary::Periodic && lx > 1 {
                    edges.push((site(x, y), site(0, y)));
                }
                if y + 1 < ly {
                    edges.push((site(x, y), site(x, y + 1)));
                } else if boundary == Boundary::Periodic && ly > 1 {
                    edges.push((site(x, y), site(x, 0)));
                }
            }
        }
        let mut lattice = Self::from_edges(lx * ly, edges, boundary)?;
        lattice.shape = Some((lx, ly));
        Ok(lattice)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Anisotropy λ = Lx / Ly for shaped lattices.
    pub fn anisotropy(&self) -> Option<f64> {
        self.shape.map(|(lx, ly)| lx as f64 / ly as f64)
    }

    pub fn degree(&self, site: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == site || b == site)
            .count()
    }

    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == site {
                out.push(b);
            } else if b == site {
                out.push(a);
            }
        }
        out
    }

    /// Bulk coordination number (max degree over sites).
    pub fn coordination(&self) -> usize {
        (0..self.n_sites).map(|s| self.degree(s)).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_dims_and_indexing() {
        let space = HilbertSpace::new(vec![2, 3, 2]).unwrap();
        assert_eq!(space.total_dim(), 12);
        // site 0 most significant
        assert_eq!(space.encode_index(&[1, 0, 0]), 6);
        assert_eq!(space.encode_index(&[0, 2, 1]), 5);
        for idx in 0..12 {
            assert_eq!(space.encode_index(&space.decode_index(idx)), idx);
        }
    }

    #[test]
    fn space_rejects_small_dims() {
        assert!(HilbertSpace::new(vec![2, 1]).is_err());
        assert!(HilbertSpace::new(vec![]).is_err());
    }

    #[test]
    fn chain_edges() {
        let open = LatticeGraph::chain(4, Boundary::Open).unwrap();
        assert_eq!(open.edges(), &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(open.degree(0), 1);
        assert_eq!(open.degree(1), 2);

        let ring = LatticeGraph::chain(4, Boundary::Periodic).unwrap();
        assert_eq!(ring.edges(), &[(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(ring.coordination(), 2);

        // wrap edge deduplicates on a 2-ring
        let two = LatticeGraph::chain(2, Boundary::Periodic).unwrap();
        assert_eq!(two.edges(), &[(0, 1)]);
    }

    #[test]
    fn grid_edges_and_anisotropy() {
        let g = LatticeGraph::grid(2, 2, Boundary::Periodic).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(g.anisotropy(), Some(1.0));
        let g32 = LatticeGraph::grid(3, 2, Boundary::Open).unwrap();
        assert_eq!(g32.n_sites(), 6);
        assert_eq!(g32.anisotropy(), Some(1.5));
        assert_eq!(g32.degree(1), 3); // middle of a row: left, right, below
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(LatticeGraph::from_edges(2, vec![(0, 2)], Boundary::Open).is_err());
        assert!(LatticeGraph::from_edges(2, vec![(1, 1)], Boundary::Open).is_err());
        let dup = LatticeGraph::from_edges(3, vec![(0, 1), (1, 0)], Boundary::Open).unwrap();
        assert_eq!(dup.edges(), &[(0, 1)]);
    }
}
