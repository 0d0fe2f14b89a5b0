//! The three paradigmatic dissipative lattice models.
//!
//! Every model is assembled from per-site terms and two-site interaction
//! terms; the full-space Hamiltonian and jump operators are built from that
//! decomposition, which the mean-field and variational modules reuse. Rates
//! enter only through the jump operators (√γ factors), never as separate
//! metadata. ħ = 1 throughout, so energies and rates share units.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::hilbert::{HilbertSpace, LatticeGraph};
use crate::operators::{boson_ops, embed, embed_pair, pauli, PauliKind};
use crate::sparse::{ComplexSparseMatrix, OperatorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("negative rate gamma = {0}")]
    NegativeRate(f64),
    #[error("assembled Hamiltonian is not Hermitian (defect {0:.3e})")]
    NonHermitianHamiltonian(f64),
    #[error("lattice has {lattice} sites but the space has {space}")]
    SiteCountMismatch { lattice: usize, space: usize },
}

/// One two-site interaction term: coeff · op_a^(edge.0) · op_b^(edge.1).
#[derive(Debug, Clone)]
pub struct InteractionTerm {
    pub edge: (usize, usize),
    pub coeff: f64,
    pub op_a: ComplexSparseMatrix,
    pub op_b: ComplexSparseMatrix,
}

/// Local (single-site) part of a model: on-site Hamiltonian and jump operators.
#[derive(Debug, Clone)]
pub struct SiteTerms {
    pub hamiltonian: ComplexSparseMatrix,
    pub jumps: Vec<ComplexSparseMatrix>,
}

/// Lindblad model: Hamiltonian, jump operators, and lattice metadata.
///
/// `hamiltonian` and `jumps` live on the full composite space and are the
/// single source of truth for every solver; `site_terms`/`interactions` carry
/// the local decomposition they were assembled from.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub space: HilbertSpace,
    pub hamiltonian: ComplexSparseMatrix,
    pub jumps: Vec<ComplexSparseMatrix>,
    pub lattice: LatticeGraph,
    pub params: BTreeMap<String, f64>,
    pub site_terms: Vec<SiteTerms>,
    pub interactions: Vec<InteractionTerm>,
}

impl LindbladModel {
    /// Embed local terms and interactions into the full space and validate.
    pub fn assemble(
        space: HilbertSpace,
        lattice: LatticeGraph,
        site_terms: Vec<SiteTerms>,
        interactions: Vec<InteractionTerm>,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, ModelError> {
        if lattice.n_sites() != space.n_sites() {
            return Err(ModelError::SiteCountMismatch {
                lattice: lattice.n_sites(),
                space: space.n_sites(),
            });
        }
        let d = space.total_dim();
        let mut h = ComplexSparseMatrix::zeros(d, d);
        for (site, terms) in site_terms.iter().enumerate() {
            h = h.add(&embed(&terms.hamiltonian, site, &space)?)?;
        }
        for term in &interactions {
            let pair = embed_pair(&term.op_a, term.edge.0, &term.op_b, term.edge.1, &space)?;
            h = h.add(&pair.scale(C64::new(term.coeff, 0.0)))?;
        }
        let defect = h.hermitian_defect();
        if defect > 1e-12 {
            return Err(ModelError::NonHermitianHamiltonian(defect));
        }
        let mut jumps = Vec::new();
        for (site, terms) in site_terms.iter().enumerate() {
            for jump in &terms.jumps {
                jumps.push(embed(jump, site, &space)?);
            }
        }
        Ok(Self {
            space,
            hamiltonian: h,
            jumps,
            lattice,
            params,
            site_terms,
            interactions,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn n_sites(&self) -> usize {
        self.space.n_sites()
    }
}

/// Transverse-field Ising model with longitudinal dissipation:
/// H = (h/2) Σᵢ σx⁽ⁱ⁾ + (V/4) Σ⟨ij⟩ σz⁽ⁱ⁾σz⁽ʲ⁾, jumps √γ σ−⁽ⁱ⁾.
pub fn build_dissipative_ising(
    lattice: LatticeGraph,
    h: f64,
    v: f64,
    gamma: f64,
) -> Result<LindbladModel, ModelError> {
    if gamma < 0.0 {
        return Err(ModelError::NegativeRate(gamma));
    }
    let n = lattice.n_sites();
    let space = HilbertSpace::qubits(n)?;
    let local_h = pauli(PauliKind::X).scale(C64::new(h / 2.0, 0.0));
    let jump = pauli(PauliKind::Minus).scale(C64::new(gamma.sqrt(), 0.0));
    let site_terms = vec![
        SiteTerms {
            hamiltonian: local_h,
            jumps: vec![jump],
        };
        n
    ];
    let z = pauli(PauliKind::Z);
    let interactions = lattice
        .edges()
        .iter()
        .map(|&edge| InteractionTerm {
            edge,
            coeff: v / 4.0,
            op_a: z.clone(),
            op_b: z.clone(),
        })
        .collect();
    let params = BTreeMap::from([
        ("h".to_string(), h),
        ("v".to_string(), v),
        ("gamma".to_string(), gamma),
    ]);
    LindbladModel::assemble(space, lattice, site_terms, interactions, params)
}

/// Driven-dissipative Bose-Hubbard model:
/// H = −J Σ⟨ij⟩ (b†ᵢbⱼ + b†ⱼbᵢ) + Σᵢ [(U/2) nᵢ² − Δω nᵢ + F (bᵢ + b†ᵢ)],
/// jumps √γ bᵢ. The drive amplitude F is taken real (its phase can be
/// absorbed into b).
#[allow(clippy::too_many_arguments)]
pub fn build_driven_bose_hubbard(
    lattice: LatticeGraph,
    j: f64,
    u: f64,
    delta_omega: f64,
    f: f64,
    gamma: f64,
    n_max: usize,
) -> Result<LindbladModel, ModelError> {
    if gamma < 0.0 {
        return Err(ModelError::NegativeRate(gamma));
    }
    let (annihilate, create, number) = boson_ops(n_max)?;
    let n_sites = lattice.n_sites();
    let space = HilbertSpace::uniform(n_sites, n_max + 1)?;

    let n_sq = number.matmul(&number)?;
    let local_h = n_sq
        .scale(C64::new(u / 2.0, 0.0))
        .add(&number.scale(C64::new(-delta_omega, 0.0)))?
        .add(
            &annihilate
                .add(&create)?
                .scale(C64::new(f, 0.0)),
        )?;
    let jump = annihilate.scale(C64::new(gamma.sqrt(), 0.0));
    let site_terms = vec![
        SiteTerms {
            hamiltonian: local_h,
            jumps: vec![jump],
        };
        n_sites
    ];

    // Both hopping orientations per edge keep the Hamiltonian Hermitian.
    let mut interactions = Vec::with_capacity(2 * lattice.edges().len());
    for &edge in lattice.edges() {
        interactions.push(InteractionTerm {
            edge,
            coeff: -j,
            op_a: create.clone(),
            op_b: annihilate.clone(),
        });
        interactions.push(InteractionTerm {
            edge,
            coeff: -j,
            op_a: annihilate.clone(),
            op_b: create.clone(),
        });
    }
    let params = BTreeMap::from([
        ("j".to_string(), j),
        ("u".to_string(), u),
        ("delta_omega".to_string(), delta_omega),
        ("f".to_string(), f),
        ("gamma".to_string(), gamma),
        ("n_max".to_string(), n_max as f64),
    ]);
    LindbladModel::assemble(space, lattice, site_terms, interactions, params)
}

/// Dissipative Heisenberg model:
/// H = Σ⟨ij⟩ (Jx σxσx + Jy σyσy + Jz σzσz), jumps √γ σ−⁽ⁱ⁾.
pub fn build_dissipative_heisenberg(
    lattice: LatticeGraph,
    jx: f64,
    jy: f64,
    jz: f64,
    gamma: f64,
) -> Result<LindbladModel, ModelError> {
    if gamma < 0.0 {
        return Err(ModelError::NegativeRate(gamma));
    }
    let n = lattice.n_sites();
    let space = HilbertSpace::qubits(n)?;
    let jump = pauli(PauliKind::Minus).scale(C64::new(gamma.sqrt(), 0.0));
    let site_terms = vec![
        SiteTerms {
            hamiltonian: ComplexSparseMatrix::zeros(2, 2),
            jumps: vec![jump],
        };
        n
    ];
    let mut interactions = Vec::new();
    for &edge in lattice.edges() {
        for (coeff, kind) in [(jx, PauliKind::X), (jy, PauliKind::Y), (jz, PauliKind::Z)] {
            if coeff != 0.0 {
                interactions.push(InteractionTerm {
                    edge,
                    coeff,
                    op_a: pauli(kind),
                    op_b: pauli(kind),
                });
            }
        }
    }
    let params = BTreeMap::from([
        ("jx".to_string(), jx),
        ("jy".to_string(), jy),
        ("jz".to_string(), jz),
        ("gamma".to_string(), gamma),
    ]);
    LindbladModel::assemble(space, lattice, site_terms, interactions, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Boundary;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_site_ising_is_sigma_x() {
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 2.0, 7.0, 1.0).unwrap();
        assert_eq!(model.hamiltonian, pauli(PauliKind::X));
        assert_eq!(model.jumps.len(), 1);
    }

    #[test]
    fn two_site_ising_interaction_only() {
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        let model = build_dissipative_ising(lattice, 0.0, 4.0, 0.5).unwrap();
        let z = pauli(PauliKind::Z);
        assert_eq!(model.hamiltonian, z.kron(&z));
        assert_eq!(model.jumps.len(), 2);
    }

    #[test]
    fn ising_rejects_negative_gamma() {
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        assert!(matches!(
            build_dissipative_ising(lattice, 1.0, 1.0, -0.1),
            Err(ModelError::NegativeRate(_))
        ));
    }

    #[test]
    fn single_site_hubbard_interaction_diag() {
        let lattice = LatticeGraph::chain(1, Boundary::Open).unwrap();
        let model = build_driven_bose_hubbard(lattice, 3.0, 2.0, 0.0, 0.0, 1.0, 2).unwrap();
        for (k, expect) in [0.0, 1.0, 4.0].into_iter().enumerate() {
            assert!((model.hamiltonian.get(k, k) - c(expect, 0.0)).norm() < 1e-13);
        }
        assert_eq!(model.hamiltonian.nnz(), 2); // diag(0,1,4) has two nonzeros
    }

    #[test]
    fn hubbard_hopping_is_hermitian() {
        let lattice = LatticeGraph::chain(3, Boundary::Periodic).unwrap();
        let model = build_driven_bose_hubbard(lattice, 1.3, 0.0, 0.0, 0.0, 0.7, 2).unwrap();
        assert!(model.hamiltonian.hermitian_defect() <= 1e-12);
        assert_eq!(model.jumps.len(), 3);
    }

    #[test]
    fn heisenberg_zz_limit() {
        let lattice = LatticeGraph::chain(2, Boundary::Open).unwrap();
        let model = build_dissipative_heisenberg(lattice, 0.0, 0.0, 1.0, 0.2).unwrap();
        let z = pauli(PauliKind::Z);
        assert_eq!(model.hamiltonian, z.kron(&z));
    }

    #[test]
    fn heisenberg_zero_couplings() {
        let lattice = LatticeGraph::chain(3, Boundary::Open).unwrap();
        let model = build_dissipative_heisenberg(lattice, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(model.hamiltonian.nnz(), 0);
        assert_eq!(model.jumps.len(), 3);
    }

    #[test]
    fn jump_count_matches_sites() {
        let lattice = LatticeGraph::grid(2, 2, Boundary::Periodic).unwrap();
        let ising = build_dissipative_ising(lattice.clone(), 1.0, 2.0, 0.3).unwrap();
        assert_eq!(ising.jumps.len(), 4);
        let bh = build_driven_bose_hubbard(lattice, 1.0, 2.0, 0.5, 0.2, 0.3, 2).unwrap();
        assert_eq!(bh.jumps.len(), 4);
        for jump in &bh.jumps {
            assert_eq!(jump.rows(), bh.dim());
        }
    }
}
