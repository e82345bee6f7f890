//! Finite-size Monte Carlo: quenched disorder realizations, Metropolis
//! sampling of the Gibbs measure on the sphere, cavity-coordinate
//! decompositions with the empirical lower-bound bracket, and overlap
//! diagnostics across independent chains.

pub mod cavity;
pub mod disorder;
pub mod mcmc;
pub mod stats;

pub use cavity::{
    ass_bracket_estimate, cavity_decompose, AssBracket, AssBracketOptions, CavityDecomposition,
};
pub use disorder::{
    free_energy_mc, hamiltonian, perturbation, sample_disorder, Disorder, FreeEnergyEstimate,
    PerturbationSpec, PerturbationVariant, MAX_TENSOR_ENTRIES,
};
pub use mcmc::{gibbs_mcmc, GibbsChain};
pub use stats::{overlap_statistics, OverlapMonomial, PhiEstimate, PhiSpec, StatReport};
