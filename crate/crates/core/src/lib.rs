//! Matching applicants to companies under lower, upper and type-specific
//! quotas, with stability and envy-freeness notions solved exactly by a
//! small integer-programming engine or by combinatorial algorithms.

pub mod checks;
pub mod classic;
pub mod examples;
pub mod format;
pub mod gen;
pub mod instance;
pub mod ipmodel;
pub mod oracle;
pub mod pipelines;
pub mod solver;

pub use checks::{MatchingError, QuotaMode, Violation};
pub use classic::{ClassicError, TieBreakPolicy};
pub use instance::{ApplicantId, Choice, Company, CompanyId, Instance, InstanceBuilder, Matching, Score, TypeTag};
pub use pipelines::{solve_concept, ConceptName, SolutionConcept, SolveReport};
pub use solver::SolverConfig;
