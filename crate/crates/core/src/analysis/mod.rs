//! Exact checks of the identification, coverage and planning guarantees.

mod bellman;
mod constants;
mod coverage;
mod potential;
mod sysid;

pub use bellman::{bellman_error_matrix, BellmanMatrix, RANK_REL_TOL};
pub use constants::{theory_constants, TheoryConstants, TheoryInputs};
pub use coverage::{coverage_ratio, max_coverage_ratio, CoverageReport};
pub use potential::{elliptical_potential_check, PotentialReport};
pub use sysid::{
    lemma1_check, max_expected_sq_tv, simulation_gap, sys_id_error, sys_id_report, Lemma1Report, SimulationGap,
    SysIdReport,
};
