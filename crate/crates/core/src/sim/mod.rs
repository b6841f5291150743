//! Simulation harness: the structured families of the power experiments,
//! random instance generators, and the power study driver.

pub mod families;
pub mod generate;
pub mod sample;
pub mod study;

pub use families::{build_sim_family_d5, build_sim_family_rs2, sim_family_d5_index, sim_family_rs2_index};
pub use generate::{random_compatible, random_compatible_with, random_consistent, random_consistent_with, random_sequence_with};
pub use sample::{multinomial, sample_empirical};
pub use study::{run_power_study, StudyConfig, StudyFamily, StudyMethod, StudyResult, StudyRow};
