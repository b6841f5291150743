//! Testing Missing Completely At Random through compatibility of observed
//! marginal distributions.
//!
//! Each observation pattern `S` (the set of variables seen together) yields
//! an empirical marginal `P_S`. Under MCAR these marginals must all come from
//! one joint law. The incompatibility index `R(P_S)` measures how far they
//! are from that: it is the smallest weight `e` such that
//! `P_S = (1 - e) Q_S + e T_S` with `Q_S` compatible.
//!
//! Modules:
//! - [`model`]: spaces, patterns, marginal tables.
//! - [`ingest`]: CSV parsing, binning, empirical marginals, JSON interchange.
//! - [`lp`]: the marginal operator and the index by linear programming.
//! - [`closedform`]: analytic index formulas for small cataloged families.
//! - [`reduce`]: hypergraph reductions (singleton variables, conditioning, cut sets).
//! - [`crit`]: finite-sample critical values and the facet catalog.
//! - [`infer`]: universal, improved, binned-continuous and bootstrap tests.
//! - [`geometry`]: exact double description and essential facets.
//! - [`sim`]: simulation families, random instances and power studies.

pub mod closedform;
pub mod crit;
pub mod error;
pub mod geometry;
pub mod infer;
pub mod ingest;
pub mod lp;
pub mod model;
pub mod reduce;
pub mod sim;

pub use error::{McarError, Result};
pub use lp::{incompatibility_index, inconsistency, index_value, MarginalOperator, WitnessDecomposition};
pub use model::{
    DiscreteSpace, DualWitness, MarginalSequence, MarginalTable, Pattern, PatternCollection,
};

/// Library version, echoed in CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
