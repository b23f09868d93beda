//! Executable checks of the estimates satisfied by the scheme.

pub mod audit;
pub mod certificate;
pub mod comparison;
pub mod continuation;
pub mod oracle;

pub use audit::{audit_bounds, audit_dissipation, AuditRow, BoundsReport};
pub use certificate::{compute_certificate, B2Class, Certificate};
pub use comparison::{comparison_experiment, ComparisonReport};
pub use continuation::{delta_continuation, frozen_gaps, ContinuationTable, FrozenGap};
pub use oracle::{oracle_objective, oracle_step, OracleSelector};
