//! Truncated Ruelle transfer operators, their leading eigenpairs and the
//! exactly solvable one-site deformed transfer map.

pub mod deformed;
pub mod diagnostics;
pub mod operator;
pub mod power;

pub use deformed::{fc_deformed_transfer, DeformedTransfer};
pub use diagnostics::{convergence_diagnostics, ProbeReport, TransferDiagnostics};
pub use operator::{build_fcs_operator, build_kms_operator, kms_log_increment, TransferKind, TruncatedTransferOperator};
pub use power::{leading_eigen, leading_left_eigen, LeadingEigen};
