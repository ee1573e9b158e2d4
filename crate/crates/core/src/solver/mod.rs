//! Penalized entropy minimization for sparse precision matrices.

mod admm;
mod loss;
mod penalty;

pub use admm::{
    dual_update, effective_penalty, floor_audit, gamma_update, omega_update, solve_penalized_entropy, theta_update,
    AdmmConfig, AdmmSolver, AdmmState, FloorAudit, GammaScaling, IterationRecord, PrecisionFit,
};
pub use loss::{bic_score, entropy_loss, quadratic_loss};
pub use penalty::{mcp_prox, mcp_value, soft_threshold, PenaltyFamily, PenaltySpec, DEFAULT_MCP_GAMMA};
