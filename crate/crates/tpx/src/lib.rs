//! Optimal transfer-price manipulation under an expected tax-penalty
//! cost, for a two-division multinational trading inside an arm's-length
//! price band.
//!
//! The parent exports goods to its subsidiary at a transfer price.
//! Moving that price away from the market-consensus central price shifts
//! taxable profit between the two countries; the harmed country
//! penalizes detected mispricing with a probability that grows as the
//! price approaches the edge of the accepted band. Four
//! foreign-profit-taxation regimes and an import tariff reshape the
//! incentive.
//!
//! - [`model`] holds the domain types and the primitive quantities.
//! - [`closed_form`] solves the stationarity condition analytically and
//!   exposes the neutralization thresholds.
//! - [`oracle`] maximizes the same objective numerically (dense grid,
//!   per-side golden-section refinement, brute force over repatriation
//!   controls, Kuhn-Tucker residuals); it is the ground truth the closed
//!   forms are validated against.
//! - [`verify`] restates every analytic claim as an executable check
//!   over seeded random scenarios.
//! - [`cli`] parses scenario files and drives the `tpx` binary.
//!
//! The `examples/` directory holds one runnable walkthrough per
//! capability; start with `solve_single`.

pub mod cli;
pub mod closed_form;
pub mod model;
pub mod oracle;
pub mod verify;

pub use closed_form::{optimal_deviation, Boundary, DeviationReport};
pub use model::{
    classify_case, effective_differential, objective, Jurisdiction, MarketPriceRange,
    PenaltyModel, ShiftCase, TaxRegime, TradeScenario,
};
pub use oracle::{maximize_joint, maximize_price, OracleResult, RegimeFamily, SolveSettings};
