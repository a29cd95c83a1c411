//! User grouping, SINR evaluation and achievable rates.

pub mod closed_form;
pub mod grouping;
pub mod monte_carlo;
pub mod report;

pub use closed_form::{
    asymptotic_ceiling, evaluate_closed_form, rate_with_grouping, sinr_closed_form, user_ceiling, user_sinr,
};
pub use grouping::{group_cell, group_users, CellGroups, GroupingResult};
pub use monte_carlo::sinr_monte_carlo;
pub use report::{rate_from_sinr, rate_lower_bound, RateReport, SinrReport, UserGroup, UserRate, UserSinr};
