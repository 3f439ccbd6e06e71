//! Lower-bound constructions and Monte Carlo experiments.

pub mod chisq;
pub mod prior;
pub mod sim;

pub use chisq::{
    chisq_bound_multi, chisq_bound_uni, chisq_cross_bound, chisq_cross_term, chisq_exact_multi, minimax_lower_bound,
    overlap_law, ChisqUni, McEstimate,
};
pub use prior::{
    kappa, sample_alt, sample_alt_with, sample_data, sample_data_with, sample_null_with, AltDraw, PriorKind, PriorSpec,
};
pub use sim::{
    alt_tally, boundary_sweep, calibrate_lambda, monte_carlo_errors, null_tally, power_boundary, BoundaryOptions,
    BoundaryPoint, Calibration, Detector, SimOutcome, Tally, Thresholded,
};
