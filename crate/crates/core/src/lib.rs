//! Post hoc bounds on the number of false positives in arbitrary, data-driven
//! selections of hypotheses.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`] and [`special`]: p-values, index sets, two-sample datasets, beta and Gaussian functions.
//! - [`templates`]: threshold families `t_k(lambda)` and their generalized inverses.
//! - [`bounds`]: k0-Bonferroni, Simes and template bounds, and confidence envelopes.
//! - [`calibration`]: permutation calibration of `lambda`.
//! - [`reference`]: reference families with joint error rate control and interpolation bounds.
//! - [`spatial`]: segment families and the multi-scale aggregation tree.
//! - [`sim`]: Monte Carlo coverage experiments.
//! - [`session`]: selections, method dispatch and the JSON report shared by the CLI and server.

pub mod bounds;
pub mod calibration;
pub mod data;
pub mod error;
pub mod reference;
pub mod session;
pub mod sim;
pub mod spatial;
pub mod special;
pub mod templates;

pub use bounds::{
    envelope, k0_bonferroni, simes_bound, simes_graphical_u, threshold_bound, BoundValue, Envelope, EnvelopeRow,
    KBonferroni, PostHocBound, Simes, ThresholdBound,
};
pub use calibration::{
    apply_group_element, calibrate_lambda, calibrated_bound, pivot_statistic, single_set_beta_zeta,
    CalibrationResult, PermutationPlan,
};
pub use data::{
    fold_change, sorted_restriction, two_sample_pvalues, FoldChange, GroundTruth, IndexSet, PValueVector, Statistic,
    TwoSampleDataset,
};
pub use error::{Error, Result};
pub use reference::{
    augmentation_bound, disjoint_sum_bound, dkw_zeta, dkw_zeta_with, jer_holds, markov_zeta, optimal_bound,
    DkwRounding, Interpolation, ReferenceFamily, ReferenceSet, Relaxation, Structure,
};
pub use session::{
    bh_cutoff, BoundAnswer, BoundReport, EnvelopeReport, Meta, Method, NamedSelection, Point, Provenance,
    SelectionResult, SelectionSpec, Session, SCHEMA_VERSION,
};
pub use sim::{
    coverage_experiment, replicate, simes_violation_probability, simulate, CoverageMethod, CoverageReport,
    Replicate, ReplicateOutcome, Sample, ScenarioConfig, ScenarioKind, SingleSetRule,
};
pub use spatial::{
    build_segments, build_tree, calibrate_family, tree_bound, AggregationTree, BudgetRule, Evidence, Interval, Segment,
    SegmentFamily, TreeNode,
};
pub use special::{beta_cdf, beta_quantile, gaussian_tail, gaussian_tail_inv};
pub use templates::{Template, TemplateFamily, TemplateKind};
