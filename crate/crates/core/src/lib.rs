//! Quantitative recurrence and hitting statistics for measure-preserving
//! maps on tori and grid-discretized boxes, with a constructive
//! periodic-approximation toolkit on dyadic grids.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod dimension;
pub mod experiment;
pub mod error;
pub mod grid;
pub mod hitting;
pub mod measure;
pub mod observable;
mod orbit;
pub mod perturbation;
pub mod rate;
pub mod recurrence;
pub mod space;
pub mod system;

pub use correlations::{
    correlation, correlation_series, lipschitz_norm, superpoly_test, CorrelationScheme, CorrelationSeries,
    DecayFitReport, DecayVerdict,
};
pub use dimension::{local_dimension, DimensionMeasure, LocalDimensionEstimate};
pub use error::{Error, Result};

/// CSV writer with LF record terminators and minimal quoting.
pub(crate) fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub use grid::{GridPermutation, GridSpec, PeriodicityReport};
pub use hitting::{
    borel_cantelli_fraction, hitting_score, wp_hit_count, wp_union_measure, HittingTarget,
    ShrinkingTargetSpec, WpWindow,
};
pub use measure::{MeasureEstimate, MeasureModel};
pub use observable::Observable;
pub use orbit::Horizon;
pub use perturbation::{build_cover, extend_to_box, towerize, CubeCover, PerturbationReport};
pub use rate::RateSequence;
pub use recurrence::{in_window_set, recurrence_score, window_union_measure, RecurrenceWindow};
pub use space::{torus_distance, Point, Space};
pub use system::{iterate, map_distance, SystemMap};
