//! Generalization scoring: DTW distances between angle sequences, the
//! demo/demo and generated/demo histograms, and the per-case driver.

mod case;
mod dtw;
mod hist;

pub use case::{
    overlay_svg, run_case, run_case_with, train_case_nets, write_case_artifacts, CaseConfig,
    CaseReport, CaseRun, TrainedNets, LOW_M,
};
pub use dtw::{dtw, dtw_cost};
pub use hist::{
    cross_distances, equal_width_edges, generated_hist, pairwise_distances, pairwise_hist,
    similarity, Histogram, HistogramPair, DEFAULT_BINS, DEFAULT_THRESHOLD,
};
