//! Metrics, the nofake / mixed / allfake experiment conditions, the synthetic
//! ratio sweep, OVERLAPS surfacing and the demo corpus.

mod demo;
mod experiment;
mod metrics;
mod overlaps;

pub use demo::{
    catalog_labels, demo_dataset, diff_pairs_for_share, generate_demo_corpus, real_labels, DemoConfig, DemoCorpus, DemoData, DemoPipeline, VocabModel,
    DEMO_CHUNK_SIZE,
};
pub use experiment::{
    book_features, evaluate, filter_oversize, is_test_pair, pair_example, ratio_sweep, render_reports,
    render_sweep_csv, render_sweep_tsv, run_condition, sample_diff_pairs, summarize, synthetic_take,
    training_split, BookFeatures, Condition, ConditionReport, ExperimentConfig, Featurizer, Prediction,
    MAX_TRAINING_WORDS, REPORT_HEADER, SWEEP_HEADER, TEST_PERCENT,
};
pub use metrics::{compute_metrics, f1_score, mean, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use overlaps::{render_overlaps, surface_overlaps, OverlapRow, OVERLAP_HEADER};
