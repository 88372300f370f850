//! Verification metrics and text reports.

pub mod eer;
pub mod projection;
pub mod report;
pub mod similarity;

pub use eer::{
    calibrate_threshold, compute_eer, eer_from_scores, far_at_threshold, per_emotion_breakdown,
    Cell, EerReport, Trial, TrialScoreSet,
};
pub use projection::{project_embeddings_2d, write_projection_csv, ProjectedPoint};
pub use report::{
    format_percent, relative_change, relative_improvement, render_absolute_table,
    render_improvement_table, render_similarity_table, render_table, RelativeImprovementReport,
};
pub use similarity::{
    cosine_similarity_report, cross_pair_similarity, CosineSimilarityReport, MeanStd,
    SimilarityInput, SpeakerSimilarity,
};
