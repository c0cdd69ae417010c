//! Normalization around the denoiser, end-to-end inference and the evaluation
//! harnesses (method comparison, `t_back` sweep, normalization ablation).

mod harness;
mod norm;
mod plot;
mod preprocess;
mod report;

pub use harness::{
    binomial_upper_tail, classical_crmse_deg, classical_sign_test, model_crmse_deg, par_map, run_method_comparison,
    run_normalization_ablation, run_tback_sweep, selected_scope, train_and_compare, ComparisonModels, SignTest,
    SweepHeading,
};
pub use norm::{denormalize, normalize, NormScope, NormStats};
pub use plot::{curves_chart, report_chart, LineChart, Series};
pub use preprocess::{end_to_end_heading, DenoisePreprocessor, DenoiseTrace, EndToEnd, PipelineConfig, TEST_STREAM};
pub use report::{dataset_hash, EvalReport, EvalRow, LabelledCurve, ReportKind, ReportMeta, CSV_HEADER};
