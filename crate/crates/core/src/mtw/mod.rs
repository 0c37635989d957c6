//! Cross-curvature, the MTW conditions and Loeper's maximum principle.

mod certify;
mod cross;
mod segment;

pub use certify::{certify_conditions, CertifyOptions, CrossCurvatureReport, CrossSample, Domain, Verdict};
pub use cross::{cross_curvature, metric_tensor_h, orthogonality_defect, MetricTensor, NONDEGENERACY_TOL};
pub use segment::{loeper_max_principle_check, trace_c_segment, CSegment, MaxPrincipleReport, SEGMENT_TOL};
