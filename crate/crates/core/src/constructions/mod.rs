//! Compiling sparse Boolean functions into explicit attention (+ ReLU MLP) weights.
//!
//! The flow is: pick an [`EmbeddingMode`], build a monotone head or a family of
//! injective heads on it, optionally stack the bump MLP on top, then check the
//! result against the truth table with [`verify_exhaustive`].

mod embedding;
mod function;
mod heads;
mod mlp;
mod pipeline;
mod shatter;
mod truncation;
mod verify;

pub use embedding::{embed_boolean, EmbeddingMode, EmbeddingVariant};
pub use function::{FunctionKind, SparseBooleanFunction};
pub use heads::{build_injective_heads, build_monotone_head, HeadConstruction, HeadTarget};
pub use mlp::{build_bump_mlp, MlpParams};
pub use pipeline::{build_general_sparse, build_symmetric_sparse, compile, NormCertificate, Pipeline, PipelineKind};
pub use shatter::{build_shattering_instance, count_realized_patterns, ShatteringInstance};
pub use truncation::softmax_truncation_gap;
pub use verify::{blocks, verify_exhaustive, verify_range, ConstructionReport, PartialReport, SamplingPolicy, MAX_EXHAUSTIVE_T};
