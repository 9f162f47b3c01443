//! Tree-tuple algebra: XRelations of XTuples and the pull-based operators
//! over them.

pub mod aggregate;
pub mod forest;
pub mod join;
pub mod nest;
pub mod path;
pub mod predicate;
pub mod reconstruct;
pub mod relation;
pub mod setops;
pub mod sort;
pub mod source;
pub mod tree;
pub mod unary;
pub mod validate;

pub use aggregate::{x_aggregate, AggregateFn};
pub use join::{x_join, x_join_dependent, x_product, x_product_with, JoinAlgo, MaterializedSource, ProductMode, RebindableSource};
pub use nest::{x_nest, x_unnest};
pub use path::{path, Path};
pub use predicate::{CmpOp, Operand, Predicate};
pub use reconstruct::{x_reconstruct, x_reconstruct_grouped, ReconstructTemplate, TemplateNode};
pub use relation::{Attr, Diagnostics, DiagnosticsSnapshot, Materialized, NodeRef, XRelation, XRelationSchema, XTuple};
pub use setops::{x_difference, x_intersection, x_union};
pub use sort::{x_sort, SortOrder};
pub use source::{x_source, x_source_framed, Framing};
pub use tree::XTree;
pub use unary::{x_project, x_restrict};

#[derive(Debug, thiserror::Error)]
pub enum AlgebraError {
    #[error("invalid path {0:?}")]
    InvalidPath(String),
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
    #[error("plan validation: {0}")]
    Plan(String),
    #[error("stream error: {0}")]
    Stream(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("adapter: {0}")]
    Adapter(String),
}
