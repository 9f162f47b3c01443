//! A federated XML query mediator: FLWR queries over virtual collections are
//! decomposed into per-source atomic queries and a plan of tree-tuple algebra
//! operators, run over streaming adapters, and reconstructed into nested XML.

pub mod adapters;
pub mod bench;
pub mod catalog;
pub mod decomposer;
pub mod frontend;
pub mod mediator;
pub mod value;
pub mod wire;
pub mod xalgebra;
pub mod xml;
