//! Fact/Dimension document graphs.
//!
//! The offline half turns documents into a property graph: [`inspection`]
//! runs a DAG of extraction subnodes per document (rule-based or backed by a
//! completion provider over retrieved chunks), and [`navigation`] resolves the
//! extracted references against a document repository to grow the graph
//! breadth-first. The online half explores that graph through sessions with
//! Past/Present/Future canvases ([`exploration`]) and turns a selection into
//! a mind map and a cited report ([`generation`]).
//!
//! Data-parallel loops (batch inspection, scans, histograms, chunk scoring)
//! run on rayon when the `parallel` feature is enabled; see [`par`].

pub mod exploration;
pub mod generation;
pub mod graph;
pub mod ingest;
pub mod inspection;
pub mod navigation;
pub mod par;
pub mod providers;
pub mod text;

pub use graph::{GraphStore, NodeId, PropertyMap, PropertyValue};
