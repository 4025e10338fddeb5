//! Knowledge-graph backed document exploration.
//!
//! Documents arrive as multisets of linked instance entities. Each document
//! is indexed under the concepts its entities roll up to, scored by
//! concept-document rank: an ontology term (how specific the concept is and
//! how prominent its best matching entity is) times a context term (how well
//! the concept's instances connect to the rest of the document within a few
//! hops). The connectivity behind the context term is computed exactly by
//! simple-path enumeration or estimated by hop-pruned random walks.
//!
//! On top of the index, [`explore`] answers roll-up queries (documents
//! matching a set of concepts) and suggests drill-down subtopics.

pub mod corpus;
pub mod error;
pub mod estimator;
pub mod explore;
pub mod graph;
pub mod hop;
pub mod index;
pub mod par;
pub mod paths;
pub mod rng;
pub mod scoring;
pub mod study;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{load_graph, ConceptId, EntityId, KnowledgeGraph};
pub use paths::ConnParams;
