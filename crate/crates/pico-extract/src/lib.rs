//! Extraction of evidence-table fields (patient group, trial arms, outcome
//! measure, per-arm results) from randomized-clinical-trial abstracts:
//! preprocessing, a maximum-entropy token classifier, exact constrained
//! inference, and an evaluation harness.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod inference;
pub mod ingest;
pub mod maxent;
pub mod pipeline;
pub mod preprocess;
