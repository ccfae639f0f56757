//! Auto-formulation of linear and mixed-integer optimization models from
//! natural-language queries and CSV data, with an embedded solver, retrieval
//! tools, agent orchestration and an evaluation harness.

pub mod model;
pub mod par;
pub mod solver;
pub mod retrieval;
pub mod llm;
pub mod refdata;
pub mod agents;
pub mod datagen;
pub mod sblp;
pub mod eval;
mod hash;
