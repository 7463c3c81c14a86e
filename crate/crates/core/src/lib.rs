pub mod acquisition;
pub mod design;
pub mod evaluator;
pub mod fom;
pub mod llm;
pub mod linalg;
pub mod optim;
pub mod orchestrator;
pub mod presets;
pub mod sampler;
pub mod surrogate;
