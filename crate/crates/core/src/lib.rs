pub mod cohort;
pub mod examination;
pub mod gateway;
pub mod inference;
pub mod norms;
pub mod pipeline;
pub mod primitives;
pub mod profiler;
pub mod task;
pub mod text;
pub mod toolbox;
