//! Deployment: model images, embedded source, memory planning, the arena
//! executor and latency/energy accounting.

mod embed;
mod image;
mod memory;
mod perf;
mod runtime;

pub use embed::{emit_embedded_source, validate_symbol_prefix};
pub use image::{
    deserialize, deserialize_float, read_header, serialize, serialize_float, ImageHeader, ImageKind,
    FORMAT_VERSION, HEADER_BYTES, MAGIC, NODE_BYTES, TENSOR_BYTES,
};
pub use memory::{plan_memory, MemoryPlan};
pub use perf::{energy_per_inference, measure_latency, power_mw, LatencyStats, MIN_LATENCY_RUNS};
pub use runtime::Engine;
