//! Synthetic sphere tasks: Gegenbauer regression, one-hot classification,
//! and deterministic online/offline data streams.

pub mod gegenbauer;
pub mod sphere;
pub mod stream;
pub mod task;

pub use gegenbauer::{gegenbauer_c, gegenbauer_q};
pub use sphere::sample_sphere;
pub use stream::{make_offline, online_batch, probe_set, Batch, DataStream, OfflineData, StreamMode};
pub use task::{target_eval, TaskKind, TaskSpec, Teacher};
