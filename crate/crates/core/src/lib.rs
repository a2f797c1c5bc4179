//! Behavioral simulator for vector similarity search in NAND-flash multi-bit
//! content-addressable memory (MCAM).
//!
//! * [`encoding`] quantizes feature vectors and encodes them into 4-level code words
//!   (SRE, B4E, B4WE, MTMC).
//! * [`mcam`] models the block: string layout, bottleneck-limited string current, sensing.
//! * [`search`] runs symmetric and asymmetric searches with voting.
//! * [`oracle`] holds exact software references.
//! * [`hat`] provides the differentiable surrogates used for hardware-aware training.
//! * [`harness`] ingests vectors, samples N-way K-shot episodes and runs sweeps.

pub mod encoding;
pub mod error;
pub mod harness;
pub mod hat;
pub mod mcam;
pub mod oracle;
pub mod search;

pub use encoding::{CodeWord, EncodedVector, QuantConfig, QuantizedVector, Scheme};
pub use error::{EncodingError, HatError, McamError, OracleError, SearchError};
pub use mcam::{CurrentModelParams, DeviceModel, McamGeometry, SenseConfig};
pub use search::{Accumulation, ClassAggregation, EpisodeResult, SearchMode, SearchPlan};
