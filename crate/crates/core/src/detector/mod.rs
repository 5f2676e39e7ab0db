//! Four-quadrant delay-line detector: free fall, read-out, stream format,
//! reconstruction and correlations.

pub mod codec;
pub mod correlation;
pub mod deadtime;
pub mod encode;
pub mod geometry;
pub mod reconstruct;

pub use codec::{parse_stream, serialize_stream, HitStream, ParseError, ParseFailure, RawHit, StreamDecoder};
pub use correlation::{pair_correlation, CorrelationOptions, G2Histogram, PairAxis};
pub use deadtime::{apply_dead_time, peak_burst_rate, DeadTimeReport};
pub use encode::{
    channel_times, encode_analog, encode_hits, quantize, AnalogEncoding, AnalogHit, DetectorResponse, EncodedHits, Timestamps,
};
pub use geometry::{fall_time, simulate_impacts, DetectorGeometry, Impact, ImpactReport};
pub use reconstruct::{
    events_to_csv, momenta_from_csv, momenta_to_csv, reconstruct_analog, reconstruct_event, reconstruct_momentum,
    reconstruct_stream, reconstruct_times, Calibration, EventRecord, MomentumRecord, ReconReport, Reconstructed,
};
