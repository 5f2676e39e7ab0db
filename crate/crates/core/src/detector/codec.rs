//! `DLD4` binary hit-stream format.
//!
//! All integers are little-endian.
//!
//! ```text
//! header   16 bytes  "DLD4" | u32 version (=1) | u64 TDC bin in femtoseconds
//! record   26 bytes  u8 quadrant (0..=3) | u8 flags | 4 x u48 ticks (t_x1, t_x2, t_y1, t_y2)
//! trailer   8 bytes  "DEND" | u32 CRC-32 (IEEE) of header and all records
//! ```
//!
//! The low four flag bits mark which of the four channels fired; a valid
//! record has all four set (`0x0F`) and the upper bits clear. Within each
//! quadrant the tick sum (four times the mean timestamp) must not decrease
//! from one record to the next. A record never starts with `D` (0x44), so
//! the trailer is recognised by its first byte.
//!
//! [`StreamDecoder`] consumes input in arbitrary chunks in a single pass.
//! On failure it keeps every record decoded before the error, and the
//! error carries the byte offset of the offending header, record or
//! trailer.

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"DLD4";
pub const TRAILER_MAGIC: [u8; 4] = *b"DEND";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 26;
pub const TRAILER_LEN: usize = 8;
pub const ALL_CHANNELS: u8 = 0x0F;
pub const MAX_TICKS: u64 = (1 << 48) - 1;

/// One detector hit: quadrant and the four delay-line arrival times in TDC
/// ticks, ordered `t_x1, t_x2, t_y1, t_y2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawHit {
    pub quadrant: u8,
    pub ticks: [u64; 4],
}

impl RawHit {
    pub fn tick_sum(&self) -> u128 {
        self.ticks.iter().map(|&t| t as u128).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic at byte {offset}")]
    BadMagic { offset: usize },
    #[error("truncated header at byte {offset}")]
    TruncatedHeader { offset: usize },
    #[error("unsupported format version {version} at byte {offset}")]
    UnsupportedVersion { offset: usize, version: u32 },
    #[error("TDC bin of zero at byte {offset}")]
    ZeroTdcBin { offset: usize },
    #[error("truncated record at byte {offset}")]
    TruncatedRecord { offset: usize },
    #[error("truncated trailer at byte {offset}")]
    TruncatedTrailer { offset: usize },
    #[error("stream ends without trailer at byte {offset}")]
    MissingTrailer { offset: usize },
    #[error("CRC mismatch at byte {offset}: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { offset: usize, stored: u32, computed: u32 },
    #[error("invalid quadrant {quadrant} in record at byte {offset}")]
    InvalidQuadrant { offset: usize, quadrant: u8 },
    #[error("partial hit (channel mask {mask:#06b}) in record at byte {offset}")]
    PartialHit { offset: usize, mask: u8 },
    #[error("reserved flag bits {flags:#04x} set in record at byte {offset}")]
    ReservedFlags { offset: usize, flags: u8 },
    #[error("timestamps decrease in quadrant {quadrant} at byte {offset}")]
    NonMonotone { offset: usize, quadrant: u8 },
    #[error("unexpected data after trailer at byte {offset}")]
    TrailingBytes { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        use ParseError::*;
        match *self {
            BadMagic { offset }
            | TruncatedHeader { offset }
            | UnsupportedVersion { offset, .. }
            | ZeroTdcBin { offset }
            | TruncatedRecord { offset }
            | TruncatedTrailer { offset }
            | MissingTrailer { offset }
            | CrcMismatch { offset, .. }
            | InvalidQuadrant { offset, .. }
            | PartialHit { offset, .. }
            | ReservedFlags { offset, .. }
            | NonMonotone { offset, .. }
            | TrailingBytes { offset } => offset,
        }
    }
}

/// A decoded stream.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HitStream {
    /// TDC bin in femtoseconds.
    pub tdc_bin_fs: u64,
    pub hits: Vec<RawHit>,
}

impl HitStream {
    pub fn new(tdc_bin_fs: u64, hits: Vec<RawHit>) -> Self {
        Self { tdc_bin_fs, hits }
    }

    /// s
    pub fn tdc_bin(&self) -> f64 {
        self.tdc_bin_fs as f64 * 1e-15
    }

    /// CSV with header `quadrant,x1_ticks,x2_ticks,y1_ticks,y2_ticks`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quadrant,x1_ticks,x2_ticks,y1_ticks,y2_ticks\n");
        for h in &self.hits {
            let [a, b, c, d] = h.ticks;
            out.push_str(&format!("{},{a},{b},{c},{d}\n", h.quadrant));
        }
        out
    }
}

/// Decoded prefix plus the error that stopped decoding.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{error} ({} hits decoded before the error)", partial.hits.len())]
pub struct ParseFailure {
    pub partial: HitStream,
    pub error: ParseError,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("hit {index}: quadrant {quadrant} out of range")]
    Quadrant { index: usize, quadrant: u8 },
    #[error("hit {index}: tick value exceeds 48 bits")]
    TickOverflow { index: usize },
    #[error("hit {index}: timestamps decrease in quadrant {quadrant}")]
    NonMonotone { index: usize, quadrant: u8 },
    #[error("TDC bin must be nonzero")]
    ZeroTdcBin,
}

/// Encodes a stream. Rejects anything [`parse_stream`] would reject, so the
/// round trip is the identity on every successful output.
pub fn serialize_stream(stream: &HitStream) -> Result<Vec<u8>, EncodeError> {
    if stream.tdc_bin_fs == 0 {
        return Err(EncodeError::ZeroTdcBin);
    }
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.hits.len() + TRAILER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&stream.tdc_bin_fs.to_le_bytes());
    let mut last = [None::<u128>; 4];
    for (index, h) in stream.hits.iter().enumerate() {
        if h.quadrant > 3 {
            return Err(EncodeError::Quadrant { index, quadrant: h.quadrant });
        }
        if h.ticks.iter().any(|&t| t > MAX_TICKS) {
            return Err(EncodeError::TickOverflow { index });
        }
        let sum = h.tick_sum();
        let q = h.quadrant as usize;
        if last[q].is_some_and(|prev| sum < prev) {
            return Err(EncodeError::NonMonotone { index, quadrant: h.quadrant });
        }
        last[q] = Some(sum);
        out.push(h.quadrant);
        out.push(ALL_CHANNELS);
        for t in h.ticks {
            out.extend_from_slice(&t.to_le_bytes()[..6]);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&TRAILER_MAGIC);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes a complete byte buffer.
pub fn parse_stream(bytes: &[u8]) -> Result<HitStream, ParseFailure> {
    let mut d = StreamDecoder::new();
    d.feed(bytes);
    d.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Header,
    Records,
    Done,
}

/// Incremental single-pass decoder.
#[derive(Debug)]
pub struct StreamDecoder {
    state: State,
    /// Bytes of the current unit (header, record or trailer) seen so far.
    pending: Vec<u8>,
    /// Offset of the first byte in `pending`.
    unit_offset: usize,
    crc: crc32fast::Hasher,
    last: [Option<u128>; 4],
    stream: HitStream,
    error: Option<ParseError>,
}

impl Default for StreamDecoder {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self {
            state: State::Header,
            pending: Vec::with_capacity(RECORD_LEN),
            unit_offset: 0,
            crc: crc32fast::Hasher::new(),
            last: [None; 4],
            stream: HitStream::default(),
            error: None,
        }
    }

    pub fn error(&self) -> Option<&ParseError> {
        self.error.as_ref()
    }

    /// Hits decoded so far.
    pub fn hits(&self) -> &[RawHit] {
        &self.stream.hits
    }

    /// Consumes `chunk`. After the first error further input is ignored.
    pub fn feed(&mut self, mut chunk: &[u8]) {
        while !chunk.is_empty() && self.error.is_none() {
            let need = match self.state {
                State::Header => HEADER_LEN,
                State::Records => {
                    let first = self.pending.first().or(chunk.first()).copied();
                    if first == Some(TRAILER_MAGIC[0]) {
                        TRAILER_LEN
                    } else {
                        RECORD_LEN
                    }
                }
                State::Done => {
                    self.error = Some(ParseError::TrailingBytes { offset: self.unit_offset });
                    return;
                }
            };
            let take = (need - self.pending.len()).min(chunk.len());
            self.pending.extend_from_slice(&chunk[..take]);
            chunk = &chunk[take..];
            if self.state == State::Header && !MAGIC.starts_with(&self.pending[..self.pending.len().min(4)]) {
                self.error = Some(ParseError::BadMagic { offset: 0 });
                return;
            }
            if self.pending.len() == need {
                let unit = std::mem::take(&mut self.pending);
                if let Err(e) = self.unit(&unit) {
                    self.error = Some(e);
                    return;
                }
                self.unit_offset += need;
                self.pending = unit;
                self.pending.clear();
            }
        }
    }

    fn unit(&mut self, u: &[u8]) -> Result<(), ParseError> {
        let offset = self.unit_offset;
        match self.state {
            State::Header => {
                let version = u32::from_le_bytes(u[4..8].try_into().unwrap());
                if version != VERSION {
                    return Err(ParseError::UnsupportedVersion { offset: offset + 4, version });
                }
                let bin = u64::from_le_bytes(u[8..16].try_into().unwrap());
                if bin == 0 {
                    return Err(ParseError::ZeroTdcBin { offset: offset + 8 });
                }
                self.stream.tdc_bin_fs = bin;
                self.crc.update(u);
                self.state = State::Records;
            }
            State::Records if u.len() == TRAILER_LEN => {
                if u[..4] != TRAILER_MAGIC {
                    return Err(ParseError::BadMagic { offset });
                }
                let stored = u32::from_le_bytes(u[4..8].try_into().unwrap());
                let computed = self.crc.clone().finalize();
                if stored != computed {
                    return Err(ParseError::CrcMismatch { offset: offset + 4, stored, computed });
                }
                self.state = State::Done;
            }
            State::Records => {
                let quadrant = u[0];
                if quadrant > 3 {
                    return Err(ParseError::InvalidQuadrant { offset, quadrant });
                }
                let flags = u[1];
                if flags & !ALL_CHANNELS != 0 {
                    return Err(ParseError::ReservedFlags { offset, flags });
                }
                if flags != ALL_CHANNELS {
                    return Err(ParseError::PartialHit { offset, mask: flags });
                }
                let mut ticks = [0u64; 4];
                for (i, t) in ticks.iter_mut().enumerate() {
                    let mut b = [0u8; 8];
                    b[..6].copy_from_slice(&u[2 + 6 * i..8 + 6 * i]);
                    *t = u64::from_le_bytes(b);
                }
                let hit = RawHit { quadrant, ticks };
                let sum = hit.tick_sum();
                let q = quadrant as usize;
                if self.last[q].is_some_and(|prev| sum < prev) {
                    return Err(ParseError::NonMonotone { offset, quadrant });
                }
                self.last[q] = Some(sum);
                self.crc.update(u);
                self.stream.hits.push(hit);
            }
            State::Done => unreachable!("no units after the trailer"),
        }
        Ok(())
    }

    /// Ends the input and returns the stream or the decoded prefix with the
    /// error.
    pub fn finish(mut self) -> Result<HitStream, ParseFailure> {
        if self.error.is_none() {
            let offset = self.unit_offset;
            self.error = match self.state {
                State::Header => Some(ParseError::TruncatedHeader { offset }),
                State::Records if self.pending.is_empty() => Some(ParseError::MissingTrailer { offset }),
                State::Records if self.pending[0] == TRAILER_MAGIC[0] => Some(ParseError::TruncatedTrailer { offset }),
                State::Records => Some(ParseError::TruncatedRecord { offset }),
                State::Done => None,
            };
        }
        match self.error {
            None => Ok(self.stream),
            Some(error) => Err(ParseFailure { partial: self.stream, error }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hits() -> HitStream {
        HitStream::new(
            6800,
            vec![
                RawHit { quadrant: 0, ticks: [10, 12, 11, 11] },
                RawHit { quadrant: 3, ticks: [5, 5, 5, 5] },
                RawHit { quadrant: 0, ticks: [20, 2, 11, 11] },
                RawHit { quadrant: 1, ticks: [MAX_TICKS, 0, 7, 1 << 40] },
            ],
        )
    }

    #[test]
    fn round_trip() {
        let s = hits();
        let bytes = serialize_stream(&s).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * RECORD_LEN + TRAILER_LEN);
        assert_eq!(parse_stream(&bytes).unwrap(), s);
    }

    #[test]
    fn empty_stream_is_header_and_trailer() {
        let s = HitStream::new(6800, vec![]);
        let bytes = serialize_stream(&s).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + TRAILER_LEN);
        assert_eq!(&bytes[..4], b"DLD4");
        assert!(parse_stream(&bytes).unwrap().hits.is_empty());
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = serialize_stream(&HitStream::new(0x0102030405060708, vec![])).unwrap();
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &[8, 7, 6, 5, 4, 3, 2, 1]);
    }

    #[test]
    fn chunked_feed_matches_whole() {
        let bytes = serialize_stream(&hits()).unwrap();
        for chunk in [1, 3, 7, 26, 1000] {
            let mut d = StreamDecoder::new();
            for c in bytes.chunks(chunk) {
                d.feed(c);
            }
            assert_eq!(d.finish().unwrap(), hits());
        }
    }

    #[test]
    fn distinct_errors() {
        let good = serialize_stream(&hits()).unwrap();
        let err = |b: &[u8]| parse_stream(b).unwrap_err().error;

        let mut b = good.clone();
        b[0] = b'X';
        assert_eq!(err(&b), ParseError::BadMagic { offset: 0 });

        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(err(&b), ParseError::UnsupportedVersion { offset: 4, version: 2 }));

        let mut b = good.clone();
        b[HEADER_LEN + RECORD_LEN + 5] ^= 1;
        assert!(matches!(err(&b), ParseError::CrcMismatch { offset, .. } if offset == good.len() - 4));

        let mut b = good.clone();
        b[HEADER_LEN + 1] = 0x07;
        assert_eq!(err(&b), ParseError::PartialHit { offset: HEADER_LEN, mask: 0x07 });

        let mut b = good.clone();
        b[HEADER_LEN] = 9;
        assert_eq!(err(&b), ParseError::InvalidQuadrant { offset: HEADER_LEN, quadrant: 9 });

        let mut b = good.clone();
        b.push(0);
        assert_eq!(err(&b), ParseError::TrailingBytes { offset: good.len() });
    }

    #[test]
    fn non_monotone_is_reported_with_prefix() {
        let s = HitStream::new(
            1,
            vec![RawHit { quadrant: 2, ticks: [9, 9, 9, 9] }, RawHit { quadrant: 2, ticks: [1, 1, 1, 1] }],
        );
        assert!(matches!(serialize_stream(&s), Err(EncodeError::NonMonotone { index: 1, quadrant: 2 })));
        // Hand-assemble the bytes to exercise the decoder.
        let one = serialize_stream(&HitStream::new(1, vec![s.hits[0]])).unwrap();
        let mut b = one[..HEADER_LEN + RECORD_LEN].to_vec();
        b.extend_from_slice(&[2, 0x0F]);
        for _ in 0..4 {
            b.extend_from_slice(&[1, 0, 0, 0, 0, 0]);
        }
        let f = parse_stream(&b).unwrap_err();
        assert_eq!(f.error, ParseError::NonMonotone { offset: HEADER_LEN + RECORD_LEN, quadrant: 2 });
        assert_eq!(f.partial.hits, vec![s.hits[0]]);
    }

    #[test]
    fn encoder_rejects_bad_hits() {
        let s = HitStream::new(1, vec![RawHit { quadrant: 4, ticks: [0; 4] }]);
        assert!(matches!(serialize_stream(&s), Err(EncodeError::Quadrant { .. })));
        let s = HitStream::new(1, vec![RawHit { quadrant: 0, ticks: [MAX_TICKS + 1, 0, 0, 0] }]);
        assert!(matches!(serialize_stream(&s), Err(EncodeError::TickOverflow { .. })));
        assert!(matches!(serialize_stream(&HitStream::new(0, vec![])), Err(EncodeError::ZeroTdcBin)));
    }
}
