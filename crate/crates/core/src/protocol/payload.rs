//! Diagnosis payloads and their binary frame.
//!
//! ```text
//! frame        := length:u32 | mode:u8 | count:u32 | body        (big-endian)
//!   length       bytes following the length field
//!   mode         0x01 decentralized, 0x02 centralized
//!   count        seeds (decentralized) or records (centralized)
//! decentralized body := count × (day_index:u32 | seed:[u8; 32])
//! centralized body   := sealed log section
//!
//! sealed log   := device:u32 | count:u32 | count × record | tag:[u8; 32]
//! record       := token:[u8; 16] | first_seen:u64 | last_seen:u64
//!                 | close_duration_s:u64 | rss_count:u64 | rss_mean:f64
//!                 | rss_m2:f64 | rss_min:f64 | rss_max:f64       (80 bytes)
//! tag          := HMAC-SHA256(sealing key, device | count | records)
//! ```

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::ids::{DailySeed, Token};
use super::store::EncounterRecord;
use super::{DayIndex, DeviceId, Mode, ProtocolError};
use crate::dataset::RssStats;

type HmacSha256 = Hmac<Sha256>;

pub const RECORD_WIRE_LEN: usize = 80;
const SEED_WIRE_LEN: usize = 36;
const TAG_LEN: usize = 32;
const MODE_DECENTRALIZED: u8 = 0x01;
const MODE_CENTRALIZED: u8 = 0x02;

/// Daily seeds of a diagnosed device. Carries no encounter data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedBundle {
    pub seeds: Vec<(DayIndex, DailySeed)>,
}

/// An encounter log framed with an integrity tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedLog {
    bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosisPayload {
    Decentralized(SeedBundle),
    Centralized(SealedLog),
}

fn wire(msg: &str) -> ProtocolError {
    ProtocolError::Wire(msg.to_string())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.buf.len() < n {
            return Err(wire("truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_bits(self.u64()?))
    }
}

fn tag(key: &[u8; 32], body: &[u8]) -> HmacSha256 {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(body);
    mac
}

impl SealedLog {
    pub fn seal(device: DeviceId, records: &[EncounterRecord], key: &[u8; 32]) -> Self {
        let mut bytes = Vec::with_capacity(8 + records.len() * RECORD_WIRE_LEN + TAG_LEN);
        bytes.extend_from_slice(&device.0.to_be_bytes());
        bytes.extend_from_slice(&(records.len() as u32).to_be_bytes());
        for r in records {
            let (count, mean, m2, min, max) = r.rss.raw();
            bytes.extend_from_slice(&r.observed_token.0);
            bytes.extend_from_slice(&r.first_seen.to_be_bytes());
            bytes.extend_from_slice(&r.last_seen.to_be_bytes());
            bytes.extend_from_slice(&r.close_duration_s.to_be_bytes());
            bytes.extend_from_slice(&count.to_be_bytes());
            for v in [mean, m2, min, max] {
                bytes.extend_from_slice(&v.to_bits().to_be_bytes());
            }
        }
        let t = tag(key, &bytes).finalize().into_bytes();
        bytes.extend_from_slice(&t);
        SealedLog { bytes }
    }

    /// Accepts raw section bytes after a structural check; the tag is only
    /// verified by [`SealedLog::open`].
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, ProtocolError> {
        if bytes.len() < 8 + TAG_LEN {
            return Err(wire("sealed log too short"));
        }
        let count = u32::from_be_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        if bytes.len() != 8 + count * RECORD_WIRE_LEN + TAG_LEN {
            return Err(wire("sealed log length does not match its record count"));
        }
        Ok(SealedLog { bytes })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn device(&self) -> DeviceId {
        DeviceId(u32::from_be_bytes(
            self.bytes[0..4].try_into().expect("4 bytes"),
        ))
    }

    pub fn record_count(&self) -> usize {
        u32::from_be_bytes(self.bytes[4..8].try_into().expect("4 bytes")) as usize
    }

    pub fn verify(&self, key: &[u8; 32]) -> Result<(), ProtocolError> {
        let (body, t) = self.bytes.split_at(self.bytes.len() - TAG_LEN);
        tag(key, body)
            .verify_slice(t)
            .map_err(|_| ProtocolError::Integrity)
    }

    /// Verifies the tag and decodes the records.
    pub fn open(&self, key: &[u8; 32]) -> Result<Vec<EncounterRecord>, ProtocolError> {
        self.verify(key)?;
        let mut r = Reader {
            buf: &self.bytes[8..self.bytes.len() - TAG_LEN],
        };
        let mut out = Vec::with_capacity(self.record_count());
        for _ in 0..self.record_count() {
            let token = Token(r.take(16)?.try_into().expect("16 bytes"));
            let first_seen = r.u64()?;
            let last_seen = r.u64()?;
            let close_duration_s = r.u64()?;
            let count = r.u64()?;
            let (mean, m2, min, max) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            out.push(EncounterRecord {
                observed_token: token,
                first_seen,
                last_seen,
                rss: RssStats::from_raw(count, mean, m2, min, max),
                close_duration_s,
            });
        }
        Ok(out)
    }
}

impl DiagnosisPayload {
    pub fn mode(&self) -> Mode {
        match self {
            DiagnosisPayload::Decentralized(_) => Mode::Decentralized,
            DiagnosisPayload::Centralized(_) => Mode::Centralized,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (mode, count, body) = match self {
            DiagnosisPayload::Decentralized(b) => {
                let mut body = Vec::with_capacity(b.seeds.len() * SEED_WIRE_LEN);
                for (day, seed) in &b.seeds {
                    body.extend_from_slice(&day.0.to_be_bytes());
                    body.extend_from_slice(&seed.0);
                }
                (MODE_DECENTRALIZED, b.seeds.len(), body)
            }
            DiagnosisPayload::Centralized(log) => {
                (MODE_CENTRALIZED, log.record_count(), log.bytes.clone())
            }
        };
        let mut out = Vec::with_capacity(9 + body.len());
        out.extend_from_slice(&((1 + 4 + body.len()) as u32).to_be_bytes());
        out.push(mode);
        out.extend_from_slice(&(count as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Decodes one frame from the front of `buf`, returning it and the
    /// number of bytes consumed.
    pub fn decode(buf: &[u8]) -> Result<(Self, usize), ProtocolError> {
        let mut r = Reader { buf };
        let len = r.u32()? as usize;
        let mut frame = Reader { buf: r.take(len)? };
        let mode = frame.take(1)?[0];
        let count = frame.u32()? as usize;
        let payload = match mode {
            MODE_DECENTRALIZED => {
                if frame.buf.len() != count * SEED_WIRE_LEN {
                    return Err(wire("seed section length does not match count"));
                }
                let mut seeds = Vec::with_capacity(count);
                for _ in 0..count {
                    let day = DayIndex(frame.u32()?);
                    let seed = DailySeed(frame.take(32)?.try_into().expect("32 bytes"));
                    seeds.push((day, seed));
                }
                DiagnosisPayload::Decentralized(SeedBundle { seeds })
            }
            MODE_CENTRALIZED => {
                let log = SealedLog::from_bytes(frame.buf.to_vec())?;
                if log.record_count() != count {
                    return Err(wire("frame count disagrees with sealed log"));
                }
                DiagnosisPayload::Centralized(log)
            }
            other => return Err(wire(&format!("unknown mode byte {other:#04x}"))),
        };
        Ok((payload, 4 + len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(i: u8) -> EncounterRecord {
        EncounterRecord {
            observed_token: Token([i; 16]),
            first_seen: 10 * i as u64,
            last_seen: 10 * i as u64 + 7,
            rss: RssStats::from_values([-60.0, -61.5, -59.25]),
            close_duration_s: 3,
        }
    }

    #[test]
    fn decentralized_frame_layout() {
        let p = DiagnosisPayload::Decentralized(SeedBundle {
            seeds: vec![(DayIndex(5), DailySeed([0xab; 32]))],
        });
        let bytes = p.encode();
        assert_eq!(bytes.len(), 4 + 1 + 4 + 36);
        assert_eq!(&bytes[0..4], &41u32.to_be_bytes());
        assert_eq!(bytes[4], 0x01);
        assert_eq!(&bytes[5..9], &1u32.to_be_bytes());
        assert_eq!(&bytes[9..13], &5u32.to_be_bytes());
        assert_eq!(bytes[13], 0xab);
        assert_eq!(DiagnosisPayload::decode(&bytes).unwrap(), (p, bytes.len()));
    }

    #[test]
    fn sealed_log_detects_tampering() {
        let key = [4u8; 32];
        let log = SealedLog::seal(DeviceId(9), &[record(1), record(2)], &key);
        assert_eq!(log.as_bytes().len(), 8 + 2 * RECORD_WIRE_LEN + 32);
        assert_eq!(log.open(&key).unwrap(), vec![record(1), record(2)]);
        assert_eq!(log.open(&[5u8; 32]), Err(ProtocolError::Integrity));
        let mut bytes = log.as_bytes().to_vec();
        bytes[20] ^= 1;
        let forged = SealedLog::from_bytes(bytes).unwrap();
        assert_eq!(forged.open(&key), Err(ProtocolError::Integrity));
    }

    #[test]
    fn decode_rejects_bad_frames() {
        assert!(DiagnosisPayload::decode(&[0, 0, 0, 5, 0x07, 0, 0, 0, 0]).is_err());
        assert!(DiagnosisPayload::decode(&[0, 0, 0, 9, 0x01]).is_err());
        let p = DiagnosisPayload::Decentralized(SeedBundle {
            seeds: vec![(DayIndex(1), DailySeed([1; 32]))],
        });
        let mut bytes = p.encode();
        bytes[8] = 2;
        assert!(DiagnosisPayload::decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn frames_round_trip(
            seeds in proptest::collection::vec((any::<u32>(), any::<[u8; 32]>()), 0..21),
            n_records in 0u8..20,
            device in any::<u32>(),
        ) {
            let d = DiagnosisPayload::Decentralized(SeedBundle {
                seeds: seeds.into_iter().map(|(d, s)| (DayIndex(d), DailySeed(s))).collect(),
            });
            let records: Vec<_> = (0..n_records).map(record).collect();
            let c = DiagnosisPayload::Centralized(SealedLog::seal(DeviceId(device), &records, &[1; 32]));
            let mut stream = d.encode();
            stream.extend(c.encode());
            let (d2, used) = DiagnosisPayload::decode(&stream).unwrap();
            let (c2, used2) = DiagnosisPayload::decode(&stream[used..]).unwrap();
            prop_assert_eq!(used + used2, stream.len());
            prop_assert_eq!(d2, d);
            prop_assert_eq!(&c2, &c);
            let DiagnosisPayload::Centralized(log) = c2 else { unreachable!() };
            prop_assert_eq!(log.device(), DeviceId(device));
            prop_assert_eq!(log.open(&[1; 32]).unwrap(), records);
        }
    }
}
