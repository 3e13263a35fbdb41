use std::fmt;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DayIndex, ProtocolError, Timestamp, SECONDS_PER_DAY};

type HmacSha256 = Hmac<Sha256>;

/// 16-byte rotating broadcast identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token(pub [u8; 16]);

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({self})")
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

/// Per-day secret from which that day's tokens are derived.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DailySeed(pub [u8; 32]);

impl fmt::Debug for DailySeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DailySeed({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

/// Long-term device secret. Daily seeds and the sealing key hang off it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceKey(pub [u8; 32]);

impl fmt::Debug for DeviceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DeviceKey(..)")
    }
}

impl DeviceKey {
    pub fn daily_seed(&self, day: DayIndex) -> DailySeed {
        let mut h = Sha256::new();
        h.update(b"proxitrace/daily-seed");
        h.update(self.0);
        h.update(day.0.to_be_bytes());
        DailySeed(h.finalize().into())
    }

    pub fn sealing_key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"proxitrace/seal");
        h.update(self.0);
        h.finalize().into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EphemeralId {
    pub token: Token,
    pub valid_from: Timestamp,
    pub valid_to: Timestamp,
}

pub fn slots_per_day(rotation_period_s: u32) -> u32 {
    (SECONDS_PER_DAY / rotation_period_s as u64) as u32
}

fn token_for(seed: &DailySeed, slot: u32) -> Token {
    let mut mac = HmacSha256::new_from_slice(&seed.0).expect("hmac accepts any key length");
    mac.update(b"proxitrace/ephid");
    mac.update(&slot.to_be_bytes());
    let out = mac.finalize().into_bytes();
    let mut token = [0u8; 16];
    token.copy_from_slice(&out[..16]);
    Token(token)
}

/// Token broadcast during `slot` of `day`: `HMAC-SHA256(seed, slot)[..16]`.
pub fn rotate_id(
    seed: &DailySeed,
    day: DayIndex,
    slot: u32,
    rotation_period_s: u32,
) -> Result<EphemeralId, ProtocolError> {
    let slots = slots_per_day(rotation_period_s);
    if slot >= slots {
        return Err(ProtocolError::SlotOutOfRange { slot, slots });
    }
    let valid_from = day.start() + slot as u64 * rotation_period_s as u64;
    Ok(EphemeralId {
        token: token_for(seed, slot),
        valid_from,
        valid_to: valid_from + rotation_period_s as u64,
    })
}

/// Every token of one day, in slot order.
pub fn day_tokens(seed: &DailySeed, day: DayIndex, rotation_period_s: u32) -> Vec<EphemeralId> {
    (0..slots_per_day(rotation_period_s))
        .map(|slot| rotate_id(seed, day, slot, rotation_period_s).expect("slot in range"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed() -> DailySeed {
        DeviceKey([7u8; 32]).daily_seed(DayIndex(3))
    }

    #[test]
    fn same_slot_same_token() {
        let a = rotate_id(&seed(), DayIndex(3), 0, 900).unwrap();
        let b = rotate_id(&seed(), DayIndex(3), 0, 900).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.valid_to - a.valid_from, 900);
        assert_eq!(a.valid_from, 3 * SECONDS_PER_DAY);
    }

    #[test]
    fn token_is_truncated_keyed_hash() {
        let s = seed();
        let mut mac = HmacSha256::new_from_slice(&s.0).unwrap();
        mac.update(b"proxitrace/ephid");
        mac.update(&1u32.to_be_bytes());
        let full = mac.finalize().into_bytes();
        let id = rotate_id(&s, DayIndex(3), 1, 900).unwrap();
        assert_eq!(&id.token.0[..], &full[..16]);
        assert_ne!(id.token, rotate_id(&s, DayIndex(3), 0, 900).unwrap().token);
    }

    #[test]
    fn slot_range() {
        assert_eq!(slots_per_day(900), 96);
        assert!(rotate_id(&seed(), DayIndex(0), 95, 900).is_ok());
        assert_eq!(
            rotate_id(&seed(), DayIndex(0), 96, 900),
            Err(ProtocolError::SlotOutOfRange {
                slot: 96,
                slots: 96
            })
        );
    }

    #[test]
    fn seeds_differ_per_day_and_device() {
        let k = DeviceKey([1u8; 32]);
        assert_ne!(k.daily_seed(DayIndex(0)), k.daily_seed(DayIndex(1)));
        assert_ne!(
            k.daily_seed(DayIndex(0)),
            DeviceKey([2u8; 32]).daily_seed(DayIndex(0))
        );
        assert_eq!(day_tokens(&seed(), DayIndex(3), 900).len(), 96);
    }
}
