//! Serial duty frame for the coil driver board.
//!
//! Layout (15 bytes):
//!
//! | offset | content                                             |
//! |--------|-----------------------------------------------------|
//! | 0      | sync `0xAA`                                         |
//! | 1      | type `0x01`                                         |
//! | 2..14  | six `i16` LE duties, `round(D · 32767)`             |
//! | 14     | XOR of bytes 1..=13                                 |
//!
//! Each coil's H-bridge takes two PWM lines: channel A carries `|D|` for
//! positive duties and channel B for negative ones.

use crate::allocator::DutyVector;
use crate::error::{Error, Result};
use crate::magnetics::COIL_COUNT;

pub const FRAME_LEN: usize = 15;
pub const SYNC: u8 = 0xAA;
pub const TYPE_DUTY: u8 = 0x01;
pub const DUTY_SCALE: f64 = 32767.0;

pub type DutyFrame = [u8; FRAME_LEN];

pub fn encode_frame(duties: &DutyVector) -> DutyFrame {
    let mut frame = [0u8; FRAME_LEN];
    frame[0] = SYNC;
    frame[1] = TYPE_DUTY;
    for (i, d) in duties.0.iter().enumerate() {
        let q = (d.clamp(-1.0, 1.0) * DUTY_SCALE).round() as i16;
        frame[2 + 2 * i..4 + 2 * i].copy_from_slice(&q.to_le_bytes());
    }
    frame[FRAME_LEN - 1] = checksum(&frame);
    frame
}

pub fn decode_frame(bytes: &[u8]) -> Result<DutyVector> {
    if bytes.len() != FRAME_LEN {
        return Err(Error::BadLength {
            expected: FRAME_LEN,
            found: bytes.len(),
        });
    }
    if bytes[0] != SYNC {
        return Err(Error::BadSync(bytes[0]));
    }
    let expected = checksum(bytes);
    let found = bytes[FRAME_LEN - 1];
    if expected != found {
        return Err(Error::BadChecksum { expected, found });
    }
    if bytes[1] != TYPE_DUTY {
        return Err(Error::InvalidInput(format!("unknown frame type {:#04x}", bytes[1])));
    }
    let duties = std::array::from_fn(|i| {
        let q = i16::from_le_bytes([bytes[2 + 2 * i], bytes[3 + 2 * i]]);
        // i16::MIN would decode just past -1.
        (f64::from(q) / DUTY_SCALE).max(-1.0)
    });
    Ok(DutyVector(duties))
}

fn checksum(frame: &[u8]) -> u8 {
    frame[1..FRAME_LEN - 1].iter().fold(0, |acc, b| acc ^ b)
}

/// PWM levels `(channel A, channel B)` for each coil's H-bridge.
pub fn pwm_channels(duties: &DutyVector) -> [(f64, f64); COIL_COUNT] {
    duties.0.map(|d| if d >= 0.0 { (d, 0.0) } else { (0.0, -d) })
}
