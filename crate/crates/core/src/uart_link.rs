//! Baud-rate generator arithmetic and the timed serial channel between
//! controller and modem.
//!
//! Only the asynchronous low-speed 8-bit generator is modelled
//! (SYNC=0, BRGH=0, BRG16=0), where
//! `baud = F_OSC / (64 * (SPBRG + 1))`.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::time::{SimDuration, SimTime};

/// Default acceptance threshold for a generated rate, in percent.
pub const DEFAULT_MAX_ERROR_PCT: f64 = 3.0;

/// Largest relative rate mismatch a receiver tolerates before it starts
/// seeing framing errors.
pub const LINK_TOLERANCE: f64 = 0.05;

/// Bits per asynchronous frame: start, eight data, stop.
pub const BITS_PER_FRAME: u32 = 10;

const BRG_DIVISOR: f64 = 64.0;

// absorbs float noise when mapping wire times onto the integer clock
const CLOCK_EPSILON_US: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrgError {
    #[error("oscillator frequency must be positive")]
    ZeroOscillator,
}

/// Divisor mode of the generator. Only one mode exists here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BrgMode {
    /// SYNC=0, BRGH=0, BRG16=0: divide by 64.
    #[default]
    AsyncLowSpeed8Bit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BrgConfig {
    fosc_hz: u32,
    spbrg: u8,
    mode: BrgMode,
}

impl BrgConfig {
    pub fn new(fosc_hz: u32, spbrg: u8) -> Result<Self, BrgError> {
        if fosc_hz == 0 {
            return Err(BrgError::ZeroOscillator);
        }
        Ok(BrgConfig {
            fosc_hz,
            spbrg,
            mode: BrgMode::AsyncLowSpeed8Bit,
        })
    }

    pub fn fosc_hz(&self) -> u32 {
        self.fosc_hz
    }

    pub fn spbrg(&self) -> u8 {
        self.spbrg
    }

    pub fn mode(&self) -> BrgMode {
        self.mode
    }
}

pub fn calculated_baud(cfg: &BrgConfig) -> f64 {
    f64::from(cfg.fosc_hz) / (BRG_DIVISOR * (f64::from(cfg.spbrg) + 1.0))
}

/// Signed deviation of `actual` from `desired`, in percent.
pub fn error_percent(actual: f64, desired: f64) -> f64 {
    100.0 * (actual - desired) / desired
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaudSetting {
    pub spbrg: u8,
    pub actual_baud: f64,
    pub error_pct: f64,
}

/// Scan every divisor and keep the one closest to `desired`. Ties go to the
/// smaller register value. `None` when even the best one misses by more than
/// `max_error_pct`.
pub fn best_spbrg(fosc_hz: u32, desired: f64, max_error_pct: f64) -> Option<BaudSetting> {
    let mut best: Option<BaudSetting> = None;
    for spbrg in 0..=u8::MAX {
        let cfg = BrgConfig::new(fosc_hz, spbrg).ok()?;
        let actual_baud = calculated_baud(&cfg);
        let error_pct = error_percent(actual_baud, desired);
        if best.is_none_or(|b| error_pct.abs() < b.error_pct.abs()) {
            best = Some(BaudSetting {
                spbrg,
                actual_baud,
                error_pct,
            });
        }
    }
    best.filter(|b| b.error_pct.abs() <= max_error_pct)
}

/// Time on the wire for one frame, in microseconds.
pub fn byte_time_us(baud: f64) -> f64 {
    f64::from(BITS_PER_FRAME) * 1e6 / baud
}

/// Time on the wire for `byte_count` frames, in microseconds.
pub fn transfer_duration(byte_count: u64, baud: f64) -> f64 {
    byte_count as f64 * byte_time_us(baud)
}

pub fn link_compatible(tx_baud: f64, rx_baud: f64) -> bool {
    (tx_baud - rx_baud).abs() / rx_baud <= LINK_TOLERANCE
}

/// Display rounding used in baud tables: rate to the nearest integer.
pub fn display_rate(actual: f64) -> u64 {
    actual.round() as u64
}

/// Display rounding used in baud tables: error to two decimals, with
/// negative zero folded into zero.
pub fn display_error(error_pct: f64) -> String {
    let s = format!("{error_pct:.2}");
    if s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

/// A byte as seen by the receiving UART.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RxByte {
    Data(u8),
    FramingError,
}

/// One direction of the serial link: a transmitter at one rate feeding a
/// receiver sampling at another.
#[derive(Debug, Clone)]
pub struct SerialChannel {
    tx_baud: f64,
    rx_baud: f64,
    busy_until_us: f64,
    queue: VecDeque<(SimTime, RxByte)>,
}

impl SerialChannel {
    pub fn new(tx_baud: f64, rx_baud: f64) -> Self {
        SerialChannel {
            tx_baud,
            rx_baud,
            busy_until_us: 0.0,
            queue: VecDeque::new(),
        }
    }

    pub fn tx_baud(&self) -> f64 {
        self.tx_baud
    }

    pub fn rx_baud(&self) -> f64 {
        self.rx_baud
    }

    pub fn compatible(&self) -> bool {
        link_compatible(self.tx_baud, self.rx_baud)
    }

    /// True while a frame is on the wire at `now`. Receivers see the start
    /// bit the moment it is sent.
    pub fn is_busy(&self, now: SimTime) -> bool {
        self.busy_until_us - CLOCK_EPSILON_US > now.as_micros() as f64
    }

    /// Queue bytes for transmission starting at `now`, or as soon as the
    /// bytes already queued have gone out. Returns the span
    /// `(first start bit, last stop bit)` on the wire.
    pub fn write(&mut self, now: SimTime, bytes: &[u8]) -> Option<(SimTime, SimTime)> {
        if bytes.is_empty() {
            return None;
        }
        let per_byte = byte_time_us(self.tx_baud);
        let start = self.busy_until_us.max(now.as_micros() as f64);
        let clean = self.compatible();
        let mut last_due = SimTime::ZERO;
        for (i, &b) in bytes.iter().enumerate() {
            let end = start + (i as f64 + 1.0) * per_byte;
            last_due = SimTime::from_micros((end - CLOCK_EPSILON_US).ceil() as u64);
            let rx = if clean {
                RxByte::Data(b)
            } else {
                RxByte::FramingError
            };
            self.queue.push_back((last_due, rx));
        }
        self.busy_until_us = start + transfer_duration(bytes.len() as u64, self.tx_baud);
        Some((
            SimTime::from_micros((start + CLOCK_EPSILON_US).floor() as u64),
            last_due,
        ))
    }

    /// Remove and return every byte fully received by `now`, in order.
    pub fn take_due(&mut self, now: SimTime) -> Vec<RxByte> {
        let mut out = Vec::new();
        while let Some(&(due, b)) = self.queue.front() {
            if due > now {
                break;
            }
            out.push(b);
            self.queue.pop_front();
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }
}

/// Full-duplex link. The controller side runs from its generator, the
/// modem side at an exact nominal rate.
#[derive(Debug, Clone)]
pub struct SerialLink {
    pub to_modem: SerialChannel,
    pub to_controller: SerialChannel,
}

impl SerialLink {
    pub fn new(controller_baud: f64, modem_baud: f64) -> Self {
        SerialLink {
            to_modem: SerialChannel::new(controller_baud, modem_baud),
            to_controller: SerialChannel::new(modem_baud, controller_baud),
        }
    }

    pub fn controller_baud(&self) -> f64 {
        self.to_modem.tx_baud()
    }

    pub fn modem_baud(&self) -> f64 {
        self.to_controller.tx_baud()
    }
}

/// Round a microsecond figure up to the simulated clock's resolution.
pub fn ceil_duration(us: f64) -> SimDuration {
    SimDuration::from_micros(us.ceil() as u64)
}
