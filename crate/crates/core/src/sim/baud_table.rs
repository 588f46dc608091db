use serde::Serialize;

use crate::uart_link::{
    best_spbrg, display_error, display_rate, BaudSetting, DEFAULT_MAX_ERROR_PCT,
};

/// Oscillators listed in the PIC datasheet table, in Hz.
pub const DEFAULT_FOSC_HZ: [u32; 4] = [20_000_000, 18_432_000, 11_059_200, 8_000_000];

pub const DESIRED_RATES: [u32; 8] = [300, 1200, 2400, 9600, 10417, 19200, 57600, 115200];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaudCell {
    pub fosc_hz: u32,
    pub desired: u32,
    /// `None` where no divisor gets within the error threshold.
    pub setting: Option<BaudSetting>,
}

impl BaudCell {
    /// `(rate, error, spbrg)` as printed, or `None` for a dash.
    pub fn display(&self) -> Option<(u64, String, u8)> {
        self.setting.map(|s| {
            (
                display_rate(s.actual_baud),
                display_error(s.error_pct),
                s.spbrg,
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaudTable {
    pub fosc_hz: Vec<u32>,
    /// Row-major: one row per desired rate, one column per oscillator.
    pub rows: Vec<Vec<BaudCell>>,
}

pub fn baud_table(fosc_hz: &[u32]) -> BaudTable {
    let rows = DESIRED_RATES
        .iter()
        .map(|&desired| {
            fosc_hz
                .iter()
                .map(|&fosc| BaudCell {
                    fosc_hz: fosc,
                    desired,
                    setting: best_spbrg(fosc, f64::from(desired), DEFAULT_MAX_ERROR_PCT),
                })
                .collect()
        })
        .collect();
    BaudTable {
        fosc_hz: fosc_hz.to_vec(),
        rows,
    }
}

fn mhz(fosc: u32) -> String {
    let s = format!("{:.4}", f64::from(fosc) / 1e6);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s} MHz")
}

impl BaudTable {
    pub fn cell(&self, fosc_hz: u32, desired: u32) -> Option<&BaudCell> {
        let col = self.fosc_hz.iter().position(|&f| f == fosc_hz)?;
        let row = DESIRED_RATES.iter().position(|&d| d == desired)?;
        self.rows.get(row).and_then(|r| r.get(col))
    }

    pub fn to_text(&self) -> String {
        const W: usize = 24;
        let mut out = format!("{:>8}", "BAUD");
        for &f in &self.fosc_hz {
            out += &format!(" | {:^W$}", format!("FOSC = {}", mhz(f)));
        }
        out += &format!("\n{:>8}", "");
        for _ in &self.fosc_hz {
            out += &format!(" | {:>8} {:>7} {:>7}", "ACTUAL", "%ERR", "SPBRG");
        }
        out.push('\n');
        for row in &self.rows {
            out += &format!("{:>8}", row[0].desired);
            for cell in row {
                match cell.display() {
                    Some((rate, err, spbrg)) => out += &format!(" | {rate:>8} {err:>7} {spbrg:>7}"),
                    None => out += &format!(" | {:>8} {:>7} {:>7}", "-", "-", "-"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
