//! Baud-rate generator settings for a range of crystals, plus the cost of a
//! poor divisor on the serial line.
//!
//! ```text
//! cargo run --example baud_table
//! ```

use gsm_home::sim::baud_table::{baud_table, DEFAULT_FOSC_HZ};
use gsm_home::uart_link::{best_spbrg, calculated_baud, link_compatible, BrgConfig};

fn main() {
    print!("{}", baud_table(&DEFAULT_FOSC_HZ).to_text());

    let cfg = BrgConfig::new(20_000_000, 32).unwrap();
    let baud = calculated_baud(&cfg);
    println!(
        "\n20 MHz, SPBRG 32: {baud:.3} baud, talks to a 9600 modem: {}",
        link_compatible(baud, 9600.0)
    );

    // a 4 MHz part cannot reach 9600 inside 3 %
    match best_spbrg(4_000_000, 9600.0, 3.0) {
        Some(s) => println!("4 MHz: SPBRG {}", s.spbrg),
        None => println!("4 MHz: no divisor within 3 % of 9600"),
    }
    let closest = best_spbrg(4_000_000, 9600.0, 100.0).unwrap();
    println!(
        "4 MHz closest: SPBRG {} at {:.0} baud ({:+.2} %), compatible: {}",
        closest.spbrg,
        closest.actual_baud,
        closest.error_pct,
        link_compatible(closest.actual_baud, 9600.0)
    );
}
