//! Bytes on a timed serial line: queueing, arrival times and what a rate
//! mismatch does to the receiver.
//!
//! ```text
//! cargo run --example serial_link_timing
//! ```

use gsm_home::time::SimTime;
use gsm_home::uart_link::{byte_time_us, RxByte, SerialChannel};

fn main() {
    let mut line = SerialChannel::new(9600.0, 9600.0);
    println!("one frame at 9600: {:.3} us", byte_time_us(9600.0));

    let (start, end) = line.write(SimTime::ZERO, b"AT\r").unwrap();
    println!("\"AT\\r\" on the wire {start} .. {end}");
    // a second write queues behind the first
    let (start, end) = line
        .write(SimTime::from_micros(1000), b"AT+CMGF=1\r")
        .unwrap();
    println!("\"AT+CMGF=1\\r\" queued {start} .. {end}");

    for t in [1000, 3125, 13_542] {
        let got = line.take_due(SimTime::from_micros(t));
        println!("by {t:>6}us: {} byte(s) {:?}", got.len(), text(&got));
    }

    let mut skewed = SerialChannel::new(9600.0, 4800.0);
    skewed.write(SimTime::ZERO, b"OK").unwrap();
    println!(
        "\n9600 into 4800: {:?}",
        skewed.take_due(SimTime::from_micros(10_000))
    );
}

fn text(bytes: &[RxByte]) -> String {
    bytes
        .iter()
        .map(|b| match b {
            RxByte::Data(b) => (*b as char).escape_default().to_string(),
            RxByte::FramingError => "?".into(),
        })
        .collect()
}
