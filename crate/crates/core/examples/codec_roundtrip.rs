//! Render and parse AT commands and responses.
//!
//! ```text
//! cargo run --example codec_roundtrip
//! ```

use gsm_home::at_codec::{
    parse_command, render_command, AtCommand, AtResponse, PhoneNumber, ResponseFramer, SlotIndex,
    SmsBody,
};

fn main() {
    let commands = [
        AtCommand::Attention,
        AtCommand::SetTextMode(true),
        AtCommand::ReadMessage(SlotIndex::new(1).unwrap()),
        AtCommand::SendMessage(PhoneNumber::new("+60123456789").unwrap()),
        AtCommand::SendBody(SmsBody::new("L1:ON L2:OFF L3:OFF L4:OFF").unwrap()),
        AtCommand::DeleteMessage(SlotIndex::new(1).unwrap()),
    ];
    for cmd in &commands {
        let wire = render_command(cmd);
        let back = parse_command(&wire).unwrap();
        assert_eq!(&back, cmd);
        println!(
            "{:<40} {:?}",
            format!("{:?}", String::from_utf8_lossy(&wire)),
            back
        );
    }

    // lower case is accepted on input
    println!(
        "\nat+cmgd=1 -> {:?}",
        parse_command(b"at+cmgd=1\r").unwrap()
    );
    println!(
        "AT+CMGX=1 -> {:?}",
        parse_command(b"AT+CMGX=1\r").unwrap_err()
    );

    // a modem stream split at arbitrary points
    let stream = b"\r\n+CMTI: \"SM\",3\r\n\r\n+CMGR: \"REC UNREAD\",\"+60123456789\",\"14/01/01,00:00:02+00\"\r\nL1ON\r\n\r\nOK\r\n";
    let mut framer = ResponseFramer::new();
    let mut responses: Vec<AtResponse> = Vec::new();
    for chunk in stream.chunks(7) {
        responses.extend(framer.feed(chunk).into_iter().map(Result::unwrap));
    }
    println!("\nframed {} responses:", responses.len());
    for r in responses {
        println!("  {r:?}");
    }
}
