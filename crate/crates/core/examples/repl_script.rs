//! The interactive session fed from a script instead of a terminal.
//!
//! ```text
//! cargo run --example repl_script
//! ```

use gsm_home::sim::repl::Repl;
use gsm_home::sim::SimConfig;

const SCRIPT: &str = "\
sms L1ON
sms L3ON
loads
sms HELLO
sms STATUS
inbox
phone +60129876543
sms L1OFF
loads
time
quit
";

fn main() {
    let mut repl = Repl::new(SimConfig::default()).unwrap();
    repl.run(SCRIPT.as_bytes(), std::io::stdout().lock())
        .unwrap();
}
