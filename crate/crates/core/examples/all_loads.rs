//! A scenario file driving every relay, run through the same path as the
//! `simulate` subcommand.
//!
//! ```text
//! cargo run --example all_loads
//! ```

use gsm_home::sim::{parse_scenario, run};

const SCENARIO: &str = include_str!("../scenarios/all_loads.scenario");

fn main() {
    let scenario = parse_scenario("all_loads", SCENARIO).unwrap();
    let report = run(&scenario).unwrap();
    print!("{}", report.to_text());
    println!();
    for o in &report.outcomes {
        let when = |t: Option<_>| {
            t.map_or("never".to_owned(), |t: gsm_home::time::SimTime| {
                t.to_string()
            })
        };
        println!(
            "{:<7} sent {:<8} executed {:<10} reply {}",
            o.body,
            o.sent_us.to_string(),
            when(o.executed_us),
            when(o.feedback_us)
        );
    }
    std::process::exit(if report.all_passed() { 0 } else { 1 });
}
