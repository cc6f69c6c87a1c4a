//! Prints the synthetic research panel for a seed (default: the bundled one).
//!
//! cargo run -p chebdea --example synthetic_panel -- 20180425 > data/synthetic_panel.csv

fn main() {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an unsigned integer"))
        .unwrap_or(chebdea::synthetic::DEFAULT_SEED);
    print!("{}", chebdea::synthetic::research_panel_csv(seed));
}
