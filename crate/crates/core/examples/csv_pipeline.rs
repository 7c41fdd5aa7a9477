//! The whole command-line pipeline from a price table: classical GJR fit,
//! its neural counterpart and the GARCH-LSTM, forecasts at five horizons,
//! error tables and VaR backtests. Uses the bundled fixture by default.
//!
//! cargo run --release --example csv_pipeline -- [prices.csv] [out dir]

use std::path::PathBuf;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let data = args.get(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prices.csv")
    });
    let out = args.get(2).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("garchnn_pipeline"));
    let code = garchnn::cli::main_with_args([
        "garchnn",
        "pipeline",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    if code != 0 {
        std::process::exit(code);
    }
    for file in ["metrics.csv", "var_summary.csv"] {
        println!("== {file}");
        print!("{}", std::fs::read_to_string(out.join(file)).unwrap());
    }
    println!("artifacts in {}", out.display());
}
