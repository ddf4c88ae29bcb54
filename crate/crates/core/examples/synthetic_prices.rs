//! Writes a seeded synthetic `date,ticker,close` table for smoke runs:
//! ten sectors of four tickers covering 2019-06-30..=2023-02-14 (1325 returns).
//!
//!     cargo run -p marketmode --example synthetic_prices > prices.csv

use chrono::NaiveDate;
use marketmode::synthetic;

fn main() {
    let start = NaiveDate::from_ymd_opt(2019, 6, 30).unwrap();
    let returns = synthetic::sector_returns(10, 4, 1325, 1.0, 0.7, 7).expect("valid shape");
    let panel = synthetic::prices_from_returns(&returns, start).expect("positive prices");
    println!("date,ticker,close");
    for (ticker, row) in panel.tickers().iter().zip(panel.prices()) {
        for (day, close) in panel.calendar().iter().zip(row) {
            println!("{},{ticker},{close}", day.format("%Y-%m-%d"));
        }
    }
}
