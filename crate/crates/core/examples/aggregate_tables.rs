//! Recomputes Acc and Rel for the bundled published tables.

use tokenpress::eval::aggregate;
use tokenpress::oracle::{reference_for, reported_tables};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = reported_tables();
    println!("{:<52} {:>6} {:>6} {:>7} {:>7}", "row", "acc", "table", "rel", "table");
    for row in rows.iter().filter(|r| !r.is_reference()) {
        let reference = reference_for(&rows, row).ok_or("missing reference row")?;
        let agg = aggregate(&row.bench_scores(reference)?)?;
        let flag = if (agg.rel_percent - row.rel).abs() > 0.1 + 1e-9 { "  <-" } else { "" };
        println!(
            "{:<52} {:>6.2} {:>6.1} {:>7.2} {:>7.1}{flag}",
            format!("{} ({})", row.label(), row.model),
            agg.acc,
            row.acc,
            agg.rel_percent,
            row.rel
        );
    }
    Ok(())
}
