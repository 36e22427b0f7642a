//! Profiles four given clusters on revenue and profit: ranking, value
//! quadrants, strategies and per-variable distributions.

use custseg::profiler::{cluster_variable_profile, profile, ProfileSpec};
use custseg::{Record, Schema, Value};

// (cluster, customers, total profit, total revenue)
const CLUSTERS: [(usize, usize, f64, f64); 4] = [
    (3, 486, 117256.59, 563643.71),
    (1, 5977, 85812.08, 382009.43),
    (2, 529, 82169.06, 379789.03),
    (0, 902, 51561.46, 263656.0),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = Schema::retail();
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (cluster, count, profit, revenue) in CLUSTERS {
        for k in 0..count {
            let id = format!("R{:05}", records.len());
            records.push(Record {
                id: id.clone(),
                values: vec![
                    Value::Category(id),
                    Value::Number((k % (30 * (cluster + 1))) as f64),
                    Value::Number(profit / count as f64),
                    Value::Number(revenue / count as f64),
                    Value::Category(["Grocery", "Home", "Toys", "Electronics"][(k + cluster) % 4].into()),
                ],
            });
            labels.push(cluster);
        }
    }

    let p = profile(&records, &labels, &schema, &ProfileSpec::retail())?;
    print!("{}", p.to_table());
    let u = &p.universe;
    println!(
        "\nuniverse: {} customers, revenue {:.2}, profit {:.2}, per capita revenue {:.2}, cost {:.2}",
        u.total_customers, u.total_revenue, u.total_profit, u.per_capita_revenue, u.per_capita_cost
    );

    let recency = schema.index_of("recency").unwrap();
    let vp = cluster_variable_profile(&records, &labels, &schema, recency, 5);
    println!("\nrecency distribution by cluster");
    print!("{:>12}", "bin");
    for (id, _) in &vp.clusters {
        print!(" {:>7}", format!("c{id}"));
    }
    println!(" {:>8}", "all");
    for (b, (lo, hi)) in vp.bins.iter().enumerate() {
        print!("{:>12}", format!("{lo}..{hi}"));
        for (_, props) in &vp.clusters {
            print!(" {:>7.3}", props[b]);
        }
        println!(" {:>8.3}", vp.universe[b]);
    }
    Ok(())
}
