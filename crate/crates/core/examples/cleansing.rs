//! Cleansing a messy export before clustering.

use custseg::io::{cleanse, read_csv_from, write_csv_to, CleansingRules};
use custseg::Schema;

const RAW: &str = "\
total_revenue,customer_id,recency,total_profit,top_revenue_department,region
610.00,C1,4,120.00,Grocery,north
580,C2,,110,Toys,south
25,C3,80,-3.5,,east
99,C1,12,20,Home,west
1e3,C4,2,n/a,Home,north
300,C5,9,45
410,  C6  ,15,71.25,\"Home, Garden\",south
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = Schema::retail();
    let rows = read_csv_from(RAW.as_bytes(), &schema)?;
    let cleansed = cleanse(&rows, &schema, &CleansingRules::default());
    print!("{}", cleansed.report);
    println!();
    let mut out = Vec::new();
    write_csv_to(&mut out, &cleansed.records, &schema)?;
    print!("{}", String::from_utf8(out)?);
    Ok(())
}
