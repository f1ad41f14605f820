//! Rank and linear correlation between predictions and labels, including
//! tied ranks and the undefined constant-input case.

use pseudoref::evaluate::{average_ranks, median, plcc, srcc};

fn main() -> pseudoref::Result<()> {
    let pred = [31.0, 45.0, 45.0, 60.0, 72.0, 90.0];
    let dmos = [20.0, 41.0, 38.0, 66.0, 70.0, 95.0];
    println!("ranks of pred  {:?}", average_ranks(&pred));
    println!("SRCC {:.4}", srcc(&pred, &dmos)?);
    println!("PLCC {:.4}", plcc(&pred, &dmos)?);
    let monotone: Vec<f64> = pred.iter().map(|v| v * v * v).collect();
    println!("SRCC after a cubic remap {:.4}, PLCC {:.4}", srcc(&monotone, &dmos)?, plcc(&monotone, &dmos)?);
    match srcc(&[5.0; 6], &dmos) {
        Ok(v) => println!("constant predictions gave {v}"),
        Err(e) => println!("constant predictions: error[{}]: {e}", e.category()),
    }
    let splits = [0.81, 0.84, 0.79, 0.88, 0.86, 0.83, 0.85, 0.80, 0.87, 0.82];
    println!("median over ten splits {:.3}", median(&splits)?);
    Ok(())
}
