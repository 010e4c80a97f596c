//! Compare the three distance metrics on a pair of vectors and build a
//! matrix from data.

use labelcheck::{
    build_distance_matrix, correlation_distance, euclidean_distance, manhattan_distance, DataMatrix, DistanceMetric,
};

fn main() -> labelcheck::Result<()> {
    let x = [1.0, 2.0, 4.0, 8.0];
    let scaled = [10.0, 20.0, 40.0, 80.0];
    let reversed = [8.0, 4.0, 2.0, 1.0];

    // correlation ignores scale; the geometric metrics do not
    for (name, y) in [("scaled", &scaled), ("reversed", &reversed)] {
        println!(
            "{name:>9}: correlation {:.4}  euclidean {:.4}  manhattan {:.4}",
            correlation_distance(&x, y)?,
            euclidean_distance(&x, y)?,
            manhattan_distance(&x, y)?
        );
    }

    let data = DataMatrix::from_columns(
        vec!["x".into(), "scaled".into(), "reversed".into()],
        vec![x.to_vec(), scaled.to_vec(), reversed.to_vec()],
    )?;
    for metric in [DistanceMetric::Correlation, DistanceMetric::Euclidean, DistanceMetric::Manhattan] {
        let d = build_distance_matrix(&data, metric)?;
        println!("{metric}:");
        for i in 0..d.size() {
            let row: Vec<String> = d.row(i).iter().map(|v| format!("{v:8.3}")).collect();
            println!("  {:>8} {}", d.ids()[i], row.join(""));
        }
    }

    // constant vectors have no correlation
    let flat = correlation_distance(&x, &[3.0; 4]);
    println!("constant vector: {}", flat.unwrap_err());
    Ok(())
}
