//! Write a labeled intensity file, read it back, and validate it, as the
//! `validate` subcommand does.

use labelcheck::io::{parse_intensity_csv, write_intensity_csv};
use labelcheck::{build_distance_matrix, validate_all, DataMatrix, DistanceMetric, TestConfig};

fn main() -> labelcheck::Result<()> {
    let ids: Vec<String> = (0..6).map(|i| format!("pep{i}")).collect();
    let columns = vec![
        vec![1.0, 2.0, 3.0, 4.0, 5.0],
        vec![1.2, 2.1, 2.8, 4.1, 5.3],
        vec![0.9, 1.8, 3.2, 3.9, 4.8],
        vec![5.0, 4.0, 3.0, 2.0, 1.0],
        vec![5.1, 3.8, 3.1, 2.2, 0.9],
        vec![2.0, 2.5, 1.0, 3.0, 2.2],
    ];
    let labels = vec![Some("A".into()), Some("A".into()), Some("A".into()), Some("B".into()), Some("B".into()), None];
    let data = DataMatrix::from_columns(ids, columns)?;

    let mut buf = Vec::new();
    write_intensity_csv(&mut buf, &data, &labels)?;
    let text = String::from_utf8(buf).expect("utf-8");
    print!("{text}");

    let back = parse_intensity_csv(text.as_bytes(), "memory", None)?;
    let d = build_distance_matrix(&back.data, DistanceMetric::Correlation)?;
    let v = validate_all(&d, &back.labeling(), &TestConfig::default());
    for r in &v.results {
        println!("{}: tau = {:.3}, removed {}", r.class_id, r.tau_hat, r.r_count);
    }
    Ok(())
}
