//! Test every class of a small labeled data set and print the verdicts.
//!
//! Three protein groups of peptides follow distinct intensity profiles; one
//! peptide filed under `P1` actually comes from a protein that is not in
//! the data.

use labelcheck::report::summary_table;
use labelcheck::{build_distance_matrix, validate_all, ClassLabeling, DataMatrix, DistanceMetric, TestConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> labelcheck::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples = 24;
    let profile = |k: usize, l: usize| ((l as f64) * 0.7 + 2.1 * k as f64).sin();
    let stranger = |l: usize| ((l as f64) * 1.9).cos();

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for (k, size) in [(0, 30), (1, 30), (2, 20)] {
        for i in 0..size {
            let planted = k == 0 && i == 4;
            ids.push(format!("P{}_pep{i}", k + 1));
            labels.push(Some(format!("P{}", k + 1)));
            columns.push(
                (0..samples)
                    .map(|l| if planted { stranger(l) } else { profile(k, l) } + 0.3 * rng.gen::<f64>())
                    .collect(),
            );
        }
    }
    // a few peptides without a protein serve as reference only
    for i in 0..5 {
        ids.push(format!("orphan{i}"));
        labels.push(None);
        columns.push((0..samples).map(|_| rng.gen::<f64>()).collect());
    }

    let data = DataMatrix::from_columns(ids, columns)?;
    let labeling = ClassLabeling::from_labels(&labels);
    let d = build_distance_matrix(&data, DistanceMetric::Correlation)?;
    let v = validate_all(&d, &labeling, &TestConfig::default());
    print!("{}", summary_table(&v));
    for r in &v.results {
        for inst in r.rejected() {
            println!("removed {} from {} (Z = {})", inst.id, r.class_id, inst.z);
        }
    }
    Ok(())
}
