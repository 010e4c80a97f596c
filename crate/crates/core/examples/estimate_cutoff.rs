//! Estimate the cut-off `t*` and `τ` for one class from its distance blocks,
//! and show the per-instance counts `Z_i` it induces.

use labelcheck::{estimate_class, psi_hat, z_statistics, Block, ClassBlocks, Segment};
use rand_distr::{Distribution, Normal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> labelcheck::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n1, outside) = (20, 60);
    let near = Normal::new(0.5, 0.07).unwrap();
    let far = Normal::new(0.77, 0.09).unwrap();

    let mut within = vec![0.0; n1 * n1];
    for i in 0..n1 {
        for j in i + 1..n1 {
            let v: f64 = near.sample(&mut rng);
            within[i * n1 + j] = v;
            within[j * n1 + i] = v;
        }
    }
    let between: Vec<f64> = (0..n1 * outside).map(|_| far.sample(&mut rng)).collect();
    let blocks = ClassBlocks::new(
        "C1",
        (0..n1).map(|i| format!("m{i}")).collect(),
        Block::new(n1, n1, within)?,
        Block::new(n1, outside, between)?,
        vec![Segment { label: "rest".into(), len: outside }],
    )?;

    let est = estimate_class(&blocks)?;
    println!("t* = {:.4}, tau = {:.4} ({} of {} within pairs)", est.t_star_hat, est.tau_hat, est.tau_count, est.g_bar_hat.len());
    for t in [0.4, 0.5, est.t_star_hat, 0.7, 0.8] {
        println!(
            "  t = {t:.3}: G(t) = {:.3}, 1 - F(t) = {:.3}, psi(t) = {:.3}",
            est.g_bar_hat.eval(t),
            1.0 - est.f_bar_hat.eval(t),
            psi_hat(&est.g_bar_hat, &est.f_bar_hat, t)
        );
    }
    println!("Z = {:?}", z_statistics(&blocks, est.t_star_hat));
    Ok(())
}
