//! Binomial critical values, the `τ*` bound and the type-II error.

use labelcheck::testing::tau_star_bound;
use labelcheck::{binomial_cdf, critical_value, lemma2_holds, type2_error};

fn main() -> labelcheck::Result<()> {
    let alpha0 = 0.05;
    println!("{:>5} {:>10} {:>8} {:>6} {:>12} {:>7}", "N1", "alpha", "tau*", "a", "beta", "lemma2");
    for n1 in [10u64, 25, 50, 100, 500] {
        let alpha = alpha0 / n1 as f64;
        let n = n1 - 1;
        let tau_star = tau_star_bound(n, alpha)?;
        let tau = 0.9;
        let a = critical_value(n, tau, alpha)?;
        println!(
            "{n1:>5} {alpha:>10.5} {tau_star:>8.4} {:>6} {:>12.3e} {:>7}",
            a.map_or_else(|| "-".into(), |a| a.to_string()),
            type2_error(n, tau, a)?,
            lemma2_holds(n, a)
        );
    }

    // the rejection region of one test
    let (n, tau, alpha) = (24, 0.9, 0.002);
    let a = critical_value(n, tau, alpha)?.expect("region exists");
    println!("N1 = 25, tau = {tau}: reject Z <= {a}; b({a}) = {:.6}, b({}) = {:.6}", binomial_cdf(a, n, tau)?, a + 1, binomial_cdf(a + 1, n, tau)?);
    Ok(())
}
