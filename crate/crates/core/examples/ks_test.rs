//! The two-sample tests used by edge validation: Kolmogorov-Smirnov with
//! asymptotic and exact p-values, and the rank-sum test.

use chamber_twin::stats::{ks_exact_p, ks_two_sample, rank_sum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = Normal::new(0.0, 1.0)?.sample_iter(&mut rng).take(15).collect();
    let b: Vec<f64> = Normal::new(0.8, 1.0)?.sample_iter(&mut rng).take(15).collect();

    let ks = ks_two_sample(&a, &b)?;
    println!("KS D = {:.4}  p(asymptotic) = {:.4}  p(exact) = {:.4}", ks.statistic, ks.p_value, ks_exact_p(ks.statistic, a.len(), b.len()));
    let rs = rank_sum(&a, &b)?;
    println!("rank-sum U = {}  p = {:.4}", rs.u, rs.p_value);
    Ok(())
}
