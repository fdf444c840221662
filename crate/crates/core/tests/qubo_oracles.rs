use rand::Rng;
use schedbench::qubo::{bits_to_spins, ising_energy, qubo_energy, QuboProblem};
use schedbench::seed::rng_from;

/// Upper-triangular dense matrix with the linear terms on the diagonal.
fn dense(q: &QuboProblem) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; q.num_vars]; q.num_vars];
    for (i, &a) in q.linear.iter().enumerate() {
        m[i][i] = a;
    }
    for (&(a, b), &v) in &q.quadratic {
        let (a, b) = (a.min(b), a.max(b));
        m[a][b] += v;
    }
    m
}

fn expand(m: &[Vec<f64>], offset: f64, x: &[u8]) -> f64 {
    let mut e = offset;
    for i in 0..m.len() {
        for j in i..m.len() {
            e += m[i][j] * f64::from(x[i]) * f64::from(x[j]);
        }
    }
    e
}

#[test]
fn ten_variable_energies_match_dense_expansion() {
    for trial in 0..20u64 {
        let mut rng = rng_from(31, &[trial]);
        let mut q = QuboProblem::empty(10);
        // Quarter-integer coefficients keep every partial sum exact.
        for a in q.linear.iter_mut() {
            *a = f64::from(rng.gen_range(-16i32..=16)) / 4.0;
        }
        for a in 0..10 {
            for b in a + 1..10 {
                if rng.gen_bool(0.6) {
                    q.add_quadratic(a, b, f64::from(rng.gen_range(-16i32..=16)) / 4.0);
                }
            }
        }
        q.offset = f64::from(rng.gen_range(-8i32..=8));
        let m = dense(&q);
        let ising = q.to_ising();
        for code in 0u32..1 << 10 {
            let x: Vec<u8> = (0..10).map(|i| (code >> i & 1) as u8).collect();
            let want = expand(&m, q.offset, &x);
            assert_eq!(qubo_energy(&q, &x).unwrap(), want);
            assert_eq!(ising_energy(&ising, &bits_to_spins(&x)).unwrap(), want);
        }
    }
}
