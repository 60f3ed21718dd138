//! Cross-checks the recursion-based Clebsch-Gordan engine against the Racah
//! closed form evaluated in exact rational arithmetic.
//!
//! The Racah sum S and the radicand R are both rational, with
//! CG = S * sqrt(R), so CG^2 = S^2 R is exact and the sign of CG is the sign
//! of S. Every block entry at small spins must match to 1e-12.

use kicked_tops::angular::{cg_block, clebsch_gordan, HalfInt, SubspaceSpec};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

fn factorial(n: i64) -> BigInt {
    assert!(n >= 0, "negative factorial argument {n}");
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

fn rat(num: BigInt) -> BigRational {
    BigRational::from_integer(num)
}

/// (CG^2 as an exact rational, sign of CG), for doubled quantum numbers.
/// Assumes the selection rules hold.
fn racah_squared(ti: i64, tmi: i64, tj: i64, tmj: i64, tf: i64) -> (BigRational, i8) {
    let tm = tmi + tmj;
    // All of these are even by the selection rules; arguments to factorial
    // are their halves.
    let half = |t: i64| -> i64 {
        assert_eq!(t % 2, 0, "odd doubled value {t}");
        t / 2
    };

    let delta_num = factorial(half(ti + tj - tf))
        * factorial(half(ti - tj + tf))
        * factorial(half(-ti + tj + tf));
    let delta_den = factorial(half(ti + tj + tf) + 1);
    let prefactor = rat(BigInt::from(half(2 * tf) + 1)) * rat(delta_num) / rat(delta_den)
        * rat(factorial(half(ti + tmi))
            * factorial(half(ti - tmi))
            * factorial(half(tj + tmj))
            * factorial(half(tj - tmj))
            * factorial(half(tf + tm))
            * factorial(half(tf - tm)));

    let k_min = 0i64
        .max(-half(tf - tj + tmi))
        .max(-half(tf - ti - tmj));
    let k_max = half(ti + tj - tf)
        .min(half(ti - tmi))
        .min(half(tj + tmj));
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(half(ti + tj - tf) - k)
            * factorial(half(ti - tmi) - k)
            * factorial(half(tj + tmj) - k)
            * factorial(half(tf - tj + tmi) + k)
            * factorial(half(tf - ti - tmj) + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }

    let sign = match sum.cmp(&BigRational::zero()) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
    };
    (&sum * &sum * prefactor, sign)
}

fn check_entry(ti: i64, tmi: i64, tj: i64, tmj: i64, tf: i64, got: f64) {
    let (sq, sign) = racah_squared(ti, tmi, tj, tmj, tf);
    let want = sign as f64 * sq.to_f64().expect("rational fits in f64").sqrt();
    assert!(
        (got - want).abs() < 1e-12,
        "CG(2I={ti}, 2mI={tmi}, 2J={tj}, 2mJ={tmj}, 2F={tf}): got {got}, racah {want}"
    );
    assert!(sq.is_positive() || got.abs() < 1e-12);
}

#[test]
fn equal_spin_zero_projection_blocks_match_racah() {
    for tj in 1..=20i64 {
        let spec = SubspaceSpec::symmetric(HalfInt::from_doubled(tj as i32)).unwrap();
        let block = cg_block(&spec);
        let ms = spec.m_j_values();
        for (r, &f) in spec.f_values().iter().enumerate() {
            for (c, &m) in ms.iter().enumerate() {
                check_entry(
                    tj,
                    -m.doubled() as i64,
                    tj,
                    m.doubled() as i64,
                    f.doubled() as i64,
                    block.matrix()[(r, c)],
                );
            }
        }
    }
}

#[test]
fn general_quantum_numbers_match_racah() {
    // Deterministic sweep over unequal spins and nonzero projections.
    for ti in 1..=8i64 {
        for tj in 1..=8i64 {
            if (ti + tj) % 2 != 0 && ti < tj {
                // Mixed integer/half-integer pairs are covered by the
                // transposed case; keep the sweep lean.
                continue;
            }
            for tf in ((ti - tj).abs()..=ti + tj).step_by(2) {
                for tm in (-tf..=tf).step_by(2) {
                    for tmj in (-tj..=tj).step_by(2) {
                        let tmi = tm - tmj;
                        if tmi.abs() > ti {
                            continue;
                        }
                        let got = clebsch_gordan(
                            HalfInt::from_doubled(ti as i32),
                            HalfInt::from_doubled(tmi as i32),
                            HalfInt::from_doubled(tj as i32),
                            HalfInt::from_doubled(tmj as i32),
                            HalfInt::from_doubled(tf as i32),
                            HalfInt::from_doubled(tm as i32),
                        )
                        .unwrap();
                        check_entry(ti, tmi, tj, tmj, tf, got);
                    }
                }
            }
        }
    }
}
