//! Exact arithmetic and linear algebra over prime fields `F_q`.
//!
//! Only prime moduli are supported (including `q = 2`); field orders fit in
//! 64 bits. All values are immutable and all operations are pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("cannot invert zero")]
    ZeroInverse,
    #[error("value {0} out of range for modulus {1}")]
    OutOfRange(u64, u64),
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin primality test, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `x`.
pub fn next_prime_above(x: u64) -> PrimeModulus {
    let mut candidate = x.checked_add(1).expect("prime search overflows u64");
    loop {
        if is_prime(candidate) {
            return PrimeModulus(candidate);
        }
        candidate = candidate
            .checked_add(1)
            .expect("prime search overflows u64");
    }
}

/// A verified prime field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if is_prime(q) {
            Ok(PrimeModulus(q))
        } else {
            Err(FieldError::NotPrime(q))
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Wraps `value` into the field, reducing mod `q`.
    pub fn element(self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.0,
            modulus: self,
        }
    }

    // Raw arithmetic on reduced representatives. Callers must pass values in
    // `[0, q)`; the `FieldElement` wrappers enforce that at the boundary.

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.0 && b < self.0);
        let s = a + b;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.0 && b < self.0);
        if a >= b {
            a - b
        } else {
            self.0 - (b - a)
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.0 && b < self.0);
        mul_mod(a, b, self.0)
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        debug_assert!(a < self.0);
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    pub fn inv(self, a: u64) -> Result<u64, FieldError> {
        debug_assert!(a < self.0);
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(pow_mod(a, self.0 - 2, self.0))
    }

    pub fn pow(self, a: u64, e: u64) -> u64 {
        pow_mod(a, e, self.0)
    }
}

/// An element of `F_q`, carrying its modulus.
///
/// Operations between elements of different fields are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: PrimeModulus,
}

// arithmetic returns Result (moduli can mismatch), so the std operator
// traits do not fit these signatures
#[allow(clippy::should_implement_trait)]
impl FieldElement {
    pub fn new(value: u64, modulus: PrimeModulus) -> Result<Self, FieldError> {
        if value >= modulus.value() {
            return Err(FieldError::OutOfRange(value, modulus.value()));
        }
        Ok(FieldElement { value, modulus })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> PrimeModulus {
        self.modulus
    }

    fn same_field(self, other: FieldElement) -> Result<(), FieldError> {
        if self.modulus != other.modulus {
            return Err(FieldError::ModulusMismatch(
                self.modulus.value(),
                other.modulus.value(),
            ));
        }
        Ok(())
    }

    pub fn add(self, rhs: FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(rhs)?;
        Ok(FieldElement {
            value: self.modulus.add(self.value, rhs.value),
            ..self
        })
    }

    pub fn sub(self, rhs: FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(rhs)?;
        Ok(FieldElement {
            value: self.modulus.sub(self.value, rhs.value),
            ..self
        })
    }

    pub fn mul(self, rhs: FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(rhs)?;
        Ok(FieldElement {
            value: self.modulus.mul(self.value, rhs.value),
            ..self
        })
    }

    pub fn neg(self) -> FieldElement {
        FieldElement {
            value: self.modulus.neg(self.value),
            ..self
        }
    }

    pub fn inv(self) -> Result<FieldElement, FieldError> {
        Ok(FieldElement {
            value: self.modulus.inv(self.value)?,
            ..self
        })
    }
}

/// A dense matrix over `F_q`. All entries share one modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    modulus: PrimeModulus,
    entries: Vec<u64>,
}

impl FieldMatrix {
    pub fn zero(rows: usize, cols: usize, modulus: PrimeModulus) -> Self {
        FieldMatrix {
            rows,
            cols,
            modulus,
            entries: vec![0; rows * cols],
        }
    }

    pub fn from_raw(
        rows: usize,
        cols: usize,
        modulus: PrimeModulus,
        entries: Vec<u64>,
    ) -> Result<Self, FieldError> {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
        for &v in &entries {
            if v >= modulus.value() {
                return Err(FieldError::OutOfRange(v, modulus.value()));
            }
        }
        Ok(FieldMatrix {
            rows,
            cols,
            modulus,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        FieldElement {
            value: self.entries[r * self.cols + c],
            modulus: self.modulus,
        }
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) -> Result<(), FieldError> {
        if v.modulus != self.modulus {
            return Err(FieldError::ModulusMismatch(
                v.modulus.value(),
                self.modulus.value(),
            ));
        }
        self.entries[r * self.cols + c] = v.value;
        Ok(())
    }

    pub fn set_raw(&mut self, r: usize, c: usize, v: u64) {
        debug_assert!(v < self.modulus.value());
        self.entries[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> FieldMatrix {
        let mut out = FieldMatrix::zero(self.cols, self.rows, self.modulus);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.entries[c * self.rows + r] = self.entries[r * self.cols + c];
            }
        }
        out
    }

    /// Rank over `F_q` by Gaussian elimination with modular inverses.
    pub fn rank(&self) -> usize {
        let q = self.modulus;
        let mut a = self.entries.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let pivot = match (rank..rows).find(|&r| a[r * cols + col] != 0) {
                Some(r) => r,
                None => continue,
            };
            if pivot != rank {
                for c in 0..cols {
                    a.swap(pivot * cols + c, rank * cols + c);
                }
            }
            let inv = q.inv(a[rank * cols + col]).expect("pivot is nonzero");
            for c in col..cols {
                a[rank * cols + c] = q.mul(a[rank * cols + c], inv);
            }
            for r in 0..rows {
                if r == rank || a[r * cols + col] == 0 {
                    continue;
                }
                let factor = a[r * cols + col];
                for c in col..cols {
                    let delta = q.mul(factor, a[rank * cols + c]);
                    a[r * cols + c] = q.sub(a[r * cols + c], delta);
                }
            }
            rank += 1;
        }
        rank
    }
}
