//! Arithmetic in GF(p) and GF(p^w).
//!
//! Elements are plain `u64` values. In an extension field the element
//! `c_0 + c_1 x + ... + c_{w-1} x^{w-1}` is encoded as the integer
//! `c_0 + c_1 p + ... + c_{w-1} p^{w-1}`, so the prime subfield is embedded as
//! the integers `0..p`.

use crate::error::{DexError, Result};

pub type Elem = u64;

/// Largest supported extension degree; the field order must fit in 32 bits,
/// which bounds the degree by 32 for p = 2.
const MAX_DEGREE: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    characteristic: u64,
    degree: u32,
    /// Monic modulus `c_0, ..., c_{w-1}, 1`; empty for prime fields.
    modulus: Vec<u64>,
    order: u64,
}

/// Builds GF(characteristic^degree).
///
/// For `degree > 1` the modulus is the lowest monic irreducible polynomial of
/// that degree, where polynomials `x^w + c_{w-1} x^{w-1} + ... + c_0` are
/// ordered by the integer `c_0 + c_1 p + ... + c_{w-1} p^{w-1}`. For GF(2^8)
/// this is `x^8 + x^4 + x^3 + x + 1`.
pub fn make_field(characteristic: u64, degree: u32) -> Result<FieldSpec> {
    if degree < 1 {
        return Err(DexError::InvalidDegree);
    }
    if !is_prime(characteristic) {
        return Err(DexError::NotPrime(characteristic));
    }
    let order = checked_order(characteristic, degree)?;
    if degree == 1 {
        return Ok(FieldSpec {
            characteristic,
            degree,
            modulus: Vec::new(),
            order,
        });
    }
    let w = degree as usize;
    for code in 0..order {
        let mut poly = digits(code, characteristic, w);
        poly.push(1);
        if is_irreducible(&poly, characteristic) {
            return Ok(FieldSpec {
                characteristic,
                degree,
                modulus: poly,
                order,
            });
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

fn checked_order(p: u64, degree: u32) -> Result<u64> {
    let too_large = DexError::FieldTooLarge {
        characteristic: p,
        degree,
    };
    let order = p.checked_pow(degree).ok_or(too_large.clone())?;
    if order > 1 << 32 {
        return Err(too_large);
    }
    Ok(order)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn digits(mut code: u64, p: u64, w: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(w + 1);
    for _ in 0..w {
        out.push(code % p);
        code /= p;
    }
    out
}

fn trim(poly: &mut Vec<u64>) {
    while poly.last() == Some(&0) {
        poly.pop();
    }
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Remainder of `num` modulo `den` over GF(p); `den` must be nonzero.
fn poly_rem(num: &[u64], den: &[u64], p: u64) -> Vec<u64> {
    let mut rem = num.to_vec();
    trim(&mut rem);
    let mut den = den.to_vec();
    trim(&mut den);
    let dd = den.len() - 1;
    let lead_inv = inv_mod(den[dd], p);
    while rem.len() > dd {
        let shift = rem.len() - 1 - dd;
        let factor = rem[rem.len() - 1] * lead_inv % p;
        for (i, &c) in den.iter().enumerate() {
            let idx = shift + i;
            rem[idx] = (rem[idx] + p - factor * c % p) % p;
        }
        trim(&mut rem);
    }
    rem
}

/// Trial division by every monic polynomial of degree `1..=w/2`.
fn is_irreducible(poly: &[u64], p: u64) -> bool {
    let w = poly.len() - 1;
    if w <= 1 {
        return w == 1;
    }
    for d in 1..=w / 2 {
        let count = p.pow(d as u32);
        for code in 0..count {
            let mut divisor = digits(code, p, d);
            divisor.push(1);
            if poly_rem(poly, &divisor, p).is_empty() {
                return false;
            }
        }
    }
    true
}

impl FieldSpec {
    /// Prime field shortcut; panics if `p` is not a prime below 2^32.
    pub fn prime(p: u64) -> Self {
        make_field(p, 1).expect("valid prime field")
    }

    /// Extension field with an explicit monic modulus `c_0, ..., c_{w-1}, 1`.
    pub fn with_modulus(characteristic: u64, modulus: Vec<u64>) -> Result<Self> {
        if !is_prime(characteristic) {
            return Err(DexError::NotPrime(characteristic));
        }
        if modulus.len() < 2 {
            return Err(DexError::InvalidDegree);
        }
        let degree = (modulus.len() - 1) as u32;
        if degree == 1 {
            return make_field(characteristic, 1);
        }
        let order = checked_order(characteristic, degree)?;
        if modulus.iter().any(|&c| c >= characteristic)
            || modulus.last() != Some(&1)
            || !is_irreducible(&modulus, characteristic)
        {
            return Err(DexError::BadModulus(degree));
        }
        Ok(FieldSpec {
            characteristic,
            degree,
            modulus,
            order,
        })
    }

    pub fn characteristic(&self) -> u64 {
        self.characteristic
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Modulus coefficients, lowest first; empty for prime fields.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn is_prime_field(&self) -> bool {
        self.degree == 1
    }

    pub fn contains(&self, e: Elem) -> bool {
        e < self.order
    }

    pub fn check(&self, e: Elem) -> Result<Elem> {
        if self.contains(e) {
            Ok(e)
        } else {
            Err(DexError::InvalidElement(e))
        }
    }

    pub fn zero(&self) -> Elem {
        0
    }

    pub fn one(&self) -> Elem {
        1
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, n: i64) -> Elem {
        n.rem_euclid(self.characteristic as i64) as u64
    }

    fn unpack(&self, e: Elem, out: &mut [u64; MAX_DEGREE]) {
        let mut e = e;
        for slot in out.iter_mut().take(self.degree as usize) {
            *slot = e % self.characteristic;
            e /= self.characteristic;
        }
    }

    fn pack(&self, coeffs: &[u64]) -> Elem {
        coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.characteristic + c)
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let p = self.characteristic;
        if self.degree == 1 {
            return (a + b) % p;
        }
        if p == 2 {
            return a ^ b;
        }
        let (mut x, mut y) = ([0u64; MAX_DEGREE], [0u64; MAX_DEGREE]);
        self.unpack(a, &mut x);
        self.unpack(b, &mut y);
        let w = self.degree as usize;
        for i in 0..w {
            x[i] = (x[i] + y[i]) % p;
        }
        self.pack(&x[..w])
    }

    pub fn neg(&self, a: Elem) -> Elem {
        let p = self.characteristic;
        if self.degree == 1 {
            return (p - a) % p;
        }
        if p == 2 {
            return a;
        }
        let mut x = [0u64; MAX_DEGREE];
        self.unpack(a, &mut x);
        let w = self.degree as usize;
        for c in x.iter_mut().take(w) {
            *c = (p - *c) % p;
        }
        self.pack(&x[..w])
    }

    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        let p = self.characteristic;
        if self.degree == 1 {
            return a * b % p;
        }
        if a == 0 || b == 0 {
            return 0;
        }
        let w = self.degree as usize;
        let (mut x, mut y) = ([0u64; MAX_DEGREE], [0u64; MAX_DEGREE]);
        self.unpack(a, &mut x);
        self.unpack(b, &mut y);
        let mut prod = [0u64; 2 * MAX_DEGREE];
        for i in 0..w {
            if x[i] == 0 {
                continue;
            }
            for j in 0..w {
                prod[i + j] = (prod[i + j] + x[i] * y[j]) % p;
            }
        }
        // x^w = -(c_0 + ... + c_{w-1} x^{w-1})
        for top in (w..2 * w - 1).rev() {
            let f = prod[top];
            if f == 0 {
                continue;
            }
            prod[top] = 0;
            for (i, &c) in self.modulus[..w].iter().enumerate() {
                let idx = top - w + i;
                prod[idx] = (prod[idx] + p - f * c % p) % p;
            }
        }
        self.pack(&prod[..w])
    }

    pub fn pow(&self, mut base: Elem, mut exp: u64) -> Elem {
        let mut acc = 1;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: Elem) -> Option<Elem> {
        if a == 0 {
            return None;
        }
        if self.degree == 1 {
            return Some(inv_mod(a, self.characteristic));
        }
        Some(self.pow(a, self.order - 2))
    }

    pub fn div(&self, a: Elem, b: Elem) -> Option<Elem> {
        self.inv(b).map(|bi| self.mul(a, bi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_fields() {
        let f2 = make_field(2, 1).unwrap();
        assert_eq!(f2.order(), 2);
        assert_eq!(f2.add(1, 1), 0);
        let f3 = make_field(3, 1).unwrap();
        assert_eq!(f3.mul(2, 2), 1);
        assert_eq!(f3.inv(2), Some(2));
        assert_eq!(f3.neg(1), 2);
        assert_eq!(f3.from_int(-1), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(make_field(4, 1), Err(DexError::NotPrime(4)));
        assert_eq!(make_field(1, 1), Err(DexError::NotPrime(1)));
        assert_eq!(make_field(2, 0), Err(DexError::InvalidDegree));
        assert!(matches!(
            make_field(2, 40),
            Err(DexError::FieldTooLarge { .. })
        ));
        assert!(FieldSpec::with_modulus(2, vec![1, 0, 1]).is_err()); // x^2+1 = (x+1)^2
    }

    #[test]
    fn gf256_uses_lowest_irreducible() {
        let f = make_field(2, 8).unwrap();
        assert_eq!(f.modulus(), &[1, 1, 0, 1, 1, 0, 0, 0, 1]);
        // x * x^7 = x^8 = x^4 + x^3 + x + 1
        assert_eq!(f.mul(0b10, 0b1000_0000), 0b0001_1011);
    }

    /// Field axioms checked by brute force: no zero divisors and every
    /// nonzero element has an inverse found by exhaustive search.
    fn exhaustive_field_check(f: &FieldSpec) {
        let q = f.order();
        for a in 1..q {
            let mut found = None;
            for b in 1..q {
                let ab = f.mul(a, b);
                assert_ne!(ab, 0, "zero divisor {a}*{b}");
                if ab == 1 {
                    found = Some(b);
                }
            }
            assert_eq!(f.inv(a), found);
        }
    }

    #[test]
    fn extension_fields_are_fields() {
        for (p, w) in [(2, 2), (2, 3), (2, 4), (3, 2), (5, 2), (2, 8)] {
            exhaustive_field_check(&make_field(p, w).unwrap());
        }
    }

    #[test]
    fn gf256_modulus_has_no_factor() {
        // Exhaustive check: no monic polynomial of degree 1..=4 divides it.
        let f = make_field(2, 8).unwrap();
        let m = f.modulus().to_vec();
        for d in 1..=4usize {
            for code in 0..(1u64 << d) {
                let mut div = digits(code, 2, d);
                div.push(1);
                assert!(!poly_rem(&m, &div, 2).is_empty());
            }
        }
    }

    #[test]
    fn distributivity_gf9() {
        let f = make_field(3, 2).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                for c in 0..9 {
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                }
                assert_eq!(f.add(a, f.neg(a)), 0);
                assert_eq!(f.sub(f.add(a, b), b), a);
            }
        }
    }
}
