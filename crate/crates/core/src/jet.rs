//! Truncated bivariate Taylor jets.
//!
//! A [`Jet`] of order `K` about a base point `(u0, v0)` stores the Taylor
//! coefficients `c[i][j] = ∂^{i+j} f / ∂u^i ∂v^j / (i! j!)` for `i + j <= K`,
//! packed densely by total degree: degree `d` occupies the slots
//! `d(d+1)/2 .. (d+1)(d+2)/2`, ordered by increasing power of `v`.
//!
//! Arithmetic is exact truncated polynomial algebra. Binary operations between
//! jets of different order truncate to the smaller order, which is how the
//! loss of order through differentiation propagates through a computation.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Number of coefficients of a jet of the given order.
#[inline]
pub const fn coeff_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Slot of the coefficient of `du^i dv^j`.
#[inline]
pub const fn slot(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[derive(Clone, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(order={}, {:?})", self.order, self.coeffs)
    }
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        Jet {
            order,
            coeffs: vec![0.0; coeff_count(order)],
        }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `u` expanded about `u0`.
    pub fn var_u(u0: f64, order: usize) -> Self {
        let mut j = Jet::constant(u0, order);
        if order >= 1 {
            j.coeffs[slot(1, 0)] = 1.0;
        }
        j
    }

    /// The coordinate function `v` expanded about `v0`.
    pub fn var_v(v0: f64, order: usize) -> Self {
        let mut j = Jet::constant(v0, order);
        if order >= 1 {
            j.coeffs[slot(0, 1)] = 1.0;
        }
        j
    }

    /// Builds a jet from packed coefficients. Panics if the length does not
    /// match a triangular count.
    pub fn from_coeffs(order: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), coeff_count(order), "jet coefficient count");
        Jet { order, coeffs }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of `du^i dv^j`; zero beyond the order.
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.coeffs[slot(i, j)]
        }
    }

    /// Partial derivative `∂^{i+j} f / ∂u^i ∂v^j` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            order,
            coeffs: self.coeffs[..coeff_count(order)].to_vec(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `self += s * other`, truncating to the smaller order.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        if other.order < self.order {
            *self = self.truncate(other.order);
        }
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += s * b;
        }
    }

    /// ∂/∂u as a jet of one order less. An order-0 jet has no derivative
    /// information; its derivative is reported as an order-0 zero.
    pub fn d_u(&self) -> Jet {
        let order = self.order.saturating_sub(1);
        let mut out = Jet::zero(order);
        if self.order == 0 {
            return out;
        }
        for d in 0..=order {
            for j in 0..=d {
                let i = d - j;
                out.coeffs[slot(i, j)] = (i + 1) as f64 * self.coeffs[slot(i + 1, j)];
            }
        }
        out
    }

    /// ∂/∂v as a jet of one order less.
    pub fn d_v(&self) -> Jet {
        let order = self.order.saturating_sub(1);
        let mut out = Jet::zero(order);
        if self.order == 0 {
            return out;
        }
        for d in 0..=order {
            for j in 0..=d {
                let i = d - j;
                out.coeffs[slot(i, j)] = (j + 1) as f64 * self.coeffs[slot(i, j + 1)];
            }
        }
        out
    }

    /// Evaluates the truncated polynomial at the offset `(du, dv)` from the
    /// base point.
    pub fn eval_offset(&self, du: f64, dv: f64) -> f64 {
        let mut acc = 0.0;
        let mut upow = vec![1.0; self.order + 1];
        let mut vpow = vec![1.0; self.order + 1];
        for k in 1..=self.order {
            upow[k] = upow[k - 1] * du;
            vpow[k] = vpow[k - 1] * dv;
        }
        for d in 0..=self.order {
            for j in 0..=d {
                acc += self.coeffs[slot(d - j, j)] * upow[d - j] * vpow[j];
            }
        }
        acc
    }

    /// Truncated product.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let mut out = vec![0.0; coeff_count(order)];
        for d1 in 0..=order {
            for j1 in 0..=d1 {
                let a = self.coeffs[slot(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                let i1 = d1 - j1;
                for d2 in 0..=(order - d1) {
                    let base = slot(i1 + d2, j1);
                    let src = d2 * (d2 + 1) / 2;
                    // slot(i1 + i2, j1 + j2) = base + j2 for i2 + j2 = d2
                    let dst_row = (d1 + d2) * (d1 + d2 + 1) / 2 + j1;
                    debug_assert_eq!(base, dst_row);
                    for j2 in 0..=d2 {
                        out[dst_row + j2] += a * other.coeffs[src + j2];
                    }
                }
            }
        }
        Jet { order, coeffs: out }
    }

    /// Composes a univariate power series `Σ a_n h^n` (about the jet's value)
    /// with `h = self - value`.
    pub fn compose_series(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let k = self.order.min(series.len().saturating_sub(1));
        let mut acc = Jet::constant(series[k], self.order);
        for n in (0..k).rev() {
            acc = acc.mul_jet(&h);
            acc.coeffs[0] += series[n];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let x0 = self.value();
        if x0 == 0.0 || !x0.is_finite() {
            return Err(Error::Domain(format!("reciprocal of {x0}")));
        }
        let series: Vec<f64> = (0..=self.order)
            .map(|n| {
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                s / x0.powi(n as i32 + 1)
            })
            .collect();
        Ok(self.compose_series(&series))
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let x0 = self.value();
        if x0 <= 0.0 || !x0.is_finite() {
            return Err(Error::Domain(format!("sqrt of {x0}")));
        }
        let mut series = Vec::with_capacity(self.order + 1);
        // binom(1/2, n) x0^(1/2 - n)
        let mut binom = 1.0;
        for n in 0..=self.order {
            if n > 0 {
                binom *= (0.5 - (n as f64 - 1.0)) / n as f64;
            }
            series.push(binom * x0.powf(0.5 - n as f64));
        }
        Ok(self.compose_series(&series))
    }

    pub fn ln(&self) -> Result<Jet> {
        let x0 = self.value();
        if x0 <= 0.0 || !x0.is_finite() {
            return Err(Error::Domain(format!("log of {x0}")));
        }
        let mut series = vec![x0.ln()];
        for n in 1..=self.order {
            let s = if n % 2 == 1 { 1.0 } else { -1.0 };
            series.push(s / (n as f64 * x0.powi(n as i32)));
        }
        Ok(self.compose_series(&series))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order).map(|n| e / factorial(n)).collect();
        self.compose_series(&series)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order)
            .map(|n| cycle[n % 4] / factorial(n))
            .collect();
        self.compose_series(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order)
            .map(|n| cycle[n % 4] / factorial(n))
            .collect();
        self.compose_series(&series)
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, n: u32) -> Jet {
        let mut result = Jet::constant(1.0, self.order);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    /// Re-expands the jet in new variables `(s, r)` with
    /// `(du, dv) = s * a + r * b`, both jets based at the origin.
    pub fn linear_substitute(&self, a: [f64; 2], b: [f64; 2]) -> Jet {
        let order = self.order;
        let mut du = Jet::zero(order);
        let mut dv = Jet::zero(order);
        if order >= 1 {
            du.coeffs[slot(1, 0)] = a[0];
            du.coeffs[slot(0, 1)] = b[0];
            dv.coeffs[slot(1, 0)] = a[1];
            dv.coeffs[slot(0, 1)] = b[1];
        }
        let mut upow = vec![Jet::constant(1.0, order)];
        let mut vpow = vec![Jet::constant(1.0, order)];
        for k in 1..=order {
            upow.push(upow[k - 1].mul_jet(&du));
            vpow.push(vpow[k - 1].mul_jet(&dv));
        }
        let mut out = Jet::zero(order);
        for d in 0..=order {
            for j in 0..=d {
                let c = self.coeffs[slot(d - j, j)];
                if c != 0.0 {
                    out.axpy(c, &upow[d - j].mul_jet(&vpow[j]));
                }
            }
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let mut out = self.truncate(rhs.order);
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let mut out = self.truncate(rhs.order);
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.axpy(1.0, rhs);
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

/// A vector field in R⁴ with jet-valued components.
#[derive(Clone, Debug, PartialEq)]
pub struct JetVec4(pub [Jet; 4]);

impl JetVec4 {
    pub fn zero(order: usize) -> Self {
        JetVec4(std::array::from_fn(|_| Jet::zero(order)))
    }

    pub fn constant(v: [f64; 4], order: usize) -> Self {
        JetVec4(std::array::from_fn(|i| Jet::constant(v[i], order)))
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn value(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.0[i].value())
    }

    pub fn d_u(&self) -> Self {
        JetVec4(std::array::from_fn(|i| self.0[i].d_u()))
    }

    pub fn d_v(&self) -> Self {
        JetVec4(std::array::from_fn(|i| self.0[i].d_v()))
    }

    pub fn scale(&self, s: f64) -> Self {
        JetVec4(std::array::from_fn(|i| self.0[i].scale(s)))
    }

    /// Componentwise product with a scalar jet.
    pub fn mul_scalar(&self, s: &Jet) -> Self {
        JetVec4(std::array::from_fn(|i| self.0[i].mul_jet(s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        JetVec4(std::array::from_fn(|i| &self.0[i] + &other.0[i]))
    }

    pub fn sub(&self, other: &Self) -> Self {
        JetVec4(std::array::from_fn(|i| &self.0[i] - &other.0[i]))
    }

    pub fn truncate(&self, order: usize) -> Self {
        JetVec4(std::array::from_fn(|i| self.0[i].truncate(order)))
    }

    /// Euclidean dot product of two jet vectors.
    pub fn dot(&self, other: &Self) -> Jet {
        let mut acc = self.0[0].mul_jet(&other.0[0]);
        for i in 1..4 {
            acc += &self.0[i].mul_jet(&other.0[i]);
        }
        acc
    }

    /// Dot product with a constant vector.
    pub fn dot_const(&self, w: [f64; 4]) -> Jet {
        let mut acc = self.0[0].scale(w[0]);
        for i in 1..4 {
            acc.axpy(w[i], &self.0[i]);
        }
        acc
    }

    /// `α ∂_u Y + β ∂_v Y`: the directional derivative along the tangent
    /// field with coordinate components `(α, β)`.
    pub fn directional(&self, alpha: &Jet, beta: &Jet) -> Self {
        let du = self.d_u();
        let dv = self.d_v();
        JetVec4(std::array::from_fn(|i| {
            &du.0[i].mul_jet(alpha) + &dv.0[i].mul_jet(beta)
        }))
    }

    /// Linear combination `Σ c_k v_k` with jet coefficients.
    pub fn combine(terms: &[(&Jet, &JetVec4)]) -> Self {
        let mut out: Option<JetVec4> = None;
        for (c, v) in terms {
            let t = v.mul_scalar(c);
            out = Some(match out {
                None => t,
                Some(acc) => JetVec4::add(&acc, &t),
            });
        }
        out.expect("combine needs at least one term")
    }
}

impl Add for &JetVec4 {
    type Output = JetVec4;
    fn add(self, rhs: &JetVec4) -> JetVec4 {
        JetVec4::add(self, rhs)
    }
}

impl Sub for &JetVec4 {
    type Output = JetVec4;
    fn sub(self, rhs: &JetVec4) -> JetVec4 {
        JetVec4::sub(self, rhs)
    }
}

impl Add for JetVec4 {
    type Output = JetVec4;
    fn add(self, rhs: JetVec4) -> JetVec4 {
        JetVec4::add(&self, &rhs)
    }
}

/// Determinant of the 4×4 matrix with the given jet columns, by Laplace
/// expansion along the first two columns.
pub fn det4(cols: [&JetVec4; 4]) -> Jet {
    const SPLITS: [(usize, usize, usize, usize, f64); 6] = [
        (0, 1, 2, 3, 1.0),
        (0, 2, 1, 3, -1.0),
        (0, 3, 1, 2, 1.0),
        (1, 2, 0, 3, 1.0),
        (1, 3, 0, 2, -1.0),
        (2, 3, 0, 1, 1.0),
    ];
    let minor = |a: &JetVec4, b: &JetVec4, r: usize, s: usize| {
        &a.0[r].mul_jet(&b.0[s]) - &a.0[s].mul_jet(&b.0[r])
    };
    let order = cols.iter().map(|c| c.order()).min().unwrap_or(0);
    let mut acc = Jet::zero(order);
    for &(r, s, p, q, sign) in &SPLITS {
        let t = minor(cols[0], cols[1], r, s).mul_jet(&minor(cols[2], cols[3], p, q));
        acc.axpy(sign, &t);
    }
    acc
}

/// Solves `Σ_k c_k cols[k] = rhs` for the jet coefficients `c_k` by Gaussian
/// elimination with partial pivoting on the base-point values.
///
/// `pivot_floor` is the smallest acceptable pivot magnitude at the base point.
pub fn solve4(cols: &[&JetVec4; 4], rhs: &JetVec4, pivot_floor: f64) -> Result<[Jet; 4]> {
    let order = cols
        .iter()
        .map(|c| c.order())
        .chain(std::iter::once(rhs.order()))
        .min()
        .unwrap_or(0);
    // a[row][col]
    let mut a: Vec<Vec<Jet>> = (0..4)
        .map(|r| (0..4).map(|c| cols[c].0[r].truncate(order)).collect())
        .collect();
    let mut b: Vec<Jet> = (0..4).map(|r| rhs.0[r].truncate(order)).collect();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|j| j.value().abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&x, &y| {
                a[x][col]
                    .value()
                    .abs()
                    .total_cmp(&a[y][col].value().abs())
            })
            .unwrap();
        if a[piv][col].value().abs() <= pivot_floor * scale {
            return Err(Error::SingularBasis);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip()?;
        for r in (col + 1)..4 {
            let f = a[r][col].mul_jet(&inv);
            for c in col..4 {
                let t = f.mul_jet(&a[col][c]);
                a[r][c] = &a[r][c] - &t;
            }
            let t = f.mul_jet(&b[col]);
            b[r] = &b[r] - &t;
        }
    }
    let mut x: Vec<Jet> = vec![Jet::zero(order); 4];
    for r in (0..4).rev() {
        let mut acc = b[r].clone();
        for c in (r + 1)..4 {
            acc = &acc - &a[r][c].mul_jet(&x[c]);
        }
        x[r] = acc.div_jet(&a[r][r])?;
    }
    Ok([x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone()])
}
