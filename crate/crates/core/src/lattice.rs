//! Exact geometry of integer points in ℓ2 and ℓ∞ balls.
//!
//! Every radius comparison is done in integer arithmetic. A point `x ∈ Z^d`
//! lies in the ℓ2 ball of radius `R` iff `‖x‖₂² ≤ ⌊R²⌋`, so [`RadiusSpec`]
//! computes `⌊R⌋` and `⌊R²⌋` exactly once (from the binary expansion of the
//! `f64`, or from an exact ratio) and everything downstream works with those
//! integers.
//!
//! The packing constructors follow the random sparse-sign construction:
//! draw vectors with a uniformly random support of size `s` and independent
//! uniform signs, keep a batch only if every pairwise inner product is at
//! most `s/2`. Returned packings always carry a certificate that has been
//! re-verified with exact integer arithmetic.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of candidate lattice points any enumeration may visit.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Default number of resampling rounds for the packing constructors.
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// A positive radius, possibly infinite.
///
/// For finite radii `⌊R⌋`, `⌊R²⌋` and whether `R²` is an integer are computed
/// exactly at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadiusRepr", into = "RadiusRepr")]
pub struct RadiusSpec {
    value: f64,
    floor_r: Option<u64>,
    floor_r2: Option<u64>,
    r2_integral: bool,
}

impl RadiusSpec {
    pub fn finite(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::invalid("R", format!("must be a positive finite number, got {value}")));
        }
        let (mant, exp) = decode_f64(value);
        let floor_r = floor_dyadic(mant as u128, exp)
            .ok_or_else(|| Error::invalid("R", "too large for exact lattice arithmetic"))?;
        let mant2 = (mant as u128) * (mant as u128);
        let floor_r2 = floor_dyadic(mant2, 2 * exp)
            .ok_or_else(|| Error::invalid("R", "too large for exact lattice arithmetic"))?;
        let r2_integral = exp >= 0 || {
            let sh = (-2 * exp) as u32;
            sh < 128 && mant2 & ((1u128 << sh) - 1) == 0
        };
        Ok(RadiusSpec {
            value,
            floor_r: Some(floor_r),
            floor_r2: Some(floor_r2),
            r2_integral,
        })
    }

    /// The exact rational radius `num / den`.
    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid("R", format!("ratio {num}/{den} is not a positive number")));
        }
        let n2 = (num as u128) * (num as u128);
        let d2 = (den as u128) * (den as u128);
        let floor_r2 = u64::try_from(n2 / d2)
            .map_err(|_| Error::invalid("R", "too large for exact lattice arithmetic"))?;
        Ok(RadiusSpec {
            value: num as f64 / den as f64,
            floor_r: Some(num / den),
            floor_r2: Some(floor_r2),
            r2_integral: n2.is_multiple_of(d2),
        })
    }

    pub fn infinite() -> Self {
        RadiusSpec {
            value: f64::INFINITY,
            floor_r: None,
            floor_r2: None,
            r2_integral: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.floor_r.is_some()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// `⌊R⌋`, or `None` for an infinite radius.
    pub fn floor_r(&self) -> Option<u64> {
        self.floor_r
    }

    /// `⌊R²⌋`, or `None` for an infinite radius.
    pub fn floor_r2(&self) -> Option<u64> {
        self.floor_r2
    }

    /// Exact test of `R² ≤ n`.
    pub fn sq_le(&self, n: u64) -> bool {
        match self.floor_r2 {
            None => false,
            Some(f) => f < n || (f == n && self.r2_integral),
        }
    }

    /// Exact test of `n ≤ R²`.
    pub fn sq_ge(&self, n: u64) -> bool {
        match self.floor_r2 {
            None => true,
            Some(f) => n <= f,
        }
    }

    fn require_finite(&self, what: &'static str) -> Result<(u64, u64)> {
        match (self.floor_r, self.floor_r2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::invalid(what, "requires a finite radius")),
        }
    }
}

impl fmt::Display for RadiusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "{}", self.value)
        } else {
            f.write_str("inf")
        }
    }
}

/// Accepts `inf`, `p/q`, exact decimals such as `2.25`, and anything `f64` parses.
impl FromStr for RadiusSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => return Ok(RadiusSpec::infinite()),
            _ => {}
        }
        if let Some((n, d)) = t.split_once('/') {
            let num = n.trim().parse::<u64>().map_err(|e| Error::invalid("R", e.to_string()))?;
            let den = d.trim().parse::<u64>().map_err(|e| Error::invalid("R", e.to_string()))?;
            return RadiusSpec::from_ratio(num, den);
        }
        if let Some((int, frac)) = t.split_once('.') {
            let digits = int.len() + frac.len();
            let plain = |p: &str| p.chars().all(|c| c.is_ascii_digit());
            if digits <= 18 && plain(int) && plain(frac) && !frac.is_empty() {
                let num = format!("{int}{frac}").parse::<u64>().map_err(|e| Error::invalid("R", e.to_string()))?;
                let den = 10u64.pow(frac.len() as u32);
                return RadiusSpec::from_ratio(num, den);
            }
        }
        let v = t.parse::<f64>().map_err(|e| Error::invalid("R", format!("{t:?}: {e}")))?;
        if v.is_infinite() && v > 0.0 {
            Ok(RadiusSpec::infinite())
        } else {
            RadiusSpec::finite(v)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<RadiusRepr> for RadiusSpec {
    type Error = Error;
    fn try_from(r: RadiusRepr) -> Result<Self> {
        match r {
            RadiusRepr::Num(v) => RadiusSpec::finite(v),
            RadiusRepr::Text(s) => s.parse(),
        }
    }
}

impl From<RadiusSpec> for RadiusRepr {
    fn from(r: RadiusSpec) -> Self {
        if r.is_finite() {
            RadiusRepr::Num(r.value)
        } else {
            RadiusRepr::Text("inf".into())
        }
    }
}

/// `v = mant · 2^exp` for a positive finite `v`.
fn decode_f64(v: f64) -> (u64, i32) {
    let bits = v.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    }
}

/// `⌊mant · 2^exp⌋`, or `None` if it does not fit in a `u64`.
fn floor_dyadic(mant: u128, exp: i32) -> Option<u64> {
    if exp >= 0 {
        let sh = exp as u32;
        if sh >= 64 || mant.leading_zeros() < sh + 64 {
            return if mant == 0 { Some(0) } else { None };
        }
        u64::try_from(mant << sh).ok()
    } else {
        let sh = (-exp) as u32;
        if sh >= 128 {
            Some(0)
        } else {
            u64::try_from(mant >> sh).ok()
        }
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

/// `H₂(d, R) = s · ln(e·d/s)` with `s = min{d, ⌊R²⌋}`, and zero for `R < 1`.
pub fn h2(d: usize, radius: RadiusSpec) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let s = match radius.floor_r2() {
        None => d as u64,
        Some(f) => f.min(d as u64),
    };
    if s == 0 {
        return Ok(0.0);
    }
    if s == d as u64 {
        return Ok(d as f64);
    }
    let s = s as f64;
    Ok(s * (1.0 + (d as f64 / s).ln()))
}

/// `(1 + 2R/r)^d`, the volumetric bound on an `r`-separated subset of a radius-`R` ball.
pub fn covering_bound(d: usize, big_r: f64, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    if !(big_r > 0.0) {
        return Err(Error::invalid("R", "must be positive"));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("r", "must be positive"));
    }
    Ok((1.0 + 2.0 * big_r / r).powi(d as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

impl FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "2" => Ok(Norm::L2),
            "linf" | "inf" | "l-inf" => Ok(Norm::Linf),
            other => Err(Error::invalid("norm", format!("unknown norm {other:?}"))),
        }
    }
}

/// A finite set of integer points inside a ball, in canonical lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerPointSet {
    dim: usize,
    norm: Norm,
    radius: RadiusSpec,
    coords: Vec<i64>,
}

impl IntegerPointSet {
    /// Builds a set from arbitrary points, sorting and deduplicating them.
    /// Every point must lie in the declared ball.
    pub fn from_points(dim: usize, norm: Norm, radius: RadiusSpec, points: Vec<Vec<i64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        let mut points = points;
        for p in &points {
            crate::error::ensure_dim(dim, p.len())?;
            if !in_ball(p, norm, &radius) {
                return Err(Error::Infeasible);
            }
        }
        points.sort();
        points.dedup();
        Ok(IntegerPointSet {
            dim,
            norm,
            radius,
            coords: points.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn radius(&self) -> RadiusSpec {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim && self.iter().collect::<Vec<_>>().binary_search(&x).is_ok()
    }

    pub fn to_vecs(&self) -> Vec<Vec<i64>> {
        self.iter().map(<[i64]>::to_vec).collect()
    }

    /// CSV with header `x1,...,xd` and one point per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_header(&mut w, self.dim)?;
        for p in self.iter() {
            write_row(&mut w, p)?;
        }
        Ok(())
    }
}

fn write_header<W: Write>(w: &mut W, dim: usize) -> std::io::Result<()> {
    let cols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", cols.join(","))
}

fn write_row<W: Write, T: fmt::Display>(w: &mut W, p: &[T]) -> std::io::Result<()> {
    let cells: Vec<String> = p.iter().map(ToString::to_string).collect();
    writeln!(w, "{}", cells.join(","))
}

fn in_ball(p: &[i64], norm: Norm, radius: &RadiusSpec) -> bool {
    match norm {
        Norm::L2 => match radius.floor_r2() {
            None => true,
            Some(r2) => p
                .iter()
                .try_fold(0u64, |acc, &v| acc.checked_add(v.unsigned_abs().checked_mul(v.unsigned_abs())?))
                .is_some_and(|s| s <= r2),
        },
        Norm::Linf => match radius.floor_r() {
            None => true,
            Some(r) => p.iter().all(|v| v.unsigned_abs() <= r),
        },
    }
}

pub fn enumerate_integer_points(d: usize, radius: RadiusSpec, norm: Norm) -> Result<IntegerPointSet> {
    enumerate_integer_points_with_budget(d, radius, norm, DEFAULT_BUDGET)
}

/// All integer points of the ball, lexicographically sorted. The candidate box
/// `{-⌊R⌋..⌊R⌋}^d` must fit in `budget`.
pub fn enumerate_integer_points_with_budget(
    d: usize,
    radius: RadiusSpec,
    norm: Norm,
    budget: u64,
) -> Result<IntegerPointSet> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let (fr, fr2) = radius.require_finite("R")?;
    let side = 2 * fr + 1;
    let estimated = (side as f64).powi(d as i32);
    if estimated > budget as f64 {
        return Err(Error::BudgetExceeded { estimated, budget });
    }
    let lo = -(fr as i64);
    let hi = fr as i64;
    let mut cur = vec![lo; d];
    let mut coords = Vec::new();
    loop {
        let keep = match norm {
            Norm::Linf => true,
            Norm::L2 => cur.iter().map(|&v| (v * v) as u64).sum::<u64>() <= fr2,
        };
        if keep {
            coords.extend_from_slice(&cur);
        }
        // odometer, last coordinate fastest
        let mut k = d;
        loop {
            if k == 0 {
                return Ok(IntegerPointSet {
                    dim: d,
                    norm,
                    radius,
                    coords,
                });
            }
            k -= 1;
            if cur[k] < hi {
                cur[k] += 1;
                for c in cur.iter_mut().skip(k + 1) {
                    *c = lo;
                }
                break;
            }
        }
    }
}

pub fn count_integer_points_l2(d: usize, radius: RadiusSpec) -> Result<u128> {
    count_integer_points_l2_with_budget(d, radius, DEFAULT_BUDGET)
}

/// Counts `|B_R ∩ Z^d|` with the recursion `N(k, q) = Σ_{j² ≤ q} N(k−1, q−j²)`,
/// `N(0, q) = 1`, tabulated over the remaining squared radius `q`.
pub fn count_integer_points_l2_with_budget(d: usize, radius: RadiusSpec, budget: u64) -> Result<u128> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let (_, q_max) = radius.require_finite("R")?;
    let estimated = d as f64 * (q_max as f64 + 1.0);
    if estimated > budget as f64 {
        return Err(Error::BudgetExceeded { estimated, budget });
    }
    let q_max = q_max as usize;
    let mut prev = vec![1u128; q_max + 1];
    let mut cur = vec![0u128; q_max + 1];
    for _ in 0..d {
        for q in 0..=q_max {
            let mut total = prev[q];
            let mut j = 1usize;
            while j * j <= q {
                total = total
                    .checked_add(2 * prev[q - j * j])
                    .ok_or(Error::BudgetExceeded { estimated: f64::INFINITY, budget })?;
                j += 1;
            }
            cur[q] = total;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[q_max])
}

/// Vectors in `{−1,0,1}^d`, each with exactly `s` nonzeros and pairwise inner
/// products at most `s/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignPacking {
    dim: usize,
    support: usize,
    vectors: Vec<i8>,
    seed: Option<u64>,
}

impl SignPacking {
    pub fn new(dim: usize, support: usize, vectors: Vec<Vec<i8>>) -> Result<Self> {
        let p = SignPacking {
            dim,
            support,
            vectors: vectors.concat(),
            seed: None,
        };
        for v in &vectors {
            crate::error::ensure_dim(dim, v.len())?;
        }
        p.verify()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_size(&self) -> usize {
        self.support
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i8> {
        self.vectors.chunks_exact(self.dim)
    }

    /// Re-checks every invariant with integer arithmetic.
    pub fn verify(&self) -> Result<()> {
        if self.dim == 0 || self.support == 0 || self.support > self.dim {
            return Err(Error::Certificate(format!(
                "support size {} not in [1, {}]",
                self.support, self.dim
            )));
        }
        if !self.vectors.len().is_multiple_of(self.dim) || self.len() < 2 {
            return Err(Error::Certificate("a packing needs at least two vectors".into()));
        }
        for (i, u) in self.iter().enumerate() {
            if u.iter().any(|&v| !(-1..=1).contains(&v)) {
                return Err(Error::Certificate(format!("vector {i} has an entry outside {{-1,0,1}}")));
            }
            let nnz = u.iter().filter(|&&v| v != 0).count();
            if nnz != self.support {
                return Err(Error::Certificate(format!(
                    "vector {i} has {nnz} nonzeros, expected {}",
                    self.support
                )));
            }
        }
        let vecs: Vec<&[i8]> = self.iter().collect();
        for i in 0..vecs.len() {
            for j in i + 1..vecs.len() {
                let ip = dot_i8(vecs[i], vecs[j]);
                if 2 * ip > self.support as i64 {
                    return Err(Error::Certificate(format!(
                        "vectors {i} and {j} have inner product {ip} > s/2"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One JSON header line `{"d","s","size","seed"}` followed by CSV rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::json!({
            "d": self.dim,
            "s": self.support,
            "size": self.len(),
            "seed": self.seed,
        });
        writeln!(w, "{header}")?;
        write_header(&mut w, self.dim)?;
        for v in self.iter() {
            write_row(&mut w, v)?;
        }
        Ok(())
    }
}

fn dot_i8(a: &[i8], b: &[i8]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| x as i64 * y as i64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackingStrategy {
    /// Draw the whole batch, reject it if any pair violates separation.
    #[default]
    Batch,
    /// Draw one candidate at a time and keep it if it is compatible with the
    /// vectors already accepted. Each draw counts as an attempt.
    Greedy,
}

fn draw_sparse_sign<R: Rng + ?Sized>(rng: &mut R, d: usize, s: usize) -> Vec<i8> {
    let mut v = vec![0i8; d];
    for i in index::sample(rng, d, s) {
        v[i] = if rng.random::<bool>() { 1 } else { -1 };
    }
    v
}

/// Random sparse sign packing of `target_size` vectors (batch rejection).
pub fn sparse_sign_packing(d: usize, s: usize, target_size: usize, max_attempts: usize, seed: u64) -> Result<SignPacking> {
    sparse_sign_packing_with(d, s, target_size, max_attempts, seed, PackingStrategy::Batch)
}

pub fn sparse_sign_packing_with(
    d: usize,
    s: usize,
    target_size: usize,
    max_attempts: usize,
    seed: u64,
    strategy: PackingStrategy,
) -> Result<SignPacking> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    if s == 0 || s > d {
        return Err(Error::invalid("s", format!("must lie in [1, {d}], got {s}")));
    }
    if target_size < 2 {
        return Err(Error::invalid("target_size", "must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let compatible = |a: &[i8], b: &[i8]| 2 * dot_i8(a, b) <= s as i64;
    let failed = Error::ConstructionFailed {
        d,
        s,
        target: target_size,
        attempts: max_attempts,
    };
    let accepted: Vec<Vec<i8>> = match strategy {
        PackingStrategy::Batch => {
            let mut found = None;
            for _ in 0..max_attempts {
                let batch: Vec<Vec<i8>> = (0..target_size).map(|_| draw_sparse_sign(&mut rng, d, s)).collect();
                let ok = (0..batch.len()).all(|i| (i + 1..batch.len()).all(|j| compatible(&batch[i], &batch[j])));
                if ok {
                    found = Some(batch);
                    break;
                }
            }
            found.ok_or(failed)?
        }
        PackingStrategy::Greedy => {
            let mut acc: Vec<Vec<i8>> = Vec::with_capacity(target_size);
            for _ in 0..max_attempts {
                let cand = draw_sparse_sign(&mut rng, d, s);
                if acc.iter().all(|u| compatible(u, &cand)) {
                    acc.push(cand);
                    if acc.len() == target_size {
                        break;
                    }
                }
            }
            if acc.len() < target_size {
                return Err(failed);
            }
            acc
        }
    };
    let mut packing = SignPacking::new(d, s, accepted)?;
    packing.seed = Some(seed);
    Ok(packing)
}

/// Integer points of common norm `r ∈ [R/2, R]` with pairwise inner products at
/// most `r²/2` (hence pairwise distance at least `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPacking {
    dim: usize,
    radius_sq: u64,
    centers: Vec<i64>,
    enclosing: RadiusSpec,
    support: usize,
    seed: Option<u64>,
}

impl ScaledPacking {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The common squared norm `r²`, always an integer.
    pub fn radius_sq(&self) -> u64 {
        self.radius_sq
    }

    pub fn radius(&self) -> f64 {
        (self.radius_sq as f64).sqrt()
    }

    pub fn enclosing_radius(&self) -> RadiusSpec {
        self.enclosing
    }

    /// Support size `s = min{d, ⌊R²⌋}` of the underlying sign packing.
    pub fn support_size(&self) -> usize {
        self.support
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i64> {
        self.centers.chunks_exact(self.dim)
    }

    pub fn center(&self, i: usize) -> &[i64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn verify(&self) -> Result<()> {
        let r2 = self.radius_sq;
        if self.len() < 2 {
            return Err(Error::Certificate("a packing needs at least two centers".into()));
        }
        if !self.enclosing.sq_ge(r2) {
            return Err(Error::Certificate(format!("r² = {r2} exceeds R²")));
        }
        if !self.enclosing.sq_le(4 * r2) {
            return Err(Error::Certificate(format!("r² = {r2} is below R²/4")));
        }
        let pts: Vec<&[i64]> = self.iter().collect();
        for (i, w) in pts.iter().enumerate() {
            let n2: i128 = w.iter().map(|&v| v as i128 * v as i128).sum();
            if n2 != r2 as i128 {
                return Err(Error::Certificate(format!("center {i} has squared norm {n2}, expected {r2}")));
            }
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let ip: i128 = pts[i].iter().zip(pts[j]).map(|(&a, &b)| a as i128 * b as i128).sum();
                if 2 * ip > r2 as i128 {
                    return Err(Error::Certificate(format!(
                        "centers {i} and {j} have inner product {ip} > r²/2"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One JSON header line `{"d","r","size","seed"}` followed by CSV rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::json!({
            "d": self.dim,
            "r": self.radius(),
            "size": self.len(),
            "seed": self.seed,
        });
        writeln!(w, "{header}")?;
        write_header(&mut w, self.dim)?;
        for c in self.iter() {
            write_row(&mut w, c)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingOptions {
    pub target_size: Option<usize>,
    pub max_attempts: usize,
    pub strategy: PackingStrategy,
}

impl Default for PackingOptions {
    fn default() -> Self {
        PackingOptions {
            target_size: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            strategy: PackingStrategy::Batch,
        }
    }
}

/// Integer packing of the ℓ2 ball with the default target size `max(2, d)`.
pub fn l2_integer_packing(d: usize, radius: RadiusSpec, seed: u64) -> Result<ScaledPacking> {
    l2_integer_packing_with(d, radius, seed, PackingOptions::default())
}

pub fn l2_integer_packing_with(d: usize, radius: RadiusSpec, seed: u64, opts: PackingOptions) -> Result<ScaledPacking> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let (_, fr2) = radius.require_finite("R")?;
    if fr2 == 0 {
        return Err(Error::invalid("R", "must be at least 1"));
    }
    let s = (d as u64).min(fr2) as usize;
    let target = opts.target_size.unwrap_or(d.max(2));
    let signs = sparse_sign_packing_with(d, s, target, opts.max_attempts, seed, opts.strategy)?;
    let (scale, radius_sq) = if s as u64 == fr2 {
        (1i64, s as u64)
    } else {
        // s = d < ⌊R²⌋: q = ⌊R/√d⌋ is the largest q with q²d ≤ ⌊R²⌋
        let q = isqrt(fr2 / d as u64);
        (q as i64, q * q * d as u64)
    };
    let packing = ScaledPacking {
        dim: d,
        radius_sq,
        centers: signs.vectors.iter().map(|&v| v as i64 * scale).collect(),
        enclosing: radius,
        support: s,
        seed: Some(seed),
    };
    packing.verify()?;
    Ok(packing)
}

/// Coordinatewise nearest-integer rounding into the box `{−⌊R⌋..⌊R⌋}^d`.
///
/// Half-ties round toward zero. Coordinates equal to `±⌊R⌋` are kept.
pub fn box_rounding(u: &[f64], floor_r: Option<u64>) -> Result<Vec<i64>> {
    let bound = floor_r.map(|f| f as f64);
    u.iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::invalid("u", "coordinates must be finite"));
            }
            if let Some(b) = bound {
                if v.abs() > b {
                    return Err(Error::Infeasible);
                }
            }
            let a = v.abs();
            let f = a.floor();
            let q = if a - f > 0.5 { f + 1.0 } else { f };
            Ok(if v < 0.0 { -(q as i64) } else { q as i64 })
        })
        .collect()
}

/// `2·√(d·min{κ, ⌊R⌋²} + s/μ)`.
pub fn localization_radius(d: usize, kappa: f64, floor_r: Option<u64>, s: f64, mu: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    if !(kappa >= 1.0) {
        return Err(Error::invalid("kappa", "must be at least 1"));
    }
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive"));
    }
    if !(s >= 0.0) {
        return Err(Error::invalid("s", "must be nonnegative"));
    }
    let m = match floor_r {
        Some(f) => kappa.min((f as f64) * (f as f64)),
        None => kappa,
    };
    Ok(2.0 * (d as f64 * m + s / mu).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64) -> RadiusSpec {
        RadiusSpec::finite(v).unwrap()
    }

    #[test]
    fn radius_floors_are_exact() {
        assert_eq!(r(2.0).floor_r2(), Some(4));
        assert_eq!(r(1.8).floor_r2(), Some(3));
        assert_eq!(r(0.5).floor_r2(), Some(0));
        assert_eq!(r(2.5).floor_r(), Some(2));
        let q: RadiusSpec = "3/2".parse().unwrap();
        assert_eq!((q.floor_r(), q.floor_r2()), (Some(1), Some(2)));
        let dec: RadiusSpec = "1.5".parse().unwrap();
        assert_eq!(dec, q);
        assert!(r(2.0).sq_le(4) && r(2.0).sq_ge(4));
        assert!(!r(1.5).sq_le(2));
        assert!("inf".parse::<RadiusSpec>().unwrap().floor_r().is_none());
        assert!(RadiusSpec::finite(0.0).is_err());
        assert!(RadiusSpec::finite(-1.0).is_err());
    }

    #[test]
    fn radius_json_roundtrip() {
        let inf = RadiusSpec::infinite();
        assert_eq!(serde_json::to_string(&inf).unwrap(), "\"inf\"");
        let back: RadiusSpec = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, inf);
        let v: RadiusSpec = serde_json::from_str("2.5").unwrap();
        assert_eq!(v.floor_r2(), Some(6));
    }

    #[test]
    fn h2_examples() {
        assert_eq!(h2(5, r(0.5)).unwrap(), 0.0);
        assert_eq!(h2(4, r(2.0)).unwrap(), 4.0);
        let v = h2(8, r(1.5)).unwrap();
        assert!((v - 2.0 * (4.0f64 * std::f64::consts::E).ln()).abs() < 1e-12);
        assert!((v - 4.772588722239781).abs() < 1e-12);
        assert!(h2(0, r(1.0)).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let s = enumerate_integer_points(2, r(1.0), Norm::L2).unwrap();
        assert_eq!(s.to_vecs(), vec![vec![-1, 0], vec![0, -1], vec![0, 0], vec![0, 1], vec![1, 0]]);
        let s = enumerate_integer_points(1, r(2.5), Norm::Linf).unwrap();
        assert_eq!(s.to_vecs(), vec![vec![-2], vec![-1], vec![0], vec![1], vec![2]]);
        let s = enumerate_integer_points(3, r(1.8), Norm::L2).unwrap();
        assert_eq!(s.len(), 27);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let err = enumerate_integer_points(30, r(3.0), Norm::L2).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(enumerate_integer_points_with_budget(2, r(1.0), Norm::L2, 8).is_err());
        assert!(enumerate_integer_points_with_budget(2, r(1.0), Norm::L2, 9).is_ok());
        assert!(enumerate_integer_points(2, RadiusSpec::infinite(), Norm::L2).is_err());
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_integer_points_l2(2, r(2.0)).unwrap(), 13);
        assert_eq!(count_integer_points_l2(7, r(0.9)).unwrap(), 1);
        assert_eq!(count_integer_points_l2(2, r(1.0)).unwrap(), 5);
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_bound(1, 1.0, 2.0).unwrap(), 2.0);
        assert_eq!(covering_bound(3, 1.0, 1.0).unwrap(), 27.0);
        assert_eq!(covering_bound(2, 5.0, 1.0).unwrap(), 121.0);
        assert!(covering_bound(2, 5.0, 0.0).is_err());
    }

    #[test]
    fn hadamard_rows_form_a_packing() {
        let rows = vec![vec![1, 1, 1, 1], vec![1, 1, -1, -1], vec![1, -1, 1, -1], vec![1, -1, -1, 1]];
        let p = SignPacking::new(4, 4, rows).unwrap();
        assert_eq!(p.len(), 4);
        let bad = SignPacking::new(4, 4, vec![vec![1, 1, 1, -1], vec![1, 1, 1, -1]]);
        assert!(matches!(bad, Err(Error::Certificate(_))));
        assert!(SignPacking::new(4, 4, vec![vec![1, 1, 1, 1]]).is_err());
        assert!(SignPacking::new(4, 3, vec![vec![1, 1, 1, 1], vec![1, -1, -1, 0]]).is_err());
    }

    #[test]
    fn sign_packing_small_cases() {
        let p = sparse_sign_packing(4, 4, 4, 1000, 7).unwrap();
        assert_eq!(p.len(), 4);
        let p = sparse_sign_packing(1, 1, 2, 1000, 3).unwrap();
        let mut v: Vec<i8> = p.iter().map(|u| u[0]).collect();
        v.sort();
        assert_eq!(v, vec![-1, 1]);
        // only two candidates exist in dimension one
        assert!(matches!(sparse_sign_packing(1, 1, 3, 200, 3), Err(Error::ConstructionFailed { .. })));
        assert!(sparse_sign_packing(3, 4, 2, 10, 0).is_err());
        let g = sparse_sign_packing_with(16, 4, 40, 100_000, 5, PackingStrategy::Greedy).unwrap();
        assert_eq!(g.len(), 40);
    }

    #[test]
    fn sign_packing_is_seed_deterministic() {
        let a = sparse_sign_packing(10, 3, 6, 1000, 11).unwrap();
        let b = sparse_sign_packing(10, 3, 6, 1000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn l2_packing_examples() {
        let p = l2_integer_packing(4, r(2.0), 1).unwrap();
        assert_eq!(p.radius_sq(), 4);
        assert_eq!(p.support_size(), 4);

        let p = l2_integer_packing(2, r(10.0), 1).unwrap();
        assert_eq!(p.radius_sq(), 98);
        assert!((p.radius() - 7.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(p.iter().all(|c| c.iter().all(|v| v.abs() == 7)));

        let p = l2_integer_packing(1, r(1.0), 1).unwrap();
        let mut c: Vec<i64> = p.iter().map(|w| w[0]).collect();
        c.sort();
        assert_eq!(c, vec![-1, 1]);

        assert!(l2_integer_packing(3, r(0.9), 1).is_err());
    }

    #[test]
    fn box_rounding_examples() {
        let q = box_rounding(&[0.4, -2.0, 1.5], Some(2)).unwrap();
        assert_eq!(q, vec![0, -2, 1]);
        let err: f64 = [0.4f64, 0.0, 0.5].iter().map(|v| v * v).sum();
        assert!(err.sqrt() <= 3f64.sqrt() / 2.0);
        assert_eq!(box_rounding(&[3.0, 3.0], Some(3)).unwrap(), vec![3, 3]);
        assert_eq!(box_rounding(&[0.2], None).unwrap(), vec![0]);
        assert_eq!(box_rounding(&[-0.5, -1.5, 2.5], None).unwrap(), vec![0, -1, 2]);
        assert!(matches!(box_rounding(&[2.1], Some(2)), Err(Error::Infeasible)));
    }

    #[test]
    fn localization_examples() {
        assert_eq!(localization_radius(4, 64.0, None, 0.0, 1.0).unwrap(), 32.0);
        assert_eq!(localization_radius(1, 1.0, Some(1), 0.0, 1.0).unwrap(), 2.0);
        let v = localization_radius(2, 100.0, Some(3), 2.0, 0.5).unwrap();
        assert!((v - 2.0 * 22f64.sqrt()).abs() < 1e-12);
        assert!((v - 9.3808).abs() < 1e-4);
        assert!(localization_radius(2, 0.5, None, 0.0, 1.0).is_err());
    }

    #[test]
    fn csv_exports() {
        let s = enumerate_integer_points(2, r(1.0), Norm::L2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x1,x2\n-1,0\n0,-1\n0,0\n0,1\n1,0\n");

        let p = l2_integer_packing(4, r(2.0), 9).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["d"], 4);
        assert_eq!(header["r"], 2.0);
        assert_eq!(header["size"], 4);
        assert_eq!(header["seed"], 9);
        assert_eq!(text.lines().count(), 2 + 4);
    }

    #[test]
    fn point_set_canonical_form() {
        let rad = r(2.0);
        let s = IntegerPointSet::from_points(2, Norm::L2, rad, vec![vec![1, 1], vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(s.to_vecs(), vec![vec![0, 0], vec![1, 1]]);
        assert!(s.contains(&[1, 1]));
        assert!(IntegerPointSet::from_points(2, Norm::L2, rad, vec![vec![2, 1]]).is_err());
    }
}
