//! Seeded catalog of saddle polynomials.
//!
//! Every family is a saddle by construction. Entries are also gated by
//! [`saddle_check`] on the catalog region, and by a clean umbilic
//! classification there (harmonic sums can have isolated umbilics away from
//! the origin, which would leave the local analysis ambiguous):
//!
//! * harmonic `Re(sum c_k z^k)`: `det D^2 h = -|f''|^2`;
//! * separable `f(x) + g(y)` with `f'' >= 0 >= g''`, then rotated;
//! * segment forms `x_theta^n (c0 + a y_theta + b x_theta)`:
//!   `det = -n^2 a^2 x_theta^(2n-2)`;
//! * products of linear-form powers `l1^a l2^b`: `det = ab(1-a-b) l1^(2a-2) l2^(2b-2) det(A)^2`;
//! * flat `a l^n + b l^(n+1)`: `det = 0`;
//! * random invertible linear compositions of the above.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::jet::{hessian_scale, saddle_check, DiffPoly, Disk};
use crate::poly::Poly2;
use crate::umbilic::{umbilic_locus, DEFAULT_ZERO_TOL};

pub const CATALOG_RADIUS: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Harmonic,
    Separable,
    SegmentForm,
    LinearProduct,
    Flat,
    Composition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: usize,
    pub family: Family,
    pub poly: Poly2,
}

pub fn catalog_region() -> Disk {
    Disk::centered(CATALOG_RADIUS)
}

/// `(Re z^k, Im z^k)` as polynomials.
pub fn complex_power(k: u32) -> (Poly2, Poly2) {
    let mut re = Vec::new();
    let mut im = Vec::new();
    let mut binom = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom = binom * (k - j + 1) as f64 / j as f64;
        }
        // i^j
        let (r, i) = match j % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        if r != 0.0 {
            re.push((k - j, j, r * binom));
        }
        if i != 0.0 {
            im.push((k - j, j, i * binom));
        }
    }
    (Poly2::from_terms(re), Poly2::from_terms(im))
}

fn linear(a: f64, b: f64) -> Poly2 {
    Poly2::from_terms([(1, 0, a), (0, 1, b)])
}

fn rotate(p: &Poly2, angle: f64) -> Poly2 {
    p.rotated(&angle.cos(), &angle.sin())
}

fn coeff(rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.gen_range(0.3..2.0);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

fn harmonic(rng: &mut ChaCha8Rng) -> Poly2 {
    let lo = rng.gen_range(2..=4u32);
    let hi = rng.gen_range(lo..=6u32);
    let mut h = Poly2::zero();
    for k in lo..=hi {
        if k > lo && rng.gen_bool(0.4) {
            continue;
        }
        let (re, im) = complex_power(k);
        let (a, b) = (coeff(rng), coeff(rng));
        h = &h + &(&re.scale(&a) - &im.scale(&b));
    }
    h
}

fn separable(rng: &mut ChaCha8Rng) -> Poly2 {
    let mut terms = Vec::new();
    let start = rng.gen_range(1..=2u32);
    for k in start..=3 {
        if k > start && rng.gen_bool(0.5) {
            continue;
        }
        terms.push((2 * k, 0, rng.gen_range(0.3..2.0)));
    }
    let start = rng.gen_range(1..=2u32);
    for k in start..=3 {
        if k > start && rng.gen_bool(0.5) {
            continue;
        }
        terms.push((0, 2 * k, -rng.gen_range(0.3..2.0)));
    }
    rotate(&Poly2::from_terms(terms), rng.gen_range(0.0..std::f64::consts::PI))
}

fn segment_form(rng: &mut ChaCha8Rng) -> Poly2 {
    let n = rng.gen_range(3..=5u32);
    let c0 = coeff(rng);
    let a = coeff(rng);
    let b = rng.gen_range(-1.0..1.0);
    let local = &Poly2::monomial(n, 0, 1.0) * &Poly2::from_terms([(0, 0, c0), (0, 1, a), (1, 0, b)]);
    // The segment direction is drawn from a few exact angles and some
    // random ones.
    let theta = match rng.gen_range(0..4) {
        0 => 0.0,
        1 => std::f64::consts::FRAC_PI_2,
        _ => rng.gen_range(0.0..std::f64::consts::PI),
    };
    // rotated(c, -s) maps (u, v) back to (x, y) coordinates.
    local.rotated(&theta.cos(), &-theta.sin())
}

fn linear_product(rng: &mut ChaCha8Rng) -> Poly2 {
    loop {
        let (ea, eb) = (rng.gen_range(1..=4u32), rng.gen_range(1..=4u32));
        if ea + eb < 3 {
            continue;
        }
        let t1 = rng.gen_range(0.0..std::f64::consts::PI);
        let t2 = t1 + rng.gen_range(0.5..std::f64::consts::PI - 0.5);
        let l1 = linear(t1.cos(), t1.sin());
        let l2 = linear(t2.cos(), t2.sin());
        return (&l1.pow(ea) * &l2.pow(eb)).scale(&coeff(rng));
    }
}

fn flat(rng: &mut ChaCha8Rng) -> Poly2 {
    let n = rng.gen_range(3..=5u32);
    let a = coeff(rng);
    // Keep the second zero line of F'' outside the region.
    let bmax = (a.abs() * (n - 1) as f64 / ((n + 1) as f64 * 2.5 * CATALOG_RADIUS)).min(1.0);
    let b = rng.gen_range(-bmax..bmax) * 0.9;
    let t = rng.gen_range(0.0..std::f64::consts::PI);
    let l = linear(t.cos(), t.sin());
    &l.pow(n).scale(&a) + &l.pow(n + 1).scale(&b)
}

fn composition(rng: &mut ChaCha8Rng) -> Poly2 {
    let base = match rng.gen_range(0..3) {
        0 => harmonic(rng),
        1 => segment_form(rng),
        _ => linear_product(rng),
    };
    loop {
        let m = [
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-1.2..1.2),
        ];
        let det: f64 = m[0] * m[3] - m[1] * m[2];
        if det.abs() > 0.3 {
            return base.compose_linear(&m[0], &m[1], &m[2], &m[3]);
        }
    }
}

/// Relative saddle gate: `max det D^2 h <= 1e-10 * (max |D^2 h|)^2`.
pub fn passes_saddle_gate(h: &Poly2, region: &Disk) -> bool {
    let scale = hessian_scale(&DiffPoly::new(h), region, 41);
    scale > 0.0 && saddle_check(h, region, 41, 1e-10 * scale * scale).pass
}

/// Generates `count` gated entries from `seed`, cycling through the
/// families.
pub fn generate_catalog(seed: u64, count: usize) -> Vec<CatalogEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = catalog_region();
    let families = [
        Family::Harmonic,
        Family::Separable,
        Family::SegmentForm,
        Family::LinearProduct,
        Family::Flat,
        Family::Composition,
    ];
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        let family = families[k % families.len()];
        k += 1;
        let poly = match family {
            Family::Harmonic => harmonic(&mut rng),
            Family::Separable => separable(&mut rng),
            Family::SegmentForm => segment_form(&mut rng),
            Family::LinearProduct => linear_product(&mut rng),
            Family::Flat => flat(&mut rng),
            Family::Composition => composition(&mut rng),
        };
        if passes_saddle_gate(&poly, &region) && umbilic_locus(&poly, &region, 41, DEFAULT_ZERO_TOL).is_ok() {
            out.push(CatalogEntry { id: out.len(), family, poly });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_powers() {
        let (re, im) = complex_power(3);
        assert_eq!(re, Poly2::from_terms([(3, 0, 1.0), (1, 2, -3.0)]));
        assert_eq!(im, Poly2::from_terms([(2, 1, 3.0), (0, 3, -1.0)]));
    }

    #[test]
    fn catalog_is_deterministic_and_gated() {
        let a = generate_catalog(7, 60);
        let b = generate_catalog(7, 60);
        assert_eq!(a, b);
        assert_ne!(a, generate_catalog(8, 60));
        assert!(a.iter().all(|e| passes_saddle_gate(&e.poly, &catalog_region())));
        for f in [Family::Harmonic, Family::Flat, Family::Composition] {
            assert!(a.iter().any(|e| e.family == f));
        }
    }

    #[test]
    fn every_family_passes_the_gate_by_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let region = catalog_region();
        for _ in 0..30 {
            for h in [
                harmonic(&mut rng),
                separable(&mut rng),
                segment_form(&mut rng),
                linear_product(&mut rng),
                flat(&mut rng),
                composition(&mut rng),
            ] {
                assert!(passes_saddle_gate(&h, &region), "{h:?}");
            }
        }
    }
}
