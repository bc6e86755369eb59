//! Jacobi elliptic functions and the integrable kernel used by the ring
//! pattern variational functionals.
//!
//! All functions are parametrised by the modulus `q ∈ (0, 1]` (modulus
//! convention, not the parameter `m = q²`).  The degenerate case `q = 1`
//! (where `sn = tanh`, `cn = dn = sech`, and the real quarter period is
//! infinite) is handled explicitly so callers can study the limit family.
//!
//! The kernel is
//!
//! ```text
//! g(x) = m·π + arctan( (1+q)·sn(x/2) / (cn(x/2)·dn(x/2)) ),   m = ⌊(x+2K)/(4K)⌋,
//! ```
//!
//! the continuous odd branch with `g(x + 4K) = g(x) + π`, together with its
//! exact derivative `g'(x) = (dn(x) + q·cn(x)) / 2` and its antiderivative
//! `F(x) = ∫₀ˣ g`, which is even.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error("modulus q must lie in (0, 1], got {0}")]
    ModulusOutOfRange(f64),
}

/// Values of the three Jacobi elliptic functions at one argument.
#[derive(Clone, Copy, Debug)]
pub struct JacobiTriple {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// An elliptic modulus together with its cached quarter periods.
#[derive(Clone, Copy, Debug)]
pub struct Modulus {
    q: f64,
    /// Real quarter period K(q); `f64::INFINITY` when q = 1.
    big_k: f64,
    /// Imaginary quarter period K'(q) = K(√(1-q²)); π/2 when q = 1.
    big_k_prime: f64,
}

/// Arithmetic–geometric mean of (1, x) for x ∈ (0, 1].
fn agm(x: f64) -> f64 {
    let mut a = 1.0_f64;
    let mut b = x;
    for _ in 0..64 {
        if (a - b).abs() <= 1e-15 * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
    }
    0.5 * (a + b)
}

impl Modulus {
    pub fn new(q: f64) -> Result<Self, EllipticError> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(EllipticError::ModulusOutOfRange(q));
        }
        if q == 1.0 {
            return Ok(Modulus {
                q,
                big_k: f64::INFINITY,
                big_k_prime: std::f64::consts::FRAC_PI_2,
            });
        }
        // Complementary modulus via (1-q)(1+q) to keep precision as q → 1.
        let q_prime = ((1.0 - q) * (1.0 + q)).sqrt();
        let big_k = std::f64::consts::FRAC_PI_2 / agm(q_prime);
        let big_k_prime = std::f64::consts::FRAC_PI_2 / agm(q);
        Ok(Modulus {
            q,
            big_k,
            big_k_prime,
        })
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Real quarter period K.
    #[inline]
    pub fn quarter_period(&self) -> f64 {
        self.big_k
    }

    /// Imaginary quarter period K'.
    #[inline]
    pub fn quarter_period_prime(&self) -> f64 {
        self.big_k_prime
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.q == 1.0
    }

    /// Jacobi sn, cn, dn at `u` via the descending Landen (AGM) method.
    ///
    /// `dn` is recovered from the identity `dn² = q'² + q²·cn²` (a sum of
    /// non-negative terms), which stays accurate even when q is close to 1
    /// and `dn` is close to its minimum q'.
    pub fn jacobi(&self, u: f64) -> JacobiTriple {
        if self.q == 1.0 {
            let sech = 1.0 / u.cosh();
            return JacobiTriple {
                sn: u.tanh(),
                cn: sech,
                dn: sech,
            };
        }
        if u == 0.0 {
            return JacobiTriple {
                sn: 0.0,
                cn: 1.0,
                dn: 1.0,
            };
        }
        let k = self.q;
        let kp = ((1.0 - k) * (1.0 + k)).sqrt();
        let mut a = [0.0_f64; 32];
        let mut c = [0.0_f64; 32];
        a[0] = 1.0;
        c[0] = k;
        let mut b = kp;
        let mut n = 0;
        while n < 31 {
            if c[n].abs() <= 1e-16 * a[n] {
                break;
            }
            let an = 0.5 * (a[n] + b);
            let cn1 = 0.5 * (a[n] - b);
            b = (a[n] * b).sqrt();
            n += 1;
            a[n] = an;
            c[n] = cn1;
        }
        // Backward amplitude recurrence (A&S 16.4).
        let mut phi = (1u64 << n) as f64 * a[n] * u;
        for i in (1..=n).rev() {
            let s = (c[i] / a[i] * phi.sin()).clamp(-1.0, 1.0);
            phi = 0.5 * (phi + s.asin());
        }
        let sn = phi.sin();
        let cn = phi.cos();
        let dn = (kp * kp + (k * cn) * (k * cn)).sqrt();
        JacobiTriple { sn, cn, dn }
    }

    /// The kernel g(x): odd, increasing, with g(2K) = π/2 and
    /// g(x + 4K) = g(x) + π.  For q = 1 it degenerates to arctan(sinh x).
    pub fn kernel_g(&self, x: f64) -> f64 {
        if self.q == 1.0 {
            return x.sinh().atan();
        }
        let four_k = 4.0 * self.big_k;
        let m = ((x + 2.0 * self.big_k) / four_k).floor();
        let y = x - m * four_k; // y ∈ [-2K, 2K)
        let j = self.jacobi(0.5 * y);
        // On the reduced interval cn(y/2) ≥ 0; guard the boundary where it
        // vanishes (y = ±2K), where the arctan limit is sign(sn)·π/2.
        if j.cn.abs() < 1e-12 {
            return m * std::f64::consts::PI
                + j.sn.signum() * std::f64::consts::FRAC_PI_2;
        }
        m * std::f64::consts::PI + ((1.0 + self.q) * j.sn / (j.cn * j.dn)).atan()
    }

    /// Exact derivative g'(x) = (dn(x) + q·cn(x)) / 2, strictly positive for
    /// q < 1 (since dn > |cn| there) and equal to sech(x) at q = 1.
    pub fn kernel_g_prime(&self, x: f64) -> f64 {
        let j = self.jacobi(x);
        0.5 * (j.dn + self.q * j.cn)
    }

    /// Antiderivative F(x) = ∫₀ˣ g(t) dt (even in x).
    ///
    /// Values come from a cached cumulative Gauss–Legendre table over one
    /// quasi-period [0, 4K], extended by F(x + 4K) = F(x) + F(4K) + πx.
    pub fn kernel_g_integral(&self, x: f64) -> f64 {
        let table = f_table(self);
        let ax = x.abs();
        if self.q == 1.0 {
            if ax <= table.upper {
                return table.eval(self, ax);
            }
            // g(t) is within 3e-14 of π/2 beyond the table.
            return table.f_upper + std::f64::consts::FRAC_PI_2 * (ax - table.upper);
        }
        let n = (ax / table.upper).floor();
        let rem = ax - n * table.upper;
        let base = table.eval(self, rem.clamp(0.0, table.upper));
        if n == 0.0 {
            return base;
        }
        base + n * table.f_upper
            + std::f64::consts::PI * (n * rem + table.upper * n * (n - 1.0) * 0.5)
    }
}

/// 16-point Gauss–Legendre nodes and weights on [-1, 1], quoted beyond f64
/// precision so the nearest representable value is unambiguous.
#[allow(clippy::excessive_precision)]
const GL16: [(f64, f64); 16] = [
    (-9.89400934991649939e-01, 2.71524594117540374e-02),
    (-9.44575023073232600e-01, 6.22535239386477063e-02),
    (-8.65631202387831755e-01, 9.51585116824925914e-02),
    (-7.55404408355002999e-01, 1.24628971255534030e-01),
    (-6.17876244402643771e-01, 1.49595988816576764e-01),
    (-4.58016777657227370e-01, 1.69156519395002619e-01),
    (-2.81603550779258915e-01, 1.82603415044923612e-01),
    (-9.50125098376374544e-02, 1.89450610455068585e-01),
    (9.50125098376374544e-02, 1.89450610455068585e-01),
    (2.81603550779258915e-01, 1.82603415044923612e-01),
    (4.58016777657227370e-01, 1.69156519395002619e-01),
    (6.17876244402643771e-01, 1.49595988816576764e-01),
    (7.55404408355002999e-01, 1.24628971255534030e-01),
    (8.65631202387831755e-01, 9.51585116824925914e-02),
    (9.44575023073232600e-01, 6.22535239386477063e-02),
    (9.89400934991649939e-01, 2.71524594117540374e-02),
];

fn gl16_integrate(modulus: &Modulus, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (node, weight) in GL16 {
        acc += weight * modulus.kernel_g(mid + half * node);
    }
    acc * half
}

struct FTable {
    upper: f64,
    panel_width: f64,
    /// prefix[i] = F(i · panel_width); prefix.len() = n_panels + 1.
    prefix: Vec<f64>,
    f_upper: f64,
}

impl FTable {
    fn build(modulus: &Modulus) -> FTable {
        let upper = if modulus.is_degenerate() {
            32.0
        } else {
            4.0 * modulus.quarter_period()
        };
        let n_panels = ((upper / 0.25).ceil() as usize).max(16);
        let panel_width = upper / n_panels as f64;
        let mut prefix = Vec::with_capacity(n_panels + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..n_panels {
            let lo = i as f64 * panel_width;
            acc += gl16_integrate(modulus, lo, lo + panel_width);
            prefix.push(acc);
        }
        FTable {
            upper,
            panel_width,
            prefix,
            f_upper: acc,
        }
    }

    /// F(x) for x ∈ [0, upper].
    fn eval(&self, modulus: &Modulus, x: f64) -> f64 {
        let idx = ((x / self.panel_width) as usize).min(self.prefix.len() - 2);
        let lo = idx as f64 * self.panel_width;
        self.prefix[idx] + gl16_integrate(modulus, lo, x)
    }
}

fn f_table(modulus: &Modulus) -> Arc<FTable> {
    static TABLES: OnceLock<Mutex<HashMap<u64, Arc<FTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let key = modulus.q().to_bits();
    let mut guard = tables.lock().expect("elliptic table cache poisoned");
    guard
        .entry(key)
        .or_insert_with(|| Arc::new(FTable::build(modulus)))
        .clone()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    // Reference values computed independently with 40-digit arithmetic.
    const K_Q05: f64 = 1.685750354812596042871;
    const KP_Q05: f64 = 2.156515647499643235439;
    const K_Q09: f64 = 2.280549138422770204614;
    const KP_Q09: f64 = 1.654616667522526934419;
    const K_Q099: f64 = 3.356600523361192376033;
    const SN_X03_Q05: f64 = 0.2944655515495562447104;
    const CN_X03_Q05: f64 = 0.9556620945452506718302;
    const DN_X03_Q05: f64 = 0.9891018702528339211453;
    const SN_X11_Q09: f64 = 0.8194071771803209883736;
    const CN_X11_Q09: f64 = 0.5732118962350467887342;
    const DN_X11_Q09: f64 = 0.6753837584426769571409;
    const SN_X25_Q099: f64 = 0.9907932090989137628764;
    const CN_X25_Q099: f64 = 0.1353839606581080561094;
    const DN_X25_Q099: f64 = 0.1945869300572034168338;
    const SN_X37_Q09: f64 = 0.7088257855273644465378;
    const CN_X37_Q09: f64 = -0.7053835876822728706756;
    const DN_X37_Q09: f64 = 0.770083414101957489167;
    const G_X05_Q09: f64 = 0.458130313214716555649;
    const G_X20_Q09: f64 = 1.275738379129980029808;
    const G_2KPLUS03_Q09: f64 = 1.58599963919570976024;
    const G_35K_Q09: f64 = 2.223114838984633147015;
    const F_X10_Q09: f64 = 0.4438711256622845364736;
    const F_2K_Q09: f64 = 5.28962677021469636202;
    const F_37K_Q09: f64 = 12.39478272845160006169;
    const F_X15_Q05: f64 = 0.777706182284689219961;
    const G_X08_Q1: f64 = 0.7262048227415288366218;
    const F_X08_Q1: f64 = 0.3045348297264347215119;

    #[test]
    fn quarter_periods_match_reference() {
        let m05 = Modulus::new(0.5).unwrap();
        assert_abs_diff_eq!(m05.quarter_period(), K_Q05, epsilon = 1e-14);
        assert_abs_diff_eq!(m05.quarter_period_prime(), KP_Q05, epsilon = 1e-14);
        let m09 = Modulus::new(0.9).unwrap();
        assert_abs_diff_eq!(m09.quarter_period(), K_Q09, epsilon = 1e-14);
        assert_abs_diff_eq!(m09.quarter_period_prime(), KP_Q09, epsilon = 1e-14);
        let m099 = Modulus::new(0.99).unwrap();
        assert_abs_diff_eq!(m099.quarter_period(), K_Q099, epsilon = 1e-13);
        let m1 = Modulus::new(1.0).unwrap();
        assert!(m1.quarter_period().is_infinite());
        assert_abs_diff_eq!(m1.quarter_period_prime(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn modulus_domain_is_enforced() {
        assert!(Modulus::new(0.0).is_err());
        assert!(Modulus::new(-0.3).is_err());
        assert!(Modulus::new(1.0 + 1e-12).is_err());
        assert!(Modulus::new(f64::NAN).is_err());
    }

    #[test]
    fn jacobi_matches_reference_values() {
        let m = Modulus::new(0.5).unwrap();
        let j = m.jacobi(0.3);
        assert_abs_diff_eq!(j.sn, SN_X03_Q05, epsilon = 1e-14);
        assert_abs_diff_eq!(j.cn, CN_X03_Q05, epsilon = 1e-14);
        assert_abs_diff_eq!(j.dn, DN_X03_Q05, epsilon = 1e-14);

        let m = Modulus::new(0.9).unwrap();
        let j = m.jacobi(1.1);
        assert_abs_diff_eq!(j.sn, SN_X11_Q09, epsilon = 1e-14);
        assert_abs_diff_eq!(j.cn, CN_X11_Q09, epsilon = 1e-14);
        assert_abs_diff_eq!(j.dn, DN_X11_Q09, epsilon = 1e-14);
        // Past the quarter period, where cn changes sign.
        let j = m.jacobi(3.7);
        assert_abs_diff_eq!(j.sn, SN_X37_Q09, epsilon = 1e-13);
        assert_abs_diff_eq!(j.cn, CN_X37_Q09, epsilon = 1e-13);
        assert_abs_diff_eq!(j.dn, DN_X37_Q09, epsilon = 1e-13);

        let m = Modulus::new(0.99).unwrap();
        let j = m.jacobi(2.5);
        assert_abs_diff_eq!(j.sn, SN_X25_Q099, epsilon = 1e-13);
        assert_abs_diff_eq!(j.cn, CN_X25_Q099, epsilon = 1e-13);
        assert_abs_diff_eq!(j.dn, DN_X25_Q099, epsilon = 1e-13);
    }

    #[test]
    fn jacobi_identities_hold() {
        for q in [0.3, 0.5, 0.9, 0.99, 0.999999] {
            let m = Modulus::new(q).unwrap();
            for x in [-3.1, -0.7, 0.0, 0.4, 1.3, 2.9, 5.5] {
                let j = m.jacobi(x);
                assert_abs_diff_eq!(j.sn * j.sn + j.cn * j.cn, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(
                    j.dn * j.dn + q * q * j.sn * j.sn,
                    1.0,
                    epsilon = 1e-12
                );
                assert!(j.dn >= j.cn.abs() - 1e-12);
            }
            // Values at the quarter period: sn = 1, cn = 0, dn = q'.
            let k = m.quarter_period();
            let j = m.jacobi(k);
            assert_abs_diff_eq!(j.sn, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(j.cn, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(j.dn, ((1.0 - q) * (1.0 + q)).sqrt(), epsilon = 1e-12);
            // Full period 4K.
            let j0 = m.jacobi(0.7);
            let j4 = m.jacobi(0.7 + 4.0 * k);
            assert_abs_diff_eq!(j0.sn, j4.sn, epsilon = 1e-10);
            assert_abs_diff_eq!(j0.cn, j4.cn, epsilon = 1e-10);
            assert_abs_diff_eq!(j0.dn, j4.dn, epsilon = 1e-10);
        }
    }

    #[test]
    fn jacobi_degenerates_to_hyperbolic_as_q_to_one() {
        let m = Modulus::new(1.0 - 1e-6).unwrap();
        for x in [0.1, 0.8, 1.7, 3.0] {
            let j = m.jacobi(x);
            assert_abs_diff_eq!(j.sn, x.tanh(), epsilon = 1e-4);
            assert_abs_diff_eq!(j.cn, 1.0 / x.cosh(), epsilon = 1e-4);
            assert_abs_diff_eq!(j.dn, 1.0 / x.cosh(), epsilon = 1e-4);
        }
        // Kernel degenerates to arctan(sinh x).
        for x in [0.2, 0.9, 2.4] {
            assert_abs_diff_eq!(m.kernel_g(x), x.sinh().atan(), epsilon = 1e-4);
            assert_abs_diff_eq!(
                m.kernel_g_integral(x),
                Modulus::new(1.0).unwrap().kernel_g_integral(x),
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn kernel_g_matches_reference_values() {
        let m = Modulus::new(0.9).unwrap();
        let k = m.quarter_period();
        assert_abs_diff_eq!(m.kernel_g(0.5), G_X05_Q09, epsilon = 1e-13);
        assert_abs_diff_eq!(m.kernel_g(2.0), G_X20_Q09, epsilon = 1e-13);
        assert_abs_diff_eq!(m.kernel_g(2.0 * k + 0.3), G_2KPLUS03_Q09, epsilon = 1e-13);
        assert_abs_diff_eq!(m.kernel_g(3.5 * k), G_35K_Q09, epsilon = 1e-13);
        assert_abs_diff_eq!(m.kernel_g(2.0 * k), PI / 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m.kernel_g(4.0 * k), PI, epsilon = 1e-13);
        let m1 = Modulus::new(1.0).unwrap();
        assert_abs_diff_eq!(m1.kernel_g(0.8), G_X08_Q1, epsilon = 1e-14);
    }

    #[test]
    fn kernel_g_is_odd_quasi_periodic_and_continuous_at_branches() {
        for q in [0.5, 0.9, 0.995] {
            let m = Modulus::new(q).unwrap();
            let k = m.quarter_period();
            for x in [0.3, 1.1, 2.7, 5.0, 9.3] {
                assert_abs_diff_eq!(m.kernel_g(-x), -m.kernel_g(x), epsilon = 1e-12);
                assert_abs_diff_eq!(
                    m.kernel_g(x + 4.0 * k),
                    m.kernel_g(x) + PI,
                    epsilon = 1e-10
                );
            }
            // Continuity across the branch points x = 2K (mod 4K).
            for center in [2.0 * k, -2.0 * k, 6.0 * k] {
                let h = 1e-7;
                let below = m.kernel_g(center - h);
                let above = m.kernel_g(center + h);
                let at = m.kernel_g(center);
                assert!((above - below).abs() < 1e-5, "jump at {center}");
                assert!((at - below).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn kernel_g_prime_matches_finite_differences() {
        for q in [0.5, 0.9, 1.0] {
            let m = Modulus::new(q).unwrap();
            for x in [-2.2, -0.5, 0.0, 0.7, 1.9, 4.1] {
                let h = 1e-5;
                let fd = (m.kernel_g(x + h) - m.kernel_g(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(m.kernel_g_prime(x), fd, epsilon = 1e-9);
                if q < 1.0 {
                    assert!(m.kernel_g_prime(x) > 0.0);
                }
            }
        }
    }

    #[test]
    fn kernel_g_integral_matches_reference_values() {
        let m = Modulus::new(0.9).unwrap();
        let k = m.quarter_period();
        assert_abs_diff_eq!(m.kernel_g_integral(1.0), F_X10_Q09, epsilon = 1e-11);
        assert_abs_diff_eq!(m.kernel_g_integral(2.0 * k), F_2K_Q09, epsilon = 1e-11);
        assert_abs_diff_eq!(m.kernel_g_integral(3.7 * k), F_37K_Q09, epsilon = 1e-11);
        let m05 = Modulus::new(0.5).unwrap();
        assert_abs_diff_eq!(m05.kernel_g_integral(1.5), F_X15_Q05, epsilon = 1e-11);
        let m1 = Modulus::new(1.0).unwrap();
        assert_abs_diff_eq!(m1.kernel_g_integral(0.8), F_X08_Q1, epsilon = 1e-11);
        // Evenness and F(0) = 0.
        assert_abs_diff_eq!(m.kernel_g_integral(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            m.kernel_g_integral(-2.3),
            m.kernel_g_integral(2.3),
            epsilon = 1e-13
        );
        // Far outside the table (two quasi-periods out).
        let x = 9.3 * k;
        let fd = m.kernel_g_integral(x + 1e-4) - m.kernel_g_integral(x - 1e-4);
        assert_abs_diff_eq!(fd / 2e-4, m.kernel_g(x), epsilon = 1e-6);
    }

    #[test]
    fn kernel_g_integral_derivative_is_kernel_g() {
        for q in [0.5, 0.9, 0.995, 1.0] {
            let m = Modulus::new(q).unwrap();
            for x in [0.2, 0.9, 1.7, 3.3, 6.1] {
                let h = 1e-5;
                let fd =
                    (m.kernel_g_integral(x + h) - m.kernel_g_integral(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(fd, m.kernel_g(x), epsilon = 1e-6);
            }
        }
    }
}
