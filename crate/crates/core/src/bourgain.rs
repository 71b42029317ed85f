//! Discrete Bourgain norms of space-time fields and bilinear ratio monitors.
//!
//! With the transform `û(ξ,τ) = (2π)^{-1} ∫∫ u e^{-i(xξ+tτ)}`, free waves of
//! `u_t + ∂_x⁵u = 0` sit on `τ = -ξ⁵`, so the modulation weight is
//! `⟨τ + ξ⁵⟩`. Every norm is the weighted 2-D Parseval sum on the exact
//! discrete frequency pairs.

use std::fmt;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::par;
use crate::spectral::{bracket, SpaceTimeField, SpaceTimeSpectrum, UniformGrid};

/// Index set shared by the norms, the bilinear estimates and the solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormIndices {
    pub s: f64,
    pub b: f64,
    pub bstar: f64,
    pub alpha: f64,
    /// Smoothing gain.
    pub a: f64,
}

/// Named admissible ranges. Messages state the inequalities themselves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Range {
    /// `2/5 ≤ b < 1/2`, `0 ≤ a ≤ 10b - 4`: derivative bilinear estimate into `X^{s+a,-b}`.
    Bilinear,
    /// `1/2 < s < 11/4`, `0 ≤ a < 11/4 - s`, `max{(s+a)/5 - 1/20, 2/5} < b < 1/2`:
    /// bilinear estimate into `X^{1/2,(2(s+a)-1-10b)/10}`.
    BilinearHalf,
    /// `max{s/5 - 1/20, 2/5} < b < b* < 1/2`, `1/2 < α < 1 - b*`: contraction.
    Contraction,
    /// `0 ≤ s < 1/2`, `9/20 < b < 1/2`, `0 ≤ a < 1/2 - s`: smoothing, low regularity.
    SmoothingLow,
    /// `max{(s+a)/5 - 1/20, 2/5} < b < 1/2`, `0 ≤ a < min{11/4 - s, 10b - 4}`:
    /// smoothing, general regularity.
    SmoothingGeneral,
}

impl Range {
    pub fn statement(self) -> &'static str {
        match self {
            Range::Bilinear => "2/5 <= b < 1/2 and 0 <= a <= 10b - 4 (bilinear estimate into X^{s+a,-b})",
            Range::BilinearHalf => {
                "1/2 < s < 11/4, 0 <= a < 11/4 - s and max{(s+a)/5 - 1/20, 2/5} < b < 1/2 \
                 (bilinear estimate into X^{1/2,(2(s+a)-1-10b)/10})"
            }
            Range::Contraction => {
                "max{s/5 - 1/20, 2/5} < b < b* < 1/2 and 1/2 < alpha < 1 - b* (contraction range)"
            }
            Range::SmoothingLow => "0 <= s < 1/2, 9/20 < b < 1/2 and 0 <= a < 1/2 - s (smoothing, s < 1/2)",
            Range::SmoothingGeneral => {
                "max{(s+a)/5 - 1/20, 2/5} < b < 1/2 and 0 <= a < min{11/4 - s, 10b - 4} (smoothing)"
            }
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.statement())
    }
}

impl NormIndices {
    pub fn new(s: f64, b: f64, bstar: f64, alpha: f64, a: f64) -> Self {
        Self { s, b, bstar, alpha, a }
    }

    /// Indices for a bilinear probe; `b*` and `α` are placeholders there.
    pub fn bilinear(s: f64, b: f64, a: f64) -> Self {
        Self { s, b, bstar: 0.5, alpha: 0.5, a }
    }

    pub fn admissible(&self, range: Range) -> bool {
        let Self { s, b, bstar, alpha, a } = *self;
        let finite = [s, b, bstar, alpha, a].iter().all(|v| v.is_finite());
        finite
            && s >= 0.0
            && match range {
                Range::Bilinear => (0.4..0.5).contains(&b) && a >= 0.0 && a <= 10.0 * b - 4.0 + 1e-12,
                Range::BilinearHalf => {
                    s > 0.5
                        && s < 2.75
                        && a >= 0.0
                        && a < 2.75 - s
                        && b > ((s + a) / 5.0 - 0.05).max(0.4)
                        && b < 0.5
                }
                Range::Contraction => {
                    b > (s / 5.0 - 0.05).max(0.4) && b < bstar && bstar < 0.5 && alpha > 0.5 && alpha < 1.0 - bstar
                }
                Range::SmoothingLow => s < 0.5 && b > 0.45 && b < 0.5 && a >= 0.0 && a < 0.5 - s,
                Range::SmoothingGeneral => {
                    b > ((s + a) / 5.0 - 0.05).max(0.4) && b < 0.5 && a >= 0.0 && a < (2.75 - s).min(10.0 * b - 4.0)
                }
            }
    }

    /// Domain error naming the violated range.
    pub fn require(&self, range: Range) -> Result<()> {
        if self.admissible(range) {
            Ok(())
        } else {
            Err(domain(format!(
                "indices (s={}, b={}, b*={}, alpha={}, a={}) violate the range {}",
                self.s, self.b, self.bstar, self.alpha, self.a, range
            )))
        }
    }
}

fn weighted_sum(spec: &SpaceTimeSpectrum, w: impl Fn(f64, f64) -> f64 + Sync + Send) -> f64 {
    let nx = spec.xgrid.count;
    let xi = spec.xgrid.frequencies();
    let rows: Vec<f64> = par::map_range(spec.tgrid.count, |kt| {
        let tau = spec.tgrid.frequency(kt);
        let row = &spec.coeffs[kt * nx..(kt + 1) * nx];
        row.iter().zip(&xi).map(|(c, &x)| w(x, tau).powi(2) * c.norm_sqr()).sum()
    });
    (rows.iter().sum::<f64>() * spec.cell()).sqrt()
}

fn xsb_of(spec: &SpaceTimeSpectrum, s: f64, b: f64) -> f64 {
    weighted_sum(spec, |xi, tau| bracket(xi).powf(s) * bracket(tau + xi.powi(5)).powf(b))
}

/// `‖⟨ξ⟩^s ⟨τ+ξ⁵⟩^b û‖_{L²}`.
pub fn xsb_norm(u: &SpaceTimeField, s: f64, b: f64) -> f64 {
    xsb_of(&u.spectrum(), s, b)
}

fn xsba_of(spec: &SpaceTimeSpectrum, s: f64, b: f64, alpha: f64) -> f64 {
    weighted_sum(spec, |xi, tau| {
        let low = if xi.abs() <= 1.0 { bracket(tau).powf(alpha) } else { 0.0 };
        bracket(xi).powf(s) * bracket(tau + xi.powi(5)).powf(b) + low
    })
}

/// `‖(⟨ξ⟩^s ⟨τ+ξ⁵⟩^b + χ_{|ξ|≤1} ⟨τ⟩^α) û‖_{L²}`.
pub fn xsba_norm(u: &SpaceTimeField, s: f64, b: f64, alpha: f64) -> f64 {
    xsba_of(&u.spectrum(), s, b, alpha)
}

/// Sum of the three terms: `X^{s,-b}`, the low-frequency `⟨τ⟩^{α-1}` part,
/// and `(∫ ⟨ξ⟩^{2s} (∫ |û| / ⟨τ+ξ⁵⟩ dτ)² dξ)^{1/2}`.
pub fn ysba_norm(u: &SpaceTimeField, s: f64, b: f64, alpha: f64) -> f64 {
    let spec = u.spectrum();
    let first = xsb_of(&spec, s, -b);
    let second = weighted_sum(&spec, |xi, tau| if xi.abs() <= 1.0 { bracket(tau).powf(alpha - 1.0) } else { 0.0 });
    let nx = spec.xgrid.count;
    let dtau = spec.tgrid.freq_spacing();
    let xi = spec.xgrid.frequencies();
    let mut inner = vec![0.0; nx];
    for kt in 0..spec.tgrid.count {
        let tau = spec.tgrid.frequency(kt);
        for (kx, acc) in inner.iter_mut().enumerate() {
            *acc += spec.coeffs[kt * nx + kx].norm() / bracket(tau + xi[kx].powi(5));
        }
    }
    let third: f64 = inner
        .iter()
        .zip(&xi)
        .map(|(v, &x)| bracket(x).powf(2.0 * s) * (v * dtau).powi(2))
        .sum::<f64>()
        * spec.xgrid.freq_spacing();
    first + second + third.sqrt()
}

/// Which bilinear estimate a ratio monitors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BilinearMode {
    /// `‖∂_x(vw)‖_{X^{s+a,-b}} / (‖v‖_{X^{s,b}} ‖w‖_{X^{s,b}})`.
    Standard,
    /// `‖∂_x(vw)‖_{X^{1/2,(2(s+a)-1-10b)/10}} / (‖v‖_{X^{s,b}} ‖w‖_{X^{s,b}})`.
    HalfDerivative,
}

impl BilinearMode {
    pub fn range(self) -> Range {
        match self {
            BilinearMode::Standard => Range::Bilinear,
            BilinearMode::HalfDerivative => Range::BilinearHalf,
        }
    }
}

/// `∂_x(vw)` with the product formed pointwise and the derivative taken spectrally.
pub fn derivative_of_product(v: &SpaceTimeField, w: &SpaceTimeField) -> Result<SpaceTimeField> {
    v.xgrid.require_same(&w.xgrid, "bilinear ratio")?;
    v.tgrid.require_same(&w.tgrid, "bilinear ratio")?;
    let prod = v.zip_map(w, |a, b| a * b);
    let mut spectra = prod.spatial_spectra();
    let nx = v.nx();
    let xi = v.xgrid.frequencies();
    par::for_each_chunk(&mut spectra, nx, |_, row| {
        for (c, k) in row.iter_mut().zip(&xi) {
            *c *= C64::new(0.0, *k);
        }
    });
    Ok(SpaceTimeField::from_spatial_spectra(v.xgrid, v.tgrid, spectra))
}

pub fn bilinear_ratio(v: &SpaceTimeField, w: &SpaceTimeField, idx: &NormIndices, mode: BilinearMode) -> Result<f64> {
    idx.require(mode.range())?;
    let (s, b, a) = (idx.s, idx.b, idx.a);
    let nv = xsb_norm(v, s, b);
    let nw = xsb_norm(w, s, b);
    if nv == 0.0 || nw == 0.0 {
        return Err(domain("bilinear ratio needs nonzero fields"));
    }
    let d = derivative_of_product(v, w)?;
    let num = match mode {
        BilinearMode::Standard => xsb_norm(&d, s + a, -b),
        BilinearMode::HalfDerivative => xsb_norm(&d, 0.5, (2.0 * (s + a) - 1.0 - 10.0 * b) / 10.0),
    };
    Ok(num / (nv * nw))
}

/// Random sums of Gaussian wave packets near the characteristic `τ = -ξ⁵`.
/// The family is defined in continuum terms, so the same seed gives the same
/// function on every grid fine enough to resolve it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketEnsemble {
    pub packets: usize,
    pub max_frequency: f64,
    /// Largest offset from the characteristic.
    pub max_modulation: f64,
    pub width_x: f64,
    pub width_t: f64,
    /// Packet centres are drawn from `[-spread_x, spread_x] × [-spread_t, spread_t]`.
    pub spread_x: f64,
    pub spread_t: f64,
}

impl Default for PacketEnsemble {
    fn default() -> Self {
        Self {
            packets: 4,
            max_frequency: 1.5,
            max_modulation: 2.0,
            width_x: 2.0,
            width_t: 1.0,
            spread_x: 6.0,
            spread_t: 2.0,
        }
    }
}

impl PacketEnsemble {
    pub fn sample(&self, seed: u64, xgrid: UniformGrid, tgrid: UniformGrid) -> SpaceTimeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let packets: Vec<[f64; 6]> = (0..self.packets)
            .map(|_| {
                let xi = rng.gen_range(-self.max_frequency..=self.max_frequency);
                let tau = -xi.powi(5) + rng.gen_range(-self.max_modulation..=self.max_modulation);
                let x0 = rng.gen_range(-self.spread_x..=self.spread_x);
                let t0 = rng.gen_range(-self.spread_t..=self.spread_t);
                let (re, im) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
                [xi, tau, x0, t0, re, im]
            })
            .collect();
        let (wx, wt) = (self.width_x, self.width_t);
        SpaceTimeField::from_fn(xgrid, tgrid, move |x, t| {
            packets
                .iter()
                .map(|&[xi, tau, x0, t0, re, im]| {
                    let env = (-((x - x0) / wx).powi(2) / 2.0 - ((t - t0) / wt).powi(2) / 2.0).exp();
                    C64::new(re, im) * C64::from_polar(env, xi * x + tau * t)
                })
                .sum()
        })
    }

    /// Largest frequency magnitudes (ξ, τ) carried by a sample at relative level 1e-16.
    pub fn band(&self) -> (f64, f64) {
        let k = (2.0 * 37.0f64).sqrt();
        let xi = self.max_frequency + k / self.width_x;
        let tau = self.max_frequency.powi(5) + self.max_modulation + k / self.width_t;
        (xi, tau)
    }
}

/// Ensemble maximum of a bilinear ratio.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub indices: NormIndices,
    pub mode: BilinearMode,
    pub ensemble_size: usize,
    pub max_ratio: f64,
    pub argmax_seed: u64,
    pub grids: ProbeGrids,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProbeGrids {
    pub x: UniformGrid,
    pub t: UniformGrid,
}

/// Runs `size` samples with seeds `seed, seed+1, …`; pairs use `(2k, 2k+1)` offsets.
pub fn probe_bilinear(
    idx: &NormIndices,
    mode: BilinearMode,
    ensemble: &PacketEnsemble,
    size: usize,
    seed: u64,
    xgrid: UniformGrid,
    tgrid: UniformGrid,
) -> Result<ProbeReport> {
    idx.require(mode.range())?;
    if size == 0 {
        return Err(domain("ensemble size must be positive"));
    }
    // Products double the band; keep them below the Nyquist frequencies.
    let (bx, bt) = ensemble.band();
    if 2.0 * bx > xgrid.nyquist() || 2.0 * bt > tgrid.nyquist() {
        return Err(Error::Precondition(format!(
            "probe grids do not resolve products of the ensemble: need ξ-Nyquist > {:.2} and τ-Nyquist > {:.2}",
            2.0 * bx,
            2.0 * bt
        )));
    }
    let mut best = (f64::NEG_INFINITY, seed);
    for k in 0..size as u64 {
        let sd = seed.wrapping_add(k);
        let v = ensemble.sample(sd.wrapping_mul(2), xgrid, tgrid);
        let w = ensemble.sample(sd.wrapping_mul(2).wrapping_add(1), xgrid, tgrid);
        let r = bilinear_ratio(&v, &w, idx, mode)?;
        if r > best.0 {
            best = (r, sd);
        }
    }
    Ok(ProbeReport {
        indices: *idx,
        mode,
        ensemble_size: size,
        max_ratio: best.0,
        argmax_seed: best.1,
        grids: ProbeGrids { x: xgrid, t: tgrid },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grids() -> (UniformGrid, UniformGrid) {
        (UniformGrid::centered(4.0 * std::f64::consts::PI, 32).unwrap(), UniformGrid::centered(16.0 * std::f64::consts::PI, 1024).unwrap())
    }

    /// `A e^{i(ξ₀x+τ₀t)}` scaled to unit L² norm on the box.
    fn mode(xi0: f64, tau0: f64, amp: f64) -> SpaceTimeField {
        let (xg, tg) = grids();
        let c = amp / (xg.length() * tg.length()).sqrt();
        SpaceTimeField::from_fn(xg, tg, |x, t| C64::from_polar(c, xi0 * x + tau0 * t))
    }

    #[test]
    fn on_characteristic_mode() {
        let u = mode(2.0, -32.0, 1.5);
        for s in [0.0, 0.5, 1.0, 2.6] {
            assert!((xsb_norm(&u, s, 0.45) - 1.5 * 3f64.powf(s)).abs() < 1e-12 * 3f64.powf(s));
        }
        assert!((xsba_norm(&u, 1.0, 0.45, 0.6) - xsb_norm(&u, 1.0, 0.45)).abs() < 1e-12);
    }

    #[test]
    fn low_frequency_mode_gets_time_weight() {
        // The third Y term is an L¹ sum in τ: one bin contributes √dτ, dτ = 1/8.
        let u = mode(0.5, 10.0, 2.0);
        let (s, b, al) = (0.7, 0.4, 0.6);
        let want = 2.0 * (1.5f64.powf(s) * (1.0 + (10.0 + 0.5f64.powi(5))).powf(b) + 11f64.powf(al));
        assert!((xsba_norm(&u, s, b, al) - want).abs() < 1e-11 * want);
        let y = 2.0
            * (1.5f64.powf(s) * (1.0 + (10.0 + 0.5f64.powi(5))).powf(-b)
                + 11f64.powf(al - 1.0)
                + 1.5f64.powf(s) * (1.0f64 / 8.0).sqrt() / (1.0 + (10.0 + 0.5f64.powi(5))));
        assert!((ysba_norm(&u, s, b, al) - y).abs() < 1e-11 * y);
    }

    #[test]
    fn zero_field_and_l2() {
        let (xg, tg) = grids();
        let z = SpaceTimeField::zeros(xg, tg);
        assert_eq!(xsb_norm(&z, 1.0, 0.4), 0.0);
        assert_eq!(ysba_norm(&z, 1.0, 0.4, 0.6), 0.0);
        let u = SpaceTimeField::from_fn(xg, tg, |x, t| C64::new((-(x * x) - t * t / 10.0).exp(), x.sin()));
        assert!((xsb_norm(&u, 0.0, 0.0) - u.l2_norm()).abs() < 1e-12 * u.l2_norm());
    }

    #[test]
    fn ranges_reject_bad_indices() {
        assert!(NormIndices::bilinear(0.0, 0.45, 0.0).admissible(Range::Bilinear));
        assert!(NormIndices::bilinear(1.0, 0.46, 0.2).admissible(Range::BilinearHalf));
        let err = NormIndices::bilinear(0.0, 0.5, 0.0).require(Range::Bilinear).unwrap_err();
        assert!(err.to_string().contains("2/5 <= b < 1/2"));
        assert!(!NormIndices::bilinear(0.0, 0.42, 0.3).admissible(Range::Bilinear));
        assert!(NormIndices::new(0.3, 0.45, 0.47, 0.52, 0.0).admissible(Range::Contraction));
        assert!(!NormIndices::new(0.3, 0.45, 0.47, 0.54, 0.0).admissible(Range::Contraction));
        assert!(NormIndices::new(0.3, 0.46, 0.47, 0.52, 0.15).admissible(Range::SmoothingLow));
        assert!(!NormIndices::new(0.3, 0.46, 0.47, 0.52, 0.25).admissible(Range::SmoothingLow));
    }

    #[test]
    fn single_packet_ratio_regression() {
        let xg = UniformGrid::centered(40.0, 128).unwrap();
        let tg = UniformGrid::centered(16.0, 128).unwrap();
        let e = PacketEnsemble { packets: 1, ..Default::default() };
        let v = e.sample(3, xg, tg);
        let r = bilinear_ratio(&v, &v, &NormIndices::bilinear(0.0, 0.45, 0.0), BilinearMode::Standard).unwrap();
        let fine = bilinear_ratio(
            &e.sample(3, UniformGrid::centered(40.0, 256).unwrap(), UniformGrid::centered(16.0, 256).unwrap()),
            &e.sample(3, UniformGrid::centered(40.0, 256).unwrap(), UniformGrid::centered(16.0, 256).unwrap()),
            &NormIndices::bilinear(0.0, 0.45, 0.0),
            BilinearMode::Standard,
        )
        .unwrap();
        assert!((r - fine).abs() < 1e-3 * r, "{r:.17} {fine:.17}");
        assert!((r - SINGLE_PACKET_RATIO).abs() < 1e-9 * r, "{r:.17}");
    }
    const SINGLE_PACKET_RATIO: f64 = 0.062_252_579_569_313_56;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn norm_axioms(seed in 0u64..1000, c in -3.0f64..3.0) {
            let (xg, tg) = grids();
            let e = PacketEnsemble { width_t: 4.0, spread_t: 8.0, max_frequency: 1.0, ..Default::default() };
            let u = e.sample(seed, xg, tg);
            let v = e.sample(seed + 7, xg, tg);
            for f in [
                |u: &SpaceTimeField| xsb_norm(u, 0.8, 0.45),
                |u: &SpaceTimeField| xsba_norm(u, 0.8, 0.45, 0.52),
                |u: &SpaceTimeField| ysba_norm(u, 0.8, 0.45, 0.52),
            ] {
                let nu = f(&u);
                prop_assert!((f(&u.scale(C64::new(c, 0.0))) - c.abs() * nu).abs() <= 1e-12 * nu.max(1e-300) * (1.0 + c.abs()));
                prop_assert!(f(&u.add(&v).unwrap()) <= nu + f(&v) + 1e-12 * (nu + f(&v)));
            }
            prop_assert!(xsba_norm(&u, 0.8, 0.45, 0.52) >= xsb_norm(&u, 0.8, 0.45));
        }

        #[test]
        fn ratio_is_scale_invariant(c in 0.1f64..10.0, d in -10.0f64..-0.1) {
            let xg = UniformGrid::centered(40.0, 64).unwrap();
            let tg = UniformGrid::centered(16.0, 64).unwrap();
            let e = PacketEnsemble { packets: 2, max_frequency: 1.0, ..Default::default() };
            let v = e.sample(1, xg, tg);
            let w = e.sample(2, xg, tg);
            let idx = NormIndices::bilinear(0.0, 0.45, 0.0);
            let r = bilinear_ratio(&v, &w, &idx, BilinearMode::Standard).unwrap();
            let rs = bilinear_ratio(&v.scale(C64::new(c, 0.0)), &w.scale(C64::new(0.0, d)), &idx, BilinearMode::Standard).unwrap();
            prop_assert!((r - rs).abs() < 1e-10 * r);
        }
    }
}
