//! Integer side of the conserved-dimension law.
//!
//! The conserved dimension of a chain of `N` particles damped at site `n` is
//! `D_n(N) = gcd(N, 2n−1) − 1`, so its site average
//! `S(N) = (1/N) Σ_n D_n(N)` is a divisor sum in disguise: writing `M` for
//! the odd part of `N`, the numbers `2n−1 mod M` sweep every residue class
//! `N/M` times, hence `Σ_n gcd(N, 2n−1) = (N/M)·G(M)` with
//! `G(m) = Σ_{k=1}^{m} gcd(m, k)` the classical gcd-sum function. `G` is
//! multiplicative with `G(p^e) = (e+1)p^e − e·p^{e−1}`, which gives the fast
//! route used by the scans; the brute-force gcd loop stays around as the
//! oracle and the two must agree exactly (integer equality) everywhere they
//! are both run.
//!
//! All gcd arithmetic is exact 64-bit; aggregate products go through 128-bit
//! intermediates for headroom.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChainError, Result};

/// Largest admissible `N` for range scans (keeps the factor sieve in memory).
const MAX_RANGE: u64 = 100_000_000;

/// Greatest common divisor by Euclid's algorithm; `gcd(0, b) = b`.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Conserved phase-space dimension `D_n(N) = gcd(N, 2n−1) − 1`.
///
/// Exact integers end to end; the spectral and Krylov routes in
/// [`crate::spectral`] must reproduce this value for every admissible pair.
pub fn conserved_dimension(particles: u64, site: u64) -> Result<u64> {
    if particles < 1 || site < 1 || site > particles {
        return Err(ChainError::InvalidParameter(format!(
            "site must lie in 1..={particles}, got {site}"
        )));
    }
    Ok(gcd(particles, 2 * site - 1) - 1)
}

/// Odd part `M` of `n`, i.e. `n = 2^a·M` with `M` odd.
pub fn odd_part(n: u64) -> u64 {
    if n == 0 {
        0
    } else {
        n >> n.trailing_zeros()
    }
}

/// `(e+1)p^e − e·p^{e−1}`, the gcd-sum function at a prime power.
fn gcd_sum_prime_power(p: u64, e: u32, pe: u64) -> u128 {
    (e as u128 + 1) * pe as u128 - e as u128 * (pe / p) as u128
}

/// Gcd-sum (Pillai) function `G(m) = Σ_{k=1}^{m} gcd(m, k)` by trial
/// division.
pub fn gcd_sum(m: u64) -> Result<u64> {
    if m == 0 {
        return Err(ChainError::InvalidParameter(
            "gcd-sum is defined for m >= 1".into(),
        ));
    }
    let mut rest = m;
    let mut g: u128 = 1;
    let mut p = 2u64;
    while p * p <= rest {
        if rest % p == 0 {
            let mut e = 0u32;
            let mut pe = 1u64;
            while rest % p == 0 {
                rest /= p;
                e += 1;
                pe *= p;
            }
            g *= gcd_sum_prime_power(p, e, pe);
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        g *= gcd_sum_prime_power(rest, 1, rest);
    }
    u64::try_from(g)
        .map_err(|_| ChainError::InvalidParameter(format!("gcd-sum overflows u64 for m = {m}")))
}

/// `Σ_{n=1}^{N} gcd(N, 2n−1)` via the odd-part rearrangement.
pub fn total_gcd(particles: u64) -> Result<u64> {
    if particles < 1 {
        return Err(ChainError::InvalidParameter(
            "particle count must be >= 1".into(),
        ));
    }
    let m = odd_part(particles);
    let g = gcd_sum(m)? as u128;
    let t = (particles / m) as u128 * g;
    u64::try_from(t).map_err(|_| {
        ChainError::InvalidParameter(format!("gcd total overflows u64 for N = {particles}"))
    })
}

/// `Σ_{n=1}^{N} gcd(N, 2n−1)` by the direct loop; oracle for [`total_gcd`].
pub fn total_gcd_brute(particles: u64) -> Result<u64> {
    if particles < 1 {
        return Err(ChainError::InvalidParameter(
            "particle count must be >= 1".into(),
        ));
    }
    Ok((1..=particles).map(|n| gcd(particles, 2 * n - 1)).sum())
}

/// Mean over sites of the integer total: `S(N) = (T(N) − N)/N` as a float.
///
/// Every route to `S` funnels through this one expression so that fast and
/// brute-force paths agree bit for bit whenever their integer totals do.
fn mean_from_total(total: u64, particles: u64) -> f64 {
    (total - particles) as f64 / particles as f64
}

/// Site-averaged conserved dimension `S(N) = (1/N) Σ_n D_n(N)`.
pub fn mean_dimension(particles: u64) -> Result<f64> {
    Ok(mean_from_total(total_gcd(particles)?, particles))
}

/// Brute-force oracle for [`mean_dimension`].
pub fn mean_dimension_brute(particles: u64) -> Result<f64> {
    Ok(mean_from_total(total_gcd_brute(particles)?, particles))
}

/// Smallest-prime-factor table for `0..=limit`; `spf[p] = p` marks primes.
fn smallest_prime_factors(limit: usize) -> Vec<u32> {
    let mut spf: Vec<u32> = (0..=limit as u32).collect();
    let mut i = 2usize;
    while i * i <= limit {
        if spf[i] == i as u32 {
            for j in (i * i..=limit).step_by(i) {
                if spf[j] == j as u32 {
                    spf[j] = i as u32;
                }
            }
        }
        i += 1;
    }
    spf
}

/// Gcd-sum of `m` by repeated smallest-prime-factor lookups.
fn gcd_sum_from_spf(m: u64, spf: &[u32]) -> u128 {
    let mut rest = m as usize;
    let mut g: u128 = 1;
    while rest > 1 {
        let p = spf[rest] as usize;
        let mut e = 0u32;
        let mut pe = 1u64;
        while rest % p == 0 {
            rest /= p;
            e += 1;
            pe *= p as u64;
        }
        g *= gcd_sum_prime_power(p as u64, e, pe);
    }
    g
}

/// `S(N)` for every `N ≤ n_max`; entry `N−1` is `S(N)`.
///
/// Sieve-backed and parallel over the range; the per-`N` integer totals are
/// exact, so the result is independent of the worker count.
pub fn mean_dimension_range(n_max: u64) -> Result<Vec<f64>> {
    if n_max < 1 {
        return Err(ChainError::InvalidParameter(
            "range must contain at least N = 1".into(),
        ));
    }
    if n_max > MAX_RANGE {
        return Err(ChainError::InvalidParameter(format!(
            "range scan capped at N ≤ {MAX_RANGE}, got {n_max}"
        )));
    }
    let spf = smallest_prime_factors(n_max as usize);
    let totals: Vec<u64> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let m = odd_part(n);
            let t = (n / m) as u128 * gcd_sum_from_spf(m, &spf);
            u64::try_from(t).expect("gcd total fits u64 within the range cap")
        })
        .collect();
    Ok(totals
        .iter()
        .zip(1..=n_max)
        .map(|(&t, n)| mean_from_total(t, n))
        .collect())
}

/// The per-site dimensions of one chain and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionTable {
    /// Number of particles `N`.
    pub particles: u64,
    /// `values[n−1] = D_n(N)`.
    pub values: Vec<u64>,
    /// `S(N)`, the mean of `values`.
    pub mean: f64,
}

/// Tabulates `D_n(N)` over all sites of one chain.
pub fn dimension_table(particles: u64) -> Result<DimensionTable> {
    if particles < 1 {
        return Err(ChainError::InvalidParameter(
            "particle count must be >= 1".into(),
        ));
    }
    let values: Vec<u64> = (1..=particles)
        .map(|n| gcd(particles, 2 * n - 1) - 1)
        .collect();
    let total: u64 = values.iter().sum::<u64>() + particles;
    Ok(DimensionTable {
        particles,
        mean: mean_from_total(total, particles),
        values,
    })
}

impl DimensionTable {
    /// Writes the long-format `N,n,D` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N,n,D")?;
        for (i, d) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", self.particles, i + 1, d)?;
        }
        Ok(())
    }
}

/// Cumulative mean of `S(N)/N` up to a cutoff, with its logarithmic ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageReport {
    /// Cutoff `N₀`.
    #[serde(rename = "N0")]
    pub n0: u64,
    /// `(1/N₀) Σ_{N ≤ N₀} S(N)/N`.
    pub cumulative: f64,
    /// `cumulative / ln N₀`.
    pub ratio_to_log: f64,
}

impl AverageReport {
    /// JSON with floats at 17 significant digits (reproducible byte output).
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{{\"N0\":{},\"cumulative\":{:.16e},\"ratio_to_log\":{:.16e}}}",
            self.n0, self.cumulative, self.ratio_to_log
        )?;
        Ok(())
    }
}

fn cumulative_from_means(means: &[f64], n0: u64) -> AverageReport {
    let mut acc = 0.0;
    for (s, n) in means.iter().zip(1..=n0) {
        acc += s / n as f64;
    }
    let cumulative = acc / n0 as f64;
    AverageReport {
        n0,
        cumulative,
        ratio_to_log: cumulative / (n0 as f64).ln(),
    }
}

/// `(1/N₀) Σ_{N ≤ N₀} S(N)/N` via the divisor-sum fast path.
pub fn cumulative_average(n0: u64) -> Result<AverageReport> {
    if n0 < 2 {
        return Err(ChainError::InvalidParameter(
            "cumulative average needs N0 >= 2".into(),
        ));
    }
    Ok(cumulative_from_means(&mean_dimension_range(n0)?, n0))
}

/// Brute-force double loop; oracle for [`cumulative_average`], with which it
/// must agree exactly (same integer totals, same float pipeline).
pub fn cumulative_average_brute(n0: u64) -> Result<AverageReport> {
    if n0 < 2 {
        return Err(ChainError::InvalidParameter(
            "cumulative average needs N0 >= 2".into(),
        ));
    }
    let means: Vec<f64> = (1..=n0)
        .map(mean_dimension_brute)
        .collect::<Result<_>>()?;
    Ok(cumulative_from_means(&means, n0))
}

/// One row of a growth scan: `S(N)` and `S(N)/N^ε` for each requested `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRow {
    pub particles: u64,
    pub mean: f64,
    /// Parallel to the scan's epsilon list.
    pub ratios: Vec<f64>,
}

/// Where `S(N)/N^ε` peaks over the scanned range.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPeak {
    pub epsilon: f64,
    pub max_ratio: f64,
    /// Smallest `N` attaining the maximum.
    pub argmax: u64,
}

/// Full output of [`growth_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTable {
    pub epsilons: Vec<f64>,
    pub rows: Vec<GrowthRow>,
    pub peaks: Vec<GrowthPeak>,
}

impl GrowthTable {
    /// CSV with columns `N,S,S_over_N^ε…`, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "N,S")?;
        for eps in &self.epsilons {
            write!(w, ",S_over_N^{eps}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(w, "{},{:.16e}", row.particles, row.mean)?;
            for r in &row.ratios {
                write!(w, ",{r:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Scans `S(N)/N^ε` over `N ≤ n_max` and records each ratio's peak.
///
/// Desk-scale check of the sublinear growth of `S`: the peak should
/// stabilize (or move out only slowly) as the range grows.
pub fn growth_scan(n_max: u64, epsilons: &[f64]) -> Result<GrowthTable> {
    if n_max < 2 {
        return Err(ChainError::InvalidParameter(
            "growth scan needs N_max >= 2".into(),
        ));
    }
    if epsilons.is_empty() {
        return Err(ChainError::InvalidParameter(
            "growth scan needs at least one epsilon".into(),
        ));
    }
    for &eps in epsilons {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(ChainError::InvalidParameter(format!(
                "epsilons must be positive and finite, got {eps}"
            )));
        }
    }

    let means = mean_dimension_range(n_max)?;
    let mut rows = Vec::with_capacity(n_max as usize);
    let mut peaks: Vec<GrowthPeak> = epsilons
        .iter()
        .map(|&epsilon| GrowthPeak {
            epsilon,
            max_ratio: f64::NEG_INFINITY,
            argmax: 0,
        })
        .collect();
    for (s, n) in means.iter().zip(1..=n_max) {
        let ratios: Vec<f64> = epsilons
            .iter()
            .map(|&eps| s / (n as f64).powf(eps))
            .collect();
        for (peak, &r) in peaks.iter_mut().zip(&ratios) {
            if r > peak.max_ratio {
                peak.max_ratio = r;
                peak.argmax = n;
            }
        }
        rows.push(GrowthRow {
            particles: n,
            mean: *s,
            ratios,
        });
    }
    Ok(GrowthTable {
        epsilons: epsilons.to_vec(),
        rows,
        peaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_basics() {
        assert_eq!(gcd(0, 5), 5);
        assert_eq!(gcd(5, 0), 5);
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(gcd(1, 1), 1);
        assert_eq!(gcd(17, 289), 17);
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(conserved_dimension(8, 3).unwrap(), 0);
        assert_eq!(conserved_dimension(5, 3).unwrap(), 4);
        assert_eq!(conserved_dimension(9, 2).unwrap(), 2);
        assert_eq!(conserved_dimension(15, 8).unwrap(), 14);
        assert_eq!(conserved_dimension(1, 1).unwrap(), 0);
        assert!(conserved_dimension(5, 0).is_err());
        assert!(conserved_dimension(5, 6).is_err());
    }

    #[test]
    fn dimension_even_and_symmetric() {
        for n in 1..=60u64 {
            for site in 1..=n {
                let d = conserved_dimension(n, site).unwrap();
                assert_eq!(d % 2, 0, "D({n},{site}) odd");
                assert_eq!(d, conserved_dimension(n, n + 1 - site).unwrap());
                assert!(d <= n - 1);
            }
        }
    }

    #[test]
    fn odd_parts() {
        assert_eq!(odd_part(1), 1);
        assert_eq!(odd_part(8), 1);
        assert_eq!(odd_part(12), 3);
        assert_eq!(odd_part(945), 945);
        assert_eq!(odd_part(0), 0);
    }

    #[test]
    fn gcd_sum_values() {
        // G(m) = Σ_{k≤m} gcd(m,k): direct check against the defining sum
        for m in 1..=200u64 {
            let direct: u64 = (1..=m).map(|k| gcd(m, k)).sum();
            assert_eq!(gcd_sum(m).unwrap(), direct, "m={m}");
        }
        assert_eq!(gcd_sum(1).unwrap(), 1);
        assert_eq!(gcd_sum(3).unwrap(), 5);
        assert_eq!(gcd_sum(9).unwrap(), 21);
        assert_eq!(gcd_sum(4).unwrap(), 8);
        assert_eq!(gcd_sum(945).unwrap(), 9477);
    }

    #[test]
    fn totals_fast_equals_brute() {
        for n in 1..=2000u64 {
            assert_eq!(total_gcd(n).unwrap(), total_gcd_brute(n).unwrap(), "N={n}");
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_dimension(1).unwrap(), 0.0);
        assert_eq!(mean_dimension(8).unwrap(), 0.0);
        assert_eq!(mean_dimension(3).unwrap(), 2.0 / 3.0);
        assert_eq!(mean_dimension(5).unwrap(), 4.0 / 5.0);
        assert_eq!(mean_dimension(6).unwrap(), 2.0 / 3.0);
        assert_eq!(mean_dimension(7).unwrap(), 6.0 / 7.0);
    }

    #[test]
    fn mean_vanishes_on_powers_of_two() {
        for k in 0..=10u32 {
            assert_eq!(mean_dimension(1u64 << k).unwrap(), 0.0);
        }
    }

    #[test]
    fn range_matches_single_calls() {
        let means = mean_dimension_range(300).unwrap();
        for n in 1..=300u64 {
            let single = mean_dimension(n).unwrap();
            assert_eq!(means[(n - 1) as usize], single, "N={n}");
        }
    }

    #[test]
    fn dimension_table_contents() {
        let t = dimension_table(8).unwrap();
        assert_eq!(t.values, vec![0; 8]);
        assert_eq!(t.mean, 0.0);

        let t = dimension_table(5).unwrap();
        assert_eq!(t.values, vec![0, 0, 4, 0, 0]);
        assert_eq!(t.mean, mean_dimension(5).unwrap());

        let mut csv = Vec::new();
        dimension_table(3).unwrap().write_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "N,n,D\n3,1,0\n3,2,2\n3,3,0\n"
        );
    }

    #[test]
    fn cumulative_small_values() {
        let r = cumulative_average(2).unwrap();
        assert_eq!(r.cumulative, 0.0);
        assert_eq!(r.ratio_to_log, 0.0);
        assert!(cumulative_average(1).is_err());
    }

    #[test]
    fn cumulative_fast_equals_brute() {
        for n0 in [8u64, 100, 1000] {
            let fast = cumulative_average(n0).unwrap();
            let brute = cumulative_average_brute(n0).unwrap();
            assert_eq!(fast.cumulative, brute.cumulative, "N0={n0}");
            assert_eq!(fast.ratio_to_log, brute.ratio_to_log, "N0={n0}");
            assert!(fast.cumulative >= 0.0);
            assert!(fast.ratio_to_log.is_finite());
        }
    }

    #[test]
    fn average_report_json_shape() {
        let mut out = Vec::new();
        cumulative_average(100).unwrap().write_json(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("{\"N0\":100,\"cumulative\":"));
        let parsed: AverageReport = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.n0, 100);
    }

    #[test]
    fn growth_scan_trivial_bound() {
        // D_n ≤ N−1 gives S(N)/N ≤ 1 outright
        let scan = growth_scan(10_000, &[1.0]).unwrap();
        assert!(scan.peaks[0].max_ratio <= 1.0);
        assert!(scan.peaks[0].max_ratio > 0.0);
    }

    #[test]
    fn growth_scan_peak_matches_direct_recomputation() {
        let scan = growth_scan(500, &[0.5]).unwrap();
        let mut best = (f64::NEG_INFINITY, 0u64);
        for n in 1..=500u64 {
            let r = mean_dimension_brute(n).unwrap() / (n as f64).sqrt();
            if r > best.0 {
                best = (r, n);
            }
        }
        assert_eq!(scan.peaks[0].max_ratio, best.0);
        assert_eq!(scan.peaks[0].argmax, best.1);
    }

    #[test]
    fn growth_scan_rejects_bad_input() {
        assert!(growth_scan(1, &[0.5]).is_err());
        assert!(growth_scan(10, &[]).is_err());
        assert!(growth_scan(10, &[0.0]).is_err());
        assert!(growth_scan(10, &[-1.0]).is_err());
    }

    #[test]
    fn growth_csv_shape() {
        let scan = growth_scan(3, &[0.5, 1.0]).unwrap();
        let mut out = Vec::new();
        scan.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "N,S,S_over_N^0.5,S_over_N^1");
        assert_eq!(lines.clone().count(), 3);
        assert!(lines.all(|l| l.split(',').count() == 4));
    }
}
