// SPDX-License-Identifier: Apache-2.0

//! Process-variation sampling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{split_assignment, TechError, TechnologyParams, SYMBOLS};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Gaussian,
    Uniform,
}

/// Relative spread around the nominal value.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub rel_sigma: f64,
    pub kind: DistributionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationSpec {
    /// Keyed by parameter symbol; absent symbols stay nominal.
    pub params: BTreeMap<String, Distribution>,
    pub samples: usize,
    pub seed: u64,
}

/// Device-level symbols varied by default. Supply, frequency, temperature,
/// slope and DIBL factors, and width ratios are design choices, not
/// manufacturing spread.
pub const DEVICE_SYMBOLS: [&str; 16] = [
    "L_n", "L_p", "W_nmin", "W_pmin", "C_ox", "C_GSO", "C_GDO", "mu_n", "mu_p", "V_thn",
    "V_thp", "C_jbd", "C_jbsdw", "AS", "PS", "C_nstack",
];

/// Redraw attempts before a sample is declared unattainable.
const MAX_REDRAWS: usize = 10_000;

impl Default for VariationSpec {
    fn default() -> Self {
        VariationSpec::gaussian(0.05, 100, 1)
    }
}

impl VariationSpec {
    /// Same Gaussian relative spread on every device symbol.
    pub fn gaussian(rel_sigma: f64, samples: usize, seed: u64) -> Self {
        let params = DEVICE_SYMBOLS
            .iter()
            .map(|s| {
                (
                    s.to_string(),
                    Distribution {
                        rel_sigma,
                        kind: DistributionKind::Gaussian,
                    },
                )
            })
            .collect();
        VariationSpec {
            params,
            samples,
            seed,
        }
    }

    /// Copy with every spread multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for d in s.params.values_mut() {
            d.rel_sigma *= factor;
        }
        s
    }

    pub fn validate(&self) -> Result<(), TechError> {
        if self.samples == 0 {
            return Err(TechError::Distribution {
                symbol: "samples".into(),
                reason: "sample count must be at least 1".into(),
            });
        }
        for (sym, d) in &self.params {
            if !SYMBOLS.iter().any(|(s, _)| s == sym) {
                return Err(TechError::UnknownSymbol(sym.clone()));
            }
            if !(0.0..=0.5).contains(&d.rel_sigma) {
                return Err(TechError::Distribution {
                    symbol: sym.clone(),
                    reason: format!("relative deviation {} outside [0, 0.5]", d.rel_sigma),
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# process variation: symbol = relative_sigma distribution\n");
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        for (sym, _) in SYMBOLS {
            if let Some(d) = self.params.get(sym) {
                let kind = match d.kind {
                    DistributionKind::Gaussian => "gaussian",
                    DistributionKind::Uniform => "uniform",
                };
                let _ = writeln!(s, "{sym} = {:?} {kind}", d.rel_sigma);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TechError> {
        let mut spec = VariationSpec {
            params: BTreeMap::new(),
            samples: 0,
            seed: 0,
        };
        let mut have_samples = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let Some((key, value)) = split_assignment(raw, line)? else {
                continue;
            };
            let perr = |m: String| TechError::Parse { line, message: m };
            match key {
                "samples" => {
                    spec.samples = value
                        .parse()
                        .map_err(|_| perr(format!("bad sample count `{value}`")))?;
                    have_samples = true;
                }
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| perr(format!("bad seed `{value}`")))?;
                }
                _ => {
                    let mut parts = value.split_whitespace();
                    let sigma: f64 = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| perr(format!("bad deviation in `{value}`")))?;
                    let kind = match parts.next().map(str::to_ascii_lowercase).as_deref() {
                        None | Some("gaussian") => DistributionKind::Gaussian,
                        Some("uniform") => DistributionKind::Uniform,
                        Some(other) => {
                            return Err(TechError::Distribution {
                                symbol: key.to_string(),
                                reason: format!("unknown distribution `{other}`"),
                            })
                        }
                    };
                    if parts.next().is_some() {
                        return Err(perr("trailing text".into()));
                    }
                    spec.params.insert(
                        key.to_string(),
                        Distribution {
                            rel_sigma: sigma,
                            kind,
                        },
                    );
                }
            }
        }
        if !have_samples {
            return Err(TechError::Missing("samples"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for sample `index`, independent of how many other samples are
/// drawn or in which order.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

fn draw_factor(rng: &mut ChaCha8Rng, d: Distribution) -> f64 {
    if d.rel_sigma == 0.0 {
        return 1.0;
    }
    match d.kind {
        DistributionKind::Gaussian => loop {
            let z: f64 = rng.sample(StandardNormal);
            let factor = 1.0 + d.rel_sigma * z;
            if z.abs() <= 3.0 && factor > 0.0 {
                return factor;
            }
        },
        DistributionKind::Uniform => {
            // Zero mean, standard deviation rel_sigma.
            let u: f64 = rng.random_range(-1.0..=1.0);
            1.0 + d.rel_sigma * 3f64.sqrt() * u
        }
    }
}

/// One sample.
pub fn sample_one(
    nominal: &TechnologyParams,
    spec: &VariationSpec,
    index: u64,
) -> Result<TechnologyParams, TechError> {
    let mut rng = sample_rng(spec.seed, index);
    for _ in 0..MAX_REDRAWS {
        let mut p = nominal.clone();
        for (sym, _) in SYMBOLS {
            if let Some(&d) = spec.params.get(sym) {
                let v = nominal.get(sym).expect("known symbol") * draw_factor(&mut rng, d);
                p.set(sym, v)?;
            }
        }
        if p.validate().is_ok() {
            return Ok(p);
        }
    }
    Err(TechError::SamplingFailed(MAX_REDRAWS))
}

/// `spec.samples` parameter sets drawn around `nominal`.
pub fn sample_variations(
    nominal: &TechnologyParams,
    spec: &VariationSpec,
) -> Result<Vec<TechnologyParams>, TechError> {
    spec.validate()?;
    nominal.validate()?;
    (0..spec.samples as u64)
        .map(|i| sample_one(nominal, spec, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_is_nominal() {
        let nom = TechnologyParams::nominal_45nm();
        let s = sample_variations(&nom, &VariationSpec::gaussian(0.0, 5, 3)).unwrap();
        assert!(s.iter().all(|p| *p == nom));
    }

    #[test]
    fn seeded_streams_repeat() {
        let nom = TechnologyParams::nominal_45nm();
        let spec = VariationSpec::gaussian(0.05, 20, 42);
        assert_eq!(
            sample_variations(&nom, &spec).unwrap(),
            sample_variations(&nom, &spec).unwrap()
        );
    }

    #[test]
    fn order_independent() {
        let nom = TechnologyParams::nominal_45nm();
        let spec = VariationSpec::gaussian(0.05, 10, 7);
        let all = sample_variations(&nom, &spec).unwrap();
        assert_eq!(sample_one(&nom, &spec, 6).unwrap(), all[6]);
    }

    #[test]
    fn text_round_trip() {
        let mut spec = VariationSpec::gaussian(0.05, 17, 99);
        spec.params.get_mut("V_thn").unwrap().kind = DistributionKind::Uniform;
        spec.params.get_mut("C_ox").unwrap().rel_sigma = 0.1 + 0.2;
        assert_eq!(VariationSpec::from_text(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(VariationSpec::from_text("samples = 3\nV_thn = 0.7 gaussian\n").is_err());
        assert!(VariationSpec::from_text("samples = 3\nV_thn = 0.1 cauchy\n").is_err());
        assert!(VariationSpec::from_text("samples = 0\n").is_err());
        assert!(VariationSpec::from_text("seed = 1\n").is_err());
    }
}
