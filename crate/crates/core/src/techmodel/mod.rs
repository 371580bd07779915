// SPDX-License-Identifier: Apache-2.0

//! Transistor-level technology parameters, capacitances and on-resistance.
//!
//! Everything is SI. Two unit conventions matter:
//! - `C_GSO`/`C_GDO` are overlap capacitances of one minimum-width device in
//!   farads, so `C_GSO + C_GDO + W_min·L·C_ox` is a capacitance.
//! - `AS`/`PS` are diffusion area and sidewall perimeter per unit device
//!   width (m²/m and m/m), so `W·(AS·C_jbd + PS·C_jbsdw)` is a capacitance.

mod variation;

pub use variation::{sample_variations, Distribution, DistributionKind, VariationSpec, DEVICE_SYMBOLS};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{CellKind, Circuit, GateKind, NetId};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    N,
    P,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TechError {
    #[error("parameter {symbol} = {value} violates its constraint: {reason}")]
    Invalid {
        symbol: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("transistor not conducting: V_dd {vdd} <= V_th {vth} ({polarity:?}MOS)")]
    NotConducting {
        polarity: Polarity,
        vdd: f64,
        vth: f64,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown parameter `{0}`")]
    UnknownSymbol(String),
    #[error("parameter `{0}` missing")]
    Missing(&'static str),
    #[error("invalid distribution for `{symbol}`: {reason}")]
    Distribution { symbol: String, reason: String },
    #[error("no valid sample after {0} redraws")]
    SamplingFailed(usize),
}

/// Every transistor-level symbol the models use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechnologyParams {
    pub v_dd: f64,
    pub f: f64,
    pub l_n: f64,
    pub l_p: f64,
    pub w_nmin: f64,
    pub w_pmin: f64,
    pub wr_n: f64,
    pub wr_p: f64,
    pub c_ox: f64,
    pub c_gso: f64,
    pub c_gdo: f64,
    pub mu_n: f64,
    pub mu_p: f64,
    pub v_thn: f64,
    pub v_thp: f64,
    pub n_n: f64,
    pub n_p: f64,
    pub sigma_n: f64,
    pub sigma_p: f64,
    pub t: f64,
    pub c_jbd: f64,
    pub c_jbsdw: f64,
    pub a_s: f64,
    pub p_s: f64,
    pub c_nstack: f64,
}

/// `(symbol, unit)` in file order.
pub const SYMBOLS: [(&str, &str); 25] = [
    ("V_dd", "V"),
    ("f", "Hz"),
    ("L_n", "m"),
    ("L_p", "m"),
    ("W_nmin", "m"),
    ("W_pmin", "m"),
    ("WR_n", "1"),
    ("WR_p", "1"),
    ("C_ox", "F/m^2"),
    ("C_GSO", "F"),
    ("C_GDO", "F"),
    ("mu_n", "m^2/(V*s)"),
    ("mu_p", "m^2/(V*s)"),
    ("V_thn", "V"),
    ("V_thp", "V"),
    ("n_n", "1"),
    ("n_p", "1"),
    ("sigma_n", "1"),
    ("sigma_p", "1"),
    ("T", "K"),
    ("C_jbd", "F/m^2"),
    ("C_jbsdw", "F/m"),
    ("AS", "m^2/m"),
    ("PS", "m/m"),
    ("C_nstack", "F"),
];

macro_rules! symbol_slots {
    ($($sym:literal => $field:ident),* $(,)?) => {
        impl TechnologyParams {
            fn slot(&self, symbol: &str) -> Option<&f64> {
                match symbol {
                    $($sym => Some(&self.$field),)*
                    _ => None,
                }
            }

            fn slot_mut(&mut self, symbol: &str) -> Option<&mut f64> {
                match symbol {
                    $($sym => Some(&mut self.$field),)*
                    _ => None,
                }
            }
        }
    };
}

symbol_slots! {
    "V_dd" => v_dd,
    "f" => f,
    "L_n" => l_n,
    "L_p" => l_p,
    "W_nmin" => w_nmin,
    "W_pmin" => w_pmin,
    "WR_n" => wr_n,
    "WR_p" => wr_p,
    "C_ox" => c_ox,
    "C_GSO" => c_gso,
    "C_GDO" => c_gdo,
    "mu_n" => mu_n,
    "mu_p" => mu_p,
    "V_thn" => v_thn,
    "V_thp" => v_thp,
    "n_n" => n_n,
    "n_p" => n_p,
    "sigma_n" => sigma_n,
    "sigma_p" => sigma_p,
    "T" => t,
    "C_jbd" => c_jbd,
    "C_jbsdw" => c_jbsdw,
    "AS" => a_s,
    "PS" => p_s,
    "C_nstack" => c_nstack,
}

impl Default for TechnologyParams {
    fn default() -> Self {
        Self::nominal_45nm()
    }
}

impl TechnologyParams {
    /// 45 nm-class defaults.
    pub fn nominal_45nm() -> Self {
        let w_nmin = 90e-9;
        let (a_s, p_s, c_jbd, c_jbsdw) = (1e-7, 2.0, 1e-3, 1e-10);
        TechnologyParams {
            v_dd: 1.0,
            f: 1e9,
            l_n: 45e-9,
            l_p: 45e-9,
            w_nmin,
            w_pmin: 90e-9,
            wr_n: 1.0,
            wr_p: 2.0,
            c_ox: 0.025,
            c_gso: 1.8e-17,
            c_gdo: 1.8e-17,
            mu_n: 0.03,
            mu_p: 0.012,
            v_thn: 0.35,
            v_thp: 0.35,
            n_n: 1.5,
            n_p: 1.5,
            sigma_n: 0.1,
            sigma_p: 0.1,
            t: 300.0,
            c_jbd,
            c_jbsdw,
            a_s,
            p_s,
            // One minimum nMOS drain diffusion.
            c_nstack: w_nmin * (a_s * c_jbd + p_s * c_jbsdw),
        }
    }

    pub fn get(&self, symbol: &str) -> Option<f64> {
        Some(*self.slot(symbol)?)
    }

    pub fn set(&mut self, symbol: &str, value: f64) -> Result<(), TechError> {
        let slot = self
            .slot_mut(symbol)
            .ok_or_else(|| TechError::UnknownSymbol(symbol.to_string()))?;
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), TechError> {
        for (sym, _) in SYMBOLS {
            let v = self.get(sym).expect("known symbol");
            if !(v.is_finite() && v > 0.0) {
                return Err(TechError::Invalid {
                    symbol: sym,
                    value: v,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if self.v_thn >= self.v_dd {
            return Err(TechError::Invalid {
                symbol: "V_thn",
                value: self.v_thn,
                reason: "must be below V_dd",
            });
        }
        if self.v_thp >= self.v_dd {
            return Err(TechError::Invalid {
                symbol: "V_thp",
                value: self.v_thp,
                reason: "must be below V_dd",
            });
        }
        Ok(())
    }

    /// φt = k·T/q.
    pub fn thermal_voltage(&self) -> f64 {
        BOLTZMANN * self.t / ELEMENTARY_CHARGE
    }

    pub fn width_ratio(&self, pol: Polarity) -> f64 {
        match pol {
            Polarity::N => self.wr_n,
            Polarity::P => self.wr_p,
        }
    }

    fn device(&self, pol: Polarity) -> (f64, f64, f64, f64) {
        // (L, W_min, mu, V_th)
        match pol {
            Polarity::N => (self.l_n, self.w_nmin, self.mu_n, self.v_thn),
            Polarity::P => (self.l_p, self.w_pmin, self.mu_p, self.v_thp),
        }
    }

    /// C_gMOS = FO·WR·(C_GSO + C_GDO + W_min·L·C_ox).
    pub fn gate_capacitance(&self, pol: Polarity, fo: f64, wr: f64) -> f64 {
        let (l, w, _, _) = self.device(pol);
        fo * wr * (self.c_gso + self.c_gdo + w * l * self.c_ox)
    }

    /// Gate capacitance presented by one input pin of a CMOS cell: one pMOS
    /// and one nMOS gate terminal.
    pub fn pin_capacitance(&self) -> f64 {
        self.gate_capacitance(Polarity::P, 1.0, self.wr_p)
            + self.gate_capacitance(Polarity::N, 1.0, self.wr_n)
    }

    /// C_dmin = AS·C_jbd + PS·C_jbsdw, per unit device width.
    pub fn min_diffusion(&self) -> f64 {
        self.a_s * self.c_jbd + self.p_s * self.c_jbsdw
    }

    /// Drain diffusion at a cell output.
    pub fn diffusion_capacitance(&self, cell: CellKind, fo: f64) -> f64 {
        let cd = self.min_diffusion();
        let p = fo * self.wr_p * self.w_pmin * cd;
        let n = fo * self.wr_n * self.w_nmin * cd;
        match cell {
            CellKind::Nand2 => 2.0 * p + n,
            CellKind::Nor2 => p + 2.0 * n,
            CellKind::Not => p + n,
        }
    }

    /// R_on = L/(μ·C_ox·W·(V_dd − V_th)) with W = WR·W_min.
    pub fn on_resistance(&self, pol: Polarity, wr: f64) -> Result<f64, TechError> {
        let (l, w, mu, vth) = self.device(pol);
        if self.v_dd <= vth {
            return Err(TechError::NotConducting {
                polarity: pol,
                vdd: self.v_dd,
                vth,
            });
        }
        Ok(l / (mu * self.c_ox * wr * w * (self.v_dd - vth)))
    }

    /// Per-device subthreshold term
    /// n·μ·C_ox·WR·(W_min/L)·φt²·exp((σ·V_dd − V_th)/(n·φt)).
    /// The single-device leakage current is twice this value.
    pub fn leakage_term(&self, pol: Polarity) -> f64 {
        let (l, w, mu, vth) = self.device(pol);
        let (n, sigma, wr) = match pol {
            Polarity::N => (self.n_n, self.sigma_n, self.wr_n),
            Polarity::P => (self.n_p, self.sigma_p, self.wr_p),
        };
        let phi = self.thermal_voltage();
        n * mu * self.c_ox * wr * (w / l) * phi * phi * ((sigma * self.v_dd - vth) / (n * phi)).exp()
    }

    /// Series-stack leakage reduction 10^(−V_dd·σ/n).
    pub fn stack_factor(&self, pol: Polarity) -> f64 {
        let (n, sigma) = match pol {
            Polarity::N => (self.n_n, self.sigma_n),
            Polarity::P => (self.n_p, self.sigma_p),
        };
        10f64.powf(-self.v_dd * sigma / n)
    }

    /// `symbol = value # unit` lines; values use the shortest exact decimal.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# technology parameters (SI units)\n");
        for (sym, unit) in SYMBOLS {
            let _ = writeln!(s, "{sym} = {:?} # {unit}", self.get(sym).expect("known"));
        }
        s
    }

    /// Parses a full parameter file. Every symbol must appear exactly once.
    pub fn from_text(text: &str) -> Result<Self, TechError> {
        let mut p = TechnologyParams::nominal_45nm();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let Some((key, value)) = split_assignment(raw, i + 1)? else {
                continue;
            };
            let v: f64 = value.parse().map_err(|_| TechError::Parse {
                line: i + 1,
                message: format!("`{value}` is not a number"),
            })?;
            if p.slot(key).is_none() {
                return Err(TechError::UnknownSymbol(key.to_string()));
            }
            if !seen.insert(key.to_string()) {
                return Err(TechError::Parse {
                    line: i + 1,
                    message: format!("`{key}` given twice"),
                });
            }
            p.set(key, v)?;
        }
        for (sym, _) in SYMBOLS {
            if !seen.contains(sym) {
                return Err(TechError::Missing(sym));
            }
        }
        p.validate()?;
        Ok(p)
    }
}

/// `key = value # comment` → `(key, value)`; `None` for blank lines.
pub(crate) fn split_assignment(raw: &str, line: usize) -> Result<Option<(&str, &str)>, TechError> {
    let body = raw.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let (k, v) = body.split_once('=').ok_or_else(|| TechError::Parse {
        line,
        message: "expected `symbol = value`".into(),
    })?;
    Ok(Some((k.trim(), v.trim())))
}

/// Σ pin capacitances of the host sinks of `net` (intruded gates are
/// excluded). Flip-flop data pins count as two cell inputs: the inverter and
/// first NAND of the latch. Primary outputs and nets without sinks also see
/// `pad`.
pub fn load_capacitance(c: &Circuit, net: NetId, params: &TechnologyParams, pad: f64) -> f64 {
    let sinks = &c.net(net).sinks;
    let pin = params.pin_capacitance();
    let mut total = 0.0;
    for p in sinks {
        let g = c.gate(p.gate);
        if g.foreign {
            continue;
        }
        total += match g.kind {
            GateKind::Dff => 2.0 * pin,
            _ => pin,
        };
    }
    if sinks.is_empty() || c.is_primary_output(net) {
        total += pad;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn overlap_free_gate_cap() {
        let mut p = TechnologyParams::nominal_45nm();
        p.c_gso = 0.0;
        p.c_gdo = 0.0;
        assert_eq!(
            p.gate_capacitance(Polarity::N, 1.0, 1.0),
            p.w_nmin * p.l_n * p.c_ox
        );
    }

    #[test]
    fn gate_cap_linear_in_fo() {
        let p = TechnologyParams::nominal_45nm();
        let one = p.gate_capacitance(Polarity::P, 1.0, 2.0);
        assert!(close(p.gate_capacitance(Polarity::P, 2.0, 2.0), 2.0 * one, 1e-15));
    }

    #[test]
    fn resistance_halves_with_width() {
        let p = TechnologyParams::nominal_45nm();
        let r1 = p.on_resistance(Polarity::N, 1.0).unwrap();
        let r2 = p.on_resistance(Polarity::N, 2.0).unwrap();
        assert!(close(r1, 2.0 * r2, 1e-15));
    }

    #[test]
    fn not_conducting() {
        let mut p = TechnologyParams::nominal_45nm();
        p.v_thn = p.v_dd;
        let e = p.on_resistance(Polarity::N, 1.0).unwrap_err();
        assert!(e.to_string().contains("transistor not conducting"));
    }

    #[test]
    fn zero_junction_area() {
        let mut p = TechnologyParams::nominal_45nm();
        p.a_s = 0.0;
        p.p_s = 0.0;
        assert_eq!(p.diffusion_capacitance(CellKind::Nand2, 1.0), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let mut p = TechnologyParams::nominal_45nm();
        p.c_ox = 0.1 + 0.2;
        let q = TechnologyParams::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn text_errors() {
        let p = TechnologyParams::nominal_45nm().to_text();
        let missing: String = p.lines().filter(|l| !l.starts_with("C_ox")).collect::<Vec<_>>().join("\n");
        assert_eq!(
            TechnologyParams::from_text(&missing),
            Err(TechError::Missing("C_ox"))
        );
        let bad = p.replace("V_dd = 1.0", "V_dd = 0.2");
        assert!(matches!(
            TechnologyParams::from_text(&bad),
            Err(TechError::Invalid { symbol: "V_thn", .. })
        ));
        let unknown = format!("{p}\nfoo = 1\n");
        assert!(matches!(
            TechnologyParams::from_text(&unknown),
            Err(TechError::UnknownSymbol(_))
        ));
    }

    #[test]
    fn guard_rails() {
        let p = TechnologyParams::nominal_45nm();
        for pol in [Polarity::N, Polarity::P] {
            let c = p.gate_capacitance(pol, 1.0, p.width_ratio(pol));
            assert!((1e-17..=1e-13).contains(&c), "{c}");
            let r = p.on_resistance(pol, p.width_ratio(pol)).unwrap();
            assert!((100.0..=1e6).contains(&r), "{r}");
        }
    }
}
