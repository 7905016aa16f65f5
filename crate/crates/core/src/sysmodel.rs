//! Architecture parameters of the GPU + HBM-PIM system and the quantities
//! derived from them.
//!
//! Units: times in nanoseconds, bandwidth in GB/s, sizes in bytes. Since
//! 1 GB/s is exactly 1 byte/ns, bandwidths are used directly as bytes/ns.
//!
//! Config files are TOML with four optional sections (`[dram]`, `[geometry]`,
//! `[pim]`, `[gpu]`); every omitted key takes the HBM3 default below.
//!
//! ```toml
//! [dram]
//! t_rp = 15.0
//! t_ras = 33.0
//! t_ccdl = 3.33
//! t_rcd = 15.0                 # activation-to-column delay
//! # act_slot_ns = 1.6667       # command-bus slot of an ACT; defaults to tCCDS
//! precharge_after_column = true
//!
//! [geometry]
//! banks_per_pch = 16
//! banks_per_stack = 512
//! row_buffer_bytes = 1024
//! word_bytes = 32
//! pim_units_per_stack = 256
//! rows_per_bank = 32768
//!
//! [pim]
//! registers_per_alu = 16
//! cmd_bw_multiplier = 1.0
//!
//! [gpu]
//! peak_bw_gbs = 614.4
//! bw_efficiency = 0.9
//! elem_bytes = 2
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DramTiming {
    pub t_rp: f64,
    pub t_ras: f64,
    /// Spacing of back-to-back column commands within a bank group; the
    /// issue interval of multi-bank PIM commands.
    pub t_ccdl: f64,
    /// Row-activation-to-column delay. HBM3 tables omit it here, so it
    /// defaults to tRP.
    pub t_rcd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub act_slot_ns: Option<f64>,
    /// Re-activating a bank waits tRP after its last column command ends.
    pub precharge_after_column: bool,
}

impl Default for DramTiming {
    fn default() -> Self {
        Self {
            t_rp: 15.0,
            t_ras: 33.0,
            t_ccdl: 3.33,
            t_rcd: 15.0,
            act_slot_ns: None,
            precharge_after_column: true,
        }
    }
}

impl DramTiming {
    pub fn t_rc(&self) -> f64 {
        self.t_ras + self.t_rp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub banks_per_pch: u32,
    pub banks_per_stack: u32,
    pub row_buffer_bytes: u32,
    pub word_bytes: u32,
    pub pim_units_per_stack: u32,
    pub rows_per_bank: u32,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            banks_per_pch: 16,
            banks_per_stack: 512,
            row_buffer_bytes: 1024,
            word_bytes: 32,
            pim_units_per_stack: 256,
            rows_per_bank: 32768,
        }
    }
}

impl Geometry {
    pub fn num_pch(&self) -> u32 {
        self.banks_per_stack / self.banks_per_pch
    }

    pub fn banks_per_pim_unit(&self) -> u32 {
        self.banks_per_stack / self.pim_units_per_stack
    }

    pub fn pim_units_per_pch(&self) -> u32 {
        self.banks_per_pch / self.banks_per_pim_unit()
    }

    pub fn words_per_row(&self) -> u32 {
        self.row_buffer_bytes / self.word_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PimResources {
    pub registers_per_alu: u32,
    /// Extra issue slots available to single-bank commands that carry no
    /// payload on the data bus.
    pub cmd_bw_multiplier: f64,
}

impl Default for PimResources {
    fn default() -> Self {
        Self {
            registers_per_alu: 16,
            cmd_bw_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpuModel {
    pub peak_bw_gbs: f64,
    pub bw_efficiency: f64,
    pub elem_bytes: u32,
}

impl Default for GpuModel {
    fn default() -> Self {
        Self {
            peak_bw_gbs: 614.4,
            bw_efficiency: 0.9,
            elem_bytes: 2,
        }
    }
}

impl GpuModel {
    /// Effective GPU bandwidth in bytes/ns.
    pub fn effective_bw(&self) -> f64 {
        self.peak_bw_gbs * self.bw_efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub dram: DramTiming,
    pub geometry: Geometry,
    pub pim: PimResources,
    pub gpu: GpuModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub num_pch: u32,
    pub banks_per_pch: u32,
    pub banks_per_pim_unit: u32,
    pub pim_units_per_pch: u32,
    pub words_per_row: u32,
    pub word_bytes: u32,
    /// bytes/ns
    pub per_pch_bw: f64,
    pub pim_bw_multiplier: f64,
    /// One word over the pCH data bus; also tCCDS.
    pub slot_regular: f64,
    /// Issue interval of a multi-bank command (tCCDL).
    pub slot_multibank: f64,
    pub slot_act: f64,
    pub slot_nodata: f64,
    pub cmd_bw_multiplier: f64,
    pub t_rc: f64,
    pub t_rcd: f64,
    pub t_rp: f64,
    pub precharge_after_column: bool,
}

impl DerivedParams {
    pub fn t_ccds(&self) -> f64 {
        self.slot_regular
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Invariant(format!("{name} must be strictly positive (got {v})")))
    }
}

impl SystemConfig {
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(source).map_err(|e| Error::ConfigParse {
            path: e
                .span()
                .map(|s| locate(source, s.start))
                .unwrap_or_else(|| "<root>".into()),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::ConfigParse { path: p, msg } => Error::ConfigParse {
                path: format!("{}:{p}", path.display()),
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dram;
        positive("dram.t_rp", d.t_rp)?;
        positive("dram.t_ras", d.t_ras)?;
        positive("dram.t_ccdl", d.t_ccdl)?;
        positive("dram.t_rcd", d.t_rcd)?;
        if let Some(a) = d.act_slot_ns {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Invariant(format!("dram.act_slot_ns must be >= 0 (got {a})")));
            }
        }

        let g = &self.geometry;
        for (name, v) in [
            ("geometry.banks_per_pch", g.banks_per_pch),
            ("geometry.banks_per_stack", g.banks_per_stack),
            ("geometry.row_buffer_bytes", g.row_buffer_bytes),
            ("geometry.word_bytes", g.word_bytes),
            ("geometry.pim_units_per_stack", g.pim_units_per_stack),
            ("geometry.rows_per_bank", g.rows_per_bank),
        ] {
            if v == 0 {
                return Err(Error::Invariant(format!("{name} must be strictly positive")));
            }
        }
        if !g.banks_per_stack.is_multiple_of(g.banks_per_pch) {
            return Err(Error::Invariant(format!(
                "banks_per_stack ({}) not divisible by banks_per_pch ({})",
                g.banks_per_stack, g.banks_per_pch
            )));
        }
        if !g.banks_per_stack.is_multiple_of(g.pim_units_per_stack) {
            return Err(Error::Invariant(format!(
                "banks_per_stack ({}) not divisible by pim_units_per_stack ({})",
                g.banks_per_stack, g.pim_units_per_stack
            )));
        }
        if !g.banks_per_pch.is_multiple_of(g.banks_per_pim_unit()) {
            return Err(Error::Invariant(format!(
                "banks_per_pch ({}) not divisible by banks per PIM unit ({})",
                g.banks_per_pch,
                g.banks_per_pim_unit()
            )));
        }
        if g.banks_per_pim_unit() > 2 {
            return Err(Error::Invariant(
                "at most two banks (one even/odd pair) may share a PIM unit".into(),
            ));
        }
        if !g.row_buffer_bytes.is_multiple_of(g.word_bytes) {
            return Err(Error::Invariant(format!(
                "row_buffer_bytes ({}) not divisible by word_bytes ({})",
                g.row_buffer_bytes, g.word_bytes
            )));
        }
        if g.banks_per_pch > u16::MAX as u32 {
            return Err(Error::Invariant("banks_per_pch too large".into()));
        }

        if self.pim.registers_per_alu < 1 || self.pim.registers_per_alu > 256 {
            return Err(Error::Invariant(format!(
                "pim.registers_per_alu must be in [1, 256] (got {})",
                self.pim.registers_per_alu
            )));
        }
        let m = self.pim.cmd_bw_multiplier;
        if !(m.is_finite() && m >= 1.0) {
            return Err(Error::Invariant(format!("pim.cmd_bw_multiplier must be >= 1 (got {m})")));
        }

        positive("gpu.peak_bw_gbs", self.gpu.peak_bw_gbs)?;
        let eff = self.gpu.bw_efficiency;
        if !(eff > 0.0 && eff <= 1.0) {
            return Err(Error::Invariant(format!(
                "gpu.bw_efficiency: fraction out of range (0, 1] (got {eff})"
            )));
        }
        if self.gpu.elem_bytes == 0 {
            return Err(Error::Invariant("gpu.elem_bytes must be strictly positive".into()));
        }

        let per_pch_bw = self.gpu.peak_bw_gbs / g.num_pch() as f64;
        let t_ccds = g.word_bytes as f64 / per_pch_bw;
        if t_ccds > d.t_ccdl + 1e-12 {
            return Err(Error::Invariant(format!(
                "derived tCCDS ({t_ccds:.4} ns) exceeds tCCDL ({} ns)",
                d.t_ccdl
            )));
        }
        Ok(())
    }

    pub fn derive(&self) -> DerivedParams {
        let g = &self.geometry;
        let num_pch = g.num_pch();
        let per_pch_bw = self.gpu.peak_bw_gbs / num_pch as f64;
        let slot_regular = g.word_bytes as f64 / per_pch_bw;
        let slot_multibank = self.dram.t_ccdl;
        let parity_groups = g.banks_per_pim_unit();
        let pim_bw_multiplier =
            (g.banks_per_pch as f64 / parity_groups as f64) * (slot_regular / slot_multibank);
        DerivedParams {
            num_pch,
            banks_per_pch: g.banks_per_pch,
            banks_per_pim_unit: parity_groups,
            pim_units_per_pch: g.pim_units_per_pch(),
            words_per_row: g.words_per_row(),
            word_bytes: g.word_bytes,
            per_pch_bw,
            pim_bw_multiplier,
            slot_regular,
            slot_multibank,
            slot_act: self.dram.act_slot_ns.unwrap_or(slot_regular),
            slot_nodata: slot_regular / self.pim.cmd_bw_multiplier,
            cmd_bw_multiplier: self.pim.cmd_bw_multiplier,
            t_rc: self.dram.t_rc(),
            t_rcd: self.dram.t_rcd,
            t_rp: self.dram.t_rp,
            precharge_after_column: self.dram.precharge_after_column,
        }
    }
}

fn locate(source: &str, offset: usize) -> String {
    let upto = &source[..offset.min(source.len())];
    let line = upto.matches('\n').count() + 1;
    let col = upto.rsplit('\n').next().map(|l| l.len() + 1).unwrap_or(1);
    format!("line {line}, column {col}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_overrides_give_table_defaults() {
        let cfg = SystemConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.dram.t_rp, 15.0);
        assert_eq!(cfg.dram.t_ras, 33.0);
        assert_eq!(cfg.dram.t_ccdl, 3.33);
        assert_eq!(cfg.geometry.banks_per_pch, 16);
        assert_eq!(cfg.geometry.banks_per_stack, 512);
        assert_eq!(cfg.geometry.row_buffer_bytes, 1024);
        assert_eq!(cfg.geometry.pim_units_per_stack, 256);
        assert_eq!(cfg.pim.registers_per_alu, 16);
        assert_eq!(cfg.gpu.peak_bw_gbs, 614.4);
        assert_eq!(cfg, SystemConfig::default());
    }

    #[test]
    fn efficiency_out_of_range_rejected() {
        let err = SystemConfig::from_toml_str("[gpu]\nbw_efficiency = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("fraction out of range"), "{err}");
    }

    #[test]
    fn indivisible_banks_rejected() {
        let err = SystemConfig::from_toml_str("[geometry]\nbanks_per_stack = 500\nbanks_per_pch = 16\n")
            .unwrap_err();
        assert!(err.to_string().contains("not divisible"), "{err}");
    }

    #[test]
    fn parse_error_reports_location() {
        let err = SystemConfig::from_toml_str("[dram]\nt_rp = \"fast\"\n").unwrap_err();
        match err {
            Error::ConfigParse { path, .. } => assert!(path.contains("line 2"), "{path}"),
            other => panic!("unexpected {other}"),
        }
        let err = SystemConfig::from_toml_str("[dram]\nt_rpp = 1.0\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { .. }));
    }

    #[test]
    fn derived_defaults() {
        let d = SystemConfig::default().derive();
        assert_eq!(d.num_pch, 32);
        assert!((d.per_pch_bw - 19.2).abs() < 1e-12);
        assert!((d.slot_regular - 32.0 / 19.2).abs() < 1e-12);
        assert!((d.slot_regular - 1.6667).abs() < 1e-3);
        assert_eq!(d.slot_multibank, 3.33);
        // (16 / 2) * (1.6667 / 3.33)
        let expected = 8.0 * (32.0 / 19.2) / 3.33;
        assert!((d.pim_bw_multiplier - expected).abs() < 1e-12);
        assert!((d.pim_bw_multiplier - 4.0).abs() < 0.01);
        assert!((d.per_pch_bw * d.num_pch as f64 - 614.4).abs() < 1e-9);
        assert_eq!(d.t_rc, 48.0);
        assert!(d.t_ccds() <= d.slot_multibank);
    }

    #[test]
    fn round_trip_default() {
        let cfg = SystemConfig::default();
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }
}
