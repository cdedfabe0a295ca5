//! Run configuration: flat `key = value` files with `#` comments, merged
//! over defaults and overridden by command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FluxError, Result};
use crate::kernelspace::validate_params;
use crate::numerics::QuadratureSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gamma: f64,
    pub p: f64,
    pub z_a: f64,
    pub z_b: f64,
    pub epsilon: f64,
    pub s: f64,
    pub j0: f64,
    pub n: usize,
    pub quad_abs_tol: f64,
    pub quad_rel_tol: f64,
    pub k_scan_lo: f64,
    pub k_scan_hi: f64,
    pub k_max: f64,
    pub m: f64,
    pub fp_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub z_search_lo: f64,
    pub z_search_hi: f64,
    pub verify_tol: f64,
    pub verify_points: usize,
    pub fig_k_lo: f64,
    pub fig_k_hi: f64,
    pub fig_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            p: 0.0,
            z_a: 2.0,
            z_b: 1.0,
            epsilon: 0.02,
            s: 0.01,
            j0: 1.0,
            n: 16,
            quad_abs_tol: 1e-13,
            quad_rel_tol: 1e-12,
            k_scan_lo: 15.0,
            k_scan_hi: 25.0,
            k_max: 500.0,
            m: 10.0,
            fp_tol: 1e-12,
            max_iter: 50,
            seed: 1,
            out_dir: PathBuf::from("out"),
            z_search_lo: 0.5,
            z_search_hi: 4.0,
            verify_tol: 1e-4,
            verify_points: 32,
            fig_k_lo: 19.31,
            fig_k_hi: 19.53,
            fig_points: 512,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| FluxError::Config(format!("bad value for {key}: {v:?}")))
}

impl RunConfig {
    pub fn keys() -> &'static [&'static str] {
        &[
            "gamma", "p", "z_a", "z_b", "epsilon", "s", "J0", "N", "quad_abs_tol", "quad_rel_tol", "k_scan_lo",
            "k_scan_hi", "K_max", "M", "fp_tol", "max_iter", "seed", "out_dir", "z_search_lo", "z_search_hi",
            "verify_tol", "verify_points", "fig_k_lo", "fig_k_hi", "fig_points",
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "gamma" => self.gamma = parse_num(key, v)?,
            "p" => self.p = parse_num(key, v)?,
            "z_a" => self.z_a = parse_num(key, v)?,
            "z_b" => self.z_b = parse_num(key, v)?,
            "epsilon" => self.epsilon = parse_num(key, v)?,
            "s" => self.s = parse_num(key, v)?,
            "J0" | "j0" => self.j0 = parse_num(key, v)?,
            "N" | "n" => self.n = parse_num(key, v)?,
            "quad_abs_tol" => self.quad_abs_tol = parse_num(key, v)?,
            "quad_rel_tol" => self.quad_rel_tol = parse_num(key, v)?,
            "k_scan_lo" => self.k_scan_lo = parse_num(key, v)?,
            "k_scan_hi" => self.k_scan_hi = parse_num(key, v)?,
            "K_max" | "k_max" => self.k_max = parse_num(key, v)?,
            "M" | "m" => self.m = parse_num(key, v)?,
            "fp_tol" => self.fp_tol = parse_num(key, v)?,
            "max_iter" => self.max_iter = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "z_search_lo" => self.z_search_lo = parse_num(key, v)?,
            "z_search_hi" => self.z_search_hi = parse_num(key, v)?,
            "verify_tol" => self.verify_tol = parse_num(key, v)?,
            "verify_points" => self.verify_points = parse_num(key, v)?,
            "fig_k_lo" => self.fig_k_lo = parse_num(key, v)?,
            "fig_k_hi" => self.fig_k_hi = parse_num(key, v)?,
            "fig_points" => self.fig_points = parse_num(key, v)?,
            _ => return Err(FluxError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| FluxError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_params(self.gamma, self.p)?;
        let tols = [self.quad_abs_tol, self.quad_rel_tol, self.fp_tol, self.verify_tol];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(FluxError::Config("all tolerances must be positive".into()));
        }
        if self.n < 8 {
            return Err(FluxError::Config(format!("N must be at least 8, got {}", self.n)));
        }
        if !(self.k_scan_lo > 0.0 && self.k_scan_lo < self.k_scan_hi && self.k_scan_hi < self.k_max) {
            return Err(FluxError::Config("need 0 < k_scan_lo < k_scan_hi < K_max".into()));
        }
        if !(self.j0 > 0.0 && self.m > 0.0) {
            return Err(FluxError::Config("J0 and M must be positive".into()));
        }
        if self.fig_points < 2 || self.verify_points < 1 {
            return Err(FluxError::Config("grid sizes too small".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` text, one line per key in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("gamma", format!("{:?}", self.gamma));
        put("p", format!("{:?}", self.p));
        put("z_a", format!("{:?}", self.z_a));
        put("z_b", format!("{:?}", self.z_b));
        put("epsilon", format!("{:?}", self.epsilon));
        put("s", format!("{:?}", self.s));
        put("J0", format!("{:?}", self.j0));
        put("N", self.n.to_string());
        put("quad_abs_tol", format!("{:?}", self.quad_abs_tol));
        put("quad_rel_tol", format!("{:?}", self.quad_rel_tol));
        put("k_scan_lo", format!("{:?}", self.k_scan_lo));
        put("k_scan_hi", format!("{:?}", self.k_scan_hi));
        put("K_max", format!("{:?}", self.k_max));
        put("M", format!("{:?}", self.m));
        put("fp_tol", format!("{:?}", self.fp_tol));
        put("max_iter", self.max_iter.to_string());
        put("seed", self.seed.to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("z_search_lo", format!("{:?}", self.z_search_lo));
        put("z_search_hi", format!("{:?}", self.z_search_hi));
        put("verify_tol", format!("{:?}", self.verify_tol));
        put("verify_points", self.verify_points.to_string());
        put("fig_k_lo", format!("{:?}", self.fig_k_lo));
        put("fig_k_hi", format!("{:?}", self.fig_k_hi));
        put("fig_points", self.fig_points.to_string());
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical text, excluding `out_dir`.
    pub fn hash(&self) -> String {
        let text: String = self.to_text().lines().filter(|l| !l.starts_with("out_dir")).map(|l| format!("{l}\n")).collect();
        let digest = Sha256::digest(text.as_bytes());
        format!("{digest:x}")[..16].to_string()
    }

    pub fn quad_spec(&self) -> QuadratureSpec {
        QuadratureSpec { abs_tol: self.quad_abs_tol, rel_tol: self.quad_rel_tol, ..QuadratureSpec::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\ngamma = 0.2\n p=0.1 # trailing\n\nN = 24\n").unwrap();
        assert_eq!((c.gamma, c.p, c.n), (0.2, 0.1, 24));
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert_eq!(c.hash(), d.hash());
        d.out_dir = PathBuf::from("elsewhere");
        assert_eq!(c.hash(), d.hash());
        d.s = 0.02;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("nonsense").is_err());
        assert!(c.apply_text("colour = red").is_err());
        assert!(c.apply_text("N = x").is_err());
        c.gamma = 0.6;
        c.p = 0.3;
        assert!(matches!(c.validate(), Err(FluxError::NoConstantFluxRegime(_))));
        assert!(RunConfig { n: 4, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
        assert_eq!(RunConfig::keys().len(), 25);
    }
}
