//! Hashing parameters and their `key=value` file form.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashParams {
    /// First-round detection scale in pixels.
    pub sigma0: f64,
    /// Ratio between the final detection scale and the first-round diameter.
    pub rho: f64,
    /// Harris sensitivity.
    pub kappa: f64,
    /// Graph connectivity radius, relative to the corner-set diameter.
    pub r: f64,
    pub max_corners: usize,
    /// Number of eigenvalues / coefficients compared by the spectral distances.
    pub k: usize,
}

impl Default for HashParams {
    fn default() -> Self {
        HashParams {
            sigma0: 2.0,
            rho: 0.025,
            kappa: 0.04,
            r: 1.0 / 15.0,
            max_corners: 100,
            k: 10,
        }
    }
}

impl HashParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma0", self.sigma0),
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("r", self.r),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.rho >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "rho must be below 1, got {}",
                self.rho
            )));
        }
        if self.max_corners == 0 {
            return Err(Error::InvalidParameter(
                "max_corners must be at least 1".into(),
            ));
        }
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad =
            |e: &dyn std::fmt::Display| Error::InvalidParameter(format!("{key}={value}: {e}"));
        let float = || value.parse::<f64>().map_err(|e| bad(&e));
        let count = || value.parse::<usize>().map_err(|e| bad(&e));
        match key {
            "sigma0" => self.sigma0 = float()?,
            "rho" => self.rho = float()?,
            "kappa" => self.kappa = float()?,
            "r" => self.r = float()?,
            "max_corners" => self.max_corners = count()?,
            "k" => self.k = count()?,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown parameter `{key}`"
                )))
            }
        }
        Ok(())
    }

    /// Parses `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn merge_config(mut self, text: &str) -> Result<Self> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(self)
    }

    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sigma0={}", self.sigma0);
        let _ = writeln!(s, "rho={}", self.rho);
        let _ = writeln!(s, "kappa={}", self.kappa);
        let _ = writeln!(s, "r={}", self.r);
        let _ = writeln!(s, "max_corners={}", self.max_corners);
        let _ = writeln!(s, "k={}", self.k);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = HashParams::default();
        p.validate().unwrap();
        assert_eq!(p.r, 1.0 / 15.0);
        assert_eq!((p.max_corners, p.k), (100, 10));
    }

    #[test]
    fn config_roundtrip_and_override() {
        let p = HashParams {
            rho: 0.05,
            k: 7,
            ..HashParams::default()
        };
        assert_eq!(
            HashParams::default().merge_config(&p.to_config()).unwrap(),
            p
        );
        let q = HashParams::default()
            .merge_config("# frozen\n\nkappa = 0.06\n")
            .unwrap();
        assert_eq!(q.kappa, 0.06);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(HashParams::default().merge_config("bogus=1").is_err());
        assert!(HashParams::default().merge_config("rho").is_err());
        let p = HashParams::default().merge_config("rho=1.5").unwrap();
        assert!(p.validate().is_err());
        let p = HashParams {
            k: 1,
            ..HashParams::default()
        };
        assert!(p.validate().is_err());
    }
}
