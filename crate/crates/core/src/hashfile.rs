//! On-disk hash record, as canonical text or little-endian binary.
//!
//! Text form, one `key=value` per line, floats with 17 significant digits:
//!
//! ```text
//! format_version=1
//! n_c=3
//! sigma_star=2.0000000000000000e0
//! diameter=...
//! r=...
//! source_digest=sha256:<hex>
//! eigenvalues=0.0000000000000000e0,...
//! magnitudes=...
//! group_bounds=0-1,1-3
//! ordered=...
//! ```
//!
//! Binary form: the 16-byte magic `ISH1` followed by twelve NUL bytes, then
//! little-endian `f64` words `format_version, n_c, sigma_star, diameter, r,
//! n_groups`, `n_c` eigenvalues, `n_c` magnitudes, `2 * n_groups` group
//! bounds (start, end), `n_c` ordered values, and finally the 32 raw bytes of
//! the SHA-256 digest.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::{OrderedHash, SpectralHash};

pub const FORMAT_VERSION: u32 = 1;
pub const MAGIC: [u8; 16] = *b"ISH1\0\0\0\0\0\0\0\0\0\0\0\0";

#[derive(Debug, Clone, PartialEq)]
pub struct HashRecord {
    pub hash: SpectralHash,
    /// Sorted saliency magnitudes, kept so files can be compared with the
    /// ordered distance too.
    pub ordered: OrderedHash,
    /// SHA-256 of the source file bytes.
    pub source_digest: [u8; 32],
}

pub fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
        out[i] = u8::from_str_radix(std::str::from_utf8(chunk).ok()?, 16).ok()?;
    }
    Some(out)
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn float_list(vs: &[f64]) -> String {
    vs.iter().map(|&v| float(v)).collect::<Vec<_>>().join(",")
}

impl HashRecord {
    pub fn new(hash: SpectralHash, ordered: OrderedHash, source_bytes: &[u8]) -> Self {
        HashRecord {
            hash,
            ordered,
            source_digest: digest(source_bytes),
        }
    }

    pub fn to_text(&self) -> String {
        let h = &self.hash;
        let mut s = String::new();
        let _ = writeln!(s, "format_version={FORMAT_VERSION}");
        let _ = writeln!(s, "n_c={}", h.n_c());
        let _ = writeln!(s, "sigma_star={}", float(h.sigma_star));
        let _ = writeln!(s, "diameter={}", float(h.diameter));
        let _ = writeln!(s, "r={}", float(h.r));
        let _ = writeln!(s, "source_digest=sha256:{}", hex(&self.source_digest));
        let _ = writeln!(s, "eigenvalues={}", float_list(&h.eigenvalues));
        let _ = writeln!(s, "magnitudes={}", float_list(&h.magnitudes));
        let bounds: Vec<String> = h
            .group_bounds
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect();
        let _ = writeln!(s, "group_bounds={}", bounds.join(","));
        let _ = writeln!(s, "ordered={}", float_list(&self.ordered.values));
        s
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let h = &self.hash;
        let mut out = MAGIC.to_vec();
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        put(FORMAT_VERSION as f64);
        put(h.n_c() as f64);
        put(h.sigma_star);
        put(h.diameter);
        put(h.r);
        put(h.group_bounds.len() as f64);
        h.eigenvalues.iter().for_each(|&v| put(v));
        h.magnitudes.iter().for_each(|&v| put(v));
        for &(a, b) in &h.group_bounds {
            put(a as f64);
            put(b as f64);
        }
        self.ordered.values.iter().for_each(|&v| put(v));
        out.extend_from_slice(&self.source_digest);
        out
    }

    /// Parses either encoding, chosen by the leading magic.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(&MAGIC[..4]) {
            Self::from_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| Error::Format("neither binary magic nor UTF-8 text".into()))?;
            Self::from_text(text)
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line without `=`: {line}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("missing field `{k}`")))
        };
        let version: u32 = get("format_version")?
            .parse()
            .map_err(|_| Error::Format("bad format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad number in `{k}`")))
        };
        let list = |k: &str| -> Result<Vec<f64>> {
            let v = get(k)?;
            if v.is_empty() {
                return Ok(vec![]);
            }
            v.split(',')
                .map(|x| {
                    x.parse()
                        .map_err(|_| Error::Format(format!("bad number in `{k}`")))
                })
                .collect()
        };
        let n_c: usize = get("n_c")?
            .parse()
            .map_err(|_| Error::Format("bad n_c".into()))?;
        let digest = get("source_digest")?
            .strip_prefix("sha256:")
            .and_then(unhex)
            .ok_or_else(|| Error::Format("bad source_digest".into()))?;
        let mut group_bounds = vec![];
        let gb = get("group_bounds")?;
        if !gb.is_empty() {
            for item in gb.split(',') {
                let (a, b) = item
                    .split_once('-')
                    .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                    .ok_or_else(|| Error::Format(format!("bad group bound `{item}`")))?;
                group_bounds.push((a, b));
            }
        }
        let hash = SpectralHash {
            eigenvalues: list("eigenvalues")?,
            magnitudes: list("magnitudes")?,
            group_bounds,
            sigma_star: num("sigma_star")?,
            diameter: num("diameter")?,
            r: num("r")?,
        };
        let ordered = OrderedHash {
            values: list("ordered")?,
        };
        check(&hash, &ordered, n_c)?;
        Ok(HashRecord {
            hash,
            ordered,
            source_digest: digest,
        })
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[..16] != MAGIC {
            return Err(Error::Format("missing ISH1 magic".into()));
        }
        let mut words = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        let mut next = || {
            words
                .next()
                .ok_or_else(|| Error::Format("binary hash truncated".into()))
        };
        let version = next()?;
        if version != FORMAT_VERSION as f64 {
            return Err(Error::VersionMismatch {
                found: version as u32,
                expected: FORMAT_VERSION,
            });
        }
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::Format(format!("bad count {v}")))
            }
        };
        let n_c = count(next()?)?;
        let sigma_star = next()?;
        let diameter = next()?;
        let r = next()?;
        let n_groups = count(next()?)?;
        let expected = 16 + 8 * (6 + 3 * n_c + 2 * n_groups) + 32;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "binary hash has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let eigenvalues = (0..n_c).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let magnitudes = (0..n_c).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let mut group_bounds = Vec::with_capacity(n_groups);
        for _ in 0..n_groups {
            group_bounds.push((count(next()?)?, count(next()?)?));
        }
        let ordered = OrderedHash {
            values: (0..n_c).map(|_| next()).collect::<Result<Vec<_>>>()?,
        };
        let mut source_digest = [0u8; 32];
        source_digest.copy_from_slice(&bytes[bytes.len() - 32..]);
        let hash = SpectralHash {
            eigenvalues,
            magnitudes,
            group_bounds,
            sigma_star,
            diameter,
            r,
        };
        check(&hash, &ordered, n_c)?;
        Ok(HashRecord {
            hash,
            ordered,
            source_digest,
        })
    }
}

fn check(h: &SpectralHash, ordered: &OrderedHash, n_c: usize) -> Result<()> {
    if h.eigenvalues.len() != n_c || h.magnitudes.len() != n_c || ordered.n_c() != n_c {
        return Err(Error::Format(format!(
            "n_c={n_c} but {} eigenvalues, {} magnitudes and {} ordered values",
            h.eigenvalues.len(),
            h.magnitudes.len(),
            ordered.n_c()
        )));
    }
    let mut expect_start = 0;
    for &(a, b) in &h.group_bounds {
        if a != expect_start || b <= a || b > n_c {
            return Err(Error::Format(
                "group bounds do not tile the spectrum".into(),
            ));
        }
        expect_start = b;
    }
    if expect_start != n_c {
        return Err(Error::Format(
            "group bounds do not tile the spectrum".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> HashRecord {
        let mut h = SpectralHash::from_coefficients(
            vec![0.0, 0.5, 0.5, 1.0 / 3.0 + 1.0],
            &[0.1, -0.2, 0.3, std::f64::consts::PI],
        )
        .unwrap();
        h.sigma_star = 2.5;
        h.diameter = 101.25;
        h.r = 1.0 / 15.0;
        let ordered = crate::spectral::ordered_hash(&[0.5, -2.0, 1.0, 0.0]);
        HashRecord::new(h, ordered, b"pixels")
    }

    #[test]
    fn text_layout() {
        let text = sample().to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "format_version",
                "n_c",
                "sigma_star",
                "diameter",
                "r",
                "source_digest",
                "eigenvalues",
                "magnitudes",
                "group_bounds",
                "ordered"
            ]
        );
        assert!(text.contains("group_bounds=0-1,1-3,3-4\n"));
        assert!(text.contains("r=6.6666666666666666e-2\n"));
    }

    #[test]
    fn binary_layout() {
        let bin = sample().to_binary();
        assert_eq!(&bin[..4], b"ISH1");
        assert_eq!(&bin[..16], &MAGIC);
        assert_eq!(bin.len(), 16 + 8 * (6 + 12 + 6) + 32);
        assert_eq!(HashRecord::parse(&bin).unwrap(), sample());
    }

    #[test]
    fn version_mismatch() {
        let text = sample()
            .to_text()
            .replace("format_version=1", "format_version=2");
        assert!(matches!(
            HashRecord::parse(text.as_bytes()),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
        let mut bin = sample().to_binary();
        bin[16..24].copy_from_slice(&7.0f64.to_le_bytes());
        assert!(matches!(
            HashRecord::parse(&bin),
            Err(Error::VersionMismatch { .. })
        ));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(HashRecord::parse(b"hello"), Err(Error::Format(_))));
        let text = sample().to_text().replace("n_c=4", "n_c=5");
        assert!(matches!(
            HashRecord::parse(text.as_bytes()),
            Err(Error::Format(_))
        ));
        let bin = sample().to_binary();
        assert!(matches!(
            HashRecord::parse(&bin[..bin.len() - 1]),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #[test]
        fn both_encodings_roundtrip_exactly(
            values in proptest::collection::vec(0.0f64..1e3, 1..40),
            mags in proptest::collection::vec(-1e3f64..1e3, 40),
            sigma in 0.1f64..50.0,
        ) {
            let mut ev = values.clone();
            ev.sort_by(f64::total_cmp);
            ev[0] = 0.0;
            let mut h = SpectralHash::from_coefficients(ev.clone(), &mags[..ev.len()]).unwrap();
            h.sigma_star = sigma;
            h.diameter = sigma * 40.0;
            h.r = 1.0 / 15.0;
            let ordered = crate::spectral::ordered_hash(&mags[..ev.len()]);
            let rec = HashRecord::new(h, ordered, &[1, 2, 3]);
            prop_assert_eq!(&HashRecord::parse(rec.to_text().as_bytes()).unwrap(), &rec);
            prop_assert_eq!(&HashRecord::parse(&rec.to_binary()).unwrap(), &rec);
        }
    }
}
