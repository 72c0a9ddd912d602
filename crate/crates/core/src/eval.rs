//! Evaluation harness: labelled pairs of original and transformed images,
//! distances under each metric, ROC curves and AUC.

use std::fmt;
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::params::HashParams;
use crate::pipeline::analyze;
use crate::spectral::{
    distance_combined, distance_ord, distance_sp, effective_k, OrderedHash, SpectralHash,
};
use crate::transform::{apply, suite_specs, TransformSpec, VariantMode};

/// Two-sided 99% normal quantile.
const Z99: f64 = 2.5758293035489;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Ord,
    Sp,
    SpDelta,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Ord, Metric::Sp, Metric::SpDelta];
    pub const SPECTRAL: [Metric; 2] = [Metric::Sp, Metric::SpDelta];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ord => "ord",
            Metric::Sp => "sp",
            Metric::SpDelta => "sp_delta",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ord" => Ok(Metric::Ord),
            "sp" => Ok(Metric::Sp),
            "sp_delta" | "sp-delta" => Ok(Metric::SpDelta),
            _ => Err(Error::InvalidParameter(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDistance {
    pub image_a: String,
    pub image_b: String,
    pub metric: Metric,
    /// Number of coefficients actually compared.
    pub k: usize,
    pub distance: f64,
    pub similar: bool,
}

/// One image taking part in an experiment: an original or a transformed copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub id: String,
    pub source: usize,
    pub transform: Option<TransformSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub similar: bool,
}

/// Entries (originals first, then each original's variants in turn) and
/// the labelled pairs drawn from them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub entries: Vec<Entry>,
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.similar).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }
}

/// Pairs every original with each of its variants (positives) and with every
/// other original; originals against variants of other images are added by
/// seeded uniform sampling until the negatives reach twice the positives.
pub fn build_pairs(
    names: &[String],
    variants_per_image: usize,
    mode: VariantMode,
    seed: u64,
) -> Result<PairSet> {
    let n = names.len();
    if n < 2 {
        return Err(Error::Harness(format!(
            "corpus needs at least 2 images, got {n}"
        )));
    }
    if variants_per_image == 0 {
        return Err(Error::Harness(
            "at least one variant per image is required".into(),
        ));
    }
    let v = variants_per_image;
    let specs = suite_specs(mode, v, seed);
    let mut entries: Vec<Entry> = names
        .iter()
        .enumerate()
        .map(|(i, name)| Entry {
            id: name.clone(),
            source: i,
            transform: None,
        })
        .collect();
    for (i, name) in names.iter().enumerate() {
        for (j, spec) in specs.iter().enumerate() {
            entries.push(Entry {
                id: format!("{name}#{j}"),
                source: i,
                transform: Some(*spec),
            });
        }
    }
    let variant = |i: usize, j: usize| n + i * v + j;

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..v {
            pairs.push(Pair {
                a: i,
                b: variant(i, j),
                similar: true,
            });
        }
    }
    let positives = pairs.len();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(Pair {
                a: i,
                b: j,
                similar: false,
            });
        }
    }
    let budget = (2 * positives).saturating_sub(pairs.len() - positives);
    let cross = n * (n - 1) * v;
    let take = budget.min(cross);
    if take > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut picked = index::sample(&mut rng, cross, take).into_vec();
        picked.sort_unstable();
        for c in picked {
            let (i, rest) = (c / ((n - 1) * v), c % ((n - 1) * v));
            let (mut other, j) = (rest / v, rest % v);
            if other >= i {
                other += 1;
            }
            pairs.push(Pair {
                a: i,
                b: variant(other, j),
                similar: false,
            });
        }
    }
    Ok(PairSet { entries, pairs })
}

/// What is kept of each hashed entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub spectral: SpectralHash,
    pub ordered: OrderedHash,
}

/// Hashes every entry in parallel. Entries whose hash fails are `None` and a
/// warning is logged; the result order never depends on scheduling.
pub fn hash_entries(
    images: &[GrayImage],
    entries: &[Entry],
    params: &HashParams,
) -> Result<Vec<Option<Signature>>> {
    params.validate()?;
    entries
        .par_iter()
        .map(|e| {
            let src = images.get(e.source).ok_or_else(|| {
                Error::Harness(format!(
                    "entry {} refers to missing image {}",
                    e.id, e.source
                ))
            })?;
            let transformed;
            let img = match &e.transform {
                Some(t) => {
                    transformed = apply(src, t)?;
                    &transformed
                }
                None => src,
            };
            Ok(match analyze(img, params) {
                Ok(a) => Some(Signature {
                    spectral: a.spectral,
                    ordered: a.ordered,
                }),
                Err(err) => {
                    log::warn!("excluding {}: {err}", e.id);
                    None
                }
            })
        })
        .collect()
}

/// Distance between two signatures. `k = None` compares the full length of
/// the shorter hash.
pub fn signature_distance(
    a: &Signature,
    b: &Signature,
    metric: Metric,
    k: Option<usize>,
) -> Result<(usize, f64)> {
    match metric {
        Metric::Ord => Ok((
            a.ordered.n_c().min(b.ordered.n_c()),
            distance_ord(&a.ordered, &b.ordered),
        )),
        Metric::Sp | Metric::SpDelta => {
            let k = effective_k(&a.spectral, &b.spectral, k.unwrap_or(usize::MAX));
            let d = if metric == Metric::Sp {
                distance_sp(&a.spectral, &b.spectral, k)?
            } else {
                distance_combined(&a.spectral, &b.spectral, k)?
            };
            Ok((k, d))
        }
    }
}

/// A corpus with its variants hashed once, ready for any metric and k.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub pairs: PairSet,
    pub signatures: Vec<Option<Signature>>,
}

impl Experiment {
    pub fn run(
        images: &[GrayImage],
        names: &[String],
        variants_per_image: usize,
        mode: VariantMode,
        seed: u64,
        params: &HashParams,
    ) -> Result<Self> {
        if images.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: images.len(),
            });
        }
        let pairs = build_pairs(names, variants_per_image, mode, seed)?;
        let signatures = hash_entries(images, &pairs.entries, params)?;
        Ok(Experiment { pairs, signatures })
    }

    /// Ids of entries that could not be hashed.
    pub fn excluded(&self) -> Vec<&str> {
        self.pairs
            .entries
            .iter()
            .zip(&self.signatures)
            .filter(|(_, s)| s.is_none())
            .map(|(e, _)| e.id.as_str())
            .collect()
    }

    /// Labelled distances for every pair whose two entries hashed and whose
    /// distance is defined.
    pub fn distances(&self, metric: Metric, k: Option<usize>) -> Vec<LabeledDistance> {
        let out: Vec<Option<LabeledDistance>> = self
            .pairs
            .pairs
            .par_iter()
            .map(|p| {
                let (sa, sb) = (
                    self.signatures[p.a].as_ref()?,
                    self.signatures[p.b].as_ref()?,
                );
                let (ea, eb) = (&self.pairs.entries[p.a], &self.pairs.entries[p.b]);
                match signature_distance(sa, sb, metric, k) {
                    Ok((k, distance)) => Some(LabeledDistance {
                        image_a: ea.id.clone(),
                        image_b: eb.id.clone(),
                        metric,
                        k,
                        distance,
                        similar: p.similar,
                    }),
                    Err(err) => {
                        log::warn!("skipping pair {} / {}: {err}", ea.id, eb.id);
                        None
                    }
                }
            })
            .collect();
        out.into_iter().flatten().collect()
    }

    pub fn roc(&self, metric: Metric, k: Option<usize>) -> Result<RocReport> {
        roc(&self.distances(metric, k))
    }

    /// One AUC per (k, spectral metric). `None` stands for the full hash.
    pub fn auc_vs_k(&self, ks: &[Option<usize>]) -> Result<Vec<AucPoint>> {
        let mut rows = Vec::with_capacity(2 * ks.len());
        for &k in ks {
            if let Some(k) = k {
                if k < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "k must be at least 2, got {k}"
                    )));
                }
            }
            for metric in Metric::SPECTRAL {
                rows.push(AucPoint {
                    k,
                    metric,
                    auc: self.roc(metric, k)?.auc,
                });
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucPoint {
    pub k: Option<usize>,
    pub metric: Metric,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    /// Ordered by increasing threshold, from (0, 0) to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

pub fn roc(distances: &[LabeledDistance]) -> Result<RocReport> {
    roc_from_scores(distances.iter().map(|d| (d.distance, d.similar)))
}

/// ROC of the rule "similar iff distance < T", swept over -inf, the
/// midpoints between consecutive distinct distances, and +inf.
pub fn roc_from_scores(scores: impl IntoIterator<Item = (f64, bool)>) -> Result<RocReport> {
    let mut scores: Vec<(f64, bool)> = scores.into_iter().collect();
    if let Some((d, _)) = scores.iter().find(|(d, _)| !d.is_finite() || *d < 0.0) {
        return Err(Error::Harness(format!("invalid distance {d}")));
    }
    let p = scores.iter().filter(|s| s.1).count();
    let n = scores.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::Harness(format!(
            "ROC needs both classes, got {p} positive and {n} negative pairs"
        )));
    }
    scores.sort_by(|a, b| a.0.total_cmp(&b.0));

    let point = |threshold: f64, tp: usize, fp: usize| RocPoint {
        threshold,
        fpr: fp as f64 / n as f64,
        tpr: tp as f64 / p as f64,
        tp,
        fp,
        tn: n - fp,
        fn_: p - tp,
    };
    let mut points = vec![point(f64::NEG_INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the area, in units of 1/(P N)
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < scores.len() {
        let d = scores[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < scores.len() && scores[i].0 == d {
            if scores[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        let threshold = if i < scores.len() {
            d + (scores[i].0 - d) / 2.0
        } else {
            f64::INFINITY
        };
        points.push(point(threshold, tp, fp));
    }
    let auc = area2 as f64 / (2 * p as u128 * n as u128) as f64;
    Ok(RocReport {
        points,
        auc,
        positives: p,
        negatives: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicePoint {
    pub delta: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub count: usize,
}

/// Mean D_Sp between frames `delta` apart, for every delta up to
/// `max_offset`, averaged over all (z, z +/- delta, variant) triples: frame z
/// against each transformed copy of the other frame. With no variants the
/// frames are compared directly.
pub fn ordered_slice_curve(
    frames: &[GrayImage],
    max_offset: usize,
    mode: VariantMode,
    variants: usize,
    seed: u64,
    params: &HashParams,
) -> Result<Vec<SlicePoint>> {
    if max_offset == 0 || frames.len() <= max_offset {
        return Err(Error::Harness(format!(
            "need more than {max_offset} frames and an offset of at least 1, got {} frames",
            frames.len()
        )));
    }
    let specs = suite_specs(mode, variants, seed);
    let nf = frames.len();
    let mut entries: Vec<Entry> = (0..nf)
        .map(|z| Entry {
            id: format!("frame{z}"),
            source: z,
            transform: None,
        })
        .collect();
    for z in 0..nf {
        for (j, t) in specs.iter().enumerate() {
            entries.push(Entry {
                id: format!("frame{z}#{j}"),
                source: z,
                transform: Some(*t),
            });
        }
    }
    let sigs = hash_entries(frames, &entries, params)?;
    let k = Some(params.k);
    let dist = |a: usize, b: usize| -> Option<f64> {
        let (sa, sb) = (sigs[a].as_ref()?, sigs[b].as_ref()?);
        match signature_distance(sa, sb, Metric::Sp, k) {
            Ok((_, d)) => Some(d),
            Err(err) => {
                log::warn!("skipping {} / {}: {err}", entries[a].id, entries[b].id);
                None
            }
        }
    };

    let mut curve = Vec::with_capacity(max_offset);
    for delta in 1..=max_offset {
        let mut samples = Vec::new();
        for z in 0..nf - delta {
            let w = z + delta;
            if specs.is_empty() {
                samples.extend(dist(z, w));
            } else {
                for j in 0..specs.len() {
                    samples.extend(dist(z, nf + w * specs.len() + j));
                    samples.extend(dist(w, nf + z * specs.len() + j));
                }
            }
        }
        if samples.is_empty() {
            return Err(Error::Harness(format!(
                "no comparable pairs at offset {delta}"
            )));
        }
        let count = samples.len();
        let mean = samples.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = Z99 * sd / (count as f64).sqrt();
        curve.push(SlicePoint {
            delta,
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
            count,
        });
    }
    Ok(curve)
}

fn fmt_k(k: Option<usize>) -> String {
    k.map_or_else(|| "all".to_string(), |k| k.to_string())
}

pub fn roc_csv(report: &RocReport) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in &report.points {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucRow {
    pub database: String,
    pub mode: VariantMode,
    pub metric: Metric,
    pub k: Option<usize>,
    pub auc: f64,
}

pub fn auc_table_csv(rows: &[AucRow]) -> String {
    let mut s = String::from("database,transform_mode,metric,k,auc\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.database,
            r.mode,
            r.metric,
            fmt_k(r.k),
            r.auc
        );
    }
    s
}

pub fn auc_vs_k_csv(rows: &[AucPoint]) -> String {
    let mut s = String::from("k,metric,auc\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", fmt_k(r.k), r.metric, r.auc);
    }
    s
}

pub fn slice_curve_csv(rows: &[SlicePoint]) -> String {
    let mut s = String::from("delta_z,mean,ci_low,ci_high\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.delta, r.mean, r.ci_low, r.ci_high);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i}")).collect()
    }

    fn mann_whitney(scores: &[(f64, bool)]) -> f64 {
        let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
        let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
        let mut twice = 0u128;
        for &a in &pos {
            for &b in &neg {
                twice += if a < b {
                    2
                } else if a == b {
                    1
                } else {
                    0
                };
            }
        }
        twice as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64
    }

    #[test]
    fn pair_counts() {
        let set = build_pairs(&names(2), 3, VariantMode::Rotations, 0).unwrap();
        assert_eq!(set.positives(), 6);
        assert!(set.negatives() >= 1 && set.negatives() <= 12);
        assert_eq!(set.entries.len(), 8);
        let set = build_pairs(&names(20), 9, VariantMode::Mixed, 4).unwrap();
        assert_eq!(set.positives(), 180);
        assert_eq!(set.negatives(), 360);
        for p in &set.pairs {
            let same = set.entries[p.a].source == set.entries[p.b].source;
            assert_eq!(same, p.similar);
        }
    }

    #[test]
    fn pairs_need_two_images() {
        assert!(matches!(
            build_pairs(&names(1), 3, VariantMode::Rotations, 0),
            Err(Error::Harness(_))
        ));
    }

    #[test]
    fn pairs_are_seeded() {
        let a = build_pairs(&names(6), 4, VariantMode::Mixed, 11).unwrap();
        let b = build_pairs(&names(6), 4, VariantMode::Mixed, 11).unwrap();
        let c = build_pairs(&names(6), 4, VariantMode::Mixed, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn perfect_separation() {
        let scores: Vec<(f64, bool)> = (0..10)
            .map(|i| (if i < 5 { 0.0 } else { 1.0 }, i < 5))
            .collect();
        let r = roc_from_scores(scores).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(r.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        assert_eq!(r.points[1].threshold, 0.5);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(roc_from_scores(vec![(0.1, true), (0.2, true)]).is_err());
        assert!(roc_from_scores(vec![(f64::NAN, true), (0.2, false)]).is_err());
    }

    #[test]
    fn shuffled_labels_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<(f64, bool)> = (0..10_000)
            .map(|_| (rng.gen::<f64>(), rng.gen_bool(0.5)))
            .collect();
        let auc = roc_from_scores(scores).unwrap().auc;
        assert!((auc - 0.5).abs() < 0.02, "{auc}");
    }

    #[test]
    fn counts_are_consistent() {
        let scores = vec![(0.1, true), (0.2, false), (0.2, true), (0.5, false)];
        let r = roc_from_scores(scores).unwrap();
        for p in &r.points {
            assert_eq!(p.tp + p.fn_, 2);
            assert_eq!(p.fp + p.tn, 2);
        }
        assert_eq!(r.points.len(), 4);
        assert_eq!(r.auc, 0.875);
    }

    proptest! {
        #[test]
        fn trapezoid_equals_mann_whitney(
            raw in prop::collection::vec((0u8..12, any::<bool>()), 2..80)
        ) {
            let mut scores: Vec<(f64, bool)> = raw.iter().map(|&(d, s)| (d as f64 / 4.0, s)).collect();
            scores[0].1 = true;
            scores[1].1 = false;
            let r = roc_from_scores(scores.clone()).unwrap();
            prop_assert_eq!(r.auc, mann_whitney(&scores));
            let flipped: Vec<(f64, bool)> = scores.iter().map(|&(d, s)| (d, !s)).collect();
            let f = roc_from_scores(flipped).unwrap();
            prop_assert!((r.auc + f.auc - 1.0).abs() < 1e-9);
            for w in r.points.windows(2) {
                prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
            }
        }

        #[test]
        fn monotone_maps_keep_auc(
            raw in prop::collection::vec((0.0f64..5.0, any::<bool>()), 2..60)
        ) {
            let mut scores = raw.clone();
            scores[0].1 = true;
            scores[1].1 = false;
            let a = roc_from_scores(scores.clone()).unwrap().auc;
            let b = roc_from_scores(scores.iter().map(|&(d, s)| ((3.0 * d).exp(), s))).unwrap().auc;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn slice_curve_argument_checks() {
        let frames = vec![GrayImage::constant(8, 8, 0.5); 3];
        let p = HashParams::default();
        assert!(ordered_slice_curve(&frames, 3, VariantMode::Rotations, 1, 0, &p).is_err());
        assert!(ordered_slice_curve(&frames, 0, VariantMode::Rotations, 1, 0, &p).is_err());
    }

    #[test]
    fn csv_headers() {
        assert!(slice_curve_csv(&[]).starts_with("delta_z,mean,ci_low,ci_high\n"));
        assert!(auc_vs_k_csv(&[]).starts_with("k,metric,auc\n"));
        let row = AucRow {
            database: "synthetic".into(),
            mode: VariantMode::Mixed,
            metric: Metric::SpDelta,
            k: Some(10),
            auc: 0.5,
        };
        assert_eq!(
            auc_table_csv(&[row]),
            "database,transform_mode,metric,k,auc\nsynthetic,mixed,sp_delta,10,0.5\n"
        );
    }
}
