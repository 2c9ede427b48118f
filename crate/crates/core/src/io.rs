//! Plain-text matrix and label files, dataset manifests, and the
//! planted-truth synthetic generator.
//!
//! Matrix files start with a `ROWS COLS` header followed by `ROWS` lines of
//! `COLS` space-separated reals. Label files use the same layout with a
//! single column of 1-based integers. Values are written with 17
//! significant digits so a write/read round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Result, ZslError};
use crate::pipeline::ZslDataset;
use crate::types::{normalize_l1, Assignment, FeatureMatrix, MappingMatrix, SignatureMatrix};

fn parse_err(path: &str, msg: impl Into<String>) -> ZslError {
    ZslError::Parse {
        path: path.to_string(),
        msg: msg.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ZslError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| ZslError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Splits into the header dimensions and the body lines.
fn split_header<'t>(text: &'t str, origin: &str) -> Result<(usize, usize, Vec<&'t str>)> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let header = lines.first().ok_or_else(|| parse_err(origin, "empty file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(origin, format!("malformed header '{header}'")));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(origin, format!("malformed header '{header}'")))
    };
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let body: Vec<&str> = lines[1..].to_vec();
    if rows > 0 && cols > 0 {
        if body.len() != rows {
            return Err(parse_err(
                origin,
                format!("header declares {rows} rows, found {}", body.len()),
            ));
        }
    } else if body.iter().any(|l| !l.trim().is_empty()) {
        return Err(parse_err(origin, "values present in an empty matrix"));
    }
    Ok((rows, cols, body))
}

/// Parses matrix text; `origin` names the source in error messages.
pub fn parse_matrix(text: &str, origin: &str) -> Result<DMatrix<f64>> {
    let (rows, cols, body) = split_header(text, origin)?;
    let mut m = DMatrix::zeros(rows, cols);
    if rows == 0 || cols == 0 {
        return Ok(m);
    }
    for (r, line) in body.iter().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != cols {
            return Err(parse_err(
                origin,
                format!("row {} has {} values, expected {cols}", r + 1, tokens.len()),
            ));
        }
        for (c, tok) in tokens.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(origin, format!("row {} has non-numeric token '{tok}'", r + 1))
            })?;
            if !v.is_finite() {
                return Err(ZslError::NonFinite(format!(
                    "{origin}: entry ({}, {}) is not finite",
                    r + 1,
                    c + 1
                )));
            }
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    parse_matrix(&read_text(path)?, &path.display().to_string())
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_text(path.as_ref(), &format_matrix(m))
}

/// Parses a label file into 1-based labels.
pub fn parse_labels(text: &str, origin: &str) -> Result<Vec<usize>> {
    let (rows, cols, body) = split_header(text, origin)?;
    if cols != 1 && !(rows == 0 && cols <= 1) {
        return Err(parse_err(origin, format!("label file must have 1 column, header says {cols}")));
    }
    body.iter()
        .take(rows)
        .enumerate()
        .map(|(i, line)| {
            let tok = line.trim();
            match tok.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_err(origin, format!("row {} has invalid label '{tok}'", i + 1))),
            }
        })
        .collect()
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    parse_labels(&read_text(path)?, &path.display().to_string())
}

pub fn format_labels(a: &Assignment) -> String {
    let mut out = format!("{} 1\n", a.len());
    for v in a.to_one_based() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_labels(path: impl AsRef<Path>, a: &Assignment) -> Result<()> {
    write_text(path.as_ref(), &format_labels(a))
}

/// Dataset description: file locations plus preprocessing flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub features_seen: PathBuf,
    pub labels_seen: PathBuf,
    pub signatures_seen: PathBuf,
    pub features_unseen: PathBuf,
    pub signatures_unseen: PathBuf,
    pub truth_unseen: Option<PathBuf>,
    /// Scale feature columns to unit L1 norm after loading.
    pub normalize: bool,
    /// `signatures_seen` holds one attribute column per seen instance and
    /// is averaged per class.
    pub instance_attributes: bool,
}

impl Manifest {
    /// Parses `key = value` lines; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self> {
        let mut fields: [Option<PathBuf>; 6] = Default::default();
        const PATH_KEYS: [&str; 6] = [
            "features_seen",
            "labels_seen",
            "signatures_seen",
            "features_unseen",
            "signatures_unseen",
            "truth_unseen",
        ];
        let mut normalize = true;
        let mut instance_attributes = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| parse_err(origin, format!("line {} is not 'key = value'", n + 1)))?;
            let parse_bool = |v: &str| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(parse_err(origin, format!("{key} must be true or false, got '{v}'"))),
            };
            if let Some(i) = PATH_KEYS.iter().position(|k| *k == key) {
                fields[i] = Some(base.join(value));
            } else if key == "normalize" {
                normalize = parse_bool(value)?;
            } else if key == "instance_attributes" {
                instance_attributes = parse_bool(value)?;
            } else {
                return Err(parse_err(origin, format!("unknown key '{key}'")));
            }
        }
        let [fs_, ls, ss, fu, su, tu] = fields;
        let need = |p: Option<PathBuf>, key: &str| {
            p.ok_or_else(|| parse_err(origin, format!("missing key '{key}'")))
        };
        Ok(Manifest {
            features_seen: need(fs_, "features_seen")?,
            labels_seen: need(ls, "labels_seen")?,
            signatures_seen: need(ss, "signatures_seen")?,
            features_unseen: need(fu, "features_unseen")?,
            signatures_unseen: need(su, "signatures_unseen")?,
            truth_unseen: tu,
            normalize,
            instance_attributes,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&read_text(path)?, base, &path.display().to_string())
    }

    /// Serializes with paths relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| {
            p.strip_prefix(base)
                .unwrap_or(p)
                .display()
                .to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "features_seen = {}", rel(&self.features_seen));
        let _ = writeln!(out, "labels_seen = {}", rel(&self.labels_seen));
        let _ = writeln!(out, "signatures_seen = {}", rel(&self.signatures_seen));
        let _ = writeln!(out, "features_unseen = {}", rel(&self.features_unseen));
        let _ = writeln!(out, "signatures_unseen = {}", rel(&self.signatures_unseen));
        if let Some(t) = &self.truth_unseen {
            let _ = writeln!(out, "truth_unseen = {}", rel(t));
        }
        let _ = writeln!(out, "normalize = {}", self.normalize);
        let _ = writeln!(out, "instance_attributes = {}", self.instance_attributes);
        out
    }
}

/// Per-class mean of instance-level attribute columns.
pub fn average_instance_attributes(attrs: &DMatrix<f64>, labels: &Assignment) -> Result<SignatureMatrix> {
    if attrs.ncols() != labels.len() {
        return Err(ZslError::DimensionMismatch(format!(
            "{} attribute columns but {} labels",
            attrs.ncols(),
            labels.len()
        )));
    }
    let mut sums = DMatrix::zeros(attrs.nrows(), labels.k());
    let mut counts = vec![0usize; labels.k()];
    for (i, &c) in labels.indices().iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += attrs.column(i);
        counts[c] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(ZslError::EmptyClass(c + 1));
        }
        let mut col = sums.column_mut(c);
        col /= n as f64;
    }
    SignatureMatrix::new(sums)
}

fn named<T>(r: Result<T>, name: &str) -> Result<T> {
    r.map_err(|e| match e {
        ZslError::ShapeMismatch(m) => ZslError::DimensionMismatch(format!("{name}: {m}")),
        ZslError::NonFinite(m) => ZslError::NonFinite(format!("{name}: {m}")),
        ZslError::ZeroColumn(c) => ZslError::Parse {
            path: name.to_string(),
            msg: format!("column {c} is all zeros"),
        },
        other => other,
    })
}

/// Loads, cross-checks and preprocesses everything a manifest names.
pub fn build_dataset(manifest: &Manifest) -> Result<ZslDataset> {
    let x_s = named(FeatureMatrix::new(load_matrix(&manifest.features_seen)?), "features_seen")?;
    let x_u = named(FeatureMatrix::new(load_matrix(&manifest.features_unseen)?), "features_unseen")?;
    if x_s.dim() != x_u.dim() {
        return Err(ZslError::DimensionMismatch(format!(
            "features_seen has dimension {} but features_unseen has {}",
            x_s.dim(),
            x_u.dim()
        )));
    }
    let raw_labels = load_labels(&manifest.labels_seen)?;
    if raw_labels.len() != x_s.len() {
        return Err(ZslError::DimensionMismatch(format!(
            "labels_seen has {} entries but features_seen has {} instances",
            raw_labels.len(),
            x_s.len()
        )));
    }
    let seen_sig = load_matrix(&manifest.signatures_seen)?;
    let s_s = if manifest.instance_attributes {
        let labels = named(Assignment::from_one_based_infer(&raw_labels), "labels_seen")?;
        average_instance_attributes(&seen_sig, &labels).map_err(|e| match e {
            ZslError::DimensionMismatch(m) => {
                ZslError::DimensionMismatch(format!("signatures_seen vs labels_seen: {m}"))
            }
            other => other,
        })?
    } else {
        named(SignatureMatrix::new(seen_sig), "signatures_seen")?
    };
    let labels_s = named(Assignment::from_one_based(&raw_labels, s_s.n_classes()), "labels_seen")?;
    let s_u = named(SignatureMatrix::new(load_matrix(&manifest.signatures_unseen)?), "signatures_unseen")?;
    let truth_u = match &manifest.truth_unseen {
        Some(p) => {
            let t = load_labels(p)?;
            Some(named(Assignment::from_one_based(&t, s_u.n_classes()), "truth_unseen")?)
        }
        None => None,
    };
    let data = ZslDataset::new(x_s, labels_s, s_s, x_u, s_u, truth_u)?;
    if manifest.normalize {
        data.normalized()
    } else {
        Ok(data)
    }
}

/// Parameters of the planted-truth generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub d: usize,
    pub r: usize,
    pub n_s: usize,
    pub n_u: usize,
    pub per_class: usize,
    pub noise_std: f64,
    /// Lower bound on the distance between any two class centroids.
    pub separation: f64,
    /// Offset of every unseen centroid along one fixed random direction.
    pub shift: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.r == 0 || self.n_s == 0 || self.n_u == 0 || self.per_class == 0 {
            return Err(ZslError::InvalidConfig(
                "d, r, n_s, n_u and per_class must all be >= 1".into(),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(ZslError::InvalidConfig(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(ZslError::InvalidConfig(format!("separation must be > 0, got {}", self.separation)));
        }
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return Err(ZslError::InvalidConfig(format!("shift must be >= 0, got {}", self.shift)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: ZslDataset,
    /// The planted signature-to-centroid map.
    pub mapping: MappingMatrix,
    /// Class centroids, seen classes first, unseen shift included.
    pub centroids: DMatrix<f64>,
}

fn min_pairwise_distance(m: &DMatrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..m.ncols() {
        for b in a + 1..m.ncols() {
            best = best.min((m.column(a) - m.column(b)).norm());
        }
    }
    best
}

/// Draws a dataset whose class centroids are an exact linear image of the
/// class signatures.
///
/// Signatures span a subspace of dimension `min(r, n_s)` so the planted map
/// is identifiable on that subspace from seen classes alone. The planted map
/// is scaled so that every pair of centroids, including after the unseen
/// shift, is at least `separation` apart.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_s + cfg.n_u;
    let latent = cfg.r.min(cfg.n_s);

    let basis_scale = 1.0 / (latent as f64).sqrt();
    let basis = DMatrix::from_fn(cfg.r, latent, |_, _| rng.sample::<f64, _>(StandardNormal) * basis_scale);
    let coords = DMatrix::from_fn(latent, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let signatures = basis * coords;
    let mut planted = DMatrix::from_fn(cfg.d, cfg.r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut direction = DVector::from_fn(cfg.d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dn = direction.norm();
    if dn > 0.0 {
        direction /= dn;
    }

    let base = &planted * &signatures;
    if n > 1 {
        let closest = min_pairwise_distance(&base);
        if closest.is_nan() || closest <= 1e-12 {
            return Err(ZslError::InvalidConfig(
                "drawn classes have coincident centroids; try another seed or larger d".into(),
            ));
        }
        // shifting moves a distance by at most `shift`
        planted *= (cfg.separation + cfg.shift) / closest * (1.0 + 1e-12);
    }
    let mut centroids = &planted * &signatures;
    for c in cfg.n_s..n {
        let mut col = centroids.column_mut(c);
        col.axpy(cfg.shift, &direction, 1.0);
    }
    if n > 1 {
        let closest = min_pairwise_distance(&centroids);
        assert!(
            closest >= cfg.separation,
            "centroid separation {closest} below requested {}",
            cfg.separation
        );
    }

    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| ZslError::InvalidConfig(e.to_string()))?;
    let mut draw = |classes: std::ops::Range<usize>| {
        let count = classes.len() * cfg.per_class;
        let mut x = DMatrix::zeros(cfg.d, count);
        let mut labels = Vec::with_capacity(count);
        for (pos, c) in classes.clone().enumerate() {
            for j in 0..cfg.per_class {
                let i = pos * cfg.per_class + j;
                for row in 0..cfg.d {
                    x[(row, i)] = centroids[(row, c)] + rng.sample(noise);
                }
                labels.push(pos);
            }
        }
        (x, labels)
    };
    let (xs, ls) = draw(0..cfg.n_s);
    let (xu, lu) = draw(cfg.n_s..n);

    let dataset = ZslDataset::new(
        FeatureMatrix::new(xs)?,
        Assignment::new(ls, cfg.n_s)?,
        SignatureMatrix::new(signatures.columns(0, cfg.n_s).into_owned())?,
        FeatureMatrix::new(xu)?,
        SignatureMatrix::new(signatures.columns(cfg.n_s, cfg.n_u).into_owned())?,
        Some(Assignment::new(lu, cfg.n_u)?),
    )?;
    Ok(SyntheticData {
        dataset,
        mapping: MappingMatrix::new(planted)?,
        centroids,
    })
}

/// File names used by [`write_dataset`].
pub const MANIFEST_FILE: &str = "manifest";

/// Writes every matrix of `data` into `dir` plus a manifest, and returns
/// the manifest path. `normalize` is recorded in the manifest.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    data: &ZslDataset,
    planted: Option<&MappingMatrix>,
    normalize: bool,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ZslError::Io {
        path: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let manifest = Manifest {
        features_seen: dir.join("features_seen"),
        labels_seen: dir.join("labels_seen"),
        signatures_seen: dir.join("signatures_seen"),
        features_unseen: dir.join("features_unseen"),
        signatures_unseen: dir.join("signatures_unseen"),
        truth_unseen: data.truth_u.as_ref().map(|_| dir.join("truth_unseen")),
        normalize,
        instance_attributes: false,
    };
    write_matrix(&manifest.features_seen, data.x_s.data())?;
    write_labels(&manifest.labels_seen, &data.labels_s)?;
    write_matrix(&manifest.signatures_seen, data.s_s.data())?;
    write_matrix(&manifest.features_unseen, data.x_u.data())?;
    write_matrix(&manifest.signatures_unseen, data.s_u.data())?;
    if let (Some(t), Some(p)) = (&data.truth_u, &manifest.truth_unseen) {
        write_labels(p, t)?;
    }
    if let Some(d) = planted {
        write_matrix(dir.join("mapping_planted"), d.data())?;
    }
    let path = dir.join(MANIFEST_FILE);
    write_text(&path, &manifest.to_text(dir))?;
    Ok(path)
}

/// Normalizes a loose feature matrix the same way [`build_dataset`] does.
pub fn maybe_normalize(x: FeatureMatrix, normalize: bool) -> Result<FeatureMatrix> {
    if normalize {
        normalize_l1(&x)
    } else {
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn parses_identity() {
        let m = parse_matrix("2 2\n1 0\n0 1\n", "t").unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
    }

    #[test]
    fn short_body_is_parse_error() {
        let e = parse_matrix("2 3\n1 2 3\n4 5\n", "t").unwrap_err();
        assert!(matches!(e, ZslError::Parse { .. }), "{e}");
        assert!(matches!(parse_matrix("2 3\n1 2 3\n", "t"), Err(ZslError::Parse { .. })));
        assert!(matches!(parse_matrix("2\n1\n", "t"), Err(ZslError::Parse { .. })));
        assert!(matches!(parse_matrix("1 1\nabc\n", "t"), Err(ZslError::Parse { .. })));
        assert!(matches!(parse_matrix("1 1\nNaN\n", "t"), Err(ZslError::NonFinite(_))));
    }

    #[test]
    fn empty_matrix_round_trip() {
        let m = DMatrix::<f64>::zeros(3, 0);
        assert_eq!(parse_matrix(&format_matrix(&m), "t").unwrap(), m);
    }

    #[test]
    fn labels_round_trip_and_errors() {
        let a = Assignment::from_one_based(&[1, 3, 2], 3).unwrap();
        assert_eq!(parse_labels(&format_labels(&a), "t").unwrap(), vec![1, 3, 2]);
        assert!(parse_labels("1 1\n0\n", "t").is_err());
        assert!(parse_labels("2 1\n1\n", "t").is_err());
    }

    #[test]
    fn averaging_cases() {
        let attrs = DMatrix::from_column_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = average_instance_attributes(&attrs, &Assignment::new(vec![0, 0], 1).unwrap()).unwrap();
        assert_eq!(s.data().as_slice(), &[0.5, 0.5]);
        let s = average_instance_attributes(&attrs, &Assignment::new(vec![0, 1], 2).unwrap()).unwrap();
        assert_eq!(s.data(), &attrs);
        assert_eq!(
            average_instance_attributes(&attrs, &Assignment::new(vec![0, 0], 2).unwrap()),
            Err(ZslError::EmptyClass(2))
        );
    }

    #[test]
    fn averaging_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let attrs = DMatrix::from_fn(4, 30, |_, _| rng.random_range(0.0..1.0));
        let labels: Vec<usize> = (0..30).map(|i| i % 5).collect();
        let s = average_instance_attributes(&attrs, &Assignment::new(labels.clone(), 5).unwrap()).unwrap();
        for c in 0..5 {
            for r in 0..4 {
                let (mut sum, mut n) = (0.0, 0.0);
                for i in 0..30 {
                    if labels[i] == c {
                        sum += attrs[(r, i)];
                        n += 1.0;
                    }
                }
                assert!((s.data()[(r, c)] - sum / n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn manifest_parse_errors() {
        let base = Path::new("/d");
        assert!(Manifest::parse("features_seen = a\n", base, "m").is_err());
        assert!(Manifest::parse("bogus = 1\n", base, "m").is_err());
        let full = "features_seen = a\nlabels_seen = b\nsignatures_seen = c\n\
                    features_unseen = d\nsignatures_unseen = e\nnormalize = false\n";
        let m = Manifest::parse(full, base, "m").unwrap();
        assert_eq!(m.features_seen, Path::new("/d/a"));
        assert!(!m.normalize && !m.instance_attributes && m.truth_unseen.is_none());
        let round = Manifest::parse(&m.to_text(base), base, "m").unwrap();
        assert_eq!(round, m);
        assert!(Manifest::parse(&full.replace("false", "maybe"), base, "m").is_err());
    }

    fn cfg(seed: u64) -> SynthConfig {
        SynthConfig {
            d: 10,
            r: 8,
            n_s: 6,
            n_u: 4,
            per_class: 20,
            noise_std: 1.0,
            separation: 20.0,
            shift: 3.0,
            seed,
        }
    }

    #[test]
    fn synthetic_zero_noise_is_exact() {
        let c = SynthConfig { noise_std: 0.0, ..cfg(2) };
        let s = generate_synthetic(&c).unwrap();
        let d = &s.dataset;
        for i in 0..d.x_s.len() {
            assert_eq!(d.x_s.column(i), s.centroids.column(d.labels_s.get(i)));
        }
        let truth = d.truth_u.as_ref().unwrap();
        for i in 0..d.x_u.len() {
            assert_eq!(d.x_u.column(i), s.centroids.column(c.n_s + truth.get(i)));
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_separated() {
        for seed in 0..30 {
            let a = generate_synthetic(&cfg(seed)).unwrap();
            assert!(min_pairwise_distance(&a.centroids) >= 20.0);
            if seed < 3 {
                assert_eq!(a, generate_synthetic(&cfg(seed)).unwrap());
            }
        }
    }

    #[test]
    fn synthetic_rejects_bad_config() {
        assert!(generate_synthetic(&SynthConfig { d: 0, ..cfg(0) }).is_err());
        assert!(generate_synthetic(&SynthConfig { separation: 0.0, ..cfg(0) }).is_err());
        assert!(generate_synthetic(&SynthConfig { noise_std: -1.0, ..cfg(0) }).is_err());
    }

    proptest! {
        #[test]
        fn matrix_text_round_trip_is_exact(
            rows in 1usize..5,
            cols in 0usize..5,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(rows, cols, |_, _| {
                let mant: f64 = rng.sample(StandardNormal);
                mant * 10f64.powi(rng.random_range(-300..300))
            });
            let back = parse_matrix(&format_matrix(&m), "t").unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
