//! JSON file formats.
//!
//! Complex scalars are `[re, im]` pairs; matrices are arrays of rows. Indices
//! in object keys are 1-based. Floats are written in shortest round-trip form
//! so every file reads back bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, Origin};
use crate::domination::DominationCertificate;
use crate::error::{Error, Result};
use crate::kernel::{GroundTruth, OperatorKernel};
use crate::num::{CMatrix, Real, C};
use crate::stinespring::{Diagnostics, Factorization};

pub type Pair = [f64; 2];
pub type MatrixJson = Vec<Vec<Pair>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum AlgebraSpec {
    #[serde(rename = "matrix_blocks")]
    MatrixBlocks { dims: Vec<usize> },
    #[serde(rename = "group")]
    Group { table: Vec<Vec<usize>>, identity: usize },
}

impl AlgebraSpec {
    pub fn build<T: Real>(&self) -> Result<Algebra<T>> {
        match self {
            Self::MatrixBlocks { dims } => Algebra::from_matrix_blocks(dims),
            Self::Group { table, identity } => Algebra::from_group_table(table, *identity),
        }
    }

    pub fn of<T: Real>(alg: &Algebra<T>) -> Self {
        match (alg.origin(), alg.group_table()) {
            (Origin::GroupAlgebra { .. }, Some(g)) => Self::Group {
                table: g.table.clone(),
                identity: g.identity,
            },
            _ => Self::MatrixBlocks {
                dims: alg.block_dims().to_vec(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub points: Vec<String>,
    pub hdim: usize,
    pub algebra: AlgebraSpec,
    /// Keys `"i,j,alpha"`, 1-based; missing keys are zero blocks.
    pub blocks: BTreeMap<String, MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub gram_truncation_error: f64,
    pub pi_residual: f64,
    pub reconstruction_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationFile {
    pub r: usize,
    #[serde(rename = "V")]
    pub v: BTreeMap<String, MatrixJson>,
    pub pi: BTreeMap<String, MatrixJson>,
    pub diagnostics: DiagnosticsJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateResiduals {
    pub square: f64,
    pub commutant: f64,
    pub reconstruction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(rename = "T")]
    pub t: MatrixJson,
    #[serde(rename = "A")]
    pub a: MatrixJson,
    #[serde(rename = "spectrumT")]
    pub spectrum_t: Vec<f64>,
    pub residuals: CertificateResiduals,
    pub commutant_dim: usize,
    pub lambda: Option<Pair>,
}

/// Generator sidecar: hidden factorization and intended answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub seed: u64,
    pub r: usize,
    #[serde(rename = "V")]
    pub v: BTreeMap<String, MatrixJson>,
    pub pi: BTreeMap<String, MatrixJson>,
    pub multiplicities: Vec<usize>,
    pub effective_multiplicities: Option<Vec<usize>>,
    pub commutant_dim: Option<usize>,
    /// Weight applied to build the dominated companion, in ground-truth
    /// coordinates.
    pub dominated_weight: Option<MatrixJson>,
    pub lambda: Option<Pair>,
}

pub fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> MatrixJson {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re.to_f64_lossy(), z.im.to_f64_lossy()]).collect())
        .collect()
}

/// Reads a `rows x cols` matrix; `cols` is needed for empty row lists.
pub fn matrix_from_json<T: Real>(rows_json: &MatrixJson, rows: usize, cols: usize, what: &str) -> Result<CMatrix<T>> {
    if rows_json.len() != rows || rows_json.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!("{what}: expected a {rows}x{cols} matrix")));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (i, row) in rows_json.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(Error::Parse(format!("{what}: non-finite entry at ({}, {})", i + 1, j + 1)));
            }
            m[(i, j)] = C::new(T::lit(z[0]), T::lit(z[1]));
        }
    }
    Ok(m)
}

fn square_from_json<T: Real>(rows_json: &MatrixJson, what: &str) -> Result<CMatrix<T>> {
    let n = rows_json.len();
    matrix_from_json(rows_json, n, n, what)
}

fn parse_index(s: &str, bound: usize, what: &str) -> Result<usize> {
    let i: usize = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: bad index {s:?}")))?;
    if i == 0 || i > bound {
        return Err(Error::Parse(format!("{what}: index {i} out of range 1..={bound}")));
    }
    Ok(i - 1)
}

pub fn kernel_to_file<T: Real>(k: &OperatorKernel<T>) -> KernelFile {
    let (m, d) = (k.m(), k.algebra().dim());
    let mut blocks = BTreeMap::new();
    for i in 0..m {
        for j in 0..m {
            for a in 0..d {
                let b = k.block(i, j, a);
                if b.iter().any(|z| z.re != T::zero() || z.im != T::zero()) {
                    blocks.insert(format!("{},{},{}", i + 1, j + 1, a + 1), matrix_to_json(b));
                }
            }
        }
    }
    KernelFile {
        points: k.points().to_vec(),
        hdim: k.hdim(),
        algebra: AlgebraSpec::of(k.algebra()),
        blocks,
    }
}

pub fn kernel_from_file<T: Real>(file: &KernelFile) -> Result<OperatorKernel<T>> {
    let algebra = Arc::new(file.algebra.build::<T>()?);
    kernel_from_file_with(file, algebra)
}

/// Reads a kernel over an already constructed algebra (which must match the
/// file's description).
pub fn kernel_from_file_with<T: Real>(file: &KernelFile, algebra: Arc<Algebra<T>>) -> Result<OperatorKernel<T>> {
    let m = file.points.len();
    let n = file.hdim;
    if m == 0 || n == 0 {
        return Err(Error::Parse("kernel file needs at least one point and hdim >= 1".into()));
    }
    if AlgebraSpec::of(&algebra) != file.algebra {
        return Err(Error::Parse("algebra does not match the kernel file".into()));
    }
    let d = algebra.dim();
    let mut blocks = vec![CMatrix::zeros(n, n); m * m * d];
    for (key, value) in &file.blocks {
        let parts: Vec<&str> = key.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("block key {key:?} is not \"i,j,alpha\"")));
        }
        let i = parse_index(parts[0], m, key)?;
        let j = parse_index(parts[1], m, key)?;
        let a = parse_index(parts[2], d, key)?;
        blocks[(i * m + j) * d + a] = matrix_from_json(value, n, n, &format!("block {key}"))?;
    }
    OperatorKernel::new(file.points.clone(), n, algebra, blocks)
}

fn indexed<T: Real>(ms: &[CMatrix<T>]) -> BTreeMap<String, MatrixJson> {
    ms.iter()
        .enumerate()
        .map(|(k, m)| ((k + 1).to_string(), matrix_to_json(m)))
        .collect()
}

fn unindexed<T: Real>(
    map: &BTreeMap<String, MatrixJson>,
    count: usize,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<Vec<CMatrix<T>>> {
    if map.len() != count {
        return Err(Error::Parse(format!("{what}: expected {count} matrices, found {}", map.len())));
    }
    let mut out = vec![None; count];
    for (key, value) in map {
        let k = parse_index(key, count, what)?;
        out[k] = Some(matrix_from_json(value, rows, cols, &format!("{what}({key})"))?);
    }
    Ok(out.into_iter().map(|m| m.expect("all keys present")).collect())
}

pub fn factorization_to_file<T: Real>(f: &Factorization<T>) -> FactorizationFile {
    FactorizationFile {
        r: f.r(),
        v: indexed(f.v()),
        pi: indexed(f.pi()),
        diagnostics: DiagnosticsJson {
            gram_truncation_error: f.diagnostics.gram_truncation_error,
            pi_residual: f.diagnostics.pi_residual,
            reconstruction_residual: f.diagnostics.reconstruction_residual,
        },
    }
}

/// Reads an exported factorization for `kernel`. Diagnostics are recomputed.
pub fn factorization_from_file<T: Real>(file: &FactorizationFile, kernel: &OperatorKernel<T>) -> Result<Factorization<T>> {
    let r = file.r;
    let v = unindexed(&file.v, kernel.m(), r, kernel.hdim(), "V")?;
    let pi = unindexed(&file.pi, kernel.algebra().dim(), r, r, "pi")?;
    Factorization::from_parts(kernel, v, pi)
}

pub fn diagnostics_json(d: &Diagnostics) -> DiagnosticsJson {
    DiagnosticsJson {
        gram_truncation_error: d.gram_truncation_error,
        pi_residual: d.pi_residual,
        reconstruction_residual: d.reconstruction_residual,
    }
}

pub fn certificate_to_file<T: Real>(c: &DominationCertificate<T>) -> CertificateFile {
    CertificateFile {
        t: matrix_to_json(&c.t),
        a: matrix_to_json(&c.a),
        spectrum_t: c.spectrum_t.clone(),
        residuals: CertificateResiduals {
            square: c.square_residual,
            commutant: c.commutant_residual,
            reconstruction: c.reconstruction_residual,
        },
        commutant_dim: c.commutant_dim,
        lambda: c.lambda.map(|z| [z.re, z.im]),
    }
}

/// The derivative `A` stored in a certificate file.
pub fn certificate_effect_matrix<T: Real>(file: &CertificateFile) -> Result<CMatrix<T>> {
    square_from_json(&file.a, "A")
}

pub fn truth_to_file<T: Real>(
    truth: &GroundTruth<T>,
    seed: u64,
    weight: Option<&CMatrix<T>>,
    lambda: Option<f64>,
) -> TruthFile {
    TruthFile {
        seed,
        r: truth.r(),
        v: indexed(&truth.v),
        pi: indexed(&truth.pi),
        multiplicities: truth.multiplicities.clone(),
        effective_multiplicities: truth.effective_multiplicities.clone(),
        commutant_dim: truth.commutant_dim,
        dominated_weight: weight.map(matrix_to_json),
        lambda: lambda.map(|l| [l, 0.0]),
    }
}

pub fn truth_from_file<T: Real>(file: &TruthFile, m: usize, n: usize, d: usize) -> Result<(GroundTruth<T>, Option<CMatrix<T>>)> {
    let r = file.r;
    let truth = GroundTruth {
        v: unindexed(&file.v, m, r, n, "V")?,
        pi: unindexed(&file.pi, d, r, r, "pi")?,
        multiplicities: file.multiplicities.clone(),
        effective_multiplicities: file.effective_multiplicities.clone(),
        commutant_dim: file.commutant_dim,
    };
    let weight = file
        .dominated_weight
        .as_ref()
        .map(|w| matrix_from_json(w, r, r, "dominated_weight"))
        .transpose()?;
    Ok((truth, weight))
}

pub fn to_json_string<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|e| with_path(e, path))
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_kernel<T: Real>(path: &Path) -> Result<OperatorKernel<T>> {
    kernel_from_file(&read_json::<KernelFile>(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{random_in_m, RandomParams};
    use crate::stinespring::factor;
    use proptest::prelude::*;

    #[test]
    fn algebra_spec_shapes() {
        let s: AlgebraSpec = serde_json::from_str(r#"{"type":"matrix_blocks","dims":[1,2]}"#).unwrap();
        assert_eq!(s, AlgebraSpec::MatrixBlocks { dims: vec![1, 2] });
        let g: AlgebraSpec = serde_json::from_str(r#"{"type":"group","table":[[0,1],[1,0]],"identity":0}"#).unwrap();
        assert_eq!(g.build::<f64>().unwrap().dim(), 2);
        assert!(serde_json::from_str::<AlgebraSpec>(r#"{"type":"lie"}"#).is_err());
    }

    #[test]
    fn kernel_file_errors() {
        let base = r#"{"points":["x"],"hdim":1,"algebra":{"type":"matrix_blocks","dims":[1]},"blocks":{KEY}}"#;
        let parse = |blocks: &str| {
            let f: KernelFile = serde_json::from_str(&base.replace("{KEY}", blocks)).unwrap();
            kernel_from_file::<f64>(&f)
        };
        assert!(parse(r#"{}"#).is_ok());
        assert!(parse(r#"{"1,1,1":[[[2.0,0.0]]]}"#).is_ok());
        assert!(matches!(parse(r#"{"1,1,2":[[[2.0,0.0]]]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse(r#"{"1,1":[[[2.0,0.0]]]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse(r#"{"1,1,1":[[[2.0,0.0],[1.0,0.0]]]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse(r#"{"1,1,1":[[[2.0,1.0]]]}"#), Err(Error::MalformedKernel(_))));
    }

    #[test]
    fn factorization_round_trip() {
        let alg = Arc::new(Algebra::<f64>::from_matrix_blocks(&[2]).unwrap());
        let rk = random_in_m(alg, &RandomParams { m: 2, n: 1, multiplicities: vec![1], seed: 3 }).unwrap();
        let f = factor(&rk.kernel, 1e-10).unwrap();
        let file = factorization_to_file(&f);
        let text = to_json_string(&file).unwrap();
        let back: FactorizationFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let g = factorization_from_file(&back, &rk.kernel).unwrap();
        assert_eq!(g.v(), f.v());
        assert_eq!(g.pi(), f.pi());
    }

    proptest! {
        #[test]
        fn kernel_files_round_trip_bit_exactly(seed in any::<u64>(), m in 1usize..4, n in 1usize..3) {
            let alg = Arc::new(Algebra::<f64>::from_matrix_blocks(&[1, 2]).unwrap());
            let rk = random_in_m(alg, &RandomParams { m, n, multiplicities: vec![1, 1], seed }).unwrap();
            let text = to_json_string(&kernel_to_file(&rk.kernel)).unwrap();
            let back = kernel_from_file::<f64>(&serde_json::from_str(&text).unwrap()).unwrap();
            for (x, y) in back.blocks().iter().zip(rk.kernel.blocks()) {
                for (p, q) in x.iter().zip(y.iter()) {
                    prop_assert_eq!(p.re.to_bits(), q.re.to_bits());
                    prop_assert_eq!(p.im.to_bits(), q.im.to_bits());
                }
            }
        }
    }
}
