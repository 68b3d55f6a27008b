//! Numerical check that entry-wise products of two embeddings cannot express
//! every embedded cross feature.
//!
//! For one-hot inputs, `A x o B y = C z` reduces to finding columns with
//! `a_i o b_k = c_ik` for all `i, k`. [`build_c`] produces families `C` that
//! are representable by construction, or that carry a ratio certificate
//! `c_ik[d] / c_jk[d] != c_il[d] / c_jl[d]` ruling such a factorization out.
//! [`run`] then measures the best fit via [`cin_residual`].

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lr::cin_residual;

const MAX_TRIES: usize = 100;
const MIN_GAP: f64 = 0.1;
const MIN_DENOM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CinMode {
    Representable,
    Adversarial,
    Random,
}

impl fmt::Display for CinMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CinMode::Representable => "representable",
            CinMode::Adversarial => "adversarial",
            CinMode::Random => "random",
        })
    }
}

impl std::str::FromStr for CinMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "representable" => Ok(CinMode::Representable),
            "adversarial" => Ok(CinMode::Adversarial),
            "random" => Ok(CinMode::Random),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CinExperiment {
    pub d_rows: usize,
    pub m: usize,
    pub n: usize,
    pub mode: CinMode,
    pub seed: u64,
    pub restarts: usize,
}

impl CinExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.d_rows == 0 || self.m == 0 || self.n == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("dimensions and restarts must be at least 1".into()));
        }
        if self.mode == CinMode::Adversarial && !self.single_term() && (self.m < 2 || self.n < 2) {
            return Err(Error::InvalidArgument("adversarial mode needs m, n >= 2".into()));
        }
        Ok(())
    }

    /// With one field value on each side any `C` factorizes.
    pub fn single_term(&self) -> bool {
        self.m == 1 && self.n == 1
    }
}

/// Witness that no entry-wise factorization exists: at embedding row `d`,
/// `c_ik / c_jk` and `c_il / c_jl` differ by `gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub d: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub gap: f64,
    pub tries: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltC {
    /// Row-major, `d_rows` rows of `m * n` entries (column `i * n + k`).
    pub c: Vec<f64>,
    pub certificate: Option<Certificate>,
    /// Set for `m = n = 1`, where every `C` is representable whatever the mode.
    pub forced_representable: bool,
}

pub fn build_c(exp: &CinExperiment) -> Result<BuiltC> {
    exp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
    let (d, m, n) = (exp.d_rows, exp.m, exp.n);
    let mut sample = |scale: f64, len: usize| -> Vec<f64> {
        let dist = Normal::new(0.0, scale).expect("positive scale");
        (0..len).map(|_| dist.sample(&mut rng)).collect()
    };
    let forced = exp.single_term();
    let built = match exp.mode {
        CinMode::Representable => {
            let a = sample(1.0, d * m);
            let b = sample(1.0, d * n);
            let mut c = vec![0.0; d * m * n];
            for r in 0..d {
                for i in 0..m {
                    for k in 0..n {
                        c[r * m * n + i * n + k] = a[r * m + i] * b[r * n + k];
                    }
                }
            }
            BuiltC {
                c,
                certificate: None,
                forced_representable: forced,
            }
        }
        CinMode::Random => {
            let c = sample(1.0, d * m * n);
            let certificate = find_certificate(&c, d, m, n, 1, 1.0);
            BuiltC {
                c,
                certificate,
                forced_representable: forced,
            }
        }
        CinMode::Adversarial if forced => BuiltC {
            c: sample(1.0, d),
            certificate: None,
            forced_representable: true,
        },
        CinMode::Adversarial => {
            let mut scale = 1.0;
            let mut tries = 0;
            loop {
                tries += 1;
                let c = sample(scale, d * m * n);
                if let Some(cert) = find_certificate(&c, d, m, n, tries, scale) {
                    break BuiltC {
                        c,
                        certificate: Some(cert),
                        forced_representable: false,
                    };
                }
                if tries % MAX_TRIES == 0 {
                    scale *= 2.0;
                }
            }
        }
    };
    Ok(built)
}

/// First `(d, i < j, k < l)` in lexicographic order whose ratio gap is at
/// least `MIN_GAP` with denominators bounded away from zero.
fn find_certificate(c: &[f64], d: usize, m: usize, n: usize, tries: usize, scale: f64) -> Option<Certificate> {
    if c.len() != d * m * n {
        return None;
    }
    let at = |r: usize, i: usize, k: usize| c[r * m * n + i * n + k];
    for r in 0..d {
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..n {
                    for l in k + 1..n {
                        let (jk, jl) = (at(r, j, k), at(r, j, l));
                        if jk.abs() < MIN_DENOM * scale || jl.abs() < MIN_DENOM * scale {
                            continue;
                        }
                        let gap = (at(r, i, k) / jk - at(r, i, l) / jl).abs();
                        if gap >= MIN_GAP {
                            return Some(Certificate {
                                d: r,
                                i,
                                j,
                                k,
                                l,
                                gap,
                                tries,
                                scale,
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// One row of the check's output table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CinReport {
    pub mode: CinMode,
    pub d_rows: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub residual: f64,
    pub certificate: Option<Certificate>,
    pub forced_representable: bool,
}

impl CinReport {
    pub const TSV_HEADER: &'static str = "mode\tD\tm\tn\tseed\tmin_residual\tcertificate";

    pub fn tsv_line(&self) -> String {
        let cert = match (&self.certificate, self.forced_representable) {
            (_, true) => "single-term (always representable)".to_string(),
            (Some(c), _) => format!(
                "d={} i={} j={} k={} l={} gap={:.4}",
                c.d, c.i, c.j, c.k, c.l, c.gap
            ),
            (None, _) => "-".to_string(),
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6e}\t{}",
            self.mode, self.d_rows, self.m, self.n, self.seed, self.residual, cert
        )
    }
}

pub fn run(exp: &CinExperiment) -> Result<CinReport> {
    let built = build_c(exp)?;
    let residual = cin_residual(&built.c, exp.d_rows, exp.m, exp.n, exp.restarts, exp.seed ^ 0x9e37_79b9)?;
    Ok(CinReport {
        mode: exp.mode,
        d_rows: exp.d_rows,
        m: exp.m,
        n: exp.n,
        seed: exp.seed,
        residual,
        certificate: built.certificate,
        forced_representable: built.forced_representable,
    })
}
