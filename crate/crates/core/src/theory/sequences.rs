//! Generating sequences c_{i,j,k} that majorize the error coefficients
//! Gamma_k^{(i)}(t) <= sum_j c_{i,j,k} t^j, and the check of their growth bound
//! c_{i,j,k} <= C1^{i+k} C2^k / j!.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceVariant {
    /// Auxiliary parameter is B, the bound on the second-order step term.
    Kraus,
    /// Auxiliary parameter is J, the number of jump operators.
    Dilated,
}

impl fmt::Display for SequenceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SequenceVariant::Kraus => "kraus",
            SequenceVariant::Dilated => "dilated",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingSequence {
    pub variant: SequenceVariant,
    pub l: f64,
    pub aux: f64,
    pub i_max: usize,
    pub k_max: usize,
    /// table[k][j][i]; level k stores i <= i_max + k_max - k + 1 and j <= k.
    table: Vec<Vec<Vec<f64>>>,
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

impl GeneratingSequence {
    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        self.table.get(k)?.get(j)?.get(i).copied()
    }

    /// Largest stored i at level k.
    pub fn i_limit(&self, k: usize) -> usize {
        self.i_max + self.k_max - k + 1
    }

    /// P_{i,k}(t) = sum_j c_{i,j,k} t^j.
    pub fn poly(&self, i: usize, k: usize, t: f64) -> Option<f64> {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += self.get(i, j, k)? * t.powi(j as i32);
        }
        Some(acc)
    }

    /// Iterates (i, j, k, c_{i,j,k}) over every stored entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.table.iter().enumerate().flat_map(|(k, level)| {
            level
                .iter()
                .enumerate()
                .flat_map(move |(j, row)| row.iter().enumerate().map(move |(i, &c)| (i, j, k, c)))
        })
    }
}

/// Fills the table level by level in k; within a level i = 0 first, then
/// increasing i (each i >= 1 entry needs c_{i-1,j,k}).
pub fn build_sequence(
    variant: SequenceVariant,
    l: f64,
    aux: f64,
    i_max: usize,
    k_max: usize,
) -> Result<GeneratingSequence> {
    if !(l >= 1.0 && l.is_finite()) {
        return Err(Error::UnsupportedRegime(format!(
            "generating sequences assume l >= 1, got {l}"
        )));
    }
    if !(aux >= 0.0 && aux.is_finite()) {
        return Err(Error::InvalidArgument(format!("auxiliary parameter must be >= 0, got {aux}")));
    }
    let fact = factorials(k_max + 2);
    let top = i_max + k_max + 1;
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k_max + 1);
    table.push(vec![(0..=top).map(|i| l.powi(i as i32)).collect()]);
    let jp1 = aux + 1.0;
    for k in 1..=k_max {
        let ik = i_max + k_max - k + 1;
        let mut level = vec![vec![0.0; ik + 1]; k + 1];
        let c = |i: usize, j: usize, kk: usize| table[kk][j][i];
        for j in 1..=k {
            let jf = j as f64;
            let mut v = if j == 1 { l.powi(k as i32 + 1) / fact[k + 1] } else { 0.0 };
            if variant == SequenceVariant::Kraus {
                v += aux / jf * c(0, j - 1, k - 1);
            }
            for p in 1..=(k - j) {
                v += c(p + 1, j - 1, k - p) / (jf * fact[p + 1]);
                if variant == SequenceVariant::Dilated {
                    v += jp1 * l.powi(p as i32 + 1) / (jf * fact[p + 1]) * c(0, j - 1, k - p);
                }
            }
            level[j][0] = v;
        }
        for i in 1..=ik {
            for j in 0..k {
                let mut v = l * level[j][i - 1];
                if j == 0 {
                    v += l.powi((i + k) as i32) / fact[k + 1];
                }
                if variant == SequenceVariant::Kraus {
                    v += aux * c(i - 1, j, k - 1);
                }
                for p in 1..=(k - j) {
                    v += c(i + p, j, k - p) / fact[p + 1];
                    if variant == SequenceVariant::Dilated {
                        v += jp1 * l.powi(p as i32 + 1) / fact[p + 1] * c(i - 1, j, k - p);
                    }
                }
                level[j][i] = v;
            }
            level[k][i] = l * level[k][i - 1];
        }
        if let Some(bad) = level.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Overflow(format!("sequence entry at level {k} is {bad}")));
        }
        table.push(level);
    }
    Ok(GeneratingSequence {
        variant,
        l,
        aux,
        i_max,
        k_max,
        table,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

impl BoundConstants {
    /// C1 = max{B, l(e+1), 1} (Kraus) or max{l(J+1), l(e+1), 1} (dilated);
    /// C2 = (e+1) max(ln C1, C1).
    pub fn for_variant(variant: SequenceVariant, l: f64, aux: f64) -> Self {
        let first = match variant {
            SequenceVariant::Kraus => aux,
            SequenceVariant::Dilated => l * (aux + 1.0),
        };
        let c1 = first.max(l * (E + 1.0)).max(1.0);
        let c2 = (E + 1.0) * c1.ln().max(c1);
        Self { c1, c2 }
    }

    pub fn for_sequence(seq: &GeneratingSequence) -> Self {
        Self::for_variant(seq.variant, seq.l, seq.aux)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub variant: SequenceVariant,
    pub l: f64,
    pub aux: f64,
    pub c1: f64,
    pub c2: f64,
    pub i_max: usize,
    pub k_max: usize,
    pub entries_checked: usize,
    /// max over the table of c_{i,j,k} j! / (C1^{i+k} C2^k).
    pub max_ratio: f64,
    pub argmax: [usize; 3],
    pub passed: bool,
    pub log_base: String,
}

pub fn verify_bound(seq: &GeneratingSequence, c1: f64, c2: f64) -> BoundReport {
    let lfact: Vec<f64> = factorials(seq.k_max + 1).iter().map(|f| f.ln()).collect();
    let (lc1, lc2) = (c1.ln(), c2.ln());
    let mut max_ratio = 0.0;
    let mut argmax = [0; 3];
    let mut count = 0;
    for (i, j, k, c) in seq.entries() {
        count += 1;
        if c <= 0.0 {
            continue;
        }
        let r = (c.ln() + lfact[j] - (i + k) as f64 * lc1 - k as f64 * lc2).exp();
        if r > max_ratio {
            max_ratio = r;
            argmax = [i, j, k];
        }
    }
    BoundReport {
        variant: seq.variant,
        l: seq.l,
        aux: seq.aux,
        c1,
        c2,
        i_max: seq.i_max,
        k_max: seq.k_max,
        entries_checked: count,
        max_ratio,
        argmax,
        passed: max_ratio <= 1.0 + 1e-12,
        log_base: "natural".into(),
    }
}
