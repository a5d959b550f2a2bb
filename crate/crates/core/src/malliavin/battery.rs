//! Declarative descriptions of functionals and elementary processes.
//!
//! ```toml
//! hurst = 0.75
//! horizon = 1.0
//! cells = 16
//! n_mc = 100000
//! seed = 7
//!
//! [[member]]
//! name = "beta_T"
//! dual = { monomials = [[1.0, [2]]], args = [[[0.0, 1.0, 1.0]]] }
//! [[member.noise]]
//! [[member.noise.term]]
//! interval = [0.0, 1.0]
//! profile = 1.0
//! functional = { monomials = [[1.0, [1]]], args = [[[0.0, 1.0, 1.0]]] }
//! ```
//!
//! An argument is a list of pieces `[a, b, c]` meaning `c 1_{(a, b]}`; a
//! monomial is `[coefficient, [exponents]]`. An omitted functional is the
//! constant 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CylindricalRV, ElementaryProcess, ElementaryTerm, Family, SmoothFunctional};
use crate::error::{invalid, Error, Result};
use crate::fbm::{HurstIndex, TimeGrid};
use crate::kernel::StepFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    #[serde(default)]
    pub family: Family,
    pub monomials: Vec<(f64, Vec<u32>)>,
    #[serde(default)]
    pub args: Vec<Vec<[f64; 3]>>,
}

impl Default for FunctionalSpec {
    fn default() -> Self {
        Self { family: Family::Polynomial, monomials: vec![(1.0, vec![])], args: vec![] }
    }
}

impl FunctionalSpec {
    pub fn build(&self, grid: TimeGrid, noise: usize) -> Result<CylindricalRV> {
        let f = SmoothFunctional::new(self.args.len(), self.family, &self.monomials)?;
        let args = self
            .args
            .iter()
            .map(|pieces| {
                let p: Vec<(f64, f64, f64)> = pieces.iter().map(|&[a, b, c]| (a, b, c)).collect();
                StepFunction::from_pieces(grid, &p)
            })
            .collect::<Result<Vec<_>>>()?;
        CylindricalRV::new(grid, f, args, noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec<P> {
    pub interval: [f64; 2],
    pub profile: P,
    #[serde(default)]
    pub functional: FunctionalSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec<P> {
    #[serde(default = "Vec::new", rename = "term")]
    pub terms: Vec<TermSpec<P>>,
}

/// Builds an elementary process whose component `k` is `noise[k]`.
pub fn build_process<P, Q>(
    grid: TimeGrid,
    hurst: HurstIndex,
    noise: &[NoiseSpec<P>],
    mut profile: impl FnMut(&P) -> Result<Q>,
) -> Result<ElementaryProcess<Q>> {
    let components = noise
        .iter()
        .enumerate()
        .map(|(k, n)| {
            n.terms
                .iter()
                .map(|t| {
                    let f = t.functional.build(grid, k)?;
                    ElementaryTerm::new(f, t.interval[0], t.interval[1], profile(&t.profile)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ElementaryProcess::new(grid, hurst, components)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub name: String,
    #[serde(default)]
    pub noise: Vec<NoiseSpec<f64>>,
    /// Test functional `F` for the duality check.
    #[serde(default)]
    pub dual: Option<FunctionalSpec>,
    #[serde(default)]
    pub dual_noise: usize,
}

/// A fixed family of scalar elementary integrands on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Battery {
    pub hurst: f64,
    pub horizon: f64,
    pub cells: usize,
    pub n_mc: usize,
    pub seed: u64,
    #[serde(rename = "member")]
    pub members: Vec<MemberSpec>,
}

impl Battery {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let b: Self = toml::from_str(s).map_err(|e| Error::Format { what: "battery file", reason: e.to_string() })?;
        b.grid()?;
        b.hurst_index()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&s)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.cells)
    }

    pub fn hurst_index(&self) -> Result<HurstIndex> {
        HurstIndex::new(self.hurst)
    }

    /// Largest noise count over members.
    pub fn noise_count(&self) -> usize {
        self.members.iter().map(|m| m.noise.len()).max().unwrap_or(0)
    }

    pub fn process(&self, i: usize) -> Result<ElementaryProcess<f64>> {
        self.process_with(i, self.grid()?, self.hurst_index()?)
    }

    /// Member `i` on another grid or Hurst index (intervals must stay aligned).
    pub fn process_with(&self, i: usize, grid: TimeGrid, hurst: HurstIndex) -> Result<ElementaryProcess<f64>> {
        let m = self.members.get(i).ok_or_else(|| invalid("member", format!("no member {i}")))?;
        build_process(grid, hurst, &m.noise, |c| Ok(*c))
    }

    pub fn dual(&self, i: usize) -> Result<Option<CylindricalRV>> {
        let m = &self.members[i];
        m.dual.as_ref().map(|f| f.build(self.grid()?, m.dual_noise)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
hurst = 0.75
horizon = 1.0
cells = 4
n_mc = 10
seed = 1

[[member]]
name = "beta_T"
dual = { monomials = [[1.0, [2]]], args = [[[0.0, 1.0, 1.0]]] }
[[member.noise]]
[[member.noise.term]]
interval = [0.0, 1.0]
profile = 1.0
functional = { monomials = [[1.0, [1]]], args = [[[0.0, 1.0, 1.0]]] }

[[member]]
name = "deterministic"
[[member.noise]]
[[member.noise.term]]
interval = [0.25, 0.5]
profile = -2.0
"#;

    #[test]
    fn parses_and_builds() {
        let b = Battery::from_toml_str(SAMPLE).unwrap();
        assert_eq!(b.members.len(), 2);
        let u = b.process(0).unwrap();
        assert_eq!(u.noise_count(), 1);
        assert!(!u.is_deterministic());
        assert!(b.process(1).unwrap().is_deterministic());
        let f = b.dual(0).unwrap().unwrap();
        assert_eq!(f.functional().arity(), 1);
        assert!(b.dual(1).unwrap().is_none());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Battery::from_toml_str(&SAMPLE.replace("hurst = 0.75", "hurst = 0.4")).is_err());
        assert!(Battery::from_toml_str(&SAMPLE.replace("[0.25, 0.5]", "[0.3, 0.5]")).unwrap().process(1).is_err());
        assert!(Battery::from_toml_str("hurst = 0.7").is_err());
    }
}
