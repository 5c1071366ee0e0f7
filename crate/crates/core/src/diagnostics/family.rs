//! Kernel families `l ↦ I(l)` and their JSON file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SymmetricKernel;
use crate::moments::{variance, ChaosVectorSpec};

/// Largest `l` accepted by the built-in families whose basis grows as `2^l`.
pub const MAX_LOG2_DIM: u32 = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyMember {
    pub l: u32,
    pub spec: ChaosVectorSpec,
}

/// A finite stretch of a kernel family with its declared norm floor `eta`
/// and variance bound.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelFamily {
    name: String,
    eta: f64,
    variance_bound: f64,
    members: Vec<FamilyMember>,
}

impl KernelFamily {
    /// Validates the standing assumptions: `‖f_l^{(j)}‖ >= eta`,
    /// `d_j! ‖f_l^{(j)}‖² <= variance_bound`, and orders constant in `l`.
    pub fn new(name: impl Into<String>, eta: f64, variance_bound: f64, mut members: Vec<FamilyMember>) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta = {eta} must be positive")));
        }
        if !(variance_bound > 0.0 && variance_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance bound {variance_bound} must be positive")));
        }
        if members.is_empty() {
            return Err(Error::InvalidArgument("family has no members".into()));
        }
        members.sort_by_key(|m| m.l);
        if members.windows(2).any(|w| w[0].l == w[1].l) {
            return Err(Error::InvalidArgument("duplicate family index".into()));
        }
        let orders = members[0].spec.orders();
        for m in &members {
            if m.spec.orders() != orders {
                return Err(Error::Assumption(format!(
                    "l = {}: orders {:?} differ from {:?}",
                    m.l,
                    m.spec.orders(),
                    orders
                )));
            }
            for (j, f) in m.spec.components().iter().enumerate() {
                let norm = f.norm();
                if norm < eta {
                    return Err(Error::Assumption(format!(
                        "l = {}, j = {}: kernel norm {norm} below eta = {eta}",
                        m.l,
                        j + 1
                    )));
                }
                let v = variance(f);
                if v > variance_bound {
                    return Err(Error::Assumption(format!(
                        "l = {}, j = {}: variance {v} exceeds bound {variance_bound}",
                        m.l,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { name: name.into(), eta, variance_bound, members })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn variance_bound(&self) -> f64 {
        self.variance_bound
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn member(&self, l: u32) -> Option<&FamilyMember> {
        self.members.iter().find(|m| m.l == l)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_json(&self) -> String {
        let file = FamilyFile {
            name: self.name.clone(),
            eta: self.eta,
            variance_bound: self.variance_bound,
            specs: self.members.iter().map(|m| SpecFile::from_spec(Some(m.l), &m.spec)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("family serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let members = file
            .specs
            .iter()
            .map(|s| {
                let l = s.l.ok_or_else(|| Error::Parse("family spec without `l`".into()))?;
                Ok(FamilyMember { l, spec: s.to_spec()? })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.name, file.eta, file.variance_bound, members)
    }
}

pub fn load_family(path: impl AsRef<Path>) -> Result<KernelFamily> {
    KernelFamily::from_json(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryFile {
    /// Sorted, 1-based.
    pub idx: Vec<usize>,
    pub val: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub order: usize,
    pub entries: Vec<EntryFile>,
}

/// One chaos vector in file form; `l` is present inside family files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    pub dim: usize,
    pub components: Vec<ComponentFile>,
}

impl SpecFile {
    pub fn from_spec(l: Option<u32>, spec: &ChaosVectorSpec) -> Self {
        let components = spec
            .components()
            .iter()
            .map(|f| ComponentFile {
                order: f.order(),
                entries: f
                    .entries()
                    .map(|(idx, val)| EntryFile { idx: idx.iter().map(|&i| i as usize + 1).collect(), val })
                    .collect(),
            })
            .collect();
        Self { l, dim: spec.dim(), components }
    }

    pub fn to_spec(&self) -> Result<ChaosVectorSpec> {
        let components = self
            .components
            .iter()
            .map(|c| {
                let entries = c
                    .entries
                    .iter()
                    .map(|e| {
                        let idx = e
                            .idx
                            .iter()
                            .map(|&i| {
                                i.checked_sub(1).ok_or_else(|| Error::Parse("indices are 1-based".into()))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok((idx, e.val))
                    })
                    .collect::<Result<Vec<_>>>()?;
                SymmetricKernel::from_sorted(c.order, self.dim, entries)
            })
            .collect::<Result<Vec<_>>>()?;
        ChaosVectorSpec::new(components)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    name: String,
    eta: f64,
    variance_bound: f64,
    specs: Vec<SpecFile>,
}

/// Names accepted by [`builtin_family`].
pub const BUILTIN_FAMILIES: [&str; 4] = ["diag2", "diag3", "fixed_chisq", "oscillating_pair"];

const BUILTIN_ETA: f64 = 0.5;

/// `(cos θ_l, sin θ_l)` for `θ_l = lπ/2`, exact.
fn quarter_turn(l: u32) -> (f64, f64) {
    match l % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

fn normalized_diagonal(order: usize, dim: usize, range: std::ops::Range<usize>) -> Result<SymmetricKernel> {
    let scale = (range.len() as f64).sqrt().recip();
    SymmetricKernel::diagonal(order, dim, range, scale)
}

/// The chaos vector of built-in family `name` at index `l`.
pub fn builtin_member(name: &str, l: u32) -> Result<ChaosVectorSpec> {
    let n = || -> Result<usize> {
        if l > MAX_LOG2_DIM {
            return Err(Error::InvalidArgument(format!(
                "family {name}: l = {l} exceeds the cap l <= {MAX_LOG2_DIM} (n = 2^l)"
            )));
        }
        Ok(1usize << l)
    };
    match name {
        "diag2" => ChaosVectorSpec::single(normalized_diagonal(2, n()?, 0..n()?)?),
        "diag3" => ChaosVectorSpec::single(normalized_diagonal(3, n()?, 0..n()?)?),
        "fixed_chisq" => ChaosVectorSpec::single(SymmetricKernel::diagonal(2, 1, [0], 1.0)?),
        "oscillating_pair" => {
            let n = n()?;
            let first = normalized_diagonal(2, 2 * n, 0..n)?;
            let second = normalized_diagonal(2, 2 * n, n..2 * n)?;
            let (c, s) = quarter_turn(l);
            let mixed = first.scale(c).add_scaled(&second, s)?;
            ChaosVectorSpec::new(vec![first, mixed])
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown family `{other}`; expected one of {BUILTIN_FAMILIES:?}"
        ))),
    }
}

/// Built-in family `name` over `l_min..=l_max`.
pub fn builtin_family(name: &str, l_min: u32, l_max: u32) -> Result<KernelFamily> {
    if l_min > l_max {
        return Err(Error::InvalidArgument(format!("empty index range {l_min}..={l_max}")));
    }
    let members = (l_min..=l_max)
        .map(|l| Ok(FamilyMember { l, spec: builtin_member(name, l)? }))
        .collect::<Result<Vec<_>>>()?;
    let order = members[0].spec.orders()[0];
    let bound = 2.0 * crate::moments::factorial(order);
    KernelFamily::new(name, BUILTIN_ETA, bound, members)
}
