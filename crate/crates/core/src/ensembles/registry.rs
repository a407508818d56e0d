use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    Atom, BandedEnsemble, BoundedDense, DiagonalImaginary, DiscreteAtoms, EnsembleError, GeneratorEnsemble,
    RankOneGeometric, ScaledRankOneGeometric,
};
use crate::lp_core::{Field, DEFAULT_DIM};

/// Flat parameter set shared by all kinds; each constructor reads what it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub dim: usize,
    pub rho: f64,
    pub p: f64,
    pub density: f64,
    pub drift: f64,
    pub bandwidth: usize,
    pub field: Field,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Atom>>,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            dim: DEFAULT_DIM,
            rho: 1.0,
            p: 2.0,
            density: 1.0,
            drift: 0.5,
            bandwidth: 1,
            field: Field::Real,
            atoms: None,
        }
    }
}

pub type EnsembleConstructor = fn(&EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError>;

/// Name → constructor table.
#[derive(Clone)]
pub struct EnsembleRegistry {
    entries: BTreeMap<String, EnsembleConstructor>,
}

impl std::fmt::Debug for EnsembleRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

fn bounded_dense(p: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
    Ok(Box::new(BoundedDense::new(p.dim, p.rho, p.p, p.density, p.drift, p.field)?))
}

fn banded(p: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
    Ok(Box::new(BandedEnsemble::new(
        p.dim,
        p.rho,
        p.p,
        p.bandwidth,
        p.density,
        p.drift,
        p.field,
    )?))
}

fn rank_one_geometric(p: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
    Ok(Box::new(RankOneGeometric::new(p.dim)?))
}

fn scaled_rank_one_geometric(p: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
    Ok(Box::new(ScaledRankOneGeometric::new(p.dim)?))
}

fn diagonal_imaginary(p: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
    Ok(Box::new(DiagonalImaginary::new(p.dim)?))
}

fn discrete_atoms(p: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
    let atoms = p
        .atoms
        .clone()
        .ok_or_else(|| EnsembleError::InvalidParameter("discrete_atoms needs `atoms`".into()))?;
    Ok(Box::new(DiscreteAtoms::new(atoms)?))
}

impl EnsembleRegistry {
    pub fn empty() -> Self {
        EnsembleRegistry { entries: BTreeMap::new() }
    }

    /// All built-in kinds.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("bounded_dense", bounded_dense);
        r.register("banded", banded);
        r.register("rank_one_geometric", rank_one_geometric);
        r.register("scaled_rank_one_geometric", scaled_rank_one_geometric);
        r.register("diagonal_imaginary", diagonal_imaginary);
        r.register("discrete_atoms", discrete_atoms);
        r
    }

    /// Adds or replaces a kind.
    pub fn register(&mut self, name: &str, ctor: EnsembleConstructor) {
        self.entries.insert(name.to_string(), ctor);
    }

    pub fn build(&self, name: &str, params: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
        let ctor = self
            .entries
            .get(name)
            .ok_or_else(|| EnsembleError::UnknownKind(name.to_string()))?;
        ctor(params)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl Default for EnsembleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_core::TruncOperator;

    #[test]
    fn builds_every_builtin() {
        let r = EnsembleRegistry::builtin();
        let mut params = EnsembleParams { dim: 8, ..Default::default() };
        params.atoms = Some(vec![Atom { operator: TruncOperator::identity(8), probability: 1.0 }]);
        for name in r.names() {
            let e = r.build(name, &params).unwrap();
            assert_eq!(e.kind(), name);
            assert_eq!(e.dim(), 8);
        }
    }

    #[test]
    fn unknown_kind() {
        let r = EnsembleRegistry::builtin();
        let err = r.build("nope", &EnsembleParams::default()).unwrap_err();
        assert_eq!(err, EnsembleError::UnknownKind("nope".into()));
    }

    #[test]
    fn custom_registration() {
        fn tiny(_: &EnsembleParams) -> Result<Box<dyn GeneratorEnsemble>, EnsembleError> {
            Ok(Box::new(RankOneGeometric::new(2)?))
        }
        let mut r = EnsembleRegistry::empty();
        r.register("tiny", tiny);
        assert_eq!(r.build("tiny", &EnsembleParams::default()).unwrap().dim(), 2);
    }
}
