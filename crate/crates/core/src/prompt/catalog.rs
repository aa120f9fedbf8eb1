use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Association, ClassEntity, KNOWN_TYPES};

const BUNDLED: &str = include_str!("../../data/catalog.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid shot catalog: {0}")]
pub struct CatalogError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotKind {
    Class,
    Attribute,
}

/// An example diagram from an unrelated domain. `completion` holds the
/// completed class list used as the right-hand side of attribute shots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShotDiagram {
    pub package_name: String,
    pub shot_kinds: Vec<ShotKind>,
    pub classes: Vec<ClassEntity>,
    #[serde(default)]
    pub associations: Vec<Association>,
    #[serde(default)]
    pub completion: Vec<ClassEntity>,
}

impl ShotDiagram {
    pub fn used_for(&self, kind: ShotKind) -> bool {
        self.shot_kinds.contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeTypeShot {
    pub attribute_name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationNameShot {
    pub source: String,
    pub target: String,
    pub name: String,
}

/// `kind` is one of the association kinds or `no`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationTypeShot {
    pub source: String,
    pub target: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InheritanceShot {
    pub first: String,
    pub second: String,
    pub superclass: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShotCatalog {
    #[serde(default)]
    pub diagrams: Vec<ShotDiagram>,
    #[serde(default)]
    pub attribute_type_pairs: Vec<AttributeTypeShot>,
    #[serde(default)]
    pub association_name_pairs: Vec<AssociationNameShot>,
    #[serde(default)]
    pub association_type_pairs: Vec<AssociationTypeShot>,
    #[serde(default)]
    pub inheritance_pairs: Vec<InheritanceShot>,
}

const TYPE_ANSWERS: [&str; 5] = ["inheritance", "association", "aggregation", "composition", "no"];

impl ShotCatalog {
    /// The catalog shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let catalog: ShotCatalog =
            serde_json::from_str(text).map_err(|e| CatalogError(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn from_file(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CatalogError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.diagrams.len() < 2 {
            return Err(CatalogError(format!(
                "need at least 2 diagrams, found {}",
                self.diagrams.len()
            )));
        }
        for d in &self.diagrams {
            let names: BTreeSet<&str> = d.classes.iter().map(|c| c.name.as_str()).collect();
            if names.len() != d.classes.len() {
                return Err(CatalogError(format!("{}: duplicate class", d.package_name)));
            }
            for a in &d.associations {
                if !names.contains(a.source.as_str()) || !names.contains(a.target.as_str()) {
                    return Err(CatalogError(format!(
                        "{}: association {}-{} names an undeclared class",
                        d.package_name, a.source, a.target
                    )));
                }
            }
            if d.used_for(ShotKind::Attribute) && d.completion.is_empty() {
                return Err(CatalogError(format!(
                    "{}: attribute shots need a completion",
                    d.package_name
                )));
            }
        }
        let types: BTreeSet<&str> = self
            .attribute_type_pairs
            .iter()
            .map(|p| p.type_name.as_str())
            .collect();
        if let Some(missing) = KNOWN_TYPES.iter().find(|t| !types.contains(*t)) {
            return Err(CatalogError(format!("no attribute-type shot of type {missing}")));
        }
        for s in &self.association_type_pairs {
            if !TYPE_ANSWERS.contains(&s.kind.as_str()) {
                return Err(CatalogError(format!("unknown association type {:?}", s.kind)));
            }
        }
        for s in &self.inheritance_pairs {
            if s.superclass != s.first && s.superclass != s.second {
                return Err(CatalogError(format!(
                    "superclass {} is not one of ({}, {})",
                    s.superclass, s.first, s.second
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_is_valid() {
        let c = ShotCatalog::bundled();
        assert_eq!(c.diagrams.len(), 3);
        assert_eq!(c.association_name_pairs.len(), 11);
    }

    #[test]
    fn rejects_missing_type() {
        let mut c = ShotCatalog::bundled();
        c.attribute_type_pairs.retain(|p| p.type_name != "double");
        assert!(c.validate().unwrap_err().0.contains("double"));
    }

    #[test]
    fn rejects_foreign_superclass() {
        let mut c = ShotCatalog::bundled();
        c.inheritance_pairs[0].superclass = "root".into();
        assert!(c.validate().is_err());
    }
}
