use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, TileSpec};
use crate::error::{Error, Result};
use crate::geometry::{intersection_area, polygon_of, OrientedBox, Polygon, ShapeClass, ARC_SEGMENTS};

/// Maximum overlap between two template slots, as a fraction of the smaller
/// tile's area.
const MAX_SLOT_OVERLAP: f64 = 0.01;

const BUILTIN: [&str; 2] = [
    include_str!("../../fixtures/templates/mushroom.json"),
    include_str!("../../fixtures/templates/ice_cream.json"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSlot {
    #[serde(default)]
    pub name: String,
    pub shape: ShapeClass,
    /// When set, only this spec satisfies the slot; otherwise any spec of
    /// the right shape does.
    #[serde(default)]
    pub spec_id: Option<String>,
    pub cx: f64,
    pub cy: f64,
    pub theta_deg: f64,
}

impl PartSlot {
    pub fn accepts(&self, shape: ShapeClass, spec_id: &str) -> bool {
        self.shape == shape && self.spec_id.as_deref().is_none_or(|s| s == spec_id)
    }

    /// The catalog spec used to give the slot a physical size.
    pub fn spec<'c>(&self, catalog: &'c Catalog) -> Result<&'c TileSpec> {
        let spec = match &self.spec_id {
            Some(id) => catalog.get(id)?,
            None => catalog
                .first_of_shape(self.shape)
                .ok_or_else(|| Error::invalid("slot", format!("no catalog spec of shape {}", self.shape)))?,
        };
        if spec.shape != self.shape {
            return Err(Error::invalid(
                format!("slot '{}'", self.name),
                format!("spec '{}' is a {}, not a {}", spec.id, spec.shape, self.shape),
            ));
        }
        Ok(spec)
    }

    pub fn pose(&self, spec: &TileSpec) -> Result<OrientedBox> {
        OrientedBox::new(self.cx, self.cy, spec.width(), spec.height(), self.theta_deg)
    }

    pub fn polygon(&self, catalog: &Catalog) -> Result<Polygon> {
        let spec = self.spec(catalog)?;
        polygon_of(self.shape, &self.pose(spec)?, ARC_SEGMENTS)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartGroup {
    #[serde(default)]
    pub name: String,
    /// Any one alternative completes the group.
    pub alternatives: Vec<Vec<PartSlot>>,
}

/// A target figure: every group must be satisfied by one of its
/// alternatives. Slot poses live in a template frame (pixels, y down).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionTemplate {
    pub id: String,
    pub parts: Vec<PartGroup>,
}

impl CompositionTemplate {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Fills in default group and slot names.
    fn named(mut self) -> Self {
        for (g, group) in self.parts.iter_mut().enumerate() {
            if group.name.is_empty() {
                group.name = format!("part{}", g + 1);
            }
            for alt in &mut group.alternatives {
                let n = alt.len();
                for (s, slot) in alt.iter_mut().enumerate() {
                    if slot.name.is_empty() {
                        slot.name = if n == 1 {
                            group.name.clone()
                        } else {
                            format!("{}-{}", group.name, s + 1)
                        };
                    }
                }
            }
        }
        self
    }

    fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::invalid("id", "empty template id"));
        }
        if self.parts.is_empty() {
            return Err(Error::invalid("parts", "template has no part groups"));
        }
        for (g, group) in self.parts.iter().enumerate() {
            if group.alternatives.is_empty() {
                return Err(Error::invalid(format!("parts[{g}].alternatives"), "no alternatives"));
            }
            for (a, alt) in group.alternatives.iter().enumerate() {
                if alt.is_empty() {
                    return Err(Error::invalid(
                        format!("parts[{g}].alternatives[{a}]"),
                        "empty alternative",
                    ));
                }
            }
        }
        // every pair of slots that can coexist must respect the packing rule
        let polys: Vec<Vec<Vec<Polygon>>> = self
            .parts
            .iter()
            .map(|g| {
                g.alternatives
                    .iter()
                    .map(|alt| alt.iter().map(|s| s.polygon(catalog)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut coexisting: Vec<(&str, &Polygon, &str, &Polygon)> = Vec::new();
        for (g, group) in polys.iter().enumerate() {
            for (a, alt) in group.iter().enumerate() {
                let slots = &self.parts[g].alternatives[a];
                for i in 0..alt.len() {
                    for j in i + 1..alt.len() {
                        coexisting.push((&slots[i].name, &alt[i], &slots[j].name, &alt[j]));
                    }
                    for (g2, group2) in polys.iter().enumerate().skip(g + 1) {
                        for (a2, alt2) in group2.iter().enumerate() {
                            for (j, p) in alt2.iter().enumerate() {
                                let other = &self.parts[g2].alternatives[a2][j].name;
                                coexisting.push((&slots[i].name, &alt[i], other, p));
                            }
                        }
                    }
                }
            }
        }
        for (na, pa, nb, pb) in coexisting {
            let limit = MAX_SLOT_OVERLAP * pa.area().min(pb.area());
            if intersection_area(pa, pb) > limit {
                return Err(Error::invalid(
                    "parts",
                    format!("slots '{na}' and '{nb}' overlap by more than 1%"),
                ));
            }
        }
        Ok(())
    }
}

/// Read-mostly registry of composition templates, keyed by id.
#[derive(Clone, Debug, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, CompositionTemplate>,
}

impl TemplateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with the shipped templates.
    pub fn builtin(catalog: &Catalog) -> Result<Self> {
        let mut reg = TemplateRegistry::new();
        for text in BUILTIN {
            let t: CompositionTemplate = serde_json::from_str(text).map_err(|e| Error::json("builtin template", e))?;
            reg.register(t, catalog)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, template: CompositionTemplate, catalog: &Catalog) -> Result<String> {
        let template = template.named();
        template.validate(catalog)?;
        if self.templates.contains_key(&template.id) {
            return Err(Error::DuplicateTemplate(template.id));
        }
        let id = template.id.clone();
        self.templates.insert(id.clone(), template);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<&CompositionTemplate> {
        self.templates
            .get(id)
            .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    /// Templates in id order.
    pub fn iter(&self) -> impl Iterator<Item = &CompositionTemplate> {
        self.templates.values()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.templates.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_mushroom_structure() {
        let cat = Catalog::default();
        let reg = TemplateRegistry::builtin(&cat).unwrap();
        let m = reg.get("mushroom").unwrap();
        assert_eq!(m.parts.len(), 2);
        let cap = &m.parts[0];
        assert_eq!(cap.alternatives.len(), 1);
        assert!(cap.alternatives[0].iter().all(|s| s.shape == ShapeClass::QuarterCircle));
        assert_eq!(cap.alternatives[0].len(), 2);
        let stem = &m.parts[1];
        assert_eq!(stem.alternatives.len(), 2);
        assert!(stem.alternatives[0].iter().all(|s| s.shape == ShapeClass::Rectangle));
        assert!(stem.alternatives[1]
            .iter()
            .all(|s| s.shape == ShapeClass::RightTriangle));
    }

    #[test]
    fn empty_parts_rejected() {
        let cat = Catalog::default();
        let mut reg = TemplateRegistry::new();
        let t = CompositionTemplate {
            id: "nothing".into(),
            parts: vec![],
        };
        assert!(matches!(reg.register(t, &cat), Err(Error::Invalid { .. })));
    }

    #[test]
    fn duplicate_rejected() {
        let cat = Catalog::default();
        let mut reg = TemplateRegistry::builtin(&cat).unwrap();
        let again = reg.get("mushroom").unwrap().clone();
        assert!(matches!(reg.register(again, &cat), Err(Error::DuplicateTemplate(_))));
    }

    #[test]
    fn overlapping_slots_rejected() {
        let cat = Catalog::default();
        let slot = |cx: f64| PartSlot {
            name: String::new(),
            shape: ShapeClass::Square,
            spec_id: None,
            cx,
            cy: 0.0,
            theta_deg: 0.0,
        };
        let t = CompositionTemplate {
            id: "clash".into(),
            parts: vec![PartGroup {
                name: "body".into(),
                alternatives: vec![vec![slot(0.0), slot(10.0)]],
            }],
        };
        assert!(TemplateRegistry::new().register(t, &cat).is_err());
    }

    #[test]
    fn wrong_shape_for_spec_rejected() {
        let cat = Catalog::default();
        let t = CompositionTemplate {
            id: "odd".into(),
            parts: vec![PartGroup {
                name: "x".into(),
                alternatives: vec![vec![PartSlot {
                    name: String::new(),
                    shape: ShapeClass::Square,
                    spec_id: Some("red_triangle".into()),
                    cx: 0.0,
                    cy: 0.0,
                    theta_deg: 0.0,
                }]],
            }],
        };
        assert!(TemplateRegistry::new().register(t, &cat).is_err());
    }
}
