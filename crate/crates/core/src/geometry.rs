//! Vector field geometries in map coordinates.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A closed linear ring. The closing vertex is implicit: the last vertex
/// connects back to the first and is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(pub Vec<(f64, f64)>);

impl Ring {
    /// Build a ring, dropping a repeated closing vertex if present.
    pub fn new(mut vertices: Vec<(f64, f64)>) -> Self {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Ring(vertices)
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.0
    }

    /// Shoelace area; positive when counter-clockwise (y up).
    pub fn signed_area(&self) -> f64 {
        let v = &self.0;
        let n = v.len();
        let mut acc = 0.0;
        for i in 0..n {
            let (x0, y0) = v[i];
            let (x1, y1) = v[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        acc / 2.0
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn reversed(&self) -> Ring {
        let mut v = self.0.clone();
        v.reverse();
        Ring(v)
    }

    /// Edges as `(start, end)` pairs including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        Self { exterior, holes }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(Ring::new(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]), vec![])
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    /// Exterior counter-clockwise, holes clockwise.
    pub fn normalized(&self) -> Polygon {
        let exterior = if self.exterior.is_ccw() {
            self.exterior.clone()
        } else {
            self.exterior.reversed()
        };
        let holes = self
            .holes
            .iter()
            .map(|h| if h.is_ccw() { h.reversed() } else { h.clone() })
            .collect();
        Polygon { exterior, holes }
    }
}

/// One field: an id and one or more polygon parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPolygon {
    pub id: u32,
    pub parts: Vec<Polygon>,
}

impl FieldPolygon {
    pub fn new(id: u32, polygon: Polygon) -> Self {
        Self {
            id,
            parts: vec![polygon],
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.parts.iter().flat_map(|p| p.rings())
    }
}

/// Collection of fields with unique, non-zero ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldPolygonSet {
    fields: Vec<FieldPolygon>,
}

impl FieldPolygonSet {
    pub fn new(fields: Vec<FieldPolygon>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &fields {
            if f.id == 0 {
                return Err(Error::InvalidArgument("field id 0 is reserved for background".into()));
            }
            if !seen.insert(f.id) {
                return Err(Error::InvalidArgument(format!("duplicate field id {}", f.id)));
            }
            for ring in f.rings() {
                if ring.0.len() < 3 {
                    return Err(Error::InvalidArgument(format!(
                        "field {} has a ring with fewer than 3 vertices",
                        f.id
                    )));
                }
            }
        }
        Ok(Self { fields })
    }

    pub fn fields(&self) -> &[FieldPolygon] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Same set with every part's ring orientation normalized.
    pub fn normalized(&self) -> FieldPolygonSet {
        FieldPolygonSet {
            fields: self
                .fields
                .iter()
                .map(|f| FieldPolygon {
                    id: f.id,
                    parts: f.parts.iter().map(Polygon::normalized).collect(),
                })
                .collect(),
        }
    }
}
