use std::collections::{BTreeSet, HashMap};

use nalgebra::Point3;

use super::{longest_edge, sorted_pair, TetMesh, LOCAL_EDGES};
use crate::error::{Error, Result};

/// Upper bound on closure passes before refinement is declared divergent.
pub const MAX_CLOSURE_LEVELS: usize = 100;

/// A refined mesh with its lineage back to the coarse mesh.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub mesh: TetMesh,
    /// `parent[t]` is the coarse element that contains new element `t`.
    pub parent: Vec<usize>,
    /// `untouched[t]` is true when new element `t` is identical to its parent.
    pub untouched: Vec<bool>,
}

impl Refinement {
    /// Coarse elements that were bisected at least once (the set `R`).
    pub fn refined_parents(&self) -> BTreeSet<usize> {
        self.parent
            .iter()
            .zip(&self.untouched)
            .filter(|(_, &u)| !u)
            .map(|(&p, _)| p)
            .collect()
    }

    /// Pairs `(coarse, fine)` of elements present in both meshes.
    pub fn common(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .zip(&self.untouched)
            .enumerate()
            .filter(|(_, (_, &u))| u)
            .map(|(t, (&p, _))| (p, t))
            .collect()
    }

    /// Fine elements grouped by coarse parent.
    pub fn children(&self, coarse_len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); coarse_len];
        for (t, &p) in self.parent.iter().enumerate() {
            out[p].push(t);
        }
        out
    }
}

#[derive(Clone, Copy)]
struct Work {
    vertices: [usize; 4],
    generation: u32,
    origin: usize,
    untouched: bool,
}

/// Bisects every marked element once at its refinement (longest) edge, then
/// bisects further elements until no hanging nodes remain.
pub fn bisect(mesh: &TetMesh, marked: &[usize]) -> Result<Refinement> {
    bisect_with_limit(mesh, marked, MAX_CLOSURE_LEVELS)
}

pub fn bisect_with_limit(mesh: &TetMesh, marked: &[usize], max_levels: usize) -> Result<Refinement> {
    let n = mesh.num_tets();
    let mut split = vec![false; n];
    for &t in marked {
        if t >= n {
            return Err(Error::OutOfRange { what: "element", index: t, len: n });
        }
        split[t] = true;
    }
    let mut vertices = mesh.vertices().to_vec();
    let mut work: Vec<Work> = mesh
        .tets()
        .iter()
        .enumerate()
        .map(|(t, tet)| Work { vertices: tet.vertices, generation: tet.generation, origin: t, untouched: true })
        .collect();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();

    let mut level = 0;
    while split.iter().any(|&s| s) {
        if level >= max_levels {
            return Err(Error::ClosureDiverged { levels: level });
        }
        level += 1;
        let mut next = Vec::with_capacity(work.len() + split.iter().filter(|&&s| s).count());
        for (w, &s) in work.iter().zip(&split) {
            if !s {
                next.push(*w);
                continue;
            }
            let p = w.vertices.map(|v| vertices[v]);
            let (a, b) = LOCAL_EDGES[longest_edge(&w.vertices, &p)];
            let key = sorted_pair(w.vertices[a], w.vertices[b]);
            let m = *midpoints.entry(key).or_insert_with(|| {
                let (va, vb) = (vertices[key.0], vertices[key.1]);
                vertices.push(Point3::from((va.coords + vb.coords) * 0.5));
                vertices.len() - 1
            });
            let mut first = w.vertices;
            first[b] = m;
            let mut second = w.vertices;
            second[a] = m;
            for child in [first, second] {
                next.push(Work { vertices: child, generation: w.generation + 1, origin: w.origin, untouched: false });
            }
        }
        work = next;
        // any element still carrying a split edge has a hanging node
        split = work
            .iter()
            .map(|w| {
                LOCAL_EDGES
                    .iter()
                    .any(|&(a, b)| midpoints.contains_key(&sorted_pair(w.vertices[a], w.vertices[b])))
            })
            .collect();
    }

    let parent = work.iter().map(|w| w.origin).collect();
    let untouched = work.iter().map(|w| w.untouched).collect();
    let generations = work.iter().map(|w| w.generation).collect();
    let cells = work.iter().map(|w| w.vertices).collect();
    let mesh = TetMesh::with_generations(vertices, cells, generations)?;
    Ok(Refinement { mesh, parent, untouched })
}
