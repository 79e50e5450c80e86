use std::collections::{BTreeSet, HashMap};

use hvi_core::mesh::{build_rect_mesh, refine_uniform, BoundarySpec, BoundaryTag, Mesh};
use proptest::prelude::*;

fn spec_from_bits(bits: u8) -> BoundarySpec {
    let t = |b: u8| if bits & b != 0 { BoundaryTag::Slip } else { BoundaryTag::Dirichlet };
    BoundarySpec { left: t(1), right: t(2), bottom: t(4), top: t(8) }
}

/// Edges used by exactly one triangle, counted from scratch.
fn topological_boundary(m: &Mesh) -> BTreeSet<(usize, usize)> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &m.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    count.into_iter().filter(|(_, c)| *c == 1).map(|(e, _)| e).collect()
}

/// Shoelace area of the closed boundary loop, independent of the triangles.
fn boundary_polygon_area(m: &Mesh) -> f64 {
    m.boundary_edges
        .iter()
        .map(|e| {
            let (p, q) = (m.vertices[e.vertices[0]], m.vertices[e.vertices[1]]);
            0.5 * (p[0] * q[1] - q[0] * p[1])
        })
        .sum()
}

fn key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

fn geometric_triangles(m: &Mesh) -> BTreeSet<Vec<(i64, i64)>> {
    m.triangles
        .iter()
        .map(|t| {
            let mut v: Vec<_> = t.iter().map(|&i| key(m.vertices[i])).collect();
            v.sort();
            v
        })
        .collect()
}

#[test]
fn four_by_four_area_matches_polygon_area() {
    let m = build_rect_mesh(4, 4, 1.0, 1.0, BoundarySpec::slip_bottom()).unwrap();
    assert!((m.area() - 1.0).abs() <= 1e-14);
    assert!((boundary_polygon_area(&m) - 1.0).abs() <= 1e-14);
}

#[test]
fn two_refinements_of_one_cell_reproduce_four_by_four() {
    let spec = BoundarySpec::slip_bottom();
    let coarse = build_rect_mesh(1, 1, 1.0, 1.0, spec).unwrap();
    let fine = refine_uniform(&refine_uniform(&coarse));
    let direct = build_rect_mesh(4, 4, 1.0, 1.0, spec).unwrap();
    assert_eq!(fine.n_vertices(), direct.n_vertices());
    assert_eq!(fine.n_triangles(), direct.n_triangles());

    // the vertex map is determined by coordinates; it must carry triangles
    // onto triangles and boundary edges onto equally tagged boundary edges
    let pos: HashMap<(i64, i64), usize> = direct.vertices.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
    assert_eq!(pos.len(), direct.n_vertices());
    let perm: Vec<usize> = fine.vertices.iter().map(|p| pos[&key(*p)]).collect();
    let mut seen = perm.clone();
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), perm.len());
    assert_eq!(geometric_triangles(&fine), geometric_triangles(&direct));

    let edges = |m: &Mesh, map: &dyn Fn(usize) -> usize| -> BTreeSet<(usize, usize, String)> {
        m.boundary_edges
            .iter()
            .map(|e| {
                let (a, b) = (map(e.vertices[0]), map(e.vertices[1]));
                (a.min(b), a.max(b), e.tag.to_string())
            })
            .collect()
    };
    assert_eq!(edges(&fine, &|v| perm[v]), edges(&direct, &|v| v));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structural_invariants(nx in 1usize..7, ny in 1usize..7, lx in 0.1f64..5.0, ly in 0.1f64..5.0,
                             bits in 1u8..15, refine in 0usize..2) {
        let mut m = build_rect_mesh(nx, ny, lx, ly, spec_from_bits(bits)).unwrap();
        for _ in 0..refine {
            m = refine_uniform(&m);
        }
        let (fx, fy) = (nx << refine, ny << refine);
        prop_assert_eq!(m.n_vertices(), (fx + 1) * (fy + 1));
        prop_assert_eq!(m.n_triangles(), 2 * fx * fy);
        for t in 0..m.n_triangles() {
            prop_assert!(m.signed_area(t) > 0.0);
        }
        prop_assert!((m.area() - lx * ly).abs() <= 1e-12 * lx * ly);
        let perimeter = 2.0 * (lx + ly);
        prop_assert!((m.boundary_length() - perimeter).abs() <= 1e-12 * perimeter);

        let stored: BTreeSet<(usize, usize)> = m.boundary_edges.iter()
            .map(|e| (e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1]))).collect();
        prop_assert_eq!(stored.len(), m.boundary_edges.len());
        prop_assert_eq!(stored, topological_boundary(&m));

        let mut has_d = false;
        let mut has_s = false;
        for e in &m.boundary_edges {
            prop_assert!(m.triangles[e.triangle].contains(&e.vertices[0]));
            prop_assert!(m.triangles[e.triangle].contains(&e.vertices[1]));
            let g = m.geometric_normal(e);
            prop_assert!((g[0] - e.normal[0]).abs() < 1e-12 && (g[1] - e.normal[1]).abs() < 1e-12);
            prop_assert!(e.normal[0].abs() + e.normal[1].abs() == 1.0);
            prop_assert_eq!(e.tag, m.spec.tag(e.side));
            has_d |= e.tag == BoundaryTag::Dirichlet;
            has_s |= e.tag == BoundaryTag::Slip;
        }
        prop_assert!(has_d && has_s);
    }
}
