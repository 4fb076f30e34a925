//! Small hand-built terrains shared by the test suites and the CLI examples.

use crate::geom::Vec2;
use crate::terrain::Terrain;

/// Standard grid triangulation: `w × h` vertices at integer positions, every
/// cell split along the `(i,j)-(i+1,j+1)` diagonal.
pub fn grid_terrain(w: usize, h: usize, heights: Vec<f64>) -> Terrain<f64> {
    assert_eq!(heights.len(), w * h);
    let mut pos = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            pos.push(Vec2::new(i as f64, j as f64));
        }
    }
    let v = |i: usize, j: usize| (j * w + i) as u32;
    let mut tris = Vec::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            tris.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            tris.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    Terrain::from_parts_dedup(pos, heights, tris).expect("grid fixture is valid")
}

/// Two pits (ids 6 and 8) separated by one negative saddle (id 7, height 5).
pub fn two_pit() -> Terrain<f64> {
    #[rustfmt::skip]
    let heights = vec![
        10.0, 9.5, 9.0, 9.6, 10.1,
        10.2, 1.0, 5.0, 2.0, 10.3,
        10.4, 9.7, 9.1, 9.8, 10.5,
    ];
    grid_terrain(5, 3, heights)
}

/// Hexagonal fan whose center (id 0) is a monkey saddle: the ring heights
/// alternate low/high, giving six sign changes around the link.
pub fn monkey_saddle() -> Terrain<f64> {
    let mut pos = vec![Vec2::new(0.0, 0.0)];
    for k in 0..6 {
        let a = std::f64::consts::FRAC_PI_3 * k as f64;
        pos.push(Vec2::new(a.cos(), a.sin()));
    }
    let heights = vec![5.0, 1.0, 9.0, 2.0, 8.0, 3.0, 7.0];
    let tris = (1..=6)
        .map(|i| [0u32, i as u32, (i % 6 + 1) as u32])
        .collect();
    Terrain::from_parts(pos, heights, tris).expect("monkey saddle fixture is valid")
}

/// Square pit: four rim corners near height 0 around a center at `-depth`.
/// The exact pit volume at the rim is `(4/3) * half_side^2 * depth` up to the
/// tiny rim offsets that keep heights distinct.
pub fn pyramid_pit(half_side: f64, depth: f64) -> Terrain<f64> {
    let a = half_side;
    let pos = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(a, a),
        Vec2::new(-a, a),
        Vec2::new(-a, -a),
        Vec2::new(a, -a),
    ];
    let heights = vec![-depth, 0.0, 1e-9, 2e-9, 3e-9];
    let tris = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]];
    Terrain::from_parts(pos, heights, tris).expect("pyramid fixture is valid")
}

/// Prismatic 45-degree V-valley descending along `+x` with unit slope.
/// The valley floor runs along `y = 0`; cross-sections are symmetric V's.
pub fn v_valley(len: usize, half_width: usize) -> Terrain<f64> {
    let w = len;
    let h = 2 * half_width + 1;
    let mut heights = Vec::with_capacity(w * h);
    for j in 0..h {
        let y = j as f64 - half_width as f64;
        for i in 0..w {
            heights.push(y.abs() - i as f64);
        }
    }
    grid_terrain(w, h, heights)
}

/// Vertex id of the valley-floor vertex at column `i` in [`v_valley`].
pub fn v_valley_floor(len: usize, half_width: usize, i: usize) -> u32 {
    (half_width * len + i) as u32
}

/// Two parallel V-valleys (floors at `y = 0` and `y = 2`) separated by a
/// ridge of height 1 at `y = 1`, all descending along `+x` with unit slope.
pub fn twin_valley(len: usize, margin: usize) -> Terrain<f64> {
    let w = len;
    let lo = -(margin as isize);
    let hi = 2 + margin as isize;
    let h = (hi - lo + 1) as usize;
    let mut heights = Vec::with_capacity(w * h);
    for j in 0..h {
        let y = (lo + j as isize) as f64;
        let wy = y.abs().min((y - 2.0).abs());
        for i in 0..w {
            heights.push(wy - i as f64);
        }
    }
    grid_terrain(w, h, heights)
}

/// Floor vertex of the primary valley (`y = 0`) at column `i` in [`twin_valley`].
pub fn twin_valley_floor(len: usize, margin: usize, i: usize) -> u32 {
    (margin * len + i) as u32
}

/// A chain of `pits` depressions with ascending saddle heights, giving a
/// left-deep merge tree of height `pits - 1`.
pub fn nested_chain(pits: usize) -> Terrain<f64> {
    let w = 2 * pits + 1;
    let h = 3;
    let mut heights = vec![0.0; w * h];
    for i in 0..w {
        heights[i] = 60.0 + i as f64 * 0.01;
        heights[2 * w + i] = 70.0 + i as f64 * 0.01;
    }
    for i in 0..w {
        heights[w + i] = 50.0 + i as f64 * 0.01;
    }
    for p in 0..pits {
        heights[w + 2 * p + 1] = -10.0 - p as f64;
    }
    for s in 0..pits.saturating_sub(1) {
        heights[w + 2 * s + 2] = 1.0 + s as f64;
    }
    grid_terrain(w, h, heights)
}

/// Deterministic pseudo-random terrain on a jittered grid; boundary ring
/// raised so interior structure dominates. Intended for structural oracles,
/// not geometry-sensitive tests.
pub fn rough_terrain(seed: u64, w: usize, h: usize) -> Terrain<f64> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    let mut next = move || {
        // xorshift64*
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        (state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut pos = Vec::with_capacity(w * h);
    let mut heights = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let (jx, jy) = (next() - 0.5, next() - 0.5);
            let interior = i > 0 && i < w - 1 && j > 0 && j < h - 1;
            let scale = if interior { 0.4 } else { 0.0 };
            pos.push(Vec2::new(i as f64 + jx * scale, j as f64 + jy * scale));
            let boundary_lift = if interior { 0.0 } else { 2.0 };
            heights.push(next() + boundary_lift);
        }
    }
    let v = |i: usize, j: usize| (j * w + i) as u32;
    let mut tris = Vec::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            tris.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            tris.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    Terrain::from_parts_dedup(pos, heights, tris).expect("rough fixture is valid")
}

/// Count connected components of `{v : h(v) < level}` under mesh adjacency.
/// Brute-force oracle for merge-tree structure.
pub fn sublevel_components(terrain: &Terrain<f64>, level: f64) -> usize {
    let n = terrain.vertex_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut r = x;
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        let mut c = x;
        while parent[c as usize] != r {
            let nxt = parent[c as usize];
            parent[c as usize] = r;
            c = nxt;
        }
        r
    }
    for v in 0..n as u32 {
        if terrain.heights()[v as usize] >= level {
            continue;
        }
        for &w in terrain.neighbors(v) {
            if w == crate::terrain::V_INF || terrain.heights()[w as usize] >= level {
                continue;
            }
            let (a, b) = (find(&mut parent, v), find(&mut parent, w));
            if a != b {
                parent[a as usize] = b;
            }
        }
    }
    (0..n as u32)
        .filter(|&v| terrain.heights()[v as usize] < level && find(&mut parent, v) == v)
        .count()
}
