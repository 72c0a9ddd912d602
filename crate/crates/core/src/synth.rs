//! Synthetic test images: a faintly textured body carrying small filled
//! polygons and ellipses, on a dark background, plus slowly morphing
//! sequences of such scenes. Rendering uses 4x4
//! supersampling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::GrayImage;
use crate::Point;

const SUPERSAMPLE: usize = 4;

/// Content lies within this fraction of the image size from the centre.
const REACH: f64 = 0.3;
/// Spot layout, relative to the diameter of the spot cloud.
const BOND: f64 = 0.185;
const GAP: f64 = 0.26;
const CHAIN_LENGTH: (usize, usize) = (1, 4);
/// Largest change of direction along a chain, radians.
const TURN: f64 = 1.1;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Polygon(Vec<Point>),
    Ellipse {
        centre: Point,
        a: f64,
        b: f64,
        angle: f64,
    },
}

impl Shape {
    fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Polygon(v) => {
                // even-odd ray cast
                let mut inside = false;
                let mut j = v.len() - 1;
                for i in 0..v.len() {
                    let (a, b) = (v[i], v[j]);
                    if (a.y > p.y) != (b.y > p.y)
                        && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x
                    {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
            Shape::Ellipse {
                centre,
                a,
                b,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (p.x - centre.x, p.y - centre.y);
                let u = (c * dx + s * dy) / a;
                let v = (-s * dx + c * dy) / b;
                u * u + v * v <= 1.0
            }
        }
    }

    fn translated(&self, dx: f64, dy: f64) -> Shape {
        match self {
            Shape::Polygon(v) => {
                Shape::Polygon(v.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect())
            }
            Shape::Ellipse {
                centre,
                a,
                b,
                angle,
            } => Shape::Ellipse {
                centre: Point::new(centre.x + dx, centre.y + dy),
                a: *a,
                b: *b,
                angle: *angle,
            },
        }
    }

    fn anchor(&self) -> Point {
        match self {
            Shape::Polygon(v) => {
                let n = v.len() as f64;
                Point::new(
                    v.iter().map(|p| p.x).sum::<f64>() / n,
                    v.iter().map(|p| p.y).sum::<f64>() / n,
                )
            }
            Shape::Ellipse { centre, .. } => *centre,
        }
    }
}

/// Isotropic Gaussian intensity bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub centre: Point,
    pub width: f64,
    pub height: f64,
}

impl Bump {
    fn at(&self, p: Point) -> f64 {
        self.height * (-p.dist2(&self.centre) / (2.0 * self.width * self.width)).exp()
    }
}

/// A filled shape: constant level plus bump texture.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub shape: Shape,
    /// Chain the layer belongs to; 0 for the body.
    pub group: usize,
    pub level: f64,
    pub texture: Vec<Bump>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub size: usize,
    pub background: f64,
    /// Layers painted in order, later ones on top.
    pub layers: Vec<Layer>,
}

fn random_polygon(rng: &mut ChaCha8Rng, centre: Point, radius: f64, sides: usize) -> Shape {
    let offset = rng.gen_range(0.0..2.0 * PI);
    let mut angles: Vec<f64> = (0..sides)
        .map(|i| offset + 2.0 * PI * (i as f64 + rng.gen_range(-0.25..0.25)) / sides as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    Shape::Polygon(
        angles
            .into_iter()
            .map(|a| {
                let r = radius * rng.gen_range(0.65..1.0);
                Point::new(centre.x + r * a.cos(), centre.y + r * a.sin())
            })
            .collect(),
    )
}

/// Spot centres inside the unit-diameter disk around the origin, grouped in
/// short chains. Spots in a chain are `BOND` apart; spots of different
/// chains, and non-adjacent spots of one chain, stay `GAP` apart. Two chains
/// start at opposite ends of a diameter, so the cloud spans exactly 1.
fn spot_chains(rng: &mut ChaCha8Rng) -> Vec<(Point, usize)> {
    let mut spots: Vec<(Point, usize)> = Vec::new();
    let fits = |spots: &[(Point, usize)], p: Point, chain: usize, last: Option<Point>| {
        p.x.hypot(p.y) <= 0.5 + 1e-12
            && spots.iter().all(|&(q, c)| {
                if c == chain && Some(q) == last {
                    true
                } else {
                    q.dist(&p) >= GAP
                }
            })
    };
    let phi = rng.gen_range(0.0..2.0 * PI);
    let ends = [
        Point::new(0.5 * phi.cos(), 0.5 * phi.sin()),
        Point::new(-0.5 * phi.cos(), -0.5 * phi.sin()),
    ];
    let mut chain = 0;
    let mut failures = 0;
    while failures < 300 {
        let seed = if chain < 2 {
            ends[chain]
        } else {
            let rho = 0.5 * rng.gen::<f64>().sqrt();
            let t = rng.gen_range(0.0..2.0 * PI);
            Point::new(rho * t.cos(), rho * t.sin())
        };
        if !fits(&spots, seed, chain, None) {
            failures += 1;
            continue;
        }
        spots.push((seed, chain));
        let length = rng.gen_range(CHAIN_LENGTH.0..=CHAIN_LENGTH.1);
        // first step points inwards so rim seeds can grow
        let mut heading = (-seed.y).atan2(-seed.x) + rng.gen_range(-1.0..1.0);
        let mut last = seed;
        for _ in 1..length {
            let mut placed = false;
            for _ in 0..20 {
                let h = heading + rng.gen_range(-TURN..=TURN);
                let len = BOND * rng.gen_range(0.98..1.02);
                let p = Point::new(last.x + len * h.cos(), last.y + len * h.sin());
                if fits(&spots, p, chain, Some(last)) {
                    spots.push((p, chain));
                    heading = h;
                    last = p;
                    placed = true;
                    break;
                }
            }
            if !placed {
                break;
            }
        }
        chain += 1;
    }
    spots
}

fn in_disk(rng: &mut ChaCha8Rng, c: Point, radius: f64) -> Point {
    let rho = radius * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..2.0 * PI);
    Point::new(c.x + rho * phi.cos(), c.y + rho * phi.sin())
}

impl Scene {
    /// A random scene: a faintly textured elliptical body carrying short
    /// chains of small polygons and ellipses.
    pub fn random(seed: u64, size: usize) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = size as f64;
        let c = Point::new((s - 1.0) / 2.0, (s - 1.0) / 2.0);
        let reach = REACH * s;

        let texture = (0..rng.gen_range(4..=8))
            .map(|_| Bump {
                centre: in_disk(&mut rng, c, reach),
                width: reach * rng.gen_range(0.3..0.6),
                height: rng.gen_range(-0.05..0.05),
            })
            .collect();
        let body = Layer {
            group: 0,
            shape: Shape::Ellipse {
                centre: c,
                a: 1.25 * reach,
                b: 1.25 * reach * rng.gen_range(0.9..1.0),
                angle: rng.gen_range(0.0..PI),
            },
            level: rng.gen_range(0.4..0.55),
            texture,
        };
        let mut layers = vec![body];

        let extent = 2.0 * reach;
        // spots of one chain look alike so none of them dominates its bonds
        let mut style = (usize::MAX, 0.0, 0.0);
        for (p, chain) in spot_chains(&mut rng) {
            if style.0 != chain {
                let radius = extent * rng.gen_range(0.03..0.045);
                let level = if rng.gen_bool(0.6) {
                    rng.gen_range(0.75..1.0)
                } else {
                    rng.gen_range(0.0..0.15)
                };
                style = (chain, radius, level);
            }
            let centre = Point::new(c.x + p.x * extent, c.y + p.y * extent);
            let shape = if chain % 3 == 2 {
                random_polygon(&mut rng, centre, style.1 * 1.3, 4)
            } else {
                Shape::Ellipse {
                    centre,
                    a: style.1,
                    b: style.1,
                    angle: 0.0,
                }
            };
            layers.push(Layer {
                shape,
                group: chain + 1,
                level: style.2,
                texture: Vec::new(),
            });
        }

        Scene {
            size,
            background: rng.gen_range(0.05..0.12),
            layers,
        }
    }

    /// Same structure with every position interpolated towards `other`.
    pub fn lerp(&self, other: &Scene, t: f64) -> Scene {
        let mix = |a: Point, b: Point| Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
        Scene {
            size: self.size,
            background: self.background,
            layers: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| {
                    let (pa, pb) = (a.shape.anchor(), b.shape.anchor());
                    let to = mix(pa, pb);
                    Layer {
                        shape: a.shape.translated(to.x - pa.x, to.y - pa.y),
                        group: a.group,
                        level: a.level,
                        texture: a
                            .texture
                            .iter()
                            .zip(&b.texture)
                            .map(|(u, v)| Bump {
                                centre: mix(u.centre, v.centre),
                                ..*u
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }

    /// A copy with every chain shrunk towards its first spot by `factor`.
    pub fn contracted(&self, factor: f64) -> Scene {
        let mut roots: Vec<Option<Point>> = Vec::new();
        let mut out = self.clone();
        for layer in out.layers.iter_mut().filter(|l| l.group > 0) {
            if roots.len() <= layer.group {
                roots.resize(layer.group + 1, None);
            }
            let anchor = layer.shape.anchor();
            let root = *roots[layer.group].get_or_insert(anchor);
            let (dx, dy) = (
                (anchor.x - root.x) * (factor - 1.0),
                (anchor.y - root.y) * (factor - 1.0),
            );
            layer.shape = layer.shape.translated(dx, dy);
        }
        out
    }

    fn intensity(&self, p: Point) -> f64 {
        for layer in self.layers.iter().rev() {
            if layer.shape.contains(p) {
                return layer.level + layer.texture.iter().map(|b| b.at(p)).sum::<f64>();
            }
        }
        self.background
    }

    pub fn render(&self) -> GrayImage {
        let step = 1.0 / SUPERSAMPLE as f64;
        let norm = (SUPERSAMPLE * SUPERSAMPLE) as f64;
        GrayImage::from_fn(self.size, self.size, |x, y| {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let p = Point::new(
                        x as f64 - 0.5 + (sx as f64 + 0.5) * step,
                        y as f64 - 0.5 + (sy as f64 + 0.5) * step,
                    );
                    acc += self.intensity(p);
                }
            }
            acc / norm
        })
    }
}

/// `count` distinct contents.
pub fn corpus(count: usize, size: usize, seed: u64) -> Vec<GrayImage> {
    (0..count)
        .map(|i| Scene::random(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), size).render())
        .collect()
}

/// `frames` images morphing linearly from a random scene to a copy whose
/// chains are shrunk by the fraction `shrink`.
pub fn morph_sequence(frames: usize, size: usize, seed: u64, shrink: f64) -> Vec<GrayImage> {
    let start = Scene::random(seed, size);
    let end = start.contracted(1.0 - shrink);
    (0..frames)
        .map(|i| {
            let t = if frames > 1 {
                i as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            start.lerp(&end, t).render()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_is_deterministic_and_in_range() {
        let a = Scene::random(7, 64).render();
        let b = Scene::random(7, 64).render();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, Scene::random(8, 64).render());
    }

    #[test]
    fn polygon_membership() {
        let sq = Shape::Polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(4.0, 4.0),
            Point::new(0.0, 4.0),
        ]);
        assert!(sq.contains(Point::new(2.0, 2.0)));
        assert!(!sq.contains(Point::new(5.0, 2.0)));
    }

    #[test]
    fn morph_endpoints() {
        let start = Scene::random(3, 48);
        let end = start.contracted(0.9);
        let seq = morph_sequence(5, 48, 3, 0.1);
        assert_eq!(seq.len(), 5);
        assert_eq!(seq[0], start.render());
        assert_eq!(seq[4], end.render());
        assert_eq!(start.lerp(&end, 0.0), start);
    }

    #[test]
    fn contraction_keeps_chain_roots() {
        let start = Scene::random(5, 64);
        let end = start.contracted(0.5);
        let mut seen = std::collections::HashSet::new();
        for (a, b) in start.layers.iter().zip(&end.layers) {
            if a.group == 0 || seen.insert(a.group) {
                assert_eq!(a.shape, b.shape);
            }
        }
    }
}
