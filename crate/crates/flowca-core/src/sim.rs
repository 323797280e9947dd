//! Evolution of configurations under LUTs, per-particle tracking under
//! (Omega, Lambda) specs, and irreversibility witness search.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::{Configuration, Coord, NeighborhoodKind, Offset};
use crate::lut::Lut;
use crate::rules::{Engine, RuleSpec};

/// Reference synchronous update: every cell's next state is the LUT output
/// on its neighborhood pattern, with toroidal wrap.
pub fn step_reference(config: &Configuration, lut: &Lut) -> Configuration {
    let (w, h) = (config.width(), config.height());
    let mut out = Configuration::empty(w, h).expect("dims already valid");
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let c = Coord::new(i, j);
            if lut.get(config.pattern_index_at(c, lut.kind())) {
                out.set(c, true);
            }
        }
    }
    out
}

#[inline]
fn row_bit(row: &[u64], i: usize) -> usize {
    ((row[i / 64] >> (i % 64)) & 1) as usize
}

/// Synchronous update with a sliding pattern index per row: advancing one
/// column shifts the previous index and pulls in the fresh column bits.
/// Output-equivalent to [`step_reference`].
pub fn step(config: &Configuration, lut: &Lut) -> Configuration {
    let (w, h) = (config.width(), config.height());
    let mut out = Configuration::empty(w, h).expect("dims already valid");
    let row = |j: i64| config.row_words(j.rem_euclid(h as i64) as usize);
    for j in 0..h as i64 {
        match lut.kind() {
            NeighborhoodKind::Moore9 => {
                let (top, mid, bot) = (row(j + 1), row(j), row(j - 1));
                let fresh = |i: usize| {
                    let c = i % w;
                    row_bit(top, c) << 6 | row_bit(mid, c) << 3 | row_bit(bot, c)
                };
                let mut idx = 0usize;
                for c in [w - 1, 0, 1] {
                    idx = ((idx << 1) & 0b110110110) | fresh(c);
                }
                for i in 0..w {
                    if lut.get(idx) {
                        out.set(Coord::new(i as i64, j), true);
                    }
                    idx = ((idx << 1) & 0b110110110) | fresh(i + 2);
                }
            }
            NeighborhoodKind::Rect2x3 => {
                let (mid, bot) = (row(j), row(j - 1));
                let fresh = |i: usize| {
                    let c = i % w;
                    row_bit(mid, c) << 3 | row_bit(bot, c)
                };
                let mut idx = 0usize;
                for c in [w - 1, 0, 1] {
                    idx = ((idx << 1) & 0b110110) | fresh(c);
                }
                for i in 0..w {
                    if lut.get(idx) {
                        out.set(Coord::new(i as i64, j), true);
                    }
                    idx = ((idx << 1) & 0b110110) | fresh(i + 2);
                }
            }
            NeighborhoodKind::VonNeumann5 => {
                let (top, mid, bot) = (row(j + 1), row(j), row(j - 1));
                for i in 0..w {
                    let idx = row_bit(top, i) << 4
                        | row_bit(mid, (i + w - 1) % w) << 3
                        | row_bit(mid, i) << 2
                        | row_bit(mid, (i + 1) % w) << 1
                        | row_bit(bot, i);
                    if lut.get(idx) {
                        out.set(Coord::new(i as i64, j), true);
                    }
                }
            }
        }
    }
    out
}

/// Apply `step` the given number of times, emitting each intermediate
/// configuration (t = 1..=steps) to the sink.
pub fn run(
    config: &Configuration,
    lut: &Lut,
    steps: u64,
    mut emit: impl FnMut(u64, &Configuration),
) -> Configuration {
    let mut current = config.clone();
    for t in 1..=steps {
        current = step(&current, lut);
        emit(t, &current);
    }
    current
}

/// Frame file name used by the simulation frame sink.
pub fn frame_filename(t: u64) -> String {
    format!("frame_{t:04}.pbm")
}

/// One step's particle moves: each occupied source maps to its resolved
/// target. The map is injective, and applying it reproduces the LUT step.
#[derive(Debug, Clone)]
pub struct DisplacementMap {
    width: usize,
    height: usize,
    moves: BTreeMap<Coord, Coord>,
}

impl DisplacementMap {
    pub fn moves(&self) -> &BTreeMap<Coord, Coord> {
        &self.moves
    }

    pub fn target(&self, source: Coord) -> Option<Coord> {
        self.moves.get(&source).copied()
    }

    /// Move every particle to its target on a fresh empty torus.
    pub fn apply(&self) -> Configuration {
        let mut out = Configuration::empty(self.width, self.height).expect("dims already valid");
        for &target in self.moves.values() {
            debug_assert!(!out.get(target), "displacement map must be injective");
            out.set(target, true);
        }
        out
    }
}

fn normalized(config: &Configuration, c: Coord) -> Coord {
    Coord::new(
        c.i.rem_euclid(config.width() as i64),
        c.j.rem_euclid(config.height() as i64),
    )
}

/// Resolve every particle's move under the spec: the redirect when exactly
/// one traffic rule is enabled (checked destination empty, witness pattern
/// in the condition), the overarching default otherwise.
pub fn displacement_map(config: &Configuration, spec: &RuleSpec) -> Result<DisplacementMap> {
    let violations = spec.validate();
    if let Some(first) = violations.first() {
        return Err(Error::InvalidSpec(first.to_string()));
    }
    let engine = Engine::new(spec).expect("validated spec has witness templates");
    let mut moves = BTreeMap::new();
    for source in config.particles() {
        let at = |o: Offset| config.get(source.offset(o));
        let landing = engine.resolve(Offset::ZERO, &at);
        let target = normalized(config, source.offset(landing));
        let displaced = moves.insert(source, target);
        debug_assert!(displaced.is_none());
    }
    let map = DisplacementMap {
        width: config.width(),
        height: config.height(),
        moves,
    };
    debug_assert_eq!(
        map.moves.values().collect::<std::collections::BTreeSet<_>>().len(),
        map.moves.len(),
        "R2 guarantees injectivity at run time"
    );
    Ok(map)
}

/// Trajectory of one tracked particle, one position per time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleTrace {
    pub particle_id: usize,
    pub positions: Vec<Coord>,
}

/// Follow selected particles through `steps` composed displacement maps.
pub fn track(
    config: &Configuration,
    spec: &RuleSpec,
    steps: u64,
    selected: &[Coord],
) -> Result<Vec<ParticleTrace>> {
    let mut traces = Vec::with_capacity(selected.len());
    for (particle_id, &c) in selected.iter().enumerate() {
        let start = normalized(config, c);
        if !config.get(start) {
            return Err(Error::NotAParticle { i: c.i, j: c.j });
        }
        traces.push(ParticleTrace {
            particle_id,
            positions: vec![start],
        });
    }
    let mut current = config.clone();
    for _ in 0..steps {
        let map = displacement_map(&current, spec)?;
        for trace in &mut traces {
            let here = *trace.positions.last().expect("traces start non-empty");
            let target = map.target(here).expect("tracked cells stay particles");
            trace.positions.push(target);
        }
        current = map.apply();
    }
    Ok(traces)
}

/// CSV export with header `particle_id,t,i,j`.
pub fn traces_to_csv(traces: &[ParticleTrace]) -> String {
    let mut out = String::from("particle_id,t,i,j\n");
    for trace in traces {
        for (t, p) in trace.positions.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", trace.particle_id, t, p.i, p.j));
        }
    }
    out
}

/// Search for an injectivity counterexample: a configuration x with
/// step(x) != x whose image is a fixed point. Returns the verified pair
/// (x, step(x)) — two distinct configurations with the same image — or
/// `None` within the budget. `None` is not a reversibility proof.
///
/// The budget counts step() evaluations. Candidates mix structured
/// high-density seeds (blocked traffic jams freeze quickly) with seeded
/// random configurations; each candidate's orbit is followed for at most
/// 4·width·height steps.
pub fn find_noninjectivity(
    lut: &Lut,
    max_width: usize,
    max_height: usize,
    budget: u64,
    seed: u64,
) -> Option<(Configuration, Configuration)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut spent = 0u64;
    let sizes: Vec<(usize, usize)> = [(4, 4), (6, 6), (8, 8), (max_width, max_height)]
        .into_iter()
        .filter(|&(w, h)| w >= 3 && h >= 3 && w <= max_width && h <= max_height)
        .collect();
    let densities = [0.85, 0.75, 0.9, 0.65, 0.5];

    let mut candidate_index = 0usize;
    loop {
        if spent >= budget || sizes.is_empty() {
            return None;
        }
        let (w, h) = sizes[candidate_index % sizes.len()];
        let config = if candidate_index < sizes.len() * densities.len() {
            // Structured phase: dense jams with a few seeded holes.
            let density = densities[(candidate_index / sizes.len()) % densities.len()];
            let mut c = Configuration::filled(w, h).expect("dims valid");
            let holes = ((1.0 - density) * (w * h) as f64).ceil() as usize;
            for _ in 0..holes.max(1) {
                let i = rng.gen_range(0..w) as i64;
                let j = rng.gen_range(0..h) as i64;
                c.set(Coord::new(i, j), false);
            }
            c
        } else {
            let density = densities[candidate_index % densities.len()];
            Configuration::random_from_rng(w, h, density, &mut rng).expect("dims valid")
        };
        candidate_index += 1;

        let orbit_cap = 4 * (w * h) as u64;
        let mut prev = config;
        let mut current = step(&prev, lut);
        spent += 1;
        let mut t = 0;
        while t < orbit_cap && spent < budget {
            if current == prev {
                break; // fixed point reached; prev == current means no witness here
            }
            let next = step(&current, lut);
            spent += 1;
            if next == current {
                // prev -> current is a step onto a fixed point: both prev and
                // current map to current.
                debug_assert_ne!(prev, current);
                debug_assert_eq!(step(&prev, lut), step(&current, lut));
                return Some((prev, current));
            }
            prev = current;
            current = next;
            t += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NeighborhoodKind::{Moore9, Rect2x3, VonNeumann5};
    use crate::rules::{Condition, Direction, Omega, TrafficRule};

    fn single_particle(w: usize, h: usize, i: i64, j: i64) -> Configuration {
        let mut rows = vec![vec![0u8; w]; h];
        rows[(h as i64 - 1 - j) as usize][i as usize] = 1;
        Configuration::from_rows(w, h, &rows).unwrap()
    }

    #[test]
    fn quiescent_rules_keep_empty_grids_empty() {
        let empty = Configuration::empty(5, 5).unwrap();
        let id = Lut::from_hex("FFFF0000FFFF0000", Rect2x3).unwrap();
        assert_eq!(step(&empty, &id), empty);
    }

    #[test]
    fn shift_up_moves_a_particle_up() {
        let up = Lut::from_hex("CCCCCCCCCCCCCCCC", Rect2x3).unwrap();
        let before = single_particle(5, 5, 2, 2);
        let after = step(&before, &up);
        assert_eq!(after, single_particle(5, 5, 2, 3));
    }

    #[test]
    fn traffic_right_row_dynamics() {
        // Row pattern 1,1,0 becomes 1,0,1: the blocked car waits, the free
        // car advances.
        let traffic = Lut::from_hex("FF00FFFFFF000000", Rect2x3).unwrap();
        let mut rows = vec![vec![0u8; 3]; 3];
        rows[1] = vec![1, 1, 0];
        let before = Configuration::from_rows(3, 3, &rows).unwrap();
        let after = step(&before, &traffic);
        let mut expected_rows = vec![vec![0u8; 3]; 3];
        expected_rows[1] = vec![1, 0, 1];
        assert_eq!(after, Configuration::from_rows(3, 3, &expected_rows).unwrap());
    }

    #[test]
    fn run_zero_steps_is_identity_and_shift_has_period_h() {
        let up = Lut::from_hex("CCCCCCCCCCCCCCCC", Rect2x3).unwrap();
        let config = single_particle(4, 6, 1, 2);
        assert_eq!(run(&config, &up, 0, |_, _| {}), config);
        let mut frames = 0;
        let after = run(&config, &up, 6, |_, _| frames += 1);
        assert_eq!(frames, 6);
        assert_eq!(after, config);
    }

    #[test]
    fn sliding_step_matches_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for kind in [Moore9, VonNeumann5, Rect2x3] {
            for _ in 0..25 {
                let w = rng.gen_range(3..70);
                let h = rng.gen_range(3..12);
                let config = Configuration::random(w, h, 0.5, rng.gen()).unwrap();
                let lut = Lut::from_fn(kind, |_| rng.gen_bool(0.5));
                assert_eq!(step(&config, &lut), step_reference(&config, &lut), "{kind} {w}x{h}");
            }
        }
    }

    #[test]
    fn displacement_of_a_lone_particle_under_identity() {
        let spec = RuleSpec::new(Rect2x3, Omega::Identity, vec![]);
        let c = single_particle(4, 4, 1, 1);
        let map = displacement_map(&c, &spec).unwrap();
        assert_eq!(map.target(Coord::new(1, 1)), Some(Coord::new(1, 1)));
        assert_eq!(map.apply(), c);
    }

    #[test]
    fn displacement_matches_traffic_semantics() {
        let spec = RuleSpec::new(
            Rect2x3,
            Omega::Identity,
            vec![TrafficRule::new(Direction::Right, false, Condition::full(2))],
        );
        let mut rows = vec![vec![0u8; 3]; 3];
        rows[1] = vec![1, 1, 0];
        let c = Configuration::from_rows(3, 3, &rows).unwrap();
        let map = displacement_map(&c, &spec).unwrap();
        assert_eq!(map.target(Coord::new(0, 1)), Some(Coord::new(0, 1)));
        assert_eq!(map.target(Coord::new(1, 1)), Some(Coord::new(2, 1)));
        assert_eq!(map.apply(), step(&c, &spec.compile().unwrap()));
    }

    #[test]
    fn track_shift_and_blocked_traffic() {
        let shift = RuleSpec::new(Rect2x3, Omega::Shift(Direction::Up), vec![]);
        let c = single_particle(5, 5, 2, 1);
        let traces = track(&c, &shift, 3, &[Coord::new(2, 1)]).unwrap();
        assert_eq!(
            traces[0].positions,
            vec![
                Coord::new(2, 1),
                Coord::new(2, 2),
                Coord::new(2, 3),
                Coord::new(2, 4)
            ]
        );

        let traffic = RuleSpec::new(
            Rect2x3,
            Omega::Identity,
            vec![TrafficRule::new(Direction::Right, false, Condition::full(2))],
        );
        let mut rows = vec![vec![0u8; 4]; 4];
        rows[2] = vec![0, 1, 1, 0];
        let c = Configuration::from_rows(4, 4, &rows).unwrap();
        let traces = track(&c, &traffic, 1, &[Coord::new(1, 1), Coord::new(2, 1)]).unwrap();
        // The blocked left particle stays for step 1; the right one moves.
        assert_eq!(traces[0].positions[1], Coord::new(1, 1));
        assert_eq!(traces[1].positions[1], Coord::new(3, 1));

        assert!(matches!(
            track(&c, &traffic, 1, &[Coord::new(0, 0)]),
            Err(Error::NotAParticle { .. })
        ));
    }

    #[test]
    fn csv_export_shape() {
        let trace = ParticleTrace {
            particle_id: 3,
            positions: vec![Coord::new(0, 1), Coord::new(1, 1)],
        };
        let csv = traces_to_csv(&[trace]);
        assert_eq!(csv, "particle_id,t,i,j\n3,0,0,1\n3,1,1,1\n");
    }

    #[test]
    fn invertible_rules_yield_no_witness() {
        let up = Lut::from_hex("CCCCCCCCCCCCCCCC", Rect2x3).unwrap();
        assert!(find_noninjectivity(&up, 6, 6, 20_000, 0).is_none());
        let id = Lut::from_hex("FFFF0000FFFF0000", Rect2x3).unwrap();
        assert!(find_noninjectivity(&id, 6, 6, 20_000, 0).is_none());
    }

    #[test]
    fn traffic_right_has_eventually_fixed_points() {
        let traffic = Lut::from_hex("FF00FFFFFF000000", Rect2x3).unwrap();
        let (x, y) = find_noninjectivity(&traffic, 8, 8, 1_000_000, 0).expect("witness exists");
        assert_ne!(x, y);
        assert_eq!(step(&x, &traffic), step(&y, &traffic));
    }
}
