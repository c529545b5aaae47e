//! World model of the referring game: entities with continuous attributes,
//! two circular player views with a controlled overlap, and scenario
//! generation by constructive rejection sampling.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

/// Number of entities visible in each player's view.
pub const VIEW_SIZE: usize = 7;

/// Upper bound (exclusive) of the grayscale color attribute.
pub const COLOR_RANGE: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::A => 0,
            Player::B => 1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::A => "A",
            Player::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub size: f64,
    /// Grayscale intensity in `[0, 256)`; lower is darker.
    pub color: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub center: [f64; 2],
    pub radius: f64,
    /// Visible entity ids in canonical order (sorted by `(y, x)`).
    pub visible: Vec<u32>,
}

impl View {
    pub fn position_of(&self, entity_id: u32) -> Option<usize> {
        self.visible.iter().position(|&id| id == entity_id)
    }

    pub fn contains(&self, entity_id: u32) -> bool {
        self.position_of(entity_id).is_some()
    }

    /// Whether the disk of `e` lies entirely inside the view circle.
    pub fn encloses(&self, e: &Entity) -> bool {
        let d = dist(e.x, e.y, self.center[0], self.center[1]);
        d + e.size <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Views {
    #[serde(rename = "A")]
    pub a: View,
    #[serde(rename = "B")]
    pub b: View,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub entities: Vec<Entity>,
    pub views: Views,
    pub num_shared: usize,
}

impl Scenario {
    pub fn view(&self, player: Player) -> &View {
        match player {
            Player::A => &self.views.a,
            Player::B => &self.views.b,
        }
    }

    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Entities visible to `player`, in view order.
    pub fn visible_entities(&self, player: Player) -> Result<Vec<&Entity>, ScenarioError> {
        self.view(player)
            .visible
            .iter()
            .map(|&id| self.entity(id).ok_or(ScenarioError::UnknownEntity(id)))
            .collect()
    }

    /// Ids visible to both players, ascending.
    pub fn shared_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .views
            .a
            .visible
            .iter()
            .copied()
            .filter(|id| self.views.b.contains(*id))
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Checks the structural invariants that do not depend on generator settings.
    pub fn check_structure(&self) -> Result<(), ScenarioError> {
        if !(4..=6).contains(&self.num_shared) {
            return Err(ScenarioError::InvalidSharedCount(self.num_shared));
        }
        for (idx, e) in self.entities.iter().enumerate() {
            if self.entities[..idx].iter().any(|o| o.id == e.id) {
                return Err(ScenarioError::DuplicateEntity(e.id));
            }
            if !(0.0..COLOR_RANGE).contains(&e.color) {
                return Err(ScenarioError::AttributeOutOfRange { entity: e.id, attribute: "color" });
            }
        }
        for player in [Player::A, Player::B] {
            let view = self.view(player);
            if view.visible.len() != VIEW_SIZE {
                return Err(ScenarioError::ViewSize { player, len: view.visible.len() });
            }
            for (i, &id) in view.visible.iter().enumerate() {
                if view.visible[..i].contains(&id) {
                    return Err(ScenarioError::DuplicateEntity(id));
                }
                self.entity(id).ok_or(ScenarioError::UnknownEntity(id))?;
            }
        }
        let shared = self.shared_ids().len();
        if shared != self.num_shared {
            return Err(ScenarioError::SharedMismatch { expected: self.num_shared, actual: shared });
        }
        Ok(())
    }

    /// Full invariant check against the generator configuration.
    pub fn check(&self, config: &ScenarioConfig) -> Result<(), ScenarioError> {
        self.check_structure()?;
        let [lo, hi] = config.world_bounds;
        for e in &self.entities {
            if e.size < config.size_min || e.size > config.size_max {
                return Err(ScenarioError::AttributeOutOfRange { entity: e.id, attribute: "size" });
            }
            if e.x < lo || e.x > hi || e.y < lo || e.y > hi {
                return Err(ScenarioError::AttributeOutOfRange { entity: e.id, attribute: "position" });
            }
        }
        for player in [Player::A, Player::B] {
            let view = self.view(player);
            for &id in &view.visible {
                let e = self.entity(id).ok_or(ScenarioError::UnknownEntity(id))?;
                if !view.encloses(e) {
                    return Err(ScenarioError::OutsideView { player, entity: id });
                }
            }
        }
        for (i, a) in self.entities.iter().enumerate() {
            for b in &self.entities[i + 1..] {
                if dist(a.x, a.y, b.x, b.y) < config.min_separation {
                    return Err(ScenarioError::TooClose(a.id, b.id));
                }
            }
        }
        Ok(())
    }
}

/// Generator parameters. Defaults place both view circles of radius 1 on the
/// x-axis inside a `[-1, 1]²` world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Lower and upper bound shared by both world axes.
    pub world_bounds: [f64; 2],
    pub view_radius: f64,
    /// Distance between the two view centers for 4, 5 and 6 shared entities.
    pub center_distance: [f64; 3],
    pub size_min: f64,
    pub size_max: f64,
    pub min_separation: f64,
    /// Whole-scenario restarts allowed before giving up.
    pub max_attempts: usize,
    /// Point draws per entity before a restart.
    pub draws_per_entity: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            world_bounds: [-1.0, 1.0],
            view_radius: 1.0,
            center_distance: [0.9, 0.7, 0.5],
            size_min: 0.02,
            size_max: 0.06,
            min_separation: 0.08,
            max_attempts: 100,
            draws_per_entity: 400,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let [lo, hi] = self.world_bounds;
        let ok = lo < hi
            && self.view_radius > 0.0
            && self.center_distance.iter().all(|d| *d > 0.0 && *d < 2.0 * self.view_radius)
            && self.size_min > 0.0
            && self.size_min < self.size_max
            && self.min_separation >= 0.0
            && self.max_attempts > 0
            && self.draws_per_entity > 0;
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidConfig)
        }
    }

    pub fn sizes(&self) -> SizeRange {
        SizeRange { min: self.size_min, max: self.size_max }
    }
}

/// Size range used to map sizes affinely onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: f64,
    pub max: f64,
}

impl Default for SizeRange {
    fn default() -> Self {
        ScenarioConfig::default().sizes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("number of shared entities must be 4, 5 or 6 (got {0})")]
    InvalidSharedCount(usize),
    #[error("scenario generation failed after {0} attempts")]
    GenerationFailed(usize),
    #[error("invalid scenario configuration")]
    InvalidConfig,
    #[error("entity {0} is not visible in the view")]
    NotInView(u32),
    #[error("entity {0} does not exist")]
    UnknownEntity(u32),
    #[error("duplicate entity id {0}")]
    DuplicateEntity(u32),
    #[error("pair features need two distinct entities (got {0} twice)")]
    SameEntity(u32),
    #[error("view {player} has {len} entities")]
    ViewSize { player: Player, len: usize },
    #[error("expected {expected} shared entities, found {actual}")]
    SharedMismatch { expected: usize, actual: usize },
    #[error("entity {entity} {attribute} out of range")]
    AttributeOutOfRange { entity: u32, attribute: &'static str },
    #[error("entity {entity} is not enclosed by view {player}")]
    OutsideView { player: Player, entity: u32 },
    #[error("entities {0} and {1} are closer than the minimum separation")]
    TooClose(u32, u32),
}

fn dist(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    math::sqrt((x0 - x1) * (x0 - x1) + (y0 - y1) * (y0 - y1))
}

#[derive(Clone, Copy, PartialEq)]
enum Region {
    Shared,
    OnlyA,
    OnlyB,
}

/// Generates a scenario with exactly `num_shared` entities visible to both players.
///
/// Shared entities are drawn inside the lens where both circles overlap,
/// then `7 - num_shared` private entities per player inside their own circle
/// and fully outside the partner's.
pub fn generate_scenario<R: RngCore + ?Sized>(
    config: &ScenarioConfig,
    num_shared: usize,
    rng: &mut R,
) -> Result<Scenario, ScenarioError> {
    if !(4..=6).contains(&num_shared) {
        return Err(ScenarioError::InvalidSharedCount(num_shared));
    }
    config.validate()?;
    let half = config.center_distance[num_shared - 4] / 2.0;
    let center_a = [-half, 0.0];
    let center_b = [half, 0.0];
    let private = VIEW_SIZE - num_shared;

    let mut plan = Vec::with_capacity(num_shared + 2 * private);
    plan.extend(core::iter::repeat_n(Region::Shared, num_shared));
    plan.extend(core::iter::repeat_n(Region::OnlyA, private));
    plan.extend(core::iter::repeat_n(Region::OnlyB, private));

    let id = format!("S_{:016x}", rng.next_u64());
    let r = config.view_radius;
    let [lo, hi] = config.world_bounds;

    'attempt: for _ in 0..config.max_attempts {
        let mut entities: Vec<Entity> = Vec::with_capacity(plan.len());
        for (idx, region) in plan.iter().enumerate() {
            let own = match region {
                Region::OnlyB => center_b,
                _ => center_a,
            };
            let mut placed = None;
            for _ in 0..config.draws_per_entity {
                let size = rng.random_range(config.size_min..=config.size_max);
                let x = own[0] + rng.random_range(-r..=r);
                let y = own[1] + rng.random_range(-r..=r);
                if x < lo || x > hi || y < lo || y > hi {
                    continue;
                }
                let da = dist(x, y, center_a[0], center_a[1]);
                let db = dist(x, y, center_b[0], center_b[1]);
                let inside_a = da + size <= r;
                let inside_b = db + size <= r;
                let outside_a = da >= r + size;
                let outside_b = db >= r + size;
                let fits = match region {
                    Region::Shared => inside_a && inside_b,
                    Region::OnlyA => inside_a && outside_b,
                    Region::OnlyB => inside_b && outside_a,
                };
                if !fits {
                    continue;
                }
                if entities.iter().any(|e| dist(e.x, e.y, x, y) < config.min_separation) {
                    continue;
                }
                let color = rng.random_range(0.0..COLOR_RANGE);
                placed = Some(Entity { id: idx as u32, x, y, size, color });
                break;
            }
            match placed {
                Some(e) => entities.push(e),
                None => continue 'attempt,
            }
        }
        let mut visible_a = Vec::with_capacity(VIEW_SIZE);
        let mut visible_b = Vec::with_capacity(VIEW_SIZE);
        for (e, region) in entities.iter().zip(&plan) {
            if *region != Region::OnlyB {
                visible_a.push(e);
            }
            if *region != Region::OnlyA {
                visible_b.push(e);
            }
        }
        let view_a = View { center: center_a, radius: r, visible: canonical_order(&visible_a) };
        let view_b = View { center: center_b, radius: r, visible: canonical_order(&visible_b) };
        return Ok(Scenario { id, entities, views: Views { a: view_a, b: view_b }, num_shared });
    }
    Err(ScenarioError::GenerationFailed(config.max_attempts))
}

/// `count` scenarios with `num_shared` shared entities. Scenario `i` draws
/// from its own stream, so sets of different sizes share a prefix.
pub fn generate_scenarios(
    config: &ScenarioConfig,
    num_shared: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Scenario>, ScenarioError> {
    (0..count)
        .map(|i| generate_scenario(config, num_shared, &mut crate::rng::stream(seed, num_shared as u64, i as u64)))
        .collect()
}

/// Entity ids sorted by `(y, x)`.
pub fn canonical_order(entities: &[&Entity]) -> Vec<u32> {
    let mut sorted: Vec<&&Entity> = entities.iter().collect();
    sorted.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)).then(a.id.cmp(&b.id)));
    sorted.into_iter().map(|e| e.id).collect()
}

/// Entity attributes relative to a view: position in units of the view
/// radius around its center, size and color mapped affinely to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEntity {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub color: f64,
}

impl NormalizedEntity {
    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.size, self.color]
    }

    /// Inverse of [`normalize_entity`].
    pub fn denormalize(&self, id: u32, view: &View, sizes: SizeRange) -> Entity {
        Entity {
            id,
            x: self.x * view.radius + view.center[0],
            y: self.y * view.radius + view.center[1],
            size: (self.size + 1.0) / 2.0 * (sizes.max - sizes.min) + sizes.min,
            color: (self.color + 1.0) * (COLOR_RANGE / 2.0),
        }
    }
}

pub fn normalize_entity(e: &Entity, view: &View, sizes: SizeRange) -> Result<NormalizedEntity, ScenarioError> {
    if !view.contains(e.id) {
        return Err(ScenarioError::NotInView(e.id));
    }
    Ok(normalize_unchecked(e, view, sizes))
}

fn normalize_unchecked(e: &Entity, view: &View, sizes: SizeRange) -> NormalizedEntity {
    NormalizedEntity {
        x: (e.x - view.center[0]) / view.radius,
        y: (e.y - view.center[1]) / view.radius,
        size: 2.0 * (e.size - sizes.min) / (sizes.max - sizes.min) - 1.0,
        color: e.color / (COLOR_RANGE / 2.0) - 1.0,
    }
}

/// Number of relational features per ordered entity pair.
pub const PAIR_FEATURES: usize = 5;

/// `(Δx, Δy, distance, Δsize, Δcolor)` on normalized attributes, Δ = i − j.
pub fn pair_features(
    e_i: &Entity,
    e_j: &Entity,
    view: &View,
    sizes: SizeRange,
) -> Result<[f64; PAIR_FEATURES], ScenarioError> {
    if e_i.id == e_j.id {
        return Err(ScenarioError::SameEntity(e_i.id));
    }
    let a = normalize_entity(e_i, view, sizes)?;
    let b = normalize_entity(e_j, view, sizes)?;
    Ok(normalized_pair_features(&a, &b))
}

pub fn normalized_pair_features(a: &NormalizedEntity, b: &NormalizedEntity) -> [f64; PAIR_FEATURES] {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    [dx, dy, math::sqrt(dx * dx + dy * dy), a.size - b.size, a.color - b.color]
}

/// The normalized attributes of a player's 7 visible entities, in view order.
pub fn normalized_view(
    scenario: &Scenario,
    player: Player,
    sizes: SizeRange,
) -> Result<Vec<NormalizedEntity>, ScenarioError> {
    let view = scenario.view(player);
    scenario
        .visible_entities(player)?
        .into_iter()
        .map(|e| normalize_entity(e, view, sizes))
        .collect()
}

/// A set of positions in a 7-entity view, bit `i` standing for `visible[i]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ViewMask(pub u8);

impl ViewMask {
    pub const EMPTY: ViewMask = ViewMask(0);
    pub const ALL: ViewMask = ViewMask((1 << VIEW_SIZE) - 1);

    pub fn from_positions<I: IntoIterator<Item = usize>>(positions: I) -> ViewMask {
        let mut bits = 0u8;
        for p in positions {
            debug_assert!(p < VIEW_SIZE);
            bits |= 1 << p;
        }
        ViewMask(bits)
    }

    /// Maps entity ids to positions in `view`; `None` if any id is not visible.
    pub fn from_ids<'a, I: IntoIterator<Item = &'a u32>>(view: &View, ids: I) -> Option<ViewMask> {
        let mut bits = 0u8;
        for id in ids {
            bits |= 1 << view.position_of(*id)?;
        }
        Some(ViewMask(bits))
    }

    pub fn contains(self, position: usize) -> bool {
        self.0 & (1 << position) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn positions(self) -> impl Iterator<Item = usize> {
        (0..VIEW_SIZE).filter(move |&p| self.contains(p))
    }

    pub fn ids(self, view: &View) -> Vec<u32> {
        self.positions().map(|p| view.visible[p]).collect()
    }

    pub fn to_bools(self) -> [bool; VIEW_SIZE] {
        core::array::from_fn(|p| self.contains(p))
    }
}
