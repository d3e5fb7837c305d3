//! Hotel furnishing: 15 rooms on 3 floors, each room a basic part.
//!
//! Rooms are numbered along one walk through the building: floor by floor, with
//! the corridor direction alternating so that consecutive rooms are adjacent
//! (the stairs join the end rooms of consecutive floors). A service lift links
//! the last room back to the first, closing the walk into a ring. Bathrooms sit
//! at both corridor ends of every floor; the bar opens onto the middle room of
//! the ground floor.
//!
//! Each room chooses a type (0 unassigned, 1 normal, 2 suite, 3 dorm) and a
//! furniture count per catalog item.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{Comparison, LinearExpr, ModelBuilder, ProblemModel, Term, Transform};

pub const UNASSIGNED: i32 = 0;
pub const NORMAL: i32 = 1;
pub const SUITE: i32 = 2;
pub const DORM: i32 = 3;
pub const TYPE_NAMES: [&str; 4] = ["unassigned", "normal", "suite", "dorm"];

/// Catalog items, in per-room variable order after the type.
pub const ITEMS: [&str; 5] = ["single", "double", "bunk", "table", "sofa"];
/// Guests sleeping in one unit of each item.
const GUESTS: [f64; 5] = [1.0, 2.0, 2.0, 0.0, 0.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotelConfig {
    pub floors: usize,
    pub rooms_per_floor: usize,
    /// Guest capacity per room, in walk order.
    pub capacity: Vec<u32>,
    /// Largest count per catalog item.
    pub max_items: [i32; 5],
    /// Cost per catalog item, in hundreds.
    pub costs: [f64; 5],
    /// In hundreds.
    pub budget: f64,
    /// Walk index of the room the bar opens onto.
    pub bar_room: usize,
    /// Soft caps on the number of normal, suite and dorm rooms and of open rooms.
    pub type_caps: [f64; 4],
    /// Soft cap on the total number of guests.
    pub guest_cap: f64,
    /// Normal rooms must be at most this many rooms away from a bathroom.
    pub normal_bathroom_distance: u32,
    /// Suites must be at most this many rooms away from the bar.
    pub suite_bar_distance: u32,
}

impl Default for HotelConfig {
    fn default() -> Self {
        HotelConfig {
            floors: 3,
            rooms_per_floor: 5,
            capacity: vec![4, 2, 4, 3, 6, 6, 3, 4, 2, 4, 4, 3, 6, 3, 4],
            max_items: [2, 2, 3, 1, 1],
            costs: [1.0, 1.5, 1.2, 0.4, 0.8],
            budget: 30.0,
            bar_room: 2,
            type_caps: [6.0, 2.0, 4.0, 12.0],
            guest_cap: 40.0,
            normal_bathroom_distance: 1,
            suite_bar_distance: 3,
        }
    }
}

/// Fixed geometry derived from the configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Layout {
    pub floor: Vec<usize>,
    /// Position along the floor's corridor.
    pub position: Vec<usize>,
    pub bathroom_distance: Vec<u32>,
    pub bar_distance: Vec<u32>,
    /// Adjacent pairs `(r, next(r))` along the ring.
    pub next: Vec<usize>,
}

impl HotelConfig {
    pub fn rooms(&self) -> usize {
        self.floors * self.rooms_per_floor
    }

    fn validate(&self) -> Result<()> {
        if self.floors == 0 || self.rooms_per_floor < 2 {
            return Err(Error::invalid("floors", "need at least one floor of two rooms"));
        }
        if self.capacity.len() != self.rooms() {
            return Err(Error::invalid(
                "capacity",
                format!("expected {} rooms, got {}", self.rooms(), self.capacity.len()),
            ));
        }
        if self.bar_room >= self.rooms() {
            return Err(Error::invalid("bar_room", "no such room"));
        }
        if self.max_items.iter().any(|&k| k < 1) {
            return Err(Error::invalid("max_items", "every item needs a count of at least 1"));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let n = self.rooms();
        let w = self.rooms_per_floor;
        let floor: Vec<usize> = (0..n).map(|r| r / w).collect();
        let position: Vec<usize> = (0..n)
            .map(|r| if (r / w) % 2 == 0 { r % w } else { w - 1 - r % w })
            .collect();
        let bathroom_distance = position.iter().map(|&p| p.min(w - 1 - p) as u32).collect();
        let next: Vec<usize> = (0..n).map(|r| (r + 1) % n).collect();
        let mut bar_distance = vec![u32::MAX; n];
        let mut queue = VecDeque::from([self.bar_room]);
        bar_distance[self.bar_room] = 0;
        while let Some(r) = queue.pop_front() {
            for q in [(r + 1) % n, (r + n - 1) % n] {
                if bar_distance[q] == u32::MAX {
                    bar_distance[q] = bar_distance[r] + 1;
                    queue.push_back(q);
                }
            }
        }
        Layout {
            floor,
            position,
            bathroom_distance,
            bar_distance,
            next,
        }
    }
}

pub fn room_name(r: usize) -> String {
    format!("room{:02}", r + 1)
}

pub fn build_hotel(config: &HotelConfig) -> Result<ProblemModel> {
    config.validate()?;
    let n = config.rooms();
    let layout = config.layout();
    let mut m = ModelBuilder::new();
    // vars[r] = [type, single, double, bunk, table, sofa]
    let vars: Vec<[usize; 6]> = (0..n)
        .map(|r| {
            let name = room_name(r);
            let t = m.var(format!("{name}.type"), vec![0, 1, 2, 3]);
            let mut v = [t; 6];
            for (k, item) in ITEMS.iter().enumerate() {
                v[k + 1] = m.var(format!("{name}.{item}"), (0..=config.max_items[k]).collect());
            }
            v
        })
        .collect();
    let is = |r: usize, ty: i32| Term::conj(1.0, vec![(vars[r][0], ty)]);
    let occupied = |r: usize, coef: f64| {
        [NORMAL, SUITE, DORM]
            .into_iter()
            .map(|ty| Term::conj(coef, vec![(vars[r][0], ty)]))
            .collect::<Vec<_>>()
    };
    let guests = |r: usize, scale: f64| {
        (0..3)
            .map(|k| Term::var(GUESTS[k] * scale, vars[r][k + 1]))
            .collect::<Vec<_>>()
    };

    for r in 0..n {
        let name = room_name(r);
        let nx = layout.next[r];
        for (ty, label) in [(NORMAL, "normal"), (SUITE, "suite"), (DORM, "dorm")] {
            m.feature(
                format!("{name}.is_{label}"),
                LinearExpr::new(vec![is(r, ty)]),
                Transform::Identity,
            );
        }
        m.feature(
            format!("{name}.furniture"),
            LinearExpr::new((1..6).map(|k| Term::var(1.0, vars[r][k])).collect()),
            Transform::Identity,
        );
        m.feature(
            format!("{name}.differs_from_{}", room_name(nx)),
            LinearExpr::new(vec![Term::var(1.0, vars[r][0]), Term::var(-1.0, vars[nx][0])]),
            Transform::SignedIndicator,
        );
        m.feature(
            format!("{name}.suite_dorm_clash_{}", room_name(nx)),
            LinearExpr::new(vec![
                Term::conj(1.0, vec![(vars[r][0], SUITE), (vars[nx][0], DORM)]),
                Term::conj(1.0, vec![(vars[r][0], DORM), (vars[nx][0], SUITE)]),
            ]),
            Transform::SignedIndicator,
        );
        m.feature(
            format!("{name}.bar_access"),
            LinearExpr::new(occupied(r, 1.0 / (1.0 + f64::from(layout.bar_distance[r])))),
            Transform::Identity,
        );
        m.feature(
            format!("{name}.bathroom_access"),
            LinearExpr::new(guests(r, 1.0 / (1.0 + f64::from(layout.bathroom_distance[r])))),
            Transform::Identity,
        );
    }

    let count = |ty: i32| LinearExpr::new((0..n).map(|r| is(r, ty)).collect());
    let open = || LinearExpr::new((0..n).flat_map(|r| occupied(r, 1.0)).collect());
    let counts = [
        ("normal", count(NORMAL)),
        ("suite", count(SUITE)),
        ("dorm", count(DORM)),
        ("open", open()),
    ];
    for (label, expr) in &counts {
        m.feature(format!("count.{label}"), expr.clone(), Transform::Identity);
    }
    for ((label, expr), cap) in counts.into_iter().zip(config.type_caps) {
        m.feature(format!("excess.{label}"), expr, Transform::Hinge { threshold: cap });
    }
    // Cost and guests are reported in tens (thousands for cost).
    let cost = LinearExpr::new(
        (0..n)
            .flat_map(|r| (0..5).map(move |k| (r, k)))
            .map(|(r, k)| Term::var(config.costs[k] / 10.0, vars[r][k + 1]))
            .collect(),
    );
    m.feature("cost", cost.clone(), Transform::Identity);
    m.feature(
        "over_budget",
        cost,
        Transform::Hinge {
            threshold: config.budget / 10.0,
        },
    );
    let all_guests = LinearExpr::new((0..n).flat_map(|r| guests(r, 0.1)).collect());
    m.feature("guests", all_guests.clone(), Transform::Identity);
    m.feature(
        "over_guest_cap",
        all_guests,
        Transform::Hinge {
            threshold: config.guest_cap / 10.0,
        },
    );
    for (k, item) in ITEMS.iter().enumerate() {
        m.feature(
            format!("total.{item}"),
            LinearExpr::new((0..n).map(|r| Term::var(0.1, vars[r][k + 1])).collect()),
            Transform::Identity,
        );
    }
    for (label, fl) in [("ground", 0), ("top", config.floors - 1)] {
        m.feature(
            format!("occupied.{label}_floor"),
            LinearExpr::new(
                (0..n)
                    .filter(|&r| layout.floor[r] == fl)
                    .flat_map(|r| occupied(r, 1.0))
                    .collect(),
            ),
            Transform::Identity,
        );
    }
    let mut dorm_guests = Vec::new();
    for r in 0..n {
        for (k, per) in [(0usize, 1.0), (2, 2.0)] {
            for c in 1..=config.max_items[k] {
                dorm_guests.push(Term::conj(
                    0.1 * per * f64::from(c),
                    vec![(vars[r][0], DORM), (vars[r][k + 1], c)],
                ));
            }
        }
    }
    m.feature("dorm_guests", LinearExpr::new(dorm_guests), Transform::Identity);

    for r in 0..n {
        let name = room_name(r);
        let v = vars[r];
        let item = |k: usize, coef: f64| Term::var(coef, v[k + 1]);
        let tot: f64 = config.max_items.iter().map(|&k| f64::from(k)).sum();
        let beds_max = f64::from(config.max_items[0] + config.max_items[1]);
        let bunk_max = f64::from(config.max_items[2]);
        let mut add = |id: &str, terms: Vec<Term>, cmp: Comparison, rhs: f64| {
            m.constraint(format!("{id}[{name}]"), LinearExpr::new(terms), cmp, rhs);
        };
        add(
            "capacity",
            guests(r, 1.0),
            Comparison::Le,
            f64::from(config.capacity[r]),
        );
        let mut empty: Vec<Term> = (0..5).map(|k| item(k, 1.0)).collect();
        empty.push(Term::conj(tot, vec![(v[0], UNASSIGNED)]));
        add("unassigned.empty", empty, Comparison::Le, tot);
        let mut beds = vec![item(0, 1.0), item(1, 1.0), item(2, 1.0)];
        beds.extend(occupied(r, -1.0));
        add("occupied.beds", beds, Comparison::Ge, 0.0);

        let t = |ty: i32, coef: f64| Term::conj(coef, vec![(v[0], ty)]);
        add(
            "normal.beds",
            vec![item(0, 1.0), item(1, 1.0), t(NORMAL, beds_max - 3.0)],
            Comparison::Le,
            beds_max,
        );
        add(
            "normal.no_bunks",
            vec![item(2, 1.0), t(NORMAL, bunk_max)],
            Comparison::Le,
            bunk_max,
        );
        add("normal.table", vec![item(3, 1.0), t(NORMAL, -1.0)], Comparison::Ge, 0.0);
        if layout.bathroom_distance[r] > config.normal_bathroom_distance {
            add("normal.bathroom", vec![t(NORMAL, 1.0)], Comparison::Le, 0.0);
        }
        add(
            "suite.one_bed",
            vec![item(0, 1.0), item(1, 1.0), t(SUITE, beds_max - 1.0)],
            Comparison::Le,
            beds_max,
        );
        add(
            "suite.no_bunks",
            vec![item(2, 1.0), t(SUITE, bunk_max)],
            Comparison::Le,
            bunk_max,
        );
        add("suite.table", vec![item(3, 1.0), t(SUITE, -1.0)], Comparison::Ge, 0.0);
        add("suite.sofa", vec![item(4, 1.0), t(SUITE, -1.0)], Comparison::Ge, 0.0);
        if layout.bar_distance[r] > config.suite_bar_distance {
            add("suite.bar", vec![t(SUITE, 1.0)], Comparison::Le, 0.0);
        }
        add("dorm.bunks", vec![item(2, 1.0), t(DORM, -1.0)], Comparison::Ge, 0.0);
        let dmax = f64::from(config.max_items[1]);
        add(
            "dorm.no_doubles",
            vec![item(1, 1.0), t(DORM, dmax)],
            Comparison::Le,
            dmax,
        );
        let smax = f64::from(config.max_items[4]);
        add("dorm.no_sofa", vec![item(4, 1.0), t(DORM, smax)], Comparison::Le, smax);
    }

    for (r, v) in vars.iter().enumerate() {
        m.part(room_name(r), v.to_vec());
    }
    m.build(json!({
        "kind": "hotel",
        "rooms": (0..n).map(room_name).collect::<Vec<_>>(),
        "types": TYPE_NAMES,
        "items": ITEMS,
        "costs": config.costs,
        "budget": config.budget,
        "capacity": config.capacity,
        "layout": layout,
    }))
}
