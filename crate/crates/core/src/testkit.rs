//! Random models and engineered samples for tests and benchmarks.

pub mod oracle;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{
    Association, AssociationKind, Attribute, ClassModel, Entity, Multiplicity, Visibility,
};

/// Business nouns whose normalized forms are pairwise far apart
/// (similarity below 0.8).
pub const ENTITY_NAMES: [&str; 32] = [
    "Customer", "Order", "Product", "Invoice", "Supplier", "Employee", "Shift", "Payment",
    "Delivery", "Warehouse", "Vehicle", "Route", "Booking", "Room", "Guest", "Menu",
    "Recipe", "Ingredient", "Table", "Reservation", "Account", "Branch", "Course", "Student",
    "Lesson", "Teacher", "Pet", "Owner", "Visit", "Treatment", "Category", "Review",
];

pub const ATTRIBUTE_NAMES: [&str; 24] = [
    "name", "email", "phone", "address", "price", "quantity", "total", "date", "status",
    "code", "title", "rating", "weight", "color", "size", "notes", "capacity", "level",
    "salary", "balance", "duration", "species", "discount", "comment",
];

const TYPES: [&str; 6] = ["String", "int", "float", "bool", "Date", "List~String~"];
const METHODS: [&str; 4] = ["total() float", "+cancel()", "place(Date d)", "-recalculate()"];
const LABELS: [&str; 5] = ["places", "contains", "belongs to", "manages", "refers to"];

/// Size envelope for generated models.
#[derive(Debug, Clone)]
pub struct ModelShape {
    pub entities: (usize, usize),
    pub attributes_per_entity: (usize, usize),
    pub associations: (usize, usize),
    /// Types, visibilities, methods, multiplicities and labels.
    pub decorations: bool,
}

impl ModelShape {
    /// The main-exercise envelope, names and kinds only.
    pub fn exercise() -> Self {
        Self {
            entities: (8, 9),
            attributes_per_entity: (2, 3),
            associations: (6, 7),
            decorations: false,
        }
    }

    /// Anything the Mermaid subset can express, including empty models.
    pub fn any() -> Self {
        Self {
            entities: (0, 12),
            attributes_per_entity: (0, 5),
            associations: (0, 14),
            decorations: true,
        }
    }
}

fn pick_range<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

fn multiplicity<R: Rng + ?Sized>(rng: &mut R) -> Multiplicity {
    let raw = Multiplicity::TOKENS.choose(rng).expect("non-empty");
    Multiplicity::parse(raw).expect("listed tokens parse")
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, shape: &ModelShape) -> ClassModel {
    let n = pick_range(rng, shape.entities).min(ENTITY_NAMES.len());
    let names: Vec<&str> = ENTITY_NAMES.choose_multiple(rng, n).copied().collect();
    let entities = names.iter().map(|name| {
        let k = pick_range(rng, shape.attributes_per_entity).min(ATTRIBUTE_NAMES.len());
        let attributes = ATTRIBUTE_NAMES
            .choose_multiple(rng, k)
            .map(|a| {
                if shape.decorations {
                    let ty = rng.gen_bool(0.5).then(|| TYPES.choose(rng).unwrap().to_string());
                    let vis = [None, Some(Visibility::Public), Some(Visibility::Private), Some(Visibility::Protected)]
                        .choose(rng)
                        .copied()
                        .flatten();
                    Attribute::new(*a, ty, vis)
                } else {
                    Attribute::named(*a)
                }
                .expect("generated attributes are valid")
            })
            .collect();
        let methods = if shape.decorations {
            let m = rng.gen_range(0..=2);
            METHODS.choose_multiple(rng, m).map(|s| s.to_string()).collect()
        } else {
            Vec::new()
        };
        Entity::new(*name, attributes, methods).expect("generated entities are valid")
    });
    let entities: Vec<Entity> = entities.collect();

    let mut associations = Vec::new();
    if !names.is_empty() {
        for _ in 0..pick_range(rng, shape.associations) {
            let kind = *AssociationKind::ALL.choose(rng).unwrap();
            let s = *names.choose(rng).unwrap();
            let t = *names.choose(rng).unwrap();
            let a = if shape.decorations && kind != AssociationKind::Inheritance {
                let label = rng
                    .gen_bool(0.4)
                    .then(|| LABELS.choose(rng).unwrap().to_string());
                Association::new(kind, s, t, multiplicity(rng), multiplicity(rng), label)
                    .expect("non-inheritance accepts multiplicities")
            } else {
                Association::simple(kind, s, t)
            };
            associations.push(a);
        }
    }
    ClassModel::new(entities, associations).expect("endpoints are declared")
}

/// Random sub-model: a subset of entities, of their attributes, and of the
/// associations between kept entities.
pub fn random_sub_model<R: Rng + ?Sized>(rng: &mut R, model: &ClassModel) -> ClassModel {
    let kept: BTreeSet<&str> = model
        .entities()
        .filter(|_| rng.gen_bool(0.7))
        .map(|e| e.name())
        .collect();
    let entities: Vec<Entity> = model
        .entities()
        .filter(|e| kept.contains(e.name()))
        .map(|e| {
            let attrs = e
                .attributes()
                .iter()
                .filter(|_| rng.gen_bool(0.7))
                .cloned()
                .collect();
            Entity::new(e.name(), attrs, e.methods().to_vec()).expect("subset of a valid entity")
        })
        .collect();
    let associations = model
        .associations()
        .iter()
        .filter(|a| kept.contains(a.source()) && kept.contains(a.target()))
        .filter(|_| rng.gen_bool(0.7))
        .cloned()
        .collect();
    ClassModel::new(entities, associations).expect("subset of a valid model")
}

/// Mermaid text for `model` with entity blocks and relation lines in a
/// random order.
pub fn shuffled_mermaid<R: Rng + ?Sized>(rng: &mut R, model: &ClassModel) -> String {
    let text = crate::mermaid::serialize(model);
    let mut blocks: Vec<String> = Vec::new();
    let mut relations: Vec<String> = Vec::new();
    let mut lines = text.lines().skip(1);
    while let Some(line) = lines.next() {
        if line.starts_with("class ") {
            let mut block = vec![line.to_string()];
            if line.ends_with('{') {
                for inner in lines.by_ref() {
                    block.push(inner.to_string());
                    if inner.trim() == "}" {
                        break;
                    }
                }
            }
            blocks.push(block.join("\n"));
        } else {
            relations.push(line.to_string());
        }
    }
    blocks.shuffle(rng);
    relations.shuffle(rng);
    let mut out = String::from(crate::mermaid::HEADER);
    for part in blocks.iter().chain(&relations) {
        out.push('\n');
        out.push_str(part);
    }
    out.push('\n');
    out
}

/// `n` values with exactly the given min and max whose mean and population
/// std hit the targets. Interior values come in pairs around a common centre.
pub fn engineered_sample(min: f64, max: f64, mean: f64, std: f64, n: usize) -> Option<Vec<f64>> {
    if n < 4 || !n.is_multiple_of(2) {
        return None;
    }
    let inner = (n - 2) as f64;
    let centre = (n as f64 * mean - min - max) / inner;
    let fixed = (min - mean).powi(2) + (max - mean).powi(2);
    let spread = (n as f64 * std * std - fixed) / inner - (centre - mean).powi(2);
    if spread < 0.0 {
        return None;
    }
    let d = spread.sqrt();
    if centre - d < min || centre + d > max {
        return None;
    }
    let mut out = vec![min, max];
    for _ in 0..(n - 2) / 2 {
        out.push(centre - d);
        out.push(centre + d);
    }
    Some(out)
}

/// Integer sample of size `n` containing `min` and `max`, whose mean rounds
/// to `mean` and whose population std is as close to `std` as unit moves
/// allow.
pub fn engineered_counts(min: usize, max: usize, mean: f64, std: f64, n: usize) -> Option<Vec<usize>> {
    if n < 2 || min > max {
        return None;
    }
    let sum = (mean * n as f64).round() as i64;
    let (lo, hi) = (min as i64, max as i64);
    let rest = sum - lo - hi;
    let inner = (n - 2) as i64;
    if inner == 0 {
        return (rest == 0).then(|| vec![min, max]);
    }
    if rest < lo * inner || rest > hi * inner {
        return None;
    }
    let mut v = vec![rest / inner; inner as usize];
    for x in v.iter_mut().take((rest % inner) as usize) {
        *x += 1;
    }
    let mut all: Vec<i64> = vec![lo, hi];
    all.extend(&v);
    let mu = sum as f64 / n as f64;
    let target_ss = n as f64 * (std * std + mu * mu);
    let ss = |v: &[i64]| v.iter().map(|&x| (x * x) as f64).sum::<f64>();
    loop {
        let gap = target_ss - ss(&all);
        // largest move (a-1, b+1) with a <= b that fits the gap, else the
        // smallest one if it still brings us closer
        let mut fitting: Option<(usize, usize, f64)> = None;
        let mut smallest: Option<(usize, usize, f64)> = None;
        for i in 2..all.len() {
            for j in 2..all.len() {
                if i == j || all[i] > all[j] || all[i] <= lo || all[j] >= hi {
                    continue;
                }
                let inc = 2.0 * (all[j] - all[i] + 1) as f64;
                if inc <= gap && fitting.is_none_or(|b| inc > b.2) {
                    fitting = Some((i, j, inc));
                }
                if smallest.is_none_or(|b| inc < b.2) {
                    smallest = Some((i, j, inc));
                }
            }
        }
        let best = fitting.or(smallest.filter(|b| b.2 < 2.0 * gap));
        match best {
            Some((i, j, _)) if gap > 0.0 => {
                all[i] -= 1;
                all[j] += 1;
            }
            _ => break,
        }
    }
    Some(all.into_iter().map(|x| x as usize).collect())
}

/// Model with `classes` entities and `attributes` attributes spread over them.
pub fn model_with_counts(classes: usize, attributes: usize) -> ClassModel {
    assert!(classes > 0 || attributes == 0);
    let entities = (0..classes).map(|c| {
        let k = attributes / classes + usize::from(c < attributes % classes);
        let attrs = (0..k)
            .map(|i| Attribute::named(format!("field{i}")).expect("valid name"))
            .collect();
        Entity::new(format!("Class{c}"), attrs, Vec::new()).expect("valid entity")
    });
    ClassModel::new(entities, Vec::new()).expect("no associations")
}
