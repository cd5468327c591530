//! Variant derivation: binding a product line under a configuration.

use std::collections::HashMap;

use indexmap::IndexMap;

use crate::model::{InstanceGraph, ModelObject, ObjectId, Value};
use crate::variability::{Configuration, ProductLine};

/// The concrete variant of a product line under one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundVariant {
    pub graph: InstanceGraph,
    pub config: Configuration,
    /// Source objects in registry order, `true` when kept.
    pub provenance: IndexMap<ObjectId, bool>,
}

impl BoundVariant {
    pub fn kept(&self, id: &ObjectId) -> bool {
        self.provenance.get(id).copied().unwrap_or(false)
    }

    pub fn dropped(&self) -> impl Iterator<Item = &ObjectId> {
        self.provenance.iter().filter(|(_, kept)| !**kept).map(|(id, _)| id)
    }
}

/// Rewrites a slot value given the set of kept objects.
fn rebind_value(value: &Value, kept: &dyn Fn(&ObjectId) -> bool) -> Value {
    match value {
        Value::Ref(Some(id)) if !kept(id) => Value::Ref(None),
        Value::List(ids) => Value::List(ids.iter().filter(|id| kept(id)).cloned().collect()),
        other => other.clone(),
    }
}

fn rebind_object(object: &ModelObject, kept: &dyn Fn(&ObjectId) -> bool) -> ModelObject {
    ModelObject {
        id: object.id.clone(),
        ty: object.ty.clone(),
        slots: object
            .slots
            .iter()
            .map(|(name, value)| (name.clone(), rebind_value(value, kept)))
            .collect(),
    }
}

/// Binds an arbitrary graph given a keep predicate. Dropped objects leave the
/// registry; references to them become NONE and lists are filtered in order.
pub fn bind_graph(g: &InstanceGraph, keep: &dyn Fn(&ObjectId) -> bool) -> (InstanceGraph, IndexMap<ObjectId, bool>) {
    let provenance: IndexMap<ObjectId, bool> = g.objects().map(|o| (o.id.clone(), keep(&o.id))).collect();
    let kept = |id: &ObjectId| provenance.get(id).copied().unwrap_or(false);
    let mut out = InstanceGraph::new();
    for object in g.objects().filter(|o| kept(&o.id)) {
        out.insert(rebind_object(object, &kept))
            .expect("source ids are unique");
    }
    (out, provenance)
}

/// `m↓k`: keeps exactly the objects whose presence condition holds under `k`.
pub fn bind(pl: &ProductLine, k: &Configuration) -> BoundVariant {
    let (graph, provenance) = bind_graph(pl.model(), &|id| k.satisfies(pl.presence_of(id)));
    BoundVariant {
        graph,
        config: k.clone(),
        provenance,
    }
}

/// Keeps every object but rewrites references and lists as binding would.
/// Evaluating a lifted constraint here with `selected` read from the presence
/// table agrees with evaluating the original constraint on `bind(pl, k)`.
pub fn bind_symbolic(pl: &ProductLine, k: &Configuration) -> InstanceGraph {
    let kept = |id: &ObjectId| pl.model().contains(id.as_str()) && k.satisfies(pl.presence_of(id));
    let mut out = InstanceGraph::new();
    for object in pl.model().objects() {
        out.insert(rebind_object(object, &kept)).expect("source ids are unique");
    }
    out
}

/// Whether a type-preserving bijection maps `a` onto `b`, matching basic
/// slots exactly and references and lists through the bijection.
pub fn structurally_equal(a: &InstanceGraph, b: &InstanceGraph) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (colors_a, colors_b) = refine_colors(a, b);
    let mut histogram: HashMap<u32, i64> = HashMap::new();
    for c in colors_a.values() {
        *histogram.entry(*c).or_default() += 1;
    }
    for c in colors_b.values() {
        *histogram.entry(*c).or_default() -= 1;
    }
    if histogram.values().any(|n| *n != 0) {
        return false;
    }
    Matcher::new(a, b, &colors_a, &colors_b).run()
}

/// Shape of a slot independent of object ids.
fn slot_shape(value: &Value) -> String {
    match value {
        Value::Ref(Some(_)) => "ref".into(),
        Value::Ref(None) => "none".into(),
        Value::List(ids) => format!("list{}", ids.len()),
        basic => format!("{basic:?}"),
    }
}

/// Joint color refinement over both graphs so colors are comparable.
fn refine_colors(a: &InstanceGraph, b: &InstanceGraph) -> (HashMap<ObjectId, u32>, HashMap<ObjectId, u32>) {
    let mut interner: HashMap<String, u32> = HashMap::new();
    let mut intern = |key: String| {
        let next = interner.len() as u32;
        *interner.entry(key).or_insert(next)
    };
    let initial = |g: &InstanceGraph, intern: &mut dyn FnMut(String) -> u32| -> HashMap<ObjectId, u32> {
        g.objects()
            .map(|o| {
                let mut key = o.ty.clone();
                for (name, value) in &o.slots {
                    key.push_str(&format!("|{name}={}", slot_shape(value)));
                }
                (o.id.clone(), intern(key))
            })
            .collect()
    };
    let mut ca = initial(a, &mut intern);
    let mut cb = initial(b, &mut intern);
    let distinct = |ca: &HashMap<ObjectId, u32>, cb: &HashMap<ObjectId, u32>| {
        ca.values().chain(cb.values()).collect::<std::collections::HashSet<_>>().len()
    };
    let mut classes = distinct(&ca, &cb);
    loop {
        let step = |g: &InstanceGraph, colors: &HashMap<ObjectId, u32>, intern: &mut dyn FnMut(String) -> u32| {
            let color_of = |id: &ObjectId| colors.get(id).map_or("?".to_string(), |c| c.to_string());
            g.objects()
                .map(|o| {
                    let mut key = format!("{}", colors[&o.id]);
                    for (name, value) in &o.slots {
                        match value {
                            Value::Ref(Some(id)) => key.push_str(&format!("|{name}->{}", color_of(id))),
                            Value::List(ids) => {
                                key.push_str(&format!("|{name}=["));
                                for id in ids {
                                    key.push_str(&color_of(id));
                                    key.push(',');
                                }
                                key.push(']');
                            }
                            _ => {}
                        }
                    }
                    (o.id.clone(), intern(key))
                })
                .collect::<HashMap<_, _>>()
        };
        let na = step(a, &ca, &mut intern);
        let nb = step(b, &cb, &mut intern);
        let refined = distinct(&na, &nb);
        ca = na;
        cb = nb;
        if refined == classes {
            break;
        }
        classes = refined;
    }
    (ca, cb)
}

/// An incoming edge: source object, slot and list position.
type Edge<'a> = (&'a ObjectId, &'a str, Option<usize>);

struct Matcher<'a> {
    a: &'a InstanceGraph,
    b: &'a InstanceGraph,
    order: Vec<&'a ObjectId>,
    candidates: HashMap<u32, Vec<&'a ObjectId>>,
    colors_a: &'a HashMap<ObjectId, u32>,
    incoming: HashMap<&'a ObjectId, Vec<Edge<'a>>>,
    forward: HashMap<&'a ObjectId, &'a ObjectId>,
    backward: HashMap<&'a ObjectId, &'a ObjectId>,
}

impl<'a> Matcher<'a> {
    fn new(
        a: &'a InstanceGraph,
        b: &'a InstanceGraph,
        colors_a: &'a HashMap<ObjectId, u32>,
        colors_b: &'a HashMap<ObjectId, u32>,
    ) -> Self {
        let mut candidates: HashMap<u32, Vec<&ObjectId>> = HashMap::new();
        for o in b.objects() {
            candidates.entry(colors_b[&o.id]).or_default().push(&o.id);
        }
        let mut order: Vec<&ObjectId> = a.objects().map(|o| &o.id).collect();
        order.sort_by_key(|id| candidates.get(&colors_a[*id]).map_or(0, Vec::len));
        let mut incoming: HashMap<&ObjectId, Vec<_>> = HashMap::new();
        for o in a.objects() {
            for (name, value) in &o.slots {
                match value {
                    Value::Ref(Some(t)) => incoming.entry(t).or_default().push((&o.id, name.as_str(), None)),
                    Value::List(ids) => {
                        for (i, t) in ids.iter().enumerate() {
                            incoming.entry(t).or_default().push((&o.id, name.as_str(), Some(i)));
                        }
                    }
                    _ => {}
                }
            }
        }
        Matcher {
            a,
            b,
            order,
            candidates,
            colors_a,
            incoming,
            forward: HashMap::new(),
            backward: HashMap::new(),
        }
    }

    fn run(mut self) -> bool {
        self.search(0)
    }

    fn search(&mut self, depth: usize) -> bool {
        let Some(&x) = self.order.get(depth) else {
            return true;
        };
        let options = self.candidates.get(&self.colors_a[x]).cloned().unwrap_or_default();
        for y in options {
            if self.backward.contains_key(y) {
                continue;
            }
            self.forward.insert(x, y);
            self.backward.insert(y, x);
            if self.consistent(x, y) && self.search(depth + 1) {
                return true;
            }
            self.forward.remove(x);
            self.backward.remove(y);
        }
        false
    }

    /// Targets agree wherever either side is already mapped.
    fn targets_agree(&self, t: &ObjectId, u: &ObjectId) -> bool {
        let t_inside = self.a.contains(t.as_str());
        let u_inside = self.b.contains(u.as_str());
        if !t_inside || !u_inside {
            return !t_inside && !u_inside && t == u;
        }
        match (self.forward.get(t), self.backward.get(u)) {
            (Some(mapped), _) if *mapped != u => false,
            (_, Some(pre)) if *pre != t => false,
            _ => true,
        }
    }

    fn slot_agrees(&self, va: &Value, vb: &Value) -> bool {
        match (va, vb) {
            (Value::Ref(Some(t)), Value::Ref(Some(u))) => self.targets_agree(t, u),
            (Value::Ref(None), Value::Ref(None)) => true,
            (Value::List(ts), Value::List(us)) => {
                ts.len() == us.len() && ts.iter().zip(us).all(|(t, u)| self.targets_agree(t, u))
            }
            (Value::Ref(_) | Value::List(_), _) | (_, Value::Ref(_) | Value::List(_)) => false,
            (basic_a, basic_b) => basic_a == basic_b,
        }
    }

    fn consistent(&self, x: &ObjectId, y: &ObjectId) -> bool {
        let (Some(ox), Some(oy)) = (self.a.get(x.as_str()), self.b.get(y.as_str())) else {
            return false;
        };
        if ox.ty != oy.ty || ox.slots.len() != oy.slots.len() {
            return false;
        }
        for (name, va) in &ox.slots {
            match oy.slot(name) {
                Some(vb) if self.slot_agrees(va, vb) => {}
                _ => return false,
            }
        }
        let Some(edges) = self.incoming.get(x) else {
            return true;
        };
        edges.iter().all(|(source, slot, position)| {
            let Some(mapped) = self.forward.get(*source) else {
                return true;
            };
            let target = self.b.get(mapped.as_str()).and_then(|o| o.slot(slot));
            match (target, position) {
                (Some(Value::Ref(Some(u))), None) => u == y,
                (Some(Value::List(us)), Some(i)) => us.get(*i) == Some(y),
                _ => false,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{parse_metamodel, parse_model, Bundle};
    use crate::meta::Metamodel;
    use crate::model::{typecheck_graph, CheckMode};
    use crate::variability::{enumerate_configurations, make_configuration, PresenceTable, DEFAULT_ENUMERATION_CAP};
    use std::path::Path;

    fn micro_bundle() -> Bundle {
        Bundle::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/microl")).unwrap()
    }

    fn micro_program(text: &str) -> (Metamodel, InstanceGraph) {
        let mm = parse_metamodel(include_str!("../../../fixtures/microl/metamodel.json")).unwrap();
        let g = parse_model(&mm, text).unwrap();
        (mm, g)
    }

    fn micro_config(bundle: &Bundle, fpu: bool, runtime: bool) -> Configuration {
        make_configuration(
            bundle.product_line.feature_model(),
            [
                ("SoftwareOptimization", true),
                ("ControllerFeatures", true),
                ("Precision", false),
                ("Runtime", runtime),
                ("FPU", fpu),
            ],
        )
        .unwrap()
    }

    fn renamed(g: &InstanceGraph) -> InstanceGraph {
        let rename = |id: &ObjectId| ObjectId::from(format!("renamed_{id}"));
        let mut out = InstanceGraph::new();
        for o in g.objects().collect::<Vec<_>>().into_iter().rev() {
            let mut copy = ModelObject::new(rename(&o.id), o.ty.as_str());
            for (name, value) in &o.slots {
                let value = match value {
                    Value::Ref(Some(id)) => Value::Ref(Some(rename(id))),
                    Value::List(ids) => Value::List(ids.iter().map(rename).collect()),
                    other => other.clone(),
                };
                copy.slots.insert(name.clone(), value);
            }
            out.insert(copy).unwrap();
        }
        out
    }

    #[test]
    fn micro_variants_match_the_example_programs() {
        let bundle = micro_bundle();
        let (_, p1) = micro_program(include_str!("../../../fixtures/microl/my_program1.json"));
        let (_, p2) = micro_program(include_str!("../../../fixtures/microl/my_program2.json"));
        let v1 = bind(&bundle.product_line, &micro_config(&bundle, false, true));
        let v2 = bind(&bundle.product_line, &micro_config(&bundle, true, true));
        assert!(structurally_equal(&v1.graph, &p1));
        assert!(structurally_equal(&v2.graph, &p2));
        assert!(!structurally_equal(&v1.graph, &p2));
        assert!(!structurally_equal(&p1, &p2));
    }

    #[test]
    fn structural_equality_ignores_ids_and_order() {
        let (_, p2) = micro_program(include_str!("../../../fixtures/microl/my_program2.json"));
        assert!(structurally_equal(&p2, &p2));
        assert!(structurally_equal(&p2, &renamed(&p2)));
    }

    #[test]
    fn list_order_matters_for_structural_equality() {
        let g = |order: [&str; 2]| {
            InstanceGraph::new()
                .with(ModelObject::new("l", "L").with("items", Value::list(order)))
                .with(ModelObject::new("x", "I").with("v", Value::Int(1)))
                .with(ModelObject::new("y", "I").with("v", Value::Int(2)))
        };
        assert!(!structurally_equal(&g(["x", "y"]), &g(["y", "x"])));
        assert!(structurally_equal(&g(["x", "y"]), &g(["x", "y"])));
    }

    #[test]
    fn references_to_dropped_objects_become_none() {
        let pen = Bundle::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/pen")).unwrap();
        let push = make_configuration(
            pen.product_line.feature_model(),
            [("PenFeatures", true), ("OpenMechanism", true), ("TwistToOpen", false), ("PushToOpen", true)],
        )
        .unwrap();
        let variant = bind(&pen.product_line, &push);
        assert_eq!(variant.graph.get("Depl3").unwrap().slot("step"), Some(&Value::none()));
        assert_eq!(
            variant.graph.get("Pen").unwrap().slot("parts"),
            Some(&Value::list(["BasePen", "PushButton"]))
        );
        assert!(!variant.graph.contains("ScrewHead"));
        assert_eq!(variant.dropped().map(ObjectId::as_str).collect::<Vec<_>>(), ["TwistableHead", "ScrewHead"]);
    }

    #[test]
    fn every_variant_typechecks_after_binding() {
        for dir in ["microl", "pen"] {
            let bundle = Bundle::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(dir)).unwrap();
            let pl = &bundle.product_line;
            for k in enumerate_configurations(pl.feature_model(), DEFAULT_ENUMERATION_CAP).unwrap() {
                let v = bind(pl, &k);
                assert!(typecheck_graph(pl.metamodel(), &v.graph, CheckMode::PostBinding).is_empty());
                for o in pl.model().objects() {
                    assert_eq!(v.graph.contains(o.id.as_str()), k.satisfies(pl.presence_of(&o.id)));
                }
            }
        }
    }

    #[test]
    fn trivial_presence_is_identity_and_binding_is_idempotent() {
        let bundle = micro_bundle();
        let pl = bundle.product_line.with_presence(PresenceTable::new()).unwrap();
        let k = micro_config(&bundle, true, true);
        assert_eq!(bind(&pl, &k).graph, *pl.model());
        let once = bind(&bundle.product_line, &k).graph;
        let (twice, _) = bind_graph(&once, &|_| true);
        assert_eq!(twice, once);
    }
}
