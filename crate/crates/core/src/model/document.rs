use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::pv::expand_pv_subsystem;
use super::{
    BlockKind, ComponentInstance, ComponentKind, ControlBlock, Coupling, CouplingDirection,
    ModelError, NetworkModel, Param, Params, TaskConfig, GROUND,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    nodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root: Option<String>,
    components: Vec<RawComponent>,
    #[serde(default)]
    control: Vec<RawBlock>,
    #[serde(default)]
    couplings: Vec<Coupling>,
    task: TaskConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    id: String,
    kind: String,
    #[serde(default)]
    params: Params,
    terminals: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    id: String,
    kind: String,
    #[serde(default)]
    params: Params,
    #[serde(default)]
    inputs: Vec<String>,
}

#[derive(Clone, Copy)]
enum Rule {
    Positive,
    NonNegative,
    Finite,
    Binary,
    List,
}

struct ParamSpec {
    name: &'static str,
    required: bool,
    rule: Rule,
}

const fn req(name: &'static str, rule: Rule) -> ParamSpec {
    ParamSpec { name, required: true, rule }
}

const fn opt(name: &'static str, rule: Rule) -> ParamSpec {
    ParamSpec { name, required: false, rule }
}

fn component_params(kind: ComponentKind) -> Vec<ParamSpec> {
    use Rule::*;
    match kind {
        ComponentKind::Resistor => vec![req("r", Positive)],
        ComponentKind::Inductor => vec![req("l", Positive), opt("v0", Finite), opt("i0", Finite)],
        ComponentKind::Capacitor => vec![req("c", Positive), opt("v0", Finite), opt("i0", Finite)],
        ComponentKind::SeriesRl => {
            vec![req("r", Positive), req("l", Positive), opt("v0", Finite), opt("i0", Finite)]
        }
        ComponentKind::VoltageSource => vec![
            req("magnitude", Finite),
            opt("frequency", NonNegative),
            opt("phase", Finite),
            opt("r_series", Positive),
        ],
        ComponentKind::CurrentSource => {
            vec![req("magnitude", Finite), opt("frequency", NonNegative), opt("phase", Finite)]
        }
        ComponentKind::Switch => vec![req("closed", Binary), opt("t_toggle", NonNegative)],
        ComponentKind::ControlledCurrentSource => vec![opt("gain", Finite)],
        ComponentKind::PvArray => vec![
            req("irradiance", NonNegative),
            req("temperature", Finite),
            opt("isc", Positive),
            opt("alpha", Finite),
        ],
        ComponentKind::PvSubsystem => vec![
            req("irradiance", NonNegative),
            req("temperature", Finite),
            opt("isc", Positive),
            opt("vdc_ref", Positive),
        ],
    }
}

fn block_params(kind: BlockKind) -> Vec<ParamSpec> {
    use Rule::*;
    match kind {
        BlockKind::Gain => vec![opt("k", Finite)],
        BlockKind::Sum => vec![opt("signs", List)],
        BlockKind::Integrator | BlockKind::Comparator | BlockKind::Delay => vec![],
        BlockKind::FirstOrderLag => vec![req("t", Positive), opt("k", Finite)],
        BlockKind::Limiter => vec![req("lower", Finite), req("upper", Finite)],
        BlockKind::PiController => vec![req("kp", Finite), req("ki", Finite)],
        BlockKind::Constant => vec![req("value", Finite)],
    }
}

fn check_params(
    id: &str,
    params: &Params,
    specs: &[ParamSpec],
    location: &str,
) -> Result<(), ModelError> {
    let bad = |param: &str, message: &str| ModelError::InvalidParameter {
        id: id.to_string(),
        param: param.to_string(),
        message: message.to_string(),
        location: format!("{location}.params.{param}"),
    };
    for key in params.keys() {
        if !specs.iter().any(|s| s.name == key) {
            return Err(bad(key, "unknown parameter"));
        }
    }
    for spec in specs {
        let Some(value) = params.get(spec.name) else {
            if spec.required {
                return Err(bad(spec.name, "required parameter missing"));
            }
            continue;
        };
        match (spec.rule, value) {
            (Rule::List, Param::List(list)) => {
                if list.iter().any(|v| !v.is_finite()) {
                    return Err(bad(spec.name, "list entries must be finite"));
                }
            }
            (Rule::List, Param::Num(_)) => return Err(bad(spec.name, "expected a list")),
            (_, Param::List(_)) => return Err(bad(spec.name, "expected a number")),
            (rule, Param::Num(v)) => {
                let v = *v;
                let ok = v.is_finite()
                    && match rule {
                        Rule::Positive => v > 0.0,
                        Rule::NonNegative => v >= 0.0,
                        Rule::Finite => true,
                        Rule::Binary => v == 0.0 || v == 1.0,
                        Rule::List => unreachable!(),
                    };
                if !ok {
                    let msg = match rule {
                        Rule::Positive => "must be strictly positive",
                        Rule::NonNegative => "must be non-negative",
                        Rule::Binary => "must be 0 (open) or 1 (closed)",
                        _ => "must be finite",
                    };
                    return Err(bad(spec.name, msg));
                }
            }
        }
    }
    Ok(())
}

/// Parses a model document, expands macro components and checks every
/// structural invariant.
pub fn parse_model(document: &str) -> Result<NetworkModel, ModelError> {
    let raw: RawDocument = serde_json::from_str(document).map_err(|e| {
        ModelError::MalformedDocument {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    })?;
    build(raw)
}

/// Serializes a model back to document text (pretty-printed JSON).
pub fn serialize_model(model: &NetworkModel) -> String {
    let raw = RawDocument {
        nodes: model.nodes.clone(),
        root: model.root.clone(),
        components: model
            .components
            .iter()
            .map(|c| RawComponent {
                id: c.id.clone(),
                kind: c.kind.as_str().to_string(),
                params: c.params.clone(),
                terminals: c.terminals.clone(),
            })
            .collect(),
        control: model
            .control_blocks
            .iter()
            .map(|b| RawBlock {
                id: b.id.clone(),
                kind: b.kind.as_str().to_string(),
                params: b.params.clone(),
                inputs: b.inputs.clone(),
            })
            .collect(),
        couplings: model.couplings.clone(),
        task: model.task.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("model serialization cannot fail")
}

fn build(raw: RawDocument) -> Result<NetworkModel, ModelError> {
    let mut ids: BTreeMap<String, String> = BTreeMap::new();
    let mut claim = |id: &str, location: String| -> Result<(), ModelError> {
        if id == GROUND || ids.contains_key(id) {
            return Err(ModelError::DuplicateIdentifier { id: id.to_string(), location });
        }
        ids.insert(id.to_string(), location);
        Ok(())
    };

    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for (i, n) in raw.nodes.iter().enumerate() {
        claim(n, format!("nodes[{i}]"))?;
        nodes.push(n.clone());
    }

    let mut components = Vec::new();
    let mut component_loc = Vec::new();
    let mut expanded_blocks = Vec::new();
    let mut expanded_couplings = Vec::new();
    let mut extra_nodes = Vec::new();
    for (i, rc) in raw.components.iter().enumerate() {
        let location = format!("components[{i}]");
        let kind = ComponentKind::parse(&rc.kind).ok_or_else(|| {
            ModelError::UnknownComponentKind {
                id: rc.id.clone(),
                kind: rc.kind.clone(),
                location: format!("{location}.kind"),
            }
        })?;
        check_params(&rc.id, &rc.params, &component_params(kind), &location)?;
        let expected = if kind == ComponentKind::PvSubsystem { 1 } else { 2 };
        if rc.terminals.len() != expected {
            return Err(ModelError::ArityMismatch {
                id: rc.id.clone(),
                kind: kind.to_string(),
                expected: format!("exactly {expected} terminal(s)"),
                found: rc.terminals.len(),
                location: format!("{location}.terminals"),
            });
        }
        for (t, term) in rc.terminals.iter().enumerate() {
            if term != GROUND && !raw.nodes.contains(term) {
                return Err(ModelError::DanglingReference {
                    reference: term.clone(),
                    location: format!("{location}.terminals[{t}]"),
                });
            }
        }
        let instance = ComponentInstance {
            id: rc.id.clone(),
            kind,
            params: rc.params.clone(),
            terminals: rc.terminals.clone(),
        };
        if kind == ComponentKind::PvSubsystem {
            let exp = expand_pv_subsystem(&instance);
            let origin = format!("{location} (expanded from `{}`)", rc.id);
            for n in exp.nodes {
                claim(&n, origin.clone())?;
                extra_nodes.push(n);
            }
            for c in exp.components {
                claim(&c.id, origin.clone())?;
                components.push(c);
                component_loc.push(origin.clone());
            }
            expanded_blocks.extend(exp.blocks.into_iter().map(|b| (b, origin.clone())));
            expanded_couplings.extend(exp.couplings.into_iter().map(|c| (c, origin.clone())));
        } else {
            claim(&rc.id, location.clone())?;
            components.push(instance);
            component_loc.push(location);
        }
    }
    nodes.extend(extra_nodes);

    let mut blocks = Vec::new();
    let mut block_loc = Vec::new();
    for (i, rb) in raw.control.iter().enumerate() {
        let location = format!("control[{i}]");
        let kind = BlockKind::parse(&rb.kind).ok_or_else(|| ModelError::UnknownBlockKind {
            id: rb.id.clone(),
            kind: rb.kind.clone(),
            location: format!("{location}.kind"),
        })?;
        claim(&rb.id, location.clone())?;
        blocks.push(ControlBlock {
            id: rb.id.clone(),
            kind,
            params: rb.params.clone(),
            inputs: rb.inputs.clone(),
        });
        block_loc.push(location);
    }
    for (b, origin) in expanded_blocks {
        claim(&b.id, origin.clone())?;
        blocks.push(b);
        block_loc.push(origin);
    }
    for (b, location) in blocks.iter().zip(&block_loc) {
        check_params(&b.id, &b.params, &block_params(b.kind), location)?;
        if !b.kind.arity_ok(b.inputs.len()) {
            return Err(ModelError::ArityMismatch {
                id: b.id.clone(),
                kind: b.kind.to_string(),
                expected: b.kind.arity_text().to_string(),
                found: b.inputs.len(),
                location: format!("{location}.inputs"),
            });
        }
        if b.kind == BlockKind::Limiter && b.num("lower") > b.num("upper") {
            return Err(ModelError::InvalidParameter {
                id: b.id.clone(),
                param: "lower".into(),
                message: "lower bound exceeds upper bound".into(),
                location: format!("{location}.params.lower"),
            });
        }
        if let Some(signs) = b.list("signs") {
            if signs.len() != b.inputs.len() {
                return Err(ModelError::InvalidParameter {
                    id: b.id.clone(),
                    param: "signs".into(),
                    message: format!("{} signs for {} inputs", signs.len(), b.inputs.len()),
                    location: format!("{location}.params.signs"),
                });
            }
        }
    }

    let mut couplings = Vec::new();
    let mut coupling_loc = Vec::new();
    for (i, c) in raw.couplings.iter().enumerate() {
        couplings.push(c.clone());
        coupling_loc.push(format!("couplings[{i}]"));
    }
    for (c, origin) in expanded_couplings {
        couplings.push(c);
        coupling_loc.push(origin);
    }

    let model = NetworkModel {
        nodes,
        root: raw.root.clone(),
        components,
        control_blocks: blocks,
        couplings,
        task: raw.task,
    };

    let mut driven = BTreeSet::new();
    for (c, location) in model.couplings.iter().zip(&coupling_loc) {
        match c.direction {
            CouplingDirection::Meter => {
                let ok = (c.electrical_ref != GROUND && model.is_node(&c.electrical_ref))
                    || model.component(&c.electrical_ref).is_some();
                if !ok {
                    return Err(ModelError::DanglingReference {
                        reference: c.electrical_ref.clone(),
                        location: format!("{location}.electrical_ref"),
                    });
                }
                claim(&c.signal_ref, format!("{location}.signal_ref"))?;
            }
            CouplingDirection::Actuator => {
                let target = model.component(&c.electrical_ref);
                if target.map(|t| t.kind) != Some(ComponentKind::ControlledCurrentSource) {
                    return Err(ModelError::DanglingReference {
                        reference: c.electrical_ref.clone(),
                        location: format!(
                            "{location}.electrical_ref (actuators must target a controlled_current_source)"
                        ),
                    });
                }
                if model.block(&c.signal_ref).is_none() {
                    return Err(ModelError::DanglingReference {
                        reference: c.signal_ref.clone(),
                        location: format!("{location}.signal_ref"),
                    });
                }
                if !driven.insert(c.electrical_ref.clone()) {
                    return Err(ModelError::DuplicateIdentifier {
                        id: c.electrical_ref.clone(),
                        location: format!("{location}.electrical_ref (source already driven)"),
                    });
                }
            }
        }
    }

    let is_meter = |s: &str| {
        model
            .couplings
            .iter()
            .any(|c| c.direction == CouplingDirection::Meter && c.signal_ref == s)
    };
    for (b, location) in model.control_blocks.iter().zip(&block_loc) {
        for (k, input) in b.inputs.iter().enumerate() {
            if model.block(input).is_none() && !is_meter(input) {
                return Err(ModelError::DanglingReference {
                    reference: input.clone(),
                    location: format!("{location}.inputs[{k}]"),
                });
            }
        }
    }

    let task = &model.task;
    if !(task.dt.is_finite() && task.dt > 0.0) {
        return Err(ModelError::InvalidTask {
            message: "dt must be a positive number".into(),
            location: "task.dt".into(),
        });
    }
    if !(task.duration.is_finite() && task.duration >= task.dt) {
        return Err(ModelError::InvalidTask {
            message: "duration must be at least dt".into(),
            location: "task.duration".into(),
        });
    }
    for (i, ch) in task.channels.iter().enumerate() {
        if model.resolve_signal(ch).is_none() {
            return Err(ModelError::DanglingReference {
                reference: ch.clone(),
                location: format!("task.channels[{i}]"),
            });
        }
    }
    if let Some(root) = &model.root {
        if root == GROUND || !model.is_node(root) {
            return Err(ModelError::DanglingReference {
                reference: root.clone(),
                location: "root".into(),
            });
        }
    }
    Ok(model)
}
