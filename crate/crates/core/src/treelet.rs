//! Declarative dialogue graphs.
//!
//! A graph is a set of named nodes. Each node holds ordered branches; the
//! first branch whose predicates all hold fires, fills its template, and
//! names the node to run on the next turn (`END` leaves the graph). Every
//! node has exactly one default branch, used when nothing else fires or when
//! a template slot cannot be filled.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::nlp::{Annotations, DialogueAct};
use crate::types::{EntityDirective, ResponsePriority, Sentiment};

/// Successor name meaning "leave the graph".
pub const END: &str = "END";

/// Slots every graph may use without declaring them.
pub const BUILTIN_SLOTS: &[&str] = &["entity", "entity_id", "user_name"];

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("slot regex"));

#[derive(Debug, thiserror::Error)]
pub enum TreeletError {
    #[error("treelet document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("node `{node}` branch `{branch}`: bad regex: {source}")]
    Regex {
        node: String,
        branch: String,
        #[source]
        source: regex::Error,
    },
    #[error("node `{node}` branch `{branch}`: bad directive `{directive}`")]
    Directive { node: String, branch: String, directive: String },
    #[error("graph `{graph}` is malformed: {}", defects.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { graph: String, defects: Vec<Defect> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TestSpec {
    Regex { pattern: String },
    DialogueAct { acts: Vec<DialogueAct> },
    Sentiment { value: Sentiment },
    NavIntent { polarity: Polarity },
    EntityChanged,
    CurrentCategory { category: String },
    IsQuestion,
    Slot { name: String },
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Deserialize)]
struct PredicateSpec {
    #[serde(flatten)]
    test: TestSpec,
    #[serde(default)]
    negate: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct BranchSpec {
    id: String,
    #[serde(default)]
    when: Vec<PredicateSpec>,
    #[serde(default)]
    template: String,
    #[serde(default)]
    directive: Option<String>,
    #[serde(default)]
    needs_prompt: bool,
    #[serde(default)]
    expected_types: Vec<String>,
    next: String,
    #[serde(default)]
    priority: Option<ResponsePriority>,
    /// Fires, moves the graph along, but produces no response.
    #[serde(default)]
    silent: bool,
    #[serde(default)]
    default: bool,
    /// Slot values to remember, as templates.
    #[serde(default)]
    remember: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
struct NodeSpec {
    id: String,
    branches: Vec<BranchSpec>,
}

#[derive(Debug, Clone, Deserialize)]
struct GraphSpec {
    name: String,
    entry: String,
    /// Further nodes an RG may jump to directly.
    #[serde(default)]
    entries: Vec<String>,
    /// Slots the owning RG fills in addition to the built-in ones.
    #[serde(default)]
    slots: Vec<String>,
    nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone)]
enum Test {
    Regex(Regex),
    DialogueAct(Vec<DialogueAct>),
    Sentiment(Sentiment),
    NavIntent(Polarity),
    EntityChanged,
    CurrentCategory(String),
    IsQuestion,
    Slot(String),
    Always,
}

#[derive(Debug, Clone)]
pub struct Predicate {
    test: Test,
    negate: bool,
}

/// Directive with slot references left unresolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DirectiveSpec {
    Keep,
    Clear,
    SetLiteral(String),
    SetSlot(String),
}

impl DirectiveSpec {
    fn parse(s: Option<&str>) -> Option<Self> {
        let Some(s) = s.map(str::trim) else { return Some(Self::Keep) };
        match s {
            "" | "keep" => Some(Self::Keep),
            "clear" => Some(Self::Clear),
            _ => {
                let target = s.strip_prefix("set:")?.trim();
                if let Some(slot) = target.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                    Some(Self::SetSlot(slot.to_string()))
                } else if target.is_empty() {
                    None
                } else {
                    Some(Self::SetLiteral(target.to_string()))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub id: String,
    when: Vec<Predicate>,
    pub template: String,
    pub directive: DirectiveSpec,
    pub needs_prompt: bool,
    pub expected_types: BTreeSet<String>,
    pub next: String,
    pub priority: Option<ResponsePriority>,
    pub silent: bool,
    pub default: bool,
    pub remember: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone)]
pub struct TreeletGraph {
    pub name: String,
    pub entry: String,
    pub entries: Vec<String>,
    pub slots: BTreeSet<String>,
    pub nodes: BTreeMap<String, Node>,
    /// Node ids in document order.
    order: Vec<String>,
}

/// A structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Defect {
    DuplicateNode(String),
    DuplicateBranch { node: String, branch: String },
    MissingEntry(String),
    DanglingSuccessor { node: String, branch: String, target: String },
    Unreachable(String),
    NoDefault(String),
    MultipleDefaults(String),
    EmptyTemplate { node: String, branch: String },
    UnknownSlot { node: String, branch: String, slot: String },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateNode(n) => write!(f, "node `{n}` defined twice"),
            Self::DuplicateBranch { node, branch } => write!(f, "node `{node}` has branch `{branch}` twice"),
            Self::MissingEntry(n) => write!(f, "entry node `{n}` does not exist"),
            Self::DanglingSuccessor { node, branch, target } => {
                write!(f, "edge {node}.{branch} -> `{target}` points at no node")
            }
            Self::Unreachable(n) => write!(f, "node `{n}` is unreachable"),
            Self::NoDefault(n) => write!(f, "node `{n}` has no default branch"),
            Self::MultipleDefaults(n) => write!(f, "node `{n}` has more than one default branch"),
            Self::EmptyTemplate { node, branch } => write!(f, "branch {node}.{branch} has an empty template"),
            Self::UnknownSlot { node, branch, slot } => write!(f, "branch {node}.{branch} uses undeclared slot `{slot}`"),
        }
    }
}

fn compile_predicate(node: &str, branch: &str, spec: PredicateSpec) -> Result<Predicate, TreeletError> {
    let test = match spec.test {
        TestSpec::Regex { pattern } => Test::Regex(Regex::new(&pattern).map_err(|source| TreeletError::Regex {
            node: node.into(),
            branch: branch.into(),
            source,
        })?),
        TestSpec::DialogueAct { acts } => Test::DialogueAct(acts),
        TestSpec::Sentiment { value } => Test::Sentiment(value),
        TestSpec::NavIntent { polarity } => Test::NavIntent(polarity),
        TestSpec::EntityChanged => Test::EntityChanged,
        TestSpec::CurrentCategory { category } => Test::CurrentCategory(category.to_lowercase()),
        TestSpec::IsQuestion => Test::IsQuestion,
        TestSpec::Slot { name } => Test::Slot(name),
        TestSpec::Always => Test::Always,
    };
    Ok(Predicate { test, negate: spec.negate })
}

impl TreeletGraph {
    /// Parses a graph document without validating it.
    pub fn parse_unchecked(text: &str) -> Result<Self, TreeletError> {
        let spec: GraphSpec = toml::from_str(text)?;
        let mut nodes = BTreeMap::new();
        let mut order = Vec::new();
        let mut duplicate_nodes = Vec::new();
        for node in spec.nodes {
            let mut branches = Vec::new();
            for b in node.branches {
                let directive = DirectiveSpec::parse(b.directive.as_deref()).ok_or_else(|| TreeletError::Directive {
                    node: node.id.clone(),
                    branch: b.id.clone(),
                    directive: b.directive.clone().unwrap_or_default(),
                })?;
                let when = b
                    .when
                    .into_iter()
                    .map(|p| compile_predicate(&node.id, &b.id, p))
                    .collect::<Result<Vec<_>, _>>()?;
                branches.push(Branch {
                    id: b.id,
                    when,
                    template: b.template,
                    directive,
                    needs_prompt: b.needs_prompt,
                    expected_types: b.expected_types.into_iter().map(|t| t.to_lowercase()).collect(),
                    next: b.next,
                    priority: b.priority,
                    silent: b.silent,
                    default: b.default,
                    remember: b.remember,
                });
            }
            if nodes.contains_key(&node.id) {
                duplicate_nodes.push(node.id.clone());
            } else {
                order.push(node.id.clone());
            }
            nodes.insert(node.id.clone(), Node { id: node.id, branches });
        }
        let mut graph = Self {
            name: spec.name,
            entry: spec.entry,
            entries: spec.entries,
            slots: spec.slots.into_iter().collect(),
            nodes,
            order,
        };
        graph.order.extend(duplicate_nodes.into_iter().map(|d| format!("{d}\u{0}dup")));
        Ok(graph)
    }

    /// Parses and validates; any defect is an error.
    pub fn parse(text: &str) -> Result<Self, TreeletError> {
        let graph = Self::parse_unchecked(text)?;
        let defects = validate(&graph);
        if defects.is_empty() {
            Ok(graph)
        } else {
            Err(TreeletError::Invalid { graph: graph.name.clone(), defects })
        }
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }
}

fn template_slots(template: &str) -> impl Iterator<Item = &str> {
    SLOT.captures_iter(template).map(|c| c.get(1).expect("slot group").as_str())
}

/// Structural check of a graph; empty iff well formed.
pub fn validate(graph: &TreeletGraph) -> Vec<Defect> {
    let mut defects = Vec::new();
    for id in &graph.order {
        if let Some(dup) = id.strip_suffix("\u{0}dup") {
            defects.push(Defect::DuplicateNode(dup.to_string()));
        }
    }
    let roots: Vec<&String> = std::iter::once(&graph.entry).chain(&graph.entries).collect();
    for root in &roots {
        if !graph.contains(root) {
            defects.push(Defect::MissingEntry((*root).clone()));
        }
    }
    let known_slot = |s: &str| BUILTIN_SLOTS.contains(&s) || graph.slots.contains(s);

    for id in graph.order.iter().filter(|id| !id.ends_with("\u{0}dup")) {
        let node = &graph.nodes[id];
        let mut seen = BTreeSet::new();
        for b in &node.branches {
            if !seen.insert(&b.id) {
                defects.push(Defect::DuplicateBranch { node: node.id.clone(), branch: b.id.clone() });
            }
            if b.next != END && !graph.contains(&b.next) {
                defects.push(Defect::DanglingSuccessor {
                    node: node.id.clone(),
                    branch: b.id.clone(),
                    target: b.next.clone(),
                });
            }
            if !b.silent && b.template.trim().is_empty() {
                defects.push(Defect::EmptyTemplate { node: node.id.clone(), branch: b.id.clone() });
            }
            let mut used: Vec<&str> = template_slots(&b.template).collect();
            used.extend(b.remember.values().flat_map(|v| template_slots(v)));
            if let DirectiveSpec::SetSlot(s) = &b.directive {
                used.push(s);
            }
            for p in &b.when {
                if let Test::Slot(s) = &p.test {
                    used.push(s);
                }
            }
            for slot in used {
                if !known_slot(slot) {
                    defects.push(Defect::UnknownSlot {
                        node: node.id.clone(),
                        branch: b.id.clone(),
                        slot: slot.to_string(),
                    });
                }
            }
        }
        match node.branches.iter().filter(|b| b.default).count() {
            0 => defects.push(Defect::NoDefault(node.id.clone())),
            1 => {}
            _ => defects.push(Defect::MultipleDefaults(node.id.clone())),
        }
    }

    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = roots.iter().map(|r| r.as_str()).filter(|r| graph.contains(r)).collect();
    while let Some(id) = queue.pop_front() {
        if !reached.insert(id) {
            continue;
        }
        for b in &graph.nodes[id].branches {
            if graph.contains(&b.next) {
                queue.push_back(&b.next);
            }
        }
    }
    for id in graph.order.iter().filter(|id| !id.ends_with("\u{0}dup")) {
        if !reached.contains(id.as_str()) {
            defects.push(Defect::Unreachable(id.clone()));
        }
    }
    defects
}

/// Everything a node may look at.
#[derive(Debug, Clone, Default)]
pub struct StepInput<'a> {
    pub utterance: &'a str,
    pub annotations: Option<&'a Annotations>,
    pub current_entity: Option<&'a str>,
    pub current_entity_name: Option<&'a str>,
    pub current_categories: BTreeSet<String>,
    pub entity_changed: bool,
    /// RG-provided and remembered slot values.
    pub slots: BTreeMap<String, String>,
}

impl StepInput<'_> {
    fn slot(&self, name: &str) -> Option<String> {
        match name {
            "entity" => self.current_entity_name.map(String::from),
            "entity_id" => self.current_entity.map(String::from),
            _ => self.slots.get(name).cloned(),
        }
        .filter(|v| !v.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub branch: String,
    /// `None` for a silent branch.
    pub text: Option<String>,
    pub directive: EntityDirective,
    pub next: Option<String>,
    pub needs_prompt: bool,
    pub expected_types: BTreeSet<String>,
    pub priority: Option<ResponsePriority>,
    pub remember: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("graph `{graph}` has no node `{node}`")]
    UnknownNode { graph: String, node: String },
    #[error("default branch {node}.{branch} cannot fill slot `{slot}`")]
    DefaultUnfillable { node: String, branch: String, slot: String },
}

fn holds(p: &Predicate, input: &StepInput) -> bool {
    let lowered = input.utterance.to_lowercase();
    let ann = input.annotations;
    let result = match &p.test {
        Test::Regex(r) => r.is_match(&lowered),
        Test::DialogueAct(acts) => ann.is_some_and(|a| acts.contains(&a.dialogue_act)),
        Test::Sentiment(s) => ann.is_some_and(|a| a.sentiment == *s),
        Test::NavIntent(Polarity::Positive) => ann.is_some_and(|a| a.nav_intent.positive),
        Test::NavIntent(Polarity::Negative) => ann.is_some_and(|a| a.nav_intent.negative),
        Test::EntityChanged => input.entity_changed,
        Test::CurrentCategory(c) => input.current_categories.contains(c),
        Test::IsQuestion => ann.is_some_and(|a| a.is_question),
        Test::Slot(name) => input.slot(name).is_some(),
        Test::Always => true,
    };
    result != p.negate
}

fn fill(template: &str, input: &StepInput) -> Result<String, String> {
    let mut missing = None;
    let text = SLOT.replace_all(template, |c: &regex::Captures| {
        let name = &c[1];
        input.slot(name).unwrap_or_else(|| {
            missing.get_or_insert_with(|| name.to_string());
            String::new()
        })
    });
    match missing {
        Some(m) => Err(m),
        None => Ok(text.into_owned()),
    }
}

fn render(branch: &Branch, input: &StepInput) -> Result<StepOutput, String> {
    let text = if branch.silent { None } else { Some(fill(&branch.template, input)?) };
    let directive = match &branch.directive {
        DirectiveSpec::Keep => EntityDirective::Keep,
        DirectiveSpec::Clear => EntityDirective::Clear,
        DirectiveSpec::SetLiteral(id) => EntityDirective::Set(id.clone()),
        DirectiveSpec::SetSlot(slot) => EntityDirective::Set(input.slot(slot).ok_or_else(|| slot.clone())?),
    };
    let mut remember = BTreeMap::new();
    for (k, v) in &branch.remember {
        remember.insert(k.clone(), fill(v, input)?);
    }
    Ok(StepOutput {
        branch: branch.id.clone(),
        text,
        directive,
        next: (branch.next != END).then(|| branch.next.clone()),
        needs_prompt: branch.needs_prompt,
        expected_types: branch.expected_types.clone(),
        priority: branch.priority,
        remember,
        warnings: Vec::new(),
    })
}

/// Runs one node against the user's turn.
pub fn step(graph: &TreeletGraph, current: &str, input: &StepInput) -> Result<StepOutput, StepError> {
    let node = graph
        .node(current)
        .ok_or_else(|| StepError::UnknownNode { graph: graph.name.clone(), node: current.to_string() })?;
    let default = node.branches.iter().find(|b| b.default).expect("validated graphs have a default branch");
    let mut warnings = Vec::new();
    let fired = node.branches.iter().find(|b| !b.default && b.when.iter().all(|p| holds(p, input)));
    if let Some(branch) = fired {
        match render(branch, input) {
            Ok(out) => return Ok(out),
            Err(slot) => {
                let w = format!("{}.{}: slot `{slot}` unfilled, using default branch", node.id, branch.id);
                tracing::warn!(graph = %graph.name, "{w}");
                warnings.push(w);
            }
        }
    }
    let mut out = render(default, input).map_err(|slot| StepError::DefaultUnfillable {
        node: node.id.clone(),
        branch: default.id.clone(),
        slot,
    })?;
    out.warnings = warnings;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::NavIntent;

    const LOOP: &str = r#"
name = "loop"
entry = "ask"
slots = ["actor"]

[[nodes]]
id = "ask"

[[nodes.branches]]
id = "yes"
when = [{ kind = "dialogue_act", acts = ["pos_answer"] }]
template = "Great! What about {actor}?"
next = "ask"

[[nodes.branches]]
id = "named"
when = [{ kind = "regex", pattern = "\\bcats?\\b" }, { kind = "is_question", negate = true }]
template = "Cats are great."
directive = "set:Cat"
next = "END"

[[nodes.branches]]
id = "other"
default = true
template = "Hmm, tell me more."
next = "ask"
"#;

    fn input<'a>(utterance: &'a str, ann: &'a Annotations) -> StepInput<'a> {
        StepInput { utterance, annotations: Some(ann), ..Default::default() }
    }

    #[test]
    fn first_matching_branch_fires() {
        let g = TreeletGraph::parse(LOOP).unwrap();
        let ann = Annotations::default();
        let out = step(&g, "ask", &input("i like cats", &ann)).unwrap();
        assert_eq!(out.branch, "named");
        assert_eq!(out.directive, EntityDirective::Set("Cat".into()));
        assert_eq!(out.next, None);
    }

    #[test]
    fn negated_predicate() {
        let g = TreeletGraph::parse(LOOP).unwrap();
        let ann = Annotations { is_question: true, ..Default::default() };
        assert_eq!(step(&g, "ask", &input("do you like cats", &ann)).unwrap().branch, "other");
    }

    #[test]
    fn self_loop_and_default() {
        let g = TreeletGraph::parse(LOOP).unwrap();
        let ann = Annotations::default();
        let out = step(&g, "ask", &input("dunno", &ann)).unwrap();
        assert_eq!(out.text.as_deref(), Some("Hmm, tell me more."));
        assert_eq!(out.next.as_deref(), Some("ask"));
    }

    #[test]
    fn unfillable_slot_falls_back_to_default() {
        let g = TreeletGraph::parse(LOOP).unwrap();
        let ann = Annotations { dialogue_act: DialogueAct::PosAnswer, ..Default::default() };
        let out = step(&g, "ask", &input("yes", &ann)).unwrap();
        assert_eq!(out.branch, "other");
        assert_eq!(out.warnings.len(), 1);

        let mut filled = input("yes", &ann);
        filled.slots.insert("actor".into(), "Keanu Reeves".into());
        let out = step(&g, "ask", &filled).unwrap();
        assert_eq!(out.text.as_deref(), Some("Great! What about Keanu Reeves?"));
    }

    #[test]
    fn step_is_deterministic() {
        let g = TreeletGraph::parse(LOOP).unwrap();
        let ann = Annotations { nav_intent: NavIntent { negative: true, ..Default::default() }, ..Default::default() };
        let a = step(&g, "ask", &input("whatever", &ann)).unwrap();
        let b = step(&g, "ask", &input("whatever", &ann)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_node_is_an_error() {
        let g = TreeletGraph::parse(LOOP).unwrap();
        assert!(matches!(step(&g, "nope", &StepInput::default()), Err(StepError::UnknownNode { .. })));
    }

    #[test]
    fn validate_reports_defects() {
        let g = TreeletGraph::parse_unchecked(LOOP).unwrap();
        assert!(validate(&g).is_empty());

        let dangling = LOOP.replace("next = \"END\"", "next = \"gone\"");
        let g = TreeletGraph::parse_unchecked(&dangling).unwrap();
        assert_eq!(
            validate(&g),
            vec![Defect::DanglingSuccessor { node: "ask".into(), branch: "named".into(), target: "gone".into() }]
        );
        assert!(TreeletGraph::parse(&dangling).is_err());

        let orphan = format!(
            "{LOOP}\n[[nodes]]\nid = \"orphan\"\n[[nodes.branches]]\nid = \"d\"\ndefault = true\ntemplate = \"x\"\nnext = \"END\"\n"
        );
        let g = TreeletGraph::parse_unchecked(&orphan).unwrap();
        assert_eq!(validate(&g), vec![Defect::Unreachable("orphan".into())]);

        let no_default = LOOP.replace("default = true\n", "");
        let g = TreeletGraph::parse_unchecked(&no_default).unwrap();
        assert_eq!(validate(&g), vec![Defect::NoDefault("ask".into())]);

        let bad_slot = LOOP.replace("{actor}", "{director}");
        let g = TreeletGraph::parse_unchecked(&bad_slot).unwrap();
        assert_eq!(
            validate(&g),
            vec![Defect::UnknownSlot { node: "ask".into(), branch: "yes".into(), slot: "director".into() }]
        );
    }

    #[test]
    fn bad_regex_and_directive_are_load_errors() {
        assert!(matches!(
            TreeletGraph::parse_unchecked(&LOOP.replace("\\\\bcats?\\\\b", "(")),
            Err(TreeletError::Regex { .. })
        ));
        assert!(matches!(
            TreeletGraph::parse_unchecked(&LOOP.replace("set:Cat", "launch")),
            Err(TreeletError::Directive { .. })
        ));
    }
}
