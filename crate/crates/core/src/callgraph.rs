//! Call graph construction, reachability to a target function, and the
//! annotated code slice handed to the stack predictor.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::GraphError;
use crate::location::Location;
use crate::model::TargetProgram;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub site: Location,
}

/// Functions as vertices, one labelled edge per call statement.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CallGraph {
    pub vertices: BTreeSet<String>,
    pub edges: BTreeSet<CallEdge>,
}

impl CallGraph {
    pub fn edge_at(&self, site: &Location) -> Option<&CallEdge> {
        self.edges.iter().find(|e| &e.site == site)
    }

    /// Call sites of edges whose caller and callee both lie in `funcs`.
    pub fn internal_sites(&self, funcs: &BTreeSet<String>) -> BTreeSet<Location> {
        self.edges
            .iter()
            .filter(|e| funcs.contains(&e.caller) && funcs.contains(&e.callee))
            .map(|e| e.site.clone())
            .collect()
    }
}

pub fn build_call_graph(program: &TargetProgram) -> CallGraph {
    let vertices = program.functions().iter().map(|f| f.name.clone()).collect();
    let edges = program
        .functions()
        .iter()
        .flat_map(|f| {
            f.statements().filter_map(move |s| {
                s.callee().map(|callee| CallEdge {
                    caller: f.name.clone(),
                    callee: callee.to_string(),
                    site: s.location.clone(),
                })
            })
        })
        .collect();
    CallGraph { vertices, edges }
}

/// All functions with a call path to `target`, including `target` itself.
pub fn reachable_functions(cg: &CallGraph, target: &str) -> Result<BTreeSet<String>, GraphError> {
    if !cg.vertices.contains(target) {
        return Err(GraphError::UnknownFunction(target.to_string()));
    }
    let mut callers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &cg.edges {
        callers.entry(&e.callee).or_default().push(&e.caller);
    }
    let mut seen = BTreeSet::from([target.to_string()]);
    let mut queue = VecDeque::from([target]);
    while let Some(f) = queue.pop_front() {
        for &c in callers.get(f).into_iter().flatten() {
            if seen.insert(c.to_string()) {
                queue.push_back(c);
            }
        }
    }
    Ok(seen)
}

/// Concatenated source of a set of functions with location annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSlice {
    pub text: String,
    pub annotated_sites: BTreeSet<Location>,
}

pub fn slice_header(file: &str, function: &str) -> String {
    format!("===== {file}:{function} =====")
}

/// Orders `funcs` callee-first; ties and cycles resolve by name.
fn callee_first_order(cg: &CallGraph, funcs: &BTreeSet<String>) -> Vec<String> {
    let mut pending_callees: BTreeMap<&str, BTreeSet<&str>> =
        funcs.iter().map(|f| (f.as_str(), BTreeSet::new())).collect();
    for e in &cg.edges {
        if e.caller != e.callee && funcs.contains(&e.caller) && funcs.contains(&e.callee) {
            pending_callees
                .get_mut(e.caller.as_str())
                .unwrap()
                .insert(e.callee.as_str());
        }
    }
    let mut order = Vec::with_capacity(funcs.len());
    while !pending_callees.is_empty() {
        let next = pending_callees
            .iter()
            .find(|(_, callees)| callees.is_empty())
            .map(|(f, _)| *f)
            .unwrap_or_else(|| *pending_callees.keys().next().unwrap());
        pending_callees.remove(next);
        for callees in pending_callees.values_mut() {
            callees.remove(next);
        }
        order.push(next.to_string());
    }
    order
}

/// Renders the source of every function in `reachable`, each preceded by a
/// `===== file:function =====` header, with `// file:line` appended to the
/// internal call sites and to `target`.
pub fn render_slice(
    program: &TargetProgram,
    cg: &CallGraph,
    reachable: &BTreeSet<String>,
    target: &Location,
) -> Result<CodeSlice, GraphError> {
    let target_fn = program
        .function_of(target)
        .map(|id| program.function(id).name.clone())
        .ok_or_else(|| GraphError::UnknownLocation(target.clone()))?;
    if !reachable.contains(&target_fn) {
        return Err(GraphError::TargetOutsideSlice(target.clone()));
    }
    for f in reachable {
        if program.function_by_name(f).is_none() {
            return Err(GraphError::UnknownFunction(f.clone()));
        }
    }
    let mut annotated_sites = cg.internal_sites(reachable);
    annotated_sites.insert(target.clone());

    let mut text = String::new();
    for (i, name) in callee_first_order(cg, reachable).iter().enumerate() {
        let func = program.function_by_name(name).unwrap();
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&slice_header(&func.file, name));
        text.push('\n');
        for (loc, line) in &program.source_text()[name] {
            text.push_str(line);
            if annotated_sites.contains(loc) {
                text.push_str(" // ");
                text.push_str(&loc.to_string());
            }
            text.push('\n');
        }
    }
    Ok(CodeSlice {
        text,
        annotated_sites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn loc(line: u32) -> Location {
        Location::new("cxxfilt.c", line)
    }

    #[test]
    fn cxxfilt_call_graph_has_three_edges() {
        let b = builtin::cxxfilt_toy();
        let cg = build_call_graph(&b.program);
        let v: Vec<&str> = cg.vertices.iter().map(String::as_str).collect();
        assert_eq!(v, ["gnu_special", "internal_cplus_demangle", "main"]);
        let e: BTreeSet<(String, String, Location)> = cg
            .edges
            .iter()
            .map(|e| (e.caller.clone(), e.callee.clone(), e.site.clone()))
            .collect();
        let want = BTreeSet::from([
            ("main".into(), "internal_cplus_demangle".into(), loc(35)),
            ("internal_cplus_demangle".into(), "gnu_special".into(), loc(21)),
            ("internal_cplus_demangle".into(), "gnu_special".into(), loc(26)),
        ]);
        assert_eq!(e, want);
    }

    #[test]
    fn all_three_functions_reach_gnu_special() {
        let cg = build_call_graph(&builtin::cxxfilt_toy().program);
        let r = reachable_functions(&cg, "gnu_special").unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(
            reachable_functions(&cg, "nope"),
            Err(GraphError::UnknownFunction("nope".into()))
        );
    }

    #[test]
    fn isolated_function_is_not_reachable() {
        let cg = CallGraph {
            vertices: ["f", "g", "t"].map(String::from).into(),
            edges: BTreeSet::from([CallEdge {
                caller: "f".into(),
                callee: "t".into(),
                site: Location::new("a.c", 1),
            }]),
        };
        let r = reachable_functions(&cg, "t").unwrap();
        assert_eq!(r, ["f", "t"].map(String::from).into());
    }

    #[test]
    fn cxxfilt_slice_matches_reference_listing() {
        let b = builtin::cxxfilt_toy();
        let cg = build_call_graph(&b.program);
        let r = reachable_functions(&cg, "gnu_special").unwrap();
        let slice = render_slice(&b.program, &cg, &r, &loc(11)).unwrap();
        let expected = "\
===== cxxfilt.c:gnu_special =====
void gnu_special(const char** mangled){
  if('0' <= **mangled && **mangled <= '9'){
    int n = 0;
    while('0' <= **mangled && **mangled <= '9'){
      n *= 10;
      n += **mangled - '0';
      (*mangled)++;
    }
    memcpy(*output, *mangled, n); // cxxfilt.c:11
  }
  ...
}

===== cxxfilt.c:internal_cplus_demangle =====
void internal_cplus_demangle(const char** mangled, bool flag){
  if(flag){
    if(**mangled != '\\0'){
      memcpy(*output, \"cplus_marker\", 12);
      (*output) += 12;
      gnu_special(mangled); // cxxfilt.c:21
    }
  }else{
    if(strlen(*mangled) >= 9 && strncmp(*mangled, \"_GLOBAL_\", 8) == 0 && !('0' <= (*mangled)[8] && (*mangled)[8] <= '9')){
      (*mangled) += 8;
      gnu_special(mangled); // cxxfilt.c:26
    }
  }
  ...
}

===== cxxfilt.c:main =====
int main(){
  const char** mangled = input1();
  bool flag = input2();
  internal_cplus_demangle(mangled, flag); // cxxfilt.c:35
  ...
}
";
        assert_eq!(slice.text, expected);
        assert_eq!(slice.annotated_sites.len(), 4);
    }

    #[test]
    fn target_only_slice_has_one_header_and_one_annotation() {
        let b = builtin::cxxfilt_toy();
        let cg = build_call_graph(&b.program);
        let only = BTreeSet::from(["gnu_special".to_string()]);
        let slice = render_slice(&b.program, &cg, &only, &loc(11)).unwrap();
        assert_eq!(slice.text.matches("=====").count(), 2);
        assert_eq!(slice.text.matches(" // ").count(), 1);
        assert_eq!(slice.annotated_sites, BTreeSet::from([loc(11)]));
    }

    #[test]
    fn target_outside_slice_is_an_error() {
        let b = builtin::cxxfilt_toy();
        let cg = build_call_graph(&b.program);
        let only = BTreeSet::from(["main".to_string()]);
        assert_eq!(
            render_slice(&b.program, &cg, &only, &loc(11)),
            Err(GraphError::TargetOutsideSlice(loc(11)))
        );
    }
}
