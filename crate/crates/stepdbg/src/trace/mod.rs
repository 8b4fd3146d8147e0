//! Rendering of evaluation states, the peeking-driven elision policy,
//! display-only let cleanup, and the trace search/filter pipeline.

mod render;
mod search;

pub use render::{render_expr, render_pattern, strip_rec_lets, RenderOpts, Rendering};
pub use search::{
    compile_search, SearchSpec, SearchSyntaxError, StepMatcher, TraceFilter,
};

use std::ops::Range;

use crate::stepper::LastOp;
use crate::syntax::{Expr, ExprKind};

/// One rendered evaluation state, ready for display.
#[derive(Debug, Clone)]
pub struct RenderedStep {
    pub text: String,
    pub redex_span: Option<Range<usize>>,
    pub highlight_spans: Vec<Range<usize>>,
    pub keyword_spans: Vec<Range<usize>>,
    pub is_value_state: bool,
    pub step_index: usize,
    pub side_lets: Option<String>,
}

/// Which step classes are suppressed. With `show_all` set no step is
/// suppressed.
#[derive(Debug, Clone, Default)]
pub struct ElisionPolicy {
    pub show_all: bool,
    pub arith: bool,
    pub boolean: bool,
    pub comparison: bool,
    pub if_bool: bool,
    pub var_lookup: bool,
    pub inside_builtin: bool,
    pub remove_rec_all: bool,
}

impl ElisionPolicy {
    pub fn suppresses(&self, op: &LastOp) -> bool {
        if self.show_all {
            return false;
        }
        match op {
            LastOp::Arith => self.arith,
            LastOp::Boolean => self.boolean,
            LastOp::Comparison => self.comparison,
            LastOp::IfBool => self.if_bool,
            LastOp::VarLookup => self.var_lookup,
            LastOp::InsideBuiltIn => self.inside_builtin,
            LastOp::Other(_) => false,
        }
    }
}

/// Decides whether to print the state a step arrived at. `prev` is the
/// operation that produced the state, `next` the one it is about to
/// perform (absent at either end of the trace). The state prints if
/// either neighbouring state is a value or either operation is not
/// suppressed.
pub fn should_print(
    prev: Option<&LastOp>,
    cur_is_value: bool,
    next: Option<&LastOp>,
    next_is_value: bool,
    policy: &ElisionPolicy,
) -> bool {
    if policy.show_all || cur_is_value || next_is_value {
        return true;
    }
    let prev_suppressed = prev.is_some_and(|op| policy.suppresses(op));
    let next_suppressed = next.is_some_and(|op| policy.suppresses(op));
    !prev_suppressed || !next_suppressed
}

/// Deletes let groups with fully evaluated right-hand sides none of
/// whose names appear free in their body. Bindings holding reference
/// cells are kept so mutable state stays visible.
pub fn remove_unused_lets(e: &Expr) -> Expr {
    crate::stepper::prune_lets(e)
}

/// Strips the outermost run of fully evaluated lets into a display
/// prefix such as `x = 4 y = 5`, returning the prefix text and the
/// remaining expression. The underlying expression is unmodified.
pub fn hoist_side_lets(e: &Expr) -> (String, &Expr) {
    let mut prefix = String::new();
    let mut cur = e;
    loop {
        match &cur.kind {
            ExprKind::Let {
                bindings, body, ..
            } if bindings.iter().all(|(_, rhs)| crate::stepper::is_value(rhs)) => {
                for (pat, rhs) in bindings {
                    if !prefix.is_empty() {
                        prefix.push(' ');
                    }
                    prefix.push_str(&render_pattern(pat));
                    prefix.push_str(" = ");
                    prefix.push_str(&render_expr(rhs, None, &RenderOpts::default()).text);
                }
                cur = body;
            }
            _ => return (prefix, cur),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DisplayOpts {
    pub width: usize,
    pub use_print_as: bool,
    pub remove_rec_all: bool,
    pub side_lets: bool,
}

impl Default for DisplayOpts {
    fn default() -> Self {
        DisplayOpts {
            width: 0,
            use_print_as: true,
            remove_rec_all: false,
            side_lets: false,
        }
    }
}

/// Renders one evaluation state with its redex marked.
pub fn render_state(
    e: &Expr,
    redex: Option<&Expr>,
    opts: &DisplayOpts,
    step_index: usize,
    is_value_state: bool,
) -> RenderedStep {
    let (side_lets, shown_expr) = if opts.side_lets {
        let (prefix, inner) = hoist_side_lets(e);
        (
            if prefix.is_empty() { None } else { Some(prefix) },
            inner,
        )
    } else {
        (None, e)
    };
    let rendering = render_expr(
        shown_expr,
        redex,
        &RenderOpts {
            width: opts.width,
            use_print_as: opts.use_print_as,
            remove_rec_all: opts.remove_rec_all,
        },
    );
    RenderedStep {
        text: rendering.text,
        redex_span: rendering.redex_span,
        highlight_spans: Vec::new(),
        keyword_spans: rendering.keyword_spans,
        is_value_state,
        step_index,
        side_lets,
    }
}
