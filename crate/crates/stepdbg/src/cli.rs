//! Command-line entry point: wires the parser, stepper and trace
//! pipeline together, plus the bytecode mode and the interactive
//! stepping dialogue.

use std::io::{BufRead, Write};
use std::ops::Range;

use crate::bytecode;
use crate::stepper::{
    self, Env, EvalOptions, LastOp, StepOutcome, Stepper,
};
use crate::syntax::{parse_program, Expr};
use crate::trace::{
    render_state, should_print, DisplayOpts, ElisionPolicy, RenderedStep, SearchSpec, TraceFilter,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Inline(String),
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Silent,
    ShowFinal,
    ShowAll,
    Bytecode,
    Interactive,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub source: Source,
    pub mode: Mode,
    pub eval: EvalOptions,
    pub policy: ElisionPolicy,
    pub search: SearchSpec,
    pub side_lets: bool,
    pub color: bool,
    pub width: usize,
    pub dump_code: bool,
}

const USAGE: &str = "usage: stepdbg [flags] file.mml | -e 'expression'
modes: -show | -show-all | -bytecode | -interactive   (default: run silently)
eval:  -fast-curry -fast-for -no-typecheck -max-steps N
trace: -side-lets -remove-rec-all -no-color -width N -elide CLASS
       (classes: arith boolean comparison if-bool var-lookup inside-builtin)
search: -search P -highlight -no-parens -regexp -upto N -invert-search -n N
        -after P -until P -after-any P -until-any P -invert-after -invert-until
        -stop -repeat
bytecode: -dump-code";

fn parse_args(args: &[String]) -> Result<Invocation, String> {
    let mut source = None;
    let mut mode = None;
    let mut eval = EvalOptions::default();
    let mut policy = ElisionPolicy::default();
    let mut search = SearchSpec::default();
    let mut side_lets = false;
    let mut color = true;
    let mut width = 80usize;
    let mut dump_code = false;
    let mut search_or_elision_flag_seen: Option<&'static str> = None;

    let mut i = 0;
    let set_mode = |mode: &mut Option<Mode>, m: Mode| -> Result<(), String> {
        match mode {
            None => {
                *mode = Some(m);
                Ok(())
            }
            Some(prev) if *prev == m => Ok(()),
            Some(_) => Err("exactly one mode may be given".into()),
        }
    };
    while i < args.len() {
        let arg = args[i].as_str();
        let mut value = |what: &str| -> Result<String, String> {
            i += 1;
            args.get(i)
                .cloned()
                .ok_or_else(|| format!("{arg} needs {what}"))
        };
        match arg {
            "-e" => source = Some(Source::Inline(value("an expression")?)),
            "-show" => set_mode(&mut mode, Mode::ShowFinal)?,
            "-show-all" => {
                set_mode(&mut mode, Mode::ShowAll)?;
                policy.show_all = true;
            }
            "-bytecode" => set_mode(&mut mode, Mode::Bytecode)?,
            "-interactive" => set_mode(&mut mode, Mode::Interactive)?,
            "-fast-curry" => eval.fast_curry = true,
            "-fast-for" => eval.fast_for = true,
            "-no-typecheck" => eval.no_typecheck = true,
            "-max-steps" => {
                eval.max_steps =
                    Some(value("a count")?.parse().map_err(|_| "-max-steps needs a number")?)
            }
            "-elide" => {
                // suppress one step class; implies the trace display
                set_mode(&mut mode, Mode::ShowAll)?;
                policy.show_all = false;
                match value("a step class")?.as_str() {
                    "arith" => policy.arith = true,
                    "boolean" => policy.boolean = true,
                    "comparison" => policy.comparison = true,
                    "if-bool" => policy.if_bool = true,
                    "var-lookup" => policy.var_lookup = true,
                    "inside-builtin" => policy.inside_builtin = true,
                    other => return Err(format!("unknown step class {other}")),
                }
                search_or_elision_flag_seen.get_or_insert("-elide");
            }
            "-side-lets" => side_lets = true,
            "-remove-rec-all" => {
                policy.remove_rec_all = true;
                search_or_elision_flag_seen.get_or_insert("-remove-rec-all");
            }
            "-no-color" => color = false,
            "-width" => {
                width = value("a width")?.parse().map_err(|_| "-width needs a number")?
            }
            "-dump-code" => dump_code = true,
            "-search" => {
                search.pattern = Some(value("a pattern")?);
                search_or_elision_flag_seen.get_or_insert("-search");
            }
            "-highlight" => {
                search.highlight = true;
                search_or_elision_flag_seen.get_or_insert("-highlight");
            }
            "-no-parens" => search.no_parens = true,
            "-regexp" => search.regexp_mode = true,
            "-upto" => {
                // takes a count; without one it defaults to three lines
                match args.get(i + 1).and_then(|v| v.parse::<usize>().ok()) {
                    Some(n) => {
                        i += 1;
                        search.upto = Some(n);
                    }
                    None => search.upto = Some(3),
                }
                search_or_elision_flag_seen.get_or_insert("-upto");
            }
            "-invert-search" => search.invert = true,
            "-n" => {
                search.limit_n =
                    Some(value("a count")?.parse().map_err(|_| "-n needs a number")?);
                search_or_elision_flag_seen.get_or_insert("-n");
            }
            "-after" => {
                search.after = Some(value("a pattern")?);
                search_or_elision_flag_seen.get_or_insert("-after");
            }
            "-until" => {
                search.until = Some(value("a pattern")?);
                search_or_elision_flag_seen.get_or_insert("-until");
            }
            "-after-any" => {
                search.after_any = Some(value("a pattern")?);
                search_or_elision_flag_seen.get_or_insert("-after-any");
            }
            "-until-any" => {
                search.until_any = Some(value("a pattern")?);
                search_or_elision_flag_seen.get_or_insert("-until-any");
            }
            "-invert-after" => search.invert_after = true,
            "-invert-until" => search.invert_until = true,
            "-stop" => {
                search.stop = true;
                search_or_elision_flag_seen.get_or_insert("-stop");
            }
            "-repeat" => search.repeat = true,
            _ if arg.starts_with('-') && arg.len() > 1 => {
                return Err(format!("unknown flag {arg}\n{USAGE}"))
            }
            _ => {
                if source.is_some() {
                    return Err("exactly one source may be given".into());
                }
                source = Some(Source::File(arg.to_string()));
            }
        }
        i += 1;
    }
    let source = source.ok_or_else(|| format!("no source given\n{USAGE}"))?;
    let mode = mode.unwrap_or(Mode::Silent);
    if mode == Mode::Bytecode {
        if let Some(flag) = search_or_elision_flag_seen {
            return Err(format!("{flag} does not apply in -bytecode mode"));
        }
    }
    if std::env::var("STEPDBG_NO_COLOR").as_deref() == Ok("1") {
        color = false;
    }
    Ok(Invocation {
        source,
        mode,
        eval,
        policy,
        search,
        side_lets,
        color,
        width,
        dump_code,
    })
}

/// Runs the debugger. Exit codes: 0 on normal completion, 1 after an
/// uncaught exception, 2 on syntax or flag errors, 3 on a run-time type
/// error.
pub fn main_with(
    args: &[String],
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let inv = match parse_args(args) {
        Ok(inv) => inv,
        Err(msg) => {
            let _ = writeln!(stderr, "stepdbg: {msg}");
            return 2;
        }
    };
    let text = match &inv.source {
        Source::Inline(s) => s.clone(),
        Source::File(path) => match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(stderr, "stepdbg: cannot read {path}: {e}");
                return 2;
            }
        },
    };
    let program = match parse_program(&text) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "stepdbg: syntax error at {e}");
            return 2;
        }
    };
    let env = Env::with_prelude();
    let mut expr = program.to_expr();

    if inv.mode == Mode::Bytecode {
        return run_bytecode(&inv, &expr, stdout, stderr);
    }
    stepper::resolve_operators(&mut expr, env.builtins());

    match inv.mode {
        Mode::Silent | Mode::ShowFinal => run_batch(&inv, &env, expr, stdout, stderr),
        Mode::ShowAll | Mode::Interactive => {
            let mut trace = match Trace::new(&inv, &env, expr) {
                Ok(t) => t,
                Err(msg) => {
                    let _ = writeln!(stderr, "stepdbg: {msg}");
                    return 2;
                }
            };
            if inv.mode == Mode::ShowAll {
                trace.run_all(stdout, stderr)
            } else {
                trace.interactive(stdin, stdout, stderr)
            }
        }
        Mode::Bytecode => unreachable!(),
    }
}

fn run_batch(
    inv: &Invocation,
    env: &Env,
    expr: Expr,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let mut observer = |_: &Expr, _: &LastOp, _: &Expr| {};
    match stepper::run(env, &expr, &mut observer, &inv.eval, stdout) {
        Ok(outcome) => match outcome.outcome {
            stepper::Outcome::Value(v) => {
                if inv.mode == Mode::ShowFinal {
                    let shown = render_state(&v, None, &display_opts(inv), 0, true);
                    let _ = writeln!(stdout, "{}", shown.text);
                }
                0
            }
            stepper::Outcome::Uncaught(name, payload) => {
                let _ = writeln!(stdout, "{}", exception_line(&name, &payload));
                1
            }
            stepper::Outcome::RunTimeTypeError(msg) => {
                let _ = writeln!(stdout, "Run time type error:\n  {msg}");
                3
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "stepdbg: {e}");
            2
        }
    }
}

fn display_opts(inv: &Invocation) -> DisplayOpts {
    DisplayOpts {
        width: inv.width.saturating_sub(4).max(16),
        use_print_as: true,
        remove_rec_all: inv.policy.remove_rec_all,
        side_lets: inv.side_lets,
    }
}

fn exception_line(name: &str, payload: &Option<Expr>) -> String {
    match payload {
        None => format!("Exception: {name}."),
        Some(p) => {
            let shown = crate::trace::render_expr(p, None, &Default::default()).text;
            format!("Exception: {name} {shown}.")
        }
    }
}

/// The shared trace driver for batch and interactive display.
struct Trace<'e> {
    stepper: Stepper<'e>,
    filter: TraceFilter,
    policy: ElisionPolicy,
    display: DisplayOpts,
    color: bool,
    step_index: usize,
    prev_op: Option<LastOp>,
    side_lets_width: usize,
    finished: Option<i32>,
}

enum Emitted {
    Lines(Vec<String>),
    Final(i32),
}

impl<'e> Trace<'e> {
    fn new(inv: &Invocation, env: &'e Env, expr: Expr) -> Result<Trace<'e>, String> {
        let filter = TraceFilter::new(&inv.search).map_err(|e| e.to_string())?;
        Ok(Trace {
            stepper: Stepper::new(env, expr, inv.eval.clone()),
            filter,
            policy: inv.policy.clone(),
            display: display_opts(inv),
            color: inv.color,
            step_index: 0,
            prev_op: None,
            side_lets_width: 0,
            finished: None,
        })
    }

    /// Renders and offers the current state; returns formatted lines to
    /// print. `halt` asks the driver to stop evaluating.
    fn current_lines(&mut self) -> (Vec<String>, bool) {
        let is_val = self.stepper.is_done();
        let (next_op, redex) = match self.stepper.find_redex() {
            Ok((op, redex)) => (Some(op), Some(redex)),
            Err(_) => (None, None),
        };
        let shown = should_print(
            self.prev_op.as_ref(),
            false,
            next_op.as_ref(),
            is_val,
            &self.policy,
        ) || self.step_index == 0;
        let mut rendered = render_state(
            self.stepper.current(),
            redex,
            &self.display,
            self.step_index,
            is_val,
        );
        if self.filter.highlight {
            rendered.highlight_spans = self.filter.pattern_spans(&rendered.text);
        }
        let plain = rendered.text.clone();
        let formatted = format_step(
            &rendered,
            self.step_index == 0,
            self.color,
            &mut self.side_lets_width,
        );
        let offer = self
            .filter
            .offer(&plain, shown, Box::new(move || formatted));
        (offer.emit, offer.stop)
    }

    /// Advances to the next state, printing builtin output as it
    /// happens. Returns lines for the new state, or the final verdict.
    fn advance(&mut self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Emitted {
        match self.stepper.advance(stdout) {
            Ok(StepOutcome::Next(_, op)) => {
                self.prev_op = Some(op);
                self.step_index += 1;
                let (lines, halt) = self.current_lines();
                if halt && self.finished.is_none() {
                    self.finished = Some(0);
                }
                Emitted::Lines(lines)
            }
            Ok(StepOutcome::AlreadyValue) => Emitted::Final(0),
            Ok(StepOutcome::Uncaught(name, payload)) => {
                let _ = writeln!(stdout, "{}", exception_line(&name, &payload));
                Emitted::Final(1)
            }
            Ok(StepOutcome::RunTimeTypeError(msg)) => {
                let _ = writeln!(stdout, "Run time type error:\n  {msg}");
                Emitted::Final(3)
            }
            Err(e) => {
                let _ = writeln!(stderr, "stepdbg: {e}");
                Emitted::Final(2)
            }
        }
    }

    fn run_all(&mut self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
        let (lines, halt) = self.current_lines();
        for l in lines {
            let _ = writeln!(stdout, "{l}");
        }
        if halt {
            return 0;
        }
        loop {
            if self.stepper.is_done() {
                return 0;
            }
            match self.advance(stdout, stderr) {
                Emitted::Lines(lines) => {
                    for l in lines {
                        let _ = writeln!(stdout, "{l}");
                    }
                    if self.finished.is_some() {
                        return self.finished.unwrap();
                    }
                }
                Emitted::Final(code) => return code,
            }
        }
    }

    /// Advances until one more shown step has been printed (or the
    /// evaluation ends). Returns the exit code when finished.
    fn advance_shown(&mut self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Option<i32> {
        loop {
            if self.stepper.is_done() {
                return Some(0);
            }
            match self.advance(stdout, stderr) {
                Emitted::Lines(lines) => {
                    let printed = !lines.is_empty();
                    for l in lines {
                        let _ = writeln!(stdout, "{l}");
                    }
                    if let Some(code) = self.finished {
                        return Some(code);
                    }
                    if printed {
                        return None;
                    }
                }
                Emitted::Final(code) => return Some(code),
            }
        }
    }

    fn interactive(
        &mut self,
        stdin: &mut dyn BufRead,
        stdout: &mut dyn Write,
        stderr: &mut dyn Write,
    ) -> i32 {
        let (lines, halt) = self.current_lines();
        for l in lines {
            let _ = writeln!(stdout, "{l}");
        }
        if halt {
            return 0;
        }
        loop {
            if self.stepper.is_done() {
                return 0;
            }
            let _ = write!(stderr, "?");
            let _ = stderr.flush();
            let mut line = String::new();
            match stdin.read_line(&mut line) {
                Ok(0) | Err(_) => return 0,
                Ok(_) => {}
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["exit"] => return 0,
                ["run"] => {
                    loop {
                        if self.stepper.is_done() {
                            return 0;
                        }
                        match self.advance_shown(stdout, stderr) {
                            Some(code) => return code,
                            None => continue,
                        }
                    }
                }
                ["next"] => {
                    if let Some(code) = self.advance_shown(stdout, stderr) {
                        return code;
                    }
                }
                ["next", n] => match n.parse::<usize>() {
                    Ok(count) => {
                        for _ in 0..count {
                            if let Some(code) = self.advance_shown(stdout, stderr) {
                                return code;
                            }
                        }
                    }
                    Err(_) => {
                        let _ = writeln!(stderr, "commands: next | next N | run | exit");
                    }
                },
                [] => {
                    if let Some(code) = self.advance_shown(stdout, stderr) {
                        return code;
                    }
                }
                _ => {
                    let _ = writeln!(stderr, "commands: next | next N | run | exit");
                }
            }
        }
    }
}

/// Lays out one rendered step: prefix, wrapping indents, then either
/// ANSI styling or a caret line under the redex.
fn format_step(
    step: &RenderedStep,
    first: bool,
    color: bool,
    side_lets_width: &mut usize,
) -> String {
    let prefix = if first {
        "    ".to_string()
    } else if let Some(side) = &step.side_lets {
        *side_lets_width = (*side_lets_width).max(side.len());
        format!("{side:>width$} =>  ", width = *side_lets_width)
    } else if *side_lets_width > 0 {
        format!("{:>width$} =>  ", "", width = *side_lets_width)
    } else {
        "=>  ".to_string()
    };
    let cont_indent = " ".repeat(4);
    let body = if color {
        style_text(step)
    } else {
        step.text.clone()
    };
    let mut out = String::new();
    for (i, line) in body.split('\n').enumerate() {
        if i == 0 {
            out.push_str(&prefix);
        } else {
            out.push('\n');
            out.push_str(&cont_indent);
        }
        out.push_str(line);
    }
    if !color {
        if let Some(span) = &step.redex_span {
            append_carets(&mut out, &step.text, span, prefix.len(), cont_indent.len());
        }
    }
    out
}

/// Adds caret lines under the redex span, honoring line wraps.
fn append_carets(
    out: &mut String,
    text: &str,
    span: &Range<usize>,
    first_prefix: usize,
    cont_prefix: usize,
) {
    let mut line_start = 0usize;
    let mut caret_lines: Vec<(usize, String)> = Vec::new();
    for (line_no, line) in text.split('\n').enumerate() {
        let line_end = line_start + line.len();
        let s = span.start.max(line_start);
        let e = span.end.min(line_end);
        if s < e {
            let lead = if line_no == 0 { first_prefix } else { cont_prefix };
            // continuation lines carry a two-space indent in the text
            let col = s - line_start;
            let mut caret = " ".repeat(lead + col);
            caret.push_str(&"^".repeat(e - s));
            caret_lines.push((line_no, caret));
        }
        line_start = line_end + 1;
    }
    // carets go immediately after their text line
    let lines: Vec<&str> = out.split('\n').collect();
    let mut rebuilt = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        rebuilt.push(l.to_string());
        for (line_no, caret) in &caret_lines {
            if *line_no == i {
                rebuilt.push(caret.clone());
            }
        }
    }
    *out = rebuilt.join("\n");
}

const BOLD: u8 = 1;
const UNDER: u8 = 2;
const INVERT: u8 = 4;

/// Underlines the redex, bolds keywords and inverts search highlights.
fn style_text(step: &RenderedStep) -> String {
    let n = step.text.len();
    let mut attrs = vec![0u8; n];
    let mut mark = |r: &Range<usize>, bit: u8| {
        for a in attrs.iter_mut().take(r.end.min(n)).skip(r.start) {
            *a |= bit;
        }
    };
    for r in &step.keyword_spans {
        mark(r, BOLD);
    }
    if let Some(r) = &step.redex_span {
        mark(r, UNDER);
    }
    for r in &step.highlight_spans {
        mark(r, INVERT);
    }
    let mut out = String::new();
    let mut cur = 0u8;
    for (i, ch) in step.text.char_indices() {
        let want = if ch == '\n' { 0 } else { attrs[i] };
        if want != cur {
            out.push_str("\x1b[0m");
            if want & BOLD != 0 {
                out.push_str("\x1b[1m");
            }
            if want & UNDER != 0 {
                out.push_str("\x1b[4m");
            }
            if want & INVERT != 0 {
                out.push_str("\x1b[7m");
            }
            cur = want;
        }
        out.push(ch);
    }
    if cur != 0 {
        out.push_str("\x1b[0m");
    }
    out
}

fn run_bytecode(
    inv: &Invocation,
    expr: &Expr,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let core = match bytecode::lower(expr) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "stepdbg: {e}");
            return 2;
        }
    };
    if inv.dump_code {
        let code = bytecode::compile(&core);
        let _ = write!(stdout, "{}", bytecode::dump_code(&code));
    }
    match bytecode::bytecode_trace(&core) {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(stdout, "{l}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "stepdbg: {e}");
            2
        }
    }
}

/// Convenience wrapper that captures output, for tests and examples.
pub struct CliResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str], input: &str) -> CliResult {
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let mut stdin = std::io::BufReader::new(input.as_bytes());
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = main_with(&args, &mut stdin, &mut stdout, &mut stderr);
    CliResult {
        code,
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}
