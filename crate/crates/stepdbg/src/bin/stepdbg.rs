use std::io::{BufRead, IsTerminal, Write};

fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    if !std::io::stdout().is_terminal() && !args.iter().any(|a| a == "-no-color") {
        args.push("-no-color".to_string());
    }
    let stdin = std::io::stdin();
    let mut locked: Box<dyn BufRead> = Box::new(stdin.lock());
    let stdout = std::io::stdout();
    let mut out: Box<dyn Write> = Box::new(stdout.lock());
    let stderr = std::io::stderr();
    let mut err: Box<dyn Write> = Box::new(stderr.lock());
    let code = stepdbg::cli::main_with(&args, &mut locked, &mut out, &mut err);
    let _ = out.flush();
    std::process::exit(code);
}
