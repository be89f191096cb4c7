use std::io::Write;

fn main() {
    let (code, out) = quanta_cli::run_command(std::env::args_os());
    if !out.is_empty() {
        let text = out.trim_end();
        // a closed pipe (e.g. `| head`) is not worth a panic
        let _ = if text.starts_with("{\"error\"") {
            writeln!(std::io::stderr(), "{text}")
        } else {
            writeln!(std::io::stdout(), "{text}")
        };
    }
    std::process::exit(code);
}
