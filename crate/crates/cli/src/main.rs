use std::io::Write;

use bciphs_cli::commands::OUT_DIR_ENV;

fn main() {
    let env_out = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(Into::into);
    let (status, con) = bciphs_cli::execute(std::env::args_os(), env_out);
    let _ = std::io::stdout().write_all(con.out.as_bytes());
    let _ = std::io::stderr().write_all(con.err.as_bytes());
    std::process::exit(status.code());
}
