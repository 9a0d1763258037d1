fn main() {
    let code = mgt_detect::cli::dispatch(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr());
    std::process::exit(code);
}
