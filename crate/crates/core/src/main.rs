fn main() {
    std::process::exit(trojanscope::cli::run(std::env::args_os()));
}
