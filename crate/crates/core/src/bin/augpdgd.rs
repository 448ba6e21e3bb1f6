fn main() {
    std::process::exit(augpdgd::cli::run(std::env::args_os()));
}
